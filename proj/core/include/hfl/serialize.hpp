#pragma once

#include <string>

#include "hfl/model.hpp"

namespace hfl {

// Checkpoint: "HFLC" magic, format version, JSON layout header (layer list +
// input shape), then the raw little-endian doubles of the parameter vector.
void save_checkpoint(const std::string& path, const ModelSpec& spec, Shape input_shape,
                     const ParamVector& params);

struct Checkpoint {
    ModelSpec spec;
    Shape input_shape;
    ParamVector params;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace hfl
