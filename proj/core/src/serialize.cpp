#include "hfl/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace hfl {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'H', 'F', 'L', 'C'};
constexpr uint32_t kVersion = 1;

json spec_header(const ModelSpec& spec, Shape input_shape) {
    json layers = json::array();
    for (const LayerSpec& layer : spec.layers) {
        if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
            layers.push_back({{"type", "conv"},
                              {"kernel", conv->kernel},
                              {"channels", conv->channels},
                              {"maxpool", conv->maxpool}});
        } else if (const auto* dense = std::get_if<DenseSpec>(&layer)) {
            layers.push_back({{"type", "dense"}, {"units", dense->units}});
        } else if (std::holds_alternative<ReluSpec>(layer)) {
            layers.push_back({{"type", "relu"}});
        } else {
            layers.push_back({{"type", "softmax"},
                              {"classes", std::get<SoftmaxOutputSpec>(layer).classes}});
        }
    }
    return json{{"layers", layers},
                {"shape", {input_shape.h, input_shape.w, input_shape.c}}};
}

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_raw(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelSpec& spec, Shape input_shape,
                     const ParamVector& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(kMagic, 4);
    write_raw(out, kVersion);
    const std::string header = spec_header(spec, input_shape).dump();
    write_raw(out, static_cast<uint64_t>(header.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    write_raw(out, static_cast<uint64_t>(params.size()));
    out.write(reinterpret_cast<const char*>(params.data()),
              static_cast<std::streamsize>(params.size() * sizeof(double)));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const uint32_t version = read_raw<uint32_t>(in);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

    const uint64_t header_len = read_raw<uint64_t>(in);
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw std::runtime_error("checkpoint: truncated header");
    json doc = json::parse(header);

    Checkpoint ck;
    ck.input_shape = {doc.at("shape").at(0).get<int>(), doc.at("shape").at(1).get<int>(),
                      doc.at("shape").at(2).get<int>()};
    for (const auto& layer : doc.at("layers")) {
        const std::string type = layer.at("type").get<std::string>();
        if (type == "conv") {
            ck.spec.layers.push_back(ConvSpec{layer.at("kernel").get<int>(),
                                              layer.at("channels").get<int>(),
                                              layer.at("maxpool").get<bool>()});
        } else if (type == "dense") {
            ck.spec.layers.push_back(DenseSpec{layer.at("units").get<int>()});
        } else if (type == "relu") {
            ck.spec.layers.push_back(ReluSpec{});
        } else if (type == "softmax") {
            ck.spec.layers.push_back(SoftmaxOutputSpec{layer.at("classes").get<int>()});
        } else {
            throw std::runtime_error("checkpoint: unknown layer type " + type);
        }
    }

    const uint64_t count = read_raw<uint64_t>(in);
    ck.params.resize(count);
    in.read(reinterpret_cast<char*>(ck.params.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated parameter block");
    return ck;
}

}  // namespace hfl
