#include "hfl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "hfl/rng.hpp"

namespace hfl {

std::vector<double> class_template(int k, int num_classes, Shape shape) {
    // Bright stripe pattern with class-disjoint support: pixel (y,x,ch) is
    // bright iff (y*w + x + ch) falls in class k's residue class.
    std::vector<double> px(static_cast<size_t>(shape.size()), 0.1);
    size_t i = 0;
    for (int y = 0; y < shape.h; ++y)
        for (int x = 0; x < shape.w; ++x)
            for (int ch = 0; ch < shape.c; ++ch, ++i)
                if ((y * shape.w + x + ch) % num_classes == k) px[i] = 0.85;
    return px;
}

Dataset synth_dataset(int num_classes, int per_class, Shape shape, double noise,
                      uint64_t rng_seed) {
    if (num_classes < 2) throw std::invalid_argument("synth_dataset: num_classes must be >= 2");
    if (per_class < 1) throw std::invalid_argument("synth_dataset: per_class must be >= 1");
    if (noise < 0) throw std::invalid_argument("synth_dataset: noise must be >= 0");
    if (shape.h <= 0 || shape.w <= 0 || shape.c <= 0)
        throw std::invalid_argument("synth_dataset: shape dimensions must be positive");

    Dataset out;
    out.num_classes = num_classes;
    out.shape = shape;
    out.examples.reserve(static_cast<size_t>(num_classes) * per_class);
    for (int k = 0; k < num_classes; ++k) {
        const std::vector<double> tmpl = class_template(k, num_classes, shape);
        auto eng = make_engine(derive_seed(rng_seed, {0x73796e7468ULL, static_cast<uint64_t>(k)}));
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int i = 0; i < per_class; ++i) {
            Example e;
            e.label = k;
            e.pixels = tmpl;
            if (noise > 0) {
                for (double& p : e.pixels)
                    p = std::clamp(p + noise * gauss(eng), 0.0, 1.0);
            }
            out.examples.push_back(std::move(e));
        }
    }
    return out;
}

namespace {

uint32_t read_be32(std::istream& in, const std::string& what) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw std::runtime_error("idx: truncated file while reading " + what);
    return (uint32_t(buf[0]) << 24) | (uint32_t(buf[1]) << 16) | (uint32_t(buf[2]) << 8) |
           uint32_t(buf[3]);
}

void write_be32(std::ostream& out, uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot open images file " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot open labels file " + labels_path);

    const uint32_t img_magic = read_be32(img, "images magic");
    if (img_magic != 0x00000803u)
        throw std::runtime_error("idx: bad magic number in images file (expected 0x00000803)");
    const uint32_t lab_magic = read_be32(lab, "labels magic");
    if (lab_magic != 0x00000801u)
        throw std::runtime_error("idx: bad magic number in labels file (expected 0x00000801)");

    const uint32_t n_img = read_be32(img, "image count");
    const uint32_t rows = read_be32(img, "row count");
    const uint32_t cols = read_be32(img, "column count");
    const uint32_t n_lab = read_be32(lab, "label count");
    if (n_img != n_lab)
        throw std::runtime_error("idx: image/label count mismatch (" + std::to_string(n_img) +
                                 " images vs " + std::to_string(n_lab) + " labels)");

    Dataset out;
    out.shape = {static_cast<int>(rows), static_cast<int>(cols), 1};
    out.examples.resize(n_img);

    std::vector<unsigned char> pix(static_cast<size_t>(rows) * cols);
    for (uint32_t i = 0; i < n_img; ++i) {
        img.read(reinterpret_cast<char*>(pix.data()), static_cast<std::streamsize>(pix.size()));
        if (!img) throw std::runtime_error("idx: truncated file while reading image pixels");
        int lbl = lab.get();
        if (lbl == EOF) throw std::runtime_error("idx: truncated file while reading labels");
        Example& e = out.examples[i];
        e.label = lbl;
        e.pixels.resize(pix.size());
        for (size_t j = 0; j < pix.size(); ++j) e.pixels[j] = pix[j] / 255.0;
        out.num_classes = std::max(out.num_classes, lbl + 1);
    }
    return out;
}

void write_idx(const Dataset& data, const std::string& images_path,
               const std::string& labels_path) {
    if (data.shape.c != 1)
        throw std::invalid_argument("idx: only single-channel datasets can be exported");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot open images file for writing " + images_path);
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot open labels file for writing " + labels_path);

    write_be32(img, 0x00000803u);
    write_be32(img, static_cast<uint32_t>(data.size()));
    write_be32(img, static_cast<uint32_t>(data.shape.h));
    write_be32(img, static_cast<uint32_t>(data.shape.w));
    write_be32(lab, 0x00000801u);
    write_be32(lab, static_cast<uint32_t>(data.size()));

    for (const Example& e : data.examples) {
        for (double p : e.pixels) {
            const double scaled = std::clamp(p, 0.0, 1.0) * 255.0;
            img.put(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
        }
        lab.put(static_cast<char>(static_cast<unsigned char>(e.label)));
    }
}

PartitionPlan dirichlet_partition(const Dataset& data, int num_clients, double alpha,
                                  uint64_t rng_seed) {
    if (num_clients < 1) throw std::invalid_argument("dirichlet_partition: num_clients must be >= 1");
    if (alpha <= 0) throw std::invalid_argument("dirichlet_partition: alpha must be > 0");
    if (static_cast<size_t>(num_clients) > data.size())
        throw std::invalid_argument("dirichlet_partition: more clients than examples");

    PartitionPlan plan;
    plan.alpha = alpha;
    plan.assignments.assign(static_cast<size_t>(num_clients), {});

    // Group example indices by class.
    std::vector<std::vector<int>> by_class(static_cast<size_t>(data.num_classes));
    for (size_t i = 0; i < data.size(); ++i)
        by_class[static_cast<size_t>(data.examples[i].label)].push_back(static_cast<int>(i));

    for (int k = 0; k < data.num_classes; ++k) {
        auto& idxs = by_class[static_cast<size_t>(k)];
        if (idxs.empty()) continue;
        auto eng = make_engine(derive_seed(rng_seed, {0x64697269ULL, static_cast<uint64_t>(k)}));
        std::shuffle(idxs.begin(), idxs.end(), eng);

        // Dirichlet(alpha,...,alpha) draw via normalized gammas.
        std::vector<double> props(static_cast<size_t>(num_clients));
        std::gamma_distribution<double> gamma(alpha, 1.0);
        double total = 0;
        for (double& p : props) {
            p = gamma(eng);
            total += p;
        }
        if (total <= 0) {
            // all-zero draw (possible for tiny alpha): fall back to uniform
            std::fill(props.begin(), props.end(), 1.0);
            total = static_cast<double>(num_clients);
        }

        // Integer counts by largest remainder so that they sum to |class|.
        const int m = static_cast<int>(idxs.size());
        std::vector<int> counts(static_cast<size_t>(num_clients));
        std::vector<std::pair<double, int>> rema;
        int assigned = 0;
        for (int cidx = 0; cidx < num_clients; ++cidx) {
            const double exact = props[static_cast<size_t>(cidx)] / total * m;
            counts[static_cast<size_t>(cidx)] = static_cast<int>(std::floor(exact));
            assigned += counts[static_cast<size_t>(cidx)];
            rema.push_back({exact - std::floor(exact), cidx});
        }
        std::stable_sort(rema.begin(), rema.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (int r = 0; r < m - assigned; ++r)
            counts[static_cast<size_t>(rema[static_cast<size_t>(r)].second)]++;

        int cursor = 0;
        for (int cidx = 0; cidx < num_clients; ++cidx) {
            for (int j = 0; j < counts[static_cast<size_t>(cidx)]; ++j)
                plan.assignments[static_cast<size_t>(cidx)].push_back(idxs[static_cast<size_t>(cursor++)]);
        }
    }

    // Repair empty shards: move one example from the largest shard.
    for (size_t cidx = 0; cidx < plan.assignments.size(); ++cidx) {
        if (!plan.assignments[cidx].empty()) continue;
        size_t largest = 0;
        for (size_t j = 1; j < plan.assignments.size(); ++j)
            if (plan.assignments[j].size() > plan.assignments[largest].size()) largest = j;
        if (plan.assignments[largest].size() <= 1)
            throw std::runtime_error("dirichlet_partition: cannot repair empty shard");
        plan.assignments[cidx].push_back(plan.assignments[largest].back());
        plan.assignments[largest].pop_back();
    }
    for (auto& a : plan.assignments) std::sort(a.begin(), a.end());
    return plan;
}

Dataset subset(const Dataset& data, std::span<const int> indices) {
    Dataset out;
    out.num_classes = data.num_classes;
    out.shape = data.shape;
    out.examples.reserve(indices.size());
    for (int i : indices) out.examples.push_back(data.examples.at(static_cast<size_t>(i)));
    return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    if (!a.empty() && !b.empty() && !(a.shape == b.shape))
        throw std::invalid_argument("concat: shape mismatch");
    Dataset out = a.empty() ? b : a;
    if (!a.empty() && !b.empty()) {
        out.examples.insert(out.examples.end(), b.examples.begin(), b.examples.end());
        out.num_classes = std::max(a.num_classes, b.num_classes);
    }
    return out;
}

}  // namespace hfl
