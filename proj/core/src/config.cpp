#include "hfl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hfl {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config: " + path + ": " + what);
}

// Tracks consumed keys so unknown ones can be reported with their path.
class Reader {
public:
    Reader(const json& obj, std::string path) : obj_(&obj), path_(std::move(path)) {
        if (!obj.is_object()) fail(path_, "expected an object");
    }

    bool has(const std::string& key) const { return obj_->contains(key); }

    template <typename T>
    T get(const std::string& key, T fallback) {
        seen_.insert(key);
        if (!obj_->contains(key)) return fallback;
        try {
            return obj_->at(key).get<T>();
        } catch (const json::exception& e) {
            fail(path_ + "." + key, std::string("wrong type (") + e.what() + ")");
        }
    }

    const json* raw(const std::string& key) {
        seen_.insert(key);
        return obj_->contains(key) ? &obj_->at(key) : nullptr;
    }

    Reader section(const std::string& key) {
        seen_.insert(key);
        if (!obj_->contains(key)) return Reader(empty_, path_ + "." + key);
        return Reader(obj_->at(key), path_ + "." + key);
    }

    void finish() const {
        for (auto it = obj_->begin(); it != obj_->end(); ++it)
            if (!seen_.count(it.key()))
                fail(path_.empty() ? it.key() : path_ + "." + it.key(), "unknown key");
    }

    const std::string& path() const { return path_; }

private:
    static const json empty_;
    const json* obj_;
    std::string path_;
    std::set<std::string> seen_;
};

const json Reader::empty_ = json::object();

Shape parse_shape(Reader& r, const std::string& key, Shape fallback) {
    const json* v = r.raw(key);
    if (!v) return fallback;
    if (!v->is_array() || v->size() != 3) fail(r.path() + "." + key, "expected [h, w, c]");
    Shape s;
    try {
        s.h = (*v)[0].get<int>();
        s.w = (*v)[1].get<int>();
        s.c = (*v)[2].get<int>();
    } catch (const json::exception& e) {
        fail(r.path() + "." + key, std::string("wrong type (") + e.what() + ")");
    }
    return s;
}

ModelSpec parse_model(Reader& model) {
    ModelSpec spec;
    const json* layers = model.raw("layers");
    if (!layers) return spec;
    if (!layers->is_array()) fail(model.path() + ".layers", "expected an array");
    for (size_t i = 0; i < layers->size(); ++i) {
        Reader lr((*layers)[i], model.path() + ".layers[" + std::to_string(i) + "]");
        const std::string type = lr.get<std::string>("type", "");
        if (type == "conv") {
            ConvSpec conv;
            conv.kernel = lr.get<int>("kernel", 3);
            conv.channels = lr.get<int>("channels", 32);
            conv.maxpool = lr.get<bool>("maxpool", true);
            spec.layers.push_back(conv);
        } else if (type == "dense") {
            spec.layers.push_back(DenseSpec{lr.get<int>("units", 32)});
        } else if (type == "relu") {
            spec.layers.push_back(ReluSpec{});
        } else if (type == "softmax") {
            spec.layers.push_back(SoftmaxOutputSpec{lr.get<int>("classes", 10)});
        } else {
            fail(lr.path() + ".type", "unknown layer type '" + type + "'");
        }
        lr.finish();
    }
    return spec;
}

TrainingAttack parse_attack_kind(const std::string& s, const std::string& path) {
    if (s == "none") return TrainingAttack::none;
    if (s == "tlf") return TrainingAttack::tlf;
    if (s == "ulf") return TrainingAttack::ulf;
    if (s == "csf") return TrainingAttack::csf;
    if (s == "ssf") return TrainingAttack::ssf;
    fail(path, "unknown attack kind '" + s + "'");
}

ItaKind parse_ita_kind(const std::string& s, const std::string& path) {
    if (s == "none") return ItaKind::none;
    if (s == "fgsm") return ItaKind::fgsm;
    if (s == "pgd") return ItaKind::pgd;
    if (s == "jsma") return ItaKind::jsma;
    if (s == "patch") return ItaKind::patch;
    if (s == "square") return ItaKind::square;
    if (s == "st") return ItaKind::st;
    fail(path, "unknown inference attack kind '" + s + "'");
}

int count_clients(const TopologyConfig& t) {
    int n = 1;
    for (int f : t.fanout_per_level) n *= f;
    return n;
}

void cross_validate(const RunConfig& c) {
    const int levels = c.topology.num_levels;
    if (levels < 2 || levels > 4) fail("topology.levels", "must be 2, 3, or 4");
    if (static_cast<int>(c.topology.fanout_per_level.size()) != levels - 1)
        fail("topology.fanouts", "must list one fanout per server level (levels-1 entries)");
    for (int f : c.topology.fanout_per_level)
        if (f < 1) fail("topology.fanouts", "fanouts must be >= 1");
    const int clients = count_clients(c.topology);
    if (c.topology.num_overlap_clients < 0) fail("topology.overlap_clients", "must be >= 0");
    if (c.topology.num_overlap_clients > clients)
        fail("topology.overlap_clients", "exceeds client count");
    int regionals = 1;
    for (size_t i = 0; i + 1 < c.topology.fanout_per_level.size(); ++i)
        regionals *= c.topology.fanout_per_level[i];
    if (c.topology.num_overlap_clients > 0 && regionals < 2)
        fail("topology.overlap_clients", "overlap requires at least two regional servers");

    if (static_cast<int>(c.schedule.rounds_per_level.size()) != levels - 1)
        fail("schedule.rounds", "must list one round count per server level (levels-1 entries)");
    for (int r : c.schedule.rounds_per_level)
        if (r < 1) fail("schedule.rounds", "every entry must be >= 1");

    if (!(c.selection.participation > 0) || c.selection.participation > 1)
        fail("selection.cp", "must be in (0, 1]");

    if (c.hyper.batch_size < 1) fail("hyper.batch_size", "must be >= 1");
    if (c.hyper.epochs < 0) fail("hyper.epochs", "must be >= 0");
    if (!(c.hyper.learning_rate > 0)) fail("hyper.learning_rate", "must be > 0");

    const bool synthetic = c.dataset.kind == "synthetic";
    if (!synthetic && c.dataset.kind != "idx")
        fail("dataset.kind", "must be 'synthetic' or 'idx'");
    if (synthetic) {
        if (c.dataset.classes < 2) fail("dataset.classes", "must be >= 2");
        if (c.dataset.per_class < 1) fail("dataset.per_class", "must be >= 1");
        if (c.dataset.eval_per_class < 1) fail("dataset.eval_per_class", "must be >= 1");
        if (c.dataset.shape.h < 1 || c.dataset.shape.w < 1 || c.dataset.shape.c < 1)
            fail("dataset.shape", "dimensions must be positive");
        if (c.dataset.noise < 0) fail("dataset.noise", "must be >= 0");
    } else {
        if (c.dataset.images.empty() || c.dataset.labels.empty())
            fail("dataset.images", "idx datasets need images/labels paths");
        if (c.dataset.eval_images.empty() || c.dataset.eval_labels.empty())
            fail("dataset.eval_images", "idx datasets need eval_images/eval_labels paths");
    }
    if (!(c.dataset.alpha > 0)) fail("dataset.alpha", "must be > 0");
    if (c.dataset.virtual_shards != 0 && c.dataset.virtual_shards < clients)
        fail("dataset.virtual_shards", "must be 0 or >= client count");

    // model must compile against the configured input shape
    if (synthetic) {
        try {
            Network net(c.model, c.dataset.shape);
            if (net.num_classes() != c.dataset.classes)
                fail("model", "softmax classes (" + std::to_string(net.num_classes()) +
                                  ") disagree with dataset.classes (" +
                                  std::to_string(c.dataset.classes) + ")");
        } catch (const std::invalid_argument& e) {
            if (std::string(e.what()).rfind("config:", 0) == 0) throw;
            fail("model", e.what());
        }
    }

    const int shard_slots =
        c.dataset.virtual_shards > 0 ? c.dataset.virtual_shards : clients;
    if (c.attack.malicious_count < 0) fail("attack.malicious_count", "must be >= 0");
    if (c.attack.malicious_count > shard_slots)
        fail("attack.malicious_count", "exceeds number of client shards");
    for (int idx : c.attack.malicious_clients)
        if (idx < 0 || idx >= shard_slots)
            fail("attack.malicious_clients", "shard index " + std::to_string(idx) +
                                                 " not in [0, " + std::to_string(shard_slots) + ")");
    for (int idx : c.attack.malicious_servers)
        if (idx < 0 || idx >= regionals)
            fail("attack.malicious_servers", "regional index " + std::to_string(idx) +
                                                 " not in [0, " + std::to_string(regionals) + ")");
    if (c.attack.malicious_server_count < 0 || c.attack.malicious_server_count > regionals)
        fail("attack.malicious_server_count", "must be in [0, regional server count]");

    const bool client_attack = c.attack.kind == TrainingAttack::tlf ||
                               c.attack.kind == TrainingAttack::ulf ||
                               c.attack.kind == TrainingAttack::csf;
    if (client_attack &&
        (c.attack.malicious_server_count > 0 || !c.attack.malicious_servers.empty()))
        fail("attack.malicious_servers", "client-side attacks take no malicious servers");
    if (c.attack.kind == TrainingAttack::ssf &&
        (c.attack.malicious_count > 0 || !c.attack.malicious_clients.empty()))
        fail("attack.malicious_clients", "ssf is server-side; use malicious_servers");
    if (c.attack.kind == TrainingAttack::csf && c.dataset.virtual_shards > 0 &&
        c.dataset.virtual_shards != clients)
        fail("attack.kind", "csf requires one shard per client (no virtual shards)");

    if (c.attack.overlap) {
        if (c.dataset.virtual_shards > 0 && c.dataset.virtual_shards != clients)
            fail("attack.overlap", "overlap placement requires one shard per client");
        const int wanted = !c.attack.malicious_clients.empty()
                               ? static_cast<int>(c.attack.malicious_clients.size())
                               : c.attack.malicious_count;
        if (wanted > c.topology.num_overlap_clients)
            fail("attack.overlap", "needs topology.overlap_clients >= malicious client count");
    }

    if (c.attack.kind == TrainingAttack::tlf) {
        const TriggerSpec& t = c.attack.trigger;
        if (t.size < 1) fail("attack.trigger", "size must be >= 1");
        if (!(t.poison_fraction > 0) || t.poison_fraction > 1)
            fail("attack.trigger", "rho must be in (0, 1]");
        if (synthetic) {
            if (t.size > c.dataset.shape.h || t.size > c.dataset.shape.w)
                fail("attack.trigger", "patch does not fit the image");
            if (t.row >= 0 && t.row + t.size > c.dataset.shape.h)
                fail("attack.trigger", "patch exceeds image rows");
            if (t.col >= 0 && t.col + t.size > c.dataset.shape.w)
                fail("attack.trigger", "patch exceeds image columns");
            if (t.target_label < 0 || t.target_label >= c.dataset.classes)
                fail("attack.trigger", "target label out of range");
        }
    }

    if (c.ita.cfg.eps < 0) fail("ita.eps", "must be >= 0");
    if (c.ita.cfg.kind == ItaKind::pgd && !(c.ita.cfg.alpha > 0))
        fail("ita.alpha", "must be > 0");
    if (c.ita.cfg.steps < 0) fail("ita.steps", "must be >= 0");
    if (c.ita.eval_count < 0) fail("ita.eval_count", "must be >= 0");

    if (c.nc.enabled) {
        if (!(c.nc.lambda > 0)) fail("defense.nc.lambda", "must be > 0");
        if (!(c.nc.threshold > 0)) fail("defense.nc.threshold", "must be > 0");
        if (c.nc.clean_count < 1) fail("defense.nc.clean_count", "must be >= 1");
        if (synthetic && c.dataset.classes < 3)
            fail("defense.nc.enabled", "anomaly detection needs at least 3 classes");
    }
    if (c.at.enabled) {
        if (c.at.fraction < 0 || c.at.fraction > 1)
            fail("defense.at.fraction", "must be in [0, 1]");
        if (c.at.eps < 0) fail("defense.at.eps", "must be >= 0");
        if (c.at.generator != ItaKind::fgsm && c.at.generator != ItaKind::pgd)
            fail("defense.at.generator", "must be 'fgsm' or 'pgd'");
    }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
    }

    RunConfig c;
    Reader root(doc, "");
    c.seed = root.get<uint64_t>("seed", c.seed);
    c.out_dir = root.get<std::string>("out_dir", c.out_dir);

    {
        Reader topo = root.section("topology");
        c.topology.num_levels = topo.get<int>("levels", c.topology.num_levels);
        c.topology.fanout_per_level =
            topo.get<std::vector<int>>("fanouts", c.topology.fanout_per_level);
        c.topology.num_overlap_clients =
            topo.get<int>("overlap_clients", c.topology.num_overlap_clients);
        c.overlap_seed = topo.get<uint64_t>("overlap_seed", c.overlap_seed);
        topo.finish();
    }
    {
        Reader ds = root.section("dataset");
        c.dataset.kind = ds.get<std::string>("kind", c.dataset.kind);
        c.dataset.classes = ds.get<int>("classes", c.dataset.classes);
        c.dataset.per_class = ds.get<int>("per_class", c.dataset.per_class);
        c.dataset.eval_per_class = ds.get<int>("eval_per_class", c.dataset.eval_per_class);
        c.dataset.shape = parse_shape(ds, "shape", c.dataset.shape);
        c.dataset.noise = ds.get<double>("noise", c.dataset.noise);
        c.dataset.alpha = ds.get<double>("alpha", c.dataset.alpha);
        c.dataset.seed = ds.get<uint64_t>("seed", c.dataset.seed);
        c.dataset.virtual_shards = ds.get<int>("virtual_shards", c.dataset.virtual_shards);
        c.dataset.images = ds.get<std::string>("images", c.dataset.images);
        c.dataset.labels = ds.get<std::string>("labels", c.dataset.labels);
        c.dataset.eval_images = ds.get<std::string>("eval_images", c.dataset.eval_images);
        c.dataset.eval_labels = ds.get<std::string>("eval_labels", c.dataset.eval_labels);
        ds.finish();
    }
    {
        Reader model = root.section("model");
        c.model = parse_model(model);
        model.finish();
        if (c.model.layers.empty()) {
            c.model.layers = {DenseSpec{32}, ReluSpec{},
                              SoftmaxOutputSpec{c.dataset.classes}};
        }
    }
    {
        Reader hy = root.section("hyper");
        c.hyper.batch_size = hy.get<int>("batch_size", c.hyper.batch_size);
        c.hyper.epochs = hy.get<int>("epochs", c.hyper.epochs);
        c.hyper.learning_rate = hy.get<double>("learning_rate", c.hyper.learning_rate);
        const std::string opt = hy.get<std::string>("optimizer", "adam");
        if (opt == "adam") {
            c.hyper.optimizer = Optimizer::adam;
        } else if (opt == "sgd") {
            c.hyper.optimizer = Optimizer::sgd;
        } else {
            fail("hyper.optimizer", "must be 'adam' or 'sgd'");
        }
        c.hyper.beta1 = hy.get<double>("beta1", c.hyper.beta1);
        c.hyper.beta2 = hy.get<double>("beta2", c.hyper.beta2);
        c.hyper.eps_adam = hy.get<double>("eps_adam", c.hyper.eps_adam);
        hy.finish();
    }
    {
        Reader sched = root.section("schedule");
        c.schedule.rounds_per_level =
            sched.get<std::vector<int>>("rounds", c.schedule.rounds_per_level);
        sched.finish();
    }
    {
        Reader sel = root.section("selection");
        c.selection.participation = sel.get<double>("cp", c.selection.participation);
        const std::string mode = sel.get<std::string>("mode", "fixed-per-run");
        if (mode == "fixed-per-run") {
            c.selection.mode = SelectionMode::fixed_per_run;
        } else if (mode == "resample-per-round") {
            c.selection.mode = SelectionMode::resample_per_round;
        } else {
            fail("selection.mode", "must be 'fixed-per-run' or 'resample-per-round'");
        }
        c.selection.seed = sel.get<uint64_t>("seed", c.selection.seed);
        sel.finish();
    }
    {
        Reader atk = root.section("attack");
        c.attack.kind = parse_attack_kind(atk.get<std::string>("kind", "none"), "attack.kind");
        c.attack.malicious_count = atk.get<int>("malicious_count", c.attack.malicious_count);
        c.attack.malicious_clients =
            atk.get<std::vector<int>>("malicious_clients", c.attack.malicious_clients);
        c.attack.malicious_server_count =
            atk.get<int>("malicious_server_count", c.attack.malicious_server_count);
        c.attack.malicious_servers =
            atk.get<std::vector<int>>("malicious_servers", c.attack.malicious_servers);
        c.attack.overlap = atk.get<bool>("overlap", c.attack.overlap);
        c.attack.seed = atk.get<uint64_t>("seed", c.attack.seed);
        {
            Reader tr = atk.section("trigger");
            c.attack.trigger.row = tr.get<int>("row", -1);
            c.attack.trigger.col = tr.get<int>("col", -1);
            c.attack.trigger.size = tr.get<int>("size", 2);
            c.attack.trigger.target_label = tr.get<int>("target", 0);
            c.attack.trigger.poison_fraction = tr.get<double>("rho", 0.5);
            c.attack.trigger_value = tr.get<double>("value", 1.0);
            c.attack.trigger.pattern =
                tr.get<std::vector<double>>("pattern", c.attack.trigger.pattern);
            tr.finish();
        }
        atk.finish();
    }
    {
        Reader ita = root.section("ita");
        c.ita.cfg.kind = parse_ita_kind(ita.get<std::string>("kind", "none"), "ita.kind");
        c.ita.cfg.eps = ita.get<double>("eps", c.ita.cfg.eps);
        c.ita.cfg.alpha = ita.get<double>("alpha", c.ita.cfg.alpha);
        c.ita.cfg.steps = ita.get<int>("steps", c.ita.cfg.steps);
        c.ita.cfg.random_start = ita.get<bool>("random_start", c.ita.cfg.random_start);
        c.ita.cfg.jsma_theta = ita.get<double>("jsma_theta", c.ita.cfg.jsma_theta);
        c.ita.cfg.jsma_gamma = ita.get<double>("jsma_gamma", c.ita.cfg.jsma_gamma);
        c.ita.cfg.jsma_target = ita.get<int>("jsma_target", c.ita.cfg.jsma_target);
        c.ita.cfg.patch_size = ita.get<int>("patch_size", c.ita.cfg.patch_size);
        c.ita.cfg.patch_iterations = ita.get<int>("patch_iterations", c.ita.cfg.patch_iterations);
        c.ita.cfg.patch_lr = ita.get<double>("patch_lr", c.ita.cfg.patch_lr);
        c.ita.cfg.patch_target = ita.get<int>("patch_target", c.ita.cfg.patch_target);
        c.ita.cfg.square_iterations =
            ita.get<int>("square_iterations", c.ita.cfg.square_iterations);
        c.ita.cfg.square_initial_p =
            ita.get<double>("square_initial_p", c.ita.cfg.square_initial_p);
        c.ita.cfg.st_rotations =
            ita.get<std::vector<double>>("st_rotations", c.ita.cfg.st_rotations);
        c.ita.cfg.st_translations =
            ita.get<std::vector<int>>("st_translations", c.ita.cfg.st_translations);
        c.ita.cfg.seed = ita.get<uint64_t>("seed", c.ita.cfg.seed);
        c.ita.eval_count = ita.get<int>("eval_count", c.ita.eval_count);
        c.ita.export_idx = ita.get<bool>("export_idx", c.ita.export_idx);
        ita.finish();
    }
    {
        Reader defense = root.section("defense");
        {
            Reader nc = defense.section("nc");
            c.nc.enabled = nc.get<bool>("enabled", c.nc.enabled);
            c.nc.lambda = nc.get<double>("lambda", c.nc.lambda);
            c.nc.threshold = nc.get<double>("threshold", c.nc.threshold);
            c.nc.steps = nc.get<int>("steps", c.nc.steps);
            c.nc.lr = nc.get<double>("lr", c.nc.lr);
            c.nc.batch = nc.get<int>("batch", c.nc.batch);
            c.nc.clean_count = nc.get<int>("clean_count", c.nc.clean_count);
            c.nc.unlearn_epochs = nc.get<int>("unlearn_epochs", c.nc.unlearn_epochs);
            c.nc.stamp_fraction = nc.get<double>("stamp_fraction", c.nc.stamp_fraction);
            c.nc.seed = nc.get<uint64_t>("seed", c.nc.seed);
            nc.finish();
        }
        {
            Reader at = defense.section("at");
            c.at.enabled = at.get<bool>("enabled", c.at.enabled);
            const std::string gen = at.get<std::string>("generator", "pgd");
            c.at.generator = gen == "fgsm" ? ItaKind::fgsm
                                           : (gen == "pgd" ? ItaKind::pgd : ItaKind::none);
            if (c.at.generator == ItaKind::none)
                fail("defense.at.generator", "must be 'fgsm' or 'pgd'");
            c.at.eps = at.get<double>("eps", c.at.eps);
            c.at.fraction = at.get<double>("fraction", c.at.fraction);
            c.at.steps = at.get<int>("steps", c.at.steps);
            at.finish();
        }
        defense.finish();
    }
    root.finish();

    // fill the trigger pattern before cross validation so it can be checked
    if (c.attack.trigger.pattern.empty() && c.dataset.kind == "synthetic") {
        c.attack.trigger.pattern.assign(
            static_cast<size_t>(c.attack.trigger.size) * c.attack.trigger.size *
                c.dataset.shape.c,
            c.attack.trigger_value);
    }

    cross_validate(c);
    return c;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

nlohmann::json config_to_json(const RunConfig& c) {
    json model_layers = json::array();
    for (const LayerSpec& layer : c.model.layers) {
        if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
            model_layers.push_back({{"type", "conv"},
                                    {"kernel", conv->kernel},
                                    {"channels", conv->channels},
                                    {"maxpool", conv->maxpool}});
        } else if (const auto* dense = std::get_if<DenseSpec>(&layer)) {
            model_layers.push_back({{"type", "dense"}, {"units", dense->units}});
        } else if (std::holds_alternative<ReluSpec>(layer)) {
            model_layers.push_back({{"type", "relu"}});
        } else {
            model_layers.push_back(
                {{"type", "softmax"},
                 {"classes", std::get<SoftmaxOutputSpec>(layer).classes}});
        }
    }

    auto attack_kind = [&]() -> std::string {
        switch (c.attack.kind) {
            case TrainingAttack::none: return "none";
            case TrainingAttack::tlf: return "tlf";
            case TrainingAttack::ulf: return "ulf";
            case TrainingAttack::csf: return "csf";
            case TrainingAttack::ssf: return "ssf";
        }
        return "none";
    };
    auto ita_kind = [&]() -> std::string {
        switch (c.ita.cfg.kind) {
            case ItaKind::none: return "none";
            case ItaKind::fgsm: return "fgsm";
            case ItaKind::pgd: return "pgd";
            case ItaKind::jsma: return "jsma";
            case ItaKind::patch: return "patch";
            case ItaKind::square: return "square";
            case ItaKind::st: return "st";
        }
        return "none";
    };

    return json{
        {"seed", c.seed},
        {"out_dir", c.out_dir},
        {"topology",
         {{"levels", c.topology.num_levels},
          {"fanouts", c.topology.fanout_per_level},
          {"overlap_clients", c.topology.num_overlap_clients},
          {"overlap_seed", c.overlap_seed}}},
        {"dataset",
         {{"kind", c.dataset.kind},
          {"classes", c.dataset.classes},
          {"per_class", c.dataset.per_class},
          {"eval_per_class", c.dataset.eval_per_class},
          {"shape", {c.dataset.shape.h, c.dataset.shape.w, c.dataset.shape.c}},
          {"noise", c.dataset.noise},
          {"alpha", c.dataset.alpha},
          {"seed", c.dataset.seed},
          {"virtual_shards", c.dataset.virtual_shards},
          {"images", c.dataset.images},
          {"labels", c.dataset.labels},
          {"eval_images", c.dataset.eval_images},
          {"eval_labels", c.dataset.eval_labels}}},
        {"model", {{"layers", model_layers}}},
        {"hyper",
         {{"batch_size", c.hyper.batch_size},
          {"epochs", c.hyper.epochs},
          {"learning_rate", c.hyper.learning_rate},
          {"optimizer", c.hyper.optimizer == Optimizer::adam ? "adam" : "sgd"},
          {"beta1", c.hyper.beta1},
          {"beta2", c.hyper.beta2},
          {"eps_adam", c.hyper.eps_adam}}},
        {"schedule", {{"rounds", c.schedule.rounds_per_level}}},
        {"selection",
         {{"cp", c.selection.participation},
          {"mode", c.selection.mode == SelectionMode::fixed_per_run ? "fixed-per-run"
                                                                    : "resample-per-round"},
          {"seed", c.selection.seed}}},
        {"attack",
         {{"kind", attack_kind()},
          {"malicious_count", c.attack.malicious_count},
          {"malicious_clients", c.attack.malicious_clients},
          {"malicious_server_count", c.attack.malicious_server_count},
          {"malicious_servers", c.attack.malicious_servers},
          {"overlap", c.attack.overlap},
          {"seed", c.attack.seed},
          {"trigger",
           {{"row", c.attack.trigger.row},
            {"col", c.attack.trigger.col},
            {"size", c.attack.trigger.size},
            {"target", c.attack.trigger.target_label},
            {"rho", c.attack.trigger.poison_fraction},
            {"value", c.attack.trigger_value},
            {"pattern", c.attack.trigger.pattern}}}}},
        {"ita",
         {{"kind", ita_kind()},
          {"eps", c.ita.cfg.eps},
          {"alpha", c.ita.cfg.alpha},
          {"steps", c.ita.cfg.steps},
          {"random_start", c.ita.cfg.random_start},
          {"jsma_theta", c.ita.cfg.jsma_theta},
          {"jsma_gamma", c.ita.cfg.jsma_gamma},
          {"jsma_target", c.ita.cfg.jsma_target},
          {"patch_size", c.ita.cfg.patch_size},
          {"patch_iterations", c.ita.cfg.patch_iterations},
          {"patch_lr", c.ita.cfg.patch_lr},
          {"patch_target", c.ita.cfg.patch_target},
          {"square_iterations", c.ita.cfg.square_iterations},
          {"square_initial_p", c.ita.cfg.square_initial_p},
          {"st_rotations", c.ita.cfg.st_rotations},
          {"st_translations", c.ita.cfg.st_translations},
          {"seed", c.ita.cfg.seed},
          {"eval_count", c.ita.eval_count},
          {"export_idx", c.ita.export_idx}}},
        {"defense",
         {{"nc",
           {{"enabled", c.nc.enabled},
            {"lambda", c.nc.lambda},
            {"threshold", c.nc.threshold},
            {"steps", c.nc.steps},
            {"lr", c.nc.lr},
            {"batch", c.nc.batch},
            {"clean_count", c.nc.clean_count},
            {"unlearn_epochs", c.nc.unlearn_epochs},
            {"stamp_fraction", c.nc.stamp_fraction},
            {"seed", c.nc.seed}}},
          {"at",
           {{"enabled", c.at.enabled},
            {"generator", c.at.generator == ItaKind::fgsm ? "fgsm" : "pgd"},
            {"eps", c.at.eps},
            {"fraction", c.at.fraction},
            {"steps", c.at.steps}}}}}};
}

std::string config_digest(const RunConfig& config) {
    const std::string text = config_to_json(config).dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : text) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SweepSpec parse_sweep(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("sweep: not valid JSON: ") + e.what());
    }
    SweepSpec spec;
    Reader root(doc, "sweep");
    const json* axes = root.raw("axes");
    if (axes) {
        if (!axes->is_array()) fail("sweep.axes", "expected an array");
        for (size_t i = 0; i < axes->size(); ++i) {
            Reader ar((*axes)[i], "sweep.axes[" + std::to_string(i) + "]");
            SweepSpec::Axis axis;
            axis.key = ar.get<std::string>("key", "");
            if (axis.key.empty()) fail(ar.path() + ".key", "missing axis key");
            const json* values = ar.raw("values");
            if (!values || !values->is_array() || values->empty())
                fail(ar.path() + ".values", "expected a nonempty array");
            for (const auto& v : *values) axis.values.push_back(v);
            ar.finish();
            spec.axes.push_back(std::move(axis));
        }
    }
    spec.seeds = root.get<std::vector<uint64_t>>("seeds", {1});
    if (spec.seeds.empty()) fail("sweep.seeds", "need at least one seed");
    root.finish();
    return spec;
}

SweepSpec parse_sweep_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("sweep: cannot open file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_sweep(ss.str());
}

void apply_override(nlohmann::json& doc, const std::string& key, const nlohmann::json& value) {
    json* cur = &doc;
    size_t start = 0;
    while (true) {
        const size_t dot = key.find('.', start);
        const std::string part = key.substr(start, dot - start);
        if (part.empty()) throw std::invalid_argument("sweep: empty path segment in '" + key + "'");
        if (dot == std::string::npos) {
            (*cur)[part] = value;
            return;
        }
        cur = &(*cur)[part];
        start = dot + 1;
    }
}

}  // namespace hfl
