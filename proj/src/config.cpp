#include "mkd/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace mkd {

std::string to_string(Method m) {
    switch (m) {
        case Method::er: return "er";
        case Method::derpp: return "derpp";
        case Method::erace: return "erace";
    }
    return "?";
}

std::string to_string(MkdMode m) {
    switch (m) {
        case MkdMode::off: return "off";
        case MkdMode::on: return "on";
        case MkdMode::single_view: return "single_view";
    }
    return "?";
}

std::string to_string(SnapshotKd m) {
    switch (m) {
        case SnapshotKd::off: return "off";
        case SnapshotKd::low_quality: return "low_quality";
        case SnapshotKd::high_quality: return "high_quality";
    }
    return "?";
}

Method parse_method(const std::string& s) {
    if (s == "er") return Method::er;
    if (s == "derpp") return Method::derpp;
    if (s == "erace") return Method::erace;
    throw std::invalid_argument("unknown method '" + s + "' (expected er, derpp or erace)");
}

MkdMode parse_mkd_mode(const std::string& s) {
    if (s == "off" || s == "false") return MkdMode::off;
    if (s == "on" || s == "true") return MkdMode::on;
    if (s == "single_view") return MkdMode::single_view;
    throw std::invalid_argument("unknown mkd mode '" + s + "' (expected off, on or single_view)");
}

SnapshotKd parse_snapshot_kd(const std::string& s) {
    if (s == "off") return SnapshotKd::off;
    if (s == "low_quality") return SnapshotKd::low_quality;
    if (s == "high_quality") return SnapshotKd::high_quality;
    throw std::invalid_argument("unknown snapshot_kd '" + s + "' (expected off, low_quality or high_quality)");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw std::invalid_argument(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw std::invalid_argument(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    // ':' is accepted as a separator so lists can appear inside comma-separated grid files.
    std::string norm = v;
    std::replace(norm.begin(), norm.end(), ':', ',');
    std::stringstream ss(norm);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_u64(key, item));
    }
    return out;
}

std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (auto x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
    return s;
}

std::string fmt(double d) {
    std::ostringstream os;
    os.precision(17);
    os << d;
    return os.str();
}

struct Field {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field size_field(T RunConfig::*m) {
    return {[m](RunConfig& c, const std::string& v) { c.*m = static_cast<T>(parse_u64("", v)); },
            [m](const RunConfig& c) { return std::to_string(c.*m); }};
}

Field double_field(double RunConfig::*m) {
    return {[m](RunConfig& c, const std::string& v) { c.*m = parse_double("", v); },
            [m](const RunConfig& c) { return fmt(c.*m); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
    using C = RunConfig;
    static const std::vector<std::pair<std::string, Field>> f = {
        {"dataset", {[](C& c, const std::string& v) { c.dataset = v; }, [](const C& c) { return c.dataset; }}},
        {"data_root",
         {[](C& c, const std::string& v) {
              if (v.empty())
                  c.data_root.reset();
              else
                  c.data_root = v;
          },
          [](const C& c) { return c.data_root ? c.data_root->string() : std::string(); }}},
        {"synth_train_per_class", size_field(&C::synth_train_per_class)},
        {"synth_test_per_class", size_field(&C::synth_test_per_class)},
        {"synth_image_size", size_field(&C::synth_image_size)},
        {"synth_difficulty", double_field(&C::synth_difficulty)},
        {"dataset_seed", size_field(&C::dataset_seed)},
        {"n_tasks", size_field(&C::n_tasks)},
        {"boundary_mode",
         {[](C& c, const std::string& v) { c.boundary_mode = parse_boundary_mode(v); },
          [](const C& c) { return to_string(c.boundary_mode); }}},
        {"blur_scale", size_field(&C::blur_scale)},
        {"memory_size", size_field(&C::memory_size)},
        {"stream_batch", size_field(&C::stream_batch)},
        {"mem_retrieval_cap", size_field(&C::mem_retrieval_cap)},
        {"method",
         {[](C& c, const std::string& v) { c.method = parse_method(v); },
          [](const C& c) { return to_string(c.method); }}},
        {"mkd",
         {[](C& c, const std::string& v) { c.mkd = parse_mkd_mode(v); },
          [](const C& c) { return to_string(c.mkd); }}},
        {"inference_mode",
         {[](C& c, const std::string& v) { c.inference_mode = parse_inference_mode(v); },
          [](const C& c) { return to_string(c.inference_mode); }}},
        {"alpha", double_field(&C::alpha)},
        {"lambda",
         {[](C& c, const std::string& v) {
              if (v == "auto" || v.empty())
                  c.lambda_override.reset();
              else
                  c.lambda_override = parse_double("lambda", v);
          },
          [](const C& c) { return c.lambda_override ? fmt(*c.lambda_override) : std::string("auto"); }}},
        {"tau", double_field(&C::tau)},
        {"derpp_alpha", double_field(&C::derpp_alpha)},
        {"derpp_beta", double_field(&C::derpp_beta)},
        {"snapshot_kd",
         {[](C& c, const std::string& v) { c.snapshot_kd = parse_snapshot_kd(v); },
          [](const C& c) { return to_string(c.snapshot_kd); }}},
        {"snapshot_lambda", double_field(&C::snapshot_lambda)},
        {"snapshot_epochs", size_field(&C::snapshot_epochs)},
        {"optimizer",
         {[](C& c, const std::string& v) { c.optimizer = parse_optimizer(v); },
          [](const C& c) { return to_string(c.optimizer); }}},
        {"lr", double_field(&C::lr)},
        {"weight_decay", double_field(&C::weight_decay)},
        {"momentum", double_field(&C::momentum)},
        {"aug_strategy",
         {[](C& c, const std::string& v) { c.aug_strategy = parse_aug_strategy(v); },
          [](const C& c) { return to_string(c.aug_strategy); }}},
        {"baseline_aug",
         {[](C& c, const std::string& v) { c.baseline_aug = parse_bool("baseline_aug", v); },
          [](const C& c) { return std::string(c.baseline_aug ? "true" : "false"); }}},
        {"backbone",
         {[](C& c, const std::string& v) { c.backbone = parse_backbone(v); },
          [](const C& c) { return to_string(c.backbone); }}},
        {"conv_channels",
         {[](C& c, const std::string& v) { c.conv_channels = parse_list("conv_channels", v); },
          [](const C& c) { return join(c.conv_channels); }}},
        {"hidden",
         {[](C& c, const std::string& v) { c.hidden = parse_list("hidden", v); },
          [](const C& c) { return join(c.hidden); }}},
        {"feature_dim", size_field(&C::feature_dim)},
        {"seed", size_field(&C::seed)},
        {"eval_every", size_field(&C::eval_every)},
        {"drift_every", size_field(&C::drift_every)},
        {"drift_subset", size_field(&C::drift_subset)},
        {"boundary_min_gap", size_field(&C::boundary_min_gap)},
        {"output_dir",
         {[](C& c, const std::string& v) {
              if (v.empty())
                  c.output_dir.reset();
              else
                  c.output_dir = v;
          },
          [](const C& c) { return c.output_dir ? c.output_dir->string() : std::string(); }}},
        {"run_name", {[](C& c, const std::string& v) { c.run_name = v; }, [](const C& c) { return c.run_name; }}},
    };
    return f;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    for (const auto& [name, field] : fields()) {
        if (name != key) continue;
        try {
            field.set(*this, trim(value));
        } catch (const std::invalid_argument& e) {
            const std::string msg = e.what();
            throw std::invalid_argument(msg.rfind(": ", 0) == 0 ? key + msg : msg);
        }
        return;
    }
    throw std::invalid_argument("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> RunConfig::to_pairs() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [name, field] : fields()) out.emplace_back(name, field.get(*this));
    return out;
}

std::string RunConfig::to_text() const {
    std::string s;
    for (const auto& [k, v] : to_pairs()) s += k + " = " + v + "\n";
    return s;
}

void RunConfig::validate() const {
    const auto& info = dataset_info(dataset);
    auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
    if (n_tasks == 0) fail("n_tasks must be positive");
    if (info.n_classes % n_tasks != 0)
        fail(std::to_string(info.n_classes) + " classes of " + dataset + " cannot be split into " +
             std::to_string(n_tasks) + " tasks");
    if (memory_size == 0) fail("memory_size must be positive");
    if (stream_batch == 0) fail("stream_batch must be positive");
    if (info.synthetic && (synth_train_per_class == 0 || synth_test_per_class == 0))
        fail("synthetic datasets need at least one sample per class");
    if (boundary_mode == BoundaryMode::clear && blur_scale != 0) fail("blur_scale requires boundary_mode = blurry");
    distill().validate();
    optimizer_config().validate();
    if (derpp_alpha < 0.0 || derpp_beta < 0.0) fail("derpp_alpha and derpp_beta must be non-negative");
    if (snapshot_kd != SnapshotKd::off) {
        if (method != Method::er) fail("snapshot_kd is only defined on top of method = er");
        if (mkd != MkdMode::off) fail("snapshot_kd and mkd are mutually exclusive");
        if (snapshot_lambda < 0.0) fail("snapshot_lambda must be non-negative");
        if (snapshot_kd == SnapshotKd::high_quality && snapshot_epochs == 0) fail("snapshot_epochs must be positive");
    }
    if (backbone == Backbone::cnn && conv_channels.empty()) fail("cnn backbone needs at least one conv block");
    if (feature_dim == 0) fail("feature_dim must be positive");
    if (drift_every > 0 && drift_subset == 0) fail("drift_subset must be positive when drift tracking is on");
    if (boundary_min_gap == 0) fail("boundary_min_gap must be positive");
}

DistillConfig RunConfig::distill() const {
    DistillConfig d;
    d.alpha = alpha;
    d.lambda_override = lambda_override;
    d.tau = tau;
    d.multiview = mkd != MkdMode::single_view;
    return d;
}

OptimizerConfig RunConfig::optimizer_config() const {
    OptimizerConfig o;
    o.kind = optimizer;
    o.lr = lr;
    o.weight_decay = weight_decay;
    o.momentum = momentum;
    return o;
}

std::string RunConfig::default_run_name() const {
    std::string n = to_string(method);
    if (mkd != MkdMode::off) n += mkd == MkdMode::on ? "+mkd" : "+mkd_single_view";
    if (snapshot_kd != SnapshotKd::off) n += "+snapshot_" + to_string(snapshot_kd);
    return n + "_seed" + std::to_string(seed);
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("line " + std::to_string(lineno) + ": expected 'key = value'");
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

RunConfig config_from_text(const std::string& text, RunConfig base) {
    for (const auto& [k, v] : parse_key_values(text)) base.set(k, v);
    return base;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

RunConfig load_config(const std::filesystem::path& path) { return config_from_text(read_file(path)); }

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("override '" + o + "' is not key=value");
        cfg.set(trim(o.substr(0, eq)), o.substr(eq + 1));
    }
}

Grid parse_grid(const std::string& text) {
    Grid g;
    for (const auto& [k, v] : parse_key_values(text)) {
        std::vector<std::string> values;
        std::stringstream ss(v);
        for (std::string item; std::getline(ss, item, ',');)
            if (!trim(item).empty()) values.push_back(trim(item));
        if (values.empty()) throw std::invalid_argument("grid key '" + k + "' has no values");
        g.emplace_back(k, std::move(values));
    }
    return g;
}

Grid load_grid(const std::filesystem::path& path) { return parse_grid(read_file(path)); }

}  // namespace mkd
