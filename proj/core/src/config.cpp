#include "koopman/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "koopman/errors.hpp"

namespace koopman {

using nlohmann::json;

std::string to_string(Form form) { return form == Form::diff ? "diff" : "recurrent"; }
std::string to_string(Mode mode) { return mode == Mode::map ? "map" : "vi"; }

Form parse_form(const std::string& text) {
    if (text == "diff" || text == "differential") return Form::diff;
    if (text == "recurrent") return Form::recurrent;
    throw UsageError("unknown form '" + text + "' (expected diff or recurrent)");
}

Mode parse_mode(const std::string& text) {
    if (text == "map") return Mode::map;
    if (text == "vi") return Mode::vi;
    throw UsageError("unknown mode '" + text + "' (expected map or vi)");
}

void TrainConfig::validate() const {
    if (layers.empty()) throw UsageError("config: 'layers' is required");
    std::vector<std::size_t> enc, dec;
    split_autoencoder_widths(layers, enc, dec);
    for (std::size_t w : layers)
        if (w == 0) throw UsageError("config: layer widths must be positive");
    if (latent_dim != 0 && latent_dim != enc.back())
        throw UsageError("config: latent_dim " + std::to_string(latent_dim) + " differs from the middle layer width " +
                         std::to_string(enc.back()));
    if (!(learning_rate > 0.0)) throw UsageError("config: learning_rate must be positive");
    if (batch_size == 0) throw UsageError("config: batch_size must be positive");
    if (!(weight_decay >= 0.0)) throw UsageError("config: weight_decay must be non-negative");
    if (stride == 0) throw UsageError("config: stride must be positive");
    if (window_length == 1) throw UsageError("config: window_length must be 0 (whole trajectory) or at least 2");
    if (!(loss_weights.linear >= 0.0) || !(loss_weights.reconstruction >= 0.0))
        throw UsageError("config: loss weights must be non-negative");
    if (!(init_stddev >= 0.0)) throw UsageError("config: init_stddev must be non-negative");
    if (!(vi.warm_start_fraction >= 0.0 && vi.warm_start_fraction <= 1.0))
        throw UsageError("config: vi.warm_start_fraction must lie in [0, 1]");
    if (vi.mc_samples == 0) throw UsageError("config: vi.mc_samples must be positive");
    if (!(vi.half_cauchy_scale > 0.0) || !(vi.gamma_rate > 0.0))
        throw UsageError("config: vi prior scales must be positive");
    if (!(vi.learning_rate >= 0.0)) throw UsageError("config: vi.learning_rate must be non-negative");
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, value] : obj.items())
        if (!known.count(key)) throw UsageError("config: unknown key '" + where + key + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where = "") {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw UsageError("config: key '" + where + key + "' has the wrong type");
    }
}

void read_count(const json& obj, const char* key, std::size_t& out, const std::string& where = "") {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw UsageError("config: key '" + where + key + "' must be a non-negative integer");
    out = v.get<std::size_t>();
}

}  // namespace

TrainConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw UsageError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw UsageError("config: top level must be an object");
    reject_unknown(j,
                   {"form", "mode", "layers", "latent_dim", "learning_rate", "epochs", "batch_size", "weight_decay",
                    "window_length", "stride", "seed", "normalization_mode", "loss_weights", "svd_embedding",
                    "freeze_networks", "init_stddev", "vi"},
                   "");
    TrainConfig c;
    if (j.contains("form")) c.form = parse_form(j.at("form").get<std::string>());
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("layers")) {
        const json& l = j.at("layers");
        if (l.is_string()) {
            c.layers = parse_widths(l.get<std::string>());
        } else if (l.is_array()) {
            for (const auto& w : l) {
                if (!w.is_number_integer() || w.get<long long>() <= 0)
                    throw UsageError("config: 'layers' entries must be positive integers");
                c.layers.push_back(w.get<std::size_t>());
            }
        } else {
            throw UsageError("config: 'layers' must be a string like \"2-8-2\" or an array");
        }
    }
    read_count(j, "latent_dim", c.latent_dim);
    read(j, "learning_rate", c.learning_rate);
    read_count(j, "epochs", c.epochs);
    read_count(j, "batch_size", c.batch_size);
    read(j, "weight_decay", c.weight_decay);
    read_count(j, "window_length", c.window_length);
    read_count(j, "stride", c.stride);
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned() && !(j.at("seed").is_number_integer() && j.at("seed").get<long long>() >= 0))
            throw UsageError("config: 'seed' must be a non-negative integer");
        c.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("normalization_mode"))
        c.normalization_mode = parse_normalization_mode(j.at("normalization_mode").get<std::string>());
    if (j.contains("loss_weights")) {
        const json& w = j.at("loss_weights");
        if (!w.is_object()) throw UsageError("config: 'loss_weights' must be an object");
        reject_unknown(w, {"linear", "reconstruction"}, "loss_weights.");
        read(w, "linear", c.loss_weights.linear, "loss_weights.");
        read(w, "reconstruction", c.loss_weights.reconstruction, "loss_weights.");
    }
    read(j, "svd_embedding", c.svd_embedding);
    read(j, "freeze_networks", c.freeze_networks);
    read(j, "init_stddev", c.init_stddev);
    if (j.contains("vi")) {
        const json& v = j.at("vi");
        if (!v.is_object()) throw UsageError("config: 'vi' must be an object");
        reject_unknown(v,
                       {"warm_start_fraction", "initial_log_std", "mc_samples", "half_cauchy_scale", "gamma_rate",
                        "learning_rate"},
                       "vi.");
        read(v, "warm_start_fraction", c.vi.warm_start_fraction, "vi.");
        read(v, "initial_log_std", c.vi.initial_log_std, "vi.");
        read_count(v, "mc_samples", c.vi.mc_samples, "vi.");
        read(v, "half_cauchy_scale", c.vi.half_cauchy_scale, "vi.");
        read(v, "gamma_rate", c.vi.gamma_rate, "vi.");
        read(v, "learning_rate", c.vi.learning_rate, "vi.");
    }
    c.validate();
    return c;
}

TrainConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string to_json(const TrainConfig& c) {
    json j;
    j["form"] = to_string(c.form);
    j["mode"] = to_string(c.mode);
    j["layers"] = format_widths(c.layers);
    j["latent_dim"] = c.latent_dim;
    j["learning_rate"] = c.learning_rate;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["weight_decay"] = c.weight_decay;
    j["window_length"] = c.window_length;
    j["stride"] = c.stride;
    j["seed"] = c.seed;
    j["normalization_mode"] = to_string(c.normalization_mode);
    j["loss_weights"] = {{"linear", c.loss_weights.linear}, {"reconstruction", c.loss_weights.reconstruction}};
    j["svd_embedding"] = c.svd_embedding;
    j["freeze_networks"] = c.freeze_networks;
    j["init_stddev"] = c.init_stddev;
    j["vi"] = {{"warm_start_fraction", c.vi.warm_start_fraction},
               {"initial_log_std", c.vi.initial_log_std},
               {"mc_samples", c.vi.mc_samples},
               {"half_cauchy_scale", c.vi.half_cauchy_scale},
               {"gamma_rate", c.vi.gamma_rate},
               {"learning_rate", c.vi.learning_rate}};
    return j.dump(2);
}

}  // namespace koopman
