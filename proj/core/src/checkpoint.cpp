#include "koopman/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "koopman/errors.hpp"

namespace koopman {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

json net_json(const FeedForwardNet& net) {
    json weights = json::array(), biases = json::array();
    for (const auto& w : net.weights) weights.push_back(matrix_json(w));
    for (const auto& b : net.biases) biases.push_back(matrix_json(b));
    return json{{"widths", net.widths}, {"weights", weights}, {"biases", biases}};
}

json model_json(const KoopmanModel& m) {
    return json{{"normalizer",
                 {{"mean", m.normalizer.mean}, {"scale", m.normalizer.scale}, {"mode", to_string(m.normalizer.mode)}}},
                {"svd_basis", matrix_json(m.svd_basis)},
                {"svd_embedding", m.svd_embedding},
                {"encoder", net_json(m.encoder)},
                {"decoder", net_json(m.decoder)},
                {"encoder_linear", matrix_json(m.encoder_linear)},
                {"decoder_linear", matrix_json(m.decoder_linear)},
                {"koopman", {{"zeta", m.koopman.zeta}, {"sigma", m.koopman.sigma}}}};
}

const json& field(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) throw FormatError("checkpoint: missing field '" + path + key + "'");
    return j.at(key);
}

double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw FormatError("checkpoint: field '" + path + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw FormatError("checkpoint: field '" + path + "' is not finite");
    return x;
}

std::vector<double> number_list(const json& j, const std::string& key, const std::string& path) {
    const json& v = field(j, key, path);
    if (!v.is_array()) throw FormatError("checkpoint: field '" + path + key + "' must be an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + key + "[" + std::to_string(i) + "]"));
    return out;
}

std::size_t count(const json& v, const std::string& path) {
    if (!v.is_number_unsigned()) throw FormatError("checkpoint: field '" + path + "' must be a non-negative integer");
    return v.get<std::size_t>();
}

Matrix parse_matrix(const json& v, const std::string& path) {
    const std::size_t rows = count(field(v, "rows", path + "."), path + ".rows");
    const std::size_t cols = count(field(v, "cols", path + "."), path + ".cols");
    const json& data = field(v, "data", path + ".");
    if (!data.is_array() || data.size() != rows) throw FormatError("checkpoint: field '" + path + ".data' must have " + std::to_string(rows) + " rows");
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::string rp = path + ".data[" + std::to_string(r) + "]";
        if (!data[r].is_array() || data[r].size() != cols)
            throw FormatError("checkpoint: field '" + rp + "' must have " + std::to_string(cols) + " entries");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = number(data[r][c], rp);
    }
    return m;
}

FeedForwardNet parse_net(const json& j, const std::string& path) {
    FeedForwardNet net;
    const json& widths = field(j, "widths", path + ".");
    if (!widths.is_array()) throw FormatError("checkpoint: field '" + path + ".widths' must be an array");
    for (const auto& w : widths) net.widths.push_back(count(w, path + ".widths"));
    const json& weights = field(j, "weights", path + ".");
    const json& biases = field(j, "biases", path + ".");
    if (!weights.is_array() || !biases.is_array())
        throw FormatError("checkpoint: field '" + path + ".weights' and '.biases' must be arrays");
    for (std::size_t l = 0; l < weights.size(); ++l)
        net.weights.push_back(parse_matrix(weights[l], path + ".weights[" + std::to_string(l) + "]"));
    for (std::size_t l = 0; l < biases.size(); ++l)
        net.biases.push_back(parse_matrix(biases[l], path + ".biases[" + std::to_string(l) + "]"));
    try {
        net.validate();
    } catch (const Error& e) {
        throw FormatError("checkpoint: field '" + path + "': " + e.what());
    }
    return net;
}

KoopmanModel parse_model(const json& j) {
    KoopmanModel m;
    const json& nz = field(j, "normalizer", "model.");
    m.normalizer.mean = number_list(nz, "mean", "model.normalizer.");
    m.normalizer.scale = number_list(nz, "scale", "model.normalizer.");
    const json& mode = field(nz, "mode", "model.normalizer.");
    if (!mode.is_string()) throw FormatError("checkpoint: field 'model.normalizer.mode' must be a string");
    try {
        m.normalizer.mode = parse_normalization_mode(mode.get<std::string>());
    } catch (const UsageError& e) {
        throw FormatError(std::string("checkpoint: field 'model.normalizer.mode': ") + e.what());
    }
    m.svd_basis = parse_matrix(field(j, "svd_basis", "model."), "model.svd_basis");
    const json& emb = field(j, "svd_embedding", "model.");
    if (!emb.is_boolean()) throw FormatError("checkpoint: field 'model.svd_embedding' must be a boolean");
    m.svd_embedding = emb.get<bool>();
    m.encoder = parse_net(field(j, "encoder", "model."), "model.encoder");
    m.decoder = parse_net(field(j, "decoder", "model."), "model.decoder");
    m.encoder_linear = parse_matrix(field(j, "encoder_linear", "model."), "model.encoder_linear");
    m.decoder_linear = parse_matrix(field(j, "decoder_linear", "model."), "model.decoder_linear");
    const json& k = field(j, "koopman", "model.");
    m.koopman.zeta = number_list(k, "zeta", "model.koopman.");
    m.koopman.sigma = number_list(k, "sigma", "model.koopman.");
    try {
        m.validate();
    } catch (const Error& e) {
        throw FormatError(std::string("checkpoint: inconsistent model: ") + e.what());
    }
    return m;
}

}  // namespace

Checkpoint map_checkpoint(const KoopmanModel& model, Form form) {
    return Checkpoint{Checkpoint::Kind::map, form, model, std::nullopt};
}

Checkpoint posterior_checkpoint(const VariationalPosterior& q, Form form) {
    return Checkpoint{Checkpoint::Kind::posterior, form, q.base, q};
}

std::string to_json(const Checkpoint& c) {
    json j;
    j["format_version"] = kCheckpointFormatVersion;
    j["kind"] = c.kind == Checkpoint::Kind::map ? "map" : "posterior";
    j["form"] = to_string(c.form);
    j["model"] = model_json(c.kind == Checkpoint::Kind::posterior && c.posterior ? c.posterior->base : c.model);
    if (c.kind == Checkpoint::Kind::posterior) {
        if (!c.posterior) throw StateError("posterior checkpoint without a posterior");
        json blocks = json::array();
        for (const auto& b : c.posterior->blocks)
            blocks.push_back(json{{"name", b.name},
                                  {"kind", b.kind == BlockKind::positive ? "log-normal" : "gaussian"},
                                  {"mean", matrix_json(b.mean)},
                                  {"log_std", matrix_json(b.log_std)}});
        j["posterior"] = json{{"blocks", blocks}};
    }
    return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("checkpoint: not valid JSON: ") + e.what());
    }
    const json& version = field(j, "format_version", "");
    if (!version.is_number_integer() || version.get<int>() != kCheckpointFormatVersion)
        throw FormatError("checkpoint: field 'format_version' must be " + std::to_string(kCheckpointFormatVersion));
    Checkpoint c;
    const json& kind = field(j, "kind", "");
    if (kind == "map")
        c.kind = Checkpoint::Kind::map;
    else if (kind == "posterior")
        c.kind = Checkpoint::Kind::posterior;
    else
        throw FormatError("checkpoint: field 'kind' must be \"map\" or \"posterior\"");
    const json& form = field(j, "form", "");
    if (!form.is_string()) throw FormatError("checkpoint: field 'form' must be a string");
    try {
        c.form = parse_form(form.get<std::string>());
    } catch (const UsageError& e) {
        throw FormatError(std::string("checkpoint: field 'form': ") + e.what());
    }
    c.model = parse_model(field(j, "model", ""));
    if (c.kind == Checkpoint::Kind::posterior) {
        VariationalPosterior q;
        q.base = c.model;
        const json& blocks = field(field(j, "posterior", ""), "blocks", "posterior.");
        if (!blocks.is_array()) throw FormatError("checkpoint: field 'posterior.blocks' must be an array");
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const std::string p = "posterior.blocks[" + std::to_string(i) + "]";
            VariationalBlock b;
            const json& name = field(blocks[i], "name", p + ".");
            if (!name.is_string()) throw FormatError("checkpoint: field '" + p + ".name' must be a string");
            b.name = name.get<std::string>();
            const json& k = field(blocks[i], "kind", p + ".");
            if (k == "gaussian")
                b.kind = BlockKind::gaussian;
            else if (k == "log-normal")
                b.kind = BlockKind::positive;
            else
                throw FormatError("checkpoint: field '" + p + ".kind' must be gaussian or log-normal");
            b.mean = parse_matrix(field(blocks[i], "mean", p + "."), p + ".mean");
            b.log_std = parse_matrix(field(blocks[i], "log_std", p + "."), p + ".log_std");
            q.blocks.push_back(std::move(b));
        }
        try {
            q.validate();
        } catch (const FormatError&) {
            throw;
        } catch (const Error& e) {
            throw FormatError(std::string("checkpoint: inconsistent posterior: ") + e.what());
        }
        c.posterior = std::move(q);
    }
    return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint '" + path + "'");
    out << to_json(checkpoint);
    if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_json(ss.str());
}

}  // namespace koopman
