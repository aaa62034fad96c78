#include "koopman/objectives.hpp"

#include <cmath>

#include "koopman/errors.hpp"

namespace koopman {

namespace {

Var leaf(Tape& tape, Matrix value, bool trainable) {
    return trainable ? tape.variable(std::move(value)) : tape.constant(std::move(value));
}

Matrix row_of(const std::vector<double>& v) {
    Matrix m(1, v.size());
    for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i];
    return m;
}

void append(std::vector<double>& out, const Matrix& m) { out.insert(out.end(), m.values().begin(), m.values().end()); }

void append_net(std::vector<double>& out, const Tape& tape, const NetVars& vars) {
    for (std::size_t l = 0; l < vars.weights.size(); ++l) {
        append(out, tape.grad(vars.weights[l]));
        append(out, tape.grad(vars.biases[l]));
    }
}

void require_finite(const LossValue& v, const char* what) {
    if (!std::isfinite(v.value)) throw NumericError(std::string(what) + ": loss is not finite");
    for (double g : v.gradient)
        if (!std::isfinite(g)) throw NumericError(std::string(what) + ": gradient is not finite");
}

bool same_times(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > 1e-9 * std::max(1.0, std::abs(a[i]))) return false;
    return true;
}

}  // namespace

ModelVars assemble_model_vars(Tape& tape, const KoopmanModel& model, NetVars encoder, NetVars decoder,
                              Var encoder_linear, Var decoder_linear, Var zeta, Var decay, DecayCoordinates coords) {
    ModelVars v;
    v.encoder = std::move(encoder);
    v.decoder = std::move(decoder);
    v.encoder_linear = encoder_linear;
    v.decoder_linear = decoder_linear;
    v.zeta = zeta;
    v.decay = decay;
    const Var diag = coords == DecayCoordinates::sigma ? scale(square(decay), -1.0) : scale(decay, -1.0);
    v.K = tridiagonal_skew(zeta, diag);
    v.encoder_skip = matmul(tape.constant(model.encoder_skip_basis()), encoder_linear);
    v.decoder_skip = matmul(decoder_linear, tape.constant(model.decoder_skip_basis()));
    return v;
}

ModelVars bind_model(Tape& tape, const KoopmanModel& model, const Trainable& trainable, DecayCoordinates decay) {
    model.validate();
    Matrix d = row_of(model.koopman.sigma);
    if (decay == DecayCoordinates::sigma_squared)
        for (double& x : d.values()) x *= x;
    NetVars enc = bind(tape, model.encoder, trainable.networks);
    NetVars dec = bind(tape, model.decoder, trainable.networks);
    const Var lenc = leaf(tape, model.encoder_linear, trainable.linear_maps);
    const Var ldec = leaf(tape, model.decoder_linear, trainable.linear_maps);
    const Var zeta = leaf(tape, row_of(model.koopman.zeta), trainable.koopman);
    const Var dv = leaf(tape, std::move(d), trainable.koopman);
    return assemble_model_vars(tape, model, std::move(enc), std::move(dec), lenc, ldec, zeta, dv, decay);
}

std::vector<double> collect_gradient(const Tape& tape, const ModelVars& vars) {
    std::vector<double> out;
    append_net(out, tape, vars.encoder);
    append_net(out, tape, vars.decoder);
    append(out, tape.grad(vars.encoder_linear));
    append(out, tape.grad(vars.decoder_linear));
    append(out, tape.grad(vars.zeta));
    append(out, tape.grad(vars.decay));
    return out;
}

Var encode(const KoopmanModel& model, const ModelVars& vars, const Var& z) {
    Var phi = forward(model.encoder, vars.encoder, z);
    if (model.svd_embedding) phi = add(phi, matmul(z, vars.encoder_skip));
    return phi;
}

Var decode(const KoopmanModel& model, const ModelVars& vars, const Var& phi) {
    Var z = forward(model.decoder, vars.decoder, phi);
    if (model.svd_embedding) z = add(z, matmul(phi, vars.decoder_skip));
    return z;
}

DiffResiduals diff_residuals(const KoopmanModel& model, const ModelVars& vars, Tape& tape, const DiffBatch& batch) {
    const std::size_t n = model.state_dim();
    if (batch.z.cols() != n || batch.zdot.cols() != n || batch.z.rows() != batch.zdot.rows())
        throw DimensionError("diff batch must be B x " + std::to_string(n) + " states and rates");
    if (batch.z.rows() == 0) throw DataError("diff batch is empty");
    const Var z = tape.constant(batch.z);
    const Var zdot = tape.constant(batch.zdot);
    DualVar enc = forward_tangent(model.encoder, vars.encoder, z, zdot);
    if (model.svd_embedding) {
        enc.value = add(enc.value, matmul(z, vars.encoder_skip));
        enc.tangent = add(enc.tangent, matmul(zdot, vars.encoder_skip));
    }
    DiffResiduals r;
    r.linear = sub(matmul(enc.value, vars.K), enc.tangent);
    r.reconstruction = sub(decode(model, vars, enc.value), z);
    return r;
}

std::vector<Var> window_propagators(const Var& k, const std::vector<double>& times) {
    std::vector<Var> out;
    out.reserve(times.size());
    if (times.empty()) return out;
    bool uniform = times.size() >= 2 && times.front() == 0.0;
    const double dt = times.size() >= 2 ? times[1] - times[0] : 0.0;
    for (std::size_t j = 1; uniform && j < times.size(); ++j)
        uniform = std::abs((times[j] - times[j - 1]) - dt) <= 1e-9 * std::max(1.0, std::abs(dt));
    if (!uniform) {
        for (double t : times) out.push_back(matexp(k, t));
        return out;
    }
    const Var step = matexp(k, dt);
    out.push_back(identity_like(k));
    out.push_back(step);
    for (std::size_t j = 2; j < times.size(); ++j) out.push_back(matmul(out.back(), step));
    return out;
}

RecurrentResiduals recurrent_residuals(const KoopmanModel& model, const ModelVars& vars, Tape& tape,
                                       const TrajBatch& batch) {
    const std::size_t n = model.state_dim();
    if (batch.windows.empty()) throw DataError("trajectory batch is empty");
    const double inv_windows = 1.0 / static_cast<double>(batch.windows.size());

    // Windows sharing a time grid share their propagators.
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t w = 0; w < batch.windows.size(); ++w) {
        const Window& win = batch.windows[w];
        if (win.z.cols() != n) throw DimensionError("window width differs from the model state width");
        if (win.t.size() != win.z.rows() || win.t.empty()) throw DataError("window times and states differ in length");
        bool placed = false;
        for (auto& g : groups)
            if (same_times(batch.windows[g.front()].t, win.t)) {
                g.push_back(w);
                placed = true;
                break;
            }
        if (!placed) groups.push_back({w});
    }

    RecurrentResiduals out;
    std::vector<Var> lin_parts, rec_parts;
    for (const auto& g : groups) {
        const std::vector<double>& times = batch.windows[g.front()].t;
        const std::size_t len = times.size();
        const std::size_t wc = g.size();
        // Rows stacked time-major: row j * wc + i is window i at step j.
        Matrix zs(len * wc, n);
        for (std::size_t j = 0; j < len; ++j)
            for (std::size_t i = 0; i < wc; ++i)
                for (std::size_t c = 0; c < n; ++c) zs(j * wc + i, c) = batch.windows[g[i]].z(j, c);
        const Var z = tape.constant(std::move(zs));
        const Var phi = encode(model, vars, z);
        const Var phi0 = slice_rows(phi, 0, wc);
        const std::vector<Var> props = window_propagators(vars.K, times);
        std::vector<Var> preds;
        preds.reserve(len);
        for (std::size_t j = 0; j < len; ++j) preds.push_back(j == 0 ? phi0 : matmul(phi0, props[j]));
        const Var pred = vstack(preds);
        const double w = inv_windows / static_cast<double>(len);
        rec_parts.push_back(sub(decode(model, vars, pred), z));
        out.reconstruction_row_weight.insert(out.reconstruction_row_weight.end(), len * wc, w);
        if (len >= 2) {
            const std::size_t rows = (len - 1) * wc;
            lin_parts.push_back(sub(slice_rows(pred, wc, rows), slice_rows(phi, wc, rows)));
            out.linear_row_weight.insert(out.linear_row_weight.end(), rows, w);
        }
    }
    out.reconstruction = rec_parts.size() == 1 ? rec_parts.front() : vstack(rec_parts);
    out.has_linear = !lin_parts.empty();
    if (out.has_linear) out.linear = lin_parts.size() == 1 ? lin_parts.front() : vstack(lin_parts);
    return out;
}

Var weight_decay_term(const ModelVars& vars) {
    Var total;
    auto acc = [&](const Var& v) { total = total.valid() ? add(total, sum_sq(v)) : sum_sq(v); };
    for (const NetVars* net : {&vars.encoder, &vars.decoder})
        for (std::size_t l = 0; l < net->weights.size(); ++l) {
            acc(net->weights[l]);
            acc(net->biases[l]);
        }
    return total;
}

LossValue diff_loss(const KoopmanModel& model, const DiffBatch& batch, const LossOptions& options) {
    Tape tape;
    const ModelVars vars = bind_model(tape, model, options.trainable);
    const DiffResiduals r = diff_residuals(model, vars, tape, batch);
    const double inv_b = 1.0 / static_cast<double>(batch.z.rows());
    const Var lin = scale(sum_sq(r.linear), options.weights.linear * inv_b);
    const Var rec = scale(sum_sq(r.reconstruction), options.weights.reconstruction * inv_b);
    const Var reg = scale(weight_decay_term(vars), options.weight_decay);
    const Var total = add(add(lin, rec), reg);
    tape.backward(total);

    LossValue out;
    out.value = total.value()[0];
    out.linear = lin.value()[0];
    out.reconstruction = rec.value()[0];
    out.regularization = reg.value()[0];
    out.gradient = collect_gradient(tape, vars);
    require_finite(out, "diff_loss");
    return out;
}

LossValue recurrent_loss(const KoopmanModel& model, const TrajBatch& batch, const LossOptions& options) {
    Tape tape;
    const ModelVars vars = bind_model(tape, model, options.trainable);
    const RecurrentResiduals r = recurrent_residuals(model, vars, tape, batch);
    const Var rec = scale(sum(scale_rows(square(r.reconstruction), r.reconstruction_row_weight)),
                          options.weights.reconstruction);
    Var total = rec;
    LossValue out;
    if (r.has_linear) {
        const Var lin =
            scale(sum(scale_rows(square(r.linear), r.linear_row_weight)), options.weights.linear);
        total = add(total, lin);
        out.linear = lin.value()[0];
    }
    const Var reg = scale(weight_decay_term(vars), options.weight_decay);
    total = add(total, reg);
    tape.backward(total);

    out.value = total.value()[0];
    out.reconstruction = rec.value()[0];
    out.regularization = reg.value()[0];
    out.gradient = collect_gradient(tape, vars);
    require_finite(out, "recurrent_loss");
    return out;
}

}  // namespace koopman
