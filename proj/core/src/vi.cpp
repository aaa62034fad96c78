#include "koopman/vi.hpp"

#include <cmath>
#include <numbers>

#include "koopman/errors.hpp"
#include "koopman/objectives.hpp"
#include "koopman/optim.hpp"
#include "koopman/rng.hpp"

namespace koopman {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Matrix row_of(const std::vector<double>& v) { return Matrix::row_vector(v); }

std::vector<double> values_of(const Matrix& m) { return {m.values().begin(), m.values().end()}; }

Matrix filled_like(const Matrix& m, double v) { return Matrix(m.rows(), m.cols(), v); }

VariationalBlock gaussian_block(std::string name, const Matrix& mean, double log_std) {
    return {std::move(name), BlockKind::gaussian, mean, filled_like(mean, log_std)};
}

VariationalBlock positive_block(std::string name, Matrix log_mean, double log_std) {
    Matrix ls = filled_like(log_mean, log_std);
    return {std::move(name), BlockKind::positive, std::move(log_mean), std::move(ls)};
}

Matrix log_floor(const std::vector<double>& v, double floor, bool column) {
    Matrix m = column ? Matrix(v.size(), 1) : Matrix(1, v.size());
    for (std::size_t i = 0; i < v.size(); ++i) m[i] = std::log(std::max(v[i], floor));
    return m;
}

std::vector<double> column_mean_squares(const Matrix& r) {
    std::vector<double> out(r.cols(), 0.0);
    if (r.rows() == 0) return out;
    for (std::size_t i = 0; i < r.rows(); ++i)
        for (std::size_t c = 0; c < r.cols(); ++c) out[c] += r(i, c) * r(i, c);
    for (double& v : out) v /= static_cast<double>(r.rows());
    return out;
}

std::string layer_name(const char* net, const char* what, std::size_t l) {
    return std::string(net) + "." + what + std::to_string(l + 1);
}

}  // namespace

double entropy(const std::vector<VariationalBlock>& blocks) {
    double h = 0.0;
    for (const auto& b : blocks)
        for (std::size_t i = 0; i < b.mean.size(); ++i) {
            h += 0.5 * (kLog2Pi + 1.0) + b.log_std[i];
            if (b.kind == BlockKind::positive) h += b.mean[i];
        }
    return h;
}

ElboValue elbo_estimate(const std::vector<VariationalBlock>& blocks, const LogJoint& log_joint, std::size_t n_samples,
                        std::uint64_t seed) {
    if (n_samples == 0) throw DomainError("elbo_estimate: n_samples must be at least 1");
    ElboValue out;
    std::size_t total = 0;
    for (const auto& b : blocks) {
        if (b.mean.rows() != b.log_std.rows() || b.mean.cols() != b.log_std.cols())
            throw DimensionError("variational block '" + b.name + "': mean and log_std shapes differ");
        total += b.mean.size();
    }
    out.grad_mean.assign(total, 0.0);
    out.grad_log_std.assign(total, 0.0);
    const double w = 1.0 / static_cast<double>(n_samples);

    for (std::size_t s = 0; s < n_samples; ++s) {
        Rng rng = Rng::split(seed, s);
        Tape tape;
        std::vector<Var> means, log_stds;
        std::vector<BlockDraw> draws;
        for (const auto& b : blocks) {
            Matrix eps(b.mean.rows(), b.mean.cols());
            for (double& e : eps.values()) e = rng.normal();
            const Var m = tape.variable(b.mean);
            const Var ls = tape.variable(b.log_std);
            const Var u = add(m, hadamard(exp(ls), tape.constant(std::move(eps))));
            means.push_back(m);
            log_stds.push_back(ls);
            if (b.kind == BlockKind::positive)
                draws.push_back({exp(u), u});
            else
                draws.push_back({u, Var{}});
        }
        const Var lj = log_joint(tape, draws);
        if (lj.rows() != 1 || lj.cols() != 1) throw DimensionError("log joint must be a scalar");
        const double value = lj.value()[0];
        if (!std::isfinite(value)) throw NumericError("ELBO estimate is not finite");
        out.log_joint += w * value;
        tape.backward(lj);
        std::size_t k = 0;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const Matrix gm = tape.grad(means[b]);
            const Matrix gs = tape.grad(log_stds[b]);
            for (std::size_t i = 0; i < gm.size(); ++i, ++k) {
                out.grad_mean[k] += w * gm[i];
                out.grad_log_std[k] += w * gs[i];
            }
        }
    }
    out.entropy = entropy(blocks);
    out.value = out.log_joint + out.entropy;
    std::size_t k = 0;
    for (const auto& b : blocks)
        for (std::size_t i = 0; i < b.mean.size(); ++i, ++k) {
            out.grad_log_std[k] += 1.0;
            if (b.kind == BlockKind::positive) out.grad_mean[k] += 1.0;
        }
    for (double g : out.grad_mean)
        if (!std::isfinite(g)) throw NumericError("ELBO gradient is not finite");
    for (double g : out.grad_log_std)
        if (!std::isfinite(g)) throw NumericError("ELBO gradient is not finite");
    return out;
}

double half_cauchy_log_density(double x, double scale) {
    if (!(x >= 0.0) || !(scale > 0.0)) throw DomainError("half-Cauchy density needs x >= 0 and scale > 0");
    const double r = x / scale;
    return std::log(2.0 / (std::numbers::pi * scale)) - std::log1p(r * r);
}

double gamma_log_density(double x, double shape, double rate) {
    if (!(x > 0.0) || !(shape > 0.0) || !(rate > 0.0)) throw DomainError("Gamma density needs positive arguments");
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double gaussian_log_likelihood(const Matrix& residuals, const std::vector<double>& variances) {
    if (variances.size() != residuals.cols()) throw DimensionError("gaussian_log_likelihood: variance count mismatch");
    for (double v : variances)
        if (!(v > 0.0)) throw DomainError("gaussian_log_likelihood: covariance entries must be positive");
    double ll = 0.0;
    for (std::size_t i = 0; i < residuals.rows(); ++i)
        for (std::size_t c = 0; c < residuals.cols(); ++c) {
            const double r = residuals(i, c);
            ll -= 0.5 * (r * r / variances[c] + kLog2Pi + std::log(variances[c]));
        }
    return ll;
}

Var half_cauchy_log_density(const Var& x, double scale) {
    const double n = static_cast<double>(x.value().size());
    const Var tail = sum(log(add_scalar(square(koopman::scale(x, 1.0 / scale)), 1.0)));
    return add_scalar(koopman::scale(tail, -1.0), n * std::log(2.0 / (std::numbers::pi * scale)));
}

Var gaussian_log_likelihood(const Var& residuals, const Var& log_variance) {
    if (log_variance.rows() != 1 || log_variance.cols() != residuals.cols())
        throw DimensionError("gaussian_log_likelihood: log-variance must be 1 x " + std::to_string(residuals.cols()));
    const double rows = static_cast<double>(residuals.rows());
    const Var quad = sum(mul_row(square(residuals), exp(scale(log_variance, -1.0))));
    const Var logdet = scale(sum(log_variance), rows);
    return add_scalar(scale(add(quad, logdet), -0.5), -0.5 * rows * static_cast<double>(residuals.cols()) * kLog2Pi);
}

std::size_t VariationalPosterior::index(const std::string& name) const {
    for (std::size_t i = 0; i < blocks.size(); ++i)
        if (blocks[i].name == name) return i;
    throw FormatError("variational posterior has no block '" + name + "'");
}

std::size_t VariationalPosterior::group_count() const { return encoder_blocks() + decoder_blocks() + 3; }

std::size_t VariationalPosterior::parameter_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.mean.size();
    return n;
}

void VariationalPosterior::validate() const {
    base.validate();
    const std::size_t groups = group_count();
    if (blocks.size() != groups + 5) throw FormatError("variational posterior: expected " + std::to_string(groups + 5) + " blocks");
    for (const auto& b : blocks) {
        if (b.mean.rows() != b.log_std.rows() || b.mean.cols() != b.log_std.cols())
            throw FormatError("variational block '" + b.name + "': mean and log_std shapes differ");
        if (!b.mean.all_finite() || !b.log_std.all_finite())
            throw FormatError("variational block '" + b.name + "': non-finite entries");
    }
    const std::size_t d = base.latent_dim(), n = base.state_dim();
    auto expect = [&](const char* name, std::size_t r, std::size_t c) {
        const auto& b = block(name);
        if (b.mean.rows() != r || b.mean.cols() != c) throw FormatError(std::string("variational block '") + name + "' has the wrong shape");
    };
    expect("encoder_linear", d, d);
    expect("decoder_linear", d, d);
    expect("zeta", 1, d - 1);
    expect("sigma2", 1, d);
    expect("scales", groups, 1);
    expect("gamma_shape", 1, d);
    expect("lambda_rec", 1, n);
    expect("lambda_lin", 1, d);
}

VariationalPosterior init_posterior(const KoopmanModel& model, const TrainingSet& data, double log_std) {
    model.validate();
    VariationalPosterior q;
    q.base = model;
    std::vector<double> group_rms;
    auto add_group = [&](VariationalBlock b) {
        double ss = 0.0;
        for (double v : b.mean.values()) ss += v * v;
        group_rms.push_back(b.mean.size() ? std::sqrt(ss / static_cast<double>(b.mean.size())) : 1.0);
        q.blocks.push_back(std::move(b));
    };
    for (std::size_t l = 0; l < model.encoder.layers(); ++l) {
        add_group(gaussian_block(layer_name("encoder", "W", l), model.encoder.weights[l], log_std));
        add_group(gaussian_block(layer_name("encoder", "b", l), model.encoder.biases[l], log_std));
    }
    for (std::size_t l = 0; l < model.decoder.layers(); ++l) {
        add_group(gaussian_block(layer_name("decoder", "W", l), model.decoder.weights[l], log_std));
        add_group(gaussian_block(layer_name("decoder", "b", l), model.decoder.biases[l], log_std));
    }
    add_group(gaussian_block("encoder_linear", model.encoder_linear, log_std));
    add_group(gaussian_block("decoder_linear", model.decoder_linear, log_std));
    add_group(gaussian_block("zeta", row_of(model.koopman.zeta), log_std));

    std::vector<double> sigma2(model.koopman.sigma.size());
    for (std::size_t i = 0; i < sigma2.size(); ++i) sigma2[i] = model.koopman.sigma[i] * model.koopman.sigma[i];
    q.blocks.push_back(positive_block("sigma2", log_floor(sigma2, 1e-8, false), log_std));
    q.blocks.push_back(positive_block("scales", log_floor(group_rms, 1e-2, true), log_std));
    q.blocks.push_back(positive_block("gamma_shape", Matrix(1, model.latent_dim(), 0.0), log_std));

    std::vector<double> rec(model.state_dim(), 1.0), lin(model.latent_dim(), 1.0);
    if (data.size() > 0) {
        Tape tape;
        const ModelVars vars = bind_model(tape, model, Trainable{false, false, false});
        if (data.form == Form::diff) {
            const DiffResiduals r = diff_residuals(model, vars, tape, data.diff);
            rec = column_mean_squares(r.reconstruction.value());
            lin = column_mean_squares(r.linear.value());
        } else {
            const RecurrentResiduals r = recurrent_residuals(model, vars, tape, data.traj);
            rec = column_mean_squares(r.reconstruction.value());
            if (r.has_linear) lin = column_mean_squares(r.linear.value());
        }
    }
    q.blocks.push_back(positive_block("lambda_rec", log_floor(rec, 1e-8, false), log_std));
    q.blocks.push_back(positive_block("lambda_lin", log_floor(lin, 1e-8, false), log_std));
    q.validate();
    return q;
}

namespace {

// Writes block values (positive blocks exponentiated) into a model copy.
KoopmanModel model_from_blocks(const VariationalPosterior& q, const std::vector<Matrix>& values,
                               std::vector<double>* lambda_rec, std::vector<double>* lambda_lin) {
    KoopmanModel m = q.base;
    std::size_t k = 0;
    for (std::size_t l = 0; l < m.encoder.layers(); ++l) {
        m.encoder.weights[l] = values[k++];
        m.encoder.biases[l] = values[k++];
    }
    for (std::size_t l = 0; l < m.decoder.layers(); ++l) {
        m.decoder.weights[l] = values[k++];
        m.decoder.biases[l] = values[k++];
    }
    m.encoder_linear = values[k++];
    m.decoder_linear = values[k++];
    m.koopman.zeta = values_of(values[k++]);
    const Matrix& s2 = values[k++];
    for (std::size_t i = 0; i < s2.size(); ++i) m.koopman.sigma[i] = std::sqrt(s2[i]);
    k += 2;  // scales, gamma shapes
    if (lambda_rec) *lambda_rec = values_of(values[k]);
    if (lambda_lin) *lambda_lin = values_of(values[k + 1]);
    return m;
}

}  // namespace

KoopmanModel location_model(const VariationalPosterior& q) {
    std::vector<Matrix> values;
    for (const auto& b : q.blocks) {
        Matrix v = b.mean;
        if (b.kind == BlockKind::positive)
            for (double& x : v.values()) x = std::exp(x);
        values.push_back(std::move(v));
    }
    return model_from_blocks(q, values, nullptr, nullptr);
}

std::vector<PosteriorDraw> sample_posterior(const VariationalPosterior& q, std::size_t n, std::uint64_t seed) {
    q.validate();
    std::vector<PosteriorDraw> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = Rng::split(seed, i);
        std::vector<Matrix> values;
        for (const auto& b : q.blocks) {
            Matrix v(b.mean.rows(), b.mean.cols());
            for (std::size_t j = 0; j < v.size(); ++j) {
                const double u = b.mean[j] + std::exp(b.log_std[j]) * rng.normal();
                v[j] = b.kind == BlockKind::positive ? std::exp(u) : u;
            }
            values.push_back(std::move(v));
        }
        PosteriorDraw d;
        d.model = model_from_blocks(q, values, &d.lambda_rec, &d.lambda_lin);
        out.push_back(std::move(d));
    }
    return out;
}

LogJoint koopman_log_joint(const VariationalPosterior& q, const TrainingSet& batch, const PriorSpec& prior,
                           double likelihood_scale) {
    q.validate();
    return [&q, &batch, prior, likelihood_scale](Tape& tape, const std::vector<BlockDraw>& d) -> Var {
        const KoopmanModel& base = q.base;
        const std::size_t groups = q.group_count();
        const std::size_t i_sigma2 = q.index("sigma2"), i_scales = q.index("scales"), i_shape = q.index("gamma_shape"),
                          i_rec = q.index("lambda_rec"), i_lin = q.index("lambda_lin");

        // Gaussian parameters given their group scales.
        Var lp = half_cauchy_log_density(d[i_scales].value, prior.half_cauchy_scale);
        for (std::size_t g = 0; g < groups; ++g) {
            const double count = static_cast<double>(d[g].value.value().size());
            if (count == 0.0) continue;
            const Var u = slice_rows(d[i_scales].log_value, g, 1);
            const Var quad = hadamard(sum_sq(d[g].value), exp(scale(u, -2.0)));
            lp = add(lp, add_scalar(add(scale(u, -count), scale(quad, -0.5)), -0.5 * count * kLog2Pi));
        }

        // sigma^2 ~ Gamma(shape k, rate beta), k ~ half-Cauchy.
        const Var k = d[i_shape].value;
        const Var gamma = add(add(scale(sum(k), std::log(prior.gamma_rate)), scale(sum(lgamma(k)), -1.0)),
                              sub(sum(hadamard(add_scalar(k, -1.0), d[i_sigma2].log_value)),
                                  scale(sum(d[i_sigma2].value), prior.gamma_rate)));
        lp = add(lp, gamma);
        lp = add(lp, half_cauchy_log_density(k, prior.half_cauchy_scale));
        lp = add(lp, half_cauchy_log_density(d[i_rec].value, prior.half_cauchy_scale));
        lp = add(lp, half_cauchy_log_density(d[i_lin].value, prior.half_cauchy_scale));

        NetVars enc, dec;
        std::size_t b = 0;
        for (std::size_t l = 0; l < base.encoder.layers(); ++l) {
            enc.weights.push_back(d[b++].value);
            enc.biases.push_back(d[b++].value);
        }
        for (std::size_t l = 0; l < base.decoder.layers(); ++l) {
            dec.weights.push_back(d[b++].value);
            dec.biases.push_back(d[b++].value);
        }
        const Var lenc = d[b++].value;
        const Var ldec = d[b++].value;
        const Var zeta = d[b++].value;
        const ModelVars vars = assemble_model_vars(tape, base, std::move(enc), std::move(dec), lenc, ldec, zeta,
                                                   d[i_sigma2].value, DecayCoordinates::sigma_squared);

        Var ll;
        if (batch.form == Form::diff) {
            const DiffResiduals r = diff_residuals(base, vars, tape, batch.diff);
            ll = add(gaussian_log_likelihood(r.reconstruction, d[i_rec].log_value),
                     gaussian_log_likelihood(r.linear, d[i_lin].log_value));
        } else {
            // The first linear-consistency row of every window is identically
            // zero and is left out (recurrent_residuals starts at j = 2).
            const RecurrentResiduals r = recurrent_residuals(base, vars, tape, batch.traj);
            ll = gaussian_log_likelihood(r.reconstruction, d[i_rec].log_value);
            if (r.has_linear) ll = add(ll, gaussian_log_likelihood(r.linear, d[i_lin].log_value));
        }
        return add(lp, scale(ll, likelihood_scale));
    };
}

std::vector<double> fit_vi(const TrainConfig& config, VariationalPosterior& q, const TrainingSet& data,
                           std::size_t epochs, const ViEpochCallback& on_epoch) {
    if (data.size() == 0) throw DataError("training set is empty");
    q.validate();
    const PriorSpec prior{config.vi.half_cauchy_scale, config.vi.gamma_rate};
    const std::size_t n = q.parameter_count();
    std::vector<double> params(2 * n);
    auto pack = [&] {
        std::size_t k = 0;
        for (const auto& b : q.blocks)
            for (std::size_t i = 0; i < b.mean.size(); ++i, ++k) {
                params[k] = b.mean[i];
                params[n + k] = b.log_std[i];
            }
    };
    auto unpack = [&] {
        std::size_t k = 0;
        for (auto& b : q.blocks)
            for (std::size_t i = 0; i < b.mean.size(); ++i, ++k) {
                b.mean[i] = params[k];
                b.log_std[i] = params[n + k];
            }
    };
    pack();
    const double lr = config.vi.learning_rate > 0.0 ? config.vi.learning_rate : config.learning_rate;
    AdamState adam(params.size(), AdamOptions{lr});
    Rng order_rng = Rng::split(config.seed, 5);
    Rng noise_rng = Rng::split(config.seed, 6);
    std::vector<double> grad(params.size());
    std::vector<double> history;
    history.reserve(epochs);

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        const auto batches = epoch_batches(data.size(), config.batch_size, order_rng);
        double total = 0.0;
        for (const auto& items : batches) {
            const TrainingSet batch = select(data, items);
            const double scale_factor = static_cast<double>(data.size()) / static_cast<double>(items.size());
            ElboValue e;
            try {
                e = elbo_estimate(q.blocks, koopman_log_joint(q, batch, prior, scale_factor), config.vi.mc_samples,
                                  noise_rng.next_u64());
            } catch (const NumericError& err) {
                throw TrainingError(std::string("variational training diverged: ") + err.what(),
                                    static_cast<long>(epoch) - 1);
            }
            total += e.value;
            // Ascent on the ELBO.
            for (std::size_t i = 0; i < n; ++i) {
                grad[i] = -e.grad_mean[i];
                grad[n + i] = -e.grad_log_std[i];
            }
            adam_step(adam, params, grad);
            for (double p : params)
                if (!std::isfinite(p))
                    throw TrainingError("variational training diverged: non-finite parameter",
                                        static_cast<long>(epoch) - 1);
            unpack();
        }
        const double mean = total / static_cast<double>(batches.size());
        history.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean, q);
    }
    q.base = location_model(q);
    return history;
}

ViResult train_vi(const TrainConfig& config, const Dataset& data, const ViEpochCallback& on_epoch) {
    KoopmanModel model = initialize_model(config, data);
    const TrainingSet set = prepare_training_set(config, data, model.normalizer);
    const auto warm = static_cast<std::size_t>(std::llround(config.vi.warm_start_fraction * static_cast<double>(config.epochs)));
    ViResult result;
    TrainResult map = fit_map(config, std::move(model), set, warm);
    result.warm_start_history = std::move(map.history);
    result.posterior = init_posterior(map.model, set, config.vi.initial_log_std);
    result.history = fit_vi(config, result.posterior, set, config.epochs - warm, on_epoch);
    return result;
}

}  // namespace koopman
