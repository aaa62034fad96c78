#include "koopman/uncertainty.hpp"

#include <cmath>

#include "koopman/csv.hpp"
#include "koopman/errors.hpp"
#include "koopman/linalg.hpp"
#include "koopman/rng.hpp"

namespace koopman {

namespace {

void check_times(const std::vector<double>& times) {
    if (times.empty()) throw UsageError("prediction needs at least one time");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0.0) || !std::isfinite(times[i])) throw UsageError("prediction times must be non-negative");
        if (i > 0 && !(times[i] > times[i - 1])) throw UsageError("prediction times must be strictly increasing");
    }
}

Matrix normalized_row(const KoopmanModel& model, std::span<const double> x0) {
    if (x0.size() != model.state_dim())
        throw UsageError("initial condition has " + std::to_string(x0.size()) + " components, the model expects " +
                         std::to_string(model.state_dim()));
    return model.normalizer.normalize(Matrix::row_vector(x0));
}

// Latent rollout phi0 e^{t_j K} for every time, one row per time.
Matrix latent_rollout(const Matrix& k, const Matrix& phi0, const std::vector<double>& times) {
    Matrix out(times.size(), phi0.cols());
    for (std::size_t j = 0; j < times.size(); ++j) out.set_block(j, 0, matmul(phi0, matexp(k, times[j])));
    return out;
}

void add_observation_noise(Matrix& z, const std::vector<double>& variances, Rng& rng) {
    for (std::size_t r = 0; r < z.rows(); ++r)
        for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) += std::sqrt(variances[c]) * rng.normal();
}

constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;

}  // namespace

Matrix predict_map(const KoopmanModel& model, std::span<const double> x0, const std::vector<double>& times) {
    check_times(times);
    const Matrix phi0 = encode(model, normalized_row(model, x0));
    return model.normalizer.denormalize(decode(model, latent_rollout(model.K(), phi0, times)));
}

PredictiveEnsemble predict_posterior_recurrent(const VariationalPosterior& q, std::span<const double> x0,
                                               const std::vector<double>& times, std::size_t n_mc,
                                               std::uint64_t seed, bool with_noise) {
    check_times(times);
    if (n_mc == 0) throw UsageError("n_mc must be at least 1");
    const Matrix z0 = normalized_row(q.base, x0);
    const auto draws = sample_posterior(q, n_mc, seed);
    Rng noise = Rng::split(seed, kNoiseStream);
    PredictiveEnsemble out{times, {}, n_mc, 1};
    for (const auto& d : draws) {
        Matrix z = decode(d.model, latent_rollout(d.model.K(), encode(d.model, z0), times));
        if (with_noise) add_observation_noise(z, d.lambda_rec, noise);
        out.samples.push_back(d.model.normalizer.denormalize(z));
    }
    return out;
}

Matrix psd_cholesky(const Matrix& s) {
    require_square(s, "psd_cholesky");
    if (s.max_abs() == 0.0) return Matrix(s.rows(), s.cols());
    try {
        return cholesky(s);
    } catch (const NumericError&) {
    }
    for (double jitter = 1e-12; jitter <= 1e-6 * (1.0 + 1e-9); jitter *= 10.0) {
        Matrix t = s;
        for (std::size_t i = 0; i < t.rows(); ++i) t(i, i) += jitter;
        try {
            return cholesky(t);
        } catch (const NumericError&) {
        }
    }
    throw NumericError("covariance is not positive semi-definite even with 1e-6 jitter");
}

std::vector<Matrix> sample_ou_paths(const Matrix& k, const Matrix& lambda, std::span<const double> phi0,
                                    const std::vector<double>& times, std::size_t m, std::uint64_t seed) {
    check_times(times);
    const std::size_t d = k.rows();
    if (phi0.size() != d || lambda.rows() != d || lambda.cols() != d) throw DimensionError("sample_ou_paths: shape mismatch");
    // Transition over each gap: mean factor e^{dt K}, covariance Sigma(dt);
    // equal gaps share their factors.
    std::vector<Matrix> step(times.size()), chol(times.size());
    const Matrix kt = k.transpose();
    for (std::size_t j = 0; j < times.size(); ++j) {
        const double dt = times[j] - (j == 0 ? 0.0 : times[j - 1]);
        if (j >= 2 && std::abs(dt - (times[j - 1] - times[j - 2])) <= 1e-12 * std::max(1.0, dt)) {
            step[j] = step[j - 1];
            chol[j] = chol[j - 1];
            continue;
        }
        step[j] = matexp(k, dt);
        chol[j] = dt == 0.0 ? Matrix(d, d) : psd_cholesky(ou_covariance(kt, lambda, dt));
    }
    std::vector<Matrix> paths;
    paths.reserve(m);
    Matrix eps(d, 1);
    for (std::size_t i = 0; i < m; ++i) {
        Rng rng = Rng::split(seed, i);
        Matrix path(times.size(), d);
        Matrix phi = Matrix::row_vector(phi0);
        for (std::size_t j = 0; j < times.size(); ++j) {
            phi = matmul(phi, step[j]);
            for (std::size_t c = 0; c < d; ++c) eps[c] = rng.normal();
            const Matrix noise = matmul(chol[j], eps);
            for (std::size_t c = 0; c < d; ++c) {
                phi[c] += noise[c];
                path(j, c) = phi[c];
            }
        }
        paths.push_back(std::move(path));
    }
    return paths;
}

PredictiveEnsemble predict_posterior_diff(const VariationalPosterior& q, std::span<const double> x0,
                                          const std::vector<double>& times, std::size_t n_mc, std::size_t m_mc,
                                          std::uint64_t seed, bool with_noise) {
    check_times(times);
    if (n_mc == 0 || m_mc == 0) throw UsageError("n_mc and m_mc must be at least 1");
    const Matrix z0 = normalized_row(q.base, x0);
    const auto draws = sample_posterior(q, n_mc, seed);
    Rng noise = Rng::split(seed, kNoiseStream);
    PredictiveEnsemble out{times, {}, n_mc, m_mc};
    out.samples.reserve(n_mc * m_mc);
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const auto& d = draws[i];
        const Matrix phi0 = encode(d.model, z0);
        const Matrix lam = Matrix::diagonal(d.lambda_lin);
        const auto paths = sample_ou_paths(d.model.K(), lam, phi0.values(), times, m_mc,
                                           Rng::split(seed, kNoiseStream + 1 + i).next_u64());
        for (const auto& p : paths) {
            Matrix z = decode(d.model, p);
            if (with_noise) add_observation_noise(z, d.lambda_rec, noise);
            out.samples.push_back(d.model.normalizer.denormalize(z));
        }
    }
    return out;
}

PredictiveSummary summarize(const PredictiveEnsemble& e) {
    if (e.samples.empty()) throw DataError("summarize: empty ensemble");
    const std::size_t t = e.samples.front().rows(), n = e.samples.front().cols();
    PredictiveSummary s{e.times, Matrix(t, n), Matrix(t, n)};
    const double inv = 1.0 / static_cast<double>(e.samples.size());
    for (const auto& x : e.samples) {
        if (x.rows() != t || x.cols() != n) throw DimensionError("summarize: samples differ in shape");
        s.mean += x;
    }
    s.mean *= inv;
    for (const auto& x : e.samples)
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - s.mean[i];
            s.stddev[i] += d * d;
        }
    for (double& v : s.stddev.values()) v = std::sqrt(v * inv);
    return s;
}

void write_summary_csv(std::ostream& os, const PredictiveSummary& s) {
    os << "time,component,mean,std\n";
    for (std::size_t j = 0; j < s.mean.rows(); ++j)
        for (std::size_t c = 0; c < s.mean.cols(); ++c)
            os << csv::format(s.times[j]) << ',' << (c + 1) << ',' << csv::format(s.mean(j, c)) << ','
               << csv::format(s.stddev(j, c)) << '\n';
}

void write_samples_csv(std::ostream& os, const PredictiveEnsemble& e) {
    const std::size_t n = e.samples.empty() ? 0 : e.samples.front().cols();
    os << "sample_id,time";
    for (std::size_t c = 0; c < n; ++c) os << ",x_" << (c + 1);
    os << '\n';
    for (std::size_t i = 0; i < e.samples.size(); ++i)
        for (std::size_t j = 0; j < e.times.size(); ++j) {
            os << i << ',' << csv::format(e.times[j]);
            for (std::size_t c = 0; c < n; ++c) os << ',' << csv::format(e.samples[i](j, c));
            os << '\n';
        }
}

void write_trajectory_csv(std::ostream& os, const std::vector<double>& times, const Matrix& x) {
    os << "time";
    for (std::size_t c = 0; c < x.cols(); ++c) os << ",x_" << (c + 1);
    os << '\n';
    for (std::size_t j = 0; j < times.size(); ++j) {
        os << csv::format(times[j]);
        for (std::size_t c = 0; c < x.cols(); ++c) os << ',' << csv::format(x(j, c));
        os << '\n';
    }
}

}  // namespace koopman
