#include "koopman/dynamics.hpp"

#include <cmath>
#include <numeric>

#include "koopman/errors.hpp"
#include "koopman/rng.hpp"

namespace koopman {

std::vector<double> SystemDef::operator()(std::span<const double> x) const {
    if (x.size() != dim) throw DimensionError(name + ": state has " + std::to_string(x.size()) + " components, expected " + std::to_string(dim));
    std::vector<double> dx(dim);
    field(x, dx);
    return dx;
}

SystemDef fixed_point_system(double mu, double lambda) {
    SystemDef s;
    s.name = "fixed-point";
    s.dim = 2;
    s.parameters = {{"mu", mu}, {"lambda", lambda}};
    s.field = [mu, lambda](std::span<const double> x, std::span<double> dx) {
        dx[0] = mu * x[0];
        dx[1] = lambda * (x[1] - x[0] * x[0]);
    };
    return s;
}

SystemDef duffing_system(double delta, double beta, double alpha) {
    SystemDef s;
    s.name = "duffing";
    s.dim = 2;
    s.parameters = {{"delta", delta}, {"beta", beta}, {"alpha", alpha}};
    s.field = [delta, beta, alpha](std::span<const double> x, std::span<double> dx) {
        dx[0] = x[1];
        dx[1] = -delta * x[1] - x[0] * (beta + alpha * x[0] * x[0]);
    };
    return s;
}

SystemDef stuart_landau_system(double growth, double frequency) {
    SystemDef s;
    s.name = "stuart-landau";
    s.dim = 2;
    s.parameters = {{"growth", growth}, {"frequency", frequency}};
    s.field = [growth, frequency](std::span<const double> x, std::span<double> dx) {
        const double r2 = x[0] * x[0] + x[1] * x[1];
        dx[0] = (growth - r2) * x[0] - frequency * x[1];
        dx[1] = frequency * x[0] + (growth - r2) * x[1];
    };
    return s;
}

SystemDef system_by_name(const std::string& name) {
    if (name == "fixed-point" || name == "fixed_point") return fixed_point_system();
    if (name == "duffing") return duffing_system();
    if (name == "stuart-landau" || name == "stuart_landau") return stuart_landau_system();
    throw UsageError("unknown system '" + name + "' (expected fixed-point, duffing or stuart-landau)");
}

Matrix vector_field(const SystemDef& system, const Matrix& x) {
    if (x.cols() != system.dim)
        throw DimensionError(system.name + ": points have " + std::to_string(x.cols()) + " columns, expected " +
                             std::to_string(system.dim));
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) system.field(x.row(r), out.row(r));
    return out;
}

namespace {

void rk4_step(const SystemDef& s, std::vector<double>& x, double dt, std::vector<double> (&k)[4], std::vector<double>& tmp) {
    const std::size_t n = x.size();
    s.field(x, k[0]);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k[0][i];
    s.field(tmp, k[1]);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k[1][i];
    s.field(tmp, k[2]);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k[2][i];
    s.field(tmp, k[3]);
    for (std::size_t i = 0; i < n; ++i) x[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
}

Trajectory integrate(const SystemDef& system, std::span<const double> x0, double dt, std::size_t samples,
                     std::size_t substeps) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("integrate_rk4: dt must be positive");
    if (x0.size() != system.dim)
        throw DimensionError(system.name + ": initial state has " + std::to_string(x0.size()) + " components, expected " +
                             std::to_string(system.dim));
    if (substeps == 0) throw DomainError("integrate_rk4: substeps must be positive");
    const std::size_t n = system.dim;
    std::vector<double> x(x0.begin(), x0.end()), tmp(n);
    std::vector<double> k[4] = {std::vector<double>(n), std::vector<double>(n), std::vector<double>(n),
                                std::vector<double>(n)};
    Trajectory tr;
    tr.x = Matrix(samples, n);
    tr.t.resize(samples);
    const double h = dt / static_cast<double>(substeps);
    for (std::size_t s = 0; s < samples; ++s) {
        if (s > 0)
            for (std::size_t j = 0; j < substeps; ++j) {
                rk4_step(system, x, h, k, tmp);
                for (double v : x)
                    if (!std::isfinite(v))
                        throw NumericError(system.name + ": state blew up at step " +
                                           std::to_string((s - 1) * substeps + j + 1));
            }
        tr.t[s] = static_cast<double>(s) * dt;
        for (std::size_t i = 0; i < n; ++i) tr.x(s, i) = x[i];
    }
    return tr;
}

}  // namespace

Trajectory integrate_rk4(const SystemDef& system, std::span<const double> x0, double dt, std::size_t steps) {
    return integrate(system, x0, dt, steps + 1, 1);
}

Trajectory sample_trajectory(const SystemDef& system, std::span<const double> x0, double sample_dt,
                             std::size_t samples, std::size_t substeps) {
    if (samples == 0) throw DomainError("sample_trajectory: need at least one sample");
    return integrate(system, x0, sample_dt, samples, substeps);
}

Matrix lhs_sample(const std::vector<std::pair<double, double>>& bounds, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw DomainError("lhs_sample: n must be at least 1");
    for (const auto& [lo, hi] : bounds)
        if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi >= lo)) throw DomainError("lhs_sample: invalid bounds");
    Rng rng(seed);
    Matrix out(n, bounds.size());
    std::vector<std::size_t> strata(n);
    for (std::size_t d = 0; d < bounds.size(); ++d) {
        std::iota(strata.begin(), strata.end(), std::size_t{0});
        rng.shuffle(strata);
        const auto [lo, hi] = bounds[d];
        for (std::size_t i = 0; i < n; ++i)
            out(i, d) = lo + (hi - lo) * (static_cast<double>(strata[i]) + rng.uniform()) / static_cast<double>(n);
    }
    return out;
}

Dataset make_diff_dataset(const SystemDef& system, const Matrix& points) {
    return Dataset::derivative(points, vector_field(system, points));
}

PodProjection pod_project(const Matrix& snapshots, std::size_t r) {
    const std::size_t m = snapshots.rows(), n = snapshots.cols();
    if (r == 0 || r > std::min(m, n))
        throw DimensionError("pod_project: rank " + std::to_string(r) + " must lie in [1, min(M, N) = " +
                             std::to_string(std::min(m, n)) + "]");
    PodProjection out;
    out.basis.mean.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t c = 0; c < n; ++c) out.basis.mean[c] += snapshots(i, c);
    for (double& v : out.basis.mean) v /= static_cast<double>(m);
    Matrix centered = snapshots;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t c = 0; c < n; ++c) centered(i, c) -= out.basis.mean[c];
    const SvdResult svd = thin_svd(centered);
    out.basis.singular_values = svd.s;
    out.basis.modes = svd.v.block(0, 0, n, r);
    double head = 0.0, total = 0.0;
    for (std::size_t i = 0; i < svd.s.size(); ++i) {
        total += svd.s[i] * svd.s[i];
        if (i < r) head += svd.s[i] * svd.s[i];
    }
    out.basis.energy_ratio = total > 0.0 ? head / total : 1.0;
    out.coefficients = matmul(centered, out.basis.modes);
    return out;
}

Matrix pod_reconstruct(const PodBasis& basis, const Matrix& coefficients) {
    if (coefficients.cols() != basis.modes.cols()) throw DimensionError("pod_reconstruct: coefficient width mismatch");
    Matrix x = matmul_nt(coefficients, basis.modes);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t c = 0; c < x.cols(); ++c) x(i, c) += basis.mean[c];
    return x;
}

Matrix add_noise(const Matrix& series, double ratio, std::uint64_t seed) {
    if (!(ratio >= 0.0)) throw DomainError("add_noise: ratio must be non-negative");
    const std::size_t m = series.rows(), n = series.cols();
    std::vector<double> sd(n, 0.0);
    for (std::size_t c = 0; c < n && m > 0; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < m; ++i) mean += series(i, c);
        mean /= static_cast<double>(m);
        double ss = 0.0;
        for (std::size_t i = 0; i < m; ++i) ss += (series(i, c) - mean) * (series(i, c) - mean);
        sd[c] = ratio * std::sqrt(ss / static_cast<double>(m));
    }
    Matrix out = series;
    if (ratio == 0.0) return out;
    Rng rng(seed);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t c = 0; c < n; ++c) out(i, c) += sd[c] * rng.normal();
    return out;
}

double FixedPointReference::phi_a(double x1, double) const { return x1; }

double FixedPointReference::phi_b(double x1, double x2) const { return x2 - lambda * x1 * x1 / (lambda - 2.0 * mu); }

FixedPointReference analytic_reference_fixed_point(double mu, double lambda) {
    if (std::abs(lambda - 2.0 * mu) <= 1e-12 * std::max(1.0, std::abs(lambda)))
        throw DomainError("analytic_reference_fixed_point: resonance lambda = 2 mu has no polynomial eigenfunction");
    FixedPointReference ref;
    ref.mu = mu;
    ref.lambda = lambda;
    ref.eigenvalues = {Complex(lambda, 0.0), Complex(mu, 0.0)};
    return ref;
}

std::size_t surrogate_feature_count(std::size_t degree) { return degree * (degree + 3) / 2; }

Matrix surrogate_features(const Matrix& xy, std::size_t degree) {
    if (xy.cols() != 2) throw DimensionError("surrogate_features: expected two columns");
    Matrix f(xy.rows(), surrogate_feature_count(degree));
    for (std::size_t r = 0; r < xy.rows(); ++r) {
        std::size_t k = 0;
        for (std::size_t d = 1; d <= degree; ++d)
            for (std::size_t a = 0; a <= d; ++a)
                f(r, k++) = std::pow(xy(r, 0), static_cast<double>(d - a)) * std::pow(xy(r, 1), static_cast<double>(a));
    }
    return f;
}

Matrix surrogate_lift(const SurrogateOptions& o) {
    const std::size_t nf = surrogate_feature_count(o.degree);
    Rng rng(o.seed);
    Matrix lift(nf, o.full_dim);
    const double s = 1.0 / std::sqrt(static_cast<double>(nf));
    for (double& v : lift.values()) v = s * rng.normal();
    return lift;
}

Trajectory surrogate_latent_trajectory(const SurrogateOptions& o) {
    const double x0[2] = {o.initial_radius, 0.0};
    return sample_trajectory(stuart_landau_system(o.growth, o.frequency), x0, o.dt, o.snapshots);
}

Trajectory generate_surrogate(const SurrogateOptions& o) {
    if (o.degree == 0 || o.full_dim == 0) throw DomainError("surrogate: degree and full_dim must be positive");
    Trajectory latent = surrogate_latent_trajectory(o);
    // Features are scaled by the limit-cycle radius so every degree has a
    // comparable magnitude before the energy decay below.
    const double radius = std::sqrt(o.growth);
    Matrix xy = latent.x;
    for (double& v : xy.values()) v /= radius;
    Matrix f = surrogate_features(xy, o.degree);
    std::size_t k = 0;
    for (std::size_t d = 1; d <= o.degree; ++d)
        for (std::size_t a = 0; a <= d; ++a, ++k)
            for (std::size_t r = 0; r < f.rows(); ++r) f(r, k) *= std::pow(0.5, static_cast<double>(d - 1));
    return Trajectory{latent.t, matmul(f, surrogate_lift(o))};
}

}  // namespace koopman
