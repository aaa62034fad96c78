#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "koopman/dataset.hpp"
#include "koopman/linalg.hpp"
#include "koopman/matrix.hpp"

namespace koopman {

struct SystemDef {
    using Field = std::function<void(std::span<const double> x, std::span<double> dx)>;

    std::string name;
    std::size_t dim = 0;
    Field field;
    std::vector<std::pair<std::string, double>> parameters;

    std::vector<double> operator()(std::span<const double> x) const;
};

// x1' = mu x1, x2' = lambda (x2 - x1^2).
SystemDef fixed_point_system(double mu = -0.05, double lambda = -1.0);
// x1' = x2, x2' = -delta x2 - x1 (beta + alpha x1^2).
SystemDef duffing_system(double delta = 0.5, double beta = -1.0, double alpha = 1.0);
// Stuart-Landau normal form: unstable origin, limit cycle of radius sqrt(growth)
// traversed at angular frequency `frequency`.
SystemDef stuart_landau_system(double growth = 0.2, double frequency = 0.5);

// "fixed-point", "duffing" or "stuart-landau" with default parameters.
SystemDef system_by_name(const std::string& name);

// Rows are F(x_m).
Matrix vector_field(const SystemDef& system, const Matrix& x);

// Classical RK4; steps + 1 rows starting at x0, t = k dt. A non-finite state
// raises NumericError naming the step.
Trajectory integrate_rk4(const SystemDef& system, std::span<const double> x0, double dt, std::size_t steps);

// `samples` snapshots every sample_dt, integrating with sample_dt / substeps.
Trajectory sample_trajectory(const SystemDef& system, std::span<const double> x0, double sample_dt,
                             std::size_t samples, std::size_t substeps = 10);

// Latin hypercube: one point per stratum and dimension, jittered uniformly.
Matrix lhs_sample(const std::vector<std::pair<double, double>>& bounds, std::size_t n, std::uint64_t seed);

Dataset make_diff_dataset(const SystemDef& system, const Matrix& points);

struct PodBasis {
    std::vector<double> mean;
    Matrix modes;  // N_full x r, orthonormal columns
    std::vector<double> singular_values;  // all of them, descending
    double energy_ratio = 0.0;            // captured by the first r
};

struct PodProjection {
    PodBasis basis;
    Matrix coefficients;  // M x r
};

PodProjection pod_project(const Matrix& snapshots, std::size_t r);
Matrix pod_reconstruct(const PodBasis& basis, const Matrix& coefficients);

// Adds N(0, (ratio * std_j)^2) to column j, std_j the uncorrected standard
// deviation of the clean column.
Matrix add_noise(const Matrix& series, double ratio, std::uint64_t seed);

struct FixedPointReference {
    double mu = 0.0;
    double lambda = 0.0;
    ComplexSpectrum eigenvalues;  // {lambda, mu}
    double phi_a(double x1, double x2) const;  // x1, eigenvalue mu
    double phi_b(double x1, double x2) const;  // x2 - lambda x1^2 / (lambda - 2 mu), eigenvalue lambda
};

// Throws DomainError at the resonance lambda = 2 mu.
FixedPointReference analytic_reference_fixed_point(double mu = -0.05, double lambda = -1.0);

// High-dimensional stand-in for a vortex-shedding flow: a Stuart-Landau
// trajectory from near its unstable equilibrium, lifted by monomials of
// degree 1..degree and a fixed random linear map to full_dim outputs.
struct SurrogateOptions {
    std::size_t full_dim = 50;
    std::size_t degree = 5;
    double growth = 0.2;
    double frequency = 0.5;
    double initial_radius = 0.02;
    double dt = 0.1;
    std::size_t snapshots = 1245;
    std::uint64_t seed = 7;
};

std::size_t surrogate_feature_count(std::size_t degree);
Matrix surrogate_features(const Matrix& xy, std::size_t degree);  // M x features
Matrix surrogate_lift(const SurrogateOptions& options);           // features x full_dim
Trajectory surrogate_latent_trajectory(const SurrogateOptions& options);
Trajectory generate_surrogate(const SurrogateOptions& options);

}  // namespace koopman
