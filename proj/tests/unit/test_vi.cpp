#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fd.hpp"
#include "generators.hpp"
#include "koopman/dynamics.hpp"
#include "koopman/errors.hpp"
#include "koopman/optim.hpp"
#include "koopman/train.hpp"
#include "koopman/vi.hpp"

using namespace koopman;

namespace {

constexpr double kPi = std::numbers::pi;

// Trapezoid rule on [a, b].
template <typename F>
double integrate(F f, double a, double b, std::size_t n = 200000) {
    const double h = (b - a) / n;
    double s = 0.5 * (f(a) + f(b));
    for (std::size_t i = 1; i < n; ++i) s += f(a + i * h);
    return s * h;
}

VariationalBlock scalar_block(BlockKind kind, double mean, double log_std) {
    return {"theta", kind, testgen::from_values(1, 1, {mean}), testgen::from_values(1, 1, {log_std})};
}

// log N(theta; m, s^2) summed over the entries of the first block.
LogJoint gaussian_target(double m, double s) {
    return [m, s](Tape&, const std::vector<BlockDraw>& d) {
        const Var r = add_scalar(d[0].value, -m);
        return add_scalar(scale(sum_sq(r), -0.5 / (s * s)),
                          -0.5 * static_cast<double>(r.value().size()) * std::log(2.0 * kPi * s * s));
    };
}

TrainConfig tiny_vi_config() {
    TrainConfig c;
    c.layers = parse_widths("2-4-2-4-2");
    c.mode = Mode::vi;
    c.epochs = 4;
    c.batch_size = 16;
    c.seed = 3;
    return c;
}

}  // namespace

TEST(Densities, HalfCauchyNormalizationAndOrigin) {
    EXPECT_NEAR(half_cauchy_log_density(0.0, 1.0), std::log(2.0 / kPi), 1e-15);
    EXPECT_NEAR(half_cauchy_log_density(0.0, 2.5), std::log(2.0 / (kPi * 2.5)), 1e-15);
    // Mass on [0, 1e4] is 1 - (2/pi) atan(1e-4)^-1 tail ~ 1 - 6.4e-5.
    const double mass = integrate([](double x) { return std::exp(half_cauchy_log_density(x, 1.0)); }, 0.0, 1e4, 2000000);
    EXPECT_NEAR(mass, 2.0 / kPi * std::atan(1e4), 1e-6);
    EXPECT_THROW(half_cauchy_log_density(-1.0, 1.0), DomainError);
    Tape tape;
    const Var x = tape.constant(testgen::from_values(1, 2, {0.0, 3.0}));
    EXPECT_NEAR(half_cauchy_log_density(x, 2.0).value()(0, 0),
                half_cauchy_log_density(0.0, 2.0) + half_cauchy_log_density(3.0, 2.0), 1e-14);
}

TEST(Densities, GammaMatchesClosedFormMoments) {
    const double k = 2.5, rate = 0.5;
    auto pdf = [&](double x) { return x > 0.0 ? std::exp(gamma_log_density(x, k, rate)) : 0.0; };
    EXPECT_NEAR(integrate(pdf, 0.0, 100.0), 1.0, 1e-7);
    EXPECT_NEAR(integrate([&](double x) { return x * pdf(x); }, 0.0, 100.0), k / rate, 1e-6);
    EXPECT_NEAR(gamma_log_density(1.0, 1.0, 0.5), std::log(0.5) - 0.5, 1e-15);
    EXPECT_THROW(gamma_log_density(0.0, 1.0, 1.0), DomainError);
}

TEST(Densities, GaussianLikelihoodNormalization) {
    const double var = 0.3;
    auto pdf = [&](double r) { return std::exp(gaussian_log_likelihood(testgen::from_values(1, 1, {r}), {var})); };
    EXPECT_NEAR(integrate(pdf, -10.0, 10.0), 1.0, 1e-9);
    Rng rng(2);
    const Matrix res = testgen::random_matrix(rng, 4, 3);
    const std::vector<double> v{0.5, 2.0, 0.1};
    Tape tape;
    const Var lv = tape.constant(testgen::from_values(1, 3, {std::log(0.5), std::log(2.0), std::log(0.1)}));
    EXPECT_NEAR(gaussian_log_likelihood(tape.constant(res), lv).value()(0, 0), gaussian_log_likelihood(res, v), 1e-12);
    EXPECT_THROW(gaussian_log_likelihood(res, {1.0}), DimensionError);
}

TEST(Elbo, EntropyClosedForm) {
    std::vector<VariationalBlock> blocks{scalar_block(BlockKind::gaussian, 3.0, std::log(0.2)),
                                         scalar_block(BlockKind::positive, 0.7, std::log(0.4))};
    const double g = 0.5 * std::log(2.0 * kPi * std::exp(1.0) * 0.04);
    const double p = 0.5 * std::log(2.0 * kPi * std::exp(1.0) * 0.16) + 0.7;  // log-normal adds its log mean
    EXPECT_NEAR(entropy(blocks), g + p, 1e-14);
}

TEST(Elbo, EqualsNegativeKlForNormalizedTarget) {
    // With log p(theta) a normalized Gaussian, ELBO = -KL(q || p).
    const double m = 0.5, s = 1.5, mu = -0.3, sd = 0.4;
    std::vector<VariationalBlock> blocks{scalar_block(BlockKind::gaussian, mu, std::log(sd))};
    const double kl = std::log(s / sd) + (sd * sd + (mu - m) * (mu - m)) / (2.0 * s * s) - 0.5;
    const ElboValue e = elbo_estimate(blocks, gaussian_target(m, s), 20000, 7);
    // MC error of the log-joint term: stddev of the quadratic / sqrt(n).
    EXPECT_NEAR(e.value, -kl, 5e-3);
    // Exact gradients: dKL/dmu = (mu - m)/s^2, dKL/dlog sd = -1 + sd^2/s^2.
    EXPECT_NEAR(e.grad_mean[0], -(mu - m) / (s * s), 5e-3);
    EXPECT_NEAR(e.grad_log_std[0], 1.0 - sd * sd / (s * s), 5e-3);
}

TEST(Elbo, ConjugateGaussianPosteriorIsRecovered) {
    // theta ~ N(0, 1), y_i ~ N(theta, 1): posterior N(sum y / (n + 1), 1 / (n + 1)).
    const std::vector<double> y{0.8, 1.4, 0.3, 1.1, 0.9, 1.7, 0.6, 1.2};
    const double n = static_cast<double>(y.size());
    double sy = 0.0;
    for (double v : y) sy += v;
    LogJoint lj = [&](Tape& t, const std::vector<BlockDraw>& d) {
        Var acc = scale(sum_sq(d[0].value), -0.5);
        for (double v : y) acc = add(acc, scale(sum_sq(add_scalar(d[0].value, -v)), -0.5));
        (void)t;
        return acc;
    };
    std::vector<VariationalBlock> blocks{scalar_block(BlockKind::gaussian, 0.0, 0.0)};
    AdamState st(2, {0.02});
    for (int it = 0; it < 4000; ++it) {
        const ElboValue e = elbo_estimate(blocks, lj, 8, 100 + it);
        std::vector<double> p{blocks[0].mean[0], blocks[0].log_std[0]};
        std::vector<double> g{-e.grad_mean[0], -e.grad_log_std[0]};
        adam_step(st, p, g);
        blocks[0].mean[0] = p[0];
        blocks[0].log_std[0] = p[1];
    }
    EXPECT_NEAR(blocks[0].mean[0], sy / (n + 1.0), 0.03);
    EXPECT_NEAR(std::exp(blocks[0].log_std[0]), std::sqrt(1.0 / (n + 1.0)), 0.03);
}

TEST(Elbo, LogNormalBlockDrawsArePositive) {
    std::vector<VariationalBlock> blocks{scalar_block(BlockKind::positive, std::log(2.0), std::log(0.3))};
    double seen_min = 1e9;
    LogJoint lj = [&](Tape&, const std::vector<BlockDraw>& d) {
        seen_min = std::min(seen_min, d[0].value.value()(0, 0));
        EXPECT_NEAR(std::exp(d[0].log_value.value()(0, 0)), d[0].value.value()(0, 0), 1e-12);
        return sum(d[0].log_value);
    };
    elbo_estimate(blocks, lj, 200, 1);
    EXPECT_GT(seen_min, 0.0);
}

TEST(Elbo, KoopmanGradientMatchesFiniteDifferences) {
    TrainConfig c = tiny_vi_config();
    const Dataset d = make_diff_dataset(fixed_point_system(), lhs_sample({{-0.5, 0.5}, {-0.5, 0.5}}, 12, 5));
    const KoopmanModel m = initialize_model(c, d);
    const TrainingSet set = prepare_training_set(c, d, m.normalizer);
    VariationalPosterior q = init_posterior(m, set, -2.0);
    const PriorSpec prior;
    const LogJoint lj = koopman_log_joint(q, set, prior, 1.0);
    const ElboValue e = elbo_estimate(q.blocks, lj, 2, 9);

    std::vector<double> flat;
    for (const auto& b : q.blocks) flat.insert(flat.end(), b.mean.values().begin(), b.mean.values().end());
    for (const auto& b : q.blocks) flat.insert(flat.end(), b.log_std.values().begin(), b.log_std.values().end());
    const std::size_t half = flat.size() / 2;
    auto f = [&](std::span<const double> p) {
        auto blocks = q.blocks;
        std::size_t k = 0;
        for (auto& b : blocks)
            for (double& v : b.mean.values()) v = p[k++];
        for (auto& b : blocks)
            for (double& v : b.log_std.values()) v = p[k++];
        return elbo_estimate(blocks, lj, 2, 9).value;
    };
    const auto fd = testgen::central_difference(f, flat, 1e-5);
    std::vector<double> grad = e.grad_mean;
    grad.insert(grad.end(), e.grad_log_std.begin(), e.grad_log_std.end());
    ASSERT_EQ(grad.size(), 2 * half);
    EXPECT_LT(testgen::relative_error(grad, fd), 1e-5);
}

TEST(Posterior, InitializationLayout) {
    TrainConfig c = tiny_vi_config();
    const Dataset d = make_diff_dataset(fixed_point_system(), lhs_sample({{-0.5, 0.5}, {-0.5, 0.5}}, 40, 5));
    const KoopmanModel m = initialize_model(c, d);
    const TrainingSet set = prepare_training_set(c, d, m.normalizer);
    const VariationalPosterior q = init_posterior(m, set, -5.0);
    EXPECT_NO_THROW(q.validate());
    EXPECT_EQ(q.group_count(), 4u + 4u + 3u);
    EXPECT_EQ(q.block("sigma2").kind, BlockKind::positive);
    EXPECT_EQ(q.block("zeta").kind, BlockKind::gaussian);
    EXPECT_EQ(q.block("lambda_rec").mean.cols(), 2u);
    EXPECT_EQ(q.block("lambda_lin").mean.cols(), 2u);
    for (const auto& b : q.blocks)
        for (double v : b.log_std.values()) EXPECT_EQ(v, -5.0);
    // The location model reproduces the MAP model.
    const KoopmanModel loc = location_model(q);
    const auto a = flatten(loc), b = flatten(m);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(std::abs(a[i]), std::abs(b[i]), 1e-12 * (1.0 + std::abs(b[i])));
    EXPECT_THROW(q.block("missing"), FormatError);
}

TEST(Posterior, SampleStatistics) {
    TrainConfig c = tiny_vi_config();
    const Dataset d = make_diff_dataset(fixed_point_system(), lhs_sample({{-0.5, 0.5}, {-0.5, 0.5}}, 40, 5));
    const KoopmanModel m = initialize_model(c, d);
    VariationalPosterior q = init_posterior(m, prepare_training_set(c, d, m.normalizer), -1.0);
    const std::size_t n = 4000;
    const auto draws = sample_posterior(q, n, 11);
    ASSERT_EQ(draws.size(), n);
    const double mu = q.block("zeta").mean[0];
    double s = 0.0, s2 = 0.0;
    for (const auto& dr : draws) {
        const double z = dr.model.koopman.zeta[0];
        s += z;
        s2 += z * z;
        EXPECT_LE(spectral_abscissa(dr.model), 1e-9);
        for (double v : dr.lambda_rec) EXPECT_GT(v, 0.0);
    }
    const double mean = s / n, sd = std::sqrt(s2 / n - mean * mean);
    EXPECT_NEAR(mean, mu, 4.0 * std::exp(-1.0) / std::sqrt(double(n)));
    EXPECT_NEAR(sd, std::exp(-1.0), 0.03 * std::exp(-1.0));
    const auto again = sample_posterior(q, 3, 11);
    EXPECT_EQ(flatten(again[2].model), flatten(draws[2].model));
}

TEST(Posterior, TrainingIsReproducibleAndFinite) {
    TrainConfig c = tiny_vi_config();
    c.epochs = 10;
    const Dataset d = make_diff_dataset(fixed_point_system(), lhs_sample({{-0.5, 0.5}, {-0.5, 0.5}}, 40, 5));
    const ViResult a = train_vi(c, d), b = train_vi(c, d);
    EXPECT_EQ(a.warm_start_history.size(), 1u);
    EXPECT_EQ(a.history.size(), 9u);
    EXPECT_EQ(a.history, b.history);
    for (double v : a.history) EXPECT_TRUE(std::isfinite(v));
    EXPECT_NO_THROW(a.posterior.validate());
}
