#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "koopman/autodiff.hpp"
#include "koopman/config.hpp"
#include "koopman/dataset.hpp"
#include "koopman/model.hpp"
#include "koopman/train.hpp"

namespace koopman {

struct PriorSpec {
    double half_cauchy_scale = 1.0;
    double gamma_rate = 0.5;
};

// Unconstrained blocks are Gaussian in their own coordinates; positive blocks
// are log-normal, i.e. Gaussian in log coordinates.
enum class BlockKind { gaussian, positive };

struct VariationalBlock {
    std::string name;
    BlockKind kind = BlockKind::gaussian;
    Matrix mean;     // location (log coordinate for positive blocks)
    Matrix log_std;  // same shape as mean
};

// One reparameterized draw on a tape: `value` holds the parameter (exp of the
// log coordinate for positive blocks), `log_value` the log coordinate.
struct BlockDraw {
    Var value;
    Var log_value;  // positive blocks only
};

using LogJoint = std::function<Var(Tape&, const std::vector<BlockDraw>&)>;

struct ElboValue {
    double value = 0.0;
    double log_joint = 0.0;  // sample average
    double entropy = 0.0;
    std::vector<double> grad_mean;     // blocks concatenated, row-major
    std::vector<double> grad_log_std;  // same layout
};

// Closed-form entropy of the factorized q in parameter coordinates: Gaussian
// factors 0.5 log(2 pi e s^2), log-normal factors add their log-coordinate mean.
double entropy(const std::vector<VariationalBlock>& blocks);

// Monte Carlo ELBO: average of log_joint over n_samples reparameterized draws
// plus the closed-form entropy, with gradients w.r.t. means and log-stddevs.
// Draw s uses the stream Rng::split(seed, s).
ElboValue elbo_estimate(const std::vector<VariationalBlock>& blocks, const LogJoint& log_joint, std::size_t n_samples,
                        std::uint64_t seed);

double half_cauchy_log_density(double x, double scale);
double gamma_log_density(double x, double shape, double rate);
double gaussian_log_likelihood(const Matrix& residuals, const std::vector<double>& variances);

// Differentiable pieces of the hierarchical prior.
Var half_cauchy_log_density(const Var& x, double scale);          // summed over entries
Var gaussian_log_likelihood(const Var& residuals, const Var& log_variance);  // log_variance 1 x cols, summed

// Posterior over a KoopmanModel: network layers, L_enc, L_dec, zeta, sigma^2,
// one half-Cauchy scale per parameter group, one Gamma shape per sigma^2 and
// the diagonal noise variances Lambda_rec (N) and Lambda_lin (D).
struct VariationalPosterior {
    KoopmanModel base;  // architecture, normalizer, SVD basis; parameters = location values
    std::vector<VariationalBlock> blocks;

    std::size_t encoder_blocks() const { return 2 * base.encoder.layers(); }
    std::size_t decoder_blocks() const { return 2 * base.decoder.layers(); }
    std::size_t index(const std::string& name) const;
    const VariationalBlock& block(const std::string& name) const { return blocks[index(name)]; }
    std::size_t group_count() const;
    std::size_t parameter_count() const;  // entries across all blocks
    void validate() const;
};

// q centred on `model` with every log-stddev at `log_std`. Hyperparameter
// locations start at data-informed values: each group scale at the RMS of its
// parameters, Gamma shapes at 1, noise variances at the mean squared residuals
// of `model` on `data`.
VariationalPosterior init_posterior(const KoopmanModel& model, const TrainingSet& data, double log_std);

// KoopmanModel at the location parameters (sigma = sqrt(exp(mean log sigma^2))).
KoopmanModel location_model(const VariationalPosterior& q);

struct PosteriorDraw {
    KoopmanModel model;
    std::vector<double> lambda_rec;
    std::vector<double> lambda_lin;
};

// i.i.d. draws; draw i uses Rng::split(seed, i).
std::vector<PosteriorDraw> sample_posterior(const VariationalPosterior& q, std::size_t n, std::uint64_t seed);

// log p(D_batch, theta) with the batch likelihood multiplied by
// likelihood_scale (total / batch for unbiased minibatch estimates).
LogJoint koopman_log_joint(const VariationalPosterior& q, const TrainingSet& batch, const PriorSpec& prior,
                           double likelihood_scale);

struct ViResult {
    VariationalPosterior posterior;
    std::vector<double> warm_start_history;  // MAP losses
    std::vector<double> history;             // mean ELBO estimate per epoch
};

using ViEpochCallback = std::function<void(std::size_t, double, const VariationalPosterior&)>;

// MAP warm start for round(warm_start_fraction * epochs) epochs, then Adam
// ascent on the ELBO for the remaining epochs.
ViResult train_vi(const TrainConfig& config, const Dataset& data, const ViEpochCallback& on_epoch = {});

// ELBO optimization from a given posterior.
std::vector<double> fit_vi(const TrainConfig& config, VariationalPosterior& q, const TrainingSet& data,
                           std::size_t epochs, const ViEpochCallback& on_epoch = {});

}  // namespace koopman
