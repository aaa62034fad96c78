#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "koopman/matrix.hpp"
#include "koopman/model.hpp"
#include "koopman/vi.hpp"

namespace koopman {

struct PredictiveEnsemble {
    std::vector<double> times;
    std::vector<Matrix> samples;  // each T x N, denormalized
    std::size_t n_mc = 0;
    std::size_t m_mc = 1;
};

// x(t) = denormalize(decode(encode(normalize(x0)) e^{tK})).
Matrix predict_map(const KoopmanModel& model, std::span<const double> x0, const std::vector<double>& times);

// One rollout per posterior draw; with_noise adds N(0, Lambda_rec) in
// normalized coordinates before denormalizing.
PredictiveEnsemble predict_posterior_recurrent(const VariationalPosterior& q, std::span<const double> x0,
                                               const std::vector<double>& times, std::size_t n_mc,
                                               std::uint64_t seed, bool with_noise = false);

// Per posterior draw, m_mc paths of the latent Ornstein-Uhlenbeck process
// dphi = phi K dt + dW, Cov(dW) = Lambda_lin dt, started at encode(z0) and
// advanced with its exact Gaussian transitions, then decoded.
PredictiveEnsemble predict_posterior_diff(const VariationalPosterior& q, std::span<const double> x0,
                                          const std::vector<double>& times, std::size_t n_mc, std::size_t m_mc,
                                          std::uint64_t seed, bool with_noise = true);

// Latent OU paths for a fixed generator: m draws of T x D.
std::vector<Matrix> sample_ou_paths(const Matrix& k, const Matrix& lambda, std::span<const double> phi0,
                                    const std::vector<double>& times, std::size_t m, std::uint64_t seed);

// Lower Cholesky factor of a PSD matrix, adding 1e-12 I, 1e-11 I, ... up to
// 1e-6 I when needed. The zero matrix factors to zero.
Matrix psd_cholesky(const Matrix& s);

struct PredictiveSummary {
    std::vector<double> times;
    Matrix mean;    // T x N
    Matrix stddev;  // T x N, uncorrected
};

PredictiveSummary summarize(const PredictiveEnsemble& ensemble);

// time,component,mean,std (components numbered from 1).
void write_summary_csv(std::ostream& os, const PredictiveSummary& summary);
// sample_id,time,x_1..x_N
void write_samples_csv(std::ostream& os, const PredictiveEnsemble& ensemble);
// time,x_1..x_N
void write_trajectory_csv(std::ostream& os, const std::vector<double>& times, const Matrix& x);

}  // namespace koopman
