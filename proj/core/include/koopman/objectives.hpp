#pragma once

#include <vector>

#include "koopman/autodiff.hpp"
#include "koopman/dataset.hpp"
#include "koopman/model.hpp"
#include "koopman/nn.hpp"

namespace koopman {

struct DiffBatch {
    Matrix z;     // B x N normalized states
    Matrix zdot;  // B x N normalized rates
};

struct LossWeights {
    double linear = 1.0;
    double reconstruction = 1.0;
};

// Which parameter groups receive gradients; frozen groups enter the tape as
// constants and report zero gradient.
struct Trainable {
    bool networks = true;
    bool linear_maps = true;
    bool koopman = true;
};

// How the diagonal of K is coordinatized on the tape.
enum class DecayCoordinates {
    sigma,         // diagonal = -sigma^2 (MAP)
    sigma_squared  // diagonal = -s, s > 0 supplied directly (variational draws)
};

// A KoopmanModel's parameters recorded on a tape, plus derived nodes.
struct ModelVars {
    NetVars encoder;
    NetVars decoder;
    Var encoder_linear;
    Var decoder_linear;
    Var zeta;
    Var decay;  // sigma or sigma^2, see DecayCoordinates
    Var K;
    Var encoder_skip;  // diag(scale) V_D L_enc
    Var decoder_skip;  // L_dec V_D^T diag(scale)^{-1}
};

ModelVars bind_model(Tape& tape, const KoopmanModel& model, const Trainable& trainable = {},
                     DecayCoordinates decay = DecayCoordinates::sigma);

// Derived nodes (K, skip maps) from already recorded parameter nodes.
ModelVars assemble_model_vars(Tape& tape, const KoopmanModel& model, NetVars encoder, NetVars decoder,
                              Var encoder_linear, Var decoder_linear, Var zeta, Var decay, DecayCoordinates coords);

// Gradient in the flat order of flatten(KoopmanModel). With sigma_squared
// coordinates the last D entries are d/d(sigma^2).
std::vector<double> collect_gradient(const Tape& tape, const ModelVars& vars);

Var encode(const KoopmanModel& model, const ModelVars& vars, const Var& z);
Var decode(const KoopmanModel& model, const ModelVars& vars, const Var& phi);

struct DiffResiduals {
    Var linear;          // B x D: phi K - zdot . grad phi
    Var reconstruction;  // B x N: decode(encode(z)) - z
};
DiffResiduals diff_residuals(const KoopmanModel& model, const ModelVars& vars, Tape& tape, const DiffBatch& batch);

struct RecurrentResiduals {
    Var linear;          // rows for j >= 2: phi(z_1) e^{t_j K} - phi(z_j)
    Var reconstruction;  // rows for j >= 1: decode(phi(z_1) e^{t_j K}) - z_j
    std::vector<double> linear_row_weight;          // 1 / (T_m * windows)
    std::vector<double> reconstruction_row_weight;  // 1 / (T_m * windows)
    bool has_linear = false;
};
RecurrentResiduals recurrent_residuals(const KoopmanModel& model, const ModelVars& vars, Tape& tape,
                                       const TrajBatch& batch);

// Sum of squared network weights and biases (the linear skip maps and K are
// not decayed).
Var weight_decay_term(const ModelVars& vars);

struct LossOptions {
    LossWeights weights;
    double weight_decay = 1e-6;
    Trainable trainable;
};

struct LossValue {
    double value = 0.0;
    double linear = 0.0;
    double reconstruction = 0.0;
    double regularization = 0.0;
    std::vector<double> gradient;  // aligned with flatten(model)
};

// Mean over the batch of w_lin |phi K - zdot . grad phi|^2 + w_rec |decode(phi) - z|^2,
// plus weight_decay * (sum of squared network parameters).
LossValue diff_loss(const KoopmanModel& model, const DiffBatch& batch, const LossOptions& options = {});

// Average over windows of (1/T_m) [sum_{j>=2} w_lin |linear_j|^2 + sum_{j>=1} w_rec |pred_j|^2],
// plus weight decay.
LossValue recurrent_loss(const KoopmanModel& model, const TrajBatch& batch, const LossOptions& options = {});

// Exponentials e^{t_j K} for one window time grid; uniform grids reuse powers
// of e^{dt K}.
std::vector<Var> window_propagators(const Var& k, const std::vector<double>& times);

}  // namespace koopman
