#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "koopman/config.hpp"
#include "koopman/dataset.hpp"
#include "koopman/model.hpp"
#include "koopman/objectives.hpp"
#include "koopman/rng.hpp"

namespace koopman {

// Normalized training data in the shape the configured form consumes.
struct TrainingSet {
    Form form = Form::diff;
    DiffBatch diff;   // diff form: every sample
    TrajBatch traj;   // recurrent form: every window

    std::size_t size() const;  // samples or windows
};

TrainingSet prepare_training_set(const TrainConfig& config, const Dataset& data, const Normalizer& normalizer);

// Row / window subsets.
DiffBatch select(const DiffBatch& batch, const std::vector<std::size_t>& rows);
TrajBatch select(const TrajBatch& batch, const std::vector<std::size_t>& windows);
TrainingSet select(const TrainingSet& set, const std::vector<std::size_t>& items);

// A fresh random partition of [0, count) into batches of at most batch_size.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size, Rng& rng);

// Fitted normalizer plus SVD-DMD initialization per the config.
KoopmanModel initialize_model(const TrainConfig& config, const Dataset& data);

LossOptions loss_options(const TrainConfig& config);
LossValue evaluate_loss(const KoopmanModel& model, const TrainingSet& batch, const LossOptions& options);

struct TrainResult {
    KoopmanModel model;
    std::vector<double> history;  // mean minibatch loss per epoch
};

// Called after each epoch with (epoch index from 0, mean loss, model).
using EpochCallback = std::function<void(std::size_t, double, const KoopmanModel&)>;

// Adam on the configured loss for `epochs` epochs starting from `model`.
// Divergence raises TrainingError naming the last finished epoch.
TrainResult fit_map(const TrainConfig& config, KoopmanModel model, const TrainingSet& data, std::size_t epochs,
                    const EpochCallback& on_epoch = {});

// initialize_model followed by fit_map for config.epochs.
TrainResult train_map(const TrainConfig& config, const Dataset& data, const EpochCallback& on_epoch = {});

// Largest real part of the eigenvalues of K.
double spectral_abscissa(const KoopmanModel& model);

}  // namespace koopman
