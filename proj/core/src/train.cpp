#include "koopman/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "koopman/errors.hpp"
#include "koopman/optim.hpp"

namespace koopman {

std::size_t TrainingSet::size() const { return form == Form::diff ? diff.z.rows() : traj.windows.size(); }

TrainingSet prepare_training_set(const TrainConfig& config, const Dataset& data, const Normalizer& normalizer) {
    data.validate();
    TrainingSet set;
    set.form = config.form;
    if (config.form == Form::diff) {
        if (data.kind != Dataset::Kind::derivative)
            throw UsageError("the diff form needs a derivative dataset (x, xdot); got trajectories");
        set.diff.z = normalizer.normalize(data.x);
        set.diff.zdot = normalizer.normalize_rate(data.xdot);
        return set;
    }
    if (data.kind != Dataset::Kind::trajectory)
        throw UsageError("the recurrent form needs a trajectory dataset; got derivative pairs");
    for (const Trajectory& tr : data.trajectories) {
        Trajectory z{tr.t, normalizer.normalize(tr.x)};
        const std::size_t len = config.window_length == 0 ? z.t.size() : config.window_length;
        if (len < 2) throw DataError("trajectory with fewer than 2 snapshots cannot form a window");
        auto windows = hankelize(z, len, config.window_length == 0 ? 1 : config.stride);
        for (auto& w : windows) set.traj.windows.push_back(std::move(w));
    }
    return set;
}

DiffBatch select(const DiffBatch& batch, const std::vector<std::size_t>& rows) {
    DiffBatch out{Matrix(rows.size(), batch.z.cols()), Matrix(rows.size(), batch.zdot.cols())};
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t c = 0; c < batch.z.cols(); ++c) {
            out.z(i, c) = batch.z(rows[i], c);
            out.zdot(i, c) = batch.zdot(rows[i], c);
        }
    return out;
}

TrajBatch select(const TrajBatch& batch, const std::vector<std::size_t>& windows) {
    TrajBatch out;
    out.windows.reserve(windows.size());
    for (std::size_t w : windows) out.windows.push_back(batch.windows[w]);
    return out;
}

TrainingSet select(const TrainingSet& set, const std::vector<std::size_t>& items) {
    TrainingSet out;
    out.form = set.form;
    if (set.form == Form::diff)
        out.diff = select(set.diff, items);
    else
        out.traj = select(set.traj, items);
    return out;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size, Rng& rng) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < count; start += batch_size)
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(count, start + batch_size)));
    return out;
}

KoopmanModel initialize_model(const TrainConfig& config, const Dataset& data) {
    config.validate();
    data.validate();
    const Normalizer normalizer = fit_normalizer(data.snapshots(), config.normalization_mode);
    ModelOptions options;
    options.layers = config.layers;
    options.svd_embedding = config.svd_embedding;
    options.init_stddev = config.init_stddev;
    options.seed = config.seed;
    return init_from_dmd(data, normalizer, options);
}

LossOptions loss_options(const TrainConfig& config) {
    LossOptions o;
    o.weights = config.loss_weights;
    o.weight_decay = config.weight_decay;
    o.trainable.networks = !config.freeze_networks;
    return o;
}

LossValue evaluate_loss(const KoopmanModel& model, const TrainingSet& batch, const LossOptions& options) {
    return batch.form == Form::diff ? diff_loss(model, batch.diff, options) : recurrent_loss(model, batch.traj, options);
}

double spectral_abscissa(const KoopmanModel& model) {
    double m = -std::numeric_limits<double>::infinity();
    for (const Complex& l : eigenvalues(model.K())) m = std::max(m, l.real());
    return m;
}

TrainResult fit_map(const TrainConfig& config, KoopmanModel model, const TrainingSet& data, std::size_t epochs,
                    const EpochCallback& on_epoch) {
    if (data.size() == 0) throw DataError("training set is empty");
    const LossOptions options = loss_options(config);
    std::vector<double> params = flatten(model);
    AdamState adam(params.size(), AdamOptions{config.learning_rate});
    Rng order_rng = Rng::split(config.seed, 3);

    TrainResult result;
    result.history.reserve(epochs);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        const auto batches = epoch_batches(data.size(), config.batch_size, order_rng);
        double total = 0.0;
        for (const auto& items : batches) {
            LossValue loss;
            try {
                loss = evaluate_loss(model, select(data, items), options);
            } catch (const NumericError& e) {
                throw TrainingError(std::string("training diverged: ") + e.what(), static_cast<long>(epoch) - 1);
            }
            total += loss.value;
            adam_step(adam, params, loss.gradient);
            for (double p : params)
                if (!std::isfinite(p))
                    throw TrainingError("training diverged: non-finite parameter", static_cast<long>(epoch) - 1);
            unflatten(model, params);
        }
        const double mean = total / static_cast<double>(batches.size());
        if (spectral_abscissa(model) > 1e-9)
            throw TrainingError("stability check failed: K has an eigenvalue with positive real part",
                                static_cast<long>(epoch) - 1);
        result.history.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean, model);
    }
    result.model = std::move(model);
    return result;
}

TrainResult train_map(const TrainConfig& config, const Dataset& data, const EpochCallback& on_epoch) {
    KoopmanModel model = initialize_model(config, data);
    const TrainingSet set = prepare_training_set(config, data, model.normalizer);
    return fit_map(config, std::move(model), set, config.epochs, on_epoch);
}

}  // namespace koopman
