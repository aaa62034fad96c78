#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "koopman/model.hpp"
#include "koopman/objectives.hpp"

namespace koopman {

enum class Form { diff, recurrent };
enum class Mode { map, vi };

std::string to_string(Form form);
std::string to_string(Mode mode);
Form parse_form(const std::string& text);
Mode parse_mode(const std::string& text);

struct VariationalOptions {
    double warm_start_fraction = 0.1;  // share of epochs spent on the MAP warm start
    double initial_log_std = -5.0;
    std::size_t mc_samples = 1;        // reparameterized draws per step
    double half_cauchy_scale = 1.0;
    double gamma_rate = 0.5;
    double learning_rate = 0.0;        // 0: use the MAP learning rate
};

struct TrainConfig {
    Form form = Form::diff;
    Mode mode = Mode::map;
    std::vector<std::size_t> layers;
    std::size_t latent_dim = 0;  // 0: taken from the middle of `layers`
    double learning_rate = 1e-3;
    std::size_t epochs = 1000;
    std::size_t batch_size = 128;
    double weight_decay = 1e-6;
    std::size_t window_length = 0;  // recurrent form; 0: whole trajectories
    std::size_t stride = 1;
    std::uint64_t seed = 0;
    NormalizationMode normalization_mode = NormalizationMode::per_component;
    LossWeights loss_weights;
    bool svd_embedding = true;
    bool freeze_networks = false;
    double init_stddev = 0.1;
    VariationalOptions vi;

    // Throws UsageError describing the first invalid field.
    void validate() const;
};

// JSON object with the keys above (nested "loss_weights" {linear,
// reconstruction} and "vi" {...}); unknown keys are rejected.
TrainConfig parse_config(const std::string& json_text);
TrainConfig load_config(const std::string& path);

// Canonical JSON (sorted keys, shortest round-trip numbers).
std::string to_json(const TrainConfig& config);

}  // namespace koopman
