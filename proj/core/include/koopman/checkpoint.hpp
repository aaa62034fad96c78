#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>

#include "koopman/config.hpp"
#include "koopman/model.hpp"
#include "koopman/vi.hpp"

namespace koopman {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
    enum class Kind { map, posterior };

    Kind kind = Kind::map;
    Form form = Form::diff;
    KoopmanModel model;  // posterior checkpoints: the location model
    std::optional<VariationalPosterior> posterior;
};

// JSON text with sorted keys; doubles are written in shortest round-trip form
// so a save/load cycle is bit-exact.
std::string to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& text);

Checkpoint map_checkpoint(const KoopmanModel& model, Form form);
Checkpoint posterior_checkpoint(const VariationalPosterior& q, Form form);

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
// Missing file: DataError; malformed content: FormatError naming the field.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace koopman
