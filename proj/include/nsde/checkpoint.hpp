#pragma once

// Model checkpoints: one JSON document holding the architecture and the
// flat parameter array of each network plus the SDE hyperparameters.
// Numbers are written as shortest round-trip decimal text, so files are
// byte-order independent and reload bit-exactly.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nsde/sde.hpp"

namespace nsde {

inline constexpr int kCheckpointVersion = 1;

// Optional context stored next to the model, used as sampling defaults.
struct CheckpointInfo {
    std::optional<double> dt;
    std::optional<std::size_t> n_steps;
    std::vector<double> x0;
    std::map<std::string, std::string> provenance;
};

std::string checkpoint_to_string(const SdeModel& model, const CheckpointInfo& info = {});
SdeModel checkpoint_from_string(const std::string& text, CheckpointInfo* info = nullptr);

void save_checkpoint(const SdeModel& model, const std::filesystem::path& path, const CheckpointInfo& info = {});
SdeModel load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

}  // namespace nsde
