#pragma once

#include <filesystem>

#include <json.hpp>

#include "cmarl/trainer.hpp"

namespace cmarl {

inline constexpr const char* kCheckpointFormat = "cmarl-checkpoint";
inline constexpr int kCheckpointVersion = 1;

nlohmann::json snapshot_to_json(const TrainerSnapshot& snap);
/// Throws ConfigError naming the missing or mistyped field.
TrainerSnapshot snapshot_from_json(const nlohmann::json& doc);

void save_checkpoint(const Trainer& trainer, const std::filesystem::path& path);
void load_checkpoint(Trainer& trainer, const std::filesystem::path& path);

}  // namespace cmarl
