#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "cmarl/cmg.hpp"

namespace cmarl {

/// Format tag written into every serialized game.
inline constexpr const char* kCmgFormat = "cmarl-tabular-cmg";
inline constexpr int kCmgFormatVersion = 1;

/// Nested-array JSON form with explicit shape metadata:
///   transition[s][a][s'], cost[n][s][a], constraint_cost[n][k][s][a], bounds[k].
/// Joint actions `a` use the mixed-radix order of JointActionCodec (agent 0 most significant).
nlohmann::json cmg_to_json(const TabularCMG& cmg);

/// Throws ConfigError naming the first shape problem (with its JSON path).
TabularCMG cmg_from_json(const nlohmann::json& doc);

/// Shape problems become fatal kShape issues; with consistent shapes the game is built and
/// the full `validate` report is appended.
ValidationReport validate_cmg_json(const nlohmann::json& doc);

void save_cmg(const TabularCMG& cmg, const std::filesystem::path& path);
TabularCMG load_cmg(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace cmarl
