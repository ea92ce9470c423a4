#include "cmarl/checkpoint.hpp"

#include <fstream>

#include "cmarl/cmg_io.hpp"
#include "cmarl/errors.hpp"

namespace cmarl {

using nlohmann::json;

json snapshot_to_json(const TrainerSnapshot& s) {
  json doc;
  doc["format"] = kCheckpointFormat;
  doc["version"] = kCheckpointVersion;
  doc["step"] = s.step;
  doc["state"] = s.state;
  doc["actions"] = s.actions;
  doc["objective"] = s.objective;
  json agents = json::array();
  for (std::size_t n = 0; n < s.theta.size(); ++n) {
    agents.push_back({{"theta", s.theta[n]},
                      {"w", s.w[n]},
                      {"avg_cost", s.avg_cost[n]},
                      {"g_hat", s.g_hat[n]},
                      {"lambda_hat", s.lambda_hat[n]},
                      {"rng", s.agent_rng[n]}});
  }
  doc["agents"] = std::move(agents);
  doc["rng"] = {{"environment", s.env_rng}, {"mixing", s.mixing_rng}};
  doc["early_stop"] = {{"calm_iterations", s.calm_iterations},
                       {"previous_lambda_mean", s.previous_lambda_mean},
                       {"stopped", s.stopped_early}};
  return doc;
}

TrainerSnapshot snapshot_from_json(const json& doc) {
  try {
    if (doc.at("format") != kCheckpointFormat) throw ConfigError("not a checkpoint file");
    if (doc.at("version").get<int>() != kCheckpointVersion) throw ConfigError("unsupported checkpoint version");
    TrainerSnapshot s;
    s.step = doc.at("step").get<std::uint64_t>();
    s.state = doc.at("state").get<std::size_t>();
    s.actions = doc.at("actions").get<std::vector<std::size_t>>();
    s.objective = doc.at("objective").get<double>();
    for (const auto& a : doc.at("agents")) {
      s.theta.push_back(a.at("theta").get<std::vector<double>>());
      s.w.push_back(a.at("w").get<std::vector<double>>());
      s.avg_cost.push_back(a.at("avg_cost").get<double>());
      s.g_hat.push_back(a.at("g_hat").get<std::vector<double>>());
      s.lambda_hat.push_back(a.at("lambda_hat").get<std::vector<double>>());
      s.agent_rng.push_back(a.at("rng").get<std::string>());
    }
    s.env_rng = doc.at("rng").at("environment").get<std::string>();
    s.mixing_rng = doc.at("rng").at("mixing").get<std::string>();
    const auto& es = doc.at("early_stop");
    s.calm_iterations = es.at("calm_iterations").get<std::uint64_t>();
    s.previous_lambda_mean = es.at("previous_lambda_mean").get<std::vector<double>>();
    s.stopped_early = es.at("stopped").get<bool>();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Trainer& trainer, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  // Doubles are written in shortest round-trip form.
  out << snapshot_to_json(trainer.snapshot()).dump(1) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void load_checkpoint(Trainer& trainer, const std::filesystem::path& path) {
  trainer.restore(snapshot_from_json(read_json_file(path)));
}

}  // namespace cmarl
