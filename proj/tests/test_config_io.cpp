#include <doctest.h>

#include <fstream>

#include "cmarl/config.hpp"
#include "cmarl/errors.hpp"
#include "cmarl/experiment.hpp"
#include "cmarl/metrics_io.hpp"
#include "cmarl/report.hpp"
#include "support.hpp"

using namespace cmarl;
using nlohmann::json;

namespace {

std::string error_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

// A two-agent Cournot game small enough for quick end-to-end runs.
json small_run(const std::filesystem::path& out, std::uint64_t horizon = 300) {
  return json{{"environment",
               {{"kind", "cournot"},
                {"cournot",
                 {{"num_agents", 2}, {"constraint_weights", {0.2, 0.4}}, {"num_states", 3}, {"num_actions", 2}}}}},
              {"seed", 3},
              {"features", {{"critic_dim", 4}, {"policy_dim", 3}}},
              {"trainer", {{"horizon", horizon}, {"metrics_every", 50}}},
              {"output_dir", out.string()}};
}

MetricsRecord record(std::uint64_t step, double lambda) {
  MetricsRecord r;
  r.step = step;
  r.objective = -1.0;
  r.g_gap = {0.1};
  r.lambda_mean = {lambda};
  r.lambdas = {lambda, lambda};
  r.step_sizes = {0.1, 0.01, 0.001};
  return r;
}

}  // namespace

TEST_CASE("minimal config resolves the experiment defaults") {
  const auto c = parse_config(json{{"environment", "cournot-defaults"}, {"seed", 7}});
  CHECK(c.environment.kind == EnvironmentSpec::Kind::kCournot);
  CHECK(c.environment.cournot.num_agents == 5);
  CHECK(c.environment.cournot.bound == 0.75);
  CHECK(c.environment.cournot.num_states == 10);
  CHECK(c.environment.cournot.num_actions == 10);
  CHECK(c.environment.cournot.constraint_weights == std::vector<double>{0.1, 0.3, 0.5, 0.1, 0.0});
  CHECK(c.seed == 7);
  CHECK(c.features.seed == 7);
  CHECK(c.features.critic_dim == 20);
  CHECK(c.features.policy_dim == 10);
  CHECK(c.topology.kind == TopologyKind::kComplete);
  CHECK(c.schedule.p_alpha == 0.6);
  CHECK(c.schedule.p_beta == 0.75);
  CHECK(c.schedule.p_gamma == 0.9);
  CHECK(c.trainer.horizon == 200'000);
  CHECK(c.trainer.lambda_max == std::vector<double>{10.0});
  CHECK(c.trainer.metrics_every == 100);
  CHECK(c.num_agents() == 5);
  CHECK(c.num_constraints() == 1);
}

TEST_CASE("unknown and mistyped keys are rejected with their location") {
  const auto top = error_of(json{{"environment", "cournot-defaults"}, {"seed", 1}, {"leraning_rate", 0.1}});
  CHECK(top.find("leraning_rate") != std::string::npos);
  const auto nested = error_of(json{{"environment", "cournot-defaults"}, {"seed", 1}, {"trainer", {{"horizn", 5}}}});
  CHECK(nested.find("horizn") != std::string::npos);
  CHECK(nested.find("trainer") != std::string::npos);
  const auto typed = error_of(json{{"environment", "cournot-defaults"}, {"seed", "seven"}});
  CHECK(typed.find("seed") != std::string::npos);
  CHECK_FALSE(error_of(json{{"environment", "nope"}, {"seed", 1}}).empty());
  CHECK(error_of(json{{"environment", "cournot-defaults"}}).find("seed") != std::string::npos);
}

TEST_CASE("config round trip: parse, serialize, parse gives the same config") {
  const json doc{{"environment", {{"kind", "cournot"}, {"cournot", {{"num_agents", 3}, {"constraint_weights", {0.1, 0.2, 0.3}}}}}},
                 {"seed", 11},
                 {"topology", {{"kind", "random-geometric"}, {"radius", 0.8}}},
                 {"trainer", {{"lambda_max", 4.0}, {"early_stop", {{"disagreement", 1e-3}, {"drift", 1e-4}, {"window", 10}}}}}};
  const auto a = parse_config(doc);
  const auto b = parse_config(config_to_json(a));
  CHECK(a == b);
  CHECK(config_to_json(a).dump() == config_to_json(b).dump());
  CHECK(b.trainer.early_stop.has_value());
  CHECK(b.trainer.lambda_max == std::vector<double>{4.0});
}

TEST_CASE("config files: missing file, malformed JSON, missing game file") {
  const auto dir = testing::temp_dir("cfgfile");
  CHECK_THROWS_AS(parse_config_file(dir / "absent.json"), IoError);
  testing::write_file(dir / "bad.json", "{\"seed\": ");
  CHECK_THROWS_AS(parse_config_file(dir / "bad.json"), ConfigError);
  testing::write_file(dir / "tab.json", R"({"environment": {"kind": "tabular", "path": "missing.json"}})");
  CHECK_THROWS(parse_config_file(dir / "tab.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("golden metrics header") {
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
    return s;
  };
  CHECK(join(metrics_columns(1)) ==
        "step,J,G_gap_1,lambda_mean_1,lambda_disagreement,critic_disagreement,alpha,beta,gamma");
  CHECK(join(metrics_columns(2)) ==
        "step,J,G_gap_1,G_gap_2,lambda_mean_1,lambda_mean_2,lambda_disagreement,critic_disagreement,alpha,beta,gamma");
  CHECK(join(lambda_columns(2, 2)) == "step,lambda_1_1,lambda_1_2,lambda_2_1,lambda_2_2");
}

TEST_CASE("format_double reads back exactly") {
  for (double x : {0.1, 1.0 / 3, -2.5e-300, 123456789.123456789, 0.0}) {
    CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  }
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("metrics writer: rows read back, resume keeps the prefix") {
  const auto dir = testing::temp_dir("writer");
  {
    MetricsWriter w(dir, 2, 1);
    for (std::uint64_t s = 0; s <= 300; s += 100) w.write(record(s, 0.1 * static_cast<double>(s)));
  }
  auto t = read_csv(dir / kMetricsFile);
  CHECK(t.columns == metrics_columns(1));
  CHECK(t.column("step") == std::vector<double>{0, 100, 200, 300});
  CHECK(t.column("lambda_mean_1")[3] == 30.0);
  {
    MetricsWriter w(dir, 2, 1, 100);
    w.write(record(150, 7.0));
  }
  t = read_csv(dir / kMetricsFile);
  CHECK(t.column("step") == std::vector<double>{0, 100, 150});
  CHECK(read_csv(dir / kLambdasFile).column("lambda_2_1") == std::vector<double>{0.0, 10.0, 7.0});
  CHECK_THROWS_AS(MetricsWriter(dir, 3, 1, 100), ConfigError);
  testing::write_file(dir / "ragged.csv", "a,b\n1,2\n3\n");
  CHECK_THROWS_AS(read_csv(dir / "ragged.csv"), ConfigError);
  CHECK_THROWS_AS(read_csv(dir / "none.csv"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("charts: empty metrics still get axes") {
  const auto dir = testing::temp_dir("charts_empty");
  { MetricsWriter w(dir, 2, 1); }
  const auto files = emit_report(dir);
  const auto svg = testing::slurp(files.lambda);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("<line") != std::string::npos);
  CHECK(svg.find("<polyline") == std::string::npos);
  CHECK(testing::slurp(files.costs).find("<svg") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("charts: constant multipliers give flat lines and a zero disagreement series") {
  const auto dir = testing::temp_dir("charts_flat");
  {
    MetricsWriter w(dir, 2, 1);
    for (std::uint64_t s = 0; s <= 500; s += 100) w.write(record(s, 0.4));
  }
  const auto files = emit_report(dir);
  const auto svg = testing::slurp(files.lambda);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("lambda_1_1") != std::string::npos);
  CHECK(read_csv(dir / kMetricsFile).column("lambda_disagreement") == std::vector<double>(6, 0.0));
  const auto costs = testing::slurp(files.costs);
  CHECK(costs.find("stroke-dasharray") != std::string::npos);  // zero reference line
  std::filesystem::remove_all(dir);
}

TEST_CASE("charts: missing columns are named") {
  const auto dir = testing::temp_dir("charts_missing");
  testing::write_file(dir / kMetricsFile, "step,J\n0,1\n");
  try {
    emit_report(dir);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("lambda_disagreement") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("sha256 test vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("runs: manifest hash tracks the config bytes; metrics are reproducible") {
  const auto dir = testing::temp_dir("runs");
  const json doc = small_run(dir / "a");
  testing::write_file(dir / "a.json", doc.dump());
  testing::write_file(dir / "b.json", doc.dump(2));  // same config, different bytes
  const auto ra = run_experiment(dir / "a.json");
  const auto rb = run_experiment(dir / "b.json", RunOptions{dir / "b", {}, true, {}});
  const auto ra2 = run_experiment(dir / "a.json", RunOptions{dir / "a2", {}, false, {}});
  CHECK(ra.config_sha256 == sha256_hex(doc.dump()));
  CHECK(ra.config_sha256 == ra2.config_sha256);
  CHECK(ra.config_sha256 != rb.config_sha256);
  CHECK(testing::slurp(dir / "a" / kMetricsFile) == testing::slurp(dir / "b" / kMetricsFile));
  CHECK(testing::slurp(dir / "a" / kMetricsFile) == testing::slurp(dir / "a2" / kMetricsFile));

  const auto manifest = json::parse(testing::slurp(dir / "a" / kManifestFile));
  CHECK(manifest["config_sha256"] == ra.config_sha256);
  CHECK(manifest["status"] == "completed");
  CHECK(manifest["steps"] == 300);
  CHECK(manifest["seed"] == 3);
  CHECK(manifest.contains("started"));
  CHECK(manifest.contains("finished"));
  CHECK(std::filesystem::exists(dir / "a" / kLambdaChart));
  CHECK_FALSE(std::filesystem::exists(dir / "a2" / kLambdaChart));
  CHECK_FALSE(std::filesystem::exists(dir / "a" / kLockFile));
  CHECK(read_csv(dir / "a" / kMetricsFile).column("step") == std::vector<double>{0, 50, 100, 150, 200, 250, 300});
  std::filesystem::remove_all(dir);
}

TEST_CASE("runs: a held lock file blocks a second writer") {
  const auto dir = testing::temp_dir("lock");
  testing::write_file(dir / "c.json", small_run(dir / "out").dump());
  std::filesystem::create_directories(dir / "out");
  testing::write_file(dir / "out" / kLockFile, "1\n");
  CHECK_THROWS_AS(run_experiment(dir / "c.json"), IoError);
  CHECK(std::filesystem::exists(dir / "out" / kLockFile));
  std::filesystem::remove_all(dir);
}

TEST_CASE("runs: resuming from a checkpoint reproduces the uninterrupted metrics") {
  const auto dir = testing::temp_dir("resume");
  auto doc = small_run(dir / "full", 400);
  testing::write_file(dir / "full.json", doc.dump());
  run_experiment(dir / "full.json");

  doc["trainer"]["horizon"] = 200;
  doc["trainer"]["checkpoint_every"] = 100;
  doc["output_dir"] = (dir / "part").string();
  testing::write_file(dir / "part.json", doc.dump());
  run_experiment(dir / "part.json");
  CHECK(std::filesystem::exists(dir / "part" / kCheckpointFile));

  doc["trainer"]["horizon"] = 400;
  testing::write_file(dir / "part.json", doc.dump());
  run_experiment(dir / "part.json", RunOptions{{}, dir / "part" / kCheckpointFile, false, {}});
  CHECK(testing::slurp(dir / "full" / kMetricsFile) == testing::slurp(dir / "part" / kMetricsFile));
  CHECK(testing::slurp(dir / "full" / kLambdasFile) == testing::slurp(dir / "part" / kLambdasFile));
  std::filesystem::remove_all(dir);
}

TEST_CASE("validate and oracle reports on a small game") {
  const auto dir = testing::temp_dir("reports");
  testing::write_file(dir / "c.json", small_run(dir / "out").dump());
  const auto v = validate_experiment(dir / "c.json");
  CHECK(v["ok"] == true);
  CHECK(v["mixing"]["ok"] == true);
  CHECK(v["environment"]["shape"]["num_pairs"] == 12);

  auto bad = small_run(dir / "out");
  bad["schedule"] = {{"p_alpha", 0.8}, {"p_beta", 0.7}};
  testing::write_file(dir / "bad.json", bad.dump());
  const auto vb = validate_experiment(dir / "bad.json");
  CHECK(vb["ok"] == false);
  CHECK(vb["schedule"]["ok"] == false);

  auto small_oracle = small_run(dir / "out");
  small_oracle["oracle"] = {{"policy_resolution", 5}, {"lambda_resolution", 5}, {"kemeny_resolution", 3},
                            {"simulation_steps", 20000}};
  const auto o = oracle_report(parse_config(small_oracle));
  CHECK(o["within_budget"] == true);
  CHECK(o.dump().find("\"error\"") == std::string::npos);

  const auto big = oracle_report(parse_config(json{{"environment", "cournot-defaults"}, {"seed", 1}}));
  CHECK(big["within_budget"] == false);
  std::filesystem::remove_all(dir);
}
