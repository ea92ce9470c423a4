#include "cmarl/config.hpp"

#include <cmath>
#include <set>

#include "cmarl/cmg_io.hpp"
#include "cmarl/errors.hpp"

namespace cmarl {

using nlohmann::json;

namespace {

// Strict view of one JSON object: every key read is recorded and leftovers are rejected.
class Section {
 public:
  Section(const json& doc, std::string where) : doc_(doc), where_(std::move(where)) {
    if (!doc_.is_object()) throw ConfigError(label() + " must be a JSON object");
  }

  bool has(const std::string& key) const { return doc_.contains(key); }

  const json* raw(const std::string& key) {
    used_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, double fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_number()) fail(key, "must be a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
    return x;
  }

  std::uint64_t integer(const std::string& key, std::uint64_t fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
      fail(key, "must be a non-negative integer");
    }
    return v->get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(key, "must be true or false");
    return v->get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_string()) fail(key, "must be a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback, bool allow_scalar = false) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (allow_scalar && v->is_number()) return {v->get<double>()};
    if (!v->is_array()) fail(key, allow_scalar ? "must be a number or an array of numbers" : "must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
      if (!e.is_number()) fail(key, "must contain only numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::string path(const std::string& key) const { return where_ + "/" + key; }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError("key '" + path(key) + "' " + what);
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' at " + label());
    }
  }

 private:
  std::string label() const { return where_.empty() ? "top level" : "'" + where_ + "'"; }

  const json& doc_;
  std::string where_;
  std::set<std::string> used_;
};

CournotConfig parse_cournot(const json& doc, const std::string& where) {
  Section sec(doc, where);
  CournotConfig c;
  c.num_agents = sec.integer("num_agents", c.num_agents);
  if (c.num_agents != 5 && !sec.has("constraint_weights")) {
    sec.fail("constraint_weights", "is required when num_agents differs from the default");
  }
  c.unit_price = sec.number("unit_price", c.unit_price);
  c.constraint_weights = sec.numbers("constraint_weights", c.constraint_weights);
  c.bound = sec.number("bound", c.bound);
  c.num_states = sec.integer("num_states", c.num_states);
  c.state_min = sec.number("state_min", c.state_min);
  c.state_max = sec.number("state_max", c.state_max);
  c.num_actions = sec.integer("num_actions", c.num_actions);
  c.action_min = sec.number("action_min", c.action_min);
  c.action_max = sec.number("action_max", c.action_max);
  c.transition_sharpness = sec.number("transition_sharpness", c.transition_sharpness);
  c.state_modulation = sec.number("state_modulation", c.state_modulation);
  c.cost_noise = sec.number("cost_noise", c.cost_noise);
  sec.finish();
  c.check();
  return c;
}

std::size_t tabular_constraints(const std::filesystem::path& path) {
  const json doc = read_json_file(path);
  try {
    return doc.at("shape").value("num_constraints", std::size_t{0});
  } catch (const json::exception&) {
    throw ConfigError("game file '" + path.string() + "' has no readable shape block");
  }
}

EnvironmentSpec parse_environment(const json& doc, const std::filesystem::path& base_dir) {
  EnvironmentSpec env;
  if (doc.is_string()) {
    if (doc.get<std::string>() != "cournot-defaults") {
      throw ConfigError("key '/environment' must be \"cournot-defaults\" or an object");
    }
    return env;
  }
  Section sec(doc, "/environment");
  const std::string kind = sec.text("kind", "cournot");
  env.normalize_costs = sec.boolean("normalize_costs", false);
  env.cell_budget = sec.integer("cell_budget", env.cell_budget);
  if (kind == "cournot") {
    env.kind = EnvironmentSpec::Kind::kCournot;
    env.lazy = sec.boolean("lazy", true);
    if (const json* c = sec.raw("cournot")) env.cournot = parse_cournot(*c, "/environment/cournot");
    if (sec.has("path")) sec.fail("path", "is only valid for kind 'tabular'");
  } else if (kind == "tabular") {
    env.kind = EnvironmentSpec::Kind::kTabular;
    const json* p = sec.raw("path");
    if (!p || !p->is_string()) sec.fail("path", "must name the game file for kind 'tabular'");
    std::filesystem::path path = p->get<std::string>();
    if (path.is_relative()) path = base_dir / path;
    path = path.lexically_normal();
    if (!std::filesystem::exists(path)) throw IoError("game file '" + path.string() + "' does not exist");
    env.path = path;
    env.lazy = false;
    if (sec.has("cournot")) sec.fail("cournot", "is only valid for kind 'cournot'");
    if (sec.has("lazy")) sec.fail("lazy", "is only valid for kind 'cournot'");
  } else {
    sec.fail("kind", "must be 'cournot' or 'tabular'");
  }
  sec.finish();
  return env;
}

TopologySpec parse_topology(const json& doc) {
  Section sec(doc, "/topology");
  TopologySpec t;
  t.kind = topology_kind_from_string(sec.text("kind", "complete"));
  t.time_varying = sec.boolean("time_varying", false);
  if (const json* e = sec.raw("edges")) {
    if (t.kind != TopologyKind::kCustom) sec.fail("edges", "is only valid for kind 'custom'");
    if (!e->is_array()) sec.fail("edges", "must be an array of [i, j] pairs");
    for (const auto& pair : *e) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_unsigned() || !pair[1].is_number_unsigned()) {
        sec.fail("edges", "must contain [i, j] pairs of agent indices");
      }
      t.edges.emplace_back(pair[0].get<std::size_t>(), pair[1].get<std::size_t>());
    }
  } else if (t.kind == TopologyKind::kCustom) {
    sec.fail("edges", "is required for kind 'custom'");
  }
  if (sec.has("radius") && t.kind != TopologyKind::kRandomGeometric) sec.fail("radius", "is only valid for kind 'random-geometric'");
  if (sec.has("seed") && t.kind != TopologyKind::kRandomGeometric) sec.fail("seed", "is only valid for kind 'random-geometric'");
  t.radius = sec.number("radius", t.radius);
  if (sec.has("seed")) t.seed = sec.integer("seed", 0);
  sec.finish();
  return t;
}

StepSchedule parse_schedule(const json& doc) {
  Section sec(doc, "/schedule");
  StepSchedule s;
  s.p_alpha = sec.number("p_alpha", s.p_alpha);
  s.p_beta = sec.number("p_beta", s.p_beta);
  s.p_gamma = sec.number("p_gamma", s.p_gamma);
  s.t0 = sec.number("t0", s.t0);
  s.scale_alpha = sec.number("scale_alpha", s.scale_alpha);
  s.scale_beta = sec.number("scale_beta", s.scale_beta);
  s.scale_gamma = sec.number("scale_gamma", s.scale_gamma);
  sec.finish();
  return s;
}

TrainerSpec parse_trainer(const json* doc, std::size_t K) {
  TrainerSpec t;
  std::vector<double> lambda_max{10.0};
  if (doc) {
    Section sec(*doc, "/trainer");
    t.horizon = sec.integer("horizon", t.horizon);
    lambda_max = sec.numbers("lambda_max", lambda_max, true);
    t.theta_max = sec.number("theta_max", t.theta_max);
    t.metrics_every = sec.integer("metrics_every", t.metrics_every);
    t.checkpoint_every = sec.integer("checkpoint_every", t.checkpoint_every);
    t.initial_state = sec.integer("initial_state", t.initial_state);
    t.advantage_state = advantage_state_from_string(sec.text("advantage_state", "current"));
    if (const json* es = sec.raw("early_stop")) {
      Section e(*es, "/trainer/early_stop");
      for (const char* key : {"disagreement", "drift", "window"}) {
        if (!e.has(key)) e.fail(key, "is required: early-stop thresholds have no defaults");
      }
      EarlyStopRule rule;
      rule.disagreement = e.number("disagreement", 0.0);
      rule.drift = e.number("drift", 0.0);
      rule.window = e.integer("window", 1);
      e.finish();
      if (!(rule.disagreement > 0.0) || !(rule.drift > 0.0) || rule.window == 0) {
        throw ConfigError("'/trainer/early_stop' needs positive thresholds and a window of at least 1");
      }
      t.early_stop = rule;
    }
    sec.finish();
    if (t.metrics_every == 0) sec.fail("metrics_every", "must be at least 1");
    if (!(t.theta_max > 0.0)) sec.fail("theta_max", "must be positive");
  }
  if (lambda_max.size() == 1 && K != 1) lambda_max.assign(K, lambda_max.front());
  if (lambda_max.size() != K) {
    throw ConfigError("key '/trainer/lambda_max' has " + std::to_string(lambda_max.size()) + " entries for " +
                      std::to_string(K) + " constraints");
  }
  for (double m : lambda_max) {
    if (!(m > 0.0)) throw ConfigError("key '/trainer/lambda_max' entries must be positive");
  }
  t.lambda_max = lambda_max;
  return t;
}

OracleSpec parse_oracle(const json& doc) {
  Section sec(doc, "/oracle");
  OracleSpec o;
  o.pair_budget = sec.integer("pair_budget", o.pair_budget);
  o.policy_resolution = sec.integer("policy_resolution", o.policy_resolution);
  o.lambda_resolution = sec.integer("lambda_resolution", o.lambda_resolution);
  o.kemeny_resolution = sec.integer("kemeny_resolution", o.kemeny_resolution);
  o.simulation_steps = sec.integer("simulation_steps", o.simulation_steps);
  if (sec.has("slater_margins")) o.slater_margins = sec.numbers("slater_margins", {});
  sec.finish();
  if (o.policy_resolution < 2 || o.lambda_resolution < 2 || o.kemeny_resolution < 2) {
    throw ConfigError("'/oracle' grid resolutions must be at least 2");
  }
  return o;
}

}  // namespace

CournotConfig parse_cournot_config(const json& doc, const std::string& where) { return parse_cournot(doc, where); }

std::size_t ExperimentConfig::num_agents() const {
  return environment.kind == EnvironmentSpec::Kind::kCournot ? environment.cournot.num_agents
                                                             : load_cmg(environment.path).shape().num_agents;
}

std::size_t ExperimentConfig::num_constraints() const { return trainer.lambda_max.size(); }

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  Section top(doc, "");
  ExperimentConfig cfg;
  const json* env = top.raw("environment");
  if (!env) top.fail("environment", "is required");
  cfg.environment = parse_environment(*env, base_dir);
  if (!top.has("seed")) top.fail("seed", "is required");
  cfg.seed = top.integer("seed", 0);

  cfg.features.seed = cfg.seed;
  if (const json* f = top.raw("features")) {
    Section sec(*f, "/features");
    cfg.features.seed = sec.integer("seed", cfg.seed);
    cfg.features.critic_dim = sec.integer("critic_dim", cfg.features.critic_dim);
    cfg.features.policy_dim = sec.integer("policy_dim", cfg.features.policy_dim);
    cfg.features.low = sec.number("low", cfg.features.low);
    cfg.features.high = sec.number("high", cfg.features.high);
    sec.finish();
    if (cfg.features.critic_dim == 0 || cfg.features.policy_dim == 0) {
      throw ConfigError("'/features' dimensions must be positive");
    }
    if (!(cfg.features.low < cfg.features.high)) throw ConfigError("'/features' needs low < high");
  }
  if (const json* t = top.raw("topology")) cfg.topology = parse_topology(*t);
  if (const json* s = top.raw("schedule")) cfg.schedule = parse_schedule(*s);
  const std::size_t K = cfg.environment.kind == EnvironmentSpec::Kind::kCournot
                            ? 1
                            : tabular_constraints(cfg.environment.path);
  cfg.trainer = parse_trainer(top.raw("trainer"), K);
  if (const json* o = top.raw("output_dir")) {
    if (!o->is_string()) top.fail("output_dir", "must be a string");
    std::filesystem::path p = o->get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    cfg.output_dir = p.lexically_normal();
  }
  if (const json* o = top.raw("oracle")) cfg.oracle = parse_oracle(*o);
  top.finish();
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("config file '" + path.string() + "' does not exist");
  return parse_config(read_json_file(path), std::filesystem::absolute(path).parent_path());
}

json config_to_json(const ExperimentConfig& c) {
  json doc;
  const auto& e = c.environment;
  json env;
  env["normalize_costs"] = e.normalize_costs;
  env["cell_budget"] = e.cell_budget;
  if (e.kind == EnvironmentSpec::Kind::kCournot) {
    const auto& k = e.cournot;
    env["kind"] = "cournot";
    env["lazy"] = e.lazy;
    env["cournot"] = {{"num_agents", k.num_agents},
                      {"unit_price", k.unit_price},
                      {"constraint_weights", k.constraint_weights},
                      {"bound", k.bound},
                      {"num_states", k.num_states},
                      {"state_min", k.state_min},
                      {"state_max", k.state_max},
                      {"num_actions", k.num_actions},
                      {"action_min", k.action_min},
                      {"action_max", k.action_max},
                      {"transition_sharpness", k.transition_sharpness},
                      {"state_modulation", k.state_modulation},
                      {"cost_noise", k.cost_noise}};
  } else {
    env["kind"] = "tabular";
    env["path"] = e.path.string();
  }
  doc["environment"] = env;
  doc["seed"] = c.seed;
  doc["features"] = {{"seed", c.features.seed},
                     {"critic_dim", c.features.critic_dim},
                     {"policy_dim", c.features.policy_dim},
                     {"low", c.features.low},
                     {"high", c.features.high}};
  json topo = {{"kind", to_string(c.topology.kind)}, {"time_varying", c.topology.time_varying}};
  if (c.topology.kind == TopologyKind::kCustom) {
    json edges = json::array();
    for (auto [a, b] : c.topology.edges) edges.push_back({a, b});
    topo["edges"] = edges;
  }
  if (c.topology.kind == TopologyKind::kRandomGeometric) {
    topo["radius"] = c.topology.radius;
    if (c.topology.seed) topo["seed"] = *c.topology.seed;
  }
  doc["topology"] = topo;
  const auto& s = c.schedule;
  doc["schedule"] = {{"p_alpha", s.p_alpha}, {"p_beta", s.p_beta},         {"p_gamma", s.p_gamma},
                     {"t0", s.t0},           {"scale_alpha", s.scale_alpha}, {"scale_beta", s.scale_beta},
                     {"scale_gamma", s.scale_gamma}};
  const auto& t = c.trainer;
  json tr = {{"horizon", t.horizon},
             {"lambda_max", t.lambda_max},
             {"theta_max", t.theta_max},
             {"metrics_every", t.metrics_every},
             {"checkpoint_every", t.checkpoint_every},
             {"initial_state", t.initial_state},
             {"advantage_state", to_string(t.advantage_state)}};
  if (t.early_stop) {
    tr["early_stop"] = {{"disagreement", t.early_stop->disagreement},
                        {"drift", t.early_stop->drift},
                        {"window", t.early_stop->window}};
  }
  doc["trainer"] = tr;
  if (c.output_dir) doc["output_dir"] = c.output_dir->string();
  json o = {{"pair_budget", c.oracle.pair_budget},
            {"policy_resolution", c.oracle.policy_resolution},
            {"lambda_resolution", c.oracle.lambda_resolution},
            {"kemeny_resolution", c.oracle.kemeny_resolution},
            {"simulation_steps", c.oracle.simulation_steps}};
  if (c.oracle.slater_margins) o["slater_margins"] = *c.oracle.slater_margins;
  doc["oracle"] = o;
  return doc;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return config_to_json(a) == config_to_json(b); }

}  // namespace cmarl
