#include "cmarl/cmg_io.hpp"

#include <fstream>
#include <sstream>

#include "cmarl/errors.hpp"

namespace cmarl {

using nlohmann::json;

json cmg_to_json(const TabularCMG& cmg) {
  const GameShape& sh = cmg.shape();
  const std::size_t A = sh.num_joint_actions();
  json doc;
  doc["format"] = kCmgFormat;
  doc["version"] = kCmgFormatVersion;
  doc["shape"] = {{"num_agents", sh.num_agents},
                  {"num_states", sh.num_states},
                  {"actions_per_agent", sh.actions_per_agent},
                  {"num_constraints", sh.num_constraints}};
  json transition = json::array();
  for (std::size_t s = 0; s < sh.num_states; ++s) {
    json per_action = json::array();
    for (std::size_t a = 0; a < A; ++a) {
      auto r = cmg.row(s, a);
      per_action.push_back(std::vector<double>(r.begin(), r.end()));
    }
    transition.push_back(std::move(per_action));
  }
  doc["transition"] = std::move(transition);

  json cost = json::array();
  json constraint = json::array();
  for (std::size_t n = 0; n < sh.num_agents; ++n) {
    json cn = json::array();
    for (std::size_t s = 0; s < sh.num_states; ++s) {
      std::vector<double> row(A);
      for (std::size_t a = 0; a < A; ++a) row[a] = cmg.cost(n, s, a);
      cn.push_back(row);
    }
    cost.push_back(std::move(cn));
    json gn = json::array();
    for (std::size_t k = 0; k < sh.num_constraints; ++k) {
      json gk = json::array();
      for (std::size_t s = 0; s < sh.num_states; ++s) {
        std::vector<double> row(A);
        for (std::size_t a = 0; a < A; ++a) row[a] = cmg.constraint_cost(n, k, s, a);
        gk.push_back(row);
      }
      gn.push_back(std::move(gk));
    }
    constraint.push_back(std::move(gn));
  }
  doc["cost"] = std::move(cost);
  doc["constraint_cost"] = std::move(constraint);
  auto b = cmg.bounds();
  doc["bounds"] = std::vector<double>(b.begin(), b.end());
  doc["cost_noise"] = cmg.cost_noise();
  return doc;
}

namespace {

// Walks the nested arrays, collecting every shape problem with its JSON path.
class ShapeReader {
 public:
  std::vector<std::string> problems;

  const json* field(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) {
      problems.push_back("missing key '" + path + key + "'");
      return nullptr;
    }
    return &obj.at(key);
  }

  bool count(const json& arr, std::size_t want, const std::string& path) {
    if (!arr.is_array()) {
      problems.push_back(path + " is not an array");
      return false;
    }
    if (arr.size() != want) {
      problems.push_back(path + " has " + std::to_string(arr.size()) + " entries, expected " +
                         std::to_string(want));
      return false;
    }
    return true;
  }

  // Reads a rank-`dims.size()` array of numbers into `out` in row-major order.
  void tensor(const json& arr, const std::vector<std::size_t>& dims, std::size_t depth, const std::string& path,
              std::vector<double>& out) {
    if (!count(arr, dims[depth], path)) return;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string sub = path + "[" + std::to_string(i) + "]";
      if (depth + 1 == dims.size()) {
        if (!arr[i].is_number()) {
          problems.push_back(sub + " is not a number");
          out.push_back(0.0);
        } else {
          out.push_back(arr[i].get<double>());
        }
      } else {
        tensor(arr[i], dims, depth + 1, sub, out);
      }
    }
  }
};

struct ParsedCmg {
  GameShape shape;
  std::vector<double> transition, cost, constraint, bounds;
  double noise = 0.0;
};

ParsedCmg parse(const json& doc, std::vector<std::string>& problems) {
  ShapeReader reader;
  ParsedCmg out;
  if (!doc.is_object()) {
    problems.push_back("document is not a JSON object");
    return out;
  }
  if (doc.contains("format") && doc["format"] != kCmgFormat) {
    problems.push_back("format tag is not '" + std::string(kCmgFormat) + "'");
  }
  const json* shape = reader.field(doc, "shape", "");
  if (shape) {
    try {
      out.shape.num_agents = shape->at("num_agents").get<std::size_t>();
      out.shape.num_states = shape->at("num_states").get<std::size_t>();
      out.shape.actions_per_agent = shape->at("actions_per_agent").get<std::vector<std::size_t>>();
      out.shape.num_constraints = shape->value("num_constraints", std::size_t{0});
      out.shape.check();
    } catch (const json::exception& e) {
      reader.problems.push_back(std::string("shape: ") + e.what());
    } catch (const Error& e) {
      reader.problems.push_back(std::string("shape: ") + e.what());
    }
  }
  if (!reader.problems.empty()) {
    problems = reader.problems;
    return out;
  }
  const auto& sh = out.shape;
  const std::size_t A = sh.num_joint_actions();
  const std::size_t N = sh.num_agents, S = sh.num_states, K = sh.num_constraints;
  if (const json* t = reader.field(doc, "transition", "")) reader.tensor(*t, {S, A, S}, 0, "transition", out.transition);
  if (const json* c = reader.field(doc, "cost", "")) reader.tensor(*c, {N, S, A}, 0, "cost", out.cost);
  if (K > 0) {
    if (const json* g = reader.field(doc, "constraint_cost", "")) {
      reader.tensor(*g, {N, K, S, A}, 0, "constraint_cost", out.constraint);
    }
  }
  if (const json* b = reader.field(doc, "bounds", "")) reader.tensor(*b, {K}, 0, "bounds", out.bounds);
  if (doc.contains("cost_noise")) {
    if (!doc["cost_noise"].is_number()) {
      reader.problems.push_back("cost_noise is not a number");
    } else {
      out.noise = doc["cost_noise"].get<double>();
      if (out.noise < 0.0) reader.problems.push_back("cost_noise is negative");
    }
  }
  problems = reader.problems;
  return out;
}

}  // namespace

TabularCMG cmg_from_json(const json& doc) {
  std::vector<std::string> problems;
  ParsedCmg parsed = parse(doc, problems);
  if (!problems.empty()) {
    std::string msg = "invalid game file: " + problems.front();
    if (problems.size() > 1) msg += " (+" + std::to_string(problems.size() - 1) + " more)";
    throw ConfigError(msg);
  }
  return TabularCMG(std::move(parsed.shape), std::move(parsed.transition), std::move(parsed.cost),
                    std::move(parsed.constraint), std::move(parsed.bounds), parsed.noise);
}

ValidationReport validate_cmg_json(const json& doc) {
  std::vector<std::string> problems;
  ParsedCmg parsed = parse(doc, problems);
  ValidationReport report;
  for (auto& p : problems) {
    report.issues.push_back({ValidationIssue::Kind::kShape, true, p, std::nullopt, std::nullopt});
  }
  if (!problems.empty()) return report;
  TabularCMG cmg(std::move(parsed.shape), std::move(parsed.transition), std::move(parsed.cost),
                 std::move(parsed.constraint), std::move(parsed.bounds), parsed.noise);
  return validate(cmg);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void save_cmg(const TabularCMG& cmg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << cmg_to_json(cmg).dump(1) << '\n';
}

TabularCMG load_cmg(const std::filesystem::path& path) { return cmg_from_json(read_json_file(path)); }

}  // namespace cmarl
