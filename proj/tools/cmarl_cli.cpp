// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cmarl/cmarl.h"

namespace {

enum class Verbosity { kQuiet, kInfo, kDebug };

Verbosity verbosity() {
  const char* v = std::getenv("CMARL_LOG_LEVEL");
  if (!v) return Verbosity::kInfo;
  if (!std::strcmp(v, "quiet") || !std::strcmp(v, "error")) return Verbosity::kQuiet;
  if (!std::strcmp(v, "debug")) return Verbosity::kDebug;
  return Verbosity::kInfo;
}

// Library failures exit with 10 + status; 70 for internal errors.
int report_failure(cmarl_status status) {
  std::fprintf(stderr, "cmarl: %s: %s\n", cmarl_status_string(status), cmarl_last_error());
  return status == CMARL_ERR_INTERNAL ? 70 : 10 + static_cast<int>(status);
}

struct OwnedString {
  char* s = nullptr;
  ~OwnedString() { cmarl_string_free(s); }
};

void on_progress(uint64_t step, double objective, double disagreement, void*) {
  std::fprintf(stderr, "step %llu  J %.6g  ||lambda_perp|| %.6g\n", static_cast<unsigned long long>(step), objective,
               disagreement);
}

int write_text(const std::string& path, const char* text) {
  if (path.empty()) {
    std::fputs(text, stdout);
    std::fputc('\n', stdout);
    return 0;
  }
  std::ofstream out(path);
  if (!out || !(out << text << '\n')) {
    std::fprintf(stderr, "cmarl: cannot write '%s'\n", path.c_str());
    return 13;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed primal-dual actor-critic for constrained multi-agent games"};
  app.set_version_flag("--version", std::string(cmarl_version()));
  app.require_subcommand(1);

  std::string config, out, resume, in_dir, out_file;
  bool no_charts = false;

  auto* run = app.add_subcommand("run", "Train from a config and write metrics, charts and a manifest");
  run->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory (overrides output_dir in the config)");
  run->add_option("--resume", resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
  run->add_flag("--no-charts", no_charts, "Skip SVG chart emission");

  auto* validate = app.add_subcommand("validate", "Check schedules, the mixing matrix and the game");
  validate->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  auto* oracle = app.add_subcommand("oracle", "Exact oracle report for small games");
  oracle->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  oracle->add_option("--out", out_file, "Write the JSON report here instead of stdout");

  auto* report = app.add_subcommand("report", "Draw charts from a run directory");
  report->add_option("--in", in_dir, "Run directory containing metrics.csv")->required()->check(CLI::ExistingDirectory);

  auto* resolve = app.add_subcommand("resolve", "Print the config with every default filled in");
  resolve->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  const Verbosity level = verbosity();

  if (*run) {
    cmarl_run_summary s{};
    const cmarl_status st =
        cmarl_run_experiment(config.c_str(), out.empty() ? nullptr : out.c_str(), resume.empty() ? nullptr : resume.c_str(),
                             no_charts ? 0 : 1, level == Verbosity::kDebug ? on_progress : nullptr, nullptr, &s);
    if (st != CMARL_OK) return report_failure(st);
    if (level != Verbosity::kQuiet) {
      std::printf("steps %llu%s  J %.6g  ||lambda_perp|| %.6g  max pairwise %.6g  ||w_perp|| %.6g\n",
                  static_cast<unsigned long long>(s.steps), s.stopped_early ? " (early stop)" : "", s.objective,
                  s.lambda_disagreement, s.lambda_max_pairwise, s.critic_disagreement);
    }
    return 0;
  }
  if (*validate) {
    OwnedString text;
    int ok = 0;
    const cmarl_status st = cmarl_validate_config(config.c_str(), &text.s, &ok);
    if (st != CMARL_OK) return report_failure(st);
    std::puts(text.s);
    return ok ? 0 : 1;
  }
  if (*oracle) {
    OwnedString text;
    const cmarl_status st = cmarl_oracle_report(config.c_str(), &text.s);
    if (st != CMARL_OK) return report_failure(st);
    return write_text(out_file, text.s);
  }
  if (*report) {
    const cmarl_status st = cmarl_emit_report(in_dir.c_str());
    if (st != CMARL_OK) return report_failure(st);
    if (level != Verbosity::kQuiet) std::printf("wrote %s/lambda.svg and %s/costs.svg\n", in_dir.c_str(), in_dir.c_str());
    return 0;
  }
  if (*resolve) {
    OwnedString text;
    const cmarl_status st = cmarl_config_resolve(config.c_str(), &text.s);
    if (st != CMARL_OK) return report_failure(st);
    std::puts(text.s);
    return 0;
  }
  return 0;
}
