#include "cmarl/metrics_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cmarl/errors.hpp"

namespace cmarl {

std::vector<std::string> metrics_columns(std::size_t K) {
  std::vector<std::string> cols{"step", "J"};
  for (std::size_t k = 1; k <= K; ++k) cols.push_back("G_gap_" + std::to_string(k));
  for (std::size_t k = 1; k <= K; ++k) cols.push_back("lambda_mean_" + std::to_string(k));
  for (const char* c : {"lambda_disagreement", "critic_disagreement", "alpha", "beta", "gamma"}) cols.emplace_back(c);
  return cols;
}

std::vector<std::string> lambda_columns(std::size_t N, std::size_t K) {
  std::vector<std::string> cols{"step"};
  for (std::size_t n = 1; n <= N; ++n) {
    for (std::size_t k = 1; k <= K; ++k) cols.push_back("lambda_" + std::to_string(n) + "_" + std::to_string(k));
  }
  return cols;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::string join(const std::vector<std::string>& cols) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ',';
    out += cols[i];
  }
  return out;
}

std::FILE* open_file(const std::filesystem::path& path, const char* mode) {
  std::FILE* f = std::fopen(path.c_str(), mode);
  if (!f) throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
  return f;
}

// Keeps the header and every row whose step is <= last_step.
void truncate_after(const std::filesystem::path& path, const std::string& header, std::uint64_t last_step) {
  std::vector<std::string> kept;
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    if (line != header) throw ConfigError("cannot resume: '" + path.string() + "' has a different header");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto step = std::strtoull(line.c_str(), nullptr, 10);
      if (step <= last_step) kept.push_back(line);
    }
  }
  std::FILE* f = open_file(path, "w");
  std::fprintf(f, "%s\n", header.c_str());
  for (const auto& l : kept) std::fprintf(f, "%s\n", l.c_str());
  std::fclose(f);
}

}  // namespace

MetricsWriter::MetricsWriter(const std::filesystem::path& dir, std::size_t N, std::size_t K) : n_(N), k_(K) {
  open(dir, nullptr);
}

MetricsWriter::MetricsWriter(const std::filesystem::path& dir, std::size_t N, std::size_t K, std::uint64_t resume_step)
    : n_(N), k_(K) {
  open(dir, &resume_step);
}

void MetricsWriter::open(const std::filesystem::path& dir, const std::uint64_t* resume_step) {
  const auto mpath = dir / kMetricsFile, lpath = dir / kLambdasFile;
  const std::string mhead = join(metrics_columns(k_)), lhead = join(lambda_columns(n_, k_));
  if (resume_step) {
    truncate_after(mpath, mhead, *resume_step);
    truncate_after(lpath, lhead, *resume_step);
    metrics_ = open_file(mpath, "a");
    lambdas_ = open_file(lpath, "a");
    return;
  }
  metrics_ = open_file(mpath, "w");
  lambdas_ = open_file(lpath, "w");
  std::fprintf(metrics_, "%s\n", mhead.c_str());
  std::fprintf(lambdas_, "%s\n", lhead.c_str());
}

MetricsWriter::~MetricsWriter() {
  if (metrics_) std::fclose(metrics_);
  if (lambdas_) std::fclose(lambdas_);
}

void MetricsWriter::write(const MetricsRecord& r) {
  std::string line = std::to_string(r.step) + ',' + format_double(r.objective);
  for (double v : r.g_gap) line += ',' + format_double(v);
  for (double v : r.lambda_mean) line += ',' + format_double(v);
  for (double v : {r.lambda_disagreement, r.critic_disagreement, r.step_sizes.alpha, r.step_sizes.beta,
                   r.step_sizes.gamma}) {
    line += ',' + format_double(v);
  }
  std::fprintf(metrics_, "%s\n", line.c_str());

  line = std::to_string(r.step);
  for (double v : r.lambdas) line += ',' + format_double(v);
  std::fprintf(lambdas_, "%s\n", line.c_str());
}

void MetricsWriter::flush() {
  std::fflush(metrics_);
  std::fflush(lambdas_);
}

std::size_t CsvTable::find(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  return static_cast<std::size_t>(-1);
}

std::vector<double> CsvTable::column(const std::string& name) const {
  const std::size_t c = find(name);
  if (c == static_cast<std::size_t>(-1)) throw ConfigError("no column '" + name + "'");
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("'" + path.string() + "' has no header row");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.columns.push_back(cell);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0') {
        throw ConfigError("'" + path.string() + "' line " + std::to_string(lineno) + ": '" + cell + "' is not a number");
      }
      row.push_back(v);
    }
    if (row.size() != table.columns.size()) {
      throw ConfigError("'" + path.string() + "' line " + std::to_string(lineno) + " has " + std::to_string(row.size()) +
                        " fields, expected " + std::to_string(table.columns.size()));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace cmarl
