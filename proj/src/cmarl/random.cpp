#include "cmarl/random.hpp"

#include <sstream>

#include "cmarl/errors.hpp"

namespace cmarl {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("Rng::below requires n > 0");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

std::string Rng::save_state() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Rng::restore_state(const std::string& text) {
  std::istringstream in(text);
  in >> engine_;
  if (in.fail()) throw InvalidArgument("malformed RNG state");
}

std::size_t sample_from_pmf(std::span<const double> pmf, double u) {
  if (pmf.empty()) throw InvalidArgument("sample_from_pmf: empty distribution");
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < pmf.size(); ++i) {
    acc += pmf[i];
    if (u < acc) return i;
  }
  // Skip trailing zero-probability entries so they are never returned.
  std::size_t last = pmf.size() - 1;
  while (last > 0 && pmf[last] <= 0.0) --last;
  return last;
}

}  // namespace cmarl
