#pragma once

#include <cstdint>
#include <vector>
#include <random>

namespace eic {

// Deterministic random source.  The engine is the standard mt19937_64 (its
// output sequence is pinned by the C++ standard); all distributions are done
// by hand so that streams are identical across standard library versions.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // strictly inside (0,1)
  double uniform01() { return (double)((eng_() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double normal();

  bool bernoulli(double p) { return uniform01() < p; }

  double exponential(double rate) { return -std::log(uniform01()) / rate; }

  // index drawn proportionally to the (not necessarily normalised) weights
  std::size_t categorical(const std::vector<double>& weights);

private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

double normal_cdf(double z);
double normal_quantile(double p);

}  // namespace eic
