#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace infoseek {

// Deterministic counter-based random stream (splitmix64). Every source of
// randomness in the toolkit is an Rng derived from one master seed via named
// substreams, so runs are reproducible end to end.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Derived stream, independent of the parent's future output.
  Rng substream(std::string_view name) const;
  Rng substream(std::uint64_t index) const;

  std::uint64_t next_u64();

  // Uniform on [0, 1).
  double uniform();

  // Uniform integer on [lo, hi] inclusive, rejection-sampled (unbiased).
  long long uniform_int(long long lo, long long hi);

  // Box-Muller; no cached spare so the draw count per call is fixed.
  double normal(double mean, double sd);
  double lognormal(double mu, double sigma);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<long long>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace infoseek
