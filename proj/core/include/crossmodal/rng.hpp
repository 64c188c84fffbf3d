#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace crossmodal {

// Deterministic random stream. std::mt19937_64 output is pinned by the
// standard; the distribution transforms below are implemented here (instead
// of <random> distributions) so sequences are identical across standard
// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1).
  double uniform();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  int uniform_int(int n);

  /// Standard normal draw (Box-Muller).
  double normal();

  /// Derive an independent stream for a labelled sub-task.
  Rng fork(std::uint64_t stream_id);

  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  std::mt19937_64 gen_;
  bool has_spare_{false};
  double spare_{0.0};
};

}  // namespace crossmodal
