#include "crossmodal/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "crossmodal/common.hpp"

namespace crossmodal {

double Rng::uniform() {
  // 53 mantissa bits from the top of the 64-bit word.
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int n) {
  if (n <= 0) throw RangeError("uniform_int: n must be positive");
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t x = gen_();
  while (x >= limit) x = gen_();
  return static_cast<int>(x % un);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 in (0,1] so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

Rng Rng::fork(std::uint64_t stream_id) {
  // splitmix64 of (next word, stream id) decorrelates derived streams.
  std::uint64_t z = gen_() + 0x9e3779b97f4a7c15ULL * (stream_id + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return Rng(z ^ (z >> 31));
}

std::string Rng::serialize() const {
  std::ostringstream out;
  out << gen_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
  out.precision(17);
  out << spare_;
  return out.str();
}

void Rng::deserialize(const std::string& state) {
  std::istringstream in(state);
  int has_spare = 0;
  in >> gen_ >> has_spare >> spare_;
  if (!in) throw ParseError("Rng::deserialize: malformed state string");
  has_spare_ = has_spare != 0;
}

}  // namespace crossmodal
