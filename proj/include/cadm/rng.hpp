#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "cadm/tensor.hpp"

namespace cadm {

// splitmix64 step; used to derive independent stream seeds from a base seed
// plus a stream tag, so parallel entities (ensemble members, dataset splits)
// never share a sequence.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic random stream. Gaussian draws use Box-Muller without caching
// so the full stream state is exactly the engine state (serializable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(eng_() % span);
  }

  template <typename S>
  void fill_normal(Tensor<S>& t, double scale = 1.0) {
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<S>(normal() * scale);
  }

  std::uint64_t raw() { return eng_(); }

  std::string save_state() const {
    std::ostringstream os;
    os << eng_;
    return os.str();
  }

  void load_state(const std::string& s) {
    std::istringstream is(s);
    is >> eng_;
    if (is.fail()) throw std::invalid_argument("Rng: malformed state string");
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace cadm
