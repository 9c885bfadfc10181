#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

namespace survnet {

//! SplitMix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t z)
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag)
{
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0)
{
  return mix64(mix64(mix64(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t b = 0)
{
  return derive_seed(seed, hash_tag(tag), b);
}

//! Seeded generator with platform-independent derived draws.
//!
//! The standard library distributions are implementation-defined, so every
//! draw here is built directly from the raw 64-bit engine output.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  //! Uniform on the open interval (0, 1).
  double uniform()
  {
    for (;;) {
      double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
      if (u > 0.0)
        return u;
    }
  }

  double normal()
  {
    // Phi^{-1}(u) = -sqrt(2) erfc^{-1}(2u)
    return -1.4142135623730951 * boost::math::erfc_inv(2.0 * uniform());
  }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  //! Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound)
  {
    // Lemire-free rejection; bound is always small here.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    for (;;) {
      std::uint64_t r = engine_();
      if (r < limit)
        return r % bound;
    }
  }

  template<typename T>
  void shuffle(std::vector<T>& v)
  {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::mt19937_64 engine_;
};

} // namespace survnet
