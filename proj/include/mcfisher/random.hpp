#pragma once

// Counter-based random numbers.
//
// Every variate is a pure function of (seed, stream, counter), so ensembles,
// splits and trials can be generated in any order, or concurrently, and still
// come out bit-identical. The bit generator is Philox4x32-10 (Salmon et al.,
// SC'11); the transforms to uniform, normal and Poisson variates are fixed here
// and do not depend on the standard library's distribution classes, whose
// output is implementation-defined.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

namespace mcfisher {

namespace detail {

inline void mulhilo32(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                      std::uint32_t& lo) {
  const std::uint64_t product = std::uint64_t{a} * std::uint64_t{b};
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

using PhiloxBlock = std::array<std::uint32_t, 4>;

/// Philox4x32 with 10 rounds.
inline PhiloxBlock philox4x32_10(PhiloxBlock ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    detail::mulhilo32(kMul0, ctr[0], hi0, lo0);
    detail::mulhilo32(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

/// Derives an independent child seed; used for trials, shuffles and roles.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return detail::splitmix64(detail::splitmix64(seed) ^ detail::splitmix64(~tag));
}

/// Inverse Poisson CDF with the per-rate constants precomputed. Below rate 30
/// the search starts at zero; above it starts at the mode, with the CDF there
/// taken from the regularized incomplete gamma function.
class PoissonSampler {
 public:
  explicit PoissonSampler(double rate) : rate_(rate) {
    if (rate <= 0.0) return;
    if (rate < 30.0) {
      p0_ = std::exp(-rate);
      return;
    }
    mode_ = std::floor(rate);
    pmf_mode_ = std::exp(-rate + mode_ * std::log(rate) - std::lgamma(mode_ + 1.0));
    cdf_mode_ = boost::math::gamma_q(mode_ + 1.0, rate);
  }

  std::uint64_t operator()(double u) const {
    if (rate_ <= 0.0) return 0;
    if (rate_ < 30.0) {
      double pmf = p0_;
      double cdf = pmf;
      std::uint64_t k = 0;
      while (u > cdf) {
        ++k;
        pmf *= rate_ / static_cast<double>(k);
        const double next = cdf + pmf;
        if (next == cdf) break;  // u sits in the round-off tail
        cdf = next;
      }
      return k;
    }
    auto k = static_cast<std::uint64_t>(mode_);
    if (u <= cdf_mode_) {
      double cdf_below = cdf_mode_ - pmf_mode_;  // P(X <= k-1)
      double pmf = pmf_mode_;
      while (k > 0 && u <= cdf_below) {
        pmf *= static_cast<double>(k) / rate_;
        cdf_below -= pmf;
        --k;
      }
      return k;
    }
    double cdf = cdf_mode_;
    double pmf = pmf_mode_;
    while (u > cdf) {
      ++k;
      pmf *= rate_ / static_cast<double>(k);
      const double next = cdf + pmf;
      if (next == cdf) break;
      cdf = next;
    }
    return k;
  }

 private:
  double rate_;
  double p0_ = 0.0;
  double mode_ = 0.0;
  double pmf_mode_ = 0.0;
  double cdf_mode_ = 0.0;
};

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  PhiloxBlock block(std::uint64_t stream, std::uint64_t counter) const {
    return philox4x32_10({static_cast<std::uint32_t>(counter),
                          static_cast<std::uint32_t>(counter >> 32),
                          static_cast<std::uint32_t>(stream),
                          static_cast<std::uint32_t>(stream >> 32)},
                         key_);
  }

  std::uint64_t bits64(std::uint64_t stream, std::uint64_t counter) const {
    const auto b = block(stream, counter);
    return (std::uint64_t{b[1]} << 32) | b[0];
  }

  /// Uniform on the open interval (0, 1).
  double uniform(std::uint64_t stream, std::uint64_t counter) const {
    return to_unit(bits64(stream, counter));
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound, std::uint64_t stream, std::uint64_t counter) const {
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(bits64(stream, counter)) * bound;
    return static_cast<std::uint64_t>(wide >> 64);
  }

  /// Standard normal via Box-Muller on the two 64-bit halves of one block.
  double normal(std::uint64_t stream, std::uint64_t counter) const {
    const auto b = block(stream, counter);
    const double u1 = to_unit((std::uint64_t{b[1]} << 32) | b[0]);
    const double u2 = to_unit((std::uint64_t{b[3]} << 32) | b[2]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Poisson variate by CDF inversion of a single uniform.
  std::uint64_t poisson(double rate, std::uint64_t stream, std::uint64_t counter) const {
    return poisson_inverse(rate, uniform(stream, counter));
  }

  /// Inverse Poisson CDF.
  static std::uint64_t poisson_inverse(double rate, double u);

 private:
  static double to_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  std::array<std::uint32_t, 2> key_;
};

inline std::uint64_t CounterRng::poisson_inverse(double rate, double u) { return PoissonSampler(rate)(u); }

}  // namespace mcfisher
