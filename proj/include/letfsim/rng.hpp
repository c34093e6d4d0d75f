#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <tuple>
#include <utility>

namespace letfsim {

/// SplitMix64 finalizer. A bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of one Monte Carlo run inside a sweep.
constexpr std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t cell_index,
                                    std::uint64_t run_index) noexcept {
  return mix64(mix64(mix64(base_seed) ^ (cell_index + 0x632be59bd9b4e019ULL)) ^
               (run_index + 0x85157af5ULL));
}

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The 64-bit seed is the key; the 128-bit counter advances once per block of
/// four 32-bit words, which are handed out as two 64-bit outputs. The stream is
/// fully determined by the seed, independent of platform and standard library.
class Philox4x32 {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox4x32(std::uint64_t seed = 0) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (cursor_ == 2) {
      block_ = encrypt(counter_, key_);
      increment();
      cursor_ = 0;
    }
    const auto i = 2 * cursor_++;
    return (static_cast<std::uint64_t>(block_[i + 1]) << 32) | block_[i];
  }

  /// The raw bijection, exposed for known-answer tests.
  static constexpr Block encrypt(Block ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return ctr;
  }

  bool operator==(const Philox4x32&) const = default;

 private:
  void increment() noexcept {
    for (auto& word : counter_) {
      if (++word != 0) break;
    }
  }

  Key key_;
  Block counter_{};
  Block block_{};
  int cursor_ = 2;
};

/// The per-run generator type.
using RunRng = Philox4x32;

// Distributions are written out here rather than taken from <random> because
// the standard distributions are implementation-defined and would break
// cross-toolchain reproducibility.

/// Uniform on [0, 1) with 53 random bits.
template <class Rng>
double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform on [lo, hi).
template <class Rng>
double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

namespace detail {

/// Full 64 x 64 -> 128 bit product as (high, low).
constexpr std::pair<std::uint64_t, std::uint64_t> mul128(std::uint64_t a, std::uint64_t b) noexcept {
  const std::uint64_t a_lo = a & 0xffffffffu, a_hi = a >> 32;
  const std::uint64_t b_lo = b & 0xffffffffu, b_hi = b >> 32;
  const std::uint64_t ll = a_lo * b_lo;
  const std::uint64_t lh = a_lo * b_hi;
  const std::uint64_t hl = a_hi * b_lo;
  const std::uint64_t hh = a_hi * b_hi;
  const std::uint64_t mid = (ll >> 32) + (lh & 0xffffffffu) + (hl & 0xffffffffu);
  return {hh + (lh >> 32) + (hl >> 32) + (mid >> 32), (mid << 32) | (ll & 0xffffffffu)};
}

}  // namespace detail

/// Uniform integer on [lo, hi], Lemire's multiply-and-reject.
template <class Rng>
std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
  if (range == 0) return static_cast<std::int64_t>(rng());
  auto [high, low] = detail::mul128(rng(), range);
  if (low < range) {
    const std::uint64_t threshold = (0 - range) % range;
    while (low < threshold) std::tie(high, low) = detail::mul128(rng(), range);
  }
  return lo + static_cast<std::int64_t>(high);
}

/// Normal(mean, sigma) by Box-Muller (cosine branch only).
template <class Rng>
double normal(Rng& rng, double mean, double sigma) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return mean + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <class Rng>
bool bernoulli(Rng& rng, double p) {
  return uniform01(rng) < p;
}

}  // namespace letfsim
