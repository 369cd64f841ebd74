#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace stablelab {

/// SplitMix64 finalizer. Used to derive independent stream seeds from
/// (master seed, stream tag, index) so that replica i always sees the same
/// random numbers regardless of how work is split across threads.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index) noexcept {
  return splitmix64(master ^ splitmix64(stream ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

/// Stream tags, so different consumers of one master seed never collide.
namespace streams {
inline constexpr std::uint64_t replica = 1;
inline constexpr std::uint64_t mean_estimate = 2;
inline constexpr std::uint64_t induced_replica = 3;
inline constexpr std::uint64_t pilot = 4;
inline constexpr std::uint64_t bootstrap = 5;
inline constexpr std::uint64_t synthetic = 6;
inline constexpr std::uint64_t billiard = 7;
inline constexpr std::uint64_t shuffle = 8;
inline constexpr std::uint64_t diagnostic = 9;
}  // namespace streams

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return Rng(derive_seed(master, stream, index));
}

/// Uniform on [0,1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform on the open interval (0,1).
inline double uniform_open01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace stablelab

namespace stablelab {

/// Uniform integer in [0, n) by rejection (Lemire), n >= 1.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  unsigned __int128 m = static_cast<unsigned __int128>(rng()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(rng()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

/// Deterministic Fisher-Yates permutation of [0, n).
inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[uniform_index(rng, i)]);
  return p;
}

}  // namespace stablelab
