#pragma once

// Reference elementary functions shared by the scalar and AVX2 kernels.
// Every operation here has a lane-wise twin in avx2.cpp performing the same
// IEEE binary64 operations in the same order, so both paths return identical
// bits. Accuracy is within ~2 ulp of the correctly rounded result.

#include <bit>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <limits>

namespace stablelab::kernels::ref {

inline constexpr double kLog2e = 1.44269504088896338700e+00;
inline constexpr double kLn2Hi = 6.93147180369123816490e-01;  // low 32 bits zero
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;
inline constexpr double kExpMax = 709.782712893383973096;
inline constexpr double kExpMin = -745.13321910194110842;
inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kTwo52 = 0x1.0p52;
inline constexpr double kTwo54 = 0x1.0p54;

// 1/k! for k = 0..13, Horner order from the top.
inline constexpr double kExpPoly[14] = {
    1.0,
    1.0,
    1.0 / 2.0,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5040.0,
    1.0 / 40320.0,
    1.0 / 362880.0,
    1.0 / 3628800.0,
    1.0 / 39916800.0,
    1.0 / 479001600.0,
    1.0 / 6227020800.0,
};

// 1/(2k+1) for k = 1..10 (atanh series of log m).
inline constexpr double kLogPoly[10] = {
    1.0 / 3.0,  1.0 / 5.0,  1.0 / 7.0,  1.0 / 9.0,  1.0 / 11.0,
    1.0 / 13.0, 1.0 / 15.0, 1.0 / 17.0, 1.0 / 19.0, 1.0 / 21.0,
};

inline double pow2i(std::int64_t k) {
  return std::bit_cast<double>(static_cast<std::uint64_t>(k + 1023) << 52);
}

inline double exp(double x) {
  if (std::isnan(x)) return x;
  if (x > kExpMax) return std::numeric_limits<double>::infinity();
  if (x < kExpMin) return 0.0;
  const double n = std::nearbyint(x * kLog2e);
  const double r = (x - n * kLn2Hi) - n * kLn2Lo;
  double p = kExpPoly[13];
  for (int i = 12; i >= 0; --i) p = p * r + kExpPoly[i];
  const auto ni = static_cast<std::int32_t>(n);
  const std::int32_t n1 = ni >> 1;
  const std::int32_t n2 = ni - n1;
  return (p * pow2i(n1)) * pow2i(n2);
}

inline double log(double x) {
  if (x == 0.0) return -std::numeric_limits<double>::infinity();
  if (!(x > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  if (x == std::numeric_limits<double>::infinity()) return x;
  double scale_e = 0.0;
  if (x < DBL_MIN) {
    x *= kTwo54;
    scale_e = -54.0;
  }
  const auto bits = std::bit_cast<std::uint64_t>(x);
  const std::uint64_t ebits = (bits >> 52) & 0x7ffULL;
  double e = (std::bit_cast<double>(ebits | 0x4330000000000000ULL) - kTwo52) - 1023.0;
  double m = std::bit_cast<double>((bits & 0x000fffffffffffffULL) | 0x3ff0000000000000ULL);
  if (m > kSqrt2) {
    m = m * 0.5;
    e = e + 1.0;
  }
  e = e + scale_e;
  const double f = (m - 1.0) / (m + 1.0);
  const double s = f * f;
  double poly = kLogPoly[9];
  for (int i = 8; i >= 0; --i) poly = poly * s + kLogPoly[i];
  const double two_f = 2.0 * f;
  const double log_m = two_f + (two_f * s) * poly;
  return e * kLn2Hi + (log_m + e * kLn2Lo);
}

/// x^y for x >= 0 (x = 0 gives 0 for y > 0 and +inf for y < 0).
inline double pow(double x, double y) { return exp(y * log(x)); }

}  // namespace stablelab::kernels::ref
