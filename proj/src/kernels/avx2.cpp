#include <cfloat>
#include <cstring>
#include <limits>

#include "stablelab/kernels/kernels.hpp"
#include "stablelab/kernels/math.hpp"

#if defined(STABLELAB_HAVE_AVX2_TU)
#include <immintrin.h>
#endif

namespace stablelab::kernels::avx2 {

#if defined(STABLELAB_HAVE_AVX2_TU)

namespace {

using V = __m256d;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline V set1(double d) { return _mm256_set1_pd(d); }
inline V zero() { return _mm256_setzero_pd(); }
inline V cmp_lt(V a, V b) { return _mm256_cmp_pd(a, b, _CMP_LT_OQ); }
inline V cmp_le(V a, V b) { return _mm256_cmp_pd(a, b, _CMP_LE_OQ); }
inline V cmp_gt(V a, V b) { return _mm256_cmp_pd(a, b, _CMP_GT_OQ); }
inline V cmp_ge(V a, V b) { return _mm256_cmp_pd(a, b, _CMP_GE_OQ); }
inline V cmp_eq(V a, V b) { return _mm256_cmp_pd(a, b, _CMP_EQ_OQ); }
inline V blend(V if_false, V if_true, V mask) { return _mm256_blendv_pd(if_false, if_true, mask); }

inline V pow2_v(__m128i k) {
  __m256i k64 = _mm256_cvtepi32_epi64(k);
  k64 = _mm256_add_epi64(k64, _mm256_set1_epi64x(1023));
  return _mm256_castsi256_pd(_mm256_slli_epi64(k64, 52));
}

inline V exp_v(V x) {
  const V nan_m = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  const V hi_m = cmp_gt(x, set1(ref::kExpMax));
  const V lo_m = cmp_lt(x, set1(ref::kExpMin));
  const V bad = _mm256_or_pd(nan_m, _mm256_or_pd(hi_m, lo_m));
  const V xc = blend(x, zero(), bad);
  const V n = _mm256_round_pd(_mm256_mul_pd(xc, set1(ref::kLog2e)),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const V r = _mm256_sub_pd(_mm256_sub_pd(xc, _mm256_mul_pd(n, set1(ref::kLn2Hi))),
                            _mm256_mul_pd(n, set1(ref::kLn2Lo)));
  V p = set1(ref::kExpPoly[13]);
  for (int i = 12; i >= 0; --i) p = _mm256_add_pd(_mm256_mul_pd(p, r), set1(ref::kExpPoly[i]));
  const __m128i ni = _mm256_cvtpd_epi32(n);
  const __m128i n1 = _mm_srai_epi32(ni, 1);
  const __m128i n2 = _mm_sub_epi32(ni, n1);
  V res = _mm256_mul_pd(_mm256_mul_pd(p, pow2_v(n1)), pow2_v(n2));
  res = blend(res, set1(kInf), hi_m);
  res = blend(res, zero(), lo_m);
  return blend(res, x, nan_m);
}

inline V log_v(V x) {
  const V pos_m = cmp_gt(x, zero());
  const V zero_m = cmp_eq(x, zero());
  const V inf_m = cmp_eq(x, set1(kInf));
  const V sub_m = _mm256_and_pd(pos_m, cmp_lt(x, set1(DBL_MIN)));
  const V xs = blend(x, _mm256_mul_pd(x, set1(ref::kTwo54)), sub_m);
  const V scale_e = blend(zero(), set1(-54.0), sub_m);
  const __m256i bits = _mm256_castpd_si256(xs);
  const __m256i eb = _mm256_and_si256(_mm256_srli_epi64(bits, 52), _mm256_set1_epi64x(0x7ff));
  V e = _mm256_castsi256_pd(
      _mm256_or_si256(eb, _mm256_set1_epi64x(static_cast<long long>(0x4330000000000000ULL))));
  e = _mm256_sub_pd(_mm256_sub_pd(e, set1(ref::kTwo52)), set1(1023.0));
  V m = _mm256_castsi256_pd(_mm256_or_si256(
      _mm256_and_si256(bits, _mm256_set1_epi64x(0x000fffffffffffffLL)),
      _mm256_set1_epi64x(0x3ff0000000000000LL)));
  const V big = cmp_gt(m, set1(ref::kSqrt2));
  m = blend(m, _mm256_mul_pd(m, set1(0.5)), big);
  e = blend(e, _mm256_add_pd(e, set1(1.0)), big);
  e = _mm256_add_pd(e, scale_e);
  const V one = set1(1.0);
  const V f = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const V s = _mm256_mul_pd(f, f);
  V poly = set1(ref::kLogPoly[9]);
  for (int i = 8; i >= 0; --i) poly = _mm256_add_pd(_mm256_mul_pd(poly, s), set1(ref::kLogPoly[i]));
  const V two_f = _mm256_mul_pd(set1(2.0), f);
  const V log_m = _mm256_add_pd(two_f, _mm256_mul_pd(_mm256_mul_pd(two_f, s), poly));
  V res = _mm256_add_pd(_mm256_mul_pd(e, set1(ref::kLn2Hi)),
                        _mm256_add_pd(log_m, _mm256_mul_pd(e, set1(ref::kLn2Lo))));
  res = blend(set1(kNaN), res, pos_m);
  res = blend(res, set1(-kInf), zero_m);
  return blend(res, set1(kInf), inf_m);
}

inline V pow_v(V x, V y) { return exp_v(_mm256_mul_pd(y, log_v(x))); }

inline V step_v(V x, V g, V c) {
  const V lt = cmp_lt(x, set1(0.5));
  const V pw = pow_v(x, g);
  const V left = _mm256_mul_pd(_mm256_add_pd(_mm256_mul_pd(c, pw), set1(1.0)), x);
  const V right = _mm256_sub_pd(_mm256_mul_pd(set1(2.0), x), set1(1.0));
  return blend(right, left, lt);
}

inline V eval_v(const IntervalObservable& obs, V x) {
  const V sign = set1(-0.0);
  V acc = zero();
  for (const PoleTerm& t : obs.poles) {
    const V d = _mm256_andnot_pd(sign, _mm256_sub_pd(x, set1(t.location)));
    const V core = cmp_le(d, set1(t.core_radius));
    V v = pow_v(d, set1(-t.exponent));
    v = blend(v, set1(t.core_value), core);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(set1(t.coefficient), v));
  }
  return _mm256_add_pd(acc, set1(obs.shift));
}

inline int mask_bits(V m) { return _mm256_movemask_pd(m); }

void sums_group(const LsvSumRequest& r, double* state, double* out_base) {
  const std::size_t k_count = r.checkpoints.size();
  const V g = set1(r.gamma);
  const V c = set1(r.two_pow_gamma);
  const V c_step = set1(r.step_center);
  V x = _mm256_loadu_pd(state);
  alignas(32) double tmp[4];
  auto out = [&](int lane, std::size_t k) -> double& { return out_base[lane * k_count + k]; };

  if (r.mode == SumMode::ambient) {
    for (std::uint64_t b = 0; b < r.burn_in; ++b) x = step_v(x, g, c);
    V acc = zero();
    std::size_t k = 0;
    for (std::uint64_t j = 1; k < k_count; ++j) {
      acc = _mm256_add_pd(acc, _mm256_sub_pd(eval_v(*r.observable, x), c_step));
      x = step_v(x, g, c);
      if (j == r.checkpoints[k]) {
        _mm256_store_pd(tmp, acc);
        for (int l = 0; l < 4; ++l) out(l, k) = tmp[l];
        ++k;
      }
    }
    _mm256_storeu_pd(state, x);
    return;
  }

  const std::uint64_t cap = r.step_cap != 0 ? r.step_cap : 64 * r.checkpoints.back() + 1000000;
  const V half = set1(0.5);
  const V one = set1(1.0);
  const V burn = set1(static_cast<double>(r.burn_in));
  V ret = zero();
  V active = cmp_lt(ret, burn);
  std::uint64_t steps = 0;
  while (mask_bits(active) != 0 && steps < cap) {
    x = blend(x, step_v(x, g, c), active);
    ++steps;
    const V in_y = _mm256_and_pd(cmp_ge(x, half), active);
    ret = _mm256_add_pd(ret, _mm256_and_pd(in_y, one));
    active = cmp_lt(ret, burn);
  }
  const int failed = mask_bits(active);

  std::size_t k[4];
  alignas(32) double next[4];
  alignas(32) double act[4];
  for (int l = 0; l < 4; ++l) {
    if (failed & (1 << l)) {
      for (std::size_t i = 0; i < k_count; ++i) out(l, i) = kNaN;
      k[l] = k_count;
    } else {
      k[l] = 0;
    }
  }
  auto refresh = [&](V& next_v, V& active_v) {
    for (int l = 0; l < 4; ++l) {
      const bool on = k[l] < k_count;
      next[l] = on ? static_cast<double>(r.checkpoints[k[l]]) : kNaN;
      std::uint64_t bits = on ? ~0ULL : 0ULL;
      std::memcpy(&act[l], &bits, sizeof bits);
    }
    next_v = _mm256_load_pd(next);
    active_v = _mm256_load_pd(act);
  };
  V next_v;
  refresh(next_v, active);
  const V c_ret = set1(r.return_center);
  V acc = zero();
  ret = zero();
  steps = 0;
  while (mask_bits(active) != 0) {
    if (steps >= cap) {
      for (int l = 0; l < 4; ++l)
        for (; k[l] < k_count; ++k[l]) out(l, k[l]) = kNaN;
      break;
    }
    acc = _mm256_add_pd(acc, _mm256_sub_pd(eval_v(*r.observable, x), c_step));
    x = blend(x, step_v(x, g, c), active);
    ++steps;
    const V in_y = _mm256_and_pd(cmp_ge(x, half), active);
    if (mask_bits(in_y) == 0) continue;
    acc = _mm256_sub_pd(acc, _mm256_and_pd(in_y, c_ret));
    ret = _mm256_add_pd(ret, _mm256_and_pd(in_y, one));
    const int hit = mask_bits(_mm256_and_pd(cmp_eq(ret, next_v), in_y));
    if (hit == 0) continue;
    _mm256_store_pd(tmp, acc);
    for (int l = 0; l < 4; ++l) {
      if (hit & (1 << l)) {
        out(l, k[l]) = tmp[l];
        ++k[l];
      }
    }
    refresh(next_v, active);
  }
  _mm256_storeu_pd(state, x);
}

void returns_group(double gamma, double c2g, double* state, std::uint64_t count, std::uint64_t cap,
                   std::uint64_t* times, double* points) {
  const V g = set1(gamma);
  const V c = set1(c2g);
  const V half = set1(0.5);
  const V one = set1(1.0);
  const V cap_v = set1(static_cast<double>(cap));
  V x = _mm256_loadu_pd(state);
  V n = zero();
  std::uint64_t done[4] = {0, 0, 0, 0};
  alignas(32) double act[4];
  alignas(32) double xs[4];
  alignas(32) double ns[4];
  auto refresh = [&]() {
    for (int l = 0; l < 4; ++l) {
      std::uint64_t bits = done[l] < count ? ~0ULL : 0ULL;
      std::memcpy(&act[l], &bits, sizeof bits);
    }
    return _mm256_load_pd(act);
  };
  V active = refresh();
  while (mask_bits(active) != 0) {
    x = blend(x, step_v(x, g, c), active);
    n = _mm256_add_pd(n, _mm256_and_pd(active, one));
    const V ret_m = _mm256_and_pd(cmp_ge(x, half), active);
    const V fail_m = _mm256_andnot_pd(ret_m, _mm256_and_pd(active, cmp_ge(n, cap_v)));
    const int rm = mask_bits(ret_m);
    const int fm = mask_bits(fail_m);
    if ((rm | fm) == 0) continue;
    _mm256_store_pd(xs, x);
    _mm256_store_pd(ns, n);
    for (int l = 0; l < 4; ++l) {
      const std::size_t base = static_cast<std::size_t>(l) * count;
      if (rm & (1 << l)) {
        if (times) times[base + done[l]] = static_cast<std::uint64_t>(ns[l]);
        if (points) points[base + done[l]] = xs[l];
        ++done[l];
      } else if (fm & (1 << l)) {
        for (; done[l] < count; ++done[l]) {
          if (times) times[base + done[l]] = 0;
          if (points) points[base + done[l]] = kNaN;
        }
      }
    }
    n = blend(n, zero(), ret_m);
    active = refresh();
  }
  _mm256_storeu_pd(state, x);
}

}  // namespace

bool available() { return __builtin_cpu_supports("avx2"); }

void lsv_sums(const LsvSumRequest& r, std::span<double> states, std::span<double> sums) {
  const std::size_t k_count = r.checkpoints.size();
  const std::size_t groups = states.size() / 4;
  for (std::size_t gi = 0; gi < groups; ++gi)
    sums_group(r, states.data() + 4 * gi, sums.data() + 4 * gi * k_count);
  const std::size_t rest = 4 * groups;
  scalar::lsv_sums(r, states.subspan(rest), sums.subspan(rest * k_count));
}

void lsv_returns(double gamma, double two_pow_gamma, std::span<double> states, std::uint64_t count,
                 std::uint64_t step_cap, std::span<std::uint64_t> return_times,
                 std::span<double> return_points) {
  const std::uint64_t cap = step_cap == 0 ? 1000000000ULL : step_cap;
  const std::size_t groups = states.size() / 4;
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const std::size_t off = 4 * gi * count;
    returns_group(gamma, two_pow_gamma, states.data() + 4 * gi, count, cap,
                  return_times.empty() ? nullptr : return_times.data() + off,
                  return_points.empty() ? nullptr : return_points.data() + off);
  }
  const std::size_t rest = 4 * groups;
  scalar::lsv_returns(gamma, two_pow_gamma, states.subspan(rest), count, step_cap,
                      return_times.empty() ? return_times : return_times.subspan(rest * count),
                      return_points.empty() ? return_points : return_points.subspan(rest * count));
}

void lsv_iterate(double gamma, double two_pow_gamma, std::span<double> states, std::uint64_t steps) {
  const V g = set1(gamma);
  const V c = set1(two_pow_gamma);
  const std::size_t n4 = states.size() & ~std::size_t{3};
  for (std::size_t i = 0; i < n4; i += 4) {
    V x = _mm256_loadu_pd(states.data() + i);
    for (std::uint64_t s = 0; s < steps; ++s) x = step_v(x, g, c);
    _mm256_storeu_pd(states.data() + i, x);
  }
  scalar::lsv_iterate(gamma, two_pow_gamma, states.subspan(n4), steps);
}

void eval_interval(const IntervalObservable& observable, std::span<const double> xs,
                   std::span<double> out) {
  const std::size_t n4 = xs.size() & ~std::size_t{3};
  for (std::size_t i = 0; i < n4; i += 4)
    _mm256_storeu_pd(out.data() + i, eval_v(observable, _mm256_loadu_pd(xs.data() + i)));
  scalar::eval_interval(observable, xs.subspan(n4), out.subspan(n4));
}

void pow_batch(std::span<const double> xs, double exponent, std::span<double> out) {
  const V y = set1(exponent);
  const std::size_t n4 = xs.size() & ~std::size_t{3};
  for (std::size_t i = 0; i < n4; i += 4)
    _mm256_storeu_pd(out.data() + i, pow_v(_mm256_loadu_pd(xs.data() + i), y));
  scalar::pow_batch(xs.subspan(n4), exponent, out.subspan(n4));
}

void lagged_dot(const double* v, std::size_t count, std::span<double> out) {
  const std::size_t count4 = count & ~std::size_t{3};
  alignas(32) double a[4];
  std::size_t j = 1;
  for (; j + 3 <= out.size(); j += 4) {
    V a0 = zero(), a1 = zero(), a2 = zero(), a3 = zero();
    for (std::size_t i = 0; i < count4; i += 4) {
      const V u = _mm256_loadu_pd(v + i);
      a0 = _mm256_add_pd(a0, _mm256_mul_pd(u, _mm256_loadu_pd(v + i + j)));
      a1 = _mm256_add_pd(a1, _mm256_mul_pd(u, _mm256_loadu_pd(v + i + j + 1)));
      a2 = _mm256_add_pd(a2, _mm256_mul_pd(u, _mm256_loadu_pd(v + i + j + 2)));
      a3 = _mm256_add_pd(a3, _mm256_mul_pd(u, _mm256_loadu_pd(v + i + j + 3)));
    }
    const V acc[4] = {a0, a1, a2, a3};
    for (std::size_t q = 0; q < 4; ++q) {
      _mm256_store_pd(a, acc[q]);
      const std::size_t lag = j + q;
      for (std::size_t i = count4; i < count; ++i) a[i - count4] = a[i - count4] + v[i] * v[i + lag];
      out[lag - 1] = out[lag - 1] + ((a[0] + a[1]) + (a[2] + a[3]));
    }
  }
  for (; j <= out.size(); ++j) {
    V acc = zero();
    for (std::size_t i = 0; i < count4; i += 4)
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(v + i), _mm256_loadu_pd(v + i + j)));
    _mm256_store_pd(a, acc);
    for (std::size_t i = count4; i < count; ++i) a[i - count4] = a[i - count4] + v[i] * v[i + j];
    out[j - 1] = out[j - 1] + ((a[0] + a[1]) + (a[2] + a[3]));
  }
}

double sum_log_ratio(std::span<const double> xs, double denom) {
  const std::size_t n = xs.size();
  const std::size_t n4 = n & ~std::size_t{3};
  const V d = set1(denom);
  V acc = zero();
  for (std::size_t i = 0; i < n4; i += 4)
    acc = _mm256_add_pd(acc, log_v(_mm256_div_pd(_mm256_loadu_pd(xs.data() + i), d)));
  alignas(32) double a[4];
  _mm256_store_pd(a, acc);
  for (std::size_t i = n4; i < n; ++i) a[i - n4] = a[i - n4] + ref::log(xs[i] / denom);
  return (a[0] + a[1]) + (a[2] + a[3]);
}

#else  // no AVX2 translation unit: forward to the reference path

bool available() { return false; }

void lsv_sums(const LsvSumRequest& r, std::span<double> states, std::span<double> sums) {
  scalar::lsv_sums(r, states, sums);
}
void lsv_returns(double gamma, double two_pow_gamma, std::span<double> states, std::uint64_t count,
                 std::uint64_t step_cap, std::span<std::uint64_t> return_times,
                 std::span<double> return_points) {
  scalar::lsv_returns(gamma, two_pow_gamma, states, count, step_cap, return_times, return_points);
}
void lsv_iterate(double gamma, double two_pow_gamma, std::span<double> states, std::uint64_t steps) {
  scalar::lsv_iterate(gamma, two_pow_gamma, states, steps);
}
void eval_interval(const IntervalObservable& observable, std::span<const double> xs,
                   std::span<double> out) {
  scalar::eval_interval(observable, xs, out);
}
void pow_batch(std::span<const double> xs, double exponent, std::span<double> out) {
  scalar::pow_batch(xs, exponent, out);
}
void lagged_dot(const double* v, std::size_t count, std::span<double> out) {
  scalar::lagged_dot(v, count, out);
}
double sum_log_ratio(std::span<const double> xs, double denom) {
  return scalar::sum_log_ratio(xs, denom);
}

#endif

}  // namespace stablelab::kernels::avx2
