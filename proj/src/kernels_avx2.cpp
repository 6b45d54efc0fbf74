// AVX2/FMA variants. Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include <cmath>
#include <numbers>

#include "salem/kernels.hpp"

namespace salem::kernels {

namespace {

// Taylor coefficients in z = y^2 for |y| <= pi/4; truncation error below 1e-18.
constexpr double kSin[] = {1.0,
                           -1.0 / 6.0,
                           1.0 / 120.0,
                           -1.0 / 5040.0,
                           1.0 / 362880.0,
                           -1.0 / 39916800.0,
                           1.0 / 6227020800.0,
                           -1.0 / 1307674368000.0,
                           1.0 / 355687428096000.0};
constexpr double kCos[] = {1.0,
                           -1.0 / 2.0,
                           1.0 / 24.0,
                           -1.0 / 720.0,
                           1.0 / 40320.0,
                           -1.0 / 3628800.0,
                           1.0 / 479001600.0,
                           -1.0 / 87178291200.0,
                           1.0 / 20922789888000.0};

struct Lanes {
  __m256d re = _mm256_setzero_pd();
  __m256d re_err = _mm256_setzero_pd();
  __m256d im = _mm256_setzero_pd();
  __m256d im_err = _mm256_setzero_pd();
};

inline void two_sum_v(__m256d& s, __m256d& err, __m256d b) {
  const __m256d t = _mm256_add_pd(s, b);
  const __m256d z = _mm256_sub_pd(t, s);
  const __m256d e = _mm256_add_pd(_mm256_sub_pd(s, _mm256_sub_pd(t, z)), _mm256_sub_pd(b, z));
  s = t;
  err = _mm256_add_pd(err, e);
}

// cos and sin of 2*pi*theta for arbitrary theta.
// theta_lo is a correction below half an ulp of theta_hi.
inline void sincos_turns(__m256d theta, __m256d theta_lo, __m256d& c_out, __m256d& s_out) {
  const __m256d r = _mm256_add_pd(
      _mm256_sub_pd(theta, _mm256_round_pd(theta, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC)), theta_lo);
  const __m256d q = _mm256_round_pd(_mm256_mul_pd(r, _mm256_set1_pd(4.0)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m256d f = _mm256_fnmadd_pd(q, _mm256_set1_pd(0.25), r);
  const __m256d y = _mm256_mul_pd(f, _mm256_set1_pd(2.0 * std::numbers::pi));
  const __m256d z = _mm256_mul_pd(y, y);

  __m256d ps = _mm256_set1_pd(kSin[8]);
  __m256d pc = _mm256_set1_pd(kCos[8]);
  for (int k = 7; k >= 0; --k) {
    ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(kSin[k]));
    pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(kCos[k]));
  }
  ps = _mm256_mul_pd(ps, y);

  const __m256i qi = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(q));
  const __m256i one = _mm256_set1_epi64x(1);
  const __m256i two = _mm256_set1_epi64x(2);
  const __m256d swap = _mm256_castsi256_pd(_mm256_cmpeq_epi64(_mm256_and_si256(qi, one), one));
  const __m256d neg_c = _mm256_castsi256_pd(
      _mm256_cmpeq_epi64(_mm256_and_si256(_mm256_add_epi64(qi, one), two), two));
  const __m256d neg_s = _mm256_castsi256_pd(_mm256_cmpeq_epi64(_mm256_and_si256(qi, two), two));
  const __m256d sign = _mm256_set1_pd(-0.0);

  const __m256d cc = _mm256_blendv_pd(pc, ps, swap);
  const __m256d ss = _mm256_blendv_pd(ps, pc, swap);
  c_out = _mm256_xor_pd(cc, _mm256_and_pd(neg_c, sign));
  s_out = _mm256_xor_pd(ss, _mm256_and_pd(neg_s, sign));
}

inline void accumulate(Lanes& acc, __m256d theta, __m256d theta_lo, __m256d w) {
  __m256d c, s;
  sincos_turns(theta, theta_lo, c, s);
  two_sum_v(acc.re, acc.re_err, _mm256_mul_pd(w, c));
  two_sum_v(acc.im, acc.im_err, _mm256_mul_pd(_mm256_xor_pd(w, _mm256_set1_pd(-0.0)), s));
}

std::complex<double> reduce(const Lanes& acc) {
  alignas(32) double re[4], re_err[4], im[4], im_err[4];
  _mm256_store_pd(re, acc.re);
  _mm256_store_pd(re_err, acc.re_err);
  _mm256_store_pd(im, acc.im);
  _mm256_store_pd(im_err, acc.im_err);
  double sr = 0.0, er = 0.0, si = 0.0, ei = 0.0;
  for (int l = 0; l < 4; ++l) {
    double s, e;
    two_sum(sr, re[l], s, e);
    sr = s;
    er += e + re_err[l];
    two_sum(si, im[l], s, e);
    si = s;
    ei += e + im_err[l];
  }
  return {sr + er, si + ei};
}

}  // namespace

std::complex<double> phase_sum_avx2(const double* x, const double* w, std::size_t n, double xi) {
  Lanes acc;
  const __m256d vxi = _mm256_set1_pd(xi);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d vx = _mm256_loadu_pd(x + j);
    const __m256d t = _mm256_mul_pd(vx, vxi);
    accumulate(acc, t, _mm256_fmsub_pd(vx, vxi, t), _mm256_loadu_pd(w + j));
  }
  if (j < n) {
    alignas(32) double tx[4] = {0, 0, 0, 0}, tw[4] = {0, 0, 0, 0};
    for (std::size_t l = 0; j + l < n; ++l) {
      tx[l] = x[j + l];
      tw[l] = w[j + l];
    }
    const __m256d vx = _mm256_load_pd(tx);
    const __m256d t = _mm256_mul_pd(vx, vxi);
    accumulate(acc, t, _mm256_fmsub_pd(vx, vxi, t), _mm256_load_pd(tw));
  }
  return reduce(acc);
}

std::complex<double> turn_sum_avx2(const double* theta, const double* w, std::size_t n) {
  Lanes acc;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    accumulate(acc, _mm256_loadu_pd(theta + j), _mm256_setzero_pd(), _mm256_loadu_pd(w + j));
  }
  if (j < n) {
    alignas(32) double tt[4] = {0, 0, 0, 0}, tw[4] = {0, 0, 0, 0};
    for (std::size_t l = 0; j + l < n; ++l) {
      tt[l] = theta[j + l];
      tw[l] = w[j + l];
    }
    accumulate(acc, _mm256_load_pd(tt), _mm256_setzero_pd(), _mm256_load_pd(tw));
  }
  return reduce(acc);
}

}  // namespace salem::kernels
