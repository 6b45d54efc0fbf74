// NEON variants: two-lane version of the AVX2 kernel. Built only on aarch64.
#include <arm_neon.h>

#include <cmath>
#include <numbers>

#include "salem/kernels.hpp"

namespace salem::kernels {

namespace {

constexpr double kSin[] = {1.0, -1.0 / 6.0, 1.0 / 120.0, -1.0 / 5040.0, 1.0 / 362880.0,
                           -1.0 / 39916800.0, 1.0 / 6227020800.0, -1.0 / 1307674368000.0,
                           1.0 / 355687428096000.0};
constexpr double kCos[] = {1.0, -1.0 / 2.0, 1.0 / 24.0, -1.0 / 720.0, 1.0 / 40320.0,
                           -1.0 / 3628800.0, 1.0 / 479001600.0, -1.0 / 87178291200.0,
                           1.0 / 20922789888000.0};

struct Lanes {
  float64x2_t re = vdupq_n_f64(0), re_err = vdupq_n_f64(0), im = vdupq_n_f64(0), im_err = vdupq_n_f64(0);
};

inline void two_sum_v(float64x2_t& s, float64x2_t& err, float64x2_t b) {
  const float64x2_t t = vaddq_f64(s, b);
  const float64x2_t z = vsubq_f64(t, s);
  err = vaddq_f64(err, vaddq_f64(vsubq_f64(s, vsubq_f64(t, z)), vsubq_f64(b, z)));
  s = t;
}

// theta_lo is a correction below half an ulp of theta.
inline void accumulate(Lanes& acc, float64x2_t theta, float64x2_t theta_lo, float64x2_t w) {
  const float64x2_t r = vaddq_f64(vsubq_f64(theta, vrndnq_f64(theta)), theta_lo);
  const float64x2_t q = vrndnq_f64(vmulq_n_f64(r, 4.0));
  const float64x2_t f = vfmsq_n_f64(r, q, 0.25);
  const float64x2_t y = vmulq_n_f64(f, 2.0 * std::numbers::pi);
  const float64x2_t z = vmulq_f64(y, y);
  float64x2_t ps = vdupq_n_f64(kSin[8]), pc = vdupq_n_f64(kCos[8]);
  for (int k = 7; k >= 0; --k) {
    ps = vfmaq_f64(vdupq_n_f64(kSin[k]), ps, z);
    pc = vfmaq_f64(vdupq_n_f64(kCos[k]), pc, z);
  }
  ps = vmulq_f64(ps, y);
  const int64x2_t qi = vcvtq_s64_f64(q);
  const uint64x2_t swap = vtstq_s64(qi, vdupq_n_s64(1));
  const uint64x2_t neg_c = vtstq_s64(vaddq_s64(qi, vdupq_n_s64(1)), vdupq_n_s64(2));
  const uint64x2_t neg_s = vtstq_s64(qi, vdupq_n_s64(2));
  const float64x2_t cc = vbslq_f64(swap, ps, pc);
  const float64x2_t ss = vbslq_f64(swap, pc, ps);
  const float64x2_t c = vbslq_f64(neg_c, vnegq_f64(cc), cc);
  const float64x2_t s = vbslq_f64(neg_s, vnegq_f64(ss), ss);
  two_sum_v(acc.re, acc.re_err, vmulq_f64(w, c));
  two_sum_v(acc.im, acc.im_err, vmulq_f64(vnegq_f64(w), s));
}

std::complex<double> reduce(const Lanes& acc) {
  double sr = 0, er = 0, si = 0, ei = 0;
  const double re[2] = {vgetq_lane_f64(acc.re, 0), vgetq_lane_f64(acc.re, 1)};
  const double re_err[2] = {vgetq_lane_f64(acc.re_err, 0), vgetq_lane_f64(acc.re_err, 1)};
  const double im[2] = {vgetq_lane_f64(acc.im, 0), vgetq_lane_f64(acc.im, 1)};
  const double im_err[2] = {vgetq_lane_f64(acc.im_err, 0), vgetq_lane_f64(acc.im_err, 1)};
  for (int l = 0; l < 2; ++l) {
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

std::complex<double> turn_sum_neon(const double* theta, const double* w, std::size_t n) {
  Lanes acc;
  std::size_t j = 0;
  const float64x2_t zero = vdupq_n_f64(0.0);
  for (; j + 2 <= n; j += 2) accumulate(acc, vld1q_f64(theta + j), zero, vld1q_f64(w + j));
  if (j < n) {
    const double tt[2] = {theta[j], 0.0}, tw[2] = {w[j], 0.0};
    accumulate(acc, vld1q_f64(tt), zero, vld1q_f64(tw));
  }
  return reduce(acc);
}

std::complex<double> phase_sum_neon(const double* x, const double* w, std::size_t n, double xi) {
  Lanes acc;
  std::size_t j = 0;
  const float64x2_t vxi = vdupq_n_f64(xi);
  auto step = [&](float64x2_t vx, float64x2_t vw) {
    const float64x2_t t = vmulq_f64(vx, vxi);
    accumulate(acc, t, vnegq_f64(vfmsq_f64(t, vx, vxi)), vw);
  };
  for (; j + 2 <= n; j += 2) step(vld1q_f64(x + j), vld1q_f64(w + j));
  if (j < n) {
    const double tx[2] = {x[j], 0.0}, tw[2] = {w[j], 0.0};
    step(vld1q_f64(tx), vld1q_f64(tw));
  }
  return reduce(acc);
}

}  // namespace salem::kernels
