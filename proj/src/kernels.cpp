#include "salem/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <numbers>
#include <stdexcept>

namespace salem::kernels {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Accumulator {
  double re = 0.0, re_err = 0.0, im = 0.0, im_err = 0.0;
  void add(double a, double b) {
    double s, e;
    two_sum(re, a, s, e);
    re = s;
    re_err += e;
    two_sum(im, b, s, e);
    im = s;
    im_err += e;
  }
  std::complex<double> value() const { return {re + re_err, im + im_err}; }
};

bool cpu_has_avx2() {
#if defined(SALEM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool cpu_has_neon() {
#if defined(SALEM_HAVE_NEON)
  return true;
#else
  return false;
#endif
}

Isa initial_isa() {
  if (const char* env = std::getenv("SALEM_ISA")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
  }
  return detected_isa();
}

std::atomic<Isa>& isa_slot() {
  static std::atomic<Isa> slot{initial_isa()};
  return slot;
}

}  // namespace

std::complex<double> cis_turns(double theta) {
  const double r = theta - std::nearbyint(theta);
  const double a = kTwoPi * r;
  return {std::cos(a), -std::sin(a)};
}

std::complex<double> phase_sum_scalar(const double* x, const double* w, std::size_t n, double xi) {
  Accumulator acc;
  for (std::size_t j = 0; j < n; ++j) {
    const double theta = x[j] * xi;
    const double lo = std::fma(x[j], xi, -theta);  // theta + lo == x[j] * xi exactly
    const double r = (theta - std::nearbyint(theta)) + lo;
    const double a = kTwoPi * r;
    acc.add(w[j] * std::cos(a), -w[j] * std::sin(a));
  }
  return acc.value();
}

std::complex<double> turn_sum_scalar(const double* theta, const double* w, std::size_t n) {
  Accumulator acc;
  for (std::size_t j = 0; j < n; ++j) {
    const double r = theta[j] - std::nearbyint(theta[j]);
    const double a = kTwoPi * r;
    acc.add(w[j] * std::cos(a), -w[j] * std::sin(a));
  }
  return acc.value();
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2: return cpu_has_avx2();
    case Isa::neon: return cpu_has_neon();
  }
  return false;
}

Isa detected_isa() {
  if (cpu_has_avx2()) return Isa::avx2;
  if (cpu_has_neon()) return Isa::neon;
  return Isa::scalar;
}

Isa active_isa() { return isa_slot().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (!isa_available(isa)) {
    throw std::invalid_argument(std::string("kernel ISA not available: ") + isa_name(isa));
  }
  isa_slot().store(isa, std::memory_order_relaxed);
}

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

std::complex<double> phase_sum(const double* x, const double* w, std::size_t n, double xi) {
  switch (active_isa()) {
#if defined(SALEM_HAVE_AVX2)
    case Isa::avx2: return phase_sum_avx2(x, w, n, xi);
#endif
#if defined(SALEM_HAVE_NEON)
    case Isa::neon: return phase_sum_neon(x, w, n, xi);
#endif
    default: return phase_sum_scalar(x, w, n, xi);
  }
}

std::complex<double> turn_sum(const double* theta, const double* w, std::size_t n) {
  switch (active_isa()) {
#if defined(SALEM_HAVE_AVX2)
    case Isa::avx2: return turn_sum_avx2(theta, w, n);
#endif
#if defined(SALEM_HAVE_NEON)
    case Isa::neon: return turn_sum_neon(theta, w, n);
#endif
    default: return turn_sum_scalar(theta, w, n);
  }
}

}  // namespace salem::kernels
