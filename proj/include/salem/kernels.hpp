#pragma once
// Trigonometric sum kernels: scalar reference plus SIMD variants selected at runtime.

#include <complex>
#include <cstddef>

namespace salem::kernels {

enum class Isa { scalar, avx2, neon };

// Sum_j w[j] * exp(-2*pi*i * x[j] * xi).
// x[j] * xi is formed exactly as a double plus an FMA residual and reduced to
// fractional turns before any trigonometry. Both components accumulate
// through TwoSum error-free transforms.
using PhaseSumFn = std::complex<double> (*)(const double* x, const double* w, std::size_t n, double xi);

// Sum_j w[j] * exp(-2*pi*i * theta[j]) for precomputed phases in turns.
using TurnSumFn = std::complex<double> (*)(const double* theta, const double* w, std::size_t n);

std::complex<double> phase_sum_scalar(const double* x, const double* w, std::size_t n, double xi);
std::complex<double> turn_sum_scalar(const double* theta, const double* w, std::size_t n);

#if defined(SALEM_HAVE_AVX2)
std::complex<double> phase_sum_avx2(const double* x, const double* w, std::size_t n, double xi);
std::complex<double> turn_sum_avx2(const double* theta, const double* w, std::size_t n);
#endif
#if defined(SALEM_HAVE_NEON)
std::complex<double> phase_sum_neon(const double* x, const double* w, std::size_t n, double xi);
std::complex<double> turn_sum_neon(const double* theta, const double* w, std::size_t n);
#endif

// Best ISA supported by both the build and the running CPU.
Isa detected_isa();
// ISA used by the dispatching entry points. SALEM_ISA=scalar in the
// environment pins the scalar path at first use.
Isa active_isa();
// Throws std::invalid_argument if the ISA is not available.
void set_isa(Isa isa);
bool isa_available(Isa isa);
const char* isa_name(Isa isa);

std::complex<double> phase_sum(const double* x, const double* w, std::size_t n, double xi);
std::complex<double> turn_sum(const double* theta, const double* w, std::size_t n);

// exp(-2*pi*i*theta) with theta reduced exactly modulo 1.
std::complex<double> cis_turns(double theta);

// Error-free sum: s + e == a + b exactly.
inline void two_sum(double a, double b, double& s, double& e) {
  s = a + b;
  const double z = s - a;
  e = (a - (s - z)) + (b - z);
}

}  // namespace salem::kernels
