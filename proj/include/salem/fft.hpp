#pragma once
// Thin FFTW wrappers. Planning is serialized; execution is reentrant.

#include <vector>

#include "salem/measure.hpp"

namespace salem::fft {

// out[k] = sum_n in[n] e^{-2 pi i k n / N}.
std::vector<cplx> dft(const std::vector<cplx>& in);

// Full linear convolution c[m] = sum_j a[j] b[m - j], length |a| + |b| - 1.
std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b);

// Estimate of the max-norm rounding error of convolve(a, b):
// 8 eps log2(N) ||a||_2 ||b||_2 for the transform length N.
double convolve_error(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace salem::fft
