#include "salem/fft.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <limits>
#include <mutex>

namespace salem::fft {
namespace {

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

template <class T>
struct FftwBuffer {
  T* p;
  explicit FftwBuffer(std::size_t n) : p(static_cast<T*>(fftw_malloc(sizeof(T) * n))) {
    if (p == nullptr) throw Error("fftw_malloc failed");
  }
  ~FftwBuffer() { fftw_free(p); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
};

void destroy(fftw_plan plan) {
  std::lock_guard<std::mutex> lock(plan_mutex());
  fftw_destroy_plan(plan);
}

std::size_t transform_length(std::size_t na, std::size_t nb) { return std::bit_ceil(na + nb - 1); }

}  // namespace

std::vector<cplx> dft(const std::vector<cplx>& in) {
  const int n = static_cast<int>(in.size());
  FftwBuffer<fftw_complex> buf(in.size());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    plan = fftw_plan_dft_1d(n, buf.p, buf.p, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < in.size(); ++i) {
    buf.p[i][0] = in[i].real();
    buf.p[i][1] = in[i].imag();
  }
  fftw_execute(plan);
  destroy(plan);
  std::vector<cplx> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = {buf.p[i][0], buf.p[i][1]};
  return out;
}

std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  if (a.size() * b.size() <= (std::size_t{1} << 16)) {
    std::vector<double> c(out_len, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
    return c;
  }
  const std::size_t n = transform_length(a.size(), b.size());
  const std::size_t nc = n / 2 + 1;
  FftwBuffer<double> ra(n), rb(n);
  FftwBuffer<fftw_complex> ca(nc), cb(nc);
  fftw_plan pa, pb, pc;
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    pa = fftw_plan_dft_r2c_1d(static_cast<int>(n), ra.p, ca.p, FFTW_ESTIMATE);
    pb = fftw_plan_dft_r2c_1d(static_cast<int>(n), rb.p, cb.p, FFTW_ESTIMATE);
    pc = fftw_plan_dft_c2r_1d(static_cast<int>(n), ca.p, ra.p, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < n; ++i) {
    ra.p[i] = i < a.size() ? a[i] : 0.0;
    rb.p[i] = i < b.size() ? b[i] : 0.0;
  }
  fftw_execute(pa);
  fftw_execute(pb);
  for (std::size_t i = 0; i < nc; ++i) {
    const double re = ca.p[i][0] * cb.p[i][0] - ca.p[i][1] * cb.p[i][1];
    const double im = ca.p[i][0] * cb.p[i][1] + ca.p[i][1] * cb.p[i][0];
    ca.p[i][0] = re;
    ca.p[i][1] = im;
  }
  fftw_execute(pc);
  destroy(pa);
  destroy(pb);
  destroy(pc);
  std::vector<double> c(out_len);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < out_len; ++i) c[i] = ra.p[i] * scale;
  return c;
}

double convolve_error(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) return 0.0;
  double na = 0, nb = 0;
  for (double x : a) na += x * x;
  for (double x : b) nb += x * x;
  const auto n = static_cast<double>(transform_length(a.size(), b.size()));
  return 8.0 * std::numeric_limits<double>::epsilon() * std::log2(n) * std::sqrt(na) * std::sqrt(nb);
}

}  // namespace salem::fft
