#include "salem/bump.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "salem/kernels.hpp"
#include "salem/parallel.hpp"

namespace salem::bump {
namespace {

constexpr double a = kVarphiHalfWidth;
constexpr int kTableIntervals = 4096;
constexpr int kStencil = 8;
constexpr double kHatMax = 400.0;
constexpr double kHatStep = 1.0 / 128;
constexpr int kHatNodes = 1024;

double raw(double x) {
  const double t = x / a;
  if (!(std::abs(t) < 1.0)) return 0.0;
  return std::exp(-1.0 / (1.0 - t * t));
}

double raw_conv(double x, int n) {
  const double lo = std::max(-a, x - a);
  const double hi = std::min(a, x + a);
  if (hi <= lo) return 0.0;
  const double h = (hi - lo) / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = lo + (i + 0.5) * h;
    s += raw(y) * raw(x - y);
  }
  return s * h;
}

double c2() {
  static const double v = 0.5 / raw_conv(0.5, 4096);
  return v;
}

// Lagrange interpolation on a uniform grid with values tab[i] at i*step, using
// an 8-point stencil; idx maps a grid index to a stored value.
template <class Value>
double lagrange(double x, double step, Value value) {
  const double u = x / step;
  const long base = static_cast<long>(std::floor(u)) - kStencil / 2 + 1;
  double s = 0.0;
  for (int j = 0; j < kStencil; ++j) {
    double l = 1.0;
    for (int k = 0; k < kStencil; ++k)
      if (k != j) l *= (u - static_cast<double>(base + k)) / static_cast<double>(j - k);
    s += l * value(base + j);
  }
  return s;
}

struct Phi0Table {
  std::vector<double> v;
  double step = kPhi0HalfWidth / kTableIntervals;
  Phi0Table() : v(kTableIntervals + 1) {
    parallel_for(v.size(), [&](std::size_t i) { v[i] = phi0_direct(static_cast<double>(i) * step); });
  }
  double at(long i) const {
    const long j = std::labs(i);
    return j > kTableIntervals ? 0.0 : v[static_cast<std::size_t>(j)];
  }
};

struct HatNodes {
  std::vector<double> x, w;
  HatNodes() : x(kHatNodes), w(kHatNodes) {
    const double h = 2 * a / kHatNodes;
    for (int i = 0; i < kHatNodes; ++i) {
      x[i] = -a + (i + 0.5) * h;
      w[i] = h * std::sqrt(c2()) * raw(x[i]);
    }
  }
};

const HatNodes& hat_nodes() {
  static const HatNodes n;
  return n;
}

struct HatTable {
  std::vector<double> v;
  HatTable() : v(static_cast<std::size_t>(kHatMax / kHatStep) + 1 + kStencil) {
    parallel_for(v.size(), [&](std::size_t i) { v[i] = varphi_hat(static_cast<double>(i) * kHatStep); });
  }
  double at(long i) const {
    const auto j = static_cast<std::size_t>(std::labs(i));
    return j < v.size() ? v[j] : 0.0;
  }
};

}  // namespace

double scale_squared() { return c2(); }

double varphi(double x) { return std::sqrt(c2()) * raw(x); }

double phi0_direct(double x, int nodes) { return c2() * raw_conv(std::abs(x), nodes); }

double phi0(double x) {
  static const Phi0Table table;
  x = std::abs(x);
  if (x >= kPhi0HalfWidth) return 0.0;
  return std::max(0.0, lagrange(x, table.step, [&](long i) { return table.at(i); }));
}

double varphi_hat(double xi) {
  const auto& n = hat_nodes();
  return kernels::phase_sum(n.x.data(), n.w.data(), n.x.size(), xi).real();
}

double phi0_hat_direct(double xi) {
  const double v = varphi_hat(xi);
  return v * v;
}

double phi0_hat(double xi) {
  static const HatTable table;
  xi = std::abs(xi);
  if (xi > kHatMax) return 0.0;
  const double v = lagrange(xi, kHatStep, [&](long i) { return table.at(i); });
  return v * v;
}

}  // namespace salem::bump
