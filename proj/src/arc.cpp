#include "salem/arc.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numbers>

#include "salem/parallel.hpp"
#include "salem/rng.hpp"

namespace salem::arc {
namespace {

constexpr double two_pi = 2 * std::numbers::pi;
constexpr std::size_t kPanelBudget = 10'000'000;
constexpr int kMaxDepth = 40;

// Phase in cycles.
double phase(double x, double xi1, double xi2) { return x * xi1 + std::sqrt(1 - x * x) * xi2; }

cplx integrand(double x, double xi1, double xi2) {
  const double t = phase(x, xi1, xi2);
  const double turn = t - std::nearbyint(t);
  return {std::cos(two_pi * turn), -std::sin(two_pi * turn)};
}

template <int N>
cplx gauss_panel(double a, double b, double xi1, double xi2) {
  using GL = boost::math::quadrature::gauss<double, N>;
  const auto& x = GL::abscissa();
  const auto& w = GL::weights();
  const double mid = (a + b) / 2, half = (b - a) / 2;
  cplx s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) {
      s += w[i] * integrand(mid, xi1, xi2);
      continue;
    }
    s += w[i] * (integrand(mid - half * x[i], xi1, xi2) + integrand(mid + half * x[i], xi1, xi2));
  }
  return s * half;
}

struct Accumulator {
  double xi1, xi2, tol;
  cplx value = 0;
  double error = 0;
  std::size_t panels = 0;

  void panel(double a, double b, int depth) {
    const cplx lo = gauss_panel<15>(a, b, xi1, xi2);
    const cplx hi = gauss_panel<30>(a, b, xi1, xi2);
    const double diff = std::abs(hi - lo);
    const double m = (a + b) / 2;
    const double curve = std::abs(phase(a, xi1, xi2) - 2 * phase(m, xi1, xi2) + phase(b, xi1, xi2));
    if (depth >= kMaxDepth || (diff <= tol * (b - a) && curve <= 1.0)) {
      value += hi;
      error += diff;
      if (++panels > kPanelBudget) throw Error("arc quadrature exceeded its panel budget");
      return;
    }
    panel(a, m, depth + 1);
    panel(m, b, depth + 1);
  }
};

}  // namespace

std::optional<double> stationary_point(double xi1, double xi2) {
  if (xi2 == 0.0) return std::nullopt;
  const double x0 = xi1 * (xi2 > 0 ? 1.0 : -1.0) / std::hypot(xi1, xi2);
  if (std::abs(x0) > 0.5) return std::nullopt;
  return x0;
}

ArcEvaluation arc_fourier(double xi1, double xi2, double tol) {
  if (!(tol >= 1e-12)) throw Error("arc_fourier needs tol >= 1e-12");
  if (!(std::hypot(xi1, xi2) <= kMaxFrequency)) throw Error("arc_fourier budget exceeded: |xi| > 1e6");
  ArcEvaluation e;
  e.xi1 = xi1;
  e.xi2 = xi2;
  if (xi1 == 0.0 && xi2 == 0.0) {
    e.value = 1.0;
    e.panels = 1;
    return e;
  }
  std::vector<double> cuts{-0.5};
  if (const auto x0 = stationary_point(xi1, xi2); x0 && std::abs(*x0) < 0.5) cuts.push_back(*x0);
  cuts.push_back(0.5);
  // sup |phase'| on [-1/2, 1/2] in cycles per unit length.
  const double rate = std::abs(xi1) + std::abs(xi2) / std::sqrt(3.0);
  Accumulator acc{xi1, xi2, tol};
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double a = cuts[c], b = cuts[c + 1];
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil((b - a) * rate)));
    for (std::size_t k = 0; k < n; ++k)
      acc.panel(a + (b - a) * static_cast<double>(k) / static_cast<double>(n),
                a + (b - a) * static_cast<double>(k + 1) / static_cast<double>(n), 0);
  }
  if (acc.error > tol) throw Error("arc quadrature could not certify tol at xi = (" + std::to_string(xi1) + ", " +
                                   std::to_string(xi2) + ")");
  e.value = acc.value;
  e.error_bound = acc.error;
  e.panels = acc.panels;
  return e;
}

DecayScan decay_scan(double R_max, int samples, std::uint64_t seed, int directions, double tol) {
  if (!(R_max > 2 && R_max <= 1e5)) throw Error("decay_scan needs 2 < R_max <= 1e5");
  if (samples < 4 || directions < 1) throw Error("decay_scan needs samples >= 4 and directions >= 1");
  DecayScan s;
  s.samples = samples;
  s.seed = seed;
  const Stream root(seed);
  const auto D = static_cast<std::size_t>(directions);
  const auto S = static_cast<std::size_t>(samples);
  std::vector<double> angle(D), radius(D * S);
  for (std::size_t d = 0; d < D; ++d) {
    Stream rng = root.split("direction", d);
    angle[d] = std::numbers::pi * (static_cast<double>(d) + rng.uniform()) / static_cast<double>(D);
    for (std::size_t j = 0; j < S; ++j)
      radius[d * S + j] = std::exp(std::log(R_max) * (static_cast<double>(j) + rng.uniform()) / static_cast<double>(S));
  }
  std::vector<double> mag(D * S);
  parallel_for(D * S, [&](std::size_t t) {
    const double r = radius[t], th = angle[t / S];
    mag[t] = std::abs(arc_fourier(r * std::cos(th), r * std::sin(th), tol).value);
  });

  s.direction_angles = angle;
  s.direction_sup.assign(D, 0.0);
  const int m_lo = 0;
  const int m_hi = static_cast<int>(std::floor(std::log2(R_max))) - 1;
  std::vector<double> env(static_cast<std::size_t>(m_hi - m_lo + 1), 0.0);
  for (std::size_t t = 0; t < D * S; ++t) {
    const double r = radius[t];
    const double scaled = std::sqrt(r) * mag[t];
    const std::size_t d = t / S;
    s.direction_sup[d] = std::max(s.direction_sup[d], scaled);
    if (scaled > s.sup_scaled) {
      s.sup_scaled = scaled;
      s.witness_xi1 = r * std::cos(angle[d]);
      s.witness_xi2 = r * std::sin(angle[d]);
    }
    if (r <= R_max / 2) s.sup_scaled_half = std::max(s.sup_scaled_half, scaled);
    const int m = static_cast<int>(std::floor(std::log2(r)));
    if (m >= m_lo && m <= m_hi) env[static_cast<std::size_t>(m - m_lo)] = std::max(env[static_cast<std::size_t>(m - m_lo)], mag[t]);
  }
  s.relative_change = (s.sup_scaled - s.sup_scaled_half) / s.sup_scaled;
  s.stabilized = s.relative_change < 0.02;
  for (int m = m_lo; m <= m_hi; ++m) s.profile.bands.push_back({m, env[static_cast<std::size_t>(m - m_lo)]});
  s.profile.source = "arc";
  if (s.profile.bands.size() >= 6)
    fit_decay_exponent(s.profile, 2);
  else
    s.profile.degenerate = true;
  return s;
}

GramReport gram_onb(int K, double tol) {
  if (K < 0 || K > 512) throw Error("gram_onb needs 0 <= K <= 512");
  GramReport g;
  g.K = K;
  const auto n = static_cast<std::size_t>(2 * K + 1);
  g.row.assign(n, 0.0);
  parallel_for(n, [&](std::size_t m) { g.row[m] = std::abs(arc_fourier(static_cast<double>(m), 0.0, tol).value); });
  for (std::size_t m = 1; m < n; ++m) {
    if (g.row[m] > g.max_offdiag) {
      g.max_offdiag = g.row[m];
      g.witness_m = static_cast<int>(m);
    }
  }
  return g;
}

}  // namespace salem::arc
