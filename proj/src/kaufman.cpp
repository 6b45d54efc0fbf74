#include "salem/kaufman.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "salem/bump.hpp"
#include "salem/fft.hpp"
#include "salem/parallel.hpp"
#include "salem/rng.hpp"

namespace salem::kaufman {
namespace {

constexpr double pi = std::numbers::pi;
constexpr double inf = std::numeric_limits<double>::infinity();
// phi0_hat is tabulated on [0, 400] and zero beyond.
constexpr double kHatCutoff = 400.0;
constexpr int kGridPoints = 1 << 16;
constexpr double kHatGridMax = 1e4;
constexpr double kHatGridStep = 1.0 / 8;
// Earlier-level radius used by positivity_check when the budget is infeasible.
constexpr std::int64_t kLowerBoundRadius = std::int64_t{1} << 19;

// sin x / x.
double sinc(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

// (x cos x - sin x) / x^2, by its series near 0 where the direct form cancels.
double rfun(double x) {
  if (std::abs(x) < 0.1) {
    const double x2 = x * x;
    return x * (-1.0 / 3 + x2 * (1.0 / 30 + x2 * (-1.0 / 840 + x2 / 45360)));
  }
  return (x * std::cos(x) - std::sin(x)) / (x * x);
}

// Nodes and weights of an N-point Gauss-Legendre rule mapped to [a, b].
template <int N>
void append_gauss(double a, double b, std::vector<double>& y, std::vector<double>& w) {
  using GL = boost::math::quadrature::gauss<double, N>;
  const auto& x = GL::abscissa();
  const auto& wt = GL::weights();
  const double mid = (a + b) / 2, half = (b - a) / 2;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) {
      y.push_back(mid);
      w.push_back(half * wt[i]);
      continue;
    }
    y.push_back(mid - half * x[i]);
    w.push_back(half * wt[i]);
    y.push_back(mid + half * x[i]);
    w.push_back(half * wt[i]);
  }
}

// int_{xi0}^inf of phi_hat_tail_bound, for xi0 > kHatCutoff.
double tail_integral(const AuxPhi& phi, double xi0) {
  if (!(xi0 > kHatCutoff)) return inf;
  const double x0 = pi * xi0 / 4;
  const double c = std::pow(4.0 / pi, 4);
  return phi.A2 / 4 * std::pow(2 + 3 / x0, 2) * c / (3 * xi0 * xi0 * xi0);
}

double sum_inverse_pm1(const std::vector<std::uint32_t>& P) {
  double s = 0;
  for (auto p : P) s += 1.0 / (static_cast<double>(p) - 1.0);
  return s;
}

// |F_i^nu_hat| <= nu_dominance(i) F_i^mu_hat pointwise.
double nu_dominance(const KaufmanParams& p, int i) {
  const auto& Pm = p.P_mu[static_cast<std::size_t>(i - 1)];
  const auto& Pn = p.P_nu[static_cast<std::size_t>(i - 1)];
  return static_cast<double>(Pm.size()) / static_cast<double>(Pn.size()) * std::max(1.0, sum_inverse_pm1(Pn));
}

void check_level(const KaufmanParams& p, int i, bool allow_zero) {
  if (i < (allow_zero ? 0 : 1) || i > p.levels())
    throw Error("level " + std::to_string(i) + " outside 0.." + std::to_string(p.levels()));
}

// Coefficients of F_i at k = lo..hi, with prime multiples marked by stepping.
std::vector<double> level_coeff_array(int i, Variant v, std::int64_t lo, std::int64_t hi, const KaufmanParams& p,
                                      const AuxPhi& phi) {
  const auto n = static_cast<std::size_t>(hi - lo + 1);
  std::vector<double> out(n);
  if (i == 0) {
    parallel_for(n, [&](std::size_t t) { out[t] = phi_hat(phi, static_cast<double>(lo + static_cast<std::int64_t>(t)) / 2); });
    return out;
  }
  const auto& P = p.primes(i, v);
  const double q = p.q[static_cast<std::size_t>(i - 1)];
  const auto np = static_cast<double>(P.size());
  std::vector<double> count(n, 0.0), div_sum(n, 0.0);
  for (auto pr : P) {
    const auto step = static_cast<std::int64_t>(pr);
    std::int64_t first = lo % step == 0 ? lo : lo + (step - ((lo % step) + step) % step);
    for (std::int64_t k = first; k <= hi; k += step) {
      const auto t = static_cast<std::size_t>(k - lo);
      count[t] += 1.0;
      if (v == Variant::nu) div_sum[t] += 1.0 / (static_cast<double>(pr) - 1.0);
    }
  }
  const double sigma = v == Variant::nu ? sum_inverse_pm1(P) : 0.0;
  parallel_for(n, [&](std::size_t t) {
    const std::int64_t k = lo + static_cast<std::int64_t>(t);
    if (k == 0) {
      out[t] = 1.0;
      return;
    }
    const double num = v == Variant::mu ? count[t] : count[t] - (sigma - div_sum[t]);
    out[t] = num / np * phi_hat(phi, static_cast<double>(k) / q);
  });
  return out;
}

// Bounds used to size truncations: per level, the sup and l1 norm of the
// coefficients and the tail sum beyond a radius.
struct LevelBounds {
  const KaufmanParams& p;
  const AuxPhi& phi;
  Variant v;

  double mult(int i) const { return i == 0 || v == Variant::mu ? 1.0 : nu_dominance(p, i); }
  double cumulative(int i) const {
    double c = 1;
    for (int j = 1; j <= i; ++j) c *= mult(j);
    return c;
  }
  double sup(int i) const { return mult(i); }
  double l1(int i) const {
    return mult(i) * (i == 0 ? 2 * phi.sup : factor_value(i, Variant::mu, 0.0, p, phi));
  }
  double mu_mass(int i) const {
    double d = 2 * phi.sup;
    for (int j = 1; j <= i; ++j) d *= factor_value(j, Variant::mu, 0.0, p, phi);
    return d;
  }
  // sum_{|m| > r} |F_i^mu_hat(m)|.
  double factor_tail(int i, double r) const {
    const double q = i == 0 ? 2.0 : p.q[static_cast<std::size_t>(i - 1)];
    return 2 * q * tail_integral(phi, r / q);
  }
  // sum_{|j| > R} of the level-i mu product coefficients.
  double mu_tail(int i, double R) const {
    if (i == 0) return factor_tail(0, R);
    const double r = std::floor(R / 2);
    return l1_mu(i) * mu_tail(i - 1, r) + mu_mass(i - 1) * factor_tail(i, r);
  }
  double l1_mu(int i) const { return i == 0 ? 2 * phi.sup : factor_value(i, Variant::mu, 0.0, p, phi); }
  double tail(int i, double R) const { return cumulative(i) * mu_tail(i, R); }
};

struct ChainResult {
  std::vector<double> values;  // |k| <= K_out
  double error = 0.0;          // truncation plus rounding bound
  double rounding = 0.0;
};

// Iterated convolution: S_0 on [-R_0, R_0], then S_i on [-K_i, K_i] with
// K_i = R_i for i < n and K_n = K_out.
ChainResult chain(int n, Variant v, const KaufmanParams& p, const AuxPhi& phi, std::int64_t K_out,
                  const std::vector<std::int64_t>& R) {
  const LevelBounds b{p, phi, v};
  const std::int64_t K0 = n == 0 ? K_out : R[0];
  std::vector<double> S = level_coeff_array(0, v, -K0, K0, p, phi);
  double L = 0.0, rounding = 0.0, err = 0.0;
  for (int i = 1; i <= n; ++i) {
    const std::int64_t Rp = R[static_cast<std::size_t>(i - 1)];
    const std::int64_t K = i == n ? K_out : R[static_cast<std::size_t>(i)];
    const auto F = level_coeff_array(i, v, -(K + Rp), K + Rp, p, phi);
    const auto full = fft::convolve(S, F);
    const double round_i = fft::convolve_error(S, F);
    rounding += round_i;
    const double tail = b.tail(i - 1, static_cast<double>(Rp));
    std::vector<double> next(static_cast<std::size_t>(2 * K + 1));
    for (std::int64_t k = -K; k <= K; ++k) next[static_cast<std::size_t>(k + K)] = full[static_cast<std::size_t>(k + K + 2 * Rp)];
    if (i == n) {
      err = b.sup(i) * (L + tail) + round_i;
    } else {
      L = b.l1(i) * (L + tail) + static_cast<double>(2 * K + 1) * round_i;
    }
    S = std::move(next);
  }
  return {std::move(S), err, rounding};
}

// Every bump center v/p of F_i within reach of [-1/2, 1/2].
struct Bump {
  double c = 0.0;
  std::uint32_t p = 1;
};

std::vector<Bump> level_bumps(int i, Variant v, const KaufmanParams& p, double reach) {
  std::vector<Bump> out;
  for (auto pr : p.primes(i, v)) {
    const auto lim = static_cast<std::int64_t>(std::floor(pr * (0.5 + reach)));
    for (std::int64_t m = -lim; m <= lim; ++m) {
      if (v == Variant::nu && m % static_cast<std::int64_t>(pr) == 0) continue;
      out.push_back({static_cast<double>(m) / pr, pr});
    }
  }
  return out;
}

// Whether the level-`level` product can be nonzero within margin of x.
bool near_support(int level, Variant v, double x, double margin, const KaufmanParams& p) {
  if (std::abs(x) >= 0.5 + margin) return false;
  for (int i = 1; i <= level; ++i) {
    const double q = p.q[static_cast<std::size_t>(i - 1)];
    bool hit = false;
    for (auto pr : p.primes(i, v)) {
      const double m = std::nearbyint(pr * x);
      if (v == Variant::nu && std::fmod(m, static_cast<double>(pr)) == 0.0) continue;
      if (std::abs(x - m / pr) < 1.0 / q + margin) {
        hit = true;
        break;
      }
    }
    if (!hit) return false;
  }
  return true;
}

double bump_weight(Variant v, std::uint32_t pr) {
  return v == Variant::nu ? static_cast<double>(pr) / (pr - 1.0) : 1.0;
}

}  // namespace

// phi ---------------------------------------------------------------------

double phi1_hat(double xi) { return sinc(pi * xi); }
double phi2_hat_imag(double xi) { return rfun(pi * xi); }

double psi(double x) {
  const double a = std::abs(x);
  if (a >= 1.0) return 0.0;
  return 2.0 / 3.0 * (1 - a) * (1 - a) * (a + 2);
}

double psi_hat(double xi) {
  const double s = phi1_hat(xi), r = phi2_hat_imag(xi);
  return s * s + r * r;
}

double psi_conv(double x) {
  x = std::abs(x);
  if (x >= 2.0) return 0.0;
  const double lo = std::max(-1.0, x - 1), hi = std::min(1.0, x + 1);
  std::array<double, 8> br{lo, hi, -1.0, 0.0, 1.0, x - 1, x, x + 1};
  std::sort(br.begin(), br.end());
  using GL = boost::math::quadrature::gauss<double, 4>;
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const double a = std::max(lo, br[k]), b = std::min(hi, br[k + 1]);
    if (b <= a) continue;
    s += GL::integrate([x](double t) { return psi(t) * psi(x - t); }, a, b);
  }
  return s;
}

double phi_value(const AuxPhi& f, double x) {
  if (std::abs(x) >= 1.0) return 0.0;
  return f.A1 * bump::phi0(x) + f.A2 * psi_conv(4 * x);
}

double phi_hat(const AuxPhi& f, double xi) {
  const double s = psi_hat(xi / 4);
  return f.A1 * bump::phi0_hat(xi) + f.A2 / 4 * s * s;
}

double phi_hat_tail_bound(const AuxPhi& f, double xi) {
  const double x = pi * std::abs(xi) / 4;
  return f.A2 / 4 * std::pow(2 + 3 / x, 2) / std::pow(x, 4);
}

BumpRule bump_rule(const AuxPhi& f) {
  constexpr double e = bump::kPhi0HalfWidth;
  BumpRule r;
  append_gauss<20>(-e, -0.5, r.y, r.w);
  for (double a : {-0.5, -0.25, 0.0, 0.25}) append_gauss<8>(a, a + 0.25, r.y, r.w);
  append_gauss<20>(0.5, e, r.y, r.w);
  for (std::size_t k = 0; k < r.y.size(); ++k) r.w[k] *= phi_value(f, r.y[k]);
  return r;
}

AuxPhi build_phi() {
  AuxPhi f;
  f.A1 = 1.0;
  f.A2 = 1.0;
  auto grid_min = [&f] {
    double m = inf;
    for (int i = 0; i < kGridPoints; ++i) m = std::min(m, phi_value(f, -1.0 + (i + 0.5) * 2.0 / kGridPoints));
    return m;
  };
  while (grid_min() < 0.0) {
    if (++f.doublings > 64) throw Error("phi calibration: A1 diverged");
    f.A1 *= 2;
  }
  f.A1_raw = f.A1;
  const double total = f.A1 * bump::phi0_hat(0.0) + 0.25;
  f.A1 /= total;
  f.A2 /= total;
  f.grid_min = grid_min();

  const auto rule = bump_rule(f);
  f.integral = std::accumulate(rule.w.begin(), rule.w.end(), 0.0);
  f.sup = phi_value(f, 0.0);
  const double h = 1.0 / 4096;
  for (double x = -1.0; x <= 1.0; x += h)
    f.sup_dd = std::max(f.sup_dd, std::abs(phi_value(f, x + h) - 2 * phi_value(f, x) + phi_value(f, x - h)) / (h * h));

  const auto n = static_cast<std::size_t>(kHatGridMax / kHatGridStep) + 1;
  std::vector<double> lo(n), hi(n), ratio(n);
  parallel_for(n, [&](std::size_t i) {
    const double xi = static_cast<double>(i) * kHatGridStep;
    const double v = phi_hat(f, xi);
    const double w = v * std::pow(1 + xi, 4);
    lo[i] = w;
    hi[i] = w;
    double r = 1.0;
    for (double d : {-1.0, -0.5, 0.5, 1.0}) {
      const double u = phi_hat(f, xi + d) / v;
      r = std::max({r, u, 1 / u});
    }
    ratio[i] = r;
  });
  f.quartic_lower = *std::min_element(lo.begin(), lo.end());
  f.quartic_upper = *std::max_element(hi.begin(), hi.end());
  f.shift_ratio = *std::max_element(ratio.begin(), ratio.end());
  if (const auto bad = phi_violation(f); !bad.empty()) throw Error("phi calibration failed: " + bad);
  return f;
}

std::string phi_violation(const AuxPhi& f) {
  if (!(f.A1 > 0 && f.A2 > 0)) return "nonpositive A1 or A2";
  for (double x : {-1.0, -0.99, 0.99, 1.0})
    if (phi_value(f, x) != 0.0) return "phi(" + std::to_string(x) + ") != 0";
  if (!(std::abs(f.integral - 1.0) <= 1e-8)) return "integral " + std::to_string(f.integral) + " != 1";
  if (!(f.grid_min >= 0.0)) return "phi < 0 on the grid: min " + std::to_string(f.grid_min);
  if (!(f.quartic_lower > 0.0)) return "phi_hat not bounded below by c (1 + |xi|)^-4";
  if (!std::isfinite(f.shift_ratio) || !std::isfinite(f.quartic_upper)) return "phi_hat ratio bound not finite";
  return {};
}

// Parameters ----------------------------------------------------------------

std::string variant_name(Variant v) { return v == Variant::mu ? "mu" : "nu"; }

const std::vector<std::uint32_t>& KaufmanParams::primes(int i, Variant v) const {
  return (v == Variant::mu ? P_mu : P_nu).at(static_cast<std::size_t>(i - 1));
}

double KaufmanParams::mu_ceiling(int i) const { return std::pow(q.at(static_cast<std::size_t>(i - 1)), s / 2) / 2; }

double KaufmanParams::nu_floor(int i) const {
  return std::pow(q.at(static_cast<std::size_t>(i - 1)), s / 2) / h.at(static_cast<std::size_t>(i - 1));
}

std::vector<std::uint32_t> primes_up_to(std::uint32_t n) {
  std::vector<std::uint32_t> out;
  if (n < 2) return out;
  std::vector<bool> composite(n + 1, false);
  for (std::uint64_t i = 2; i <= n; ++i) {
    if (composite[i]) continue;
    out.push_back(static_cast<std::uint32_t>(i));
    for (std::uint64_t j = i * i; j <= n; j += i) composite[j] = true;
  }
  return out;
}

namespace {

void validate_schedule(double s, const std::vector<double>& q) {
  if (!(s > 0.0 && s <= 1.0)) throw Error("s must lie in (0, 1]");
  if (q.empty()) throw Error("q schedule is empty");
  if (!(q[0] > 1.0)) throw Error("q_1 must exceed 1");
  for (std::size_t i = 1; i < q.size(); ++i)
    if (!(q[i] > q[i - 1])) throw Error("q schedule must increase");
  if (std::pow(q.back(), s / 2) / 2 > 1e8) throw Error("q too large for the prime sieve");
}

struct LevelSets {
  std::vector<std::uint32_t> mu, nu;
  double floor = 0;
};

LevelSets sets_for(double s, double q, double C_s, const std::vector<std::uint32_t>& primes) {
  LevelSets r;
  const double ceil_ = std::pow(q, s / 2) / 2;
  r.floor = std::pow(q, s / 2) / (C_s * std::log(q));
  r.mu.push_back(1);
  for (auto pr : primes) {
    if (pr > ceil_) break;
    r.mu.push_back(pr);
    if (pr >= r.floor) r.nu.push_back(pr);
  }
  return r;
}

double factor_from_sets(const LevelSets& l) {
  if (!(l.floor > 1.0) || l.nu.empty()) return inf;
  return l.floor / (l.floor - 1) * static_cast<double>(l.mu.size()) / static_cast<double>(l.nu.size());
}

}  // namespace

double calibrate_cs(double s, const std::vector<double>& q) {
  validate_schedule(s, q);
  const auto primes = primes_up_to(static_cast<std::uint32_t>(std::pow(q.back(), s / 2) / 2));
  for (int e = -8; e <= 16; ++e) {
    const double C = std::ldexp(1.0, e);
    double prod = 1;
    for (double qi : q) prod *= factor_from_sets(sets_for(s, qi, C, primes));
    if (prod <= 4.0) return C;
  }
  throw Error("no C_s = 2^e, e in [-8, 16], keeps the comparison factors within 4");
}

KaufmanParams make_params(double s, std::vector<double> q, std::optional<double> C_s) {
  validate_schedule(s, q);
  KaufmanParams p;
  p.s = s;
  p.cs_calibrated = !C_s.has_value();
  p.C_s = C_s ? *C_s : calibrate_cs(s, q);
  if (!(p.C_s > 0)) throw Error("C_s must be positive");
  p.q = std::move(q);
  const auto primes = primes_up_to(static_cast<std::uint32_t>(std::pow(p.q.back(), s / 2) / 2));
  for (std::size_t i = 0; i < p.q.size(); ++i) {
    auto l = sets_for(s, p.q[i], p.C_s, primes);
    p.h.push_back(p.C_s * std::log(p.q[i]));
    p.trivial_mu.push_back(std::pow(p.q[i], s / 2) / 2 < 2.0);
    if (l.nu.empty())
      throw Error("P_nu empty at level " + std::to_string(i + 1) + ": no prime in [" + std::to_string(l.floor) +
                  ", " + std::to_string(std::pow(p.q[i], s / 2) / 2) + "]");
    p.P_mu.push_back(std::move(l.mu));
    p.P_nu.push_back(std::move(l.nu));
  }
  return p;
}

double comparison_factor(const KaufmanParams& p, int i) {
  check_level(p, i, false);
  const double X = p.nu_floor(i);
  if (!(X > 1.0)) return inf;
  return X / (X - 1) * static_cast<double>(p.primes(i, Variant::mu).size()) /
         static_cast<double>(p.primes(i, Variant::nu).size());
}

// Coefficients and densities --------------------------------------------------

double coeff_F(int i, Variant v, std::int64_t k, const KaufmanParams& p, const AuxPhi& phi) {
  check_level(p, i, true);
  if (i == 0) return phi_hat(phi, static_cast<double>(k) / 2);
  if (k == 0) return 1.0;
  const auto& P = p.primes(i, v);
  const std::uint64_t ak = k < 0 ? static_cast<std::uint64_t>(-k) : static_cast<std::uint64_t>(k);
  double num = 0.0;
  for (auto pr : P) {
    if (ak % pr == 0)
      num += 1.0;
    else if (v == Variant::nu)
      num -= 1.0 / (pr - 1.0);
  }
  return num / static_cast<double>(P.size()) * phi_hat(phi, static_cast<double>(k) / p.q[static_cast<std::size_t>(i - 1)]);
}

double factor_value(int i, Variant v, double x, const KaufmanParams& p, const AuxPhi& phi) {
  check_level(p, i, true);
  if (i == 0) return 2 * phi_value(phi, 2 * x);
  const double q = p.q[static_cast<std::size_t>(i - 1)];
  const auto& P = p.primes(i, v);
  double s = 0.0;
  for (auto pr : P) {
    const double m = std::nearbyint(pr * x);
    if (v == Variant::nu && std::fmod(m, static_cast<double>(pr)) == 0.0) continue;
    const double d = x - m / pr;
    if (std::abs(d) >= 1.0 / q) continue;
    s += bump_weight(v, pr) * q / pr * phi_value(phi, q * d);
  }
  return s / static_cast<double>(P.size());
}

double product_density(int n, Variant v, double x, const KaufmanParams& p, const AuxPhi& phi) {
  check_level(p, n, true);
  double d = factor_value(0, v, x, p, phi);
  for (int i = 1; i <= n && d != 0.0; ++i) d *= factor_value(i, v, x, p, phi);
  return d;
}

double CoeffSequence::at(std::int64_t k) const {
  if (k < -K || k > K) throw Error("coefficient index " + std::to_string(k) + " outside |k| <= " + std::to_string(K));
  return c[static_cast<std::size_t>(k + K)];
}

CoeffSequence product_coeffs(int n, Variant v, const KaufmanParams& p, const AuxPhi& phi, std::int64_t K_out,
                             double budget) {
  check_level(p, n, true);
  if (K_out < 0) throw Error("K_out must be >= 0");
  if (!(budget > 0)) throw Error("budget must be positive");
  const LevelBounds b{p, phi, v};
  // Targets for the neglected tail of S_i, filled from the top level down.
  std::vector<double> target(static_cast<std::size_t>(n), 0.0);
  double allowed = n > 0 ? budget / b.sup(n) : budget;
  for (int i = n - 1; i >= 1; --i) {
    target[static_cast<std::size_t>(i)] = allowed / 2;
    allowed = allowed / 2 / b.l1(i);
  }
  if (n > 0) target[0] = allowed;

  std::vector<std::int64_t> R(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    std::int64_t r = 64;
    while (b.tail(i, static_cast<double>(r)) > target[static_cast<std::size_t>(i)]) {
      r *= 2;
      if (static_cast<std::size_t>(2 * r + 1) > kMaxConvolutionLength)
        throw Error("truncation budget infeasible: level " + std::to_string(i) + " needs radius beyond " +
                    std::to_string(r) + " for tail " + std::to_string(target[static_cast<std::size_t>(i)]));
    }
    R[static_cast<std::size_t>(i)] = r;
  }
  for (int i = 1; i <= n; ++i) {
    const std::int64_t K = i == n ? K_out : R[static_cast<std::size_t>(i)];
    if (static_cast<std::size_t>(2 * (K + R[static_cast<std::size_t>(i - 1)]) + 1) > kMaxConvolutionLength)
      throw Error("truncation budget infeasible: level " + std::to_string(i) + " coefficient array too long");
  }
  auto res = chain(n, v, p, phi, K_out, R);
  CoeffSequence out;
  out.level = variant_name(v) + " n=" + std::to_string(n);
  out.K = K_out;
  out.c = std::move(res.values);
  out.tail_bound = res.error;
  return out;
}

AtomicMeasure discretize(int n, Variant v, const KaufmanParams& p, const AuxPhi& phi) {
  check_level(p, n, true);
  const auto rule = bump_rule(phi);
  const std::size_t nodes = rule.y.size();
  if (n == 0) {
    std::vector<double> x(nodes);
    for (std::size_t k = 0; k < nodes; ++k) x[k] = rule.y[k] / 2;
    return AtomicMeasure(std::move(x), rule.w, Interval{-0.5, 0.5});
  }
  const double q = p.q[static_cast<std::size_t>(n - 1)];
  const auto np = static_cast<double>(p.primes(n, v).size());
  auto bumps = level_bumps(n, v, p, 1.0 / q);
  std::vector<char> keep(bumps.size());
  parallel_for(bumps.size(), [&](std::size_t b) { keep[b] = near_support(n - 1, v, bumps[b].c, 1.0 / q, p); });
  std::vector<Bump> live;
  for (std::size_t b = 0; b < bumps.size(); ++b)
    if (keep[b]) live.push_back(bumps[b]);

  std::vector<double> x(live.size() * nodes), w(live.size() * nodes);
  parallel_for(live.size(), [&](std::size_t b) {
    const auto& bp = live[b];
    const double scale = bump_weight(v, bp.p) / (np * bp.p);
    for (std::size_t k = 0; k < nodes; ++k) {
      const double xx = bp.c + rule.y[k] / q;
      x[b * nodes + k] = xx;
      w[b * nodes + k] = scale * rule.w[k] * product_density(n - 1, v, xx, p, phi);
    }
  });
  std::vector<double> xs, ws;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (w[k] == 0.0) continue;
    xs.push_back(x[k]);
    ws.push_back(w[k]);
  }
  if (xs.empty()) throw Error("discretized product is empty");
  return AtomicMeasure(std::move(xs), std::move(ws), Interval{-0.5, 0.5});
}

FourierProfile decay_profile(int n, Variant v, const KaufmanParams& p, const AuxPhi& phi, const BandOptions& opt) {
  const auto m = discretize(n, v, p, phi);
  BandOptions o = opt;
  o.integer_frequencies = true;
  if (o.source.empty()) o.source = "kaufman " + variant_name(v) + " n=" + std::to_string(n);
  return band_envelope([&m](double xi) { return fourier_atomic(m, xi); }, o);
}

// Checks --------------------------------------------------------------------

PositivityReport positivity_check(int n, const KaufmanParams& p, const AuxPhi& phi, std::int64_t K_out) {
  PositivityReport r;
  r.n = n;
  r.K_out = K_out;
  std::vector<double> vals;
  try {
    const auto c = product_coeffs(n, Variant::mu, p, phi, K_out);
    vals.assign(c.c.begin() + K_out, c.c.end());
    r.error_bound = c.tail_bound;
    r.method = "coefficients";
  } catch (const Error&) {
    // Truncated sums of nonnegative terms bound the coefficients from below,
    // so only rounding can spoil the sign.
    std::vector<std::int64_t> R(static_cast<std::size_t>(n), kLowerBoundRadius);
    const LevelBounds b{p, phi, Variant::mu};
    std::int64_t r0 = 64;
    while (b.tail(0, static_cast<double>(r0)) > kTailBudget) r0 *= 2;
    R[0] = r0;
    const auto res = chain(n, Variant::mu, p, phi, K_out, R);
    vals.assign(res.values.begin() + K_out, res.values.end());
    r.error_bound = res.rounding;
    r.method = "lower_bound";
  }
  const auto it = std::min_element(vals.begin(), vals.end());
  r.min_value = *it;
  r.witness_k = it - vals.begin();
  r.pass = r.min_value > r.error_bound;
  return r;
}

StabilityReport stability_check(const CoeffSequence& psi_hat_seq, double psi_sup, double psi_dd_sup, int i,
                                const KaufmanParams& p, const AuxPhi& phi, std::int64_t K) {
  check_level(p, i, false);
  StabilityReport r;
  r.level = i;
  r.K = K;
  r.psi_norm = psi_sup + psi_dd_sup;
  const std::int64_t Kp = psi_hat_seq.K;
  const auto F = level_coeff_array(i, Variant::mu, -(K + Kp), K + Kp, p, phi);
  const double q = p.q[static_cast<std::size_t>(i - 1)];
  const double lq = std::log(q);
  std::vector<double> diff(static_cast<std::size_t>(2 * K + 1));
  parallel_for(diff.size(), [&](std::size_t t) {
    const std::int64_t k = static_cast<std::int64_t>(t) - K;
    double s = 0.0;
    for (std::int64_t j = -Kp; j <= Kp; ++j) {
      const std::int64_t l = k - j;
      if (l == 0) continue;
      s += psi_hat_seq.c[static_cast<std::size_t>(j + Kp)] * F[static_cast<std::size_t>(l + K + Kp)];
    }
    diff[t] = std::abs(s);
  });
  for (std::size_t t = 0; t < diff.size(); ++t) {
    const std::int64_t k = static_cast<std::int64_t>(t) - K;
    const double ak = std::abs(static_cast<double>(k));
    const double rate = ak <= q ? std::pow(q, -p.s / 2) * lq * lq : std::pow(ak, -p.s / 2) * std::pow(std::log(ak), 2);
    if (diff[t] > r.max_diff) {
      r.max_diff = diff[t];
      r.witness_k = k;
    }
    if (r.psi_norm > 0) r.implied_constant = std::max(r.implied_constant, diff[t] / (r.psi_norm * rate));
  }
  return r;
}

FrostmanReport frostman_nu(int n, const KaufmanParams& p, const AuxPhi& phi, int samples_per_ball) {
  check_level(p, n, false);
  if (samples_per_ball < 64) throw Error("grid too coarse: need >= 64 samples per ball radius");
  FrostmanReport r;
  r.n = n;
  r.samples_per_ball = samples_per_ball;
  const double qn = p.q[static_cast<std::size_t>(n - 1)];
  r.radius = 1.0 / qn;
  const double hg = r.radius / samples_per_ball;

  auto bumps = level_bumps(n, Variant::nu, p, 1.0 / qn);
  std::vector<std::pair<double, double>> iv;
  for (const auto& b : bumps)
    if (near_support(n - 1, Variant::nu, b.c, 1.0 / qn, p)) iv.emplace_back(b.c - 2 * r.radius, b.c + 2 * r.radius);
  std::sort(iv.begin(), iv.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& x : iv) {
    if (!merged.empty() && x.first <= merged.back().second)
      merged.back().second = std::max(merged.back().second, x.second);
    else
      merged.push_back(x);
  }
  std::vector<double> best(merged.size(), 0.0), where(merged.size(), 0.0);
  parallel_for(merged.size(), [&](std::size_t c) {
    const double a = merged[c].first - r.radius;
    const auto cells = static_cast<std::size_t>(std::ceil((merged[c].second - merged[c].first) / hg)) +
                       2 * static_cast<std::size_t>(samples_per_ball);
    std::vector<double> prefix(cells + 1, 0.0);
    for (std::size_t k = 0; k < cells; ++k)
      prefix[k + 1] = prefix[k] + hg * product_density(n, Variant::nu, a + (k + 0.5) * hg, p, phi);
    const auto spb = static_cast<std::size_t>(samples_per_ball);
    for (std::size_t j = spb; j + spb <= cells; ++j) {
      const double m = prefix[j + spb] - prefix[j - spb];
      if (m > best[c]) {
        best[c] = m;
        where[c] = a + static_cast<double>(j) * hg;
      }
    }
  });
  for (std::size_t c = 0; c < merged.size(); ++c) {
    if (best[c] > r.sup_ball) {
      r.sup_ball = best[c];
      r.witness_x = where[c];
    }
  }
  double bound = std::pow(qn, -p.s) * std::log(qn);
  for (int i = 1; i <= n; ++i) {
    const double qi = p.q[static_cast<std::size_t>(i - 1)];
    if (i < n) bound *= std::pow(qi, 1 - p.s) * std::log(qi);
    bound *= p.h[static_cast<std::size_t>(i - 1)];
  }
  r.bound = bound;
  r.constant = std::pow(r.sup_ball / bound, 1.0 / n);

  for (int i = 1; i <= n; ++i) {
    const double qi = p.q[static_cast<std::size_t>(i - 1)];
    const auto& P = p.primes(i, Variant::nu);
    const auto centers = level_bumps(i, Variant::nu, p, 0.0);
    std::vector<double> vals(centers.size());
    parallel_for(centers.size(), [&](std::size_t k) { vals[k] = factor_value(i, Variant::nu, centers[k].c, p, phi); });
    const double sup = *std::max_element(vals.begin(), vals.end());
    const double pmin = *std::min_element(P.begin(), P.end());
    const double predicted = qi * phi.sup / (static_cast<double>(P.size()) * (pmin - 1));
    r.sup_factor.push_back(sup);
    r.predicted_factor.push_back(predicted);
    r.factor_constant.push_back(sup / (std::pow(qi, 1 - p.s) * std::log(qi) * p.h[static_cast<std::size_t>(i - 1)]));

    // Exhaustive separation over the fractions m/p in [-1/2, 1/2], exact in integers.
    struct Frac {
      std::int64_t m, p;
    };
    std::vector<Frac> fr;
    for (auto pr : P) {
      const auto ip = static_cast<std::int64_t>(pr);
      for (std::int64_t m = -ip / 2; m <= ip / 2; ++m)
        if (m % ip != 0) fr.push_back({m, ip});
    }
    std::sort(fr.begin(), fr.end(), [](const Frac& a, const Frac& b) { return a.m * b.p < b.m * a.p; });
    double min_sep = inf;
    for (std::size_t k = 1; k < fr.size(); ++k) {
      const std::int64_t num = fr[k].m * fr[k - 1].p - fr[k - 1].m * fr[k].p;
      const double gap = static_cast<double>(num) / (static_cast<double>(fr[k].p) * static_cast<double>(fr[k - 1].p));
      min_sep = std::min(min_sep, gap * std::pow(qi, p.s) / 4);
    }
    r.min_separation.push_back(min_sep);
    if (!(min_sep >= 1.0)) r.separated = false;
    if (!(std::abs(sup - predicted) <= 1e-9 * predicted)) r.pass = false;
  }
  r.pass = r.pass && r.separated;
  return r;
}

ComparisonReport comparison_checks(int i, int n, const KaufmanParams& p, const AuxPhi& phi, int samples,
                                   std::uint64_t seed, double exponent) {
  check_level(p, i, false);
  check_level(p, n, false);
  ComparisonReport r;
  r.level = i;
  r.n = n;
  r.samples = samples;
  r.exponent = exponent;
  r.factor = comparison_factor(p, i);
  if (!std::isfinite(r.factor)) throw Error("comparison factor infinite: nu floor <= 1 at level " + std::to_string(i));

  const double qi = p.q[static_cast<std::size_t>(i - 1)];
  std::vector<double> pts;
  for (int k = 0; k < kGridPoints; ++k) pts.push_back(-0.5 + (k + 0.5) / kGridPoints);
  const auto rule = bump_rule(phi);
  for (const auto& b : level_bumps(i, Variant::nu, p, 1.0 / qi))
    for (double y : rule.y) pts.push_back(b.c + y / qi);
  r.grid_points = pts.size();
  std::vector<double> ratio(pts.size(), 0.0);
  parallel_for(pts.size(), [&](std::size_t k) {
    const double fn = factor_value(i, Variant::nu, pts[k], p, phi);
    if (fn == 0.0) return;
    const double fm = factor_value(i, Variant::mu, pts[k], p, phi);
    ratio[k] = fm > 0 ? fn / (r.factor * fm) : inf;
  });
  const auto it = std::max_element(ratio.begin(), ratio.end());
  r.max_ratio = *it;
  r.witness_x = pts[static_cast<std::size_t>(it - ratio.begin())];
  if (!(r.max_ratio <= 1.0 + 1e-12))
    throw Error("pointwise comparison violated at x = " + std::to_string(r.witness_x) + ": ratio " +
                std::to_string(r.max_ratio));

  const double qn = p.q[static_cast<std::size_t>(n - 1)];
  const auto k_lo = static_cast<std::int64_t>(std::floor(2 * qn)) + 1;
  const auto k_hi = static_cast<std::int64_t>(std::floor(8 * qn));
  const auto l_max = static_cast<std::int64_t>(std::ceil(qn / 2)) - 1;
  const std::int64_t K = k_hi + l_max;
  const auto mu = product_coeffs(n, Variant::mu, p, phi, K);
  const auto nu = product_coeffs(n, Variant::nu, p, phi, K);
  Stream rng = Stream(seed).split("comparison", static_cast<std::uint64_t>(n));
  std::vector<double> a(static_cast<std::size_t>(samples)), m(a.size()), wt(a.size());
  for (std::size_t s = 0; s < a.size(); ++s) {
    std::int64_t k = k_lo + static_cast<std::int64_t>(rng.next_u64() % static_cast<std::uint64_t>(k_hi - k_lo + 1));
    if (rng.coin()) k = -k;
    const std::int64_t l = -l_max + static_cast<std::int64_t>(rng.next_u64() % static_cast<std::uint64_t>(2 * l_max + 1));
    a[s] = std::abs(nu.at(k + l));
    m[s] = mu.at(k);
    wt[s] = std::pow(1.0 + std::abs(static_cast<double>(k)), -exponent);
    r.C_only = std::max(r.C_only, a[s] / m[s]);
  }
  std::vector<double> cand{0.0};
  for (std::size_t s = 0; s < a.size(); ++s) cand.push_back(a[s] / m[s]);
  double best = inf;
  for (double C : cand) {
    double ce = 0.0;
    for (std::size_t s = 0; s < a.size(); ++s) ce = std::max(ce, (a[s] - C * m[s]) / wt[s]);
    if (C + ce < best) {
      best = C + ce;
      r.C = C;
      r.C_eps = ce;
    }
  }
  return r;
}

DivisorReport divisor_check(int i, const KaufmanParams& p, std::int64_t k_max) {
  check_level(p, i, false);
  if (k_max < 1) throw Error("k_max must be >= 1");
  DivisorReport r;
  r.level = i;
  r.samples = static_cast<int>(k_max);
  const auto& P = p.primes(i, Variant::nu);
  const double X = p.nu_floor(i);
  const double sigma = sum_inverse_pm1(P);
  const double lX = std::log(X);
  for (std::int64_t k = 1; k <= k_max; ++k) {
    double count = 0, div = 0;
    for (auto pr : P) {
      if (k % pr == 0) {
        count += 1;
        div += 1.0 / (pr - 1.0);
      }
    }
    const double dev = std::abs(count - (sigma - div));
    const double term = std::log(static_cast<double>(k)) / lX + static_cast<double>(P.size()) / X;
    if (dev / term > r.constant) {
      r.constant = dev / term;
      r.witness_k = k;
    }
  }
  return r;
}

}  // namespace salem::kaufman
