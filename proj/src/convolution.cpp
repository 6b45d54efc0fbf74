#include "salem/convolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace salem::convolution {
namespace {

std::uint64_t checked_pow(std::uint64_t base, int e, std::uint64_t cap) {
  std::uint64_t v = 1;
  for (int i = 0; i < e; ++i) {
    if (v > cap / base) return cap + 1;
    v *= base;
  }
  return v;
}

struct Half {
  std::vector<int> sum;
  std::vector<double> value;
};

// All vectors in [-M, M]^n over the given points, in odometer order.
Half enumerate_half(const double* x, int n, int M) {
  Half h;
  std::vector<int> m(static_cast<std::size_t>(n), -M);
  while (true) {
    int s = 0;
    double v = 0.0;
    for (int j = 0; j < n; ++j) {
      s += m[j];
      v += m[j] * x[j];
    }
    h.sum.push_back(s);
    h.value.push_back(v);
    int j = 0;
    while (j < n && m[j] == M) m[j++] = -M;
    if (j == n) break;
    ++m[j];
  }
  return h;
}

}  // namespace

int level_d(int k) { return k + 1; }

double level_L(int k, double s) { return std::pow(static_cast<double>(level_d(k)), -1.0 / s); }

double level_r(int k) { return std::max(1.0, std::sqrt(std::log(static_cast<double>(k)))); }

double level_l(int k, double s, double t) {
  const double L = level_L(k, s);
  const double e = 1.0 / ((k + 1.0) * (k + 1.0));
  return (1.0 - e) * L + t * L * e;
}

double a_r_min(const std::vector<double>& points, double r) {
  const int d = static_cast<int>(points.size());
  if (d < 2) throw Error("a_r_min needs at least two points");
  if (!(r > 0.0)) throw Error("a_r_min needs r > 0");
  const int M = static_cast<int>(std::floor(2.0 * r));
  if (M == 0) throw Error("a_r_min needs 2r >= 1");
  const int n1 = d / 2, n2 = d - n1;
  const auto base = static_cast<std::uint64_t>(2 * M + 1);
  if (checked_pow(base, n2, kHalfEnumerationCap) > kHalfEnumerationCap)
    throw Error("a_r_min enumeration budget exceeded");
  const Half A = enumerate_half(points.data(), n1, M);
  const Half B = enumerate_half(points.data() + n1, n2, M);

  // Bucket B by coordinate sum, values sorted.
  const int off = M * n2;
  std::vector<std::vector<double>> bucket(static_cast<std::size_t>(2 * off + 1));
  for (std::size_t i = 0; i < B.sum.size(); ++i) bucket[static_cast<std::size_t>(B.sum[i] + off)].push_back(B.value[i]);
  for (auto& b : bucket) std::sort(b.begin(), b.end());

  double best = std::numeric_limits<double>::infinity();
  const std::size_t zero_a = (A.sum.size() - 1) / 2;  // odometer index of the zero vector
  for (std::size_t i = 0; i < A.sum.size(); ++i) {
    const int need = -A.sum[i];
    if (need < -off || need > off) continue;
    const auto& b = bucket[static_cast<std::size_t>(need + off)];
    if (b.empty()) continue;
    if (i == zero_a) {
      // Pair with every nonzero B of sum 0: skip exactly one zero value.
      const auto z = std::lower_bound(b.begin(), b.end(), 0.0);
      const auto zeros = std::upper_bound(b.begin(), b.end(), 0.0) - z;
      if (zeros >= 2) return 0.0;
      if (z != b.begin()) best = std::min(best, std::abs(*(z - 1)));
      if (z + zeros != b.end()) best = std::min(best, std::abs(*(z + zeros)));
      continue;
    }
    const double target = -A.value[i];
    const auto it = std::lower_bound(b.begin(), b.end(), target);
    if (it != b.end()) best = std::min(best, std::abs(A.value[i] + *it));
    if (it != b.begin()) best = std::min(best, std::abs(A.value[i] + *(it - 1)));
  }
  return best;
}

std::string point_violation(const std::vector<double>& x, int k, double s) {
  const int d = level_d(k);
  const double L = level_L(k, s);
  if (static_cast<int>(x.size()) != d) return "expected " + std::to_string(d) + " points";
  if (!(x[0] > 0.0 && x[0] < 1.0 / d - L)) return "x_1 outside (0, 1/d - L)";
  for (int j = 1; j < d; ++j) {
    const double g = x[j] - x[j - 1];
    if (!(g > L && g < 1.0 / d)) return "gap " + std::to_string(j) + " outside (L, 1/d)";
  }
  if (!(x[d - 1] < 1.0 - L)) return "x_d not below 1 - L";
  return {};
}

PointSample sample_points(int k, double s, Stream& rng, int retry_cap) {
  if (k < 1) throw Error("level index must be at least 1");
  if (!(s > 0.0 && s < 1.0))
    throw Error("s must lie in (0, 1): at s = 1, L_k = 1/d_k leaves no admissible gap");
  const int d = level_d(k);
  const double L = level_L(k, s);
  const double r = level_r(k);
  PointSample best;
  best.threshold = std::pow(kThresholdC * r, -2.0 * d);
  best.a_r_min = -1.0;
  for (int attempt = 1; attempt <= retry_cap; ++attempt) {
    std::vector<double> x(static_cast<std::size_t>(d));
    x[0] = rng.uniform_open(0.0, 1.0 / d - L);
    for (int j = 1; j < d; ++j) x[j] = x[j - 1] + rng.uniform_open(L, 1.0 / d);
    if (!point_violation(x, k, s).empty()) continue;
    const double a = a_r_min(x, r);
    if (a > best.a_r_min) {
      best.x = x;
      best.a_r_min = a;
    }
    if (a >= best.threshold) {
      best.attempts = attempt;
      return best;
    }
  }
  throw Error("sample_points: retry cap " + std::to_string(retry_cap) + " exceeded at level " +
              std::to_string(k) + ", best a_r_min " + std::to_string(best.a_r_min));
}

std::vector<double> weights(int k) {
  if (k < 1) throw Error("level index must be at least 1");
  const int d = level_d(k);
  std::vector<double> p(static_cast<std::size_t>(d), 1.0 / d);
  // (1 -+ 1/(k+1)) / d as single correctly rounded quotients.
  const double dd = static_cast<double>(d) * d;
  p[0] = k / dd;
  p[1] = (k + 2) / dd;
  return p;
}

Instance build(double s, int K, const std::optional<std::vector<double>>& t_override, const Stream& rng,
               int retry_cap) {
  if (!(s > 0.0 && s <= 1.0)) throw Error("s must lie in (0, 1]");
  if (K < 1 || K > kMaxLevels) throw Error("levels must lie in [1, " + std::to_string(kMaxLevels) + "]");
  if (t_override) {
    if (static_cast<int>(t_override->size()) < K) throw Error("t vector shorter than the level count");
    for (double t : *t_override)
      if (!(t >= 0.0 && t <= 1.0)) throw Error("t entries must lie in [0, 1]");
  }
  Instance inst;
  inst.s = s;
  inst.scale.push_back(1.0);
  std::vector<AtomicMeasure> factors;
  for (int k = 1; k <= K; ++k) {
    Stream ps = rng.split("points", static_cast<std::uint64_t>(k));
    PointSample pts = sample_points(k, s, ps, retry_cap);
    LevelParams lp;
    lp.k = k;
    lp.d = level_d(k);
    lp.r = level_r(k);
    lp.L = level_L(k, s);
    lp.t = t_override ? (*t_override)[static_cast<std::size_t>(k - 1)] : rng.split("t", static_cast<std::uint64_t>(k)).uniform();
    lp.l = level_l(k, s, lp.t);
    lp.x = pts.x;
    lp.p = weights(k);
    lp.a_r_min = pts.a_r_min;
    lp.threshold = pts.threshold;
    lp.attempts = pts.attempts;
    std::vector<double> pos(lp.x.size());
    for (std::size_t j = 0; j < pos.size(); ++j) pos[j] = inst.scale.back() * lp.x[j];
    factors.emplace_back(std::move(pos), lp.p);
    inst.scale.push_back(inst.scale.back() * lp.l);
    inst.levels.push_back(std::move(lp));
  }
  inst.measure = ProductMeasure(std::move(factors));
  return inst;
}

std::vector<double> ratio_sequence(int K) {
  if (K < 1) throw Error("K must be at least 1");
  if (K > 1000000) throw Error("K too large for exact ratios");
  std::vector<double> out;
  unsigned __int128 num = 1, den = 1;
  for (int k = 1; k <= K; ++k) {
    num *= static_cast<unsigned>(k + 2);
    den *= static_cast<unsigned>(k);
    unsigned __int128 a = num, b = den;
    while (b != 0) {
      const unsigned __int128 t = a % b;
      a = b;
      b = t;
    }
    num /= a;
    den /= a;
    out.push_back(static_cast<double>(num) / static_cast<double>(den));
  }
  return out;
}

AhlforsReport ahlfors_check(const Instance& inst, double eps) {
  AhlforsReport rep;
  double min_mass = 1.0, max_mass = 1.0;
  std::vector<int> wmin, wmax;
  for (std::size_t n = 0; n <= inst.levels.size(); ++n) {
    if (n > 0) {
      const auto& p = inst.levels[n - 1].p;
      const auto lo = std::min_element(p.begin(), p.end());
      const auto hi = std::max_element(p.begin(), p.end());
      min_mass *= *lo;
      max_mass *= *hi;
      wmin.push_back(static_cast<int>(lo - p.begin()) + 1);
      wmax.push_back(static_cast<int>(hi - p.begin()) + 1);
    }
    AhlforsLevel lv;
    lv.n = static_cast<int>(n);
    lv.r = inst.scale[n];
    lv.r_pow_s = std::pow(lv.r, inst.s);
    lv.min_mass = min_mass;
    lv.max_mass = max_mass;
    lv.lower = lv.r_pow_s / (n + 1.0);
    lv.upper = (n + 1.0) * lv.r_pow_s;
    lv.worst_ratio = std::max(max_mass / lv.upper, lv.lower / min_mass);
    lv.min_witness = wmin;
    lv.max_witness = wmax;
    lv.pass = min_mass >= lv.lower * (1.0 - eps) && max_mass <= lv.upper * (1.0 + eps);
    if (!lv.pass && rep.pass) {
      rep.pass = false;
      const bool low = min_mass < lv.lower * (1.0 - eps);
      std::string idx;
      for (int j : low ? wmin : wmax) idx += (idx.empty() ? "" : ",") + std::to_string(j);
      rep.violation = "level " + std::to_string(n) + (low ? " lower" : " upper") + " bound fails at interval (" +
                      idx + ")";
    }
    rep.worst_ratio = std::max(rep.worst_ratio, lv.worst_ratio);
    rep.levels.push_back(std::move(lv));
  }
  return rep;
}

std::vector<std::vector<double>> all_interval_masses(const Instance& inst) {
  std::uint64_t total = 1;
  std::vector<std::vector<double>> out{{1.0}};
  for (const auto& lv : inst.levels) {
    total *= lv.p.size();
    if (total > 10'000'000) throw Error("too many intervals to enumerate");
    std::vector<double> next;
    next.reserve(out.back().size() * lv.p.size());
    for (double m : out.back())
      for (double p : lv.p) next.push_back(m * p);
    out.push_back(std::move(next));
  }
  return out;
}

std::string revalidate(const Instance& inst) {
  if (inst.levels.size() != inst.measure.factors().size()) return "level and factor counts differ";
  for (std::size_t i = 0; i < inst.levels.size(); ++i) {
    const auto& lv = inst.levels[i];
    const std::string where = "level " + std::to_string(lv.k) + ": ";
    if (auto v = point_violation(lv.x, lv.k, inst.s); !v.empty()) return where + v;
    if (lv.p != weights(lv.k)) return where + "weights differ from the level formula";
    const double e = 1.0 / ((lv.k + 1.0) * (lv.k + 1.0));
    if (!(lv.l >= (1.0 - e) * lv.L * (1 - 1e-15) && lv.l <= lv.L * (1 + 1e-15))) return where + "l_k out of range";
    const auto& f = inst.measure.factors()[i];
    for (std::size_t j = 0; j < lv.x.size(); ++j)
      if (f.positions()[j] != inst.scale[i] * lv.x[j] || f.weights()[j] != lv.p[j]) return where + "factor atoms differ";
    if (lv.a_r_min < lv.threshold) return where + "a_r_min below threshold";
  }
  return {};
}

}  // namespace salem::convolution
