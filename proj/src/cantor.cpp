#include "salem/cantor.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numbers>

#include "salem/fft.hpp"
#include "salem/kernels.hpp"
#include "salem/parallel.hpp"

namespace salem::cantor {
namespace {

constexpr double kLow = 1.0 - std::numbers::sqrt2 / 2.0;  // 1 - 1/sqrt 2

double sum_squares(const std::vector<double>& w) {
  double s = 0.0, e = 0.0;
  for (double v : w) {
    double t, err;
    kernels::two_sum(s, v * v, t, err);
    s = t;
    e += err;
  }
  return s + e;
}

std::size_t find_heavy(const DyadicState& st) {
  if (st.j == 0) return 0;
  const std::uint64_t half = std::uint64_t{1} << (st.j - 1);
  const auto it = std::lower_bound(st.nodes.begin(), st.nodes.end(), half);
  if (it == st.nodes.end()) throw Error("no node in [1/2, 1] at level " + std::to_string(st.j));
  return static_cast<std::size_t>(it - st.nodes.begin());
}

DyadicState with_children(const DyadicState& st, const std::vector<std::uint8_t>& bits) {
  DyadicState out;
  out.s = st.s;
  out.j = st.j + 1;
  out.t = st.t;
  out.t.push_back(1);
  out.nodes.resize(st.nodes.size());
  for (std::size_t i = 0; i < st.nodes.size(); ++i) out.nodes[i] = 2 * st.nodes[i] + bits[i];
  out.weights = st.weights;
  out.exact = st.exact;
  out.sigma_sq = sum_squares(out.weights);
  out.heavy = st.heavy;
  return out;
}

}  // namespace

double SymbolicWeight::value() const {
  const double root = (roots % 2 != 0) ? std::numbers::sqrt2 / 2.0 : 1.0;
  return std::ldexp(root, -(halves + roots / 2)) * std::pow(kLow, lows);
}

int DyadicState::doublings() const { return static_cast<int>(std::count(t.begin(), t.end(), 2)); }

StepDensity DyadicState::density() const { return StepDensity(j, nodes, weights); }

DyadicState initial_state(double s) {
  if (!(s > 0.0 && s <= 1.0)) throw Error("s must lie in (0, 1]");
  DyadicState st;
  st.s = s;
  st.nodes = {0};
  st.weights = {1.0};
  st.exact = {SymbolicWeight{}};
  st.sigma_sq = 1.0;
  return st;
}

std::vector<int> t_sequence(double s, int J) {
  if (!(s > 0.0 && s <= 1.0)) throw Error("s must lie in (0, 1]");
  if (J < 1) throw Error("t_sequence needs J >= 1");
  std::vector<int> t{2};
  int c = 1;  // log2 of the running product
  for (int j = 2; j <= J; ++j) {
    const int tj = (c >= s * j) ? 1 : 2;
    t.push_back(tj);
    if (tj == 2) ++c;
  }
  return t;
}

double bernstein_threshold(double sigma_sq, int j) {
  if (!(sigma_sq > 0.0)) throw Error("bernstein_threshold needs sigma_sq > 0");
  return 2.0 * std::numbers::sqrt2 * std::sqrt(sigma_sq) * std::sqrt((j + 4) * std::numbers::ln2);
}

double chi_sum_max(const DyadicState& st, const std::vector<std::uint8_t>& bits, std::uint64_t* witness) {
  if (bits.size() != st.nodes.size()) throw Error("chi_sum_max: one bit per node required");
  const std::size_t N = std::size_t{1} << (st.j + 1);
  std::vector<cplx> v(N);
  for (std::size_t i = 0; i < st.nodes.size(); ++i) {
    const std::size_t base = 2 * st.nodes[i];
    const double p = st.weights[i];
    v[base + bits[i]] += p;
    v[base] -= p / 2.0;
    v[base + 1] -= p / 2.0;
  }
  const auto S = fft::dft(v);
  double best = 0.0;
  std::uint64_t arg = 0;
  for (std::size_t k = 0; k < N; ++k) {
    const double a = std::abs(S[k]);
    if (a > best) {
      best = a;
      arg = k;
    }
  }
  if (witness) *witness = arg;
  return best;
}

DyadicState grow_level(const DyadicState& st, int t_next, const Stream& rng, int retry_cap) {
  if (st.j >= kMaxLevels) throw Error("level cap " + std::to_string(kMaxLevels) + " reached");
  if (t_next == 2) {
    DyadicState out;
    out.s = st.s;
    out.j = st.j + 1;
    out.t = st.t;
    out.t.push_back(2);
    const std::size_t n = st.nodes.size();
    out.nodes.reserve(2 * n);
    out.weights.reserve(2 * n);
    out.exact.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      SymbolicWeight left = st.exact[i], right = st.exact[i];
      if (i == st.heavy) {
        // The heavy child takes 1/sqrt 2. At j = 0 it is the child at 1/2.
        SymbolicWeight heavy = st.exact[i], light = st.exact[i];
        ++heavy.roots;
        ++light.lows;
        left = st.j == 0 ? light : heavy;
        right = st.j == 0 ? heavy : light;
      } else {
        ++left.halves;
        ++right.halves;
      }
      out.nodes.push_back(2 * st.nodes[i]);
      out.nodes.push_back(2 * st.nodes[i] + 1);
      out.exact.push_back(left);
      out.exact.push_back(right);
      out.weights.push_back(left.value());
      out.weights.push_back(right.value());
    }
    out.heavy = st.j == 0 ? 1 : 2 * st.heavy;
    out.sigma_sq = sum_squares(out.weights);
    out.attempts = 0;
    if (find_heavy(out) != out.heavy) throw Error("heavy node tracking diverged");
    return out;
  }
  if (t_next != 1) throw Error("t must be 1 or 2");
  if (st.j == 0) throw Error("the first step must double");
  if (retry_cap < 1) throw Error("retry_cap must be positive");

  const double lambda = bernstein_threshold(st.sigma_sq, st.j);
  std::vector<std::uint8_t> bits(st.nodes.size()), best_bits;
  double best = std::numeric_limits<double>::infinity();
  int attempt = 0;
  bool accepted = false;
  while (attempt < retry_cap) {
    Stream coins = rng.split("attempt", static_cast<std::uint64_t>(attempt));
    ++attempt;
    for (auto& b : bits) b = coins.coin() ? 1 : 0;
    const double m = chi_sum_max(st, bits);
    if (m < best) {
      best = m;
      best_bits = bits;
    }
    if (m <= lambda) {
      accepted = true;
      break;
    }
  }
  DyadicState out = with_children(st, best_bits);
  out.attempts = attempt;
  out.chi_max = best;
  out.threshold = lambda;
  out.flagged = !accepted;
  if (find_heavy(out) != out.heavy) throw Error("heavy node tracking diverged");
  return out;
}

double acceptance_rate(const DyadicState& st, const Stream& rng, int trials) {
  if (trials < 1) throw Error("acceptance_rate needs trials >= 1");
  if (st.j == 0) throw Error("the first step must double");
  const double lambda = bernstein_threshold(st.sigma_sq, st.j);
  std::vector<int> ok(static_cast<std::size_t>(trials));
  parallel_for(ok.size(), [&](std::size_t i) {
    Stream coins = rng.split("trial", i);
    std::vector<std::uint8_t> bits(st.nodes.size());
    for (auto& b : bits) b = coins.coin() ? 1 : 0;
    ok[i] = chi_sum_max(st, bits) <= lambda ? 1 : 0;
  });
  return static_cast<double>(std::count(ok.begin(), ok.end(), 1)) / trials;
}

double heavy_mass(const DyadicState& st) { return st.weights.at(st.heavy); }

bool heavy_chain_exact(const DyadicState& st) {
  const SymbolicWeight& w = st.exact.at(st.heavy);
  return w.lows == 0 && 2 * w.halves + w.roots == st.doublings();
}

std::vector<DyadicState> build(double s, int J, const Stream& rng, int retry_cap) {
  if (J > kMaxLevels) throw Error("at most " + std::to_string(kMaxLevels) + " levels");
  const auto t = t_sequence(s, J);
  std::vector<DyadicState> out{initial_state(s)};
  out.reserve(static_cast<std::size_t>(J) + 1);
  for (int j = 0; j < J; ++j) out.push_back(grow_level(out.back(), t[j], rng.split("level", j), retry_cap));
  return out;
}

std::string validate(const DyadicState& st) {
  const std::size_t n = st.nodes.size();
  if (st.weights.size() != n || st.exact.size() != n) return "node and weight counts differ";
  if (static_cast<int>(st.t.size()) != st.j) return "t prefix length differs from level";
  const std::uint64_t cells = std::uint64_t{1} << st.j;
  for (std::size_t i = 0; i < n; ++i) {
    if (st.nodes[i] >= cells) return "node outside [0, 1)";
    if (i > 0 && st.nodes[i] <= st.nodes[i - 1]) return "nodes not strictly increasing";
    if (!(st.weights[i] > 0.0)) return "nonpositive weight";
    if (st.weights[i] != st.exact[i].value()) return "weight differs from its exact form";
  }
  if (n != (std::size_t{1} << st.doublings())) return "node count differs from prod t";
  double mass = 0.0;
  for (double w : st.weights) mass += w;
  if (std::abs(mass - 1.0) > 1e-12) return "mass differs from 1";
  if (std::abs(st.sigma_sq - sum_squares(st.weights)) > 1e-15) return "sigma_sq differs from sum of squares";
  if (st.j > 0 && find_heavy(st) != st.heavy) return "heavy index is not a_j";
  if (!heavy_chain_exact(st)) return "heavy weight is not (prod t)^{-1/2}";
  return {};
}

IncrementReport increment_bound_check(const DyadicState& a, const DyadicState& b, double C, double eps) {
  if (b.j != a.j + 1 || b.t.size() != a.t.size() + 1 ||
      !std::equal(a.t.begin(), a.t.end(), b.t.begin()))
    throw Error("increment_bound_check needs consecutive states");
  const int j = a.j;
  IncrementReport rep;
  rep.j = j;
  rep.C = C;
  rep.eps = eps;
  const std::size_t N = std::size_t{1} << (j + 1);
  std::vector<cplx> va(N), vb(N);
  for (std::size_t i = 0; i < a.nodes.size(); ++i) va[2 * a.nodes[i]] += a.weights[i];
  for (std::size_t i = 0; i < b.nodes.size(); ++i) vb[b.nodes[i]] += b.weights[i];
  const auto Pa = fft::dft(va), Pb = fft::dft(vb);
  const bool doubling = b.t.back() == 2;
  const double p_heavy = heavy_mass(a);
  const double decay = std::exp2(-(a.s - eps) * j / 2.0);
  const auto K = static_cast<std::int64_t>(std::size_t{1} << (j + 4));

  // |phi(-k)| = |phi(k)| for real measures, so k >= 0 suffices.
  constexpr std::size_t kChunks = 64;
  struct Local {
    double ratio = 0.0;
    std::int64_t k = 0;
    double doubling = 0.0;
  };
  std::vector<Local> local(kChunks);
  parallel_for(kChunks, [&](std::size_t c) {
    const std::int64_t lo = (K + 1) * static_cast<std::int64_t>(c) / kChunks;
    const std::int64_t hi = (K + 1) * static_cast<std::int64_t>(c + 1) / kChunks;
    Local& L = local[c];
    for (std::int64_t k = lo; k < hi; ++k) {
      const auto idx = static_cast<std::size_t>(k) & (N - 1);
      const double kd = static_cast<double>(k);
      const cplx pre_b = step_prefactor(j + 1, kd);
      const cplx fa = k == 0 ? cplx(1.0) * Pa[0] : step_prefactor(j, kd) * Pa[idx];
      const cplx fb = k == 0 ? Pb[0] : pre_b * Pb[idx];
      const double diff = std::abs(fb - fa);
      const double bound = std::min(1.0, static_cast<double>(N) / std::max<double>(kd, 1.0)) * decay;
      const double r = diff / bound;
      if (r > L.ratio) {
        L.ratio = r;
        L.k = k;
      }
      if (doubling && idx != 0) {
        const double d = diff / ((std::numbers::sqrt2 - 1.0) * std::abs(pre_b) * p_heavy);
        L.doubling = std::max(L.doubling, d);
      }
    }
  });
  for (const auto& L : local) {
    if (L.ratio > rep.max_ratio) {
      rep.max_ratio = L.ratio;
      rep.witness_k = L.k;
    }
    rep.doubling_ratio = std::max(rep.doubling_ratio, L.doubling);
  }
  if (rep.max_ratio > C) {
    rep.pass = false;
    rep.violation = "level " + std::to_string(j) + " ratio " + std::to_string(rep.max_ratio) + " at k=" +
                    std::to_string(rep.witness_k);
  }
  if (rep.doubling_ratio > 1.0 + 1e-9) {
    rep.pass = false;
    if (!rep.violation.empty()) rep.violation += "; ";
    rep.violation += "level " + std::to_string(j) + " doubling step exceeds (sqrt2-1) bound";
  }
  return rep;
}

SigmaReport sigma_recursion_check(const std::vector<DyadicState>& traj, double tol) {
  if (traj.size() < 2) throw Error("sigma_recursion_check needs at least two levels");
  SigmaReport rep;
  double rec = traj.front().sigma_sq;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const DyadicState& st = traj[i];
    if (i > 0) {
      const DyadicState& prev = traj[i - 1];
      if (st.t.back() == 2) {
        const double p = heavy_mass(prev);
        rec = rec / 2.0 + (1.5 - std::numbers::sqrt2) * p * p;
      }
    }
    const double direct = sum_squares(st.weights);
    rep.direct.push_back(direct);
    rep.recursed.push_back(rec);
    const double diff = std::abs(direct - rec);
    if (diff > rep.max_abs_diff) {
      rep.max_abs_diff = diff;
      rep.witness_level = st.j;
    }
    const double prod = std::ldexp(1.0, st.doublings());
    if (direct > (st.doublings() + 1) / prod * (1.0 + 1e-12)) rep.bound_pass = false;
    if (direct > st.doublings() / prod * (1.0 + 1e-12)) rep.count_bound_failures.push_back(st.j);
  }
  rep.recursion_pass = rep.max_abs_diff <= tol;
  return rep;
}

double taper(double x, double delta) {
  if (!(delta > 0.0 && delta <= 0.5)) throw Error("taper needs 0 < delta <= 1/2");
  // Smooth step e^{-1/u} / (e^{-1/u} + e^{-1/(1-u)}) on each margin.
  auto step = [](double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
    return a / (a + b);
  };
  return step(x / delta) * step((1.0 - x) / delta);
}

double taper_delta(const std::vector<int>& t) {
  int seen = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] == 2 && ++seen == 2) return std::ldexp(1.0, -static_cast<int>(i + 1));
  }
  throw Error("taper_delta needs two doublings");
}

AtomicMeasure tapered_measure(const DyadicState& st, double delta) {
  using GL = boost::math::quadrature::gauss<double, 8>;
  // Boost stores the nonnegative abscissae of the symmetric rule.
  std::vector<double> u, wu;
  for (std::size_t i = 0; i < GL::abscissa().size(); ++i) {
    const double x = GL::abscissa()[i], w = GL::weights()[i];
    u.push_back(-x);
    wu.push_back(w);
    if (x != 0.0) {
      u.push_back(x);
      wu.push_back(w);
    }
  }
  const double h = std::ldexp(1.0, -st.j);
  std::vector<double> pos, wt;
  pos.reserve(st.nodes.size() * u.size());
  wt.reserve(st.nodes.size() * u.size());
  for (std::size_t i = 0; i < st.nodes.size(); ++i) {
    const double left = static_cast<double>(st.nodes[i]) * h;
    for (std::size_t q = 0; q < u.size(); ++q) {
      const double x = left + h * (1.0 + u[q]) / 2.0;
      pos.push_back(x);
      wt.push_back(st.weights[i] * wu[q] / 2.0 * taper(x, delta));
    }
  }
  return AtomicMeasure(std::move(pos), std::move(wt), Interval{0.0, 1.0});
}

}  // namespace salem::cantor
