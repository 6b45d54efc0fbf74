#include "salem/brownian.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "salem/parallel.hpp"

namespace salem::brownian {
namespace {

struct LineFit {
  double slope = 0.0;
  double stderr = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  if (x.size() > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - my - f.slope * (x[i] - mx);
      rss += r * r;
    }
    f.stderr = std::sqrt(rss / (n - 2) / sxx);
  }
  return f;
}

}  // namespace

BrownianPath simulate_path(std::size_t n_grid, std::uint64_t seed) {
  if (n_grid < 1024 || !std::has_single_bit(n_grid)) throw Error("n_grid must be a power of two >= 2^10");
  BrownianPath p;
  p.seed = seed;
  p.times.resize(n_grid + 1);
  p.values.resize(n_grid + 1);
  Stream rng(seed);
  const double sd = std::sqrt(1.0 / static_cast<double>(n_grid));
  for (std::size_t i = 0; i <= n_grid; ++i) p.times[i] = static_cast<double>(i) / static_cast<double>(n_grid);
  for (std::size_t i = 0; i < n_grid; ++i) p.values[i + 1] = p.values[i] + sd * rng.normal();
  return p;
}

BrownianPath sample_path(const std::vector<double>& times, std::uint64_t seed) {
  BrownianPath p;
  p.seed = seed;
  p.times.reserve(times.size() + 1);
  p.values.reserve(times.size() + 1);
  p.times.push_back(0.0);
  p.values.push_back(0.0);
  Stream rng(seed);
  for (double t : times) {
    if (!(t > p.times.back() && t <= 1.0)) throw Error("sample times must increase within (0, 1]");
    p.values.push_back(p.values.back() + std::sqrt(t - p.times.back()) * rng.normal());
    p.times.push_back(t);
  }
  return p;
}

double path_value(const BrownianPath& path, double t) {
  if (path.times.empty() || t < path.times.front() || t > path.times.back())
    throw Error("time outside the sampled path");
  const auto it = std::lower_bound(path.times.begin(), path.times.end(), t);
  const auto i = static_cast<std::size_t>(it - path.times.begin());
  if (*it == t) return path.values[i];
  const double t0 = path.times[i - 1], t1 = path.times[i];
  return path.values[i - 1] + (path.values[i] - path.values[i - 1]) * (t - t0) / (t1 - t0);
}

double holder_quotient(const BrownianPath& path, double alpha) {
  const std::size_t n = path.times.size() - 1;
  if (n < 1 || !std::has_single_bit(n)) throw Error("holder_quotient needs a uniform dyadic grid");
  double best = 0.0;
  for (std::size_t L = 1; L <= n; L *= 2) {
    double m = 0.0;
    for (std::size_t i = 0; i + L <= n; ++i) m = std::max(m, std::abs(path.values[i + L] - path.values[i]));
    best = std::max(best, m / std::pow(static_cast<double>(L) / static_cast<double>(n), alpha));
  }
  return best;
}

BaseMeasure base_measure(double s, int J) {
  if (!(s > 0.0 && s <= 0.5)) throw Error("base_measure needs 0 < s <= 1/2");
  if (J < 1 || J > 40) throw Error("base_measure needs 1 <= J <= 40");
  BaseMeasure b;
  b.s = s;
  b.J = J;
  b.t = cantor::t_sequence(s, J);
  std::vector<std::uint64_t> nodes{0};
  std::vector<cantor::SymbolicWeight> w{cantor::SymbolicWeight{}};
  for (int j = 0; j < J; ++j) {
    if (b.t[static_cast<std::size_t>(j)] == 1) {
      for (auto& n : nodes) n *= 2;
      continue;
    }
    std::vector<std::uint64_t> nn;
    std::vector<cantor::SymbolicWeight> nw;
    nn.reserve(2 * nodes.size());
    nw.reserve(2 * nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      auto left = w[i], right = w[i];
      if (nodes[i] == 0) {
        ++left.roots;
        ++right.lows;
      } else {
        ++left.halves;
        ++right.halves;
      }
      nn.push_back(2 * nodes[i]);
      nn.push_back(2 * nodes[i] + 1);
      nw.push_back(left);
      nw.push_back(right);
    }
    nodes = std::move(nn);
    w = std::move(nw);
  }
  std::vector<double> values;
  values.reserve(w.size());
  for (const auto& x : w) values.push_back(x.value());
  b.density = StepDensity(J, std::move(nodes), std::move(values));
  b.exact = std::move(w);
  return b;
}

BallConditionReport ball_conditions(const BaseMeasure& b) {
  BallConditionReport rep;
  const StepDensity& d = b.density;
  int c = 0;
  for (int j = 1; j <= b.J; ++j) {
    c += b.t[static_cast<std::size_t>(j - 1)] == 2;
    const double r = std::ldexp(1.0, -j);
    const double expected = cantor::SymbolicWeight{0, c, 0}.value();
    rep.origin_error = std::max(rep.origin_error, std::abs(ball_mass(d, r / 2, r / 2) - expected));
  }
  rep.origin_exact = rep.origin_error <= 1e-12;

  const auto& nodes = d.nodes();
  std::vector<double> best(nodes.size(), 0.0);
  std::vector<int> best_j(nodes.size(), 0);
  parallel_for(nodes.size(), [&](std::size_t i) {
    if (nodes[i] == 0) return;
    const double x = std::ldexp(static_cast<double>(nodes[i]), -b.J);
    for (int j = 1; j <= b.J; ++j) {
      const double r = std::ldexp(1.0, -j);
      const double bound = std::min(1.0, std::pow(x, -b.s / 2) * std::exp2(-b.s * j));
      const double ratio = ball_mass(d, x + r / 2, r / 2) / bound;
      if (ratio > best[i]) {
        best[i] = ratio;
        best_j[i] = j;
      }
    }
  });
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (best[i] > rep.away_constant) {
      rep.away_constant = best[i];
      rep.witness_x = std::ldexp(static_cast<double>(nodes[i]), -b.J);
      rep.witness_j = best_j[i];
    }
  }
  return rep;
}

std::vector<double> cell_centers(const BaseMeasure& b) {
  std::vector<double> c;
  c.reserve(b.density.nodes().size());
  for (auto n : b.density.nodes()) c.push_back(std::ldexp(static_cast<double>(n) + 0.5, -b.J));
  return c;
}

AtomicMeasure pushforward(const BaseMeasure& b, const BrownianPath& path) {
  const auto centers = cell_centers(b);
  const double h = std::ldexp(1.0, -b.J);
  std::vector<double> x;
  x.reserve(centers.size());
  for (double t : centers) {
    const auto it = std::lower_bound(path.times.begin(), path.times.end(), t);
    if (it == path.times.end()) throw Error("path does not reach the cell centers");
    if (*it != t && (it == path.times.begin() || *it - *(it - 1) > h))
      throw Error("path resolution coarser than the level-" + std::to_string(b.J) + " cells");
    x.push_back(path_value(path, t));
  }
  return AtomicMeasure(std::move(x), b.density.weights());
}

DecayReport decay_mc(double s, int J, const std::vector<double>& xis, int n_paths, std::uint64_t seed) {
  if (n_paths < 100) throw Error("decay_mc needs at least 100 paths");
  if (xis.empty()) throw Error("decay_mc needs frequencies");
  const BaseMeasure b = base_measure(s, J);
  const auto centers = cell_centers(b);
  const Stream root(seed);
  std::vector<std::vector<double>> power(static_cast<std::size_t>(n_paths));
  parallel_for(power.size(), [&](std::size_t i) {
    const auto path = sample_path(centers, root.split("path", i).key());
    const auto image = pushforward(b, path);
    auto& row = power[i];
    row.reserve(xis.size());
    for (double xi : xis) row.push_back(std::norm(fourier_atomic(image, xi)));
  });

  DecayReport rep;
  rep.s = s;
  rep.J = J;
  rep.n_paths = n_paths;
  rep.seed = seed;
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < xis.size(); ++k) {
    DecayPoint p;
    p.xi = xis[k];
    double sum = 0, sum2 = 0;
    for (const auto& row : power) sum += row[k];
    p.mean = sum / n_paths;
    for (const auto& row : power) sum2 += (row[k] - p.mean) * (row[k] - p.mean);
    p.stderr = std::sqrt(sum2 / (n_paths - 1) / n_paths);
    const double xi = std::abs(p.xi);
    if (xi > 0) {
      p.constant = p.mean / (std::pow(xi, -2 * s) * std::max(std::log(xi), 1.0));
      rep.fitted_C = std::max(rep.fitted_C, p.constant);
      lx.push_back(std::log2(xi));
      ly.push_back(std::log2(p.mean));
    }
    rep.points.push_back(p);
  }
  if (lx.size() >= 2) {
    const auto f = fit_line(lx, ly);
    rep.fitted_slope = f.slope;
    rep.slope_stderr = f.stderr;
  }
  return rep;
}

BallProfile origin_ball_profile(const AtomicMeasure& image, int k_min, int k_max) {
  return fit_ball_exponents(image, {0.0}, dyadic_radii(k_min, k_max), Side::lower, "brownian origin");
}

}  // namespace salem::brownian
