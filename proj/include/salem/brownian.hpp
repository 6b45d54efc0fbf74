#pragma once
// Deterministic dyadic base measure with a heavy point at 0, pushed forward
// through Brownian paths.

#include <cstdint>
#include <string>
#include <vector>

#include "salem/cantor.hpp"
#include "salem/measure.hpp"
#include "salem/rng.hpp"

namespace salem::brownian {

struct BrownianPath {
  std::vector<double> times;   // strictly increasing, times[0] = 0
  std::vector<double> values;  // values[0] = 0
  std::uint64_t seed = 0;
};

// Uniform grid i / n_grid, i = 0..n_grid. n_grid must be a power of two >= 2^10.
BrownianPath simulate_path(std::size_t n_grid, std::uint64_t seed);
// Exact Brownian values at the given increasing times in (0, 1], prefixed by (0, 0).
BrownianPath sample_path(const std::vector<double>& times, std::uint64_t seed);
// Value at t by linear interpolation between path samples; exact on sample times.
double path_value(const BrownianPath& path, double t);

// max over dyadic lags L of max_i |W(t_{i+L}) - W(t_i)| / (L / n)^alpha on a uniform grid.
double holder_quotient(const BrownianPath& path, double alpha);

struct BaseMeasure {
  double s = 0.5;
  int J = 0;
  std::vector<int> t;
  StepDensity density;
  std::vector<cantor::SymbolicWeight> exact;
};

// A_{j+1} = A_j + {0, 1} 2^-(j+1) on doublings, the node 0 splitting
// (1/sqrt 2, 1 - 1/sqrt 2) and all others (1/2, 1/2). Requires 0 < s <= 1/2.
BaseMeasure base_measure(double s, int J);

struct BallConditionReport {
  // max_j |mu([0, 2^-j]) - (t_1...t_j)^{-1/2}| for j <= J.
  double origin_error = 0.0;
  bool origin_exact = true;
  // max over level-J nodes x > 0 and j <= J of mu([x, x + 2^-j]) / min(1, x^{-s/2} 2^{-sj}).
  double away_constant = 0.0;
  double witness_x = 0.0;
  int witness_j = 0;
};

BallConditionReport ball_conditions(const BaseMeasure& base);

// Atom at W(cell center) per cell with the cell mass. The path must resolve
// the level: sample spacing at most 2^-J, or exact samples at the centers.
AtomicMeasure pushforward(const BaseMeasure& base, const BrownianPath& path);

// Cell centers of the base measure in increasing order.
std::vector<double> cell_centers(const BaseMeasure& base);

struct DecayPoint {
  double xi = 0.0;
  double mean = 0.0;  // Monte Carlo mean of |mu_w^(xi)|^2
  double stderr = 0.0;
  // mean / (xi^{-2s} max(ln xi, 1)).
  double constant = 0.0;
};

struct DecayReport {
  double s = 0.0;
  int J = 0;
  int n_paths = 0;
  std::uint64_t seed = 0;
  std::vector<DecayPoint> points;
  double fitted_slope = 0.0;  // of log2 mean against log2 xi
  double slope_stderr = 0.0;
  double fitted_C = 0.0;      // max constant
};

// Path i is sampled exactly at the cell centers with seed Stream(seed).split("path", i).
DecayReport decay_mc(double s, int J, const std::vector<double>& xis, int n_paths, std::uint64_t seed);

// Lower-side ball exponent of the image measure around W(0) = 0 over radii 2^-k_min..2^-k_max.
BallProfile origin_ball_profile(const AtomicMeasure& image, int k_min, int k_max);

}  // namespace salem::brownian
