#pragma once
// Salem's random Cantor convolution with one raised and one lowered weight per level.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "salem/measure.hpp"
#include "salem/rng.hpp"

namespace salem::convolution {

inline constexpr double kThresholdC = 4.0;
inline constexpr int kMaxLevels = 12;
inline constexpr int kDefaultRetryCap = 10000;
// Largest half-enumeration a_r_min will build.
inline constexpr std::uint64_t kHalfEnumerationCap = 10'000'000;

struct LevelParams {
  int k = 0;
  int d = 0;
  double r = 0;
  double L = 0;
  double t = 0;
  double l = 0;
  std::vector<double> x;
  std::vector<double> p;
  double a_r_min = 0;
  double threshold = 0;
  int attempts = 0;
};

struct Instance {
  double s = 0;
  std::vector<LevelParams> levels;
  ProductMeasure measure;
  // prod_{k <= n} l_k for n = 0..K.
  std::vector<double> scale;
};

// d = k + 1 and L = d^{-1/s}.
int level_d(int k);
double level_L(int k, double s);
// max(1, sqrt(ln k)).
double level_r(int k);
// (1 - (k+1)^-2) L + t L (k+1)^-2.
double level_l(int k, double s, double t);

// Minimum of |sum m_j x_j| over nonzero integer m with |m_j| <= 2r and sum m_j = 0,
// by meet in the middle. Throws Error when a half enumeration exceeds the cap.
double a_r_min(const std::vector<double>& points, double r);

// Checks 0 < x_1 < 1/d - L, L < gaps < 1/d and x_d < 1 - L. Empty string when valid.
std::string point_violation(const std::vector<double>& x, int k, double s);

struct PointSample {
  std::vector<double> x;
  double a_r_min = 0;
  double threshold = 0;
  int attempts = 0;
};
// Uniform x_1 and gaps, rejected until a_r_min >= (C r_k)^{-2 d_k}.
PointSample sample_points(int k, double s, Stream& rng, int retry_cap = kDefaultRetryCap);

std::vector<double> weights(int k);

// Draws t_k from the stream unless t_override is given. Level k uses the
// streams split("points", k) and split("t", k).
Instance build(double s, int K, const std::optional<std::vector<double>>& t_override, const Stream& rng,
               int retry_cap = kDefaultRetryCap);

// Entry N - 1 holds prod_{k<=N} max p / min p = (N+1)(N+2)/2, computed exactly.
std::vector<double> ratio_sequence(int K);

struct AhlforsLevel {
  int n = 0;
  double r = 0;
  double r_pow_s = 0;
  double min_mass = 0;
  double max_mass = 0;
  double lower = 0;
  double upper = 0;
  // max(max_mass / upper, lower / min_mass); at most 1 when the level passes.
  double worst_ratio = 0;
  std::vector<int> min_witness;
  std::vector<int> max_witness;
  bool pass = true;
};

struct AhlforsReport {
  std::vector<AhlforsLevel> levels;
  double worst_ratio = 0;
  bool pass = true;
  std::string violation;
};

// Sandwich (n+1)^{-1} r^s <= mass <= (n+1) r^s over all n-intervals, n = 0..K.
// A product mass is extreme exactly when each factor weight is, so per-level
// extremes decide every interval. eps is a relative tolerance.
AhlforsReport ahlfors_check(const Instance& inst, double eps = 1e-12);

// Explicit enumeration of every n-interval mass; for cross-checks at small K.
std::vector<std::vector<double>> all_interval_masses(const Instance& inst);

// Checks stored levels against the point invariants and the factor atoms.
std::string revalidate(const Instance& inst);

}  // namespace salem::convolution
