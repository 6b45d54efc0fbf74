#pragma once
// Random dyadic Cantor measure grown by Bernstein-threshold rejection, with a
// heavy node whose mass is (t_1...t_j)^{-1/2}.

#include <cstdint>
#include <string>
#include <vector>

#include "salem/measure.hpp"
#include "salem/rng.hpp"

namespace salem::cantor {

inline constexpr int kDefaultRetryCap = 64;
inline constexpr int kMaxLevels = 30;

// 2^{-halves} * (sqrt 2)^{-roots} * (1 - 1/sqrt 2)^{lows}. Every weight of the
// construction has this form.
struct SymbolicWeight {
  int halves = 0;
  int roots = 0;
  int lows = 0;
  double value() const;
  friend bool operator==(const SymbolicWeight&, const SymbolicWeight&) = default;
};

struct DyadicState {
  double s = 0.5;
  int j = 0;
  // Numerators of the nodes a = n 2^-j, strictly increasing.
  std::vector<std::uint64_t> nodes;
  std::vector<double> weights;
  std::vector<SymbolicWeight> exact;
  std::vector<int> t;  // t_1..t_j
  double sigma_sq = 1.0;
  // Index of a_j in nodes. At j = 0 it points at node 0, which takes the
  // heavy split of the first step.
  std::size_t heavy = 0;
  // Rejection bookkeeping of the step that produced this level.
  int attempts = 0;
  double chi_max = 0.0;
  double threshold = 0.0;
  bool flagged = false;  // retry cap hit; best candidate kept

  int doublings() const;
  StepDensity density() const;
};

// A_0 = {0} with unit mass.
DyadicState initial_state(double s);

// t_1 = 2 and t_j = 1 exactly when t_1...t_{j-1} >= 2^{sj}. Requires 0 < s <= 1.
std::vector<int> t_sequence(double s, int J);

// 2 sqrt 2 sqrt(sigma_sq) sqrt((j + 4) ln 2).
double bernstein_threshold(double sigma_sq, int j);

// max_k |sum_a chi_a(k)| over k = 0..2^{j+1}-1 for the candidate that keeps
// child offset bit[i] * 2^-(j+1) of node i. Computed with one FFT.
double chi_sum_max(const DyadicState& state, const std::vector<std::uint8_t>& bits, std::uint64_t* witness = nullptr);

// Attempt n draws its coins from rng.split("attempt", n).
DyadicState grow_level(const DyadicState& state, int t_next, const Stream& rng, int retry_cap = kDefaultRetryCap);

// Fraction of independent single draws accepted at the next t = 1 step.
double acceptance_rate(const DyadicState& state, const Stream& rng, int trials);

// p_{j, a_j}.
double heavy_mass(const DyadicState& state);
// The heavy weight's exponents equal (prod t)^{-1/2} symbolically.
bool heavy_chain_exact(const DyadicState& state);

// Levels 0..J; level j uses rng.split("level", j).
std::vector<DyadicState> build(double s, int J, const Stream& rng, int retry_cap = kDefaultRetryCap);

// Structural invariants of one state; empty string when valid.
std::string validate(const DyadicState& state);

struct IncrementReport {
  int j = 0;
  double C = 0.0;
  double eps = 0.0;
  double max_ratio = 0.0;
  std::int64_t witness_k = 0;
  // For a doubling step: max of diff / ((sqrt2 - 1) |prefactor_{j+1}| p_{j,a_j}).
  double doubling_ratio = 0.0;
  bool pass = true;
  std::string violation;
};

// |phi_{j+1}^(k) - phi_j^(k)| against C min(1, 2^{j+1}/|k|) 2^{-(s-eps)j/2}
// over |k| <= 2^{j+4}.
IncrementReport increment_bound_check(const DyadicState& a, const DyadicState& b, double C, double eps);

struct SigmaReport {
  std::vector<double> direct;
  std::vector<double> recursed;
  double max_abs_diff = 0.0;
  int witness_level = -1;
  bool recursion_pass = true;
  // sigma_j^2 <= (#doublings + 1) / prod t, which covers sigma_0^2 = 1.
  bool bound_pass = true;
  // Levels where sigma_j^2 > #doublings / prod t.
  std::vector<int> count_bound_failures;
};

SigmaReport sigma_recursion_check(const std::vector<DyadicState>& trajectory, double tol = 1e-12);

// Smooth cutoff equal to 1 on [delta, 1 - delta] and 0 outside (0, 1).
double taper(double x, double delta);
// 2^{-j0} with j0 the level of the second doubling.
double taper_delta(const std::vector<int>& t);

// psi * phi_j as atoms at 8 Gauss-Legendre nodes per cell; transforms are
// accurate to about 1e-10 relative for |xi| < 2^j.
AtomicMeasure tapered_measure(const DyadicState& state, double delta);

}  // namespace salem::cantor
