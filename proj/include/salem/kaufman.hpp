#pragma once
// Kaufman-type measures built from prime periodizations of a fixed bump phi:
// the target mu with positive Fourier coefficients and the auxiliary nu.
// Level 0 is F_0(x) = 2 phi(2x); levels i >= 1 use the scale q_i.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "salem/measure.hpp"

namespace salem::kaufman {

inline constexpr double kTailBudget = 1e-8;
// Largest array a coefficient convolution may allocate.
inline constexpr std::size_t kMaxConvolutionLength = std::size_t{1} << 24;

// Building blocks of phi -------------------------------------------------

// sin(pi xi) / (pi xi).
double phi1_hat(double xi);
// phi2_hat(xi) = i * phi2_hat_imag(xi) = i (pi xi cos pi xi - sin pi xi) / (pi xi)^2.
double phi2_hat_imag(double xi);
// psi = phi1 * phi1 + phi2 * phi2^- = (2/3)(1 - |x|)^2 (|x| + 2) on |x| <= 1.
double psi(double x);
// psi_hat = phi1_hat^2 + phi2_hat_imag^2 >= 0 and psi_hat(0) = 1.
double psi_hat(double xi);
// g = psi * psi on [-2, 2], piecewise polynomial, evaluated by exact Gauss-Legendre.
double psi_conv(double x);

// phi = A1 phi0 + A2 g(4x) with phi_hat = A1 phi0_hat + (A2 / 4) psi_hat(xi / 4)^2.
struct AuxPhi {
  double A1 = 0.0;
  double A2 = 0.0;
  // A1 before normalization (A2 = 1 there) and the number of doublings used.
  double A1_raw = 0.0;
  int doublings = 0;
  double sup = 0.0;     // phi(0) = max phi
  double sup_dd = 0.0;  // max |phi''| on a grid
  // c (1 + |xi|)^-4 <= phi_hat <= C (1 + |xi|)^-4 on |xi| <= 1e4.
  double quartic_lower = 0.0;
  double quartic_upper = 0.0;
  // max over grid xi and |r| <= 1 of max(phi_hat(xi + r) / phi_hat(xi), inverse).
  double shift_ratio = 0.0;
  double integral = 0.0;  // Gauss-Legendre integral of phi
  double grid_min = 0.0;  // min of phi on a 2^16-point grid of [-1, 1]
};

double phi_value(const AuxPhi& phi, double x);
double phi_hat(const AuxPhi& phi, double xi);
// Upper bound for phi_hat(xi) valid for |xi| > 400, where phi0_hat vanishes:
// (A2 / 4) (2 + 3/x)^2 / x^4 with x = pi |xi| / 4.
double phi_hat_tail_bound(const AuxPhi& phi, double xi);

// A2 = 1, A1 = 1 doubled until phi >= 0 on the grid, then both scaled so
// that int phi = 1. Throws Error with a witness when an invariant fails.
AuxPhi build_phi();

// Empty when every invariant holds; otherwise the first violation with a witness.
std::string phi_violation(const AuxPhi& phi);

// Gauss-Legendre nodes and weights on [-1, 1] adapted to the pieces of phi,
// so sum_n w_n f(y_n) phi(y_n) integrates f phi for smooth f.
struct BumpRule {
  std::vector<double> y;
  std::vector<double> w;  // includes phi(y)
};
BumpRule bump_rule(const AuxPhi& phi);

// Parameters ----------------------------------------------------------------

enum class Variant { mu, nu };
std::string variant_name(Variant v);

struct KaufmanParams {
  double s = 1.0;
  std::vector<double> q;  // q_1 < q_2 < ...
  double C_s = 1.0;
  bool cs_calibrated = false;
  std::vector<double> h;  // h(i) = C_s ln q_i
  // Per level i >= 1, stored at index i - 1. P_mu contains 1.
  std::vector<std::vector<std::uint32_t>> P_mu;
  std::vector<std::vector<std::uint32_t>> P_nu;
  // q_i^{s/2} / 2 < 2, so P_mu = {1}.
  std::vector<bool> trivial_mu;

  int levels() const { return static_cast<int>(q.size()); }
  const std::vector<std::uint32_t>& primes(int i, Variant v) const;
  // q_i^{s/2} / h(i), the lower end of P_nu.
  double nu_floor(int i) const;
  double mu_ceiling(int i) const;  // q_i^{s/2} / 2
};

// Primes <= n by the sieve of Eratosthenes.
std::vector<std::uint32_t> primes_up_to(std::uint32_t n);

// Sieves both prime sets. Without C_s the calibration below is used.
// Throws when s is outside (0, 1], q is not increasing with q_1 > 1, or some P_nu is empty.
KaufmanParams make_params(double s, std::vector<double> q, std::optional<double> C_s = std::nullopt);

// [(X/(X - 1)) * #P_mu / #P_nu] for level i, X = nu_floor(i); infinite when X <= 1.
double comparison_factor(const KaufmanParams& p, int i);

// Smallest C_s = 2^e, e in [-8, 16], with P_nu nonempty and nu_floor > 1 at every
// level and prod_i comparison_factor <= 4. Throws when none qualifies.
double calibrate_cs(double s, const std::vector<double>& q);

// Coefficients --------------------------------------------------------------

// Fourier coefficient of F_i at integer k. Level 0 gives phi_hat(k / 2) for both variants.
double coeff_F(int i, Variant v, std::int64_t k, const KaufmanParams& p, const AuxPhi& phi);

// F_i(x), 1-periodic for i >= 1; F_0(x) = 2 phi(2x).
double factor_value(int i, Variant v, double x, const KaufmanParams& p, const AuxPhi& phi);
// 2 phi(2x) prod_{1 <= i <= n} F_i(x).
double product_density(int n, Variant v, double x, const KaufmanParams& p, const AuxPhi& phi);

struct CoeffSequence {
  std::string level;
  std::int64_t K = 0;
  std::vector<double> c;  // c[k + K] for |k| <= K
  // Bound on |computed - exact| at every stored k.
  double tail_bound = 0.0;
  double at(std::int64_t k) const;
};

// Fourier coefficients of the level-n product for |k| <= K_out by iterated
// discrete convolution, each earlier product truncated where its neglected
// l1 mass, times the next factor's sup, stays within the budget. Throws Error
// when a required array exceeds kMaxConvolutionLength.
CoeffSequence product_coeffs(int n, Variant v, const KaufmanParams& p, const AuxPhi& phi, std::int64_t K_out,
                             double budget = kTailBudget);

// The level-n product discretized as atoms: Gauss-Legendre nodes of every bump
// of F_n weighted by the explicit density of the earlier levels. Its transform
// approximates the level-n product transform for |xi| <= 4 q_n.
AtomicMeasure discretize(int n, Variant v, const KaufmanParams& p, const AuxPhi& phi);

// Band envelope of |discretize(n)^| at integer frequencies.
FourierProfile decay_profile(int n, Variant v, const KaufmanParams& p, const AuxPhi& phi, const BandOptions& opt);

// Checks --------------------------------------------------------------------

struct PositivityReport {
  int n = 0;
  std::int64_t K_out = 0;
  double min_value = 0.0;
  std::int64_t witness_k = 0;
  double error_bound = 0.0;
  bool pass = false;  // min_value > error_bound
  std::string method;
};

// Level-n mu coefficients for 0 <= k <= K_out (they are even in k).
// Uses product_coeffs when feasible. Otherwise the earlier levels are truncated
// at a fixed radius: every term is nonnegative, so the result is a lower bound
// and only FFT rounding enters error_bound.
PositivityReport positivity_check(int n, const KaufmanParams& p, const AuxPhi& phi, std::int64_t K_out);

struct StabilityReport {
  int level = 0;
  std::int64_t K = 0;
  double psi_norm = 0.0;  // ||psi||_inf + ||psi''||_inf
  double max_diff = 0.0;  // max_k |(psi F_i)^(k) - psi^(k)|
  std::int64_t witness_k = 0;
  // max_k of the difference over psi_norm times q^{-s/2} (ln q)^2 for |k| <= q,
  // |k|^{-s/2} (ln |k|)^2 beyond.
  double implied_constant = 0.0;
};

// psi given by its coefficients, which must cover |k| <= K plus the tail of psi.
StabilityReport stability_check(const CoeffSequence& psi_hat, double psi_sup, double psi_dd_sup, int i,
                                const KaufmanParams& p, const AuxPhi& phi, std::int64_t K);

struct FrostmanReport {
  int n = 0;
  double radius = 0.0;  // 1 / q_n
  double sup_ball = 0.0;
  double witness_x = 0.0;
  // q_n^{-s} ln q_n prod_{i<n} q_i^{1-s} ln q_i prod_{i<=n} h(i).
  double bound = 0.0;
  double constant = 0.0;  // (sup_ball / bound)^{1/n}
  int samples_per_ball = 0;
  // Per level i = 1..n.
  std::vector<double> sup_factor;        // max of F_i^nu over bump centers
  std::vector<double> predicted_factor;  // single bump at the smallest prime
  std::vector<double> factor_constant;   // sup_factor / (q^{1-s} ln q h)
  std::vector<double> min_separation;    // min |m/p - m'/p'| q^s / 4 over distinct pairs
  bool separated = true;
  bool pass = true;
};

// Ball masses of the level-n nu density over B(x, 1/q_n) on a grid with
// samples_per_ball cells per radius near the support.
FrostmanReport frostman_nu(int n, const KaufmanParams& p, const AuxPhi& phi, int samples_per_ball = 64);

struct ComparisonReport {
  int level = 0;
  double factor = 0.0;
  std::size_t grid_points = 0;
  double max_ratio = 0.0;  // max F^nu / (factor F^mu) over points with F^mu > 0
  double witness_x = 0.0;
  int n = 0;
  int samples = 0;
  double exponent = 0.99;
  double C_only = 0.0;  // max |nu^(k+l)| / mu^(k)
  double C = 0.0;       // fitted pair minimizing C + C_eps
  double C_eps = 0.0;
  bool pass = true;
};

// (a) pointwise factor inequality at level i on a 2^16 grid plus every
// Gauss-Legendre node of every nu bump; throws Error on a violation.
// (b) |nu^(k + l)| <= C mu^(k) + C_eps (1 + |k|)^{-exponent} over sampled
// 2 q_n < |k| <= 8 q_n and |l| < q_n / 2, with coefficient-domain products.
ComparisonReport comparison_checks(int i, int n, const KaufmanParams& p, const AuxPhi& phi, int samples = 500,
                                   std::uint64_t seed = 0, double exponent = 0.99);

struct DivisorReport {
  int level = 0;
  int samples = 0;
  double constant = 0.0;  // max deviation / (ln|k| / ln X + #P_nu / X)
  std::int64_t witness_k = 0;
};

// |#{p | k} - sum_{p not | k} 1 / (p - 1)| over P_nu for k = 1..k_max.
DivisorReport divisor_check(int i, const KaufmanParams& p, std::int64_t k_max);

}  // namespace salem::kaufman
