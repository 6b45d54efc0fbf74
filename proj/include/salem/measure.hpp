#pragma once
// Measures with exact Fourier transforms, band envelopes, and ball-mass fits.

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace salem {

using cplx = std::complex<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return lo <= x && x <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

class AtomicMeasure {
 public:
  AtomicMeasure() = default;
  // Sorts by position and merges coincident positions. Weights must be finite and >= 0.
  // Without a hint the support hint is [min position, max position].
  AtomicMeasure(std::vector<double> positions, std::vector<double> weights,
                std::optional<Interval> support_hint = std::nullopt);

  const std::vector<double>& positions() const { return x_; }
  const std::vector<double>& weights() const { return w_; }
  std::size_t size() const { return x_.size(); }
  bool empty() const { return x_.empty(); }
  double mass() const { return mass_; }
  const Interval& support_hint() const { return hint_; }

  // Mass of the closed interval [lo, hi].
  double mass_between(double lo, double hi) const;

  friend bool operator==(const AtomicMeasure& a, const AtomicMeasure& b) {
    return a.x_ == b.x_ && a.w_ == b.w_ && a.hint_ == b.hint_;
  }

 private:
  std::vector<double> x_, w_;
  std::vector<double> prefix_;  // prefix_[i] = sum of w_[0..i)
  Interval hint_;
  double mass_ = 0.0;
};

// Level-j dyadic step density: cell [a 2^-j, (a+1) 2^-j] carries mass p_a,
// i.e. density 2^j p_a. Only cells with stored nodes are nonzero.
class StepDensity {
 public:
  StepDensity() = default;
  StepDensity(int level, std::vector<std::uint64_t> nodes, std::vector<double> weights,
              std::optional<double> declared_mass = std::nullopt);

  int level() const { return level_; }
  const std::vector<std::uint64_t>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return w_; }
  double mass() const { return mass_; }
  double cell_width() const;
  // Left endpoints a 2^-j of the stored cells.
  std::vector<double> left_endpoints() const;

  friend bool operator==(const StepDensity& a, const StepDensity& b) {
    return a.level_ == b.level_ && a.nodes_ == b.nodes_ && a.w_ == b.w_;
  }

 private:
  int level_ = 0;
  std::vector<std::uint64_t> nodes_;
  std::vector<double> w_;
  std::vector<double> prefix_;
  double mass_ = 0.0;
};

// Smooth multiplicative window in frequency, resolved by kind from a registry.
struct Window {
  std::string kind;
  double dilation = 1.0;
  friend bool operator==(const Window&, const Window&) = default;
};
using WindowTransform = std::function<cplx(double xi, double dilation)>;
void register_window(const std::string& kind, WindowTransform transform);
const WindowTransform& find_window(const std::string& kind);

class ProductMeasure {
 public:
  ProductMeasure() = default;
  // Each factor must have mass 1 within 1e-12.
  ProductMeasure(std::vector<AtomicMeasure> factors, std::optional<Window> envelope = std::nullopt);

  const std::vector<AtomicMeasure>& factors() const { return factors_; }
  const std::optional<Window>& envelope() const { return envelope_; }
  // Sum of the factor support hints.
  Interval support() const;

  friend bool operator==(const ProductMeasure&, const ProductMeasure&) = default;

 private:
  std::vector<AtomicMeasure> factors_;
  std::optional<Window> envelope_;
};

struct Band {
  int m = 0;
  double envelope = 0.0;
  friend bool operator==(const Band&, const Band&) = default;
};

struct FourierProfile {
  std::vector<Band> bands;
  double fitted_beta = 0.0;
  // Half-width of the 95% interval on the exponent of |xi|, i.e. 1.96 * stderr / 2.
  double slack_epsilon = 0.0;
  // RMS residual of the fit in units of -2 log2(envelope).
  double residual = 0.0;
  double stderr_beta = 0.0;
  int discard_low_bands = 2;
  bool degenerate = false;
  std::string source;
  friend bool operator==(const FourierProfile&, const FourierProfile&) = default;
};

enum class Side { upper, lower };

struct BallSample {
  double x = 0.0;
  double r = 0.0;
  double mass = 0.0;
  friend bool operator==(const BallSample&, const BallSample&) = default;
};

struct BallProfile {
  std::vector<BallSample> samples;
  double fitted_alpha = 0.0;
  Side side = Side::lower;
  double stderr_alpha = 0.0;
  bool degenerate = false;
  std::string source;
  friend bool operator==(const BallProfile&, const BallProfile&) = default;
};

// Fourier transforms ------------------------------------------------------

// Sum_j w_j exp(-2 pi i x_j xi). Throws Error("empty measure") on an empty measure.
cplx fourier_atomic(const AtomicMeasure& m, double xi);
// Batch over frequencies, parallel with output order fixed by input order.
std::vector<cplx> fourier_atomic(const AtomicMeasure& m, const std::vector<double>& xis);

// Closed form sum_a p_a exp(-2 pi i k a) (1 - e^{-2 pi i k h}) / (2 pi i k h), h = 2^-j.
// Valid for real k as well as integers.
cplx fourier_step(const StepDensity& d, double k);
// Only the periodic part sum_a p_a exp(-2 pi i k a 2^-j).
cplx step_phase_sum(const StepDensity& d, double k);
// (1 - e^{-i theta}) / (i theta) with theta = 2 pi k 2^-j.
cplx step_prefactor(int level, double k);

cplx fourier_product(const ProductMeasure& p, double xi);
// Fully expanded convolution; throws Error when the atom count exceeds max_atoms.
AtomicMeasure expand(const ProductMeasure& p, std::size_t max_atoms = std::size_t{1} << 22);

// Band envelopes and fits ---------------------------------------------------

enum class Sampling { grid, jittered };

struct BandOptions {
  int m_min = 0;
  int m_max = 0;
  int samples_per_band = 256;
  Sampling sampling = Sampling::jittered;
  std::uint64_t seed = 0;
  int discard_low_bands = 2;
  // Round samples down to integers, for coefficient sequences.
  bool integer_frequencies = false;
  std::string source;
};

// Sample points of band m. The first n points do not depend on samples_per_band,
// so raising the sample count only adds points.
std::vector<double> band_samples(int m, const BandOptions& opt);

// Envelope of |eval| over positive frequencies per band, then a decay fit.
// Too few bands or a numerically zero envelope give degenerate = true.
FourierProfile band_envelope(const std::function<cplx(double)>& eval, const BandOptions& opt);

struct DecayFit {
  double beta = 0.0;
  double stderr = 0.0;
};
// Least-squares slope of -2 log2(envelope) against m over bands above the
// discarded ones. Throws Error on fewer than 4 bands or a zero envelope.
DecayFit fit_decay_exponent(FourierProfile& profile, int discard_low_bands = 2);

// Ball masses -------------------------------------------------------------

// Closed ball [x - r, x + r]; atoms on the boundary count fully.
double ball_mass(const AtomicMeasure& m, double x, double r);
// Exact integral of the step density over [x - r, x + r].
double ball_mass(const StepDensity& d, double x, double r);

// 2^-k_min, ..., 2^-k_max.
std::vector<double> dyadic_radii(int k_min, int k_max);

// Per radius, the maximum mass over the given centers; alpha is the slope of
// log2(mass) against log2(r). Radii must halve at each step; at least 4 radii.
BallProfile fit_ball_exponents(const AtomicMeasure& m, const std::vector<double>& centers,
                               const std::vector<double>& radii, Side side, std::string source = "");
BallProfile fit_ball_exponents(const StepDensity& d, const std::vector<double>& centers,
                               const std::vector<double>& radii, Side side, std::string source = "");

// One-line combination ----------------------------------------------------

struct OneLineResult {
  AtomicMeasure measure;
  double taper_mass = 0.0;  // integral of the taper against nu
  bool degenerate = false;  // taper_mass == 0
};

// phi0(x) (x - x0)^2.
double one_line_taper(double x, double x0);
// nu(. + 1) plus taper * nu. nu must live in [0, 1] and have an atom at x0.
OneLineResult one_line_combine(const AtomicMeasure& nu, double x0);

// Independent quadrature ----------------------------------------------------

// Composite midpoint rule for int_a^b f(x) exp(-2 pi i x xi) dx. Error is
// O(resolution^-2 (1 + |xi|)^2) for smooth f. Requires resolution >= 2^10 and
// resolution >= 64 (b - a) |xi|.
cplx quadrature_oracle(const std::function<double(double)>& density, double a, double b, double xi,
                       std::size_t resolution);

}  // namespace salem
