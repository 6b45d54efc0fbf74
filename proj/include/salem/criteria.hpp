#pragma once
// Numeric verdicts for sufficient conditions that rule out Fourier frames.
// A verdict is about a finite truncation, never a proof.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "salem/measure.hpp"
#include "salem/serialize.hpp"

namespace salem::criteria {

inline constexpr const char* kDisclaimer =
    "numerical instantiation of a sufficient condition on a finite truncation; not a proof";

enum class CriterionId { uniformity, heavy_decay, lev, illw };
enum class Verdict { no_frame_indicated, inconclusive };

std::string criterion_name(CriterionId id);
std::string verdict_name(Verdict v);

struct CriterionReport {
  CriterionId id = CriterionId::uniformity;
  Verdict verdict = Verdict::inconclusive;
  // Inputs contradict a bound every measure satisfies; no verdict is given.
  bool suspicious = false;
  std::string note;
  std::vector<std::pair<std::string, double>> inputs;
  std::vector<double> ratios;  // uniformity only
  std::vector<std::pair<std::string, double>> constants;
  std::string disclaimer = kDisclaimer;

  double input(const std::string& key) const;
  double constant(const std::string& key) const;
};

void to_json(Json& j, const CriterionReport& r);
void from_json(const Json& j, CriterionReport& r);

// Fires when the last ratio exceeds threshold and every increment over the
// second half of the sequence is positive. A closed form is attached when
// the ratios are (N+1)(N+2)/2.
CriterionReport uniformity_verdict(const std::vector<double>& ratios, double threshold);

// Margin below beta/2 at which alpha is flagged instead of judged.
inline constexpr double kMitsisMargin = 0.1;

// Fires when alpha + stderr < beta - stderr. The ball profile must be a lower
// profile, and both profiles must carry the same source tag when both are set.
CriterionReport heavy_decay_verdict(const BallProfile& ball, const FourierProfile& fourier);

struct ShiReport {
  double x0 = 0.0;
  double r = 0.0;
  double ball_mass = 0.0;
  double R = 0.0;  // (10 r)^-1
  // min over sampled |xi| <= R of |(mu restricted to the ball)^(xi)| / ball_mass.
  double min_ratio = 0.0;
  double witness_xi = 0.0;
  bool cosine_bound = false;  // min_ratio >= 1/2
  std::size_t count = 0;      // #(Lambda in [-R, R])
  double count_mass = 0.0;    // count * ball_mass^2
  double frame_mass = 0.0;    // B_est * ball_mass
  // 4 B_est / ball_mass: the count the frame bound allows.
  double count_ceiling = 0.0;
  bool count_within_ceiling = false;
};

ShiReport shi_counting_check(const AtomicMeasure& m, double x0, double r, const std::vector<double>& lambda,
                             double B_est, int samples = 256);

struct IntegralOptions {
  // |lambda| grid: lambda_min * (lambda_max / lambda_min)^{t / (n - 1)}, both signs.
  double lambda_min = 1.0;
  double lambda_max = 1024.0;
  int lambda_points = 32;
  // Refinement doubles until the proxy changes by less than this.
  double tolerance = 0.05;
  int max_refinements = 10;
};

struct IntegralReport {
  CriterionReport lev;
  CriterionReport illw;
};

// Lev proxy: min over R of R^{-(1 - alpha)} int_{|xi| < R} |mu^|^2.
// ILLW proxy: inf over the lambda grid of |lambda|^gamma int_{|xi| <= C} |mu^(lambda + xi)|^2.
// Both are reported with an inconclusive verdict. Throws Error when a
// quadrature does not settle within max_refinements doublings.
IntegralReport integral_criteria(const std::function<cplx(double)>& eval, double alpha, double gamma, double C,
                                 const std::vector<double>& R_set, const IntegralOptions& opt = {});

inline constexpr std::size_t kMaxFrameSize = 2000;

struct FrameBounds {
  double A_est = 0.0;
  double B_est = 0.0;
  std::size_t atoms = 0;
  std::size_t frequencies = 0;
  // Fewer frequencies than atoms, or A_est below 1e-12 B_est.
  bool rank_deficient = false;
};

// Extreme eigenvalues of the frame operator f -> sum_lambda <f, e_lambda> e_lambda
// on L^2 of the atomic measure. Lambda is a multiset.
FrameBounds frame_bounds_estimate(const AtomicMeasure& m, const std::vector<double>& lambda);

}  // namespace salem::criteria
