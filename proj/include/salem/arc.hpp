#pragma once
// The weighted arc sigma: int f d sigma = int_{-1/2}^{1/2} f(x, sqrt(1 - x^2)) dx.

#include <cstdint>
#include <optional>
#include <vector>

#include "salem/measure.hpp"

namespace salem::arc {

inline constexpr double kMaxFrequency = 1e6;

struct ArcEvaluation {
  double xi1 = 0.0;
  double xi2 = 0.0;
  cplx value;
  // Sum over accepted panels of |G15 - G30|, the value being G30.
  double error_bound = 0.0;
  std::size_t panels = 0;
};

// Adaptive Gauss-Legendre on panels of at most one phase cycle, split at the
// stationary point and bisected while the 15- and 30-point rules disagree by
// more than tol per unit length or the phase curves by more than one cycle.
// Requires tol >= 1e-12 and |xi| <= kMaxFrequency.
ArcEvaluation arc_fourier(double xi1, double xi2, double tol = 1e-10);

// Point x0 in [-1/2, 1/2] where the phase x xi1 + sqrt(1 - x^2) xi2 is
// stationary; absent when xi2 = 0 or the point lies outside.
std::optional<double> stationary_point(double xi1, double xi2);

struct DecayScan {
  FourierProfile profile;  // bands of |sigma^| over |xi| in [1, R_max]
  double sup_scaled = 0.0;       // sup |xi|^{1/2} |sigma^(xi)|
  double sup_scaled_half = 0.0;  // the same over |xi| <= R_max / 2
  double relative_change = 0.0;  // (sup_scaled - sup_scaled_half) / sup_scaled
  bool stabilized = false;       // relative_change < 0.02
  double witness_xi1 = 0.0;
  double witness_xi2 = 0.0;
  std::vector<double> direction_angles;  // in [0, pi)
  std::vector<double> direction_sup;     // per-direction sup |xi|^{1/2} |sigma^|
  int samples = 0;
  std::uint64_t seed = 0;
};

// `directions` jittered angles over the upper half plane (the lower half
// follows by conjugation), each with `samples` log-jittered radii in [1, R_max].
// Requires R_max <= 1e5.
DecayScan decay_scan(double R_max, int samples, std::uint64_t seed, int directions = 16, double tol = 1e-10);

struct GramReport {
  int K = 0;
  double max_offdiag = 0.0;
  int witness_m = 0;  // difference k - k' attaining it
  std::vector<double> row;  // |sigma^((m, 0))| for m = 0..2K
};

// Gram matrix G_{k,k'} = sigma^((k - k', 0)) for |k|, |k'| <= K. It is
// Toeplitz, so one evaluation per difference suffices. Requires K <= 512.
GramReport gram_onb(int K, double tol = 1e-12);

}  // namespace salem::arc
