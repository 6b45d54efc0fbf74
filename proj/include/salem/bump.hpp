#pragma once
// The fixed even bump phi0 = varphi * varphi and its transform.
// varphi = c exp(-1 / (1 - (x/a)^2)) on |x| < a, with a = 0.49 and c chosen so
// that phi0(+-1/2) = 1/2. Then phi0 >= 1/2 on [-1/2, 1/2], supp phi0 = [-0.98, 0.98],
// and phi0_hat = varphi_hat^2 >= 0.

namespace salem::bump {

inline constexpr double kVarphiHalfWidth = 0.49;
inline constexpr double kPhi0HalfWidth = 2 * kVarphiHalfWidth;

double varphi(double x);
// Interpolated from a table built by phi0_direct; absolute error below 1e-14.
double phi0(double x);
// Midpoint rule for the convolution integral with the given node count.
double phi0_direct(double x, int nodes = 768);
double varphi_hat(double xi);
// Interpolated from a varphi_hat table on [0, 400]; zero beyond, where the true
// value is below 1e-28.
double phi0_hat(double xi);
double phi0_hat_direct(double xi);
// c^2.
double scale_squared();

}  // namespace salem::bump
