#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "salem/arc.hpp"
#include "salem/parallel.hpp"

using namespace salem;
using namespace salem::arc;

namespace {

constexpr double pi = std::numbers::pi;

// int_{pi/3}^{2pi/3} e^{-2 pi i (xi1 cos t + xi2 sin t)} sin t dt by the
// midpoint rule at two resolutions, combined by Richardson extrapolation.
cplx theta_oracle(double xi1, double xi2) {
  auto mid = [&](int n) {
    const double a = pi / 3, h = (pi / 3) / n;
    long double re = 0, im = 0;
    for (int j = 0; j < n; ++j) {
      const double t = a + (j + 0.5) * h;
      const double ph = 2 * pi * (xi1 * std::cos(t) + xi2 * std::sin(t));
      re += std::cos(ph) * std::sin(t);
      im -= std::sin(ph) * std::sin(t);
    }
    return cplx(static_cast<double>(re * h), static_cast<double>(im * h));
  };
  return (4.0 * mid(1 << 17) - mid(1 << 16)) / 3.0;
}

}  // namespace

TEST_CASE("arc transform at simple frequencies") {
  const auto z = arc_fourier(0, 0);
  CHECK(z.value == cplx(1.0, 0.0));
  for (int k : {1, 2, 7, -3, 100}) {
    const auto e = arc_fourier(k, 0, 1e-12);
    CHECK(std::abs(e.value) <= 1e-12);
  }
  // Along the first axis the transform is sinc.
  for (double xi : {0.5, 2.3, 17.25}) {
    const auto e = arc_fourier(xi, 0, 1e-12);
    CHECK(std::abs(e.value - std::sin(pi * xi) / (pi * xi)) <= 1e-12);
  }
  CHECK_THROWS_AS(arc_fourier(1, 1, 1e-13), Error);
  CHECK_THROWS_AS(arc_fourier(2e6, 0), Error);
}

TEST_CASE("arc transform matches the angular substitution") {
  const auto e = arc_fourier(0, 100, 1e-12);
  CHECK(std::abs(e.value - theta_oracle(0, 100)) <= 1e-8);
  CHECK(e.error_bound <= 1e-12);
  for (auto [a, b] : {std::pair{3.5, 40.0}, std::pair{-80.0, 250.0}, std::pair{200.0, -60.0}}) {
    CAPTURE(a);
    CAPTURE(b);
    CHECK(std::abs(arc_fourier(a, b, 1e-12).value - theta_oracle(a, b)) <= 1e-8);
  }
}

TEST_CASE("conjugate symmetry and the trivial bound") {
  for (auto [a, b] : {std::pair{1.5, 3.0}, std::pair{-40.0, 900.0}, std::pair{1234.5, 17.0}}) {
    const auto p = arc_fourier(a, b).value, m = arc_fourier(-a, -b).value;
    CHECK(std::abs(p - std::conj(m)) <= 1e-9);
    CHECK(std::abs(p) <= 1.0);
  }
}

TEST_CASE("stationary point") {
  CHECK(*stationary_point(0, 5) == 0.0);
  CHECK(*stationary_point(1, 4) == doctest::Approx(1 / std::sqrt(17.0)));
  CHECK(*stationary_point(1, -4) == doctest::Approx(-1 / std::sqrt(17.0)));
  CHECK_FALSE(stationary_point(3, 4).has_value());
  CHECK_FALSE(stationary_point(3, 0).has_value());
}

TEST_CASE("Gram matrix of the integer frequencies") {
  const auto g = gram_onb(128);
  CHECK(g.row[0] == 1.0);
  CHECK(g.max_offdiag <= 1e-10);
  CHECK(g.row.size() == 257);
  CHECK_THROWS_AS(gram_onb(513), Error);
}

TEST_CASE("decay scan") {
  set_threads(4);
  const auto s = decay_scan(1000, 64, 1, 8);
  set_threads(1);
  CHECK(s.stabilized);
  CHECK(s.sup_scaled >= 1.2);
  CHECK(s.sup_scaled <= 1.30473 * 1.02);
  CHECK(s.direction_sup.size() == 8);
  CHECK_FALSE(s.profile.degenerate);
  CHECK(s.profile.fitted_beta == doctest::Approx(1.0).epsilon(0.1));
  CHECK_THROWS_AS(decay_scan(2e5, 64, 1), Error);

  // The largest value along the second axis, where the stationary point sits at 0.
  double sup = 0;
  for (double x = 1; x <= 1e4; x *= 1.01) sup = std::max(sup, std::sqrt(x) * std::abs(arc_fourier(0, x).value));
  CHECK(sup == doctest::Approx(1.30473).epsilon(1e-5));
}

TEST_CASE("decay scan is reproducible across thread counts") {
  set_threads(1);
  const auto a = decay_scan(200, 16, 9, 4);
  set_threads(8);
  const auto b = decay_scan(200, 16, 9, 4);
  set_threads(1);
  CHECK(a.sup_scaled == b.sup_scaled);
  CHECK(a.profile == b.profile);
  CHECK(a.direction_sup == b.direction_sup);
}
