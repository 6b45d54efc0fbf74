#include <cmath>
#include <numbers>

#include "doctest.h"
#include "salem/convolution.hpp"
#include "salem/criteria.hpp"
#include "salem/parallel.hpp"
#include "salem/rng.hpp"

using namespace salem;
using namespace salem::criteria;

namespace {

constexpr double pi = std::numbers::pi;

BallProfile ball(double alpha, double se, std::string source = "") {
  BallProfile b;
  b.fitted_alpha = alpha;
  b.stderr_alpha = se;
  b.side = Side::lower;
  b.source = std::move(source);
  return b;
}

FourierProfile fourier(double beta, double se, std::string source = "") {
  FourierProfile f;
  f.fitted_beta = beta;
  f.stderr_beta = se;
  f.source = std::move(source);
  return f;
}

AtomicMeasure lebesgue(int n) {
  std::vector<double> x, w;
  for (int j = 0; j < n; ++j) {
    x.push_back((j + 0.5) / n);
    w.push_back(1.0 / n);
  }
  return AtomicMeasure(x, w);
}

std::vector<double> integers(int lo, int hi) {
  std::vector<double> v;
  for (int k = lo; k <= hi; ++k) v.push_back(k);
  return v;
}

}  // namespace

TEST_CASE("uniformity verdict") {
  CHECK(uniformity_verdict(std::vector<double>(20, 1.0), 5).verdict == Verdict::inconclusive);
  const auto conv = uniformity_verdict(convolution::ratio_sequence(50), 100);
  CHECK(conv.verdict == Verdict::no_frame_indicated);
  CHECK(conv.note.find("(N+1)(N+2)/2") != std::string::npos);
  CHECK(conv.constant("last_ratio") == 51.0 * 52 / 2);

  std::vector<double> capped;
  for (int N = 1; N <= 30; ++N) capped.push_back(std::min(7.0, N + 1.0));
  CHECK(uniformity_verdict(capped, 5).verdict == Verdict::inconclusive);
  CHECK(uniformity_verdict(capped, 10).verdict == Verdict::inconclusive);
  CHECK(uniformity_verdict({3.0}, 1).verdict == Verdict::inconclusive);
}

TEST_CASE("heavy decay verdict") {
  CHECK(heavy_decay_verdict(ball(0.25, 1e-6), fourier(0.5, 1e-6)).verdict == Verdict::no_frame_indicated);
  CHECK(heavy_decay_verdict(ball(0.4, 0.0), fourier(0.4, 0.0)).verdict == Verdict::inconclusive);
  // The gap must exceed both standard errors.
  CHECK(heavy_decay_verdict(ball(0.25, 0.1), fourier(0.5, 0.16)).verdict == Verdict::inconclusive);

  const auto sus = heavy_decay_verdict(ball(0.1, 1e-6), fourier(0.5, 1e-6));
  CHECK(sus.suspicious);
  CHECK(sus.verdict == Verdict::inconclusive);

  CHECK_THROWS_AS(heavy_decay_verdict(ball(0.2, 0, "a"), fourier(0.5, 0, "b")), Error);
  CHECK_NOTHROW(heavy_decay_verdict(ball(0.2, 0, "a"), fourier(0.5, 0, "")));
  auto up = ball(0.2, 0);
  up.side = Side::upper;
  CHECK_THROWS_AS(heavy_decay_verdict(up, fourier(0.5, 0)), Error);
  auto deg = fourier(0.5, 0);
  deg.degenerate = true;
  CHECK(heavy_decay_verdict(ball(0.2, 0), deg).verdict == Verdict::inconclusive);
}

TEST_CASE("heavy decay verdict is invariant under rescaling the measure") {
  // A heavy atom at 0 plus a spread part.
  Stream rng(3);
  std::vector<double> x{0.0}, w{0.2};
  for (int j = 0; j < 4000; ++j) {
    x.push_back(rng.uniform());
    w.push_back(0.8 / 4000);
  }
  auto verdict_at = [&](double c) {
    std::vector<double> wc;
    for (double v : w) wc.push_back(c * v);
    const AtomicMeasure m(x, wc);
    const auto bp = fit_ball_exponents(m, {0.0}, dyadic_radii(2, 10), Side::lower, "mix");
    BandOptions o;
    o.m_min = 2;
    o.m_max = 10;
    o.source = "mix";
    const auto fp = band_envelope([&](double xi) { return fourier_atomic(m, xi); }, o);
    return heavy_decay_verdict(bp, fp);
  };
  const auto base = verdict_at(1.0);
  for (double c : {0.001, 37.0}) {
    const auto r = verdict_at(c);
    CAPTURE(c);
    CHECK(r.verdict == base.verdict);
    CHECK(r.input("alpha") == doctest::Approx(base.input("alpha")).epsilon(1e-9));
    CHECK(r.input("beta") == doctest::Approx(base.input("beta")).epsilon(1e-9));
  }
}

TEST_CASE("Shi counting check") {
  // A single atom in the ball: |cos| >= cos(pi / 5) > 1/2 exactly.
  const AtomicMeasure one({0.3}, {1.0});
  const auto s1 = shi_counting_check(one, 0.3, 0.01, {}, 1.0);
  CHECK(s1.min_ratio == doctest::Approx(1.0));
  CHECK(s1.cosine_bound);

  Stream rng(8);
  std::vector<double> x, w;
  for (int j = 0; j < 500; ++j) {
    x.push_back(rng.uniform());
    w.push_back(rng.uniform());
  }
  const AtomicMeasure m(x, w);
  for (double r : {0.3, 0.05, 0.001}) {
    const auto s = shi_counting_check(m, 0.5, r, {}, 1.0, 512);
    CHECK(s.cosine_bound);
    CHECK(s.min_ratio >= std::cos(pi / 5) - 1e-12);
  }

  // Lebesgue with Lambda = Z: the count grows linearly in R and stays under the ceiling.
  const auto leb = lebesgue(1 << 20);
  const auto Z = integers(-2000, 2000);
  for (double r : {0.01, 0.001, 0.0001}) {
    const auto s = shi_counting_check(leb, 0.5, r, Z, 1.0);
    CAPTURE(r);
    CHECK(s.count == 2 * static_cast<std::size_t>(std::floor(s.R)) + 1);
    CHECK(s.count_within_ceiling);
    CHECK(s.count_ceiling * r == doctest::Approx(2.0).epsilon(0.01));
  }
  const auto empty = shi_counting_check(one, 0.9, 0.01, Z, 1.0);
  CHECK(empty.ball_mass == 0.0);
  CHECK(empty.cosine_bound);
}

TEST_CASE("integral criteria") {
  const auto sinc = [](double xi) -> cplx {
    if (xi == 0) return 1.0;
    return std::sin(pi * xi) / (pi * xi);
  };
  IntegralOptions o;
  o.lambda_min = 4;
  o.lambda_max = 256;
  o.lambda_points = 8;
  const auto r = integral_criteria(sinc, 1.0, 2.0, 1.0, {8, 16, 32}, o);
  // int_{-R}^{R} sinc^2 = 1 - O(1/R).
  CHECK(r.lev.constant("proxy") == doctest::Approx(1.0).epsilon(0.03));
  CHECK(r.lev.constant("proxy") < 1.0);
  CHECK(r.lev.verdict == Verdict::inconclusive);
  CHECK(r.illw.constant("proxy") > 0.0);

  const auto delta = integral_criteria([](double) -> cplx { return 1.0; }, 1.0, 0.0, 1.0, {4, 8}, o);
  CHECK(delta.lev.constant("proxy") == doctest::Approx(8.0));
  CHECK(delta.lev.constant("R=8") == doctest::Approx(16.0));
  CHECK(delta.illw.constant("proxy") == doctest::Approx(2.0));
  CHECK(delta.illw.verdict == Verdict::inconclusive);

  CHECK_THROWS_AS(integral_criteria(sinc, 1.0, 1.0, 1.0, {}, o), Error);
  IntegralOptions tight = o;
  tight.max_refinements = 1;
  tight.tolerance = 1e-15;
  const auto beat = [](double xi) -> cplx { return 1.0 + std::exp(cplx(0, 2 * pi * 50 * xi)); };
  CHECK_THROWS_AS(integral_criteria(beat, 1.0, 1.0, 1.0, {30}, tight), Error);
}

TEST_CASE("frame bounds") {
  const auto leb = lebesgue(256);
  const auto fb = frame_bounds_estimate(leb, integers(-128, 127));
  CHECK(fb.A_est == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(fb.B_est == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_FALSE(fb.rank_deficient);

  // The extra frequency 128 aliases onto -128: one eigenvalue rises to 2.
  const auto fb2 = frame_bounds_estimate(leb, integers(-128, 128));
  CHECK(fb2.A_est == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(fb2.B_est == doctest::Approx(2.0).epsilon(1e-10));

  const auto none = frame_bounds_estimate(leb, {});
  CHECK(none.A_est == 0.0);
  CHECK(none.B_est == 0.0);

  auto twice = integers(-128, 127);
  const auto base = twice;
  twice.insert(twice.end(), base.begin(), base.end());
  const auto fd = frame_bounds_estimate(leb, twice);
  CHECK(fd.A_est == doctest::Approx(2 * fb.A_est).epsilon(1e-10));
  CHECK(fd.B_est == doctest::Approx(2 * fb.B_est).epsilon(1e-10));

  const auto few = frame_bounds_estimate(leb, integers(0, 9));
  CHECK(few.rank_deficient);
  CHECK(few.A_est == 0.0);
  CHECK(few.B_est == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS(frame_bounds_estimate(lebesgue(2001), {0.0}), Error);
}

TEST_CASE("criterion reports round-trip through JSON") {
  auto r = uniformity_verdict(convolution::ratio_sequence(10), 5);
  Json j = r;
  const auto back = j.get<CriterionReport>();
  CHECK(back.verdict == r.verdict);
  CHECK(back.ratios == r.ratios);
  CHECK(back.inputs == r.inputs);
  CHECK(back.constants == r.constants);
  CHECK(back.disclaimer == kDisclaimer);
  CHECK(Json(back).dump() == j.dump());
}
