#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "salem/bump.hpp"
#include "salem/parallel.hpp"
#include "salem/rng.hpp"
#include "salem/serialize.hpp"

using namespace salem;
using std::numbers::pi;

namespace {

AtomicMeasure random_atoms(std::uint64_t seed, std::size_t n, double lo = 0, double hi = 1) {
  Stream s(seed);
  std::vector<double> x, w;
  for (std::size_t i = 0; i < n; ++i) {
    x.push_back(lo + (hi - lo) * s.uniform());
    w.push_back(s.uniform());
  }
  return AtomicMeasure(x, w);
}

AtomicMeasure unit_factor(std::uint64_t seed, std::size_t n) {
  Stream s(seed);
  std::vector<double> x, w;
  double t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    x.push_back(s.uniform() / 4);
    w.push_back(0.1 + s.uniform());
    t += w.back();
  }
  // Last weight absorbs the rounding so the mass is 1 to an ulp.
  double acc = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) acc += (w[i] /= t);
  w[n - 1] = 1 - acc;
  return AtomicMeasure(x, w);
}

// Reverse-order compensated summation in long double.
cplx reversed_oracle(const AtomicMeasure& m, double xi) {
  long double re = 0, im = 0, cr = 0, ci = 0;
  for (std::size_t i = m.size(); i-- > 0;) {
    const long double ph = 2 * std::numbers::pi_v<long double> * m.positions()[i] * xi;
    const long double yr = m.weights()[i] * std::cos(ph) - cr;
    const long double tr = re + yr;
    cr = (tr - re) - yr;
    re = tr;
    const long double yi = -m.weights()[i] * std::sin(ph) - ci;
    const long double ti = im + yi;
    ci = (ti - im) - yi;
    im = ti;
  }
  return {static_cast<double>(re), static_cast<double>(im)};
}

StepDensity random_step(std::uint64_t seed, int level) {
  Stream s(seed);
  std::vector<std::uint64_t> a;
  std::vector<double> p;
  for (std::uint64_t i = 0; i < (std::uint64_t{1} << level); ++i)
    if (s.uniform() < 0.6) {
      a.push_back(i);
      p.push_back(s.uniform());
    }
  return StepDensity(level, a, p);
}

std::function<double(double)> step_density_fn(const StepDensity& d) {
  return [&d](double x) {
    const double h = d.cell_width();
    const auto a = static_cast<std::uint64_t>(std::floor(x / h));
    auto it = std::lower_bound(d.nodes().begin(), d.nodes().end(), a);
    if (it == d.nodes().end() || *it != a) return 0.0;
    return d.weights()[static_cast<std::size_t>(it - d.nodes().begin())] / h;
  };
}

}  // namespace

TEST_CASE("atomic measures sort, merge and validate") {
  AtomicMeasure m({0.5, 0.1, 0.5}, {1, 2, 3});
  CHECK(m.positions() == std::vector<double>{0.1, 0.5});
  CHECK(m.weights() == std::vector<double>{2, 4});
  CHECK(m.mass() == 6);
  CHECK(m.support_hint() == Interval{0.1, 0.5});
  CHECK_THROWS_AS(AtomicMeasure({0.0}, {-1.0}), Error);
  CHECK_THROWS_AS(AtomicMeasure({0.0}, {1.0}, Interval{0.5, 1}), Error);
  CHECK_THROWS_AS(AtomicMeasure({NAN}, {1.0}), Error);
}

TEST_CASE("fourier_atomic examples") {
  AtomicMeasure one({0.0}, {1.0});
  for (double xi : {0.0, 0.3, -17.0, 1e5 + 0.5}) CHECK(std::abs(fourier_atomic(one, xi) - cplx(1, 0)) == 0);
  AtomicMeasure pair({-0.5, 0.5}, {0.5, 0.5});
  for (double xi : {0.1, 1.0, 2.5, 33.3}) CHECK(std::abs(fourier_atomic(pair, xi) - std::cos(pi * xi)) < 1e-15);
  auto m = random_atoms(50, 50);
  CHECK(std::abs(fourier_atomic(m, 17.3) - reversed_oracle(m, 17.3)) < 1e-10);
  CHECK_THROWS_WITH_AS(fourier_atomic(AtomicMeasure(), 1.0), "empty measure", Error);
}

TEST_CASE("fourier_atomic is bounded by its value at zero") {
  auto m = random_atoms(3, 300, -2, 5);
  CHECK(fourier_atomic(m, 0.0) == cplx(m.mass(), 0.0));
  Stream s(4);
  std::vector<double> xis;
  for (int i = 0; i < 1000; ++i) xis.push_back((s.uniform() - 0.5) * 1e4);
  const auto v = fourier_atomic(m, xis);
  for (std::size_t i = 0; i < xis.size(); ++i) {
    CHECK(std::abs(v[i]) <= m.mass());
    CHECK(v[i] == fourier_atomic(m, xis[i]));
  }
}

TEST_CASE("fourier_step examples") {
  StepDensity unit(0, {0}, {1.0}, 1.0);
  CHECK(fourier_step(unit, 0) == cplx(1, 0));
  for (int k : {1, 5, -3, 1000}) CHECK(std::abs(fourier_step(unit, k)) < 1e-15);
  // Level 3 against a direct Riemann sum at 2^-20.
  auto d = random_step(8, 3);
  auto f = step_density_fn(d);
  const int n = 1 << 20;
  long double re = 0, im = 0;
  for (int i = 0; i < n; ++i) {
    const long double x = (i + 0.5L) / n;
    const long double ph = 2 * std::numbers::pi_v<long double> * 7 * x;
    re += f(static_cast<double>(x)) * std::cos(ph);
    im -= f(static_cast<double>(x)) * std::sin(ph);
  }
  CHECK(std::abs(fourier_step(d, 7) - cplx(static_cast<double>(re / n), static_cast<double>(im / n))) < 1e-9);
  CHECK(fourier_step(d, 0) == cplx(d.mass(), 0));
  CHECK_THROWS_AS(StepDensity(2, {1, 1}, {0.5, 0.5}), Error);
  CHECK_THROWS_AS(StepDensity(2, {4}, {1.0}), Error);
  CHECK_THROWS_AS(StepDensity(2, {0, 1}, {0.5, 0.5}, 1.1), Error);
}

TEST_CASE("fourier_step matches quadrature") {
  struct C {
    int level;
    double k;
  };
  for (C c : {C{0, 1}, C{3, -999}, C{7, 250}, C{10, 1000}}) {
    auto d = random_step(100 + c.level, c.level);
    const cplx q = quadrature_oracle(step_density_fn(d), 0, 1, c.k, std::size_t{1} << 25);
    CHECK(std::abs(fourier_step(d, c.k) - q) < 1e-8);
  }
}

TEST_CASE("fourier_product against expanded convolutions") {
  ProductMeasure p({AtomicMeasure({0, 0.5}, {0.25, 0.75}), AtomicMeasure({0.1, 0.2}, {0.5, 0.5})});
  CHECK(fourier_product(p, 0) == cplx(1, 0));
  auto e = expand(p);
  CHECK(e.size() == 4);
  for (double xi : {0.7, 3.0, 123.4}) CHECK(std::abs(fourier_product(p, xi) - fourier_atomic(e, xi)) < 1e-12);
  Stream s(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<AtomicMeasure> f;
    const int nf = 1 + trial % 3;
    for (int i = 0; i < nf; ++i) f.push_back(unit_factor(trial * 10 + i, 1 + (trial + i) % 8));
    ProductMeasure q(f);
    auto ex = expand(q);
    CHECK(q.support().contains(ex.positions().front()));
    for (int r = 0; r < 10; ++r) {
      const double xi = (s.uniform() - 0.5) * 2000;
      CHECK(std::abs(fourier_product(q, xi) - fourier_atomic(ex, xi)) < 1e-10);
    }
  }
  std::vector<AtomicMeasure> many(12, AtomicMeasure({0, 1}, {0.5, 0.5}));
  CHECK_THROWS_AS(expand(ProductMeasure(many), 1000), Error);
  CHECK(std::abs(fourier_product(ProductMeasure(many), 0.3)) <= 1.0);
  CHECK_THROWS_AS(ProductMeasure({AtomicMeasure({0}, {0.5})}), Error);
}

TEST_CASE("product windows come from the registry") {
  ProductMeasure p({AtomicMeasure({0}, {1.0})}, Window{"phi0", 2.0});
  CHECK(std::abs(fourier_product(p, 7.0) - bump::phi0_hat(3.5)) < 1e-17);
  register_window("unit_test_square", [](double xi, double d) { return cplx(xi * d, 0); });
  ProductMeasure q({AtomicMeasure({0}, {1.0})}, Window{"unit_test_square", 3.0});
  CHECK(fourier_product(q, 2.0) == cplx(6, 0));
  ProductMeasure r({AtomicMeasure({0}, {1.0})}, Window{"missing", 1.0});
  CHECK_THROWS_AS(fourier_product(r, 1.0), Error);
}

TEST_CASE("band envelope of exact power laws") {
  BandOptions opt;
  opt.m_min = 0;
  opt.m_max = 12;
  auto flat = band_envelope([](double) { return cplx(1, 0); }, opt);
  for (const auto& b : flat.bands) CHECK(b.envelope == 1.0);
  CHECK(flat.fitted_beta == 0.0);
  auto half = band_envelope([](double x) { return cplx(std::pow(std::abs(x), -0.5), 0); }, opt);
  CHECK(half.fitted_beta == doctest::Approx(1.0).epsilon(0.01));
  CHECK_FALSE(half.degenerate);
}

TEST_CASE("band envelope is reproducible and monotone under refinement") {
  auto m = random_atoms(9, 500);
  auto eval = [&](double xi) { return fourier_atomic(m, xi); };
  BandOptions opt;
  opt.m_min = 2;
  opt.m_max = 10;
  opt.seed = 99;
  const unsigned saved = threads();
  set_threads(1);
  auto a = band_envelope(eval, opt);
  set_threads(8);
  auto b = band_envelope(eval, opt);
  set_threads(saved);
  CHECK(a == b);
  for (auto mode : {Sampling::jittered, Sampling::grid}) {
    opt.sampling = mode;
    opt.samples_per_band = 64;
    auto coarse = band_envelope(eval, opt);
    opt.samples_per_band = 256;
    auto fine = band_envelope(eval, opt);
    for (std::size_t i = 0; i < coarse.bands.size(); ++i) CHECK(fine.bands[i].envelope >= coarse.bands[i].envelope);
  }
  opt.sampling = Sampling::jittered;
  for (double x : band_samples(5, opt)) CHECK((x >= 32 && x < 64));
  opt.integer_frequencies = true;
  for (double x : band_samples(5, opt)) CHECK(x == std::floor(x));
  opt.samples_per_band = 8;
  CHECK_THROWS_AS(band_samples(0, opt), Error);
}

TEST_CASE("band envelope flags degenerate fits and reports band context") {
  BandOptions opt;
  opt.m_min = 0;
  opt.m_max = 8;
  opt.integer_frequencies = true;
  auto p = band_envelope([](double k) { return cplx(k == 0 ? 1.0 : (k < 2 ? 1.0 : 0.0), 0); }, opt);
  CHECK(p.degenerate);
  opt.m_max = 4;
  CHECK(band_envelope([](double) { return cplx(1, 0); }, opt).degenerate);
  opt.m_max = 8;
  CHECK_THROWS_WITH(band_envelope(
                        [](double k) -> cplx {
                          if (k >= 64) throw std::runtime_error("boom");
                          return 1.0;
                        },
                        opt),
                    "band m=6: boom");
}

TEST_CASE("fit_decay_exponent") {
  FourierProfile p;
  for (int m = 0; m < 12; ++m) p.bands.push_back({m, std::ldexp(1.0, -m)});
  auto f = fit_decay_exponent(p, 2);
  CHECK(f.beta == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.stderr < 1e-10);
  CHECK(p.fitted_beta == f.beta);
  CHECK(p.slack_epsilon == doctest::Approx(1.96 * f.stderr / 2));

  FourierProfile q;
  for (int m = 0; m < 12; ++m) q.bands.push_back({m, std::pow(2.0, -0.37 * m)});
  CHECK(std::abs(fit_decay_exponent(q, 2).beta - 0.74) < 1e-6);

  p.bands[6].envelope *= 50;
  auto g = fit_decay_exponent(p, 2);
  CHECK(g.stderr > 0.05);
  CHECK(std::isfinite(g.beta));
  CHECK(p.residual > 0);

  FourierProfile few;
  for (int m = 0; m < 5; ++m) few.bands.push_back({m, 1.0});
  CHECK_THROWS_AS(fit_decay_exponent(few, 2), Error);
}

TEST_CASE("ball masses") {
  AtomicMeasure a({0.3}, {1.0});
  CHECK(ball_mass(a, 0.3, 0.01) == 1.0);
  CHECK(ball_mass(AtomicMeasure({0.25, 0.75}, {1, 2}), 0.5, 0.25) == 3.0);  // boundary atoms count
  auto d = random_step(5, 6);
  const double h = d.cell_width();
  for (std::size_t i = 0; i < d.nodes().size(); ++i) {
    const double c = (static_cast<double>(d.nodes()[i]) + 0.5) * h;
    CHECK(ball_mass(d, c, h / 2) == d.weights()[i]);
  }
  // Exact interval integrals against a fine quadrature of the density.
  auto f = step_density_fn(d);
  Stream s(6);
  for (int t = 0; t < 20; ++t) {
    const double x = s.uniform(), r = 0.3 * s.uniform() + 1e-3;
    const double lo = std::max(0.0, x - r), hi = std::min(1.0, x + r);
    const int n = 1 << 16;
    double q = 0;
    for (int i = 0; i < n; ++i) q += f(lo + (i + 0.5) * (hi - lo) / n);
    q *= (hi - lo) / n;
    CHECK(ball_mass(d, x, r) == doctest::Approx(q).epsilon(1e-3));
  }
  CHECK(ball_mass(d, 0.5, 10) == doctest::Approx(d.mass()).epsilon(1e-15));
  CHECK_THROWS_AS(ball_mass(a, 0, 0), Error);
}

TEST_CASE("ball mass is monotone and additive") {
  auto m = random_atoms(12, 400);
  auto d = random_step(13, 9);
  Stream s(14);
  for (int t = 0; t < 50; ++t) {
    const double x = s.uniform();
    double prev_a = 0, prev_d = 0;
    for (double r = 1e-4; r < 2; r *= 1.7) {
      const double ma = ball_mass(m, x, r), md = ball_mass(d, x, r);
      CHECK(ma >= prev_a);
      CHECK(md >= prev_d - 1e-15);
      CHECK(ma <= m.mass());
      prev_a = ma;
      prev_d = md;
    }
  }
  std::vector<double> x1, w1, x2, w2;
  for (std::size_t i = 0; i < m.size(); ++i) {
    (i % 3 ? x1 : x2).push_back(m.positions()[i]);
    (i % 3 ? w1 : w2).push_back(m.weights()[i]);
  }
  AtomicMeasure m1(x1, w1), m2(x2, w2);
  for (int t = 0; t < 50; ++t) {
    const double x = s.uniform(), r = s.uniform() / 4;
    CHECK(ball_mass(m, x, r) == doctest::Approx(ball_mass(m1, x, r) + ball_mass(m2, x, r)).epsilon(1e-13));
  }
}

TEST_CASE("ball exponent fits") {
  const int n = 1 << 14;
  std::vector<double> x(n), w(n, 1.0 / n), centers;
  for (int i = 0; i < n; ++i) x[i] = (i + 0.5) / n;
  for (int i = 1; i < 16; ++i) centers.push_back(i / 16.0);
  AtomicMeasure leb(x, w);
  auto radii = dyadic_radii(3, 10);
  auto up = fit_ball_exponents(leb, centers, radii, Side::upper, "lebesgue");
  CHECK(up.fitted_alpha == doctest::Approx(1.0).epsilon(0.05));
  CHECK(up.side == Side::upper);
  CHECK(up.samples.size() == radii.size());
  CHECK_THROWS_AS(fit_ball_exponents(leb, centers, dyadic_radii(3, 5), Side::lower), Error);
  CHECK_THROWS_AS(fit_ball_exponents(leb, centers, {0.5, 0.2, 0.1, 0.05}, Side::lower), Error);
  auto far = fit_ball_exponents(leb, {5.0}, radii, Side::lower);
  CHECK(far.degenerate);
}

TEST_CASE("fixed bump constants") {
  // Reference values from 30-digit adaptive quadrature.
  CHECK(bump::scale_squared() == doctest::Approx(32.1183999162494443).epsilon(1e-13));
  CHECK(bump::phi0(0) == doctest::Approx(2.09451149377489545).epsilon(1e-13));
  CHECK(bump::phi0(0.3) == doctest::Approx(1.26899683184450252).epsilon(1e-13));
  CHECK(bump::phi0(0.75) == doctest::Approx(0.0221392380432989579).epsilon(1e-11));
  CHECK(bump::phi0(0.5) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(bump::phi0(-0.5) == bump::phi0(0.5));
  CHECK(bump::phi0_hat(0) == doctest::Approx(1.52019711577669836).epsilon(1e-13));
  CHECK(bump::phi0_hat(3.5) == doctest::Approx(0.00179564619356280833).epsilon(1e-11));
  CHECK(bump::phi0_hat(10) == doctest::Approx(8.34774065997204e-07).epsilon(1e-9));
  CHECK(bump::phi0(0.98) == 0.0);
  CHECK(bump::phi0_hat(500) == 0.0);
  for (int i = 0; i <= 1000; ++i) {
    const double x = -0.5 + i / 1000.0;
    CHECK(bump::phi0(x) >= 0.5 - 1e-13);
  }
  Stream s(1);
  for (int i = 0; i < 500; ++i) {
    const double x = s.uniform() * 0.98, xi = s.uniform() * 300;
    CHECK(std::abs(bump::phi0(x) - bump::phi0_direct(x, 1536)) < 1e-13);
    CHECK(std::abs(bump::phi0_hat(xi) - bump::phi0_hat_direct(xi)) < 1e-15);
    CHECK(bump::phi0_hat(xi) >= 0);
  }
}

TEST_CASE("one_line_combine") {
  auto r = one_line_combine(AtomicMeasure({0.5}, {1.0}), 0.5);
  CHECK(r.measure.positions() == std::vector<double>{-0.5, 0.5});
  CHECK(r.measure.weights() == std::vector<double>{1.0, 0.0});
  CHECK(r.degenerate);

  auto q = one_line_combine(AtomicMeasure({0.25, 0.75}, {1, 1}), 0.25);
  CHECK(q.measure.positions() == std::vector<double>{-0.75, -0.25, 0.25, 0.75});
  CHECK(q.measure.weights()[0] == 1);
  CHECK(q.measure.weights()[1] == 1);
  CHECK(q.measure.weights()[2] == 0);
  // phi0(3/4) (1/2)^2 from the reference value above.
  CHECK(q.measure.weights()[3] == doctest::Approx(0.0221392380432989579 / 4).epsilon(1e-11));
  CHECK_FALSE(q.degenerate);
  CHECK(q.measure.support_hint() == Interval{-1, 1});

  auto nu = random_atoms(21, 40);
  const double x0 = nu.positions()[7];
  auto c = one_line_combine(nu, x0);
  CHECK(c.measure.mass() == doctest::Approx(nu.mass() + c.taper_mass).epsilon(1e-14));
  CHECK(c.measure.mass_between(-1, -1e-12) == doctest::Approx(nu.mass()).epsilon(1e-14));
  CHECK_THROWS_AS(one_line_combine(nu, 0.123456789), Error);
  CHECK_THROWS_AS(one_line_combine(AtomicMeasure({1.5}, {1}), 1.5), Error);
}

TEST_CASE("quadrature_oracle") {
  auto chi = [](double) { return 1.0; };
  CHECK(std::abs(quadrature_oracle(chi, 0, 1, 0, 1 << 10) - 1.0) < 1e-12);
  CHECK(std::abs(quadrature_oracle(chi, 0, 1, 3, 1 << 10)) < 1e-6);
  CHECK_THROWS_AS(quadrature_oracle(chi, 0, 1, 3, 512), Error);
  CHECK_THROWS_AS(quadrature_oracle(chi, 0, 1, 100, 1 << 12), Error);
  // Gaussian-like smooth density against a closed form: int_0^1 x e^{-2 pi i x xi}.
  const double xi = 2.5;
  const cplx w(0, -2 * pi * xi);
  const cplx exact = (std::exp(w) * (w - 1.0) + 1.0) / (w * w);
  CHECK(std::abs(quadrature_oracle([](double x) { return x; }, 0, 1, xi, 1 << 14) - exact) < 1e-8);
}

TEST_CASE("JSON round trips and CSV tables") {
  auto m = random_atoms(31, 20);
  CHECK(Json(m).get<AtomicMeasure>() == m);
  auto d = random_step(32, 5);
  CHECK(Json(d).get<StepDensity>() == d);
  ProductMeasure p({unit_factor(1, 3), unit_factor(2, 4)}, Window{"phi0", 2});
  CHECK(Json::parse(Json(p).dump()).get<ProductMeasure>() == p);
  BandOptions opt;
  opt.m_max = 9;
  auto fp = band_envelope([&](double xi) { return fourier_atomic(m, xi); }, opt);
  CHECK(Json::parse(Json(fp).dump()).get<FourierProfile>() == fp);
  auto bp = fit_ball_exponents(m, m.positions(), dyadic_radii(2, 8), Side::lower, "m");
  CHECK(Json::parse(Json(bp).dump()).get<BallProfile>() == bp);
  const Json j = fp;
  for (const char* key : {"bands", "fitted_beta", "slack_epsilon", "residual"}) CHECK(j.contains(key));
  CHECK(Json(d).contains("cells"));
  CHECK(Json(m).contains("support_hint"));

  std::ostringstream os;
  write_bands_csv(os, fp);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "m,envelope");
  int rows = 0;
  while (std::getline(is, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 1);
    ++rows;
  }
  CHECK(rows == 10);
  std::ostringstream ob;
  write_balls_csv(ob, bp);
  CHECK(ob.str().rfind("x,r,mass\n", 0) == 0);
}
