#include "salem/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <map>
#include <mutex>
#include <numeric>
#include <string>

#include "salem/bump.hpp"
#include "salem/kernels.hpp"
#include "salem/parallel.hpp"
#include "salem/rng.hpp"

namespace salem {
namespace {

double neumaier_sum(const std::vector<double>& v) {
  double s = 0.0, c = 0.0;
  for (double x : v) {
    double e;
    kernels::two_sum(s, x, s, e);
    c += e;
  }
  return s + c;
}

std::vector<double> prefix_of(const std::vector<double>& w) {
  std::vector<double> p(w.size() + 1, 0.0);
  double s = 0.0, c = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    double e;
    kernels::two_sum(s, w[i], s, e);
    c += e;
    p[i + 1] = s + c;
  }
  return p;
}

void check_weight(double w) {
  if (!std::isfinite(w) || w < 0.0) throw Error("weights must be finite and nonnegative");
}

struct Fit {
  double slope = 0.0, stderr = 0.0, rms = 0.0;
};

// Ordinary least squares of y on x; needs at least 3 points.
Fit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  Fit f;
  f.slope = sxy / sxx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - my - f.slope * (x[i] - mx);
    ssr += r * r;
  }
  f.rms = std::sqrt(ssr / n);
  f.stderr = std::sqrt(ssr / (n - 2.0) / sxx);
  return f;
}

constexpr double kZeroEnvelope = 1e-10;  // relative to the largest band envelope

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, WindowTransform>& registry() {
  static std::map<std::string, WindowTransform> r{
      {"phi0", [](double xi, double d) { return cplx(bump::phi0_hat(xi / d), 0.0); }},
  };
  return r;
}

unsigned bit_length(std::uint64_t i) {
  unsigned b = 0;
  while (i) {
    ++b;
    i >>= 1;
  }
  return b;
}

double van_der_corput(std::uint64_t i) {
  double v = 0.0, f = 0.5;
  while (i) {
    if (i & 1) v += f;
    f *= 0.5;
    i >>= 1;
  }
  return v;
}

}  // namespace

// AtomicMeasure ------------------------------------------------------------

AtomicMeasure::AtomicMeasure(std::vector<double> positions, std::vector<double> weights,
                             std::optional<Interval> support_hint) {
  if (positions.size() != weights.size()) throw Error("positions and weights differ in length");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!std::isfinite(positions[i])) throw Error("positions must be finite");
    check_weight(weights[i]);
  }
  std::vector<std::size_t> order(positions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return positions[a] < positions[b]; });
  for (std::size_t i : order) {
    if (!x_.empty() && x_.back() == positions[i]) {
      w_.back() += weights[i];
    } else {
      x_.push_back(positions[i]);
      w_.push_back(weights[i]);
    }
  }
  if (support_hint) {
    if (!(support_hint->lo <= support_hint->hi)) throw Error("support hint is not an interval");
    if (!x_.empty() && (x_.front() < support_hint->lo || x_.back() > support_hint->hi))
      throw Error("atoms outside the support hint");
    hint_ = *support_hint;
  } else if (!x_.empty()) {
    hint_ = {x_.front(), x_.back()};
  }
  prefix_ = prefix_of(w_);
  mass_ = neumaier_sum(w_);
}

double AtomicMeasure::mass_between(double lo, double hi) const {
  if (x_.empty() || hi < lo) return 0.0;
  const auto b = static_cast<std::size_t>(std::lower_bound(x_.begin(), x_.end(), lo) - x_.begin());
  const auto e = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), hi) - x_.begin());
  if (e <= b) return 0.0;
  if (e - b <= 32) {
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += w_[i];
    return s;
  }
  if (b == 0 && e == x_.size()) return mass_;
  return std::max(0.0, prefix_[e] - prefix_[b]);
}

// StepDensity --------------------------------------------------------------

StepDensity::StepDensity(int level, std::vector<std::uint64_t> nodes, std::vector<double> weights,
                         std::optional<double> declared_mass)
    : level_(level), nodes_(std::move(nodes)), w_(std::move(weights)) {
  if (level_ < 0 || level_ > 62) throw Error("step density level out of range");
  if (nodes_.size() != w_.size()) throw Error("nodes and weights differ in length");
  const std::uint64_t cells = std::uint64_t{1} << level_;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i] >= cells) throw Error("node outside [0, 2^level)");
    if (i > 0 && nodes_[i] <= nodes_[i - 1]) throw Error("nodes must be strictly increasing");
    check_weight(w_[i]);
  }
  prefix_ = prefix_of(w_);
  mass_ = neumaier_sum(w_);
  if (declared_mass && std::abs(mass_ - *declared_mass) > 1e-12)
    throw Error("step density mass differs from the declared mass");
}

double StepDensity::cell_width() const { return std::ldexp(1.0, -level_); }

std::vector<double> StepDensity::left_endpoints() const {
  std::vector<double> x(nodes_.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::ldexp(static_cast<double>(nodes_[i]), -level_);
  return x;
}

// Windows and products --------------------------------------------------------

void register_window(const std::string& kind, WindowTransform transform) {
  std::lock_guard lock(registry_mutex());
  registry()[kind] = std::move(transform);
}

const WindowTransform& find_window(const std::string& kind) {
  std::lock_guard lock(registry_mutex());
  auto it = registry().find(kind);
  if (it == registry().end()) throw Error("unknown window kind: " + kind);
  return it->second;
}

ProductMeasure::ProductMeasure(std::vector<AtomicMeasure> factors, std::optional<Window> envelope)
    : factors_(std::move(factors)), envelope_(std::move(envelope)) {
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    if (factors_[k].empty()) throw Error("empty factor " + std::to_string(k));
    if (std::abs(factors_[k].mass() - 1.0) > 1e-12)
      throw Error("factor " + std::to_string(k) + " does not have unit mass");
  }
  if (envelope_ && !(envelope_->dilation > 0.0)) throw Error("window dilation must be positive");
}

Interval ProductMeasure::support() const {
  Interval s{0.0, 0.0};
  for (const auto& f : factors_) {
    s.lo += f.support_hint().lo;
    s.hi += f.support_hint().hi;
  }
  return s;
}

// Fourier transforms ------------------------------------------------------

cplx fourier_atomic(const AtomicMeasure& m, double xi) {
  if (m.empty()) throw Error("empty measure");
  if (xi == 0.0) return {m.mass(), 0.0};
  return kernels::phase_sum(m.positions().data(), m.weights().data(), m.size(), xi);
}

std::vector<cplx> fourier_atomic(const AtomicMeasure& m, const std::vector<double>& xis) {
  if (m.empty()) throw Error("empty measure");
  std::vector<cplx> out(xis.size());
  parallel_for(xis.size(), [&](std::size_t i) { out[i] = fourier_atomic(m, xis[i]); });
  return out;
}

cplx step_prefactor(int level, double k) {
  // (1 - e^{-i theta}) / (i theta) = e^{-i theta/2} sin(theta/2) / (theta/2), theta/2 = pi k h.
  const double half_turns = std::ldexp(k, -level) / 2.0;
  if (half_turns == 0.0) return {1.0, 0.0};
  const double u = 2 * M_PI * half_turns;
  return kernels::cis_turns(half_turns) * (std::sin(u) / u);
}

cplx step_phase_sum(const StepDensity& d, double k) {
  if (d.nodes().empty()) return {0.0, 0.0};
  if (k == 0.0) return {d.mass(), 0.0};
  const auto x = d.left_endpoints();
  return kernels::phase_sum(x.data(), d.weights().data(), x.size(), k);
}

cplx fourier_step(const StepDensity& d, double k) {
  if (k == 0.0) return {d.mass(), 0.0};
  return step_phase_sum(d, k) * step_prefactor(d.level(), k);
}

cplx fourier_product(const ProductMeasure& p, double xi) {
  cplx v(1.0, 0.0);
  for (const auto& f : p.factors()) v *= fourier_atomic(f, xi);
  if (p.envelope()) v *= find_window(p.envelope()->kind)(xi, p.envelope()->dilation);
  return v;
}

AtomicMeasure expand(const ProductMeasure& p, std::size_t max_atoms) {
  std::size_t count = 1;
  for (const auto& f : p.factors()) {
    if (f.size() != 0 && count > max_atoms / f.size())
      throw Error("expanded atom count exceeds " + std::to_string(max_atoms));
    count *= f.size();
  }
  std::vector<double> x{0.0}, w{1.0};
  for (const auto& f : p.factors()) {
    std::vector<double> nx, nw;
    nx.reserve(x.size() * f.size());
    nw.reserve(x.size() * f.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < f.size(); ++j) {
        nx.push_back(x[i] + f.positions()[j]);
        nw.push_back(w[i] * f.weights()[j]);
      }
    x = std::move(nx);
    w = std::move(nw);
  }
  // Atom sums may round past the summed hints by an ulp.
  Interval s = p.support();
  for (double v : x) {
    s.lo = std::min(s.lo, v);
    s.hi = std::max(s.hi, v);
  }
  return AtomicMeasure(std::move(x), std::move(w), s);
}

// Bands and fits --------------------------------------------------------------

std::vector<double> band_samples(int m, const BandOptions& opt) {
  if (opt.samples_per_band < 16) throw Error("samples_per_band must be at least 16");
  const auto band_key = static_cast<std::uint64_t>(static_cast<std::int64_t>(m) + (std::int64_t{1} << 31));
  std::vector<double> xi(static_cast<std::size_t>(opt.samples_per_band));
  for (std::size_t i = 0; i < xi.size(); ++i) {
    double u = van_der_corput(i);
    if (opt.sampling == Sampling::jittered)
      u += hash_uniform(opt.seed, band_key, i) * std::ldexp(1.0, -static_cast<int>(bit_length(i) + 1));
    double v = std::ldexp(1.0 + u, m);
    if (opt.integer_frequencies) v = std::floor(v);
    xi[i] = v;
  }
  return xi;
}

DecayFit fit_decay_exponent(FourierProfile& profile, int discard_low_bands) {
  if (discard_low_bands < 0) throw Error("discard_low_bands must be nonnegative");
  const auto& b = profile.bands;
  if (b.size() < static_cast<std::size_t>(discard_low_bands) + 4)
    throw Error("fit needs at least 4 bands after discarding " + std::to_string(discard_low_bands));
  double top = 0.0;
  for (const auto& band : b) top = std::max(top, band.envelope);
  std::vector<double> x, y;
  for (std::size_t i = static_cast<std::size_t>(discard_low_bands); i < b.size(); ++i) {
    if (!(b[i].envelope > kZeroEnvelope * top))
      throw Error("numerically zero envelope in band " + std::to_string(b[i].m));
    x.push_back(b[i].m);
    y.push_back(-2.0 * std::log2(b[i].envelope));
  }
  const Fit f = least_squares(x, y);
  profile.fitted_beta = f.slope;
  profile.stderr_beta = f.stderr;
  profile.slack_epsilon = 1.96 * f.stderr / 2.0;
  profile.residual = f.rms;
  profile.discard_low_bands = discard_low_bands;
  profile.degenerate = false;
  return {f.slope, f.stderr};
}

FourierProfile band_envelope(const std::function<cplx(double)>& eval, const BandOptions& opt) {
  if (opt.m_min > opt.m_max) throw Error("m_min exceeds m_max");
  const auto nb = static_cast<std::size_t>(opt.m_max - opt.m_min + 1);
  std::vector<std::vector<double>> xs(nb);
  for (std::size_t b = 0; b < nb; ++b) xs[b] = band_samples(opt.m_min + static_cast<int>(b), opt);
  const std::size_t per = xs[0].size();
  std::vector<double> mag(nb * per);
  parallel_for(mag.size(), [&](std::size_t t) {
    const std::size_t b = t / per;
    try {
      mag[t] = std::abs(eval(xs[b][t % per]));
    } catch (const std::exception& e) {
      throw Error("band m=" + std::to_string(opt.m_min + static_cast<int>(b)) + ": " + e.what());
    }
  });
  FourierProfile p;
  p.source = opt.source;
  p.discard_low_bands = opt.discard_low_bands;
  for (std::size_t b = 0; b < nb; ++b) {
    double env = 0.0;
    for (std::size_t i = 0; i < per; ++i) env = std::max(env, mag[b * per + i]);
    p.bands.push_back({opt.m_min + static_cast<int>(b), env});
  }
  try {
    fit_decay_exponent(p, opt.discard_low_bands);
  } catch (const Error&) {
    p.degenerate = true;
    p.fitted_beta = p.slack_epsilon = p.residual = p.stderr_beta = 0.0;
  }
  return p;
}

// Ball masses -------------------------------------------------------------

double ball_mass(const AtomicMeasure& m, double x, double r) {
  if (!(r > 0.0)) throw Error("radius must be positive");
  return std::min(m.mass(), m.mass_between(x - r, x + r));
}

double ball_mass(const StepDensity& d, double x, double r) {
  if (!(r > 0.0)) throw Error("radius must be positive");
  const auto& nodes = d.nodes();
  if (nodes.empty()) return 0.0;
  const double h = d.cell_width();
  const double lo = x - r, hi = x + r;
  const double cells = std::ldexp(1.0, d.level());
  const double alo = std::clamp(std::floor(lo / h), 0.0, cells - 1);
  const double ahi = std::clamp(std::floor(hi / h), 0.0, cells - 1);
  if (hi < 0.0 || lo > 1.0) return 0.0;
  const auto b = static_cast<std::size_t>(
      std::lower_bound(nodes.begin(), nodes.end(), static_cast<std::uint64_t>(alo)) - nodes.begin());
  const auto e = static_cast<std::size_t>(
      std::upper_bound(nodes.begin(), nodes.end(), static_cast<std::uint64_t>(ahi)) - nodes.begin());
  if (e <= b) return 0.0;
  auto partial = [&](std::size_t i) {
    const double a = std::ldexp(static_cast<double>(nodes[i]), -d.level());
    const double overlap = std::min(hi, a + h) - std::max(lo, a);
    return overlap <= 0.0 ? 0.0 : d.weights()[i] * std::min(1.0, overlap / h);
  };
  double s = partial(b);
  if (e - b >= 2) s += partial(e - 1);
  for (std::size_t i = b + 1; i + 1 < e; ++i) s += d.weights()[i];
  return std::min(s, d.mass());
}

std::vector<double> dyadic_radii(int k_min, int k_max) {
  if (k_min > k_max) throw Error("k_min exceeds k_max");
  std::vector<double> r;
  for (int k = k_min; k <= k_max; ++k) r.push_back(std::ldexp(1.0, -k));
  return r;
}

namespace {

template <class M>
BallProfile fit_balls(const M& m, const std::vector<double>& centers, const std::vector<double>& radii,
                      Side side, std::string source) {
  if (radii.size() < 4) throw Error("ball fit needs at least 4 radii");
  if (centers.empty()) throw Error("ball fit needs at least one center");
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (radii[i] != radii[i - 1] / 2) throw Error("radii must form a decreasing dyadic grid");
  BallProfile p;
  p.side = side;
  p.source = std::move(source);
  p.samples.resize(radii.size());
  parallel_for(radii.size(), [&](std::size_t i) {
    BallSample best{centers[0], radii[i], -1.0};
    for (double c : centers) {
      const double v = ball_mass(m, c, radii[i]);
      if (v > best.mass) best = {c, radii[i], v};
    }
    p.samples[i] = best;
  });
  std::vector<double> x, y;
  for (const auto& s : p.samples)
    if (s.mass > 0.0) {
      x.push_back(std::log2(s.r));
      y.push_back(std::log2(s.mass));
    }
  if (x.size() < 3) {
    p.degenerate = true;
    return p;
  }
  const Fit f = least_squares(x, y);
  p.fitted_alpha = f.slope;
  p.stderr_alpha = f.stderr;
  return p;
}

}  // namespace

BallProfile fit_ball_exponents(const AtomicMeasure& m, const std::vector<double>& centers,
                               const std::vector<double>& radii, Side side, std::string source) {
  return fit_balls(m, centers, radii, side, std::move(source));
}

BallProfile fit_ball_exponents(const StepDensity& d, const std::vector<double>& centers,
                               const std::vector<double>& radii, Side side, std::string source) {
  return fit_balls(d, centers, radii, side, std::move(source));
}

// One-line combination ----------------------------------------------------

double one_line_taper(double x, double x0) { return bump::phi0(x) * (x - x0) * (x - x0); }

OneLineResult one_line_combine(const AtomicMeasure& nu, double x0) {
  if (nu.empty()) throw Error("empty measure");
  if (nu.positions().front() < 0.0 || nu.positions().back() > 1.0) throw Error("nu must live in [0, 1]");
  if (!std::binary_search(nu.positions().begin(), nu.positions().end(), x0))
    throw Error("x0 outside the support of nu");
  std::vector<double> x, w, taper(nu.size());
  for (std::size_t i = 0; i < nu.size(); ++i) {
    x.push_back(nu.positions()[i] - 1.0);
    w.push_back(nu.weights()[i]);
  }
  for (std::size_t i = 0; i < nu.size(); ++i) {
    taper[i] = one_line_taper(nu.positions()[i], x0) * nu.weights()[i];
    x.push_back(nu.positions()[i]);
    w.push_back(taper[i]);
  }
  OneLineResult r;
  r.taper_mass = neumaier_sum(taper);
  r.degenerate = r.taper_mass == 0.0;
  r.measure = AtomicMeasure(std::move(x), std::move(w), Interval{-1.0, 1.0});
  return r;
}

// Independent quadrature ----------------------------------------------------

cplx quadrature_oracle(const std::function<double(double)>& density, double a, double b, double xi,
                       std::size_t resolution) {
  if (!(a < b)) throw Error("quadrature interval is empty");
  if (resolution < 1024) throw Error("quadrature resolution must be at least 2^10");
  if (static_cast<double>(resolution) < 64.0 * (b - a) * std::abs(xi))
    throw Error("quadrature resolution too low for |xi| = " + std::to_string(std::abs(xi)));
  constexpr std::size_t kChunks = 64;
  const double h = (b - a) / static_cast<double>(resolution);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::vector<long double> re(kChunks, 0.0L), im(kChunks, 0.0L);
  parallel_for(kChunks, [&](std::size_t c) {
    const std::size_t i0 = resolution * c / kChunks, i1 = resolution * (c + 1) / kChunks;
    long double sr = 0.0L, si = 0.0L;
    for (std::size_t i = i0; i < i1; ++i) {
      const double x = std::fma(static_cast<double>(i) + 0.5, h, a);
      const double f = density(x);
      if (f == 0.0) continue;
      // Phase in turns as a double plus its FMA residual, reduced before trigonometry.
      const double turns = x * xi;
      const double frac = (turns - std::nearbyint(turns)) + std::fma(x, xi, -turns);
      const double ph = two_pi * frac;
      sr += f * std::cos(ph);
      si -= f * std::sin(ph);
    }
    re[c] = sr;
    im[c] = si;
  });
  long double sr = 0.0L, si = 0.0L;
  for (std::size_t c = 0; c < kChunks; ++c) {
    sr += re[c];
    si += im[c];
  }
  return {static_cast<double>(sr * h), static_cast<double>(si * h)};
}

}  // namespace salem
