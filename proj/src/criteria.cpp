#include "salem/criteria.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "salem/parallel.hpp"

namespace salem::criteria {
namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double lookup(const std::vector<std::pair<std::string, double>>& v, const std::string& key) {
  for (const auto& [k, x] : v)
    if (k == key) return x;
  throw Error("no entry '" + key + "' in criterion report");
}

Json pairs_to_json(const std::vector<std::pair<std::string, double>>& v) {
  Json j = Json::object();
  for (const auto& [k, x] : v) j[k] = x;
  return j;
}

std::vector<std::pair<std::string, double>> pairs_from_json(const Json& j) {
  std::vector<std::pair<std::string, double>> v;
  for (const auto& [k, x] : j.items()) v.emplace_back(k, x.get<double>());
  return v;
}

// int_a^b |eval|^2 by composite 8-point Gauss-Legendre, panels doubled until
// two successive values agree to tol.
double integrate_power(const std::function<cplx(double)>& eval, double a, double b, const IntegralOptions& opt,
                       int& refinements) {
  using GL = boost::math::quadrature::gauss<double, 8>;
  const auto& x = GL::abscissa();
  const auto& w = GL::weights();
  auto rule = [&](std::size_t panels) {
    const double h = (b - a) / static_cast<double>(panels);
    std::vector<double> part(panels, 0.0);
    parallel_for(panels, [&](std::size_t p) {
      const double mid = a + (static_cast<double>(p) + 0.5) * h;
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        s += w[i] * std::norm(eval(mid - h / 2 * x[i]));
        s += w[i] * std::norm(eval(mid + h / 2 * x[i]));
      }
      part[p] = s * h / 2;
    });
    double total = 0.0;
    for (double v : part) total += v;
    return total;
  };
  auto panels = static_cast<std::size_t>(std::max(1.0, std::ceil(b - a)));
  double prev = rule(panels);
  for (int r = 1; r <= opt.max_refinements; ++r) {
    panels *= 2;
    const double cur = rule(panels);
    refinements = std::max(refinements, r);
    if (std::abs(cur - prev) <= opt.tolerance * std::abs(cur)) return cur;
    prev = cur;
  }
  throw Error("quadrature over [" + std::to_string(a) + ", " + std::to_string(b) + "] did not settle after " +
              std::to_string(opt.max_refinements) + " doublings");
}

}  // namespace

std::string criterion_name(CriterionId id) {
  switch (id) {
    case CriterionId::uniformity: return "uniformity";
    case CriterionId::heavy_decay: return "heavy_decay";
    case CriterionId::lev: return "lev";
    case CriterionId::illw: return "illw";
  }
  return "";
}

std::string verdict_name(Verdict v) { return v == Verdict::no_frame_indicated ? "no_frame_indicated" : "inconclusive"; }

double CriterionReport::input(const std::string& key) const { return lookup(inputs, key); }
double CriterionReport::constant(const std::string& key) const { return lookup(constants, key); }

void to_json(Json& j, const CriterionReport& r) {
  j = Json::object();
  j["criterion"] = criterion_name(r.id);
  j["verdict"] = verdict_name(r.verdict);
  j["suspicious"] = r.suspicious;
  j["note"] = r.note;
  j["inputs"] = pairs_to_json(r.inputs);
  j["ratios"] = r.ratios;
  j["constants"] = pairs_to_json(r.constants);
  j["disclaimer"] = r.disclaimer;
}

void from_json(const Json& j, CriterionReport& r) {
  const auto id = j.at("criterion").get<std::string>();
  bool found = false;
  for (auto c : {CriterionId::uniformity, CriterionId::heavy_decay, CriterionId::lev, CriterionId::illw}) {
    if (criterion_name(c) == id) {
      r.id = c;
      found = true;
    }
  }
  if (!found) throw Error("unknown criterion '" + id + "'");
  const auto v = j.at("verdict").get<std::string>();
  if (v == "no_frame_indicated")
    r.verdict = Verdict::no_frame_indicated;
  else if (v == "inconclusive")
    r.verdict = Verdict::inconclusive;
  else
    throw Error("unknown verdict '" + v + "'");
  r.suspicious = j.at("suspicious").get<bool>();
  r.note = j.at("note").get<std::string>();
  r.inputs = pairs_from_json(j.at("inputs"));
  r.ratios = j.at("ratios").get<std::vector<double>>();
  r.constants = pairs_from_json(j.at("constants"));
  r.disclaimer = j.at("disclaimer").get<std::string>();
}

CriterionReport uniformity_verdict(const std::vector<double>& ratios, double threshold) {
  CriterionReport r;
  r.id = CriterionId::uniformity;
  r.ratios = ratios;
  r.inputs = {{"threshold", threshold}};
  if (ratios.size() < 2) {
    r.note = "fewer than two ratios";
    return r;
  }
  double min_inc = inf;
  for (std::size_t i = ratios.size() / 2; i + 1 < ratios.size(); ++i)
    min_inc = std::min(min_inc, ratios[i + 1] - ratios[i]);
  const double last = ratios.back();
  r.constants = {{"last_ratio", last}, {"min_tail_increment", min_inc}};

  bool closed = true;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double N = static_cast<double>(i + 1);
    if (ratios[i] != (N + 1) * (N + 2) / 2) closed = false;
  }
  if (closed) r.note = "ratios equal (N+1)(N+2)/2, which diverges";

  const bool grows = min_inc > 1e-12 * std::max(1.0, std::abs(last));
  if (last > threshold && grows) r.verdict = Verdict::no_frame_indicated;
  return r;
}

CriterionReport heavy_decay_verdict(const BallProfile& ball, const FourierProfile& fourier) {
  if (!ball.source.empty() && !fourier.source.empty() && ball.source != fourier.source)
    throw Error("profiles from different measures: '" + ball.source + "' and '" + fourier.source + "'");
  if (ball.side != Side::lower) throw Error("heavy_decay needs a lower ball profile");
  CriterionReport r;
  r.id = CriterionId::heavy_decay;
  const double a = ball.fitted_alpha, sa = ball.stderr_alpha;
  const double b = fourier.fitted_beta, sb = fourier.stderr_beta;
  r.inputs = {{"alpha", a}, {"alpha_stderr", sa}, {"beta", b}, {"beta_stderr", sb}};
  r.constants = {{"gap", (b - sb) - (a + sa)}};
  if (ball.degenerate || fourier.degenerate) {
    r.note = "degenerate profile";
    return r;
  }
  if (a < b / 2 - kMitsisMargin) {
    r.suspicious = true;
    r.note = "alpha below beta/2, which no measure with this decay allows";
    return r;
  }
  if (a + sa < b - sb) r.verdict = Verdict::no_frame_indicated;
  return r;
}

ShiReport shi_counting_check(const AtomicMeasure& m, double x0, double r, const std::vector<double>& lambda,
                             double B_est, int samples) {
  if (!(r > 0)) throw Error("radius must be positive");
  if (samples < 2) throw Error("need at least 2 frequency samples");
  ShiReport s;
  s.x0 = x0;
  s.r = r;
  s.R = 1 / (10 * r);
  std::vector<double> x, w;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double d = m.positions()[i] - x0;
    if (std::abs(d) <= r) {
      x.push_back(d);
      w.push_back(m.weights()[i]);
    }
  }
  for (double v : w) s.ball_mass += v;
  s.min_ratio = 1.0;
  if (s.ball_mass > 0) {
    const AtomicMeasure local(x, w);
    std::vector<double> xis(static_cast<std::size_t>(samples));
    for (int t = 0; t < samples; ++t) xis[static_cast<std::size_t>(t)] = s.R * t / (samples - 1);
    const auto vals = fourier_atomic(local, xis);
    for (std::size_t t = 0; t < vals.size(); ++t) {
      const double ratio = std::abs(vals[t]) / s.ball_mass;
      if (ratio < s.min_ratio) {
        s.min_ratio = ratio;
        s.witness_xi = xis[t];
      }
    }
  }
  s.cosine_bound = s.min_ratio >= 0.5;
  for (double l : lambda) s.count += std::abs(l) <= s.R;
  s.count_mass = static_cast<double>(s.count) * s.ball_mass * s.ball_mass;
  s.frame_mass = B_est * s.ball_mass;
  s.count_ceiling = s.ball_mass > 0 ? 4 * B_est / s.ball_mass : inf;
  s.count_within_ceiling = static_cast<double>(s.count) <= s.count_ceiling;
  return s;
}

IntegralReport integral_criteria(const std::function<cplx(double)>& eval, double alpha, double gamma, double C,
                                 const std::vector<double>& R_set, const IntegralOptions& opt) {
  if (R_set.empty()) throw Error("R_set is empty");
  if (!(C > 0)) throw Error("C must be positive");
  if (!(opt.lambda_min > 0 && opt.lambda_max >= opt.lambda_min && opt.lambda_points >= 2))
    throw Error("invalid lambda grid");
  IntegralReport out;

  auto& lev = out.lev;
  lev.id = CriterionId::lev;
  lev.inputs = {{"alpha", alpha}};
  int lev_ref = 0;
  double lev_min = inf, lev_arg = 0;
  for (double R : R_set) {
    if (!(R > 0)) throw Error("R must be positive");
    const double v = std::pow(R, -(1 - alpha)) * integrate_power(eval, -R, R, opt, lev_ref);
    lev.constants.emplace_back("R=" + format_double(R), v);
    if (v < lev_min) {
      lev_min = v;
      lev_arg = R;
    }
  }
  lev.constants.emplace_back("proxy", lev_min);
  lev.constants.emplace_back("argmin_R", lev_arg);
  lev.constants.emplace_back("refinements", lev_ref);
  lev.note = "liminf proxy over the R set; reported without a verdict";

  auto& illw = out.illw;
  illw.id = CriterionId::illw;
  illw.inputs = {{"gamma", gamma}, {"C", C}};
  int illw_ref = 0;
  auto inf_over = [&](int points) {
    std::vector<double> lam;
    for (int t = 0; t < points; ++t) {
      const double a = opt.lambda_min * std::pow(opt.lambda_max / opt.lambda_min, static_cast<double>(t) / (points - 1));
      lam.push_back(-a);
      lam.push_back(a);
    }
    std::pair<double, double> best{inf, 0.0};
    for (double l : lam) {
      const double v =
          std::pow(std::abs(l), gamma) * integrate_power([&](double xi) { return eval(l + xi); }, -C, C, opt, illw_ref);
      if (v < best.first) best = {v, l};
    }
    return best;
  };
  int points = opt.lambda_points;
  auto prev = inf_over(points);
  int grid_ref = 0;
  for (;;) {
    if (grid_ref == opt.max_refinements)
      throw Error("lambda grid did not settle after " + std::to_string(opt.max_refinements) + " doublings");
    points = 2 * points - 1;  // keeps the previous points
    const auto cur = inf_over(points);
    ++grid_ref;
    const bool settled = std::abs(cur.first - prev.first) <= opt.tolerance * std::abs(cur.first);
    prev = cur;
    if (settled) break;
  }
  illw.constants = {{"proxy", prev.first},
                    {"argmin_lambda", prev.second},
                    {"lambda_points", points},
                    {"grid_refinements", grid_ref},
                    {"refinements", illw_ref}};
  illw.note = "inf proxy over the lambda grid; reported without a verdict";
  return out;
}

FrameBounds frame_bounds_estimate(const AtomicMeasure& m, const std::vector<double>& lambda) {
  if (m.size() > kMaxFrameSize || lambda.size() > kMaxFrameSize)
    throw Error("frame estimate limited to " + std::to_string(kMaxFrameSize) + " atoms and frequencies");
  FrameBounds f;
  f.atoms = m.size();
  f.frequencies = lambda.size();
  if (lambda.empty() || m.empty()) {
    f.rank_deficient = !m.empty();
    return f;
  }
  const std::size_t n = m.size();
  const auto& x = m.positions();
  const auto& w = m.weights();
  Eigen::MatrixXcd G(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  parallel_for(n, [&](std::size_t j) {
    for (std::size_t k = 0; k <= j; ++k) {
      long double re = 0, im = 0;
      const double d = x[j] - x[k];
      for (double l : lambda) {
        const double t = l * d;
        const double turn = t - std::nearbyint(t) + std::fma(l, d, -t);
        re += std::cos(2 * std::numbers::pi * turn);
        im += std::sin(2 * std::numbers::pi * turn);
      }
      const double s = std::sqrt(w[j] * w[k]);
      const cplx v(static_cast<double>(re) * s, static_cast<double>(im) * s);
      G(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = v;
      G(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = std::conj(v);
    }
  });
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  f.B_est = std::max(0.0, ev(ev.size() - 1));
  f.A_est = std::max(0.0, ev(0));
  f.rank_deficient = lambda.size() < n || f.A_est < 1e-12 * f.B_est;
  if (lambda.size() < n) f.A_est = 0.0;
  return f;
}

}  // namespace salem::criteria
