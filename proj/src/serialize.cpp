#include "salem/serialize.hpp"

#include <charconv>
#include <ostream>

namespace salem {

void to_json(Json& j, const Interval& v) { j = Json::array({v.lo, v.hi}); }
void from_json(const Json& j, Interval& v) {
  if (!j.is_array() || j.size() != 2) throw Error("interval must be a two-element array");
  v = {j[0].get<double>(), j[1].get<double>()};
}

void to_json(Json& j, const AtomicMeasure& v) {
  Json atoms = Json::array();
  for (std::size_t i = 0; i < v.size(); ++i) atoms.push_back(Json::array({v.positions()[i], v.weights()[i]}));
  j = Json{{"atoms", std::move(atoms)}, {"support_hint", v.support_hint()}};
}
void from_json(const Json& j, AtomicMeasure& v) {
  std::vector<double> x, w;
  for (const auto& a : j.at("atoms")) {
    x.push_back(a.at(0).get<double>());
    w.push_back(a.at(1).get<double>());
  }
  v = AtomicMeasure(std::move(x), std::move(w), j.at("support_hint").get<Interval>());
}

void to_json(Json& j, const StepDensity& v) {
  Json cells = Json::array();
  for (std::size_t i = 0; i < v.nodes().size(); ++i) cells.push_back(Json::array({v.nodes()[i], v.weights()[i]}));
  j = Json{{"level", v.level()}, {"cells", std::move(cells)}};
}
void from_json(const Json& j, StepDensity& v) {
  std::vector<std::uint64_t> a;
  std::vector<double> p;
  for (const auto& c : j.at("cells")) {
    a.push_back(c.at(0).get<std::uint64_t>());
    p.push_back(c.at(1).get<double>());
  }
  v = StepDensity(j.at("level").get<int>(), std::move(a), std::move(p));
}

void to_json(Json& j, const Window& v) { j = Json{{"kind", v.kind}, {"dilation", v.dilation}}; }
void from_json(const Json& j, Window& v) {
  v.kind = j.at("kind").get<std::string>();
  v.dilation = j.at("dilation").get<double>();
}

void to_json(Json& j, const ProductMeasure& v) {
  j = Json{{"factors", v.factors()}, {"envelope", nullptr}};
  if (v.envelope()) j["envelope"] = *v.envelope();
}
void from_json(const Json& j, ProductMeasure& v) {
  std::optional<Window> env;
  if (!j.at("envelope").is_null()) env = j.at("envelope").get<Window>();
  v = ProductMeasure(j.at("factors").get<std::vector<AtomicMeasure>>(), std::move(env));
}

void to_json(Json& j, const FourierProfile& v) {
  Json bands = Json::array();
  for (const auto& b : v.bands) bands.push_back(Json{{"m", b.m}, {"envelope", b.envelope}});
  j = Json{{"bands", std::move(bands)},
           {"fitted_beta", v.fitted_beta},
           {"slack_epsilon", v.slack_epsilon},
           {"residual", v.residual},
           {"stderr", v.stderr_beta},
           {"discard_low_bands", v.discard_low_bands},
           {"degenerate", v.degenerate},
           {"source", v.source}};
}
void from_json(const Json& j, FourierProfile& v) {
  v = {};
  for (const auto& b : j.at("bands")) v.bands.push_back({b.at("m").get<int>(), b.at("envelope").get<double>()});
  v.fitted_beta = j.at("fitted_beta").get<double>();
  v.slack_epsilon = j.at("slack_epsilon").get<double>();
  v.residual = j.at("residual").get<double>();
  v.stderr_beta = j.value("stderr", 0.0);
  v.discard_low_bands = j.value("discard_low_bands", 2);
  v.degenerate = j.value("degenerate", false);
  v.source = j.value("source", std::string());
}

std::string side_name(Side s) { return s == Side::upper ? "upper" : "lower"; }
Side parse_side(const std::string& s) {
  if (s == "upper") return Side::upper;
  if (s == "lower") return Side::lower;
  throw Error("unknown ball profile side: " + s);
}

void to_json(Json& j, const BallProfile& v) {
  Json samples = Json::array();
  for (const auto& s : v.samples) samples.push_back(Json{{"x", s.x}, {"r", s.r}, {"mass", s.mass}});
  j = Json{{"samples", std::move(samples)},
           {"fitted_alpha", v.fitted_alpha},
           {"side", side_name(v.side)},
           {"stderr", v.stderr_alpha},
           {"degenerate", v.degenerate},
           {"source", v.source}};
}
void from_json(const Json& j, BallProfile& v) {
  v = {};
  for (const auto& s : j.at("samples"))
    v.samples.push_back({s.at("x").get<double>(), s.at("r").get<double>(), s.at("mass").get<double>()});
  v.fitted_alpha = j.at("fitted_alpha").get<double>();
  v.side = parse_side(j.at("side").get<std::string>());
  v.stderr_alpha = j.value("stderr", 0.0);
  v.degenerate = j.value("degenerate", false);
  v.source = j.value("source", std::string());
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_bands_csv(std::ostream& os, const FourierProfile& p) {
  os << "m,envelope\n";
  for (const auto& b : p.bands) os << b.m << ',' << format_double(b.envelope) << '\n';
}

void write_balls_csv(std::ostream& os, const BallProfile& p) {
  os << "x,r,mass\n";
  for (const auto& s : p.samples)
    os << format_double(s.x) << ',' << format_double(s.r) << ',' << format_double(s.mass) << '\n';
}

}  // namespace salem
