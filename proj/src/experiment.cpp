#include "salem/experiment.hpp"

#include <fftw3.h>

#include <Eigen/Core>
#include <algorithm>
#include <bit>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/version.hpp>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "salem/arc.hpp"
#include "salem/brownian.hpp"
#include "salem/cantor.hpp"
#include "salem/convolution.hpp"
#include "salem/kaufman.hpp"
#include "salem/rng.hpp"

#ifndef SALEM_VERSION
#define SALEM_VERSION "0.0.0"
#endif

namespace salem::experiment {

std::string construction_name(Construction c) {
  switch (c) {
    case Construction::convolution: return "convolution";
    case Construction::cantor: return "cantor";
    case Construction::brownian: return "brownian";
    case Construction::kaufman: return "kaufman";
    case Construction::arc: return "arc";
    case Construction::one_line: return "one_line";
  }
  return "";
}

Construction parse_construction(const std::string& name) {
  for (auto c : {Construction::convolution, Construction::cantor, Construction::brownian, Construction::kaufman,
                 Construction::arc, Construction::one_line}) {
    if (construction_name(c) == name) return c;
  }
  if (name == "oneline") return Construction::one_line;
  throw Error("unknown construction '" + name +
              "'; expected convolution, cantor, brownian, kaufman, arc or one_line");
}

bool randomized(Construction c) { return c != Construction::kaufman && c != Construction::arc; }

double ExperimentConfig::s_value() const {
  if (s) return *s;
  return construction == Construction::kaufman || construction == Construction::arc ? 1.0 : 0.5;
}

int ExperimentConfig::levels_value() const {
  if (levels) return *levels;
  switch (construction) {
    case Construction::convolution: return 6;
    case Construction::cantor:
    case Construction::one_line: return 12;
    case Construction::brownian: return 30;
    case Construction::kaufman: return static_cast<int>(q.size());
    case Construction::arc: return 0;
  }
  return 0;
}

namespace {

int default_band_max(const ExperimentConfig& c) {
  if (c.band_max) return *c.band_max;
  switch (c.construction) {
    case Construction::convolution: return 14;
    case Construction::cantor:
    case Construction::one_line: return c.levels_value() - 1;
    case Construction::brownian: return static_cast<int>(std::floor(std::log2(c.xi_max)));
    case Construction::kaufman: return c.q.empty() ? 0 : static_cast<int>(std::floor(std::log2(c.q.back()))) - 1;
    case Construction::arc: return 0;
  }
  return 0;
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

void ExperimentConfig::validate() const {
  const std::string name = construction_name(construction);
  const double sv = s_value();
  if (!(sv > 0.0 && sv <= 1.0)) throw Error("s = " + fmt(sv) + " is outside the valid interval (0, 1]");
  if (construction == Construction::convolution && !(sv < 1.0))
    throw Error("convolution needs s in the interval (0, 1)");
  if (construction == Construction::brownian && !(sv <= 0.5))
    throw Error("brownian needs s in the interval (0, 1/2]");
  if (construction == Construction::arc && sv != 1.0) throw Error("arc has dimension 1; s must be 1");
  if (randomized(construction) && !seed) throw Error("seed is required for the " + name + " construction");

  const int L = levels_value();
  switch (construction) {
    case Construction::convolution:
      if (L < 1 || L > convolution::kMaxLevels)
        throw Error("convolution levels must lie in [1, " + std::to_string(convolution::kMaxLevels) + "]");
      break;
    case Construction::cantor:
    case Construction::one_line:
      if (L < 8 || L > cantor::kMaxLevels)
        throw Error(name + " levels must lie in [8, " + std::to_string(cantor::kMaxLevels) + "]");
      break;
    case Construction::brownian:
      if (L < 1 || L > 30) throw Error("brownian levels must lie in [1, 30]");
      break;
    case Construction::kaufman:
      if (q.empty()) throw Error("kaufman needs at least one q value");
      if (levels && *levels != static_cast<int>(q.size()))
        throw Error("kaufman levels must equal the number of q values");
      break;
    case Construction::arc:
      if (levels) throw Error("levels does not apply to arc");
      break;
  }
  if (t_vector) {
    if (construction != Construction::convolution) throw Error("t_vector applies to convolution only");
    if (static_cast<int>(t_vector->size()) != L) throw Error("t_vector needs one entry per level");
    for (double t : *t_vector)
      if (!(t >= 0.0 && t <= 1.0)) throw Error("t_vector entries must lie in [0, 1]");
  }
  if (retry_cap && *retry_cap < 1) throw Error("retry_cap must be positive");
  if (paths < 100) throw Error("paths must be at least 100");
  if (!(xi_min > 0.0 && xi_max >= 2 * xi_min)) throw Error("need 0 < xi_min and xi_max >= 2 xi_min");
  if (kmax < 1 || divisor_kmax < 1 || comparison_samples < 1) throw Error("kaufman sample counts must be positive");
  if (!(rmax >= 2.0 && rmax <= 1e5)) throw Error("rmax must lie in [2, 1e5]");
  if (samples < 1 || directions < 1) throw Error("samples and directions must be positive");
  if (gram_k < 1 || gram_k > 512) throw Error("gram_k must lie in [1, 512]");
  if (band_samples < 1 || band_min < 0 || band_discard < 0) throw Error("invalid band settings");
  if (construction != Construction::arc && default_band_max(*this) - band_min - band_discard + 1 < 4)
    throw Error("band range leaves fewer than 4 fitted bands");
}

// Configuration keys ---------------------------------------------------------

namespace {

enum class Kind { real, integer, u64, boolean, string, real_list, construction };

struct KeySpec {
  std::string name;  // section.key
  Kind kind;
  bool echoed;
  std::function<Json(const ExperimentConfig&)> get;  // null when unset
  std::function<void(ExperimentConfig&, const Json&)> set;
};

double json_real(const Json& j, const std::string& key) {
  if (!j.is_number()) throw Error(key + " must be a number");
  return j.get<double>();
}

std::int64_t json_int(const Json& j, const std::string& key) {
  if (!j.is_number_integer()) throw Error(key + " must be an integer");
  return j.get<std::int64_t>();
}

template <class T>
Json opt_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

const std::vector<KeySpec>& key_table() {
  using C = ExperimentConfig;
  static const std::vector<KeySpec> table = [] {
    std::vector<KeySpec> t;
    auto real = [&](std::string name, double C::*m) {
      t.push_back({name, Kind::real, true, [m](const C& c) { return Json(c.*m); },
                   [m, name](C& c, const Json& j) { c.*m = json_real(j, name); }});
    };
    auto integer = [&](std::string name, auto C::*m) {
      t.push_back({name, Kind::integer, true, [m](const C& c) { return Json(c.*m); },
                   [m, name](C& c, const Json& j) {
                     c.*m = static_cast<std::remove_reference_t<decltype(c.*m)>>(json_int(j, name));
                   }});
    };
    auto tol = [&](std::string key, double Tolerances::*m) {
      const std::string name = "tolerances." + key;
      t.push_back({name, Kind::real, true, [m](const C& c) { return Json(c.tol.*m); },
                   [m, name](C& c, const Json& j) { c.tol.*m = json_real(j, name); }});
    };

    t.push_back({"experiment.construction", Kind::construction, true,
                 [](const C& c) { return Json(construction_name(c.construction)); },
                 [](C& c, const Json& j) {
                   if (!j.is_string()) throw Error("experiment.construction must be a string");
                   c.construction = parse_construction(j.get<std::string>());
                 }});
    t.push_back({"experiment.s", Kind::real, true, [](const C& c) { return opt_json(c.s); },
                 [](C& c, const Json& j) { c.s = json_real(j, "experiment.s"); }});
    t.push_back({"experiment.seed", Kind::u64, true, [](const C& c) { return opt_json(c.seed); },
                 [](C& c, const Json& j) {
                   if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
                     throw Error("experiment.seed must be an unsigned 64-bit integer");
                   c.seed = j.get<std::uint64_t>();
                 }});
    t.push_back({"experiment.levels", Kind::integer, true, [](const C& c) { return opt_json(c.levels); },
                 [](C& c, const Json& j) { c.levels = static_cast<int>(json_int(j, "experiment.levels")); }});
    t.push_back({"experiment.retry_cap", Kind::integer, true, [](const C& c) { return opt_json(c.retry_cap); },
                 [](C& c, const Json& j) { c.retry_cap = static_cast<int>(json_int(j, "experiment.retry_cap")); }});
    t.push_back({"convolution.t_vector", Kind::real_list, true, [](const C& c) { return opt_json(c.t_vector); },
                 [](C& c, const Json& j) {
                   std::vector<double> v;
                   for (const auto& e : j) v.push_back(json_real(e, "convolution.t_vector"));
                   c.t_vector = v;
                 }});
    integer("brownian.paths", &C::paths);
    real("brownian.xi_min", &C::xi_min);
    real("brownian.xi_max", &C::xi_max);
    t.push_back({"kaufman.q", Kind::real_list, true, [](const C& c) { return Json(c.q); },
                 [](C& c, const Json& j) {
                   c.q.clear();
                   for (const auto& e : j) c.q.push_back(json_real(e, "kaufman.q"));
                 }});
    t.push_back({"kaufman.cs", Kind::real, true, [](const C& c) { return opt_json(c.cs); },
                 [](C& c, const Json& j) { c.cs = json_real(j, "kaufman.cs"); }});
    integer("kaufman.kmax", &C::kmax);
    integer("kaufman.divisor_kmax", &C::divisor_kmax);
    integer("kaufman.comparison_samples", &C::comparison_samples);
    real("arc.rmax", &C::rmax);
    integer("arc.samples", &C::samples);
    integer("arc.directions", &C::directions);
    integer("arc.gram_k", &C::gram_k);
    integer("bands.samples", &C::band_samples);
    integer("bands.min", &C::band_min);
    t.push_back({"bands.max", Kind::integer, true, [](const C& c) { return opt_json(c.band_max); },
                 [](C& c, const Json& j) { c.band_max = static_cast<int>(json_int(j, "bands.max")); }});
    integer("bands.discard", &C::band_discard);
    tol("decay_margin", &Tolerances::decay_margin);
    tol("kaufman_decay_margin", &Tolerances::kaufman_decay_margin);
    tol("slope_margin", &Tolerances::slope_margin);
    tol("increment_C", &Tolerances::increment_C);
    tol("increment_eps", &Tolerances::increment_eps);
    tol("ahlfors_eps", &Tolerances::ahlfors_eps);
    tol("uniformity_threshold", &Tolerances::uniformity_threshold);
    tol("acceptance_rate", &Tolerances::acceptance_rate);
    tol("stabilization", &Tolerances::stabilization);
    tol("gram", &Tolerances::gram);
    tol("arc_quadrature", &Tolerances::arc_quadrature);
    tol("mass", &Tolerances::mass);
    t.push_back({"output.path", Kind::string, false, [](const C& c) { return Json(c.output); },
                 [](C& c, const Json& j) {
                   if (!j.is_string()) throw Error("output.path must be a string");
                   c.output = j.get<std::string>();
                 }});
    t.push_back({"output.csv", Kind::boolean, false, [](const C& c) { return Json(c.csv); },
                 [](C& c, const Json& j) {
                   if (!j.is_boolean()) throw Error("output.csv must be true or false");
                   c.csv = j.get<bool>();
                 }});
    t.push_back({"output.timing", Kind::boolean, false, [](const C& c) { return Json(c.timing); },
                 [](C& c, const Json& j) {
                   if (!j.is_boolean()) throw Error("output.timing must be true or false");
                   c.timing = j.get<bool>();
                 }});
    return t;
  }();
  return table;
}

const KeySpec& find_key(const std::string& name) {
  for (const auto& k : key_table())
    if (k.name == name) return k;
  throw Error("unknown key '" + name + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& text, const std::string& key) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end || !std::isfinite(v)) throw Error(key + ": '" + text + "' is not a number");
  return v;
}

Json text_to_json(const KeySpec& k, const std::string& text) {
  switch (k.kind) {
    case Kind::real: return parse_real(text, k.name);
    case Kind::integer: {
      std::int64_t v = 0;
      const auto* end = text.data() + text.size();
      const auto [p, ec] = std::from_chars(text.data(), end, v);
      if (ec != std::errc() || p != end) throw Error(k.name + ": '" + text + "' is not an integer");
      return v;
    }
    case Kind::u64: {
      std::uint64_t v = 0;
      const auto* end = text.data() + text.size();
      const auto [p, ec] = std::from_chars(text.data(), end, v);
      if (ec != std::errc() || p != end) throw Error(k.name + ": '" + text + "' is not an unsigned 64-bit integer");
      return v;
    }
    case Kind::boolean:
      if (text == "true") return true;
      if (text == "false") return false;
      throw Error(k.name + ": expected true or false");
    case Kind::string:
    case Kind::construction: return text;
    case Kind::real_list: {
      Json arr = Json::array();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) arr.push_back(parse_real(trim(item), k.name));
      if (arr.empty()) throw Error(k.name + ": empty list");
      return arr;
    }
  }
  return nullptr;
}

std::string json_to_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number()) return fmt(v.get<double>());
  std::string out;
  for (const auto& e : v) {
    if (!out.empty()) out += ", ";
    out += json_to_text(e);
  }
  return out;
}

std::pair<std::string, std::string> split_key(const std::string& name) {
  const auto dot = name.find('.');
  return {name.substr(0, dot), name.substr(dot + 1)};
}

}  // namespace

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  const auto& k = find_key(key);
  k.set(c, text_to_json(k, value));
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line, section;
  std::set<std::string> seen;
  bool have_schema = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (!have_schema) {
      if (!section.empty() || key != "schema") throw Error(where + "the first assignment must be schema");
      if (value != kConfigSchema)
        throw Error(where + "unsupported schema '" + value + "'; expected " + kConfigSchema);
      have_schema = true;
      continue;
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (!seen.insert(full).second) throw Error(where + "duplicate key '" + full + "'");
    try {
      set_config_value(c, full, value);
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
  }
  if (!have_schema) throw Error(std::string("missing schema line; expected schema = ") + kConfigSchema);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read " + path + ": " + std::strerror(errno));
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  // A report embeds its config, so a report file replays directly.
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    const Json j = Json::parse(text);
    if (j.contains("config") && j.contains("schema") && j["schema"] == kReportSchema) {
      if (j["config"].is_null()) throw Error(path + ": the report carries no config");
      return j["config"].get<ExperimentConfig>();
    }
    return j.get<ExperimentConfig>();
  }
  return parse_config(text);
}

std::string format_config(const ExperimentConfig& c) {
  std::string out = std::string("schema = ") + kConfigSchema + "\n";
  std::string section;
  for (const auto& k : key_table()) {
    const Json v = k.get(c);
    if (v.is_null()) continue;
    const auto [sec, key] = split_key(k.name);
    if (sec != section) {
      out += "\n[" + sec + "]\n";
      section = sec;
    }
    out += key + " = " + json_to_text(v) + "\n";
  }
  return out;
}

// Output settings are left out so that reports do not depend on where they are written.
void to_json(Json& j, const ExperimentConfig& c) {
  j = Json::object();
  j["schema"] = kConfigSchema;
  for (const auto& k : key_table()) {
    if (!k.echoed) continue;
    const Json v = k.get(c);
    if (v.is_null()) continue;
    const auto [sec, key] = split_key(k.name);
    j[sec][key] = v;
  }
}

void from_json(const Json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw Error("config must be a JSON object");
  c = ExperimentConfig{};
  if (!j.contains("schema") || j["schema"] != kConfigSchema)
    throw Error(std::string("config schema must be ") + kConfigSchema);
  for (const auto& [sec, body] : j.items()) {
    if (sec == "schema") continue;
    if (!body.is_object()) throw Error("config section '" + sec + "' must be an object");
    for (const auto& [key, value] : body.items()) find_key(sec + "." + key).set(c, value);
  }
}

// Reports ------------------------------------------------------------------

namespace {

class Fnv {
 public:
  void add(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h_ ^= (v >> (8 * b)) & 0xffu;
      h_ *= 0x100000001b3ULL;
    }
  }
  void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
  void add(const AtomicMeasure& m) {
    add(static_cast<std::uint64_t>(m.size()));
    for (std::size_t i = 0; i < m.size(); ++i) {
      add(m.positions()[i]);
      add(m.weights()[i]);
    }
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
    return buf;
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

// Non-finite values have no JSON number form.
Json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

void to_json(Json& j, const Check& c) { j = Json{{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}}; }
void from_json(const Json& j, Check& c) {
  c.name = j.at("name").get<std::string>();
  c.pass = j.at("pass").get<bool>();
  c.detail = j.at("detail").get<std::string>();
}

void to_json(Json& j, const Failure& f) {
  j = Json{{"stage", f.stage}, {"message", f.message}, {"failed_checks", f.failed_checks}};
}
void from_json(const Json& j, Failure& f) {
  f.stage = j.at("stage").get<std::string>();
  f.message = j.at("message").get<std::string>();
  f.failed_checks = j.at("failed_checks").get<std::vector<std::string>>();
}

std::string checksum(const AtomicMeasure& m) {
  Fnv f;
  f.add(m);
  return f.hex();
}

std::vector<std::pair<std::string, std::string>> library_versions() {
  return {
      {"salemlab", SALEM_VERSION},
      {"fftw", fftw_version},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
      {"boost", BOOST_LIB_VERSION},
      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
  };
}

void to_json(Json& j, const RunReport& r) {
  j = Json::object();
  j["schema"] = r.schema;
  Json v = Json::object();
  for (const auto& [k, val] : r.versions) v[k] = val;
  j["versions"] = v;
  j["config"] = r.config ? Json(*r.config) : Json(nullptr);
  j["digest"] = r.digest;
  j["fourier_profiles"] = r.fourier;
  j["ball_profiles"] = r.balls;
  j["criteria"] = r.criteria;
  j["checks"] = r.checks;
  j["details"] = r.details;
  j["failure"] = r.failure ? Json(*r.failure) : Json(nullptr);
  if (r.wall_seconds) j["wall_seconds"] = *r.wall_seconds;
}

void from_json(const Json& j, RunReport& r) {
  r = RunReport{};
  r.schema = j.at("schema").get<std::string>();
  if (r.schema != kReportSchema) throw Error("unsupported report schema '" + r.schema + "'");
  for (const auto& [k, v] : j.at("versions").items()) r.versions.emplace_back(k, v.get<std::string>());
  if (!j.at("config").is_null()) r.config = j["config"].get<ExperimentConfig>();
  r.digest = j.at("digest");
  r.fourier = j.at("fourier_profiles").get<std::vector<FourierProfile>>();
  r.balls = j.at("ball_profiles").get<std::vector<BallProfile>>();
  r.criteria = j.at("criteria").get<std::vector<criteria::CriterionReport>>();
  r.checks = j.at("checks").get<std::vector<Check>>();
  r.details = j.at("details");
  if (!j.at("failure").is_null()) r.failure = j["failure"].get<Failure>();
  if (j.contains("wall_seconds")) r.wall_seconds = j["wall_seconds"].get<double>();
}

bool operator==(const RunReport& a, const RunReport& b) { return report_text(a) == report_text(b); }

std::string report_text(const RunReport& r) { return Json(r).dump(1) + "\n"; }

// Pipelines ----------------------------------------------------------------

namespace {

struct Stage {
  std::string name;
  std::function<void()> body;
};

class Pipeline {
 public:
  Pipeline(const ExperimentConfig& c, RunReport& r) : c_(c), r_(r) {}

  void check(std::string name, bool pass, std::string detail) {
    r_.checks.push_back({std::move(name), pass, std::move(detail)});
  }

  BandOptions bands(const std::string& source, bool integer = false) const {
    BandOptions o;
    o.m_min = c_.band_min;
    o.m_max = default_band_max(c_);
    o.samples_per_band = c_.band_samples;
    o.discard_low_bands = c_.band_discard;
    o.integer_frequencies = integer;
    o.seed = Stream(c_.seed.value_or(0)).split("bands").key();
    o.source = source;
    return o;
  }

  // Stages run in order; the first error stops the run.
  void run(const std::vector<Stage>& stages) {
    for (const auto& st : stages) {
      try {
        st.body();
      } catch (const std::exception& e) {
        r_.failure = Failure{st.name, construction_name(c_.construction) + ": " + e.what(), failed()};
        return;
      }
    }
    if (auto f = failed(); !f.empty()) {
      r_.failure = Failure{"checks", std::to_string(f.size()) + " check(s) failed", std::move(f)};
    }
  }

 private:
  std::vector<std::string> failed() const {
    std::vector<std::string> f;
    for (const auto& ch : r_.checks)
      if (!ch.pass) f.push_back(ch.name);
    return f;
  }

  const ExperimentConfig& c_;
  RunReport& r_;
};

std::string decay_detail(const FourierProfile& p, double floor) {
  return "beta_hat " + fmt(p.fitted_beta) + " +- " + fmt(p.stderr_beta) + " against " + fmt(floor) +
         (p.degenerate ? " (degenerate profile)" : "");
}

void run_convolution(const ExperimentConfig& c, RunReport& r) {
  Pipeline pl(c, r);
  const double s = c.s_value();
  const int K = c.levels_value();
  auto inst = std::make_shared<convolution::Instance>();
  auto upper = std::make_shared<BallProfile>();
  auto lower = std::make_shared<BallProfile>();
  pl.run({
      {"construction",
       [&] {
         *inst = convolution::build(s, K, c.t_vector, Stream(*c.seed).split("convolution"),
                                    c.retry_cap.value_or(convolution::kDefaultRetryCap));
         Fnv f;
         std::uint64_t atoms = 1;
         for (const auto& fac : inst->measure.factors()) {
           f.add(fac);
           atoms *= fac.size();
         }
         r.digest = {{"levels", K}, {"atoms", atoms}, {"checksum", f.hex()}};
         Json lv = Json::array();
         for (const auto& L : inst->levels)
           lv.push_back({{"k", L.k}, {"d", L.d}, {"r", L.r}, {"L", L.L}, {"t", L.t}, {"l", L.l}, {"x", L.x},
                         {"p", L.p}, {"a_r_min", L.a_r_min}, {"threshold", L.threshold}, {"attempts", L.attempts}});
         r.details["levels"] = lv;
         r.details["scale"] = inst->scale;
         const auto bad = convolution::revalidate(*inst);
         pl.check("point_invariants", bad.empty(), bad.empty() ? "all levels valid" : bad);
       }},
      {"ahlfors",
       [&] {
         const auto a = convolution::ahlfors_check(*inst, c.tol.ahlfors_eps);
         Json lv = Json::array();
         for (const auto& L : a.levels)
           lv.push_back({{"n", L.n}, {"r", L.r}, {"min_mass", L.min_mass}, {"max_mass", L.max_mass},
                         {"lower", L.lower}, {"upper", L.upper}, {"worst_ratio", L.worst_ratio}, {"pass", L.pass}});
         r.details["ahlfors"] = {{"worst_ratio", a.worst_ratio}, {"pass", a.pass}, {"levels", lv}};
         pl.check("ahlfors_sandwich", a.pass, a.pass ? "worst ratio " + fmt(a.worst_ratio) : a.violation);
       }},
      {"fourier",
       [&] {
         const auto& m = inst->measure;
         auto p = band_envelope([&](double xi) { return fourier_product(m, xi); }, pl.bands("convolution"));
         const double floor = s - c.tol.decay_margin;
         pl.check("decay_surrogate", !p.degenerate && p.fitted_beta >= floor, decay_detail(p, floor));
         r.fourier.push_back(std::move(p));
       }},
      {"balls",
       [&] {
         const auto ex = expand(inst->measure);
         const auto radii = dyadic_radii(4, 16);
         *upper = fit_ball_exponents(ex, ex.positions(), radii, Side::upper, "convolution");
         *lower = fit_ball_exponents(ex, ex.positions(), radii, Side::lower, "convolution");
         r.balls.push_back(*upper);
         r.balls.push_back(*lower);
       }},
      {"criteria",
       [&] {
         // Ratios read off the built weights, checked against the closed form.
         std::vector<double> ratios;
         double prod = 1;
         for (const auto& L : inst->levels) {
           prod *= *std::max_element(L.p.begin(), L.p.end()) / *std::min_element(L.p.begin(), L.p.end());
           ratios.push_back(prod);
         }
         const auto closed = convolution::ratio_sequence(K);
         double dev = 0;
         for (int n = 0; n < K; ++n) dev = std::max(dev, std::abs(ratios[n] / closed[n] - 1));
         pl.check("ratio_closed_form", dev <= 1e-12, "max relative deviation " + fmt(dev));
         auto u = criteria::uniformity_verdict(ratios, c.tol.uniformity_threshold);
         pl.check("uniformity_fires", u.verdict == criteria::Verdict::no_frame_indicated,
                  "last ratio " + fmt(u.ratios.empty() ? 0.0 : u.ratios.back()) + ", threshold " +
                      fmt(c.tol.uniformity_threshold));
         r.criteria.push_back(std::move(u));
         r.criteria.push_back(criteria::heavy_decay_verdict(*lower, r.fourier.front()));
       }},
      {"integral_criteria",
       [&] {
         const auto& m = inst->measure;
         auto ir = criteria::integral_criteria([&](double xi) { return fourier_product(m, xi); },
                                               upper->fitted_alpha, r.fourier.front().fitted_beta, 1.0,
                                               {16, 64, 256});
         r.criteria.push_back(std::move(ir.lev));
         r.criteria.push_back(std::move(ir.illw));
       }},
  });
}

Json increment_json(const cantor::IncrementReport& ir) {
  return {{"j", ir.j},           {"max_ratio", ir.max_ratio}, {"witness_k", ir.witness_k},
          {"doubling_ratio", ir.doubling_ratio}, {"pass", ir.pass}};
}

// Levels whose increment check runs; the check scans |k| <= 2^{j+4}.
inline constexpr int kIncrementLevelCap = 16;

void run_cantor(const ExperimentConfig& c, RunReport& r) {
  Pipeline pl(c, r);
  const double s = c.s_value();
  const int J = c.levels_value();
  const std::uint64_t seed = *c.seed;
  auto tr = std::make_shared<std::vector<cantor::DyadicState>>();
  auto tm = std::make_shared<AtomicMeasure>();
  auto ball = std::make_shared<BallProfile>();
  pl.run({
      {"construction",
       [&] {
         *tr = cantor::build(s, J, Stream(seed).split("cantor"), c.retry_cap.value_or(cantor::kDefaultRetryCap));
         const auto& st = tr->back();
         Fnv f;
         for (std::size_t i = 0; i < st.nodes.size(); ++i) {
           f.add(st.nodes[i]);
           f.add(st.weights[i]);
         }
         double prod_t = 1;
         for (int t : st.t) prod_t *= t;
         r.digest = {{"levels", J}, {"nodes", st.nodes.size()}, {"prod_t", prod_t}, {"checksum", f.hex()}};
         std::vector<std::size_t> counts;
         std::vector<int> attempts, flagged;
         std::vector<double> chi, thr;
         for (const auto& x : *tr) {
           counts.push_back(x.nodes.size());
           attempts.push_back(x.attempts);
           chi.push_back(x.chi_max);
           thr.push_back(x.threshold);
           if (x.flagged) flagged.push_back(x.j);
         }
         r.details["t"] = st.t;
         r.details["node_counts"] = counts;
         r.details["attempts"] = attempts;
         r.details["chi_max"] = chi;
         r.details["threshold"] = thr;
         r.details["flagged_levels"] = flagged;
         const double hm = cantor::heavy_mass(st);
         r.details["heavy"] = {{"node", st.nodes[st.heavy]}, {"mass", hm}};
         std::string bad;
         for (const auto& x : *tr)
           if (bad.empty()) bad = cantor::validate(x);
         pl.check("states_valid", bad.empty(), bad.empty() ? "all levels valid" : bad);
         pl.check("heavy_chain_exact", cantor::heavy_chain_exact(st), "symbolic exponents of the heavy weight");
         const double err = std::abs(hm * hm * prod_t - 1.0);
         pl.check("heavy_mass_identity", err <= 1e-10, "|p^2 prod t - 1| = " + fmt(err));
         pl.check("no_flagged_levels", flagged.empty(), std::to_string(flagged.size()) + " level(s) hit the retry cap");
       }},
      {"sigma",
       [&] {
         const auto sr = cantor::sigma_recursion_check(*tr);
         r.details["sigma"] = {{"direct", sr.direct},
                               {"max_abs_diff", sr.max_abs_diff},
                               {"count_bound_failures", sr.count_bound_failures}};
         pl.check("sigma_recursion", sr.recursion_pass, "max |direct - recursed| " + fmt(sr.max_abs_diff));
         pl.check("sigma_bound", sr.bound_pass, "sigma^2 <= (#doublings + 1) / prod t");
       }},
      {"increments",
       [&] {
         const int top = std::min(J, kIncrementLevelCap);
         std::vector<cantor::IncrementReport> reps(static_cast<std::size_t>(top));
         for (int j = 0; j < top; ++j)
           reps[j] = cantor::increment_bound_check((*tr)[j], (*tr)[j + 1], c.tol.increment_C, c.tol.increment_eps);
         Json arr = Json::array();
         double worst = 0;
         std::string bad;
         for (const auto& ir : reps) {
           arr.push_back(increment_json(ir));
           worst = std::max(worst, ir.max_ratio);
           if (!ir.pass && bad.empty()) bad = ir.violation;
         }
         r.details["increments"] = arr;
         pl.check("increment_bound", bad.empty(),
                  bad.empty() ? "max ratio " + fmt(worst) + " over steps j < " + std::to_string(top) : bad);
       }},
      {"sampler",
       [&] {
         Json arr = Json::array();
         double lowest = 1.0;
         for (int j = 1; j <= std::min(J, 10); ++j) {
           const double a = cantor::acceptance_rate((*tr)[j], Stream(seed).split("acceptance", j), 200);
           arr.push_back({{"j", j}, {"rate", a}});
           lowest = std::min(lowest, a);
         }
         r.details["acceptance"] = arr;
         pl.check("sampler_acceptance", lowest >= c.tol.acceptance_rate,
                  "lowest rate " + fmt(lowest) + " over 200 trials per level");
       }},
      {"fourier",
       [&] {
         const auto& st = tr->back();
         const double delta = cantor::taper_delta(st.t);
         *tm = cantor::tapered_measure(st, delta);
         auto tp = band_envelope([&](double xi) { return fourier_atomic(*tm, xi); }, pl.bands("cantor"));
         const auto d = st.density();
         auto up = band_envelope([&](double k) { return fourier_step(d, k); }, pl.bands("cantor_untapered", true));
         // Whether the taper keeps the decay exponent is reported, not assumed.
         r.details["taper"] = {{"delta", delta},
                               {"beta_tapered", tp.fitted_beta},
                               {"beta_untapered", up.fitted_beta},
                               {"difference", tp.fitted_beta - up.fitted_beta},
                               {"tapered_mass", tm->mass()}};
         const double floor = s - c.tol.decay_margin;
         pl.check("decay_surrogate", !up.degenerate && up.fitted_beta >= floor, decay_detail(up, floor));
         r.fourier.push_back(std::move(tp));
         r.fourier.push_back(std::move(up));
       }},
      {"balls",
       [&] {
         const auto& st = tr->back();
         const auto d = st.density();
         std::vector<double> centers;
         for (auto n : st.nodes) centers.push_back((static_cast<double>(n) + 0.5) * d.cell_width());
         *ball = fit_ball_exponents(d, centers, dyadic_radii(2, J - 2), Side::lower, "cantor");
         r.balls.push_back(*ball);
       }},
      {"criteria",
       [&] {
         auto hv = criteria::heavy_decay_verdict(*ball, r.fourier.front());
         pl.check("heavy_decay_fires", hv.verdict == criteria::Verdict::no_frame_indicated,
                  "alpha_hat " + fmt(ball->fitted_alpha) + " +- " + fmt(ball->stderr_alpha) + ", beta_hat " +
                      fmt(r.fourier.front().fitted_beta) + " +- " + fmt(r.fourier.front().stderr_beta));
         r.criteria.push_back(std::move(hv));
       }},
      {"integral_criteria",
       [&] {
         auto ir = criteria::integral_criteria([&](double xi) { return fourier_atomic(*tm, xi); }, ball->fitted_alpha,
                                               r.fourier.front().fitted_beta, 1.0, {16, 64, 256});
         r.criteria.push_back(std::move(ir.lev));
         r.criteria.push_back(std::move(ir.illw));
       }},
  });
}

void run_brownian(const ExperimentConfig& c, RunReport& r) {
  Pipeline pl(c, r);
  const double s = c.s_value();
  const int J = c.levels_value();
  const std::uint64_t seed = *c.seed;
  auto base = std::make_shared<brownian::BaseMeasure>();
  pl.run({
      {"construction",
       [&] {
         *base = brownian::base_measure(s, J);
         const auto& d = base->density;
         Fnv f;
         for (std::size_t i = 0; i < d.nodes().size(); ++i) {
           f.add(d.nodes()[i]);
           f.add(d.weights()[i]);
         }
         r.digest = {{"levels", J}, {"nodes", d.nodes().size()}, {"checksum", f.hex()}};
         r.details["t"] = base->t;
       }},
      {"ball_conditions",
       [&] {
         const auto bc = brownian::ball_conditions(*base);
         r.details["ball_conditions"] = {{"origin_error", bc.origin_error},
                                         {"origin_exact", bc.origin_exact},
                                         {"away_constant", bc.away_constant},
                                         {"witness_x", bc.witness_x},
                                         {"witness_j", bc.witness_j}};
         pl.check("origin_ball_exact", bc.origin_exact, "max error " + fmt(bc.origin_error));
       }},
      {"decay_mc",
       [&] {
         std::vector<double> xis;
         for (double x = c.xi_min; x <= c.xi_max; x *= 2) xis.push_back(x);
         const auto mc = brownian::decay_mc(s, J, xis, c.paths, seed);
         Json pts = Json::array();
         for (const auto& p : mc.points)
           pts.push_back({{"xi", p.xi}, {"mean", p.mean}, {"stderr", p.stderr}, {"constant", p.constant}});
         r.details["decay_mc"] = {{"paths", mc.n_paths},     {"seed", mc.seed},
                                  {"slope", mc.fitted_slope}, {"slope_stderr", mc.slope_stderr},
                                  {"fitted_C", mc.fitted_C},  {"points", pts}};
         const double target = -2 * s;
         pl.check("decay_slope", std::abs(mc.fitted_slope - target) <= c.tol.slope_margin,
                  "slope " + fmt(mc.fitted_slope) + " against " + fmt(target) + " +- " + fmt(c.tol.slope_margin));
       }},
      {"path",
       [&] {
         const auto path = brownian::sample_path(brownian::cell_centers(*base), Stream(seed).split("path", 0).key());
         const auto image = brownian::pushforward(*base, path);
         r.digest["path0_checksum"] = checksum(image);
         r.fourier.push_back(
             band_envelope([&](double xi) { return fourier_atomic(image, xi); }, pl.bands("brownian")));
         auto bp = brownian::origin_ball_profile(image, 2, std::max(6, J / 2));
         bp.source = "brownian";
         r.balls.push_back(bp);
         r.criteria.push_back(criteria::heavy_decay_verdict(bp, r.fourier.back()));
       }},
  });
}

void run_kaufman(const ExperimentConfig& c, RunReport& r) {
  using namespace kaufman;
  Pipeline pl(c, r);
  const double s = c.s_value();
  auto params = std::make_shared<KaufmanParams>();
  auto phi = std::make_shared<AuxPhi>();
  pl.run({
      {"construction",
       [&] {
         *params = make_params(s, c.q, c.cs);
         *phi = build_phi();
         const auto& p = *params;
         std::vector<std::size_t> mu_sizes, nu_sizes;
         Json nu_range = Json::array();
         for (int i = 1; i <= p.levels(); ++i) {
           mu_sizes.push_back(p.primes(i, Variant::mu).size());
           const auto& nu = p.primes(i, Variant::nu);
           nu_sizes.push_back(nu.size());
           nu_range.push_back({nu.front(), nu.back()});
         }
         r.digest = {{"levels", p.levels()},
                     {"C_s", p.C_s},
                     {"cs_calibrated", p.cs_calibrated},
                     {"P_mu_sizes", mu_sizes},
                     {"P_nu_sizes", nu_sizes},
                     {"P_nu_ranges", nu_range}};
         r.details["phi"] = {{"A1", phi->A1},
                             {"A2", phi->A2},
                             {"quartic_lower", phi->quartic_lower},
                             {"quartic_upper", phi->quartic_upper},
                             {"shift_ratio", phi->shift_ratio}};
         Json factors = Json::array();
         for (int i = 1; i <= p.levels(); ++i) factors.push_back(num(comparison_factor(p, i)));
         r.details["comparison_factors"] = factors;
         const auto bad = phi_violation(*phi);
         pl.check("phi_invariants", bad.empty(), bad.empty() ? "all hold" : bad);
         double unit = 0;
         for (int i = 0; i <= p.levels(); ++i) unit = std::max(unit, std::abs(coeff_F(i, Variant::mu, 0, p, *phi) - 1));
         pl.check("unit_mass", unit <= 1e-12, "max |F_i^(0) - 1| = " + fmt(unit));
       }},
      {"positivity",
       [&] {
         Json arr = Json::array();
         for (int n = 1; n <= params->levels(); ++n) {
           const auto pr = positivity_check(n, *params, *phi, c.kmax);
           arr.push_back({{"n", n},
                          {"K_out", pr.K_out},
                          {"min_value", pr.min_value},
                          {"witness_k", pr.witness_k},
                          {"error_bound", pr.error_bound},
                          {"method", pr.method},
                          {"pass", pr.pass}});
           pl.check("positivity_n" + std::to_string(n), pr.pass,
                    "min " + fmt(pr.min_value) + " at k = " + std::to_string(pr.witness_k) + " (" + pr.method + ")");
         }
         r.details["positivity"] = arr;
       }},
      {"stability",
       [&] {
         const auto psi = product_coeffs(0, Variant::mu, *params, *phi, 4096);
         Json arr = Json::array();
         for (int i = 1; i <= params->levels(); ++i) {
           const auto st = stability_check(psi, 2 * phi->sup, 8 * phi->sup_dd, i, *params, *phi, 2000);
           arr.push_back({{"level", i},
                          {"max_diff", st.max_diff},
                          {"witness_k", st.witness_k},
                          {"psi_norm", st.psi_norm},
                          {"implied_constant", st.implied_constant}});
         }
         r.details["stability"] = arr;
       }},
      {"frostman",
       [&] {
         Json arr = Json::array();
         for (int n = 1; n <= params->levels(); ++n) {
           const auto fr = frostman_nu(n, *params, *phi);
           arr.push_back({{"n", n},
                          {"radius", fr.radius},
                          {"sup_ball", fr.sup_ball},
                          {"bound", fr.bound},
                          {"constant", fr.constant},
                          {"sup_factor", fr.sup_factor},
                          {"factor_constant", fr.factor_constant},
                          {"min_separation", fr.min_separation},
                          {"separated", fr.separated},
                          {"pass", fr.pass}});
           pl.check("frostman_n" + std::to_string(n), fr.pass && fr.separated,
                    "constant " + fmt(fr.constant) + ", separated " + (fr.separated ? "yes" : "no"));
         }
         r.details["frostman"] = arr;
       }},
      {"comparison",
       [&] {
         Json arr = Json::array();
         for (int i = 1; i <= params->levels(); ++i) {
           const auto cr = comparison_checks(i, 1, *params, *phi, c.comparison_samples, c.seed.value_or(0));
           arr.push_back({{"level", i},
                          {"factor", num(cr.factor)},
                          {"grid_points", cr.grid_points},
                          {"max_ratio", cr.max_ratio},
                          {"witness_x", cr.witness_x},
                          {"exponent", cr.exponent},
                          {"C_only", cr.C_only},
                          {"C", cr.C},
                          {"C_eps", cr.C_eps}});
           pl.check("comparison_level" + std::to_string(i), cr.pass, "max ratio " + fmt(cr.max_ratio));
         }
         r.details["comparison"] = arr;
       }},
      {"divisor",
       [&] {
         Json arr = Json::array();
         for (int i = 1; i <= params->levels(); ++i) {
           const auto dr = divisor_check(i, *params, c.divisor_kmax);
           arr.push_back({{"level", i}, {"constant", dr.constant}, {"witness_k", dr.witness_k}});
         }
         r.details["divisor"] = arr;
       }},
      {"fourier",
       [&] {
         const int n = params->levels();
         auto p = decay_profile(n, Variant::mu, *params, *phi, pl.bands("kaufman", true));
         const double floor = s - c.tol.kaufman_decay_margin;
         pl.check("decay_surrogate", !p.degenerate && p.fitted_beta >= floor, decay_detail(p, floor));
         r.fourier.push_back(std::move(p));
       }},
  });
}

void run_arc(const ExperimentConfig& c, RunReport& r) {
  Pipeline pl(c, r);
  pl.run({
      {"gram",
       [&] {
         const auto g = arc::gram_onb(c.gram_k);
         r.digest = {{"gram_k", g.K}, {"max_offdiag", g.max_offdiag}};
         r.details["gram"] = {{"K", g.K}, {"max_offdiag", g.max_offdiag}, {"witness_m", g.witness_m}};
         pl.check("gram_identity", g.max_offdiag <= c.tol.gram, "max off-diagonal " + fmt(g.max_offdiag));
       }},
      {"decay",
       [&] {
         const auto sc = arc::decay_scan(c.rmax, c.samples, c.seed.value_or(0), c.directions, c.tol.arc_quadrature);
         r.details["decay"] = {{"sup_scaled", sc.sup_scaled},
                               {"sup_scaled_half", sc.sup_scaled_half},
                               {"relative_change", sc.relative_change},
                               {"witness", {sc.witness_xi1, sc.witness_xi2}},
                               {"direction_angles", sc.direction_angles},
                               {"direction_sup", sc.direction_sup},
                               {"samples", sc.samples},
                               {"seed", sc.seed}};
         pl.check("sup_stabilized", sc.relative_change < c.tol.stabilization,
                  "relative change " + fmt(sc.relative_change) + " between R/2 and R");
         auto p = sc.profile;
         p.source = "arc";
         const double floor = c.s_value() - c.tol.decay_margin;
         pl.check("decay_surrogate", !p.degenerate && p.fitted_beta >= floor, decay_detail(p, floor));
         r.fourier.push_back(std::move(p));
       }},
  });
}

// R_m = nu(B) / int_B psi dnu over punctured balls B = B(x0, 2^-m) \ {x0}:
// the Radon-Nikodym ratio between the translated copy and the tapered part.
// Repeated values (no atom left the ball) are dropped.
std::vector<double> derivative_ratios(const AtomicMeasure& nu, double x0, int J) {
  std::vector<double> out;
  for (int m = 1; m <= J; ++m) {
    const double rad = std::ldexp(1.0, -m);
    double mass = 0, tapered = 0;
    for (std::size_t i = 0; i < nu.size(); ++i) {
      const double x = nu.positions()[i];
      if (x == x0 || std::abs(x - x0) > rad) continue;
      mass += nu.weights()[i];
      tapered += one_line_taper(x, x0) * nu.weights()[i];
    }
    if (!(tapered > 0)) break;
    const double ratio = mass / tapered;
    if (out.empty() || ratio != out.back()) out.push_back(ratio);
  }
  return out;
}

void run_one_line(const ExperimentConfig& c, RunReport& r) {
  Pipeline pl(c, r);
  const double s = c.s_value();
  const int J = c.levels_value();
  auto nu = std::make_shared<AtomicMeasure>();
  auto x0 = std::make_shared<double>(0.0);
  auto res = std::make_shared<OneLineResult>();
  pl.run({
      {"construction",
       [&] {
         const auto tr = cantor::build(s, J, Stream(*c.seed).split("cantor"),
                                       c.retry_cap.value_or(cantor::kDefaultRetryCap));
         const auto& st = tr.back();
         // Cell masses spread over 8 Gauss-Legendre nodes per cell, so the
         // transform follows the step density up to |xi| ~ 2^J; midpoint atoms
         // alone would be 2^J periodic in frequency.
         const double h = std::ldexp(1.0, -J);
         const auto& gx = boost::math::quadrature::gauss<double, 8>::abscissa();
         const auto& gw = boost::math::quadrature::gauss<double, 8>::weights();
         std::vector<double> x, w;
         for (std::size_t i = 0; i < st.nodes.size(); ++i) {
           const double mid = (static_cast<double>(st.nodes[i]) + 0.5) * h;
           for (std::size_t g = 0; g < gx.size(); ++g) {
             for (double sign : {-1.0, 1.0}) {
               if (gx[g] == 0.0 && sign > 0) continue;
               x.push_back(mid + sign * gx[g] * h / 2);
               w.push_back(st.weights[i] * gw[g] / 2);
               // The node nearest the midpoint of the heavy cell carries the zero of the taper.
               if (i == st.heavy && g == 0 && sign < 0) *x0 = x.back();
             }
           }
         }
         *nu = AtomicMeasure(x, w, Interval{0.0, 1.0});
         *res = one_line_combine(*nu, *x0);
         r.digest = {{"levels", J},
                     {"nu_atoms", nu->size()},
                     {"atoms", res->measure.size()},
                     {"nu_checksum", checksum(*nu)},
                     {"checksum", checksum(res->measure)}};
         r.details["x0"] = *x0;
         r.details["taper_mass"] = res->taper_mass;
         const double err = std::abs(res->measure.mass() - (nu->mass() + res->taper_mass));
         pl.check("mass_identity", err <= c.tol.mass, "|mass - (nu mass + taper mass)| = " + fmt(err));
         pl.check("not_degenerate", !res->degenerate, "taper mass " + fmt(res->taper_mass));
         // On [0, 1] every atom must sit at an atom of nu.
         bool ac = true;
         for (double x : res->measure.positions())
           if (x >= 0 && !std::binary_search(nu->positions().begin(), nu->positions().end(), x)) ac = false;
         pl.check("absolutely_continuous", ac, "atoms on [0, 1] lie on atoms of nu");
       }},
      {"fourier",
       [&] {
         const auto& m = res->measure;
         auto p = band_envelope([&](double xi) { return fourier_atomic(m, xi); }, pl.bands("one_line"));
         const double floor = s - c.tol.decay_margin;
         pl.check("decay_surrogate", !p.degenerate && p.fitted_beta >= floor, decay_detail(p, floor));
         r.fourier.push_back(std::move(p));
       }},
      {"balls",
       [&] {
         std::vector<double> centers;
         for (double x : nu->positions()) centers.push_back(x - 1.0);
         r.balls.push_back(
             fit_ball_exponents(res->measure, centers, dyadic_radii(2, J - 2), Side::lower, "one_line"));
       }},
      {"criteria",
       [&] {
         auto u = criteria::uniformity_verdict(derivative_ratios(*nu, *x0, J), c.tol.uniformity_threshold);
         pl.check("uniformity_fires", u.verdict == criteria::Verdict::no_frame_indicated,
                  std::to_string(u.ratios.size()) + " distinct ratios, last " +
                      fmt(u.ratios.empty() ? 0.0 : u.ratios.back()));
         r.criteria.push_back(std::move(u));
       }},
  });
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RunReport r;
  r.versions = library_versions();
  r.config = config;
  switch (config.construction) {
    case Construction::convolution: run_convolution(config, r); break;
    case Construction::cantor: run_cantor(config, r); break;
    case Construction::brownian: run_brownian(config, r); break;
    case Construction::kaufman: run_kaufman(config, r); break;
    case Construction::arc: run_arc(config, r); break;
    case Construction::one_line: run_one_line(config, r); break;
  }
  if (config.timing)
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

Json run_criteria(const Json& input) {
  Json out = Json::object();
  out["schema"] = "salemlab-criteria/1";
  Json reports = Json::array();
  bool any = false;
  if (input.contains("ball_profile") || input.contains("fourier_profile")) {
    const auto b = input.at("ball_profile").get<BallProfile>();
    const auto f = input.at("fourier_profile").get<FourierProfile>();
    reports.push_back(criteria::heavy_decay_verdict(b, f));
    any = true;
  }
  if (input.contains("ratios")) {
    const double threshold = input.value("threshold", 10.0);
    reports.push_back(criteria::uniformity_verdict(input["ratios"].get<std::vector<double>>(), threshold));
    any = true;
  }
  out["reports"] = reports;
  if (input.contains("measure") && input.contains("frequencies")) {
    const auto m = input["measure"].get<AtomicMeasure>();
    const auto fb = criteria::frame_bounds_estimate(m, input["frequencies"].get<std::vector<double>>());
    out["frame_bounds"] = {{"A_est", fb.A_est},
                           {"B_est", fb.B_est},
                           {"atoms", fb.atoms},
                           {"frequencies", fb.frequencies},
                           {"rank_deficient", fb.rank_deficient}};
    any = true;
  }
  if (!any)
    throw Error("criteria input needs ball_profile with fourier_profile, ratios, or measure with frequencies");
  return out;
}

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error("cannot open " + path + ": " + std::strerror(errno));
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  const int err = errno;
  if (std::fclose(f) != 0 || !ok) throw Error("cannot write " + path + ": " + std::strerror(ok ? errno : err));
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char ch : s) out += std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' ? ch : '_';
  return out.empty() ? "profile" : out;
}

}  // namespace

std::vector<std::string> emit_report(const RunReport& r, const std::string& path, bool csv) {
  std::vector<std::string> written;
  write_file(path, report_text(r));
  written.push_back(path);
  if (!csv) return written;
  const std::filesystem::path p(path);
  const std::string stem = (p.parent_path() / p.stem()).string();
  std::map<std::string, int> used;
  auto name = [&](const std::string& kind, const std::string& source) {
    std::string n = sanitize(source);
    if (const int k = used[kind + n]++; k > 0) n += "_" + std::to_string(k);
    return stem + "." + kind + "." + n + ".csv";
  };
  for (const auto& f : r.fourier) {
    std::ostringstream os;
    write_bands_csv(os, f);
    const auto out = name("bands", f.source);
    write_file(out, os.str());
    written.push_back(out);
  }
  for (const auto& b : r.balls) {
    std::ostringstream os;
    write_balls_csv(os, b);
    const auto out = name("balls", b.source);
    write_file(out, os.str());
    written.push_back(out);
  }
  return written;
}

}  // namespace salem::experiment
