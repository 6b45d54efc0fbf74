#pragma once
// Experiment configuration, the per-construction pipelines, and report emission.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "salem/criteria.hpp"
#include "salem/measure.hpp"
#include "salem/serialize.hpp"

namespace salem::experiment {

inline constexpr const char* kConfigSchema = "salemlab-config/1";
inline constexpr const char* kReportSchema = "salemlab-report/1";

enum class Construction { convolution, cantor, brownian, kaufman, arc, one_line };
std::string construction_name(Construction c);
Construction parse_construction(const std::string& name);
// Every construction except kaufman and arc draws random choices.
bool randomized(Construction c);

// Named tolerances with defaults; overrides must use these names.
struct Tolerances {
  double decay_margin = 0.2;           // beta_hat >= s - margin
  double kaufman_decay_margin = 0.25;  // the same for kaufman
  double slope_margin = 0.3;           // brownian slope within -2s +- margin
  double increment_C = 4.0;
  double increment_eps = 0.05;
  double ahlfors_eps = 1e-12;
  double uniformity_threshold = 10.0;
  double acceptance_rate = 0.4;  // cantor rejection sampler
  double stabilization = 0.02;   // arc sup across R_max / 2 and R_max
  double gram = 1e-10;
  double arc_quadrature = 1e-10;
  double mass = 1e-12;  // one_line total mass identity
  friend bool operator==(const Tolerances&, const Tolerances&) = default;
};

struct ExperimentConfig {
  Construction construction = Construction::convolution;
  // Defaults per construction when unset: 1/2, except kaufman and arc at 1.
  std::optional<double> s;
  std::optional<std::uint64_t> seed;
  // convolution K (6), cantor and one_line J (12), brownian J (30).
  std::optional<int> levels;
  int paths = 400;
  double xi_min = 16.0;
  double xi_max = 1024.0;
  std::optional<std::vector<double>> t_vector;
  std::optional<int> retry_cap;
  std::vector<double> q{1e4, 1e7};
  std::optional<double> cs;
  std::int64_t kmax = 4000;
  std::int64_t divisor_kmax = 100000;
  int comparison_samples = 500;
  double rmax = 1e4;
  int samples = 256;
  int directions = 16;
  int gram_k = 128;
  // Band envelope: [band_min, band_max]; band_max defaults per construction.
  int band_samples = 256;
  int band_min = 2;
  std::optional<int> band_max;
  int band_discard = 2;
  Tolerances tol;
  // Output settings. They are not echoed into reports, so a report does not
  // depend on where it is written.
  std::string output;
  bool csv = false;
  bool timing = false;

  double s_value() const;
  int levels_value() const;
  // Throws Error on an invalid combination; the message names the valid range.
  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Line-oriented "key = value" with [section] headers and '#' comments. The
// first assignment must be "schema = salemlab-config/1". Unknown keys throw.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// Canonical text form; parse_config(format_config(c)) == c.
std::string format_config(const ExperimentConfig& c);
// Sets one key by its full name ("section.key"), as in the text form.
void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value);

void to_json(Json& j, const ExperimentConfig& c);
void from_json(const Json& j, ExperimentConfig& c);

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
  friend bool operator==(const Check&, const Check&) = default;
};

struct Failure {
  std::string stage;
  std::string message;
  std::vector<std::string> failed_checks;
  friend bool operator==(const Failure&, const Failure&) = default;
};

struct RunReport {
  std::string schema = kReportSchema;
  std::vector<std::pair<std::string, std::string>> versions;
  std::optional<ExperimentConfig> config;
  Json digest = Json::object();
  std::vector<FourierProfile> fourier;
  std::vector<BallProfile> balls;
  std::vector<criteria::CriterionReport> criteria;
  std::vector<Check> checks;
  Json details = Json::object();
  std::optional<Failure> failure;
  std::optional<double> wall_seconds;

  bool passed() const { return !failure.has_value(); }
};

// Reports compare by their canonical JSON text.
bool operator==(const RunReport& a, const RunReport& b);

void to_json(Json& j, const RunReport& r);
void from_json(const Json& j, RunReport& r);

std::vector<std::pair<std::string, std::string>> library_versions();

// FNV-1a over the bit patterns of positions and weights, as 16 hex digits.
std::string checksum(const AtomicMeasure& m);

// Runs the construction, then the stages in a fixed order. A module error
// or a failed check leaves a partial report with the failure section set.
// Deterministic given the config, whatever the thread count.
RunReport run_experiment(const ExperimentConfig& config);

// Serialized measure and profiles in; criterion reports out. Recognized keys:
// "ball_profile" with "fourier_profile", "ratios" with "threshold", and
// "measure" with "frequencies".
Json run_criteria(const Json& input);

// Canonical JSON text of the report, 1-space indented, newline terminated.
std::string report_text(const RunReport& r);

// Writes <path> as JSON and, with csv, one band table and one ball table per
// profile next to it (<stem>.bands.<source>.csv, <stem>.balls.<source>.csv).
// Returns the written paths. IO errors are thrown with the system message.
std::vector<std::string> emit_report(const RunReport& r, const std::string& path, bool csv);

}  // namespace salem::experiment
