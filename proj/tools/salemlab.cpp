// salemlab: runs one desk-scale experiment per process and writes its report.
// Exit codes: 0 all checks pass, 2 a check failed (report still written),
// 1 usage or internal error.

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "salem/experiment.hpp"
#include "salem/parallel.hpp"

namespace ex = salem::experiment;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw salem::Error("cannot read " + path + ": " + std::strerror(errno));
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Numbers separated by whitespace or commas.
std::string read_list(const std::string& path) {
  std::string text = read_file(path);
  for (char& ch : text)
    if (ch == '\n' || ch == '\t' || ch == '\r' || ch == ' ') ch = ',';
  std::string out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out += (out.empty() ? "" : ",") + item;
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw salem::Error("cannot open " + path + ": " + std::strerror(errno));
  f << text;
  if (!f) throw salem::Error("cannot write " + path + ": " + std::strerror(errno));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fourier decay and frame criteria for Salem measure constructions"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::uint64_t seed = 0;
  std::string out, config_path;
  std::vector<std::string> sets;
  unsigned threads = 1;
  bool csv = false, timing = false;
  auto* seed_opt = app.add_option("--seed", seed, "64-bit master seed");
  auto* out_opt = app.add_option("--out", out, "report path (JSON); stdout when absent");
  app.add_option("--config", config_path, "config file, or a report to replay");
  app.add_option("--set", sets, "override one config key, as section.key=value")->take_all();
  app.add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 256u));
  auto* csv_opt = app.add_flag("--csv", csv, "also write band and ball tables");
  auto* timing_opt = app.add_flag("--timing", timing, "record wall time in the report");

  // Subcommand flags map onto config keys.
  std::vector<std::pair<CLI::Option*, std::string>> keyed;
  std::map<std::string, std::string> values;
  auto key_opt = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    keyed.emplace_back(sub->add_option(flag, values[flag + "@" + sub->get_name()], help), key);
  };

  auto* conv = app.add_subcommand("convolution", "random Cantor convolution");
  key_opt(conv, "--s", "experiment.s", "dimension s in (0, 1)");
  key_opt(conv, "--levels", "experiment.levels", "number of levels K");
  key_opt(conv, "--retry-cap", "experiment.retry_cap", "point rejection cap");
  std::string t_file;
  conv->add_option("--t-vector", t_file, "file of t_k values, one per level")->check(CLI::ExistingFile);

  auto* cant = app.add_subcommand("cantor", "random dyadic Cantor measure");
  key_opt(cant, "--s", "experiment.s", "dimension s in (0, 1]");
  key_opt(cant, "--levels", "experiment.levels", "depth J");
  key_opt(cant, "--retry-cap", "experiment.retry_cap", "rejection sampler cap");

  auto* brown = app.add_subcommand("brownian", "Brownian image of the dyadic base measure");
  key_opt(brown, "--s", "experiment.s", "dimension s in (0, 1/2]");
  key_opt(brown, "--levels", "experiment.levels", "depth J");
  key_opt(brown, "--paths", "brownian.paths", "Monte Carlo paths");
  key_opt(brown, "--xi-max", "brownian.xi_max", "largest frequency");

  auto* kauf = app.add_subcommand("kaufman", "Kaufman-type measures from prime periodizations");
  key_opt(kauf, "--s", "experiment.s", "dimension s in (0, 1]");
  key_opt(kauf, "--cs", "kaufman.cs", "the constant in h(i) = C_s ln q_i; calibrated when absent");
  key_opt(kauf, "--kmax", "kaufman.kmax", "positivity range |k| <= kmax");
  double q1 = 0, q2 = 0;
  int kauf_levels = 0;
  auto* q1_opt = kauf->add_option("--q1", q1, "first scale");
  auto* q2_opt = kauf->add_option("--q2", q2, "second scale");
  auto* kl_opt = kauf->add_option("--levels", kauf_levels, "use the first 1 or 2 scales")->check(CLI::Range(1, 2));

  auto* arc = app.add_subcommand("arc", "weighted arc of the unit circle");
  key_opt(arc, "--rmax", "arc.rmax", "largest |xi| scanned");
  key_opt(arc, "--samples", "arc.samples", "radii per direction");
  key_opt(arc, "--gram-k", "arc.gram_k", "Gram matrix half-size K");

  auto* line = app.add_subcommand("oneline", "translated copy plus tapered copy of a Cantor measure");
  key_opt(line, "--s", "experiment.s", "dimension s in (0, 1]");
  key_opt(line, "--levels", "experiment.levels", "depth J");

  auto* crit = app.add_subcommand("criteria", "criterion reports for a serialized measure and profiles");
  std::string crit_input;
  crit->add_option("input", crit_input, "JSON input")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (crit->parsed()) {
      const auto result = ex::run_criteria(salem::Json::parse(read_file(crit_input)));
      write_text(out, result.dump(1) + "\n");
      return 0;
    }

    ex::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = ex::load_config(config_path);
    const std::vector<std::pair<CLI::App*, ex::Construction>> subs{
        {conv, ex::Construction::convolution}, {cant, ex::Construction::cantor},
        {brown, ex::Construction::brownian},   {kauf, ex::Construction::kaufman},
        {arc, ex::Construction::arc},          {line, ex::Construction::one_line}};
    bool chosen = false;
    for (const auto& [sub, c] : subs) {
      if (!sub->parsed()) continue;
      if (!config_path.empty() && cfg.construction != c)
        throw salem::Error("the config describes " + ex::construction_name(cfg.construction) +
                           ", not " + ex::construction_name(c));
      cfg.construction = c;
      chosen = true;
    }
    if (!chosen && config_path.empty()) {
      std::cerr << app.help();
      return 1;
    }

    for (const auto& [opt, key] : keyed) {
      if (opt->count() == 0) continue;
      ex::set_config_value(cfg, key, opt->as<std::string>());
    }
    if (!t_file.empty()) ex::set_config_value(cfg, "convolution.t_vector", read_list(t_file));
    if (q1_opt->count()) cfg.q.at(0) = q1;
    if (q2_opt->count()) {
      if (cfg.q.size() < 2) cfg.q.resize(2);
      cfg.q[1] = q2;
    }
    if (kl_opt->count()) cfg.q.resize(static_cast<std::size_t>(kauf_levels));
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw salem::Error("--set expects section.key=value, got '" + s + "'");
      ex::set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed_opt->count()) cfg.seed = seed;
    if (out_opt->count()) cfg.output = out;
    if (csv_opt->count()) cfg.csv = csv;
    if (timing_opt->count()) cfg.timing = timing;
    cfg.validate();

    salem::set_threads(threads);
    const auto report = ex::run_experiment(cfg);
    if (cfg.output.empty() || cfg.output == "-") {
      std::cout << ex::report_text(report);
    } else {
      ex::emit_report(report, cfg.output, cfg.csv);
    }
    for (const auto& ch : report.checks)
      std::cerr << (ch.pass ? "pass " : "FAIL ") << ch.name << ": " << ch.detail << "\n";
    if (report.failure) {
      std::cerr << "failure in stage " << report.failure->stage << ": " << report.failure->message << "\n";
      return 2;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "salemlab: " << e.what() << "\n";
    return 1;
  }
}
