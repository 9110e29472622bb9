#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dnewton.hpp"
#include "spectral.hpp"

namespace dnc {

// Flat "section.key" -> value map read from an INI-like file:
//   # comment
//   [section]
//   key = value
class Config {
 public:
  static Config parse(std::istream& in, const std::string& origin = "<config>");
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::string> keys() const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

struct TopologySpec {
  std::string kind = "ring";  // ring | file
  int nodes = 30;
  double self_w = 0.7;
  double off1 = 0.15;
  double off2 = 0.15;
  std::string path;
};

struct ObjectiveSpec {
  std::string kind = "localization";  // localization | quadratic
  Vec x_true = Vec::Zero(2);
  double noise_var = 0.01;
  double anchor_var = 100.0;
  std::uint64_t seed = 0;
  std::string path;  // quadratic set file
  double init_spread = 1.0;
};

struct RunSpec {
  std::string label;
  Variant variant = Variant::proposed;
  StepSizeMode step;
  // Step size taken from the eigenvalue scan of this run's instance.
  bool step_from_scan = false;
  ObjectiveSpec objective;
};

struct ExperimentConfig {
  std::string name = "experiment";
  TopologySpec topology;
  std::vector<RunSpec> runs;
  double beta = 0.1;
  int rounds = 5000;
  std::string out = "out";
  RunOptions options;
  double scan_alpha_max = 0.02;
  int scan_points = 200;
  int power_rounds = 1000;
  bool write_scan = false;
};

ExperimentConfig experiment_from_config(const Config& c);
ExperimentConfig load_experiment(const std::string& path);

std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

// Overrides from the command line. The seed replaces every run's instance seed.
void apply_overrides(ExperimentConfig& e, std::optional<std::uint64_t> seed, std::optional<int> rounds,
                     std::optional<std::string> out);

Topology build_topology(const TopologySpec& t);

struct Problem {
  ObjectiveSet objs;
  Vec x_star;
  std::vector<Vec> x_init;
  std::vector<Mat> hessians_at_star;
  Mat h_star;
  std::optional<LocalizationInstance> instance;
};
Problem build_problem(const ObjectiveSpec& spec, int nodes);

struct Summary {
  std::string label;
  std::string variant;
  std::string step_mode;
  int rounds = 0;
  double alpha = 0.0;  // mean step size over nodes in the last recorded round
  double initial_max_err = 0.0;
  double final_max_err = 0.0;
  double peak_max_err = 0.0;
  double final_max_consensus = 0.0;
  double consensus_floor = 0.0;
  double fitted_ratio = 0.0;
  bool diverged = false;
  int divergence_round = -1;
  double theoretical_rate = std::numeric_limits<double>::quiet_NaN();
};

// exp of the least-squares slope of log(series) over the last 20% of entries.
double fitted_ratio(const std::vector<double>& series);
Summary summarize_series(const std::vector<double>& max_err, const std::vector<double>& max_consensus,
                         int divergence_round);
Summary summarize(const Trace& t);
// Same record recomputed from a trace CSV file.
Summary summarize_csv(const std::string& path);

void write_trace_csv(const Trace& t, std::ostream& out);
void write_certificate_csv(const Trace& t, std::ostream& out);
void write_summary_csv(const std::vector<Summary>& rows, std::ostream& out);

struct ExperimentResult {
  std::vector<Summary> summaries;
  std::vector<Trace> traces;
  bool any_diverged = false;
};
ExperimentResult run_experiment(const ExperimentConfig& e);

struct ScanRow {
  double alpha;
  double radius;
  double root_up;
  double root_down;
};
struct ScanResult {
  std::vector<ScanRow> rows;
  double alpha_opt = 0.0;
  double rate_opt = 0.0;
  double offline_alpha = 0.0;
  double s_mid = 1.0;
};
ScanResult scan_alpha(const Topology& w, const Problem& p, double alpha_max, int points);
// Uses the first run's objective.
ScanResult scan_experiment(const ExperimentConfig& e);
void write_scan_csv(const ScanResult& r, std::ostream& out);

struct SpectrumReport {
  cplx lambda2;
  double lambda2_modulus = 0.0;
  double offline_alpha = 0.0;
  bool power_available = false;
  double power_lambda2 = 0.0;
  int power_rounds = 0;
  bool power_collapsed = false;
};
SpectrumReport estimate_spectrum(const ExperimentConfig& e, std::uint64_t seed);
void write_spectrum_csv(const SpectrumReport& r, std::ostream& out);

}  // namespace dnc
