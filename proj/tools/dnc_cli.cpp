// Command line front end. Talks to the library only through dnc/dnc.h.
#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dnc/dnc.h"

namespace {

int exit_code(dnc_status s) {
  switch (s) {
    case DNC_OK: return 0;
    case DNC_ERR_DIVERGENCE: return 3;
    case DNC_ERR_NUMERICAL: return 4;
    default: return 2;
  }
}

int report(dnc_status s) {
  if (s != DNC_OK) std::fprintf(stderr, "dnc: %s: %s\n", dnc_status_name(s), dnc_last_error());
  return exit_code(s);
}

using Handle = std::unique_ptr<dnc_experiment, decltype(&dnc_experiment_free)>;

struct Overrides {
  std::optional<uint64_t> seed;
  std::optional<int> rounds;
  std::optional<std::string> out;
};

dnc_status apply(dnc_experiment* e, const Overrides& o) {
  dnc_status s = DNC_OK;
  if (o.seed && (s = dnc_experiment_set_seed(e, *o.seed)) != DNC_OK) return s;
  if (o.rounds && (s = dnc_experiment_set_rounds(e, *o.rounds)) != DNC_OK) return s;
  if (o.out && (s = dnc_experiment_set_output(e, o.out->c_str())) != DNC_OK) return s;
  return s;
}

void print_summaries(const dnc_experiment* e) {
  size_t n = 0;
  dnc_experiment_run_count(e, &n);
  std::printf("%-16s %8s %12s %12s %12s %10s %s\n", "run", "rounds", "alpha", "final_err", "consensus", "ratio",
              "status");
  for (size_t i = 0; i < n; ++i) {
    const char* label = "";
    dnc_run_summary s{};
    dnc_experiment_run_label(e, i, &label);
    if (dnc_experiment_summary(e, i, &s) != DNC_OK) continue;
    char status[64];
    if (s.diverged)
      std::snprintf(status, sizeof status, "diverged at round %d", s.divergence_round);
    else
      std::snprintf(status, sizeof status, "ok");
    std::printf("%-16s %8d %12.5g %12.4g %12.4g %10.6f %s\n", label, s.rounds, s.alpha, s.final_max_err,
                s.final_max_consensus, s.fitted_ratio, status);
  }
  const char* dir = "";
  dnc_experiment_output(e, &dir);
  std::printf("output: %s\n", dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed Newton consensus simulator"};
  app.require_subcommand(1);
  Overrides ov;
  auto add_flags = [&](CLI::App* sub) {
    sub->add_option("--seed", ov.seed, "instance seed");
    sub->add_option("--rounds", ov.rounds, "number of rounds");
    sub->add_option("--out", ov.out, "output directory");
  };

  std::string config;
  auto* run = app.add_subcommand("run", "run the experiment described by a config file");
  run->add_option("config", config, "config file")->required();
  add_flags(run);
  auto* scan = app.add_subcommand("scan-alpha", "scan the deflated spectral radius over alpha");
  scan->add_option("config", config, "config file")->required();
  add_flags(scan);
  auto* spec = app.add_subcommand("estimate-spectrum", "report lambda2 directly and by the power method");
  spec->add_option("config", config, "config file")->required();
  add_flags(spec);
  std::string preset;
  auto* presets = app.add_subcommand("presets", "run a built-in experiment");
  presets->add_option("name", preset, "fig1, fig2 or fig3")->required()->check(CLI::IsMember({"fig1", "fig2", "fig3"}));
  add_flags(presets);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  dnc_experiment* raw = nullptr;
  dnc_status s = presets->parsed() ? dnc_experiment_preset(preset.c_str(), &raw) : dnc_experiment_load(config.c_str(), &raw);
  if (s != DNC_OK) return report(s);
  Handle e(raw, &dnc_experiment_free);
  if ((s = apply(e.get(), ov)) != DNC_OK) return report(s);

  if (run->parsed() || presets->parsed()) {
    s = dnc_experiment_run(e.get());
    if (s == DNC_OK || s == DNC_ERR_DIVERGENCE) print_summaries(e.get());
    // Divergence is one of the expected outcomes of the built-in experiments.
    if (presets->parsed() && s == DNC_ERR_DIVERGENCE) {
      std::printf("note: %s\n", dnc_last_error());
      return 0;
    }
    return report(s);
  }
  if (scan->parsed()) {
    double opt = 0, off = 0;
    s = dnc_experiment_scan_alpha(e.get(), &opt, &off);
    if (s == DNC_OK) std::printf("alpha_opt %.9g\noffline_alpha %.9g\n", opt, off);
    return report(s);
  }
  double mod = 0, pw = 0;
  s = dnc_experiment_estimate_spectrum(e.get(), &mod, &pw);
  if (s == DNC_OK) {
    std::printf("lambda2_modulus %.9g\n", mod);
    if (std::isnan(pw))
      std::printf("power_lambda2 unavailable (directed topology)\n");
    else
      std::printf("power_lambda2 %.9g\n", pw);
  }
  return report(s);
}
