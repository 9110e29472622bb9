#include "dnc/dnc.h"

#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <new>
#include <string>

#include "errors.hpp"
#include "harness.hpp"
#include "stepsize.hpp"

struct dnc_experiment {
  dnc::ExperimentConfig config;
  std::vector<dnc::Summary> summaries;
};

namespace {

thread_local std::string g_last_error;

dnc_status set_error(dnc_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
dnc_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const dnc::Error& e) {
    return set_error(static_cast<dnc_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(DNC_ERR_NUMERICAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(DNC_ERR_INVALID_ARGUMENT, e.what());
  } catch (...) {
    return set_error(DNC_ERR_INVALID_ARGUMENT, "unknown error");
  }
}

std::ofstream open_in(const std::string& dir, const char* name) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) dnc::fail(dnc::ErrorCode::io, "cannot create output directory '" + dir + "'");
  std::ofstream f(std::filesystem::path(dir) / name);
  if (!f) dnc::fail(dnc::ErrorCode::io, "cannot write '" + dir + "/" + name + "'");
  return f;
}

}  // namespace

#define DNC_CHECK(cond, msg) \
  if (!(cond)) return set_error(DNC_ERR_INVALID_ARGUMENT, msg)

extern "C" {

const char* dnc_last_error(void) { return g_last_error.c_str(); }

const char* dnc_version(void) { return "1.0.0"; }

const char* dnc_status_name(dnc_status s) {
  switch (s) {
    case DNC_OK: return "ok";
    case DNC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DNC_ERR_CONFIG: return "config error";
    case DNC_ERR_DIVERGENCE: return "divergence";
    case DNC_ERR_NUMERICAL: return "numerical failure";
    case DNC_ERR_IO: return "i/o error";
  }
  return "unknown";
}

dnc_status dnc_experiment_load(const char* config_path, dnc_experiment** out) {
  DNC_CHECK(config_path && out, "dnc_experiment_load: null argument");
  *out = nullptr;
  return guarded([&] {
    auto e = std::make_unique<dnc_experiment>();
    e->config = dnc::load_experiment(config_path);
    *out = e.release();
    return DNC_OK;
  });
}

dnc_status dnc_experiment_preset(const char* name, dnc_experiment** out) {
  DNC_CHECK(name && out, "dnc_experiment_preset: null argument");
  *out = nullptr;
  return guarded([&] {
    auto e = std::make_unique<dnc_experiment>();
    e->config = dnc::preset(name);
    *out = e.release();
    return DNC_OK;
  });
}

void dnc_experiment_free(dnc_experiment* e) { delete e; }

dnc_status dnc_experiment_set_seed(dnc_experiment* e, uint64_t seed) {
  DNC_CHECK(e, "dnc_experiment_set_seed: null handle");
  return guarded([&] {
    dnc::apply_overrides(e->config, seed, std::nullopt, std::nullopt);
    return DNC_OK;
  });
}

dnc_status dnc_experiment_set_rounds(dnc_experiment* e, int rounds) {
  DNC_CHECK(e, "dnc_experiment_set_rounds: null handle");
  return guarded([&] {
    dnc::apply_overrides(e->config, std::nullopt, rounds, std::nullopt);
    return DNC_OK;
  });
}

dnc_status dnc_experiment_set_output(dnc_experiment* e, const char* dir) {
  DNC_CHECK(e && dir && *dir, "dnc_experiment_set_output: null handle or empty path");
  return guarded([&] {
    dnc::apply_overrides(e->config, std::nullopt, std::nullopt, std::string(dir));
    return DNC_OK;
  });
}

dnc_status dnc_experiment_output(const dnc_experiment* e, const char** dir) {
  DNC_CHECK(e && dir, "dnc_experiment_output: null argument");
  *dir = e->config.out.c_str();
  return DNC_OK;
}

dnc_status dnc_experiment_run(dnc_experiment* e) {
  DNC_CHECK(e, "dnc_experiment_run: null handle");
  return guarded([&] {
    const dnc::ExperimentResult r = dnc::run_experiment(e->config);
    e->summaries = r.summaries;
    if (r.any_diverged) {
      std::string which;
      for (const auto& s : r.summaries)
        if (s.diverged) which += (which.empty() ? "" : ", ") + s.label + " at round " + std::to_string(s.divergence_round);
      return set_error(DNC_ERR_DIVERGENCE, "divergence guard fired: " + which);
    }
    return DNC_OK;
  });
}

dnc_status dnc_experiment_run_count(const dnc_experiment* e, size_t* count) {
  DNC_CHECK(e && count, "dnc_experiment_run_count: null argument");
  *count = e->config.runs.size();
  return DNC_OK;
}

dnc_status dnc_experiment_run_label(const dnc_experiment* e, size_t index, const char** label) {
  DNC_CHECK(e && label, "dnc_experiment_run_label: null argument");
  DNC_CHECK(index < e->config.runs.size(), "dnc_experiment_run_label: index out of range");
  *label = e->config.runs[index].label.c_str();
  return DNC_OK;
}

dnc_status dnc_experiment_summary(const dnc_experiment* e, size_t index, dnc_run_summary* out) {
  DNC_CHECK(e && out, "dnc_experiment_summary: null argument");
  DNC_CHECK(index < e->summaries.size(), "dnc_experiment_summary: no summary at that index (run the experiment first)");
  const dnc::Summary& s = e->summaries[index];
  out->rounds = s.rounds;
  out->diverged = s.diverged ? 1 : 0;
  out->divergence_round = s.divergence_round;
  out->alpha = s.alpha;
  out->initial_max_err = s.initial_max_err;
  out->peak_max_err = s.peak_max_err;
  out->final_max_err = s.final_max_err;
  out->final_max_consensus = s.final_max_consensus;
  out->consensus_floor = s.consensus_floor;
  out->fitted_ratio = s.fitted_ratio;
  out->theoretical_rate = s.theoretical_rate;
  return DNC_OK;
}

dnc_status dnc_experiment_scan_alpha(dnc_experiment* e, double* alpha_opt, double* offline_alpha) {
  DNC_CHECK(e, "dnc_experiment_scan_alpha: null handle");
  return guarded([&] {
    const dnc::ScanResult r = dnc::scan_experiment(e->config);
    auto f = open_in(e->config.out, "scan_alpha.csv");
    dnc::write_scan_csv(r, f);
    if (alpha_opt) *alpha_opt = r.alpha_opt;
    if (offline_alpha) *offline_alpha = r.offline_alpha;
    return DNC_OK;
  });
}

dnc_status dnc_experiment_estimate_spectrum(dnc_experiment* e, double* lambda2_modulus, double* power_lambda2) {
  DNC_CHECK(e, "dnc_experiment_estimate_spectrum: null handle");
  return guarded([&] {
    const std::uint64_t seed = e->config.runs.empty() ? 0 : e->config.runs.front().objective.seed;
    const dnc::SpectrumReport r = dnc::estimate_spectrum(e->config, seed);
    auto f = open_in(e->config.out, "spectrum.csv");
    dnc::write_spectrum_csv(r, f);
    if (lambda2_modulus) *lambda2_modulus = r.lambda2_modulus;
    if (power_lambda2) *power_lambda2 = r.power_available ? r.power_lambda2 : std::numeric_limits<double>::quiet_NaN();
    return DNC_OK;
  });
}

dnc_status dnc_offline_alpha(double lambda2_re, double lambda2_im, double* alpha) {
  DNC_CHECK(alpha, "dnc_offline_alpha: null output");
  return guarded([&] {
    *alpha = dnc::offline_alpha({lambda2_re, lambda2_im});
    return DNC_OK;
  });
}

dnc_status dnc_adaptive_alpha(double lambda2_re, double lambda2_im, double s, double* alpha) {
  DNC_CHECK(alpha, "dnc_adaptive_alpha: null output");
  return guarded([&] {
    *alpha = dnc::adaptive_alpha({lambda2_re, lambda2_im}, s);
    return DNC_OK;
  });
}

dnc_status dnc_ring_lambda2(int nodes, double self_w, double off1, double off2, double* re, double* im,
                            double* modulus) {
  return guarded([&] {
    const dnc::SpectralParams sp = dnc::spectral_params(dnc::build_ring(nodes, self_w, off1, off2));
    if (re) *re = sp.lambda2.real();
    if (im) *im = sp.lambda2.imag();
    if (modulus) *modulus = sp.lambda2_modulus;
    return DNC_OK;
  });
}

}  // extern "C"
