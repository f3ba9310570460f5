#pragma once

#include "mcm/experiments.hpp"
#include "mcm/fomgi.hpp"
#include "mcm/models.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mcm {

constexpr double kProbabilityFloor = 1e-12;

double loglikelihood(const GateSet& gs, const CircuitDataset& d);
// Sum n log f with 0 log 0 = 0.
double saturated_logl(const CircuitDataset& d);
// Sum over circuits of (outcomes - 1).
int k_sat(const CircuitDataset& d);

// (2 dlogL - k) / sqrt(2k)
double n_sigma(double two_delta_logl, int k);
// Per-parameter log-likelihood gain of the larger model A over the reduced
// model B: (2dlogL_B - 2dlogL_A) / (k_A - k_B). AIC prefers B when < 2.
double evidence_ratio(double two_delta_a, int k_a, double two_delta_b, int k_b);

struct FitOptions {
  int starts = 5;
  double perturbation = 0.01;
  int max_iterations = 500;
  // L-BFGS iterations on the deviance after Levenberg-Marquardt.
  int polish_iterations = 3000;
  std::uint64_t seed = 0;
  double init_regularization = 1e-4;
  // Second start (if any) from the same seed with a nearly rank-deficient
  // Choi factor instead of a perturbation.
  bool boundary_start = true;
  // Start from this gate set instead of the ideal one.
  std::optional<GateSet> init;
  std::optional<Vec> init_params;
};

struct FitReport {
  ModelSpec spec;
  GateSet gateset;
  Vec params;
  double logl = 0.0;
  double two_delta_logl = 0.0;
  int k_model = 0;
  int k_sat = 0;
  double n_sigma = 0.0;
  std::map<std::string, double> gamma;  // vs reference model tags
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;

  std::string tag() const { return spec.tag(); }
};

FitReport fit(const CircuitDataset& d, const ModelSpec& spec, const FitOptions& opt = {});
double evidence_ratio(const FitReport& larger, const FitReport& reduced);

// The MCM is down-weighted so the gauge is fixed by gates and SPAM; with
// equal weights the alignment absorbs part of the MCM error into the gauge.
struct GaugeWeights {
  double spam = 1.0;
  double gates = 1.0;
  double mcm = 0.01;
};
struct GaugeResult {
  GateSet gateset;
  Mat4 M = Mat4::Identity();
  double distance = 0.0;  // weighted Frobenius distance after alignment
};
// Trace-preserving gauge (first row of M fixed to e0, 12 free entries)
// minimizing the weighted Frobenius distance to `target`.
GaugeResult gauge_align(const GateSet& fit, const GateSet& target, const GaugeWeights& w = {});
double gateset_distance(const GateSet& a, const GateSet& b, const GaugeWeights& w = {});

// FOMGI strengths of the MCM relative to the target instrument.
StrengthReport decompose(const GateSet& aligned, const GateSet& target);

struct BootstrapResult {
  std::vector<Vec> strengths;
  std::vector<std::map<std::string, double>> composites;
  Vec sigma;
  std::map<std::string, double> composite_sigma;
  int failures = 0;
};
// Parametric bootstrap: resample from the fitted gate set, refit (single
// start from the fit), gauge-align to `target` and re-extract.
BootstrapResult bootstrap(const FitReport& fit, const CircuitDataset& d, const GateSet& target, int n,
                          std::uint64_t seed, int jobs = 1);
void attach_sigma(StrengthReport& r, const BootstrapResult& b);

// Fill every report's gamma entry against `reference` (if present).
void compare_models(std::vector<FitReport>& fits, const std::string& reference);
void write_comparison_csv(std::ostream& os, const std::vector<FitReport>& fits, const std::string& reference);

std::string gateset_to_json(const GateSet& gs, int indent = -1);
GateSet gateset_from_json(const std::string& text);
std::string fit_report_json(const FitReport& r, const StrengthReport* strengths = nullptr);

}  // namespace mcm
