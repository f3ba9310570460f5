#pragma once

#include "mcm/fomgi.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mcm {

// FOMGI quantities as integer combinations of two-qubit EEG rates, written
// in rate notation: h_{zy}, s_{xx}, c_{xxyy} (C_{XX,YY}), a_{ixzy} (A_{IX,ZY}).
// Hamiltonian rates use the opposite sign convention to eeg.hpp (H = -i[P, .]);
// parse_rate_combination converts.
const std::map<std::string, std::string>& fomgi_rate_combinations();
// Coefficient vector over all_eegs(2) in this library's conventions.
Vec parse_rate_combination(const std::string& expr);

// Model-comparison rows: (model, total parameters, 2 dlogL, N_sigma, gamma vs CPTP+Stark).
struct ComparisonRow {
  std::string model;
  int params;
  double two_delta_logl;
  double n_sigma;
  std::optional<double> gamma;
};
const std::vector<ComparisonRow>& reference_comparison();
constexpr int kReferenceSaturatedParams = 200;

struct CheckLine {
  std::string name;
  bool pass;
  std::string detail;
};
// Generated deviations vs unit actions, and functionals vs rate combinations.
std::vector<CheckLine> check_fomgi_tables();
// N_sigma and gamma recomputed from the comparison rows.
std::vector<CheckLine> check_comparison_statistics();

}  // namespace mcm
