#pragma once

#include "mcm/gadget.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mcm {

enum class FSector { S, A, R, Rt, W, Wt };

std::string sector_name(FSector s);

struct FomgiLabel {
  std::string name;  // canonical label, e.g. "s_read", "rt_x_meas", "w0"
  FSector sector;
  std::string rep;   // representative EEG label
};

// Canonical order: S(3) A(3) R(6) Rt(8) W(4) Wt(4).
const std::vector<FomgiLabel>& fomgi_labels();
int fomgi_index(const std::string& name);

// One matrix-unit term of a unit action: outcome c gets coef * rho_kl |i><j|.
struct ActionTerm {
  int c;
  double re, im;
  int k, l, i, j;
};
struct UnitAction {
  std::string name;
  std::vector<ActionTerm> terms;
};
// Reference unit actions for the 28 deviations, written out by hand.
const std::vector<UnitAction>& reference_unit_actions();
Deviation deviation_from_action(const UnitAction& a);

struct FomgiBasis {
  std::vector<Deviation> deviations;  // canonical order
  Mat F;                              // columns vec28(deviation_j)
  Mat F_inv;                          // rows are the duals
  Mat functionals;                    // 28 x 240 coefficients on two-qubit EEG rates
  double condition = 0.0;
};

// Builds the basis from the representative EEGs' Choi-unit base terms (plus
// the trace-preserving correction where the base term alone is not TP), then
// checks it against reference_unit_actions() and the EEG span. Throws
// std::logic_error on any mismatch.
FomgiBasis build_basis();
// Process-wide cached instance.
const FomgiBasis& basis();

Deviation deviation_from_strengths(const Vec& s);

struct StrengthReport {
  Vec strengths;  // canonical order
  std::map<std::string, double> composites;
  std::optional<Vec> sigma;
  std::map<std::string, double> composite_sigma;
  double tp_residual = 0.0;
  double recon_residual = 0.0;

  double operator[](const std::string& name) const;
};

std::map<std::string, double> composites_from(const Vec& s);
// Throws ValidationError when the aggregate TP violation exceeds tp_tol.
StrengthReport extract(const Deviation& dq, double tp_tol = 1e-8);

struct SectorSummary {
  std::map<FSector, std::vector<std::pair<std::string, double>>> sectors;
  std::map<FSector, double> norms;
  std::optional<FSector> dominant;
  std::map<std::string, double> composites;
};
SectorSummary classify(const StrengthReport& r, double threshold = 1e-12);

void write_report_csv(std::ostream& os, const StrengthReport& r);

}  // namespace mcm
