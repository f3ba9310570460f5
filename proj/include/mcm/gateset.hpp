#pragma once

#include "mcm/pauli.hpp"

#include <map>
#include <string>
#include <vector>

namespace mcm {

inline const std::string kMcmLabel = "Mz";
inline const std::vector<std::string> kGateLabels = {"Gi", "Gx", "Gy"};

// Gates and SPAM in the normalized Pauli basis plus one mid-circuit
// measurement. When `stark` is set, every gate that follows the MCM in a
// circuit is followed by the `stark_op` error (a Z rotation by stark_phi
// before any gauge transformation).
struct GateSet {
  Vec4 rho = Vec4::Zero();
  std::array<Vec4, 2> povm{Vec4::Zero(), Vec4::Zero()};
  std::map<std::string, Mat4> gates;
  Instrument mcm;
  bool stark = false;
  double stark_phi = 0.0;
  Mat4 stark_op = Mat4::Identity();

  const Mat4& gate(const std::string& label) const;
};

// Target gate set: |0>, Z-basis POVM, pi/2 rotations Gx, Gy, idle Gi, ideal MCM.
GateSet ideal_gateset();
GateSet apply_stark(const GateSet& gs, double phi);
// Predicted residual-photon phase at amplitude ratio V/V0: n chi t_gate / 2 with n ~ (V/V0)^2.
double stark_phase_prediction(double v_ratio, double photons_at_v0 = 1.0, double chi_tgate = 0.05);

// G -> M G M^-1, rho -> M rho, E -> E M^-1, Q_c -> M Q_c M^-1.
GateSet gauge_transform(const GateSet& gs, const Mat4& M);

// Gate and MCM labels in time order; state preparation and the terminal
// Z measurement are implicit. A trailing "Mt" label is accepted and dropped.
using Circuit = std::vector<std::string>;

Circuit normalize_circuit(const Circuit& c);
void validate_circuit(const Circuit& c);
bool has_mcm(const Circuit& c);
int num_outcomes(const Circuit& c);
// "0","1" or "00","01","10","11" (MCM bit first).
std::vector<std::string> outcome_labels(const Circuit& c);
std::string circuit_str(const Circuit& c);

// Entry 2*i+j is p(MCM=i, terminal=j) for MCM circuits.
std::vector<double> circuit_probability(const GateSet& gs, const Circuit& c);
// Clip tiny negatives and renormalize; larger violations throw ValidationError.
std::vector<double> sanitize_probabilities(const std::vector<double>& p, double tol = 1e-9);

// Flat operation vector: rho(4) E0(4) E1(4) Gi(16) Gx(16) Gy(16) Q0(16) Q1(16) phi(1),
// matrices row-major.
constexpr int kFlatSize = 93;
namespace flat {
constexpr int rho = 0, e0 = 4, e1 = 8, gi = 12, gx = 28, gy = 44, q0 = 60, q1 = 76, phi = 92;
int gate_offset(const std::string& label);
}  // namespace flat

Vec flatten(const GateSet& gs);
// Rebuilds a gate set; `stark` selects whether phi is active.
GateSet unflatten(const Vec& m, bool stark);

// Probabilities and their gradient with respect to the flat vector
// (rows = outcomes, columns = kFlatSize).
void circuit_probability_grad(const Vec& m, bool stark, const Circuit& c, std::vector<double>& p, Mat& dp);

}  // namespace mcm
