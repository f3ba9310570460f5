#pragma once

#include "mcm/pauli.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mcm {

enum class Sector { H, S, C, A };

char sector_char(Sector s);

// Elementary error generator index. C and A take an unordered pair that is
// stored canonically with p < q; A is antisymmetric under the swap, so
// canonicalize() reports the sign picked up.
struct EegIndex {
  Sector sector{Sector::H};
  PauliString p;
  std::optional<PauliString> q;

  int nqubits() const { return p.nqubits(); }
  // "H_ZY", "S_X", "C_IX_XZ", "A_X_Y"
  std::string label() const;
  static EegIndex parse(const std::string& label);
  void validate() const;
  // Orders (p,q) lexicographically; returns -1 if an A index was swapped.
  int canonicalize();

  bool operator==(const EegIndex& o) const { return label() == o.label(); }
};

EegIndex eeg_h(const std::string& p);
EegIndex eeg_s(const std::string& p);
EegIndex eeg_c(const std::string& p, const std::string& q);
EegIndex eeg_a(const std::string& p, const std::string& q);

// All d^2(d^2-1) generators: H block, S block, then C and A pairs in
// lexicographic (p,q) order. 12 for one qubit, 240 for two.
const std::vector<EegIndex>& all_eegs(int n);
int eeg_position(const EegIndex& idx);

// Operator-level actions (Pauli P, Q as matrices).
CMat apply_eeg(const EegIndex& idx, const CMat& rho);
// PTM-basis superoperator; first row is zero.
Mat eeg_matrix(const EegIndex& idx);

using RateMap = std::map<std::string, double>;

Mat generator_from_rates(const RateMap& rates, int n);
// Dual-frame projection; throws if the reconstruction residual exceeds tol.
RateMap project_onto_eegs(const Mat& L, double tol = 1e-10, double drop_below = 0.0);

Mat generator_to_process(const Mat& L);
// Principal logarithm. Throws ValidationError when E has a real eigenvalue
// on the closed negative half-line.
Mat process_to_generator(const Mat& E);

}  // namespace mcm
