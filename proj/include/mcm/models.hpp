#pragma once

#include "mcm/gateset.hpp"

#include <string>
#include <vector>

namespace mcm {

enum class McmKind { CPTP, USI, MPR, Ideal };

struct ModelSpec {
  McmKind mcm = McmKind::CPTP;
  bool stark = false;

  std::string tag() const;
  // Parameter count used for model-selection statistics (gauge-reduced
  // gate set + SPAM = 31, plus the MCM parameters, plus 1 for Stark).
  int nominal_params() const;
};

// "CPTP", "CPTP+Stark", "USI", "MPR", "MPR+Stark", "GatesOnly"
ModelSpec parse_model(const std::string& tag);
std::vector<ModelSpec> parse_model_list(const std::string& csv);

// Smooth, CP-by-construction map from raw parameters to a gate set. Channels
// use a Choi factor J = T T^dagger followed by a trace-preserving
// normalization (S^-1/2 (x) I) J (S^-1/2 (x) I), S = Tr_out J. The state is
// T T^dagger / Tr, and the POVM/instrument elements share one normalization.
class Parameterization {
 public:
  explicit Parameterization(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  int size() const { return size_; }

  // Flat gate-set vector (see gateset.hpp) and optionally its Jacobian.
  Vec flat(const Vec& x, Mat* jac = nullptr) const;
  GateSet instantiate(const Vec& x) const;
  // Parameters whose gate set approximates `gs` (Choi factors are
  // regularized by `reg` so every direction has a nonzero gradient).
  Vec from_gateset(const GateSet& gs, double reg = 1e-4) const;

  struct Block {
    std::string name;
    int offset, size;
  };
  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  ModelSpec spec_;
  int size_ = 0;
  std::vector<Block> blocks_;
};

// USI weights in the order (q00, q10, q01, q11): Q_c = sum q_ab |c^b>><<c^a|.
Instrument usi_instrument(const std::array<double, 4>& q);
// Q_c = A ((1-p)|c>><<c| + p|c^1>><<c^1|) B
Instrument mpr_instrument(const Mat4& A, const Mat4& B, double p);

struct TruthModelConfig {
  double t1_pre = 0.0;
  double t1_post = 0.0;
  double thermal_up = 0.0;
  double readout_flip = 0.0;
  double weakness_angle = 0.0;
  double post_z_angle = 0.0;
  double stark_phi = 0.0;
  double gate_depol = 0.0;
  double idle_damping = 0.0;
  // Full-rank dressing (keeps the truth strictly inside the CPTP set):
  // depolarizing mix of each MCM element and of the state/effects.
  double mcm_depol = 0.0;
  double spam_error = 0.0;

  void validate() const;
};

// MCM = post(damping t1_post, excitation thermal_up, Z rotation)
//       o core(crunch of exp(-i theta ZY/2), readout flip) o pre(damping t1_pre).
GateSet build_truth_model(const TruthModelConfig& cfg);

}  // namespace mcm
