#pragma once

#include "mcm/gateset.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mcm {

struct CircuitDataset {
  std::vector<Circuit> circuits;
  // counts[i][o] for outcome o of outcome_labels(circuits[i])
  std::vector<std::vector<long>> counts;
  long shots_per_circuit = 0;
  std::uint64_t seed = 0;

  size_t size() const { return circuits.size(); }
  long total(size_t i) const;
  void validate() const;
};

const std::vector<Circuit>& fiducials();

struct CircuitDesign {
  std::vector<Circuit> circuits;
  int n_mcm = 0;
  int jacobian_rank = 0;
};

// Fiducial pairs around an empty germ (36), the same pairs around the MCM
// (36), and germ circuits for Gx, Gy, Gi at depths {1, 4} (56), deduplicated.
// Throws std::runtime_error if the design is not informationally complete.
CircuitDesign design_circuits();
// Rank of d(probabilities)/d(TP-tangent coordinates) at `gs`.
int design_rank(const GateSet& gs, const std::vector<Circuit>& circuits);
// Orthonormal-free basis of TP tangent directions in flat coordinates (93 x 71).
Mat tp_tangent_basis();

// Multinomial draws; circuit i uses its own stream seeded from (seed, i).
CircuitDataset sample_dataset(const GateSet& gs, const std::vector<Circuit>& circuits, long shots,
                              std::uint64_t seed);
std::vector<long> sample_counts(const std::vector<double>& p, long shots, std::uint64_t seed, std::uint64_t stream);

// Dataset JSON: {"shots": N, "seed": S, "circuits": [{"circuit": [...], "counts": {...}}]}
std::string dataset_to_json(const CircuitDataset& d);
CircuitDataset dataset_from_json(const std::string& text);
void write_dataset_csv(std::ostream& os, const CircuitDataset& d);

}  // namespace mcm
