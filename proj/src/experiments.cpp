#include "mcm/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>

namespace mcm {

using nlohmann::json;

long CircuitDataset::total(size_t i) const {
  long s = 0;
  for (long c : counts.at(i)) s += c;
  return s;
}

void CircuitDataset::validate() const {
  if (circuits.empty()) throw ValidationError("dataset has no circuits");
  if (counts.size() != circuits.size()) throw ValidationError("dataset counts/circuits length mismatch");
  for (size_t i = 0; i < circuits.size(); ++i) {
    validate_circuit(normalize_circuit(circuits[i]));
    if ((int)counts[i].size() != num_outcomes(normalize_circuit(circuits[i])))
      throw ValidationError("wrong number of outcomes for circuit " + circuit_str(circuits[i]));
    for (long c : counts[i])
      if (c < 0) throw ValidationError("negative count in circuit " + circuit_str(circuits[i]));
  }
}

const std::vector<Circuit>& fiducials() {
  static const std::vector<Circuit> f = {
      {}, {"Gx"}, {"Gy"}, {"Gx", "Gx"}, {"Gx", "Gx", "Gx"}, {"Gy", "Gy", "Gy"}};
  return f;
}

Mat tp_tangent_basis() {
  Mat T = Mat::Zero(kFlatSize, 71);
  int col = 0;
  for (int k = 1; k < 4; ++k) T(flat::rho + k, col++) = 1.0;
  for (int k = 0; k < 4; ++k, ++col) {
    T(flat::e0 + k, col) = 1.0;
    T(flat::e1 + k, col) = -1.0;
  }
  for (const auto& g : kGateLabels)
    for (int e = 4; e < 16; ++e) T(flat::gate_offset(g) + e, col++) = 1.0;
  for (int e = 0; e < 4; ++e, ++col) {
    T(flat::q0 + e, col) = 1.0;
    T(flat::q1 + e, col) = -1.0;
  }
  for (int e = 4; e < 16; ++e) T(flat::q0 + e, col++) = 1.0;
  for (int e = 4; e < 16; ++e) T(flat::q1 + e, col++) = 1.0;
  return T;
}

namespace {

Mat design_jacobian(const GateSet& gs, const std::vector<Circuit>& circuits) {
  Vec m = flatten(gs);
  Mat T = tp_tangent_basis();
  std::vector<Mat> rows;
  long nrow = 0;
  for (const auto& c : circuits) {
    std::vector<double> p;
    Mat dp;
    circuit_probability_grad(m, gs.stark, c, p, dp);
    rows.push_back(dp * T);
    nrow += dp.rows();
  }
  Mat J(nrow, T.cols());
  long r = 0;
  for (const auto& b : rows) {
    J.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  return J;
}

int numeric_rank(const Mat& J) {
  Eigen::JacobiSVD<Mat> svd(J);
  const Vec& s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s[i] > 1e-9 * s[0]) ++rank;
  return rank;
}

}  // namespace

int design_rank(const GateSet& gs, const std::vector<Circuit>& circuits) {
  return numeric_rank(design_jacobian(gs, circuits));
}

CircuitDesign design_circuits() {
  const auto& F = fiducials();
  CircuitDesign d;
  std::set<Circuit> seen;
  auto join = [](const Circuit& a, const Circuit& g, const Circuit& b) {
    Circuit c = a;
    c.insert(c.end(), g.begin(), g.end());
    c.insert(c.end(), b.begin(), b.end());
    return c;
  };
  for (const auto& p : F)
    for (const auto& m : F) {
      Circuit c = join(p, {}, m);
      d.circuits.push_back(c);
      seen.insert(c);
    }
  for (const auto& p : F)
    for (const auto& m : F) {
      d.circuits.push_back(join(p, {kMcmLabel}, m));
      ++d.n_mcm;
    }
  // Germ circuits: candidates are the fiducial pairs in a fixed stride order.
  // Within each slot, sequences that raise the Jacobian rank are taken
  // first, then the remaining quota is filled in order; duplicates skipped.
  struct Slot {
    std::string germ;
    int depth, quota;
  };
  const std::vector<Slot> slots = {{"Gx", 1, 9}, {"Gy", 1, 10}, {"Gi", 1, 10},
                                   {"Gx", 4, 9}, {"Gy", 4, 9},  {"Gi", 4, 9}};
  const GateSet ideal = ideal_gateset();
  Mat J = design_jacobian(ideal, d.circuits);
  int rank = numeric_rank(J);
  for (const auto& s : slots) {
    Circuit g(s.depth, s.germ);
    std::vector<Circuit> cand;
    for (int t = 0; t < 36; ++t) {
      int pair = (7 * t + 5) % 36;
      Circuit c = join(F[pair / 6], g, F[pair % 6]);
      if (!seen.count(c) && std::find(cand.begin(), cand.end(), c) == cand.end()) cand.push_back(c);
    }
    if ((int)cand.size() < s.quota) throw std::runtime_error("design: not enough distinct germ circuits for " + s.germ);
    std::vector<bool> used(cand.size(), false);
    int got = 0;
    for (size_t k = 0; k < cand.size() && got < s.quota && rank < 59; ++k) {
      Mat row = design_jacobian(ideal, {cand[k]});
      Mat J2(J.rows() + row.rows(), J.cols());
      J2 << J, row;
      int r2 = numeric_rank(J2);
      if (r2 > rank) {
        J = std::move(J2);
        rank = r2;
        used[k] = true;
        ++got;
      }
    }
    for (size_t k = 0; k < cand.size() && got < s.quota; ++k)
      if (!used[k]) {
        used[k] = true;
        ++got;
      }
    for (size_t k = 0; k < cand.size(); ++k)
      if (used[k]) {
        d.circuits.push_back(cand[k]);
        seen.insert(cand[k]);
      }
  }
  d.jacobian_rank = design_rank(ideal_gateset(), d.circuits);
  if (d.jacobian_rank != 59)
    throw std::runtime_error("design: prediction Jacobian has rank " + std::to_string(d.jacobian_rank) +
                             ", expected 59 (not informationally complete)");
  return d;
}

std::vector<long> sample_counts(const std::vector<double>& p, long shots, std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream),
                    std::uint32_t(stream >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<long> out(p.size(), 0);
  long left = shots;
  double mass = 1.0;
  for (size_t o = 0; o + 1 < p.size() && left > 0; ++o) {
    double q = mass > 0 ? std::clamp(p[o] / mass, 0.0, 1.0) : 0.0;
    std::binomial_distribution<long> bin(left, q);
    out[o] = bin(rng);
    left -= out[o];
    mass -= p[o];
  }
  out.back() += left;
  return out;
}

CircuitDataset sample_dataset(const GateSet& gs, const std::vector<Circuit>& circuits, long shots,
                              std::uint64_t seed) {
  if (shots <= 0) throw ValidationError("shots must be positive");
  if (circuits.empty()) throw ValidationError("no circuits to sample");
  CircuitDataset d;
  d.circuits = circuits;
  d.shots_per_circuit = shots;
  d.seed = seed;
  for (size_t i = 0; i < circuits.size(); ++i) {
    auto p = sanitize_probabilities(circuit_probability(gs, circuits[i]));
    d.counts.push_back(sample_counts(p, shots, seed, i));
  }
  return d;
}

std::string dataset_to_json(const CircuitDataset& d) {
  json j;
  j["shots"] = d.shots_per_circuit;
  j["seed"] = d.seed;
  j["circuits"] = json::array();
  for (size_t i = 0; i < d.size(); ++i) {
    json c;
    c["circuit"] = d.circuits[i];
    json counts = json::object();
    auto labels = outcome_labels(normalize_circuit(d.circuits[i]));
    for (size_t o = 0; o < labels.size(); ++o) counts[labels[o]] = d.counts[i][o];
    c["counts"] = counts;
    j["circuits"].push_back(c);
  }
  return j.dump(1);
}

CircuitDataset dataset_from_json(const std::string& text) {
  CircuitDataset d;
  try {
    json j = json::parse(text);
    d.shots_per_circuit = j.at("shots").get<long>();
    d.seed = j.value("seed", std::uint64_t{0});
    for (const auto& c : j.at("circuits")) {
      Circuit circ = c.at("circuit").get<Circuit>();
      auto labels = outcome_labels(normalize_circuit(circ));
      std::vector<long> counts(labels.size(), 0);
      for (const auto& [k, v] : c.at("counts").items()) {
        auto it = std::find(labels.begin(), labels.end(), k);
        if (it == labels.end()) throw ValidationError("unexpected outcome '" + k + "' in " + circuit_str(circ));
        counts[it - labels.begin()] = v.get<long>();
      }
      d.circuits.push_back(circ);
      d.counts.push_back(counts);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed dataset JSON: ") + e.what());
  }
  d.validate();
  return d;
}

void write_dataset_csv(std::ostream& os, const CircuitDataset& d) {
  os << "circuit_id,circuit,outcome,count\n";
  for (size_t i = 0; i < d.size(); ++i) {
    auto labels = outcome_labels(normalize_circuit(d.circuits[i]));
    for (size_t o = 0; o < labels.size(); ++o)
      os << i << "," << circuit_str(d.circuits[i]) << "," << labels[o] << "," << d.counts[i][o] << "\n";
  }
}

}  // namespace mcm
