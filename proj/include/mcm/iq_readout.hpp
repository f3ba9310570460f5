#pragma once

#include "mcm/experiments.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mcm {

enum class Latent { Zero = 0, One = 1, Leaked = 2 };
std::string latent_name(Latent l);

struct IqPoint {
  double i = 0.0, q = 0.0;
};

// Gaussian cloud per latent state. Leakage happens during the MCM readout
// from |1> and is absorbing; `seepage` is the probability a leaked shot is
// back in |1> by the terminal measurement.
struct IqConfig {
  std::array<IqPoint, 3> centroids{{{0.0, 0.0}, {4.0, 0.0}, {1.0, 5.0}}};
  std::array<double, 3> sigma{0.5, 0.5, 0.5};
  double leak_prob = 0.0;
  double seepage = 0.0;

  void validate() const;
};

struct IqShot {
  IqPoint mcm, terminal;  // mcm unused for circuits without an MCM
  Latent mcm_latent = Latent::Zero, terminal_latent = Latent::Zero;
};

struct IqRecords {
  std::vector<Circuit> circuits;
  std::vector<std::vector<IqShot>> shots;
  std::uint64_t seed = 0;
};

// Joint outcomes drawn from the gate set, then dressed with leakage and IQ noise.
IqRecords simulate_iq(const GateSet& gs, const std::vector<Circuit>& circuits, long shots, const IqConfig& cfg,
                      std::uint64_t seed);

struct KMeansResult {
  std::vector<IqPoint> centroids;
  std::vector<int> assignment;
  double inertia = 0.0;
};
// Lloyd iterations from k-means++ seeds; best of `restarts`. Restarts that
// produce an empty cluster are discarded; throws if every restart fails.
KMeansResult kmeans(const std::vector<IqPoint>& pts, int k, std::uint64_t seed, int restarts = 50);

struct Classifier {
  std::vector<IqPoint> centroids;
  std::vector<Latent> labels;

  Latent assign(const IqPoint& p) const;
  int k() const { return static_cast<int>(centroids.size()); }
};

// Points with a known preparation, used to name the clusters.
struct Calibration {
  std::vector<IqPoint> points;
  Latent prepared;
};

// k-means on all calibration points; the cluster holding most |0>-prepared
// points is "0", the best remaining one for |1> is "1", the rest "Leaked".
Classifier train_classifier(const std::vector<Calibration>& calib, int k, std::uint64_t seed = 0,
                            int restarts = 50);
// Calibration from the records: {} and {Mz} prepare |0>, {Gx,Gx} and {Gx,Gx,Mz} prepare |1>.
Classifier train_from_records(const IqRecords& r, int k, std::uint64_t seed = 0);

// Counts obtained by classifying every measurement; Leaked results are
// reported as "1" (the state they leaked from) when they are kept.
CircuitDataset classify_records(const IqRecords& r, const Classifier& clf);

struct RemovalStats {
  std::vector<long> removed, total;
  std::vector<double> fraction;
  long removed_total = 0, shots_total = 0;
  double aggregate = 0.0;
};
// Drops shots whose terminal measurement is assigned "Leaked".
CircuitDataset postselect(const IqRecords& r, const Classifier& clf3, RemovalStats* stats = nullptr);

void write_iq_csv(std::ostream& os, const IqRecords& r);
std::string classifier_to_json(const Classifier& c);
Classifier classifier_from_json(const std::string& text);

}  // namespace mcm
