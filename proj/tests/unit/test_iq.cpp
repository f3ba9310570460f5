#include "doctest.h"

#include "mcm/iq_readout.hpp"
#include "mcm/models.hpp"

#include <random>
#include <sstream>

using namespace mcm;

namespace {

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::vector<IqPoint> cloud(IqPoint c, double s, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<IqPoint> out;
  for (int k = 0; k < n; ++k) out.push_back({c.i + s * g(rng), c.q + s * g(rng)});
  return out;
}

const std::vector<Circuit> kCal = {{}, {"Gx", "Gx"}, {"Mz"}, {"Gx", "Gx", "Mz"}};

}  // namespace

TEST_CASE("no leakage without a leak probability") {
  IqConfig cfg;
  IqRecords r = simulate_iq(ideal_gateset(), kCal, 2000, cfg, 1);
  for (const auto& v : r.shots)
    for (const auto& s : v) {
      CHECK(s.terminal_latent != Latent::Leaked);
      CHECK(s.mcm_latent != Latent::Leaked);
    }
  CHECK(r.shots[1][0].terminal_latent == Latent::One);
  cfg.sigma[0] = 0;
  CHECK_THROWS_AS(simulate_iq(ideal_gateset(), kCal, 10, cfg, 1), ValidationError);
}

TEST_CASE("assignment error versus separation") {
  const long n = 100000;
  // 10 sigma separation: the tail bound Phi(-5) is below 1e-6.
  {
    IqConfig cfg;
    cfg.centroids = {{{0, 0}, {5, 0}, {2.5, 20}}};
    IqRecords r = simulate_iq(ideal_gateset(), {{}, {"Gx", "Gx"}}, n, cfg, 2);
    Classifier clf{{{0, 0}, {5, 0}}, {Latent::Zero, Latent::One}};
    long wrong = 0;
    for (const auto& v : r.shots)
      for (const auto& s : v) wrong += clf.assign(s.terminal) != s.terminal_latent;
    CHECK(phi(-5.0) < 1e-6);
    CHECK(wrong == 0);
  }
  // 1 sigma separation: misassignment Phi(-1/2).
  {
    IqConfig cfg;
    cfg.centroids = {{{0, 0}, {0.5, 0}, {0, 20}}};
    IqRecords r = simulate_iq(ideal_gateset(), {{}, {"Gx", "Gx"}}, n, cfg, 3);
    Classifier clf{{{0, 0}, {0.5, 0}}, {Latent::Zero, Latent::One}};
    for (const auto& v : r.shots) {
      long wrong = 0;
      for (const auto& s : v) wrong += clf.assign(s.terminal) != s.terminal_latent;
      const double p = phi(-0.5);
      CHECK(std::abs(double(wrong) / n - p) < 4 * std::sqrt(p * (1 - p) / n));
    }
  }
}

TEST_CASE("k-means") {
  std::mt19937_64 rng(4);
  auto a = cloud({-1, 0}, 0.1, 500, rng), b = cloud({1, 0}, 0.1, 500, rng);
  std::vector<IqPoint> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  KMeansResult k = kmeans(pts, 2, 1);
  REQUIRE(k.centroids.size() == 2);
  for (IqPoint want : {IqPoint{-1, 0}, IqPoint{1, 0}}) {
    double best = 1e9;
    for (const auto& c : k.centroids) best = std::min(best, std::hypot(c.i - want.i, c.q - want.q));
    CHECK(best < 0.02);
  }
  // Same seed, same answer.
  CHECK(kmeans(pts, 2, 1).assignment == k.assignment);

  std::vector<IqPoint> same(100, IqPoint{0.3, 0.3});
  CHECK_THROWS(kmeans(same, 2, 1));
  CHECK_THROWS_AS(kmeans(std::vector<IqPoint>(5), 2, 1), ValidationError);
}

TEST_CASE("three-outcome classifier names the leaked cluster") {
  std::mt19937_64 rng(5);
  std::vector<Calibration> cal{{cloud({-1, 0}, 0.1, 1000, rng), Latent::Zero}, {cloud({1, 0}, 0.1, 900, rng), Latent::One}};
  auto third = cloud({0, 0}, 0.1, 100, rng);
  cal[1].points.insert(cal[1].points.end(), third.begin(), third.end());
  Classifier clf = train_classifier(cal, 3, 1);
  REQUIRE(clf.k() == 3);
  CHECK(clf.assign({0, 0}) == Latent::Leaked);
  CHECK(clf.assign({-1, 0}) == Latent::Zero);
  CHECK(clf.assign({1, 0}) == Latent::One);
  Classifier back = classifier_from_json(classifier_to_json(clf));
  CHECK(back.labels == clf.labels);
  CHECK(back.centroids[2].i == doctest::Approx(clf.centroids[2].i));
}

TEST_CASE("post-selection") {
  const long n = 20000;
  std::vector<Circuit> circuits = kCal;
  circuits.push_back({"Gx", "Mz", "Gx"});

  IqConfig cfg;
  cfg.leak_prob = 0.05;
  IqRecords r = simulate_iq(ideal_gateset(), circuits, n, cfg, 7);
  Classifier clf = train_from_records(r, 3, 1);
  CHECK(clf.k() == 3);
  RemovalStats st;
  CircuitDataset kept = postselect(r, clf, &st);
  CircuitDataset raw = classify_records(r, clf);

  long leaked_terminal = 0;
  for (size_t i = 0; i < r.shots.size(); ++i) {
    long removed = 0;
    for (const auto& s : r.shots[i]) removed += clf.assign(s.terminal) == Latent::Leaked;
    CHECK(st.removed[i] == removed);
    leaked_terminal += removed;
    for (size_t o = 0; o < raw.counts[i].size(); ++o) CHECK(kept.counts[i][o] <= raw.counts[i][o]);
  }
  CHECK(st.removed_total == leaked_terminal);

  // {Gx, Gx, Mz} keeps |1> through the MCM.
  const double p = 0.05;
  CHECK(std::abs(st.fraction[3] - p) < 4 * std::sqrt(p * (1 - p) / n));
  CHECK(st.removed[0] == 0);

  // Terminal post-selection removes the MCM leakage cluster.
  auto mcm_leaked = [&](bool only_kept) {
    long m = 0;
    for (const auto& v : r.shots)
      for (const auto& s : v)
        if (clf.assign(s.mcm) == Latent::Leaked && (!only_kept || clf.assign(s.terminal) != Latent::Leaked)) ++m;
    return m;
  };
  long before = mcm_leaked(false), after = mcm_leaked(true);
  CHECK(before > 100);
  CHECK(after <= 0.1 * before);

  // Without leakage only false positives are removed: a computational cloud
  // point lands nearer the leaked centroid, Phi(-d/2sigma) for the nearest pair.
  {
    IqConfig clean = cfg;
    clean.leak_prob = 0.0;
    IqRecords z = simulate_iq(ideal_gateset(), circuits, n, clean, 8);
    RemovalStats zs;
    postselect(z, clf, &zs);
    const double d0 = std::hypot(cfg.centroids[2].i - cfg.centroids[0].i, cfg.centroids[2].q - cfg.centroids[0].q);
    const double fp = phi(-d0 / (2 * cfg.sigma[0]));
    CHECK(fp < 1e-6);
    CHECK(zs.aggregate <= fp + 4 * std::sqrt(fp / zs.shots_total) + 1.0 / zs.shots_total);
  }

  std::ostringstream os;
  write_iq_csv(os, r);
  CHECK(os.str().rfind("circuit_id,shot_index,stage,I,Q\n", 0) == 0);
}
