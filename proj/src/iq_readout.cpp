#include "mcm/iq_readout.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

namespace mcm {

using nlohmann::json;

std::string latent_name(Latent l) {
  switch (l) {
    case Latent::Zero: return "0";
    case Latent::One: return "1";
    case Latent::Leaked: return "Leaked";
  }
  return "?";
}

namespace {

Latent latent_from(const std::string& s) {
  if (s == "0") return Latent::Zero;
  if (s == "1") return Latent::One;
  if (s == "Leaked") return Latent::Leaked;
  throw ValidationError("unknown classifier label '" + s + "'");
}

double dist2(const IqPoint& a, const IqPoint& b) {
  const double di = a.i - b.i, dq = a.q - b.q;
  return di * di + dq * dq;
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream),
                    std::uint32_t(stream >> 32), 0x1dU};
  return std::mt19937_64(seq);
}

}  // namespace

void IqConfig::validate() const {
  for (double s : sigma)
    if (!(s > 0)) throw ValidationError("IQ cloud widths must be positive");
  if (!(leak_prob >= 0 && leak_prob <= 1)) throw ValidationError("leak probability must lie in [0,1]");
  if (!(seepage >= 0 && seepage <= 1)) throw ValidationError("seepage must lie in [0,1]");
}

IqRecords simulate_iq(const GateSet& gs, const std::vector<Circuit>& circuits, long shots, const IqConfig& cfg,
                      std::uint64_t seed) {
  cfg.validate();
  if (shots <= 0) throw ValidationError("shots must be positive");
  IqRecords out;
  out.circuits = circuits;
  out.seed = seed;
  out.shots.resize(circuits.size());
  for (size_t c = 0; c < circuits.size(); ++c) {
    auto p = sanitize_probabilities(circuit_probability(gs, circuits[c]));
    const bool mcm = has_mcm(normalize_circuit(circuits[c]));
    auto rng = stream_rng(seed, c);
    std::discrete_distribution<int> outcome(p.begin(), p.end());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    auto emit = [&](Latent l) {
      const int k = static_cast<int>(l);
      return IqPoint{cfg.centroids[k].i + cfg.sigma[k] * g(rng), cfg.centroids[k].q + cfg.sigma[k] * g(rng)};
    };
    auto& vec = out.shots[c];
    vec.reserve(shots);
    for (long s = 0; s < shots; ++s) {
      const int o = outcome(rng);
      IqShot sh;
      if (mcm) {
        sh.mcm_latent = static_cast<Latent>(o / 2);
        sh.terminal_latent = static_cast<Latent>(o % 2);
        if (sh.mcm_latent == Latent::One && u(rng) < cfg.leak_prob) {
          sh.mcm_latent = Latent::Leaked;
          sh.terminal_latent = u(rng) < cfg.seepage ? Latent::One : Latent::Leaked;
        }
        sh.mcm = emit(sh.mcm_latent);
      } else {
        sh.terminal_latent = static_cast<Latent>(o);
      }
      sh.terminal = emit(sh.terminal_latent);
      vec.push_back(sh);
    }
  }
  return out;
}

KMeansResult kmeans(const std::vector<IqPoint>& pts, int k, std::uint64_t seed, int restarts) {
  if (k < 1) throw ValidationError("k must be positive");
  if (static_cast<long>(pts.size()) < 10L * k) throw ValidationError("k-means needs at least 10 points per cluster");
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  const size_t n = pts.size();
  std::vector<double> d2(n);
  for (int rs = 0; rs < restarts; ++rs) {
    // k-means++ seeding
    std::vector<IqPoint> cen;
    cen.push_back(pts[std::uniform_int_distribution<size_t>(0, n - 1)(rng)]);
    bool degenerate = false;
    while ((int)cen.size() < k) {
      double tot = 0;
      for (size_t i = 0; i < n; ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& c : cen) m = std::min(m, dist2(pts[i], c));
        d2[i] = m;
        tot += m;
      }
      if (!(tot > 0)) {
        degenerate = true;
        break;
      }
      std::discrete_distribution<size_t> pick(d2.begin(), d2.end());
      cen.push_back(pts[pick(rng)]);
    }
    if (degenerate) continue;

    std::vector<int> asg(n, -1);
    bool empty = false;
    for (int it = 0; it < 300; ++it) {
      bool changed = false;
      for (size_t i = 0; i < n; ++i) {
        int bj = 0;
        double bd = dist2(pts[i], cen[0]);
        for (int j = 1; j < k; ++j) {
          double d = dist2(pts[i], cen[j]);
          if (d < bd) {
            bd = d;
            bj = j;
          }
        }
        if (asg[i] != bj) {
          asg[i] = bj;
          changed = true;
        }
      }
      std::vector<IqPoint> sum(k);
      std::vector<long> cnt(k, 0);
      for (size_t i = 0; i < n; ++i) {
        sum[asg[i]].i += pts[i].i;
        sum[asg[i]].q += pts[i].q;
        ++cnt[asg[i]];
      }
      for (int j = 0; j < k; ++j) {
        if (cnt[j] == 0) {
          empty = true;
          break;
        }
        cen[j] = {sum[j].i / cnt[j], sum[j].q / cnt[j]};
      }
      if (empty || !changed) break;
    }
    if (empty) continue;
    double inertia = 0;
    for (size_t i = 0; i < n; ++i) inertia += dist2(pts[i], cen[asg[i]]);
    if (inertia < best.inertia) {
      best.centroids = cen;
      best.assignment = asg;
      best.inertia = inertia;
    }
  }
  if (best.centroids.empty()) throw std::runtime_error("k-means: every restart produced an empty or degenerate cluster");
  return best;
}

Latent Classifier::assign(const IqPoint& p) const {
  if (centroids.empty()) throw ValidationError("classifier is untrained");
  size_t bj = 0;
  double bd = dist2(p, centroids[0]);
  for (size_t j = 1; j < centroids.size(); ++j) {
    double d = dist2(p, centroids[j]);
    if (d < bd) {
      bd = d;
      bj = j;
    }
  }
  return labels[bj];
}

Classifier train_classifier(const std::vector<Calibration>& calib, int k, std::uint64_t seed, int restarts) {
  if (k != 2 && k != 3) throw ValidationError("classifier must have 2 or 3 outcomes");
  std::vector<IqPoint> pts;
  std::vector<int> prep;
  for (const auto& c : calib) {
    if (c.prepared == Latent::Leaked) throw ValidationError("calibration cannot prepare the leaked state");
    for (const auto& p : c.points) {
      pts.push_back(p);
      prep.push_back(static_cast<int>(c.prepared));
    }
  }
  KMeansResult km = kmeans(pts, k, seed, restarts);
  std::vector<std::array<long, 2>> votes(k, {0, 0});
  for (size_t i = 0; i < pts.size(); ++i) ++votes[km.assignment[i]][prep[i]];

  Classifier clf;
  clf.centroids = km.centroids;
  clf.labels.assign(k, Latent::Leaked);
  std::vector<bool> taken(k, false);
  for (int lab : {0, 1}) {
    int bj = -1;
    for (int j = 0; j < k; ++j)
      if (!taken[j] && (bj < 0 || votes[j][lab] > votes[bj][lab])) bj = j;
    if (votes[bj][lab] == 0) throw std::runtime_error("classifier: no cluster holds the |" + std::to_string(lab) + "> calibration points");
    taken[bj] = true;
    clf.labels[bj] = static_cast<Latent>(lab);
  }
  return clf;
}

Classifier train_from_records(const IqRecords& r, int k, std::uint64_t seed) {
  const Circuit c0 = {}, c0m = {kMcmLabel}, c1 = {"Gx", "Gx"}, c1m = {"Gx", "Gx", kMcmLabel};
  std::vector<Calibration> cal;
  for (size_t i = 0; i < r.circuits.size(); ++i) {
    Circuit c = normalize_circuit(r.circuits[i]);
    if (c == c0 || c == c1) {
      Calibration cb{{}, c == c0 ? Latent::Zero : Latent::One};
      for (const auto& s : r.shots[i]) cb.points.push_back(s.terminal);
      cal.push_back(std::move(cb));
    } else if (c == c0m || c == c1m) {
      Calibration cb{{}, c == c0m ? Latent::Zero : Latent::One};
      for (const auto& s : r.shots[i]) cb.points.push_back(s.mcm);
      cal.push_back(std::move(cb));
    }
  }
  if (cal.empty()) throw ValidationError("records contain no calibration circuits ({}, {Gx,Gx}, {Mz}, {Gx,Gx,Mz})");
  return train_classifier(cal, k, seed);
}

namespace {

int bit(Latent l) { return l == Latent::Zero ? 0 : 1; }

CircuitDataset classify_impl(const IqRecords& r, const Classifier& clf, bool drop_leaked, RemovalStats* st) {
  CircuitDataset d;
  d.circuits = r.circuits;
  d.seed = r.seed;
  d.shots_per_circuit = r.shots.empty() ? 0 : static_cast<long>(r.shots[0].size());
  if (st) *st = RemovalStats{};
  for (size_t i = 0; i < r.circuits.size(); ++i) {
    const bool mcm = has_mcm(normalize_circuit(r.circuits[i]));
    std::vector<long> counts(mcm ? 4 : 2, 0);
    long removed = 0;
    for (const auto& s : r.shots[i]) {
      Latent t = clf.assign(s.terminal);
      if (drop_leaked && t == Latent::Leaked) {
        ++removed;
        continue;
      }
      if (mcm)
        ++counts[2 * bit(clf.assign(s.mcm)) + bit(t)];
      else
        ++counts[bit(t)];
    }
    d.counts.push_back(counts);
    if (st) {
      const long tot = static_cast<long>(r.shots[i].size());
      st->removed.push_back(removed);
      st->total.push_back(tot);
      st->fraction.push_back(tot ? double(removed) / tot : 0.0);
      st->removed_total += removed;
      st->shots_total += tot;
    }
  }
  if (st) st->aggregate = st->shots_total ? double(st->removed_total) / st->shots_total : 0.0;
  return d;
}

}  // namespace

CircuitDataset classify_records(const IqRecords& r, const Classifier& clf) {
  return classify_impl(r, clf, false, nullptr);
}

CircuitDataset postselect(const IqRecords& r, const Classifier& clf3, RemovalStats* stats) {
  if (clf3.k() != 3) throw ValidationError("post-selection needs a three-outcome classifier");
  return classify_impl(r, clf3, true, stats);
}

void write_iq_csv(std::ostream& os, const IqRecords& r) {
  os << "circuit_id,shot_index,stage,I,Q\n";
  os.precision(10);
  for (size_t c = 0; c < r.circuits.size(); ++c) {
    const bool mcm = has_mcm(normalize_circuit(r.circuits[c]));
    for (size_t s = 0; s < r.shots[c].size(); ++s) {
      const auto& sh = r.shots[c][s];
      if (mcm) os << c << "," << s << ",mcm," << sh.mcm.i << "," << sh.mcm.q << "\n";
      os << c << "," << s << ",terminal," << sh.terminal.i << "," << sh.terminal.q << "\n";
    }
  }
}

std::string classifier_to_json(const Classifier& c) {
  json j;
  j["centroids"] = json::array();
  j["labels"] = json::array();
  for (int k = 0; k < c.k(); ++k) {
    j["centroids"].push_back({c.centroids[k].i, c.centroids[k].q});
    j["labels"].push_back(latent_name(c.labels[k]));
  }
  return j.dump(1);
}

Classifier classifier_from_json(const std::string& text) {
  try {
    json j = json::parse(text);
    Classifier c;
    for (const auto& p : j.at("centroids")) c.centroids.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    for (const auto& l : j.at("labels")) c.labels.push_back(latent_from(l.get<std::string>()));
    if (c.centroids.size() != c.labels.size() || c.centroids.size() < 2)
      throw ValidationError("classifier needs matching centroids and labels");
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed classifier JSON: ") + e.what());
  }
}

}  // namespace mcm
