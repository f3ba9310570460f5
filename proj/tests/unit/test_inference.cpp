#include "doctest.h"

#include "mcm/inference.hpp"
#include "mcm/reference.hpp"

#include <limits>
#include <random>
#include <sstream>

using namespace mcm;

namespace {

CircuitDataset single(const Circuit& c, std::vector<long> counts) {
  CircuitDataset d;
  d.circuits = {c};
  d.counts = {std::move(counts)};
  long n = 0;
  for (long k : d.counts[0]) n += k;
  d.shots_per_circuit = n;
  return d;
}

Mat4 small_gauge(std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, scale);
  Mat4 m = Mat4::Identity();
  for (int i = 1; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) += g(rng);
  return m;
}

GateSet interior_truth() {
  TruthModelConfig c;
  c.t1_pre = 0.02;
  c.t1_post = 0.01;
  c.readout_flip = 0.005;
  c.gate_depol = 0.005;
  c.mcm_depol = 0.005;
  c.spam_error = 0.01;
  return build_truth_model(c);
}

}  // namespace

TEST_CASE("saturated likelihood") {
  CHECK(saturated_logl(single({"Gx"}, {5, 5})) == doctest::Approx(10 * std::log(0.5)));
  CHECK(saturated_logl(single({"Gx"}, {0, 7})) == 0.0);
  CHECK(k_sat(single({"Mz"}, {1, 0, 0, 0})) == 3);
  CircuitDataset d = sample_dataset(ideal_gateset(), design_circuits().circuits, 10, 0);
  CHECK(k_sat(d) == 92 * 1 + 36 * 3);
}

TEST_CASE("model-selection statistics") {
  CHECK(n_sigma(166, 140) == doctest::Approx(1.55).epsilon(0.005));
  CHECK(n_sigma(313, 158) == doctest::Approx(8.72).epsilon(0.005));
  CHECK(n_sigma(15290, 166) == doctest::Approx(830).epsilon(0.002));
  CHECK_THROWS_AS(n_sigma(1, 0), ValidationError);

  CHECK(evidence_ratio(166, 60, 284, 59) == doctest::Approx(118));
  CHECK(evidence_ratio(166, 60, 192, 43) == doctest::Approx(1.53).epsilon(0.005));
  CHECK(evidence_ratio(166, 60, 15290, 34) == doctest::Approx(581.7).epsilon(0.001));
  CHECK_THROWS_AS(evidence_ratio(1, 60, 2, 60), ValidationError);

  for (const auto& line : check_comparison_statistics()) CHECK_MESSAGE(line.pass, (line.name + ": " + line.detail));
}

TEST_CASE("gauge alignment") {
  const GateSet truth = interior_truth();
  GaugeResult same = gauge_align(truth, truth);
  CHECK((same.M - Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(same.distance < 1e-8);

  const GateSet ideal = ideal_gateset();
  for (std::uint64_t s = 1; s <= 3; ++s) {
    Mat4 m0 = small_gauge(s, 0.05);
    GateSet planted = gauge_transform(ideal, m0);
    GaugeResult r = gauge_align(planted, ideal);
    CHECK(gateset_distance(r.gateset, ideal) <= 1e-6);
  }

  // Probabilities and likelihood are gauge invariant.
  GateSet stark = apply_stark(truth, 0.05);
  GateSet moved = gauge_transform(stark, small_gauge(9, 0.1));
  CircuitDataset d = sample_dataset(stark, design_circuits().circuits, 1000, 2);
  CHECK(std::abs(loglikelihood(moved, d) - loglikelihood(stark, d)) < 1e-8);
  GaugeResult back = gauge_align(moved, stark);
  CHECK(std::abs(loglikelihood(back.gateset, d) - loglikelihood(stark, d)) < 1e-8);
  for (const auto& c : d.circuits) {
    auto p = circuit_probability(moved, c), q = circuit_probability(back.gateset, c);
    for (size_t o = 0; o < p.size(); ++o) CHECK(std::abs(p[o] - q[o]) < 1e-8);
  }
  Mat4 singular = Mat4::Identity();
  singular(3, 3) = 0;
  CHECK_THROWS_AS(gauge_transform(ideal, singular), ValidationError);
}

TEST_CASE("likelihood gradient through the parameterization") {
  CircuitDataset d = sample_dataset(interior_truth(), design_circuits().circuits, 1000, 4);
  for (const char* tag : {"CPTP+Stark", "MPR"}) {
    Parameterization par(parse_model(tag));
    Vec x = par.from_gateset(ideal_gateset());
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0, 0.05);
    for (int k = 0; k < x.size(); ++k) x[k] += g(rng);
    Mat jac;
    Vec m = par.flat(x, &jac);
    // Analytic: sum n/p dp/dm, chained through the parameterization.
    Vec grad_m = Vec::Zero(kFlatSize);
    for (size_t i = 0; i < d.size(); ++i) {
      std::vector<double> p;
      Mat dp;
      circuit_probability_grad(m, par.spec().stark, d.circuits[i], p, dp);
      for (size_t o = 0; o < p.size(); ++o) grad_m += double(d.counts[i][o]) / p[o] * dp.row(o).transpose();
    }
    Vec grad = jac.transpose() * grad_m;
    const double h = 1e-6;
    // Central differences of a sum of ~1e5 magnitude lose about eps |logL| / h.
    const double roundoff = 4 * std::numeric_limits<double>::epsilon() * std::abs(loglikelihood(par.instantiate(x), d)) / h;
    double worst = 0;
    for (int k = 0; k < x.size(); ++k) {
      Vec xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      double fd = (loglikelihood(par.instantiate(xp), d) - loglikelihood(par.instantiate(xm), d)) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad[k]) / (1e-5 * std::max(1.0, std::abs(grad[k])) + roundoff));
    }
    CHECK_MESSAGE(worst <= 1.0, tag);
  }
}

TEST_CASE("fit on exact frequencies") {
  // Ideal circuits have probabilities in {0, 1/2, 1}; even shot counts make
  // the frequencies exact.
  CircuitDataset d;
  const GateSet ideal = ideal_gateset();
  for (const auto& c : design_circuits().circuits) {
    auto p = circuit_probability(ideal, c);
    std::vector<long> n;
    for (double v : p) n.push_back(std::lround(v * 1000));
    d.circuits.push_back(c);
    d.counts.push_back(n);
  }
  d.shots_per_circuit = 1000;
  CHECK(std::abs(loglikelihood(ideal, d) - saturated_logl(d)) < 1e-6);
  FitReport r = fit(d, parse_model("CPTP"), {.starts = 2});
  CHECK(r.two_delta_logl >= -1e-6);
  CHECK(r.two_delta_logl < 1e-3);
  CHECK(r.k_sat == 200);
  CHECK(r.k_model == 59);
}

TEST_CASE("ideal data is recovered") {
  CircuitDataset d = sample_dataset(ideal_gateset(), design_circuits().circuits, 1000000, 12);
  FitReport r = fit(d, parse_model("CPTP"), {.starts = 2, .seed = 1});
  CHECK(r.converged);
  CHECK(r.two_delta_logl >= -1e-6);
  CHECK(r.n_sigma == doctest::Approx(n_sigma(r.two_delta_logl, 200 - 59)));
  GaugeResult g = gauge_align(r.gateset, ideal_gateset());
  CHECK(gateset_distance(g.gateset, ideal_gateset(), {1, 1, 1}) <= 1e-2);
}

TEST_CASE("nested models") {
  GateSet truth = interior_truth();
  truth.mcm = usi_instrument({0.95, 0.02, 0.02, 0.01});
  CircuitDataset d = sample_dataset(truth, design_circuits().circuits, 5000, 21);
  FitReport full = fit(d, parse_model("CPTP"), {.starts = 2});
  FitReport usi = fit(d, parse_model("USI"), {.starts = 2});
  FitReport mpr = fit(d, parse_model("MPR"), {.starts = 2});
  CHECK(full.logl >= usi.logl - 1e-4);
  CHECK(full.logl >= mpr.logl - 1e-4);

  std::vector<FitReport> fits{full, usi, mpr};
  compare_models(fits, "CPTP");
  CHECK(fits[1].gamma.at("CPTP") == doctest::Approx(evidence_ratio(full, usi)));
  std::ostringstream os;
  write_comparison_csv(os, fits, "CPTP");
  CHECK(os.str().rfind("model,params,two_delta_logl,n_sigma,gamma\n", 0) == 0);
}

TEST_CASE("decomposition, bootstrap and JSON") {
  const GateSet truth = interior_truth();
  CircuitDataset d = sample_dataset(truth, design_circuits().circuits, 20000, 31);
  FitReport r = fit(d, parse_model("CPTP"), {.starts = 1});
  GateSet aligned = gauge_align(r.gateset, ideal_gateset()).gateset;
  StrengthReport s = decompose(aligned, ideal_gateset());
  StrengthReport t = extract(difference(truth.mcm, ideal_gateset().mcm), 1e-6);
  BootstrapResult b = bootstrap(r, d, ideal_gateset(), 4, 5, 2);
  CHECK(b.strengths.size() + b.failures == 4);
  attach_sigma(s, b);
  REQUIRE(s.sigma.has_value());
  CHECK(s.sigma->size() == 28);
  CHECK(std::abs(s.composites.at("pre_mcm_t1") - t.composites.at("pre_mcm_t1")) < 0.01);

  GateSet back = gateset_from_json(gateset_to_json(r.gateset));
  CHECK((flatten(back) - flatten(r.gateset)).cwiseAbs().maxCoeff() < 1e-12);
  const std::string js = fit_report_json(r, &s);
  for (const char* key : {"\"model\"", "\"loglikelihood\"", "\"two_delta_logl\"", "\"n_sigma\"", "\"k_model\"", "\"strengths\""})
    CHECK_MESSAGE(js.find(key) != std::string::npos, key);
  CHECK_THROWS_AS(gateset_from_json("[]"), ValidationError);
}
