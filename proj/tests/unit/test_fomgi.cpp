#include "doctest.h"
#include "oracles.hpp"

#include "mcm/fomgi.hpp"
#include "mcm/models.hpp"
#include "mcm/reference.hpp"

#include <random>
#include <set>
#include <sstream>

using namespace mcm;

namespace {

double maxabs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

// Functional row of `name` restricted to its nonzero entries, keyed by EEG label.
std::map<std::string, double> functional(const std::string& name) {
  std::map<std::string, double> out;
  Vec row = basis().functionals.row(fomgi_index(name));
  for (int k = 0; k < row.size(); ++k)
    if (std::abs(row[k]) > 1e-9) out[all_eegs(2)[k].label()] = row[k];
  return out;
}

Deviation action(const std::function<CMat(const CMat&)>& f0, const std::function<CMat(const CMat&)>& f1) {
  Deviation d;
  d.l[0] = oracle::ptm(f0, 1);
  d.l[1] = oracle::ptm(f1, 1);
  return d;
}

}  // namespace

TEST_CASE("labels and sectors") {
  const auto& ls = fomgi_labels();
  REQUIRE(ls.size() == 28);
  std::map<FSector, int> count;
  for (const auto& l : ls) ++count[l.sector];
  CHECK(count[FSector::S] == 3);
  CHECK(count[FSector::A] == 3);
  CHECK(count[FSector::R] == 6);
  CHECK(count[FSector::Rt] == 8);
  CHECK(count[FSector::W] == 4);
  CHECK(count[FSector::Wt] == 4);
  CHECK(fomgi_index("w0") == 20);
  CHECK_THROWS(fomgi_index("nope"));
}

TEST_CASE("functionals are integer and match hand-written combinations") {
  const auto& b = basis();
  CHECK(b.functionals.rows() == 28);
  CHECK(b.functionals.cols() == 240);
  CHECK(maxabs(b.functionals - b.functionals.array().round().matrix()) < 1e-9);
  for (const auto& [name, expr] : fomgi_rate_combinations())
    CHECK_MESSAGE(maxabs(b.functionals.row(fomgi_index(name)).transpose() - parse_rate_combination(expr)) < 1e-9,
                  name);
  for (const auto& line : check_fomgi_tables()) CHECK_MESSAGE(line.pass, (line.name + ": " + line.detail));
}

TEST_CASE("read-flip and weakness functionals") {
  std::map<std::string, double> s_read{{"S_IX", 1}, {"S_IY", 1}, {"S_ZX", 1}, {"S_ZY", 1},
                                       {"A_IX_ZY", 2}, {"A_IY_ZX", -2}};
  CHECK(functional("s_read") == s_read);
  // Hamiltonian rates enter with the library's sign, H = i[P, .].
  std::map<std::string, double> w0{{"H_ZY", -1},     {"A_IY_ZI", 1},  {"A_XY_XZ", -1}, {"A_YY_YZ", -1},
                                   {"A_ZY_ZZ", -2},  {"C_IX_ZZ", 1},  {"C_IZ_ZX", -1}, {"C_XI_XX", -1},
                                   {"C_YI_YX", -1},  {"C_ZI_ZX", -2}};
  CHECK(functional("w0") == w0);
}

TEST_CASE("duality") {
  const auto& b = basis();
  CHECK(maxabs(b.F_inv * b.F - Mat::Identity(28, 28)) < 1e-12);
  for (int j = 0; j < 28; ++j)
    for (int i = 0; i < 28; ++i) {
      double v = b.F_inv.row(i).dot(vec28(b.deviations[j]));
      CHECK(std::abs(v - (i == j ? 1.0 : 0.0)) < 1e-12);
    }

  auto dual = [&](const std::string& n) -> Vec { return b.F_inv.row(fomgi_index(n)).transpose(); };
  auto primal = [&](const std::string& n) -> Vec { return b.F.col(fomgi_index(n)); };
  const std::set<std::string> exceptional{"s_meas", "s_prep", "s_read", "a_meas", "a_prep", "a_read",
                                          "r_x_meas", "r_y_meas", "rt_x_meas", "rt_y_meas", "rt_xz_meas",
                                          "rt_yz_meas"};
  for (const auto& l : fomgi_labels())
    if (!exceptional.count(l.name)) CHECK_MESSAGE((dual(l.name) - primal(l.name) / 4).norm() < 1e-12, l.name);

  CHECK((dual("s_meas") - (2 * primal("s_meas") - primal("s_prep")) / 4).norm() < 1e-12);
  CHECK((dual("s_prep") - (2 * primal("s_prep") - primal("s_meas") - primal("s_read")) / 4).norm() < 1e-12);
  CHECK((dual("s_read") - (2 * primal("s_read") - primal("s_prep")) / 4).norm() < 1e-12);
  CHECK((dual("a_meas") - (primal("a_meas") / 2 - primal("a_prep") / 4) / 4).norm() < 1e-12);
  CHECK((dual("r_x_meas") - (1.5 * primal("r_x_meas") - 0.5 * primal("rt_x_meas")) / 4).norm() < 1e-12);
  CHECK((dual("rt_y_meas") - (1.5 * primal("rt_y_meas") - 0.5 * primal("r_y_meas")) / 4).norm() < 1e-12);
  CHECK((dual("rt_xz_meas") - primal("rt_xz_meas") / 8).norm() < 1e-12);
}

TEST_CASE("unit actions: generated basis equals the hand-written table") {
  const auto& acts = reference_unit_actions();
  REQUIRE(acts.size() == 28);
  for (const auto& a : acts) {
    Deviation d = deviation_from_action(a);
    CHECK_MESSAGE((d - basis().deviations[fomgi_index(a.name)]).norm() < 1e-14, a.name);
  }
}

TEST_CASE("probability shifts of the prep deviations vanish") {
  for (const char* n : {"s_prep", "a_prep"}) {
    const Deviation& d = basis().deviations[fomgi_index(n)];
    CHECK(maxabs(d.l[0].row(0)) < 1e-15);
    CHECK(maxabs(d.l[1].row(0)) < 1e-15);
  }
  const Deviation& m = basis().deviations[fomgi_index("s_meas")];
  CHECK(maxabs(m.l[0].row(0)) > 0.1);
}

TEST_CASE("extraction examples") {
  Deviation d = basis().deviations[fomgi_index("s_read")] * 0.01;
  StrengthReport r = extract(d);
  for (const auto& l : fomgi_labels()) CHECK(std::abs(r[l.name] - (l.name == "s_read" ? 0.01 : 0.0)) < 1e-12);

  // Decay during the measurement: {4 rho11 |0><0|, -4 rho11 |1><1|} at strength 0.02.
  Deviation g = action([](const CMat& x) -> CMat { return 4.0 * x(1, 1) * oracle::ket_bra(0, 0); },
                       [](const CMat& x) -> CMat { return -4.0 * x(1, 1) * oracle::ket_bra(1, 1); }) *
                0.02;
  r = extract(g);
  CHECK(r["s_meas"] == doctest::Approx(0.04).epsilon(1e-10));
  CHECK(r["a_meas"] == doctest::Approx(-0.02).epsilon(1e-10));
  CHECK(r.composites.at("gamma_meas_down") == doctest::Approx(0.02).epsilon(1e-10));
  CHECK(r.composites.at("pre_mcm_t1") == doctest::Approx(0.08).epsilon(1e-10));
  for (const auto& l : fomgi_labels())
    if (l.name != "s_meas" && l.name != "a_meas") CHECK(std::abs(r[l.name]) < 1e-12);

  Deviation bad;
  bad.l[0](0, 0) = 0.1;
  CHECK_THROWS_AS(extract(bad), ValidationError);
}

TEST_CASE("extraction round trip") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    Vec s(28);
    for (int k = 0; k < 28; ++k) s[k] = u(rng);
    StrengthReport r = extract(deviation_from_strengths(s));
    worst = std::max(worst, (r.strengths - s).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("gauge-equivalent generators give identical strengths") {
  StrengthReport a = extract(first_order_deviation(eeg_s("IX")));
  StrengthReport b = extract(first_order_deviation(eeg_s("IY")));
  CHECK((a.strengths - b.strengths).norm() == 0.0);
  // Strengths of any generator are its functional column.
  for (const auto& idx : all_eegs(2)) {
    StrengthReport r = extract(first_order_deviation(idx));
    CHECK((r.strengths - basis().functionals.col(eeg_position(idx))).norm() < 1e-12);
  }
}

TEST_CASE("classification") {
  StrengthReport zero = extract(Deviation{});
  SectorSummary s = classify(zero);
  CHECK(s.sectors.empty());
  CHECK(!s.dominant.has_value());

  SectorSummary w = classify(extract(first_order_deviation(eeg_h("ZY")) * 0.01));
  REQUIRE(w.dominant.has_value());
  CHECK(*w.dominant == FSector::W);
  CHECK(std::abs(extract(first_order_deviation(eeg_h("ZY"))).strengths[fomgi_index("w0")]) == doctest::Approx(1.0));
}

TEST_CASE("truth-model composites") {
  const Instrument ideal = ideal_instrument();
  {
    TruthModelConfig c;
    c.t1_post = 0.01;
    StrengthReport r = extract(difference(build_truth_model(c).mcm, ideal));
    CHECK(std::abs(r.composites.at("post_mcm_t1") - 0.01) < 0.01 * 0.01);
    CHECK(std::abs(r.composites.at("pre_mcm_t1")) < 1e-12);
  }
  {
    TruthModelConfig c;
    c.t1_pre = 0.02;
    StrengthReport r = extract(difference(build_truth_model(c).mcm, ideal));
    CHECK(std::abs(r.composites.at("pre_mcm_t1") - 0.02) < 0.02 * 0.02);
  }
  {
    TruthModelConfig c;
    c.weakness_angle = 0.2;
    StrengthReport r = extract(difference(build_truth_model(c).mcm, ideal), 1e-6);
    double w = 0, s = 0;
    for (const auto& l : fomgi_labels()) {
      if (l.sector == FSector::W) w += std::abs(r[l.name]);
      if (l.sector == FSector::S) s += std::abs(r[l.name]);
    }
    CHECK(w > 0.05);
    CHECK(s < 0.2 * 0.2);
  }
}

TEST_CASE("weakness strengths vanish with the angle") {
  const Instrument ideal = ideal_instrument();
  auto w_sector = [&](double angle) {
    TruthModelConfig c;
    c.weakness_angle = angle;
    StrengthReport r = extract(difference(build_truth_model(c).mcm, ideal), 1e-6);
    double w = 0;
    for (const auto& l : fomgi_labels())
      if (l.sector == FSector::W) w += std::abs(r[l.name]);
    return std::pair{w, r.composites.at("weakness")};
  };
  const std::vector<double> angles{0.4, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01};
  auto prev = w_sector(0.5);
  for (double a : angles) {
    auto cur = w_sector(a);
    CHECK_MESSAGE(cur.first < prev.first, a);
    CHECK_MESSAGE(cur.second < prev.second, a);
    prev = cur;
  }
  auto zero = w_sector(0.0);
  CHECK(zero.first < 1e-12);
  CHECK(zero.second < 1e-6);
}

TEST_CASE("report CSV") {
  std::ostringstream os;
  write_report_csv(os, extract(first_order_deviation(eeg_s("IX")) * 0.01));
  const std::string out = os.str();
  CHECK(out.find("s_read") != std::string::npos);
  CHECK(out.find("w0") != std::string::npos);
}
