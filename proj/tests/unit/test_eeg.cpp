#include "doctest.h"
#include "oracles.hpp"

#include "mcm/eeg.hpp"

#include <random>

using namespace mcm;

namespace {

double maxabs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("generator actions") {
  CMat z0 = oracle::ket_bra(0, 0);
  CHECK((apply_eeg(eeg_s("X"), z0) + oracle::pauli('Z')).norm() < 1e-14);
  CMat plus = CMat::Constant(2, 2, 0.5);
  CHECK((apply_eeg(eeg_h("Z"), plus) + oracle::pauli('Y')).norm() < 1e-14);
}

TEST_CASE("generator matrices agree with the operator-level oracle") {
  for (int n = 1; n <= 2; ++n)
    for (const auto& idx : all_eegs(n)) {
      Mat want = oracle::ptm(oracle::eeg_map(idx.label()), n);
      CHECK_MESSAGE(maxabs(eeg_matrix(idx) - want) < 1e-13, idx.label());
      CHECK(maxabs(eeg_matrix(idx).row(0)) < 1e-14);
    }
}

TEST_CASE("generator counts and independence") {
  CHECK(all_eegs(1).size() == 12);
  CHECK(all_eegs(2).size() == 240);
  Mat stacked(256, 240);
  for (int k = 0; k < 240; ++k) {
    Mat m = eeg_matrix(all_eegs(2)[k]);
    stacked.col(k) = Eigen::Map<const Vec>(m.data(), 256);
  }
  Eigen::FullPivLU<Mat> lu(stacked);
  CHECK(lu.rank() == 240);
}

TEST_CASE("index labels and canonical order") {
  auto a = EegIndex::parse("A_Y_X");
  CHECK(a.canonicalize() == -1);
  CHECK(a.label() == "A_X_Y");
  auto c = EegIndex::parse("C_Y_X");
  CHECK(c.canonicalize() == 1);
  CHECK(c.label() == "C_X_Y");
  // A antisymmetric under the swap, C symmetric.
  CMat rho = oracle::ket_bra(0, 0) * 0.7 + oracle::ket_bra(1, 1) * 0.3 + oracle::ket_bra(0, 1) * 0.2 +
             oracle::ket_bra(1, 0) * 0.2;
  CMat x = oracle::pauli('X'), y = oracle::pauli('Y');
  CHECK((oracle::eeg_a(y, x, rho) + oracle::eeg_a(x, y, rho)).norm() < 1e-14);
  CHECK((oracle::eeg_c(y, x, rho) - oracle::eeg_c(x, y, rho)).norm() < 1e-14);
  CHECK_THROWS_AS(EegIndex::parse("S_I"), ValidationError);
  CHECK_THROWS_AS(EegIndex::parse("C_X_X"), ValidationError);
  CHECK_THROWS_AS(EegIndex::parse("Q_X"), ValidationError);
  CHECK(eeg_position(EegIndex::parse("H_ZY")) == 13);
}

TEST_CASE("exponential and logarithm") {
  CHECK(maxabs(generator_to_process(Mat::Zero(4, 4)) - Mat4::Identity()) < 1e-15);
  const double eps = 1e-3;
  Mat sx = eeg_matrix(eeg_s("X"));
  // The residual is the second-order term; S_X has eigenvalues -2, so it is 2 eps^2.
  Mat resid = generator_to_process(eps * sx) - Mat4::Identity() - eps * sx;
  CHECK(maxabs(resid) <= 2 * eps * eps + 1e-12);
  CHECK(maxabs(resid - 0.5 * eps * eps * sx * sx) <= 2 * eps * eps * eps);

  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-0.02, 0.02);
  for (int t = 0; t < 20; ++t) {
    RateMap r;
    for (const auto& idx : all_eegs(1)) r[idx.label()] = u(rng);
    for (const auto& s : {"S_X", "S_Y", "S_Z"}) r[s] = std::abs(r[s]) + 0.03;
    Mat e = generator_to_process(generator_from_rates(r, 1));
    if ((e - Mat::Identity(4, 4)).norm() > 0.3) continue;
    CHECK(maxabs(generator_to_process(process_to_generator(e)) - e) <= 1e-8);
  }
  CHECK_THROWS_AS(process_to_generator(rotation_ptm('X', M_PI)), ValidationError);
}

TEST_CASE("amplitude damping generator") {
  Mat L = process_to_generator(amplitude_damping_ptm(0.01));
  RateMap r = project_onto_eegs(L);
  const double g = 0.01;
  for (const auto& [lab, v] : r) {
    if (lab == "S_X" || lab == "S_Y" || lab == "A_X_Y") {
      CHECK(std::abs(v) > g / 10);
    } else {
      CHECK_MESSAGE(std::abs(v) <= g * g, lab);
    }
  }
}

TEST_CASE("projection round trips") {
  RateMap r = project_onto_eegs(0.02 * eeg_matrix(eeg_s("X")));
  for (const auto& [lab, v] : r) CHECK(std::abs(v - (lab == "S_X" ? 0.02 : 0.0)) < 1e-14);
  r = project_onto_eegs(0.01 * eeg_matrix(eeg_h("ZY")));
  for (const auto& [lab, v] : r) CHECK(std::abs(v - (lab == "H_ZY" ? 0.01 : 0.0)) < 1e-14);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int t = 0; t < 20; ++t) {
    RateMap want;
    for (const auto& idx : all_eegs(2))
      if (rng() % 5 == 0) want[idx.label()] = u(rng);
    RateMap got = project_onto_eegs(generator_from_rates(want, 2));
    double err = 0;
    for (const auto& [lab, v] : got) {
      auto it = want.find(lab);
      err = std::max(err, std::abs(v - (it == want.end() ? 0.0 : it->second)));
    }
    CHECK(err <= 1e-10);
  }
  Mat not_tp = Mat::Zero(4, 4);
  not_tp(0, 3) = 1.0;
  CHECK_THROWS(project_onto_eegs(not_tp));
}
