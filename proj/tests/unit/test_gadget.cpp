#include "doctest.h"
#include "oracles.hpp"

#include "mcm/eeg.hpp"
#include "mcm/gadget.hpp"

using namespace mcm;

namespace {

double maxabs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

Deviation crunch_deviation(const Mat& e) { return difference(crunch(e), ideal_instrument()); }

}  // namespace

TEST_CASE("crunch of the identity is the ideal instrument") {
  Deviation d = crunch_deviation(Mat::Identity(16, 16));
  CHECK(d.l[0].cwiseAbs().maxCoeff() < 1e-15);
  CHECK(d.l[1].cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("crunch matches the brute-force gadget") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 5; ++t) {
    CMat u = oracle::random_unitary(rng, 4);
    Instrument ins = crunch(ptm_from_unitary(u));
    auto want = oracle::gadget_deviation([&](const CMat& r) -> CMat { return u * r * u.adjoint(); });
    CHECK(maxabs(ins.q[0] - want[0]) < 1e-12);
    CHECK(maxabs(ins.q[1] - want[1]) < 1e-12);
  }
}

TEST_CASE("first-order deviations match the operator-level oracle") {
  int zero = 0;
  for (const auto& idx : all_eegs(2)) {
    Deviation d = first_order_deviation(idx);
    auto want = oracle::gadget_deviation(oracle::eeg_map(idx.label()));
    CHECK_MESSAGE(maxabs(d.l[0] - want[0]) < 1e-13, idx.label());
    CHECK_MESSAGE(maxabs(d.l[1] - want[1]) < 1e-13, idx.label());
    CHECK(d.tp_violation() < 1e-13);
    CHECK(maxabs(closed_form_deviation(idx).l[0] - d.l[0]) < 1e-13);
    CHECK(maxabs(closed_form_deviation(idx).l[1] - d.l[1]) < 1e-13);
    if (d.is_zero()) ++zero;
  }
  // Generators acting only through the ZZ-diagonal structure leave no trace.
  CHECK(zero > 0);
  CHECK(zero < 240);
}

TEST_CASE("equivalence of S_IX and S_IY") {
  for (double eps : {0.01, 1e-3}) {
    Deviation a = crunch_deviation(generator_to_process(eps * eeg_matrix(eeg_s("IX"))));
    Deviation b = crunch_deviation(generator_to_process(eps * eeg_matrix(eeg_s("IY"))));
    CHECK((a - b).norm() < 1e-15);
  }
  Deviation sx = first_order_deviation(eeg_s("IX"));
  Deviation sy = first_order_deviation(eeg_s("IY"));
  Deviation hzy = first_order_deviation(eeg_h("ZY"));
  CHECK((sx - sy).norm() == 0.0);
  CHECK((sx - hzy).norm() > 0.1);
}

TEST_CASE("S_IX deviation is the read-flip action") {
  // {-rho00|0><0| + rho11|1><1|, rho00|0><0| - rho11|1><1|}
  std::array<Mat, 2> want{
      oracle::ptm([](const CMat& r) -> CMat { return -r(0, 0) * oracle::ket_bra(0, 0) + r(1, 1) * oracle::ket_bra(1, 1); }, 1),
      oracle::ptm([](const CMat& r) -> CMat { return r(0, 0) * oracle::ket_bra(0, 0) - r(1, 1) * oracle::ket_bra(1, 1); }, 1)};
  Deviation d = first_order_deviation(eeg_s("IX"));
  CHECK(maxabs(d.l[0] - want[0]) < 1e-14);
  CHECK(maxabs(d.l[1] - want[1]) < 1e-14);
}

TEST_CASE("second-order corners of a ZY rotation") {
  std::vector<double> corner;
  const std::vector<double> hs{0.05, 0.1, 0.2};
  for (double h : hs) {
    Deviation d = crunch_deviation(generator_to_process(h * eeg_matrix(eeg_h("ZY"))));
    Deviation lin = first_order_deviation(eeg_h("ZY")) * h;
    CHECK((d - lin).norm() < 2 * h * h);
    corner.push_back(std::abs(d.l[0](0, 3)));
  }
  CHECK(maxabs(first_order_deviation(eeg_h("ZY")).l[0].row(0)) == 0.0);
  CHECK(corner[0] > 0.0);
  for (size_t k = 1; k < hs.size(); ++k) {
    double ratio = corner[k] / corner[0] / std::pow(hs[k] / hs[0], 2);
    CHECK(std::abs(ratio - 1.0) < 0.1);
  }
}

TEST_CASE("first-order sweep over all generators") {
  const double eps = 1e-3;
  for (const auto& idx : all_eegs(2)) {
    Deviation d = crunch_deviation(generator_to_process(eps * eeg_matrix(idx)));
    Deviation lin = first_order_deviation(idx) * eps;
    CHECK_MESSAGE((d - lin).norm() <= 10 * eps * eps, idx.label());
  }
}

TEST_CASE("linearity and span of the deviation map") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  const auto& eegs = all_eegs(2);
  Mat L = Mat::Zero(16, 16);
  Deviation sum;
  for (int k = 0; k < 10; ++k) {
    const auto& idx = eegs[rng() % eegs.size()];
    double w = u(rng);
    L += w * eeg_matrix(idx);
    sum += first_order_deviation(idx) * w;
  }
  CHECK((linear_deviation(L) - sum).norm() < 1e-12);

  Mat stacked(28, 240), full(32, 240);
  for (int k = 0; k < 240; ++k) {
    Deviation d = first_order_deviation(eegs[k]);
    stacked.col(k) = vec28(d);
    full.col(k) << Eigen::Map<const Vec>(d.l[0].data(), 16), Eigen::Map<const Vec>(d.l[1].data(), 16);
  }
  CHECK(Eigen::FullPivLU<Mat>(stacked).rank() == 28);
  CHECK(Eigen::FullPivLU<Mat>(full).rank() == 28);
  CHECK(deviation_map().rows() == 32);
  CHECK(deviation_map().cols() == 256);
}

TEST_CASE("vec28 round trip") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  Vec v(28);
  for (int k = 0; k < 28; ++k) v(k) = u(rng);
  Deviation d = unvec28(v);
  CHECK(d.tp_violation() < 1e-15);
  CHECK((vec28(d) - v).norm() < 1e-15);
}
