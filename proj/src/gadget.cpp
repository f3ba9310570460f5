#include "mcm/gadget.hpp"

#include <cmath>
#include <iomanip>
#include <mutex>
#include <ostream>

namespace mcm {

namespace {
const cplx I1(0.0, 1.0);
}

Deviation& Deviation::operator+=(const Deviation& o) {
  l[0] += o.l[0];
  l[1] += o.l[1];
  return *this;
}
Deviation Deviation::operator+(const Deviation& o) const {
  Deviation r = *this;
  return r += o;
}
Deviation Deviation::operator-(const Deviation& o) const { return *this + o * -1.0; }
Deviation Deviation::operator*(double s) const {
  Deviation r;
  r.l[0] = l[0] * s;
  r.l[1] = l[1] * s;
  return r;
}
double Deviation::norm() const { return std::sqrt(l[0].squaredNorm() + l[1].squaredNorm()); }
double Deviation::tp_violation() const { return (l[0].row(0) + l[1].row(0)).cwiseAbs().maxCoeff(); }
bool Deviation::is_zero(double tol) const {
  return l[0].cwiseAbs().maxCoeff() <= tol && l[1].cwiseAbs().maxCoeff() <= tol;
}

Deviation difference(const Instrument& a, const Instrument& b) {
  Deviation d;
  d.l[0] = a.q[0] - b.q[0];
  d.l[1] = a.q[1] - b.q[1];
  return d;
}

Instrument add(const Instrument& q, const Deviation& d) {
  Instrument r;
  r.q[0] = q.q[0] + d.l[0];
  r.q[1] = q.q[1] + d.l[1];
  return r;
}

Vec vec28(const Deviation& d) {
  Vec v(28);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) v[4 * r + c] = d.l[0](r, c);
  for (int r = 1; r < 4; ++r)
    for (int c = 0; c < 4; ++c) v[16 + 4 * (r - 1) + c] = d.l[1](r, c);
  return v;
}

Deviation unvec28(const Vec& v) {
  if (v.size() != 28) throw ValidationError("expected a 28-vector");
  Deviation d;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) d.l[0](r, c) = v[4 * r + c];
  for (int r = 1; r < 4; ++r)
    for (int c = 0; c < 4; ++c) d.l[1](r, c) = v[16 + 4 * (r - 1) + c];
  d.l[1].row(0) = -d.l[0].row(0);
  return d;
}

void write_csv(std::ostream& os, const Deviation& d) {
  os << "outcome,row,c0,c1,c2,c3\n" << std::setprecision(12);
  for (int c = 0; c < 2; ++c)
    for (int r = 0; r < 4; ++r) {
      os << c << ',' << r;
      for (int k = 0; k < 4; ++k) os << ',' << d.l[c](r, k);
      os << '\n';
    }
}

const GadgetFixture& gadget() {
  static std::once_flag f;
  static GadgetFixture g;
  std::call_once(f, [] {
    CMat cx = CMat::Zero(4, 4);
    cx(0, 0) = cx(1, 1) = cx(2, 3) = cx(3, 2) = 1.0;
    g.cnot = ptm_from_unitary(cx);
    const double h = 1.0 / std::sqrt(2.0);
    const double ket[2][4] = {{h, 0, 0, h}, {h, 0, 0, -h}};
    g.inject = Mat::Zero(16, 4);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) g.inject(4 * a + b, a) = ket[0][b];
    for (int c = 0; c < 2; ++c) {
      g.project[c] = Mat::Zero(4, 16);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) g.project[c](a, 4 * a + b) = ket[c][b];
    }
  });
  return g;
}

Instrument crunch(const Mat& e) {
  if (e.rows() != 16 || e.cols() != 16) throw ValidationError("crunch expects a 16x16 PTM");
  const auto& g = gadget();
  Mat tail = e * g.cnot * g.inject;
  Instrument ins;
  for (int c = 0; c < 2; ++c) ins.q[c] = g.project[c] * tail;
  return ins;
}

Deviation linear_deviation(const Mat& L) {
  if (L.rows() != 16 || L.cols() != 16) throw ValidationError("expected a 16x16 generator");
  const auto& g = gadget();
  Mat tail = L * g.cnot * g.inject;
  Deviation d;
  for (int c = 0; c < 2; ++c) d.l[c] = g.project[c] * tail;
  return d;
}

const Mat& deviation_map() {
  static std::once_flag f;
  static Mat m;
  std::call_once(f, [] {
    m.resize(32, 256);
    for (int j = 0; j < 256; ++j) {
      Mat L = Mat::Zero(16, 16);
      L(j % 16, j / 16) = 1.0;
      Deviation d = linear_deviation(L);
      m.col(j).head(16) = Eigen::Map<const Vec>(d.l[0].data(), 16);
      m.col(j).tail(16) = Eigen::Map<const Vec>(d.l[1].data(), 16);
    }
  });
  return m;
}

Deviation first_order_deviation(const EegIndex& idx) {
  if (idx.nqubits() != 2) throw ValidationError("first_order_deviation expects a two-qubit EEG");
  Mat L = eeg_matrix(idx);
  Vec v = deviation_map() * Eigen::Map<const Vec>(L.data(), L.size());
  Deviation d;
  d.l[0] = Eigen::Map<const Mat4>(v.data());
  d.l[1] = Eigen::Map<const Mat4>(v.data() + 16);
  return d;
}

Deviation unit_term_deviation(const CMat& A, const CMat& B, cplx weight) {
  Deviation d;
  for (int c = 0; c < 2; ++c) {
    CMat proj = CMat::Zero(4, 4);
    // I (x) |c><c| in the physical-first ordering
    proj(c, c) = 1.0;
    proj(2 + c, 2 + c) = 1.0;
    d.l[c] = ptm_from_map(
        [&](const CMat& rho) -> CMat {
          CMat joint = CMat::Zero(4, 4);
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) joint(2 * a + a, 2 * b + b) = rho(a, b);
          CMat out = proj * (weight * A * joint * B) * proj;
          CMat red = CMat::Zero(2, 2);
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) red(a, b) = out(2 * a, 2 * b) + out(2 * a + 1, 2 * b + 1);
          return red;
        },
        1);
  }
  return d;
}

std::vector<UnitTerm> eeg_unit_terms(const EegIndex& idx) {
  idx.validate();
  const CMat P = idx.p.matrix();
  const CMat Id = CMat::Identity(P.rows(), P.cols());
  switch (idx.sector) {
    case Sector::H: return {{I1, P, Id}, {-I1, Id, P}};
    case Sector::S: return {{1.0, P, P}, {-1.0, Id, Id}};
    case Sector::C: {
      const CMat Q = idx.q->matrix();
      CMat ac = P * Q + Q * P;
      return {{1.0, P, Q}, {1.0, Q, P}, {-0.5, ac, Id}, {-0.5, Id, ac}};
    }
    case Sector::A: {
      const CMat Q = idx.q->matrix();
      CMat cm = P * Q - Q * P;
      return {{I1, P, Q}, {-I1, Q, P}, {0.5 * I1, cm, Id}, {0.5 * I1, Id, cm}};
    }
  }
  return {};
}

Deviation closed_form_deviation(const EegIndex& idx) {
  Deviation d;
  for (const auto& t : eeg_unit_terms(idx)) d += unit_term_deviation(t.a, t.b, t.w);
  return d;
}

}  // namespace mcm
