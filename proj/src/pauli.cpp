#include "mcm/pauli.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <mutex>

namespace mcm {

namespace {

const cplx I1(0.0, 1.0);

CMat kron(const CMat& a, const CMat& b) { return Eigen::kroneckerProduct(a, b).eval(); }

}  // namespace

PauliString::PauliString(std::string letters) : s_(std::move(letters)) {
  if (s_.empty()) throw ValidationError("empty Pauli string");
  for (char& c : s_) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (c != 'I' && c != 'X' && c != 'Y' && c != 'Z')
      throw ValidationError("invalid Pauli letter in '" + s_ + "'");
  }
}

bool PauliString::is_identity() const {
  for (char c : s_)
    if (c != 'I') return false;
  return true;
}

int PauliString::index() const {
  int idx = 0;
  for (char c : s_) {
    int d = c == 'I' ? 0 : c == 'X' ? 1 : c == 'Y' ? 2 : 3;
    idx = 4 * idx + d;
  }
  return idx;
}

CMat PauliString::matrix() const {
  CMat m = CMat::Identity(1, 1);
  for (char c : s_) m = kron(m, pauli_matrix(c));
  return m;
}

CMat pauli_matrix(char c) {
  CMat m(2, 2);
  switch (c) {
    case 'I': m << 1, 0, 0, 1; break;
    case 'X': m << 0, 1, 1, 0; break;
    case 'Y': m << 0, -I1, I1, 0; break;
    case 'Z': m << 1, 0, 0, -1; break;
    default: throw ValidationError(std::string("invalid Pauli letter ") + c);
  }
  return m;
}

std::vector<PauliString> pauli_basis(int n) {
  static const char L[] = "IXYZ";
  std::vector<PauliString> out;
  int total = 1 << (2 * n);
  for (int k = 0; k < total; ++k) {
    std::string s(n, 'I');
    for (int q = n - 1, r = k; q >= 0; --q, r /= 4) s[q] = L[r % 4];
    out.emplace_back(s);
  }
  return out;
}

const std::vector<CMat>& normalized_basis(int n) {
  static std::once_flag f1, f2;
  static std::vector<CMat> b1, b2;
  auto build = [](int nq) {
    std::vector<CMat> b;
    double s = std::sqrt(static_cast<double>(1 << nq));
    for (const auto& p : pauli_basis(nq)) b.push_back(p.matrix() / s);
    return b;
  };
  if (n == 1) {
    std::call_once(f1, [&] { b1 = build(1); });
    return b1;
  }
  if (n == 2) {
    std::call_once(f2, [&] { b2 = build(2); });
    return b2;
  }
  throw ValidationError("only 1 or 2 qubits supported");
}

int qubits_for_dim(long dim2) {
  if (dim2 == 4) return 1;
  if (dim2 == 16) return 2;
  throw ValidationError("superoperator dimension must be 4 or 16");
}

Mat ptm_from_map(const std::function<CMat(const CMat&)>& f, int n) {
  const auto& B = normalized_basis(n);
  const int D = static_cast<int>(B.size());
  Mat r(D, D);
  for (int l = 0; l < D; ++l) {
    CMat out = f(B[l]);
    for (int k = 0; k < D; ++k) r(k, l) = (B[k] * out).trace().real();
  }
  return r;
}

Mat ptm_from_unitary(const CMat& u) {
  if (u.rows() != u.cols()) throw ValidationError("unitary must be square");
  int n = u.rows() == 2 ? 1 : u.rows() == 4 ? 2 : -1;
  if (n < 0) throw ValidationError("unitary must be 2x2 or 4x4");
  if ((u.adjoint() * u - CMat::Identity(u.rows(), u.rows())).norm() > 1e-12)
    throw ValidationError("matrix is not unitary");
  return ptm_from_map([&](const CMat& x) -> CMat { return u * x * u.adjoint(); }, n);
}

Mat ptm_from_kraus(const std::vector<CMat>& ks, bool require_tp) {
  if (ks.empty()) throw ValidationError("empty Kraus list");
  const long d = ks[0].rows();
  int n = d == 2 ? 1 : d == 4 ? 2 : -1;
  if (n < 0) throw ValidationError("Kraus operators must be 2x2 or 4x4");
  CMat s = CMat::Zero(d, d);
  for (const auto& k : ks) {
    if (k.rows() != d || k.cols() != d) throw ValidationError("Kraus dimension mismatch");
    s += k.adjoint() * k;
  }
  if (require_tp && (s - CMat::Identity(d, d)).norm() > 1e-10)
    throw ValidationError("Kraus operators are not trace preserving");
  return ptm_from_map(
      [&](const CMat& x) -> CMat {
        CMat o = CMat::Zero(d, d);
        for (const auto& k : ks) o += k * x * k.adjoint();
        return o;
      },
      n);
}

static Vec vectorize(const CMat& m, const char* what) {
  if (m.rows() != m.cols()) throw ValidationError(std::string(what) + " must be square");
  if ((m - m.adjoint()).norm() > 1e-10) throw ValidationError(std::string(what) + " is not Hermitian");
  int n = m.rows() == 2 ? 1 : m.rows() == 4 ? 2 : -1;
  if (n < 0) throw ValidationError(std::string(what) + " must be 2x2 or 4x4");
  const auto& B = normalized_basis(n);
  Vec v(B.size());
  for (size_t k = 0; k < B.size(); ++k) v[k] = (B[k] * m).trace().real();
  return v;
}

Vec vectorize_state(const CMat& rho) { return vectorize(rho, "state"); }
Vec vectorize_effect(const CMat& e) { return vectorize(e, "effect"); }

CMat devectorize(const Vec& v) {
  int n = qubits_for_dim(v.size());
  const auto& B = normalized_basis(n);
  CMat m = CMat::Zero(B[0].rows(), B[0].cols());
  for (long k = 0; k < v.size(); ++k) m += v[k] * B[k];
  return m;
}

CMat ptm_to_choi(const Mat& ptm) {
  int n = qubits_for_dim(ptm.rows());
  const auto& B = normalized_basis(n);
  const int d = 1 << n, D = d * d;
  CMat j = CMat::Zero(D, D);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      // E(|a><b|) = sum_kl R_kl (B_l)_{ba} B_k
      CMat e = CMat::Zero(d, d);
      for (int k = 0; k < D; ++k) {
        cplx c = 0;
        for (int l = 0; l < D; ++l) c += ptm(k, l) * B[l](b, a);
        e += c * B[k];
      }
      j.block(a * d, b * d, d, d) = e;
    }
  return j;
}

Mat choi_to_ptm(const CMat& choi) {
  const long D = choi.rows();
  int n = D == 4 ? 1 : D == 16 ? 2 : -1;
  if (n < 0 || choi.cols() != D) throw ValidationError("Choi matrix must be 4x4 or 16x16");
  const auto& B = normalized_basis(n);
  const int d = 1 << n;
  Mat r(D, D);
  for (int l = 0; l < D; ++l) {
    CMat e = CMat::Zero(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) e += B[l](a, b) * choi.block(a * d, b * d, d, d);
    for (int k = 0; k < D; ++k) r(k, l) = (B[k] * e).trace().real();
  }
  return r;
}

double min_choi_eigenvalue(const Mat& ptm) {
  CMat j = ptm_to_choi(ptm);
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (j + j.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool is_cp(const Mat& ptm, double tol) { return min_choi_eigenvalue(ptm) >= -tol; }

bool is_tp(const Mat& ptm, double tol) {
  Vec e0 = Vec::Zero(ptm.cols());
  e0[0] = 1.0;
  return (ptm.row(0).transpose() - e0).cwiseAbs().maxCoeff() <= tol;
}

Mat4 rotation_ptm(char axis, double theta) {
  CMat u = std::cos(theta / 2) * CMat::Identity(2, 2) - I1 * std::sin(theta / 2) * pauli_matrix(axis);
  return ptm_from_unitary(u);
}

Mat4 amplitude_damping_ptm(double gamma) {
  CMat k0(2, 2), k1(2, 2);
  k0 << 1, 0, 0, std::sqrt(1 - gamma);
  k1 << 0, std::sqrt(gamma), 0, 0;
  return ptm_from_kraus({k0, k1});
}

Mat4 excitation_ptm(double p) {
  CMat k0(2, 2), k1(2, 2);
  k0 << std::sqrt(1 - p), 0, 0, 1;
  k1 << 0, 0, std::sqrt(p), 0;
  return ptm_from_kraus({k0, k1});
}

Mat4 depolarizing_ptm(double p) {
  Mat4 m = Mat4::Identity() * (1 - p);
  m(0, 0) = 1;
  return m;
}

Instrument ideal_instrument() {
  Instrument ins;
  for (int c = 0; c < 2; ++c) {
    double s = c == 0 ? 1.0 : -1.0;
    ins.q[c].setZero();
    ins.q[c](0, 0) = 0.5;
    ins.q[c](0, 3) = 0.5 * s;
    ins.q[c](3, 0) = 0.5 * s;
    ins.q[c](3, 3) = 0.5;
  }
  return ins;
}

void check_instrument(const Instrument& ins, double tol) {
  for (int c = 0; c < 2; ++c)
    if (!is_cp(ins.q[c], tol))
      throw ValidationError("instrument element " + std::to_string(c) + " is not completely positive");
  if (!is_tp(ins.sum(), tol)) throw ValidationError("instrument elements do not sum to a TP map");
}

}  // namespace mcm
