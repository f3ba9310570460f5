#include "mcm/eeg.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <mutex>

namespace mcm {

namespace {
const cplx I1(0.0, 1.0);
}

char sector_char(Sector s) {
  switch (s) {
    case Sector::H: return 'H';
    case Sector::S: return 'S';
    case Sector::C: return 'C';
    case Sector::A: return 'A';
  }
  return '?';
}

std::string EegIndex::label() const {
  std::string s(1, sector_char(sector));
  s += "_" + p.str();
  if (q) s += "_" + q->str();
  return s;
}

EegIndex EegIndex::parse(const std::string& label) {
  if (label.size() < 3 || label[1] != '_') throw ValidationError("bad EEG label '" + label + "'");
  EegIndex idx;
  switch (label[0]) {
    case 'H': idx.sector = Sector::H; break;
    case 'S': idx.sector = Sector::S; break;
    case 'C': idx.sector = Sector::C; break;
    case 'A': idx.sector = Sector::A; break;
    default: throw ValidationError("bad EEG sector in '" + label + "'");
  }
  std::string rest = label.substr(2);
  auto us = rest.find('_');
  idx.p = PauliString(rest.substr(0, us));
  if (us != std::string::npos) idx.q = PauliString(rest.substr(us + 1));
  idx.validate();
  return idx;
}

void EegIndex::validate() const {
  if (p.is_identity()) throw ValidationError("EEG index uses the identity Pauli");
  bool pair = sector == Sector::C || sector == Sector::A;
  if (pair != q.has_value()) throw ValidationError("EEG index arity does not match its sector");
  if (q) {
    if (q->is_identity()) throw ValidationError("EEG index uses the identity Pauli");
    if (*q == p) throw ValidationError("C/A index requires p != q");
    if (q->nqubits() != p.nqubits()) throw ValidationError("EEG index qubit counts differ");
  }
}

int EegIndex::canonicalize() {
  if (q && *q < p) {
    std::swap(p, *q);
    return sector == Sector::A ? -1 : 1;
  }
  return 1;
}

EegIndex eeg_h(const std::string& p) { return {Sector::H, PauliString(p), std::nullopt}; }
EegIndex eeg_s(const std::string& p) { return {Sector::S, PauliString(p), std::nullopt}; }
EegIndex eeg_c(const std::string& p, const std::string& q) {
  return {Sector::C, PauliString(p), PauliString(q)};
}
EegIndex eeg_a(const std::string& p, const std::string& q) {
  return {Sector::A, PauliString(p), PauliString(q)};
}

const std::vector<EegIndex>& all_eegs(int n) {
  static std::once_flag f1, f2;
  static std::vector<EegIndex> e1, e2;
  auto build = [](int nq) {
    std::vector<EegIndex> out;
    auto ps = pauli_basis(nq);
    ps.erase(ps.begin());
    for (const auto& p : ps) out.push_back({Sector::H, p, std::nullopt});
    for (const auto& p : ps) out.push_back({Sector::S, p, std::nullopt});
    for (Sector s : {Sector::C, Sector::A})
      for (size_t i = 0; i < ps.size(); ++i)
        for (size_t j = i + 1; j < ps.size(); ++j) out.push_back({s, ps[i], ps[j]});
    return out;
  };
  if (n == 1) {
    std::call_once(f1, [&] { e1 = build(1); });
    return e1;
  }
  if (n == 2) {
    std::call_once(f2, [&] { e2 = build(2); });
    return e2;
  }
  throw ValidationError("only 1 or 2 qubits supported");
}

int eeg_position(const EegIndex& idx) {
  static std::once_flag f;
  static std::map<std::string, int> pos;
  std::call_once(f, [] {
    for (int n : {1, 2}) {
      const auto& all = all_eegs(n);
      for (size_t i = 0; i < all.size(); ++i) pos[all[i].label()] = static_cast<int>(i);
    }
  });
  auto it = pos.find(idx.label());
  if (it == pos.end()) throw ValidationError("unknown or non-canonical EEG " + idx.label());
  return it->second;
}

CMat apply_eeg(const EegIndex& idx, const CMat& rho) {
  const CMat P = idx.p.matrix();
  switch (idx.sector) {
    case Sector::H: return I1 * (P * rho - rho * P);
    case Sector::S: return P * rho * P - rho;
    case Sector::C: {
      const CMat Q = idx.q->matrix();
      CMat ac = P * Q + Q * P;
      return P * rho * Q + Q * rho * P - 0.5 * (ac * rho + rho * ac);
    }
    case Sector::A: {
      const CMat Q = idx.q->matrix();
      CMat cm = P * Q - Q * P;
      return I1 * (P * rho * Q - Q * rho * P + 0.5 * (cm * rho + rho * cm));
    }
  }
  return rho;
}

Mat eeg_matrix(const EegIndex& idx) {
  idx.validate();
  return ptm_from_map([&](const CMat& r) { return apply_eeg(idx, r); }, idx.nqubits());
}

namespace {

struct Frame {
  Mat stack;  // D^2 x N, columns are vectorized generator matrices
  Mat pinv;   // N x D^2
};

const Frame& frame(int n) {
  static std::once_flag f1, f2;
  static Frame fr1, fr2;
  auto build = [](int nq) {
    const auto& all = all_eegs(nq);
    const int D = 1 << (2 * nq);
    Frame fr;
    fr.stack.resize(D * D, all.size());
    for (size_t i = 0; i < all.size(); ++i) {
      Mat m = eeg_matrix(all[i]);
      fr.stack.col(i) = Eigen::Map<const Vec>(m.data(), m.size());
    }
    fr.pinv = fr.stack.completeOrthogonalDecomposition().pseudoInverse();
    return fr;
  };
  if (n == 1) {
    std::call_once(f1, [&] { fr1 = build(1); });
    return fr1;
  }
  std::call_once(f2, [&] { fr2 = build(2); });
  return fr2;
}

}  // namespace

Mat generator_from_rates(const RateMap& rates, int n) {
  const int D = 1 << (2 * n);
  Mat L = Mat::Zero(D, D);
  for (const auto& [lab, r] : rates) {
    EegIndex idx = EegIndex::parse(lab);
    if (idx.nqubits() != n) throw ValidationError("rate label " + lab + " has the wrong qubit count");
    L += r * eeg_matrix(idx);
  }
  return L;
}

RateMap project_onto_eegs(const Mat& L, double tol, double drop_below) {
  int n = qubits_for_dim(L.rows());
  if (L.cols() != L.rows()) throw ValidationError("generator must be square");
  const Frame& fr = frame(n);
  Vec v = Eigen::Map<const Vec>(L.data(), L.size());
  Vec r = fr.pinv * v;
  double res = (fr.stack * r - v).norm();
  if (res > tol) throw ValidationError("generator is outside the EEG span (residual " + std::to_string(res) + ")");
  RateMap out;
  const auto& all = all_eegs(n);
  for (size_t i = 0; i < all.size(); ++i)
    if (std::abs(r[i]) > drop_below) out[all[i].label()] = r[i];
  return out;
}

Mat generator_to_process(const Mat& L) { return L.exp(); }

Mat process_to_generator(const Mat& E) {
  Eigen::EigenSolver<Mat> es(E, false);
  for (long i = 0; i < es.eigenvalues().size(); ++i) {
    cplx ev = es.eigenvalues()[i];
    if (std::abs(ev.imag()) < 1e-12 && ev.real() <= 0.0)
      throw ValidationError("matrix logarithm: eigenvalue on the negative real axis (no principal branch)");
  }
  Mat L = E.log();
  if (!L.allFinite()) throw ValidationError("matrix logarithm failed");
  return L;
}

}  // namespace mcm
