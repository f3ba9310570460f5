#include "mcm/models.hpp"

#include "mcm/gadget.hpp"

#include <ceres/jet.h>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace mcm {

std::string ModelSpec::tag() const {
  std::string t;
  switch (mcm) {
    case McmKind::CPTP: t = "CPTP"; break;
    case McmKind::USI: t = "USI"; break;
    case McmKind::MPR: t = "MPR"; break;
    case McmKind::Ideal: t = "GatesOnly"; break;
  }
  return stark ? t + "+Stark" : t;
}

int ModelSpec::nominal_params() const {
  int k = 31;
  switch (mcm) {
    case McmKind::CPTP: k += 28; break;
    case McmKind::USI: k += 3; break;
    case McmKind::MPR: k += 11; break;
    case McmKind::Ideal: break;
  }
  return k + (stark ? 1 : 0);
}

ModelSpec parse_model(const std::string& tag) {
  ModelSpec s;
  std::string base = tag;
  auto plus = tag.find('+');
  if (plus != std::string::npos) {
    if (tag.substr(plus + 1) != "Stark") throw ValidationError("unknown model tag '" + tag + "'");
    s.stark = true;
    base = tag.substr(0, plus);
  }
  if (base == "CPTP") s.mcm = McmKind::CPTP;
  else if (base == "USI") s.mcm = McmKind::USI;
  else if (base == "MPR") s.mcm = McmKind::MPR;
  else if (base == "GatesOnly") s.mcm = McmKind::Ideal;
  else throw ValidationError("unknown model tag '" + tag + "'");
  if (s.stark && s.mcm == McmKind::USI) throw ValidationError("USI+Stark is not a supported model");
  return s;
}

std::vector<ModelSpec> parse_model_list(const std::string& csv) {
  std::vector<ModelSpec> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_model(item));
  if (out.empty()) throw ValidationError("empty model list");
  return out;
}

namespace {

// Minimal complex arithmetic that works for ceres::Jet scalars.
template <class T>
struct Cx {
  T re, im;
};
template <class T>
Cx<T> operator+(const Cx<T>& a, const Cx<T>& b) { return {a.re + b.re, a.im + b.im}; }
template <class T>
Cx<T> operator-(const Cx<T>& a, const Cx<T>& b) { return {a.re - b.re, a.im - b.im}; }
template <class T>
Cx<T> operator*(const Cx<T>& a, const Cx<T>& b) {
  return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}
template <class T>
Cx<T> conj(const Cx<T>& a) { return {a.re, -a.im}; }

// Normalized single-qubit Pauli basis entries as plain complex numbers.
struct BasisTables {
  cplx B[4][2][2];
  cplx C[4][4][4][4];  // C[k][l][r][s], r=(a,i), s=(b,j): (B_l)_ab (B_k)_ji
  BasisTables() {
    const auto& nb = normalized_basis(1);
    for (int k = 0; k < 4; ++k)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) B[k][a][b] = nb[k](a, b);
    for (int k = 0; k < 4; ++k)
      for (int l = 0; l < 4; ++l)
        for (int a = 0; a < 2; ++a)
          for (int i = 0; i < 2; ++i)
            for (int b = 0; b < 2; ++b)
              for (int j = 0; j < 2; ++j) C[k][l][2 * a + i][2 * b + j] = B[l][a][b] * B[k][j][i];
  }
};
const BasisTables& tables() {
  static const BasisTables t;
  return t;
}

template <class T>
using Choi = std::array<std::array<Cx<T>, 4>, 4>;
template <class T>
using M2 = std::array<std::array<Cx<T>, 2>, 2>;

// Lower-triangular factor from 16 reals: diagonal, then (1,0),(2,0),(2,1),(3,0),(3,1),(3,2).
template <class T>
Choi<T> choi_from_factor(const T* x) {
  Choi<T> L;
  for (auto& row : L)
    for (auto& e : row) e = {T(0.0), T(0.0)};
  for (int i = 0; i < 4; ++i) L[i][i] = {x[i], T(0.0)};
  int t = 4;
  for (int r = 1; r < 4; ++r)
    for (int c = 0; c < r; ++c, t += 2) L[r][c] = {x[t], x[t + 1]};
  Choi<T> J;
  for (int r = 0; r < 4; ++r)
    for (int s = 0; s < 4; ++s) {
      Cx<T> acc{T(0.0), T(0.0)};
      for (int c = 0; c <= std::min(r, s); ++c) acc = acc + L[r][c] * conj(L[s][c]);
      J[r][s] = acc;
    }
  return J;
}

template <class T>
M2<T> trace_out(const Choi<T>& J) {
  M2<T> S;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) S[a][b] = J[2 * a][2 * b] + J[2 * a + 1][2 * b + 1];
  return S;
}

// S^-1/2 for a 2x2 Hermitian positive-definite matrix, in closed form.
template <class T>
M2<T> inv_sqrt(const M2<T>& S) {
  using std::sqrt;
  T det = S[0][0].re * S[1][1].re - (S[0][1].re * S[0][1].re + S[0][1].im * S[0][1].im);
  T d = sqrt(det);
  T tau = sqrt(S[0][0].re + S[1][1].re + T(2.0) * d);
  T f = T(1.0) / (tau * d);
  M2<T> W;
  W[0][0] = {(S[1][1].re + d) * f, T(0.0)};
  W[1][1] = {(S[0][0].re + d) * f, T(0.0)};
  W[0][1] = {-S[0][1].re * f, -S[0][1].im * f};
  W[1][0] = {-S[1][0].re * f, -S[1][0].im * f};
  return W;
}

template <class T>
Choi<T> normalize(const Choi<T>& J, const M2<T>& W) {
  Choi<T> out;
  for (int a = 0; a < 2; ++a)
    for (int i = 0; i < 2; ++i)
      for (int b = 0; b < 2; ++b)
        for (int j = 0; j < 2; ++j) {
          Cx<T> acc{T(0.0), T(0.0)};
          for (int c = 0; c < 2; ++c)
            for (int d = 0; d < 2; ++d) acc = acc + W[a][c] * J[2 * c + i][2 * d + j] * W[d][b];
          out[2 * a + i][2 * b + j] = acc;
        }
  return out;
}

template <class T>
void choi_to_ptm_rowmajor(const Choi<T>& J, T* out) {
  const auto& tb = tables();
  for (int k = 0; k < 4; ++k)
    for (int l = 0; l < 4; ++l) {
      T acc(0.0);
      for (int r = 0; r < 4; ++r)
        for (int s = 0; s < 4; ++s) {
          const cplx& c = tb.C[k][l][r][s];
          if (c.real() != 0.0) acc += c.real() * J[r][s].re;
          if (c.imag() != 0.0) acc -= c.imag() * J[r][s].im;
        }
      out[4 * k + l] = acc;
    }
}

template <class T>
void effect_coords(const M2<T>& E, T* out) {
  const auto& tb = tables();
  for (int k = 0; k < 4; ++k) {
    T acc(0.0);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        const cplx& c = tb.B[k][b][a];
        acc += c.real() * E[a][b].re - c.imag() * E[a][b].im;
      }
    out[k] = acc;
  }
}

template <class T>
M2<T> psd2(const T* x) {
  // L = [[x0, 0], [x2 + i x3, x1]], returns L L^dagger
  Cx<T> l00{x[0], T(0.0)}, l11{x[1], T(0.0)}, l10{x[2], x[3]};
  M2<T> E;
  E[0][0] = l00 * conj(l00);
  E[0][1] = l00 * conj(l10);
  E[1][0] = l10 * conj(l00);
  E[1][1] = l10 * conj(l10) + l11 * conj(l11);
  return E;
}

struct StateBlock {
  template <class T>
  void operator()(const T* x, T* out) const {
    M2<T> r = psd2(x);
    T tr = r[0][0].re + r[1][1].re;
    for (auto& row : r)
      for (auto& e : row) e = {e.re / tr, e.im / tr};
    effect_coords(r, out);
  }
};

struct PovmBlock {
  template <class T>
  void operator()(const T* x, T* out) const {
    M2<T> E0 = psd2(x), E1 = psd2(x + 4);
    M2<T> S;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) S[a][b] = E0[a][b] + E1[a][b];
    M2<T> W = inv_sqrt(S);
    for (int c = 0; c < 2; ++c) {
      const M2<T>& E = c == 0 ? E0 : E1;
      M2<T> N;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          Cx<T> acc{T(0.0), T(0.0)};
          for (int p = 0; p < 2; ++p)
            for (int q = 0; q < 2; ++q) acc = acc + W[a][p] * E[p][q] * W[q][b];
          N[a][b] = acc;
        }
      effect_coords(N, out + 4 * c);
    }
  }
};

struct ChannelBlock {
  template <class T>
  void operator()(const T* x, T* out) const {
    Choi<T> J = choi_from_factor(x);
    choi_to_ptm_rowmajor(normalize(J, inv_sqrt(trace_out(J))), out);
  }
};

struct InstrumentBlock {
  template <class T>
  void operator()(const T* x, T* out) const {
    Choi<T> J0 = choi_from_factor(x), J1 = choi_from_factor(x + 16);
    M2<T> S0 = trace_out(J0), S1 = trace_out(J1), S;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) S[a][b] = S0[a][b] + S1[a][b];
    M2<T> W = inv_sqrt(S);
    choi_to_ptm_rowmajor(normalize(J0, W), out);
    choi_to_ptm_rowmajor(normalize(J1, W), out + 16);
  }
};

const double kH = 1.0 / std::sqrt(2.0);
const double kKet[2][4] = {{kH, 0, 0, kH}, {kH, 0, 0, -kH}};

Vec4 basis_ket(int c) { return Vec4(kKet[c][0], kKet[c][1], kKet[c][2], kKet[c][3]); }

constexpr double kUsiFloor = 4e-4;
constexpr double kMprAngleFloor = 0.03;

struct UsiBlock {
  template <class T>
  void operator()(const T* y, T* out) const {
    T n = y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3];
    T q[4];
    for (int t = 0; t < 4; ++t) q[t] = y[t] * y[t] / n;
    for (int c = 0; c < 2; ++c)
      for (int r = 0; r < 4; ++r)
        for (int k = 0; k < 4; ++k) {
          T acc(0.0);
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) acc += q[2 * b + a] * kKet[c ^ b][r] * kKet[c ^ a][k];
          out[16 * c + 4 * r + k] = acc;
        }
  }
};

struct MprBlock {
  template <class T>
  void operator()(const T* x, T* out) const {
    using std::sin;
    T A[16], B[16];
    ChannelBlock{}(x, A);
    ChannelBlock{}(x + 16, B);
    T p = sin(x[32]) * sin(x[32]);
    for (int c = 0; c < 2; ++c) {
      // middle = (1-p)|c>><<c| + p|c^1>><<c^1|
      T mid[16], tmp[16];
      for (int r = 0; r < 4; ++r)
        for (int k = 0; k < 4; ++k)
          mid[4 * r + k] = (T(1.0) - p) * kKet[c][r] * kKet[c][k] + p * kKet[c ^ 1][r] * kKet[c ^ 1][k];
      for (int r = 0; r < 4; ++r)
        for (int k = 0; k < 4; ++k) {
          T acc(0.0);
          for (int t = 0; t < 4; ++t) acc += mid[4 * r + t] * B[4 * t + k];
          tmp[4 * r + k] = acc;
        }
      for (int r = 0; r < 4; ++r)
        for (int k = 0; k < 4; ++k) {
          T acc(0.0);
          for (int t = 0; t < 4; ++t) acc += A[4 * r + t] * tmp[4 * t + k];
          out[16 * c + 4 * r + k] = acc;
        }
    }
  }
};

template <int N, class F>
void eval_block(const F& f, const double* x, int nout, double* out, Mat* jac, int row0, int col0) {
  if (!jac) {
    f(x, out);
    return;
  }
  using J = ceres::Jet<double, N>;
  std::array<J, N> xj;
  for (int i = 0; i < N; ++i) xj[i] = J(x[i], i);
  std::vector<J> oj(nout);
  f(xj.data(), oj.data());
  for (int r = 0; r < nout; ++r) {
    out[r] = oj[r].a;
    for (int i = 0; i < N; ++i) (*jac)(row0 + r, col0 + i) = oj[r].v[i];
  }
}

// Hermitian part with negative eigenvalues clipped, plus reg * identity.
CMat clipped(const CMat& A, double reg) {
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (A + A.adjoint()));
  Vec w = es.eigenvalues().cwiseMax(0.0).array() + reg;
  return es.eigenvectors() * w.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

// Choi factor of a channel (or instrument element) for initialization.
void factor_from_choi(const CMat& J, double reg, double* x) {
  CMat Jr = clipped(J, reg);
  Eigen::LLT<CMat> llt(Jr);
  if (llt.info() != Eigen::Success) throw ValidationError("cannot factor Choi matrix for initialization");
  CMat L = llt.matrixL();
  for (int i = 0; i < 4; ++i) x[i] = L(i, i).real();
  int t = 4;
  for (int r = 1; r < 4; ++r)
    for (int c = 0; c < r; ++c, t += 2) {
      x[t] = L(r, c).real();
      x[t + 1] = L(r, c).imag();
    }
}

void factor2(const CMat& E, double reg, double* x) {
  CMat Er = clipped(E, reg);
  Eigen::LLT<CMat> llt(Er);
  if (llt.info() != Eigen::Success) throw ValidationError("cannot factor 2x2 operator for initialization");
  CMat L = llt.matrixL();
  x[0] = L(0, 0).real();
  x[1] = L(1, 1).real();
  x[2] = L(1, 0).real();
  x[3] = L(1, 0).imag();
}

}  // namespace

Parameterization::Parameterization(ModelSpec spec) : spec_(spec) {
  auto add = [&](const std::string& n, int sz) {
    blocks_.push_back({n, size_, sz});
    size_ += sz;
  };
  add("rho", 4);
  add("povm", 8);
  for (const auto& g : kGateLabels) add(g, 16);
  switch (spec_.mcm) {
    case McmKind::CPTP: add("mcm", 32); break;
    case McmKind::USI: add("mcm", 4); break;
    case McmKind::MPR: add("mcm", 33); break;
    case McmKind::Ideal: break;
  }
  if (spec_.stark) add("stark", 1);
}

Vec Parameterization::flat(const Vec& x, Mat* jac) const {
  if (x.size() != size_) throw ValidationError("parameter vector has the wrong length");
  if (!x.allFinite()) throw ValidationError("parameter vector contains NaN or Inf");
  Vec m = Vec::Zero(kFlatSize);
  if (jac) jac->setZero(kFlatSize, size_);
  if (spec_.mcm == McmKind::Ideal) {
    Instrument q = ideal_instrument();
    for (int c = 0; c < 2; ++c)
      for (int r = 0; r < 4; ++r)
        for (int k = 0; k < 4; ++k) m[flat::q0 + 16 * c + 4 * r + k] = q.q[c](r, k);
  }
  for (const auto& b : blocks_) {
    const double* xb = x.data() + b.offset;
    if (b.name == "rho") {
      eval_block<4>(StateBlock{}, xb, 4, m.data() + flat::rho, jac, flat::rho, b.offset);
    } else if (b.name == "povm") {
      eval_block<8>(PovmBlock{}, xb, 8, m.data() + flat::e0, jac, flat::e0, b.offset);
    } else if (b.name == "mcm") {
      if (spec_.mcm == McmKind::CPTP)
        eval_block<32>(InstrumentBlock{}, xb, 32, m.data() + flat::q0, jac, flat::q0, b.offset);
      else if (spec_.mcm == McmKind::USI)
        eval_block<4>(UsiBlock{}, xb, 32, m.data() + flat::q0, jac, flat::q0, b.offset);
      else
        eval_block<33>(MprBlock{}, xb, 32, m.data() + flat::q0, jac, flat::q0, b.offset);
    } else if (b.name == "stark") {
      m[flat::phi] = xb[0];
      if (jac) (*jac)(flat::phi, b.offset) = 1.0;
    } else {
      int off = flat::gate_offset(b.name);
      eval_block<16>(ChannelBlock{}, xb, 16, m.data() + off, jac, off, b.offset);
    }
  }
  return m;
}

GateSet Parameterization::instantiate(const Vec& x) const { return unflatten(flat(x), spec_.stark); }

Vec Parameterization::from_gateset(const GateSet& gs, double reg) const {
  Vec x = Vec::Zero(size_);
  for (const auto& b : blocks_) {
    double* xb = x.data() + b.offset;
    if (b.name == "rho") {
      factor2(devectorize(gs.rho), reg, xb);
    } else if (b.name == "povm") {
      factor2(devectorize(gs.povm[0]), reg, xb);
      factor2(devectorize(gs.povm[1]), reg, xb + 4);
    } else if (b.name == "mcm") {
      if (spec_.mcm == McmKind::CPTP) {
        factor_from_choi(ptm_to_choi(gs.mcm.q[0]), reg, xb);
        factor_from_choi(ptm_to_choi(gs.mcm.q[1]), reg, xb + 16);
      } else {
        // Overlaps <<c^b|Q_c|c^a>> averaged over c: the USI weights q_ab, and
        // for MPR with A = B = identity, 1-p and p on the diagonal.
        std::array<double, 4> q{};
        for (int c = 0; c < 2; ++c)
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              q[2 * b + a] += 0.5 * basis_ket(c ^ b).dot(gs.mcm.q[c] * basis_ket(c ^ a));
        if (spec_.mcm == McmKind::USI) {
          // Keep every weight off zero so its gradient does not vanish.
          for (int t = 0; t < 4; ++t) xb[t] = std::sqrt(std::max(q[t], kUsiFloor));
        } else {
          factor_from_choi(ptm_to_choi(Mat4::Identity()), reg, xb);
          factor_from_choi(ptm_to_choi(Mat4::Identity()), reg, xb + 16);
          const double p = std::clamp(0.5 * (q[1] + q[2]), 0.0, 1.0);
          xb[32] = std::max(std::asin(std::sqrt(p)), kMprAngleFloor);
        }
      }
    } else if (b.name == "stark") {
      xb[0] = gs.stark ? gs.stark_phi : 0.0;
    } else {
      factor_from_choi(ptm_to_choi(gs.gate(b.name)), reg, xb);
    }
  }
  return x;
}

Instrument usi_instrument(const std::array<double, 4>& q) {
  double s = 0;
  for (double v : q) {
    if (v < 0 || !std::isfinite(v)) throw ValidationError("USI weights must be nonnegative");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-10) throw ValidationError("USI weights must sum to 1");
  Vec y(4);
  for (int t = 0; t < 4; ++t) y[t] = std::sqrt(q[t]);
  double out[32];
  UsiBlock{}(y.data(), out);
  Instrument ins;
  for (int c = 0; c < 2; ++c)
    for (int r = 0; r < 4; ++r)
      for (int k = 0; k < 4; ++k) ins.q[c](r, k) = out[16 * c + 4 * r + k];
  return ins;
}

Instrument mpr_instrument(const Mat4& A, const Mat4& B, double p) {
  if (!(p >= 0 && p <= 1)) throw ValidationError("readout flip probability must lie in [0,1]");
  Instrument ins;
  Vec4 k0(kKet[0][0], kKet[0][1], kKet[0][2], kKet[0][3]);
  Vec4 k1(kKet[1][0], kKet[1][1], kKet[1][2], kKet[1][3]);
  Mat4 P0 = k0 * k0.transpose(), P1 = k1 * k1.transpose();
  ins.q[0] = A * ((1 - p) * P0 + p * P1) * B;
  ins.q[1] = A * ((1 - p) * P1 + p * P0) * B;
  return ins;
}

void TruthModelConfig::validate() const {
  for (double p : {t1_pre, t1_post, thermal_up, readout_flip, gate_depol, idle_damping, mcm_depol, spam_error})
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("truth-model probabilities must lie in [0,1]");
  for (double a : {weakness_angle, post_z_angle, stark_phi})
    if (!(a > -M_PI && a <= M_PI)) throw ValidationError("truth-model angles must lie in (-pi, pi]");
}

GateSet build_truth_model(const TruthModelConfig& cfg) {
  cfg.validate();
  GateSet gs = ideal_gateset();

  // Weak measurement core: the gadget with exp(-i theta ZY/2) as its error.
  CMat zy = PauliString("ZY").matrix();
  CMat u = (cplx(0.0, -cfg.weakness_angle / 2.0) * zy).exp();
  Instrument core = crunch(ptm_from_unitary(u));
  const double p = cfg.readout_flip;
  Instrument flipped;
  flipped.q[0] = (1 - p) * core.q[0] + p * core.q[1];
  flipped.q[1] = (1 - p) * core.q[1] + p * core.q[0];

  Mat4 pre = amplitude_damping_ptm(cfg.t1_pre);
  Mat4 post = rotation_ptm('Z', cfg.post_z_angle) * excitation_ptm(cfg.thermal_up) *
              amplitude_damping_ptm(cfg.t1_post);
  for (int c = 0; c < 2; ++c) gs.mcm.q[c] = post * flipped.q[c] * pre;
  if (cfg.mcm_depol > 0) {
    // Q_c -> (1-e) Q_c + e D/2, D the completely depolarizing channel
    Mat4 half = Mat4::Zero();
    half(0, 0) = 0.5;
    for (int c = 0; c < 2; ++c) gs.mcm.q[c] = (1 - cfg.mcm_depol) * gs.mcm.q[c] + cfg.mcm_depol * half;
  }
  if (cfg.spam_error > 0) {
    const double e = cfg.spam_error;
    gs.rho = depolarizing_ptm(e) * gs.rho;
    Vec4 p0 = gs.povm[0], p1 = gs.povm[1];
    gs.povm[0] = (1 - e) * p0 + e * p1;
    gs.povm[1] = (1 - e) * p1 + e * p0;
  }

  Mat4 dep = depolarizing_ptm(cfg.gate_depol);
  gs.gates["Gx"] = dep * gs.gates["Gx"];
  gs.gates["Gy"] = dep * gs.gates["Gy"];
  gs.gates["Gi"] = dep * amplitude_damping_ptm(cfg.idle_damping);
  check_instrument(gs.mcm, 1e-9);
  if (cfg.stark_phi != 0.0) gs = apply_stark(gs, cfg.stark_phi);
  return gs;
}

}  // namespace mcm
