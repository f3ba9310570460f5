#include "mcm/gateset.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mcm {

const Mat4& GateSet::gate(const std::string& label) const {
  auto it = gates.find(label);
  if (it == gates.end()) throw ValidationError("unknown gate label '" + label + "'");
  return it->second;
}

GateSet ideal_gateset() {
  GateSet gs;
  const double h = 1.0 / std::sqrt(2.0);
  gs.rho << h, 0, 0, h;
  gs.povm[0] << h, 0, 0, h;
  gs.povm[1] << h, 0, 0, -h;
  gs.gates["Gi"] = Mat4::Identity();
  gs.gates["Gx"] = rotation_ptm('X', M_PI / 2);
  gs.gates["Gy"] = rotation_ptm('Y', M_PI / 2);
  gs.mcm = ideal_instrument();
  return gs;
}

GateSet apply_stark(const GateSet& gs, double phi) {
  GateSet out = gs;
  out.stark = true;
  out.stark_phi = phi;
  out.stark_op = rotation_ptm('Z', phi);
  return out;
}

double stark_phase_prediction(double v_ratio, double photons_at_v0, double chi_tgate) {
  return photons_at_v0 * v_ratio * v_ratio * chi_tgate / 2.0;
}

GateSet gauge_transform(const GateSet& gs, const Mat4& M) {
  Eigen::FullPivLU<Mat4> lu(M);
  if (!lu.isInvertible() || std::abs(lu.determinant()) < 1e-12) throw ValidationError("singular gauge transform");
  Mat4 Mi = lu.inverse();
  GateSet out = gs;
  out.rho = M * gs.rho;
  for (int c = 0; c < 2; ++c) out.povm[c] = (gs.povm[c].transpose() * Mi).transpose();
  for (auto& [k, g] : out.gates) g = M * gs.gates.at(k) * Mi;
  for (int c = 0; c < 2; ++c) out.mcm.q[c] = M * gs.mcm.q[c] * Mi;
  out.stark_op = M * gs.stark_op * Mi;
  return out;
}

Circuit normalize_circuit(const Circuit& c) {
  Circuit out = c;
  if (!out.empty() && out.back() == "Mt") out.pop_back();
  return out;
}

void validate_circuit(const Circuit& c) {
  int mcms = 0;
  for (const auto& op : c) {
    if (op == kMcmLabel) {
      ++mcms;
      continue;
    }
    if (op != "Gi" && op != "Gx" && op != "Gy") throw ValidationError("unknown operation label '" + op + "'");
  }
  if (mcms > 1) throw ValidationError("circuit contains more than one MCM");
}

bool has_mcm(const Circuit& c) {
  for (const auto& op : c)
    if (op == kMcmLabel) return true;
  return false;
}

int num_outcomes(const Circuit& c) { return has_mcm(c) ? 4 : 2; }

std::vector<std::string> outcome_labels(const Circuit& c) {
  if (has_mcm(c)) return {"00", "01", "10", "11"};
  return {"0", "1"};
}

std::string circuit_str(const Circuit& c) {
  if (c.empty()) return "{}";
  std::ostringstream os;
  for (size_t i = 0; i < c.size(); ++i) os << (i ? "." : "") << c[i];
  return os.str();
}

std::vector<double> circuit_probability(const GateSet& gs, const Circuit& raw) {
  Circuit c = normalize_circuit(raw);
  validate_circuit(c);
  auto run = [&](size_t from, size_t to, Vec4 v, bool after_mcm) {
    for (size_t k = from; k < to; ++k) {
      v = gs.gate(c[k]) * v;
      if (after_mcm && gs.stark) v = gs.stark_op * v;
    }
    return v;
  };
  size_t m = c.size();
  for (size_t k = 0; k < c.size(); ++k)
    if (c[k] == kMcmLabel) m = k;
  std::vector<double> p;
  if (m == c.size()) {
    Vec4 v = run(0, c.size(), gs.rho, false);
    for (int j = 0; j < 2; ++j) p.push_back(gs.povm[j].dot(v));
    return p;
  }
  Vec4 pre = run(0, m, gs.rho, false);
  for (int i = 0; i < 2; ++i) {
    Vec4 v = run(m + 1, c.size(), gs.mcm.q[i] * pre, true);
    for (int j = 0; j < 2; ++j) p.push_back(gs.povm[j].dot(v));
  }
  return p;
}

std::vector<double> sanitize_probabilities(const std::vector<double>& p, double tol) {
  std::vector<double> out = p;
  double s = 0;
  for (double& x : out) {
    if (x < -tol || x > 1 + tol)
      throw ValidationError("model predicts an invalid probability " + std::to_string(x) + " (non-CP model)");
    x = std::clamp(x, 0.0, 1.0);
    s += x;
  }
  if (s <= 0) throw ValidationError("probabilities sum to zero");
  for (double& x : out) x /= s;
  return out;
}

namespace flat {
int gate_offset(const std::string& label) {
  if (label == "Gi") return gi;
  if (label == "Gx") return gx;
  if (label == "Gy") return gy;
  throw ValidationError("unknown gate label '" + label + "'");
}
}  // namespace flat

namespace {

void put(Vec& m, int off, const Mat4& a) {
  for (int r = 0; r < 4; ++r)
    for (int k = 0; k < 4; ++k) m[off + 4 * r + k] = a(r, k);
}

Mat4 get(const Vec& m, int off) {
  Mat4 a;
  for (int r = 0; r < 4; ++r)
    for (int k = 0; k < 4; ++k) a(r, k) = m[off + 4 * r + k];
  return a;
}

Mat4 rz(double phi) {
  Mat4 r = Mat4::Identity();
  r(1, 1) = r(2, 2) = std::cos(phi);
  r(2, 1) = std::sin(phi);
  r(1, 2) = -std::sin(phi);
  return r;
}

Mat4 rz_deriv(double phi) {
  Mat4 r = Mat4::Zero();
  r(1, 1) = r(2, 2) = -std::sin(phi);
  r(2, 1) = std::cos(phi);
  r(1, 2) = -std::cos(phi);
  return r;
}

}  // namespace

Vec flatten(const GateSet& gs) {
  Vec m = Vec::Zero(kFlatSize);
  m.segment<4>(flat::rho) = gs.rho;
  m.segment<4>(flat::e0) = gs.povm[0];
  m.segment<4>(flat::e1) = gs.povm[1];
  for (const auto& l : kGateLabels) put(m, flat::gate_offset(l), gs.gate(l));
  put(m, flat::q0, gs.mcm.q[0]);
  put(m, flat::q1, gs.mcm.q[1]);
  m[flat::phi] = gs.stark ? gs.stark_phi : 0.0;
  return m;
}

GateSet unflatten(const Vec& m, bool stark) {
  if (m.size() != kFlatSize) throw ValidationError("flat gate-set vector has the wrong size");
  GateSet gs;
  gs.rho = m.segment<4>(flat::rho);
  gs.povm[0] = m.segment<4>(flat::e0);
  gs.povm[1] = m.segment<4>(flat::e1);
  for (const auto& l : kGateLabels) gs.gates[l] = get(m, flat::gate_offset(l));
  gs.mcm.q[0] = get(m, flat::q0);
  gs.mcm.q[1] = get(m, flat::q1);
  if (stark) gs = apply_stark(gs, m[flat::phi]);
  return gs;
}

void circuit_probability_grad(const Vec& m, bool stark, const Circuit& raw, std::vector<double>& p, Mat& dp) {
  Circuit c = normalize_circuit(raw);
  validate_circuit(c);
  const int no = num_outcomes(c);
  p.assign(no, 0.0);
  dp.setZero(no, kFlatSize);

  std::map<std::string, Mat4> G;
  for (const auto& l : kGateLabels) G[l] = get(m, flat::gate_offset(l));
  const Mat4 Q[2] = {get(m, flat::q0), get(m, flat::q1)};
  const Vec4 rho = m.segment<4>(flat::rho);
  const Vec4 E[2] = {m.segment<4>(flat::e0), m.segment<4>(flat::e1)};
  const double phi = m[flat::phi];
  const Mat4 S = stark ? rz(phi) : Mat4::Identity();
  const Mat4 dS = stark ? rz_deriv(phi) : Mat4::Zero();

  size_t mpos = c.size();
  for (size_t k = 0; k < c.size(); ++k)
    if (c[k] == kMcmLabel) mpos = k;

  // Sequence of factors for one MCM branch; kind: 0 gate, 1 gate+stark, 2 MCM element
  struct Factor {
    Mat4 mat;
    int kind;
    int off;
    const Mat4* g;
  };
  for (int i = 0; i < (mpos == c.size() ? 1 : 2); ++i) {
    std::vector<Factor> fs;
    for (size_t k = 0; k < c.size(); ++k) {
      if (k == mpos) {
        fs.push_back({Q[i], 2, i == 0 ? flat::q0 : flat::q1, nullptr});
      } else {
        const Mat4& g = G.at(c[k]);
        bool after = mpos != c.size() && k > mpos && stark;
        fs.push_back({after ? Mat4(S * g) : g, after ? 1 : 0, flat::gate_offset(c[k]), &g});
      }
    }
    const size_t L = fs.size();
    std::vector<Vec4> right(L + 1);
    right[0] = rho;
    for (size_t k = 0; k < L; ++k) right[k + 1] = fs[k].mat * right[k];
    for (int j = 0; j < 2; ++j) {
      const int o = mpos == c.size() ? j : 2 * i + j;
      p[o] = E[j].dot(right[L]);
      Vec4 left = E[j];
      dp.row(o).segment<4>(j == 0 ? flat::e0 : flat::e1) += right[L].transpose();
      for (size_t k = L; k-- > 0;) {
        const Factor& f = fs[k];
        // d p / d mat = left * right[k]^T
        Mat4 outer = left * right[k].transpose();
        if (f.kind == 1) {
          Mat4 dg = S.transpose() * outer;
          for (int r = 0; r < 4; ++r)
            for (int q = 0; q < 4; ++q) dp(o, f.off + 4 * r + q) += dg(r, q);
          dp(o, flat::phi) += left.dot(dS * (*f.g) * right[k]);
        } else {
          for (int r = 0; r < 4; ++r)
            for (int q = 0; q < 4; ++q) dp(o, f.off + 4 * r + q) += outer(r, q);
        }
        left = f.mat.transpose() * left;
      }
      dp.row(o).segment<4>(flat::rho) += left.transpose();
    }
  }
}

}  // namespace mcm
