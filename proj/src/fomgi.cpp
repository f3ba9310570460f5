#include "mcm/fomgi.hpp"

#include <cmath>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <stdexcept>

namespace mcm {

namespace {
const cplx I1(0.0, 1.0);
}

std::string sector_name(FSector s) {
  switch (s) {
    case FSector::S: return "S";
    case FSector::A: return "A";
    case FSector::R: return "R";
    case FSector::Rt: return "Rt";
    case FSector::W: return "W";
    case FSector::Wt: return "Wt";
  }
  return "?";
}

const std::vector<FomgiLabel>& fomgi_labels() {
  static const std::vector<FomgiLabel> labels = {
      {"s_meas", FSector::S, "S_XX"},
      {"s_prep", FSector::S, "S_XI"},
      {"s_read", FSector::S, "S_IX"},
      {"a_meas", FSector::A, "A_XX_YX"},
      {"a_prep", FSector::A, "A_XI_YI"},
      {"a_read", FSector::A, "A_IX_IY"},
      {"r_x_meas", FSector::R, "H_XX"},
      {"r_y_meas", FSector::R, "H_YX"},
      {"r_x_ind_prep", FSector::R, "H_XI"},
      {"r_x_dep_prep", FSector::R, "H_XZ"},
      {"r_y_ind_prep", FSector::R, "H_YI"},
      {"r_y_dep_prep", FSector::R, "H_YZ"},
      {"rt_x_meas", FSector::Rt, "C_XI_ZY"},
      {"rt_y_meas", FSector::Rt, "C_IX_XZ"},
      {"rt_xz_meas", FSector::Rt, "C_XZ_ZY"},
      {"rt_yz_meas", FSector::Rt, "C_IX_XI"},
      {"rt_x_ind_prep", FSector::Rt, "C_XX_ZY"},
      {"rt_x_dep_prep", FSector::Rt, "C_IX_XY"},
      {"rt_y_ind_prep", FSector::Rt, "C_IX_XX"},
      {"rt_y_dep_prep", FSector::Rt, "C_XX_ZX"},
      {"w0", FSector::W, "H_ZY"},
      {"w1", FSector::W, "H_IY"},
      {"w2", FSector::W, "H_ZX"},
      {"w3", FSector::W, "H_IX"},
      {"wt0", FSector::Wt, "C_XI_XY"},
      {"wt1", FSector::Wt, "C_XI_YY"},
      {"wt2", FSector::Wt, "C_YY_YZ"},
      {"wt3", FSector::Wt, "C_XX_XZ"},
  };
  return labels;
}

int fomgi_index(const std::string& name) {
  const auto& ls = fomgi_labels();
  for (size_t i = 0; i < ls.size(); ++i)
    if (ls[i].name == name) return static_cast<int>(i);
  throw ValidationError("unknown FOMGI label '" + name + "'");
}

// rho_kl |i><j| terms per outcome; {c, re, im, k, l, i, j}
const std::vector<UnitAction>& reference_unit_actions() {
  static const std::vector<UnitAction> t = {
      {"s_meas", {{0, -1, 0, 0, 0, 0, 0}, {0, 1, 0, 1, 1, 0, 0}, {1, 1, 0, 0, 0, 1, 1}, {1, -1, 0, 1, 1, 1, 1}}},
      {"s_prep", {{0, -1, 0, 0, 0, 0, 0}, {0, 1, 0, 0, 0, 1, 1}, {1, 1, 0, 1, 1, 0, 0}, {1, -1, 0, 1, 1, 1, 1}}},
      {"s_read", {{0, -1, 0, 0, 0, 0, 0}, {0, 1, 0, 1, 1, 1, 1}, {1, 1, 0, 0, 0, 0, 0}, {1, -1, 0, 1, 1, 1, 1}}},
      {"a_meas", {{0, -2, 0, 0, 0, 0, 0}, {0, -2, 0, 1, 1, 0, 0}, {1, 2, 0, 0, 0, 1, 1}, {1, 2, 0, 1, 1, 1, 1}}},
      {"a_prep", {{0, -2, 0, 0, 0, 0, 0}, {0, 2, 0, 0, 0, 1, 1}, {1, -2, 0, 1, 1, 0, 0}, {1, 2, 0, 1, 1, 1, 1}}},
      {"a_read", {{0, -2, 0, 0, 0, 0, 0}, {0, -2, 0, 1, 1, 1, 1}, {1, 2, 0, 0, 0, 0, 0}, {1, 2, 0, 1, 1, 1, 1}}},
      {"r_x_meas", {{0, 0, 1, 0, 1, 0, 0}, {0, 0, -1, 1, 0, 0, 0}, {1, 0, -1, 0, 1, 1, 1}, {1, 0, 1, 1, 0, 1, 1}}},
      {"r_y_meas", {{0, -1, 0, 0, 1, 0, 0}, {0, -1, 0, 1, 0, 0, 0}, {1, 1, 0, 0, 1, 1, 1}, {1, 1, 0, 1, 0, 1, 1}}},
      {"r_x_ind_prep", {{0, 0, 1, 0, 0, 0, 1}, {0, 0, -1, 0, 0, 1, 0}, {1, 0, -1, 1, 1, 0, 1}, {1, 0, 1, 1, 1, 1, 0}}},
      {"r_x_dep_prep", {{0, 0, 1, 0, 0, 0, 1}, {0, 0, -1, 0, 0, 1, 0}, {1, 0, 1, 1, 1, 0, 1}, {1, 0, -1, 1, 1, 1, 0}}},
      {"r_y_ind_prep", {{0, 1, 0, 0, 0, 0, 1}, {0, 1, 0, 0, 0, 1, 0}, {1, -1, 0, 1, 1, 0, 1}, {1, -1, 0, 1, 1, 1, 0}}},
      {"r_y_dep_prep", {{0, 1, 0, 0, 0, 0, 1}, {0, 1, 0, 0, 0, 1, 0}, {1, 1, 0, 1, 1, 0, 1}, {1, 1, 0, 1, 1, 1, 0}}},
      {"rt_x_meas", {{0, 0, -1, 0, 1, 1, 1}, {0, 0, 1, 1, 0, 1, 1}, {1, 0, 1, 0, 1, 0, 0}, {1, 0, -1, 1, 0, 0, 0}}},
      {"rt_y_meas", {{0, 1, 0, 0, 1, 1, 1}, {0, 1, 0, 1, 0, 1, 1}, {1, -1, 0, 0, 1, 0, 0}, {1, -1, 0, 1, 0, 0, 0}}},
      {"rt_xz_meas", {{0, 0, 1, 0, 1, 0, 0}, {0, 0, -1, 0, 1, 1, 1}, {0, 0, -1, 1, 0, 0, 0}, {0, 0, 1, 1, 0, 1, 1},
                      {1, 0, -1, 0, 1, 0, 0}, {1, 0, 1, 0, 1, 1, 1}, {1, 0, 1, 1, 0, 0, 0}, {1, 0, -1, 1, 0, 1, 1}}},
      {"rt_yz_meas", {{0, -1, 0, 0, 1, 0, 0}, {0, 1, 0, 0, 1, 1, 1}, {0, -1, 0, 1, 0, 0, 0}, {0, 1, 0, 1, 0, 1, 1},
                      {1, 1, 0, 0, 1, 0, 0}, {1, -1, 0, 0, 1, 1, 1}, {1, 1, 0, 1, 0, 0, 0}, {1, -1, 0, 1, 0, 1, 1}}},
      {"rt_x_ind_prep", {{0, 0, -1, 1, 1, 0, 1}, {0, 0, 1, 1, 1, 1, 0}, {1, 0, 1, 0, 0, 0, 1}, {1, 0, -1, 0, 0, 1, 0}}},
      {"rt_x_dep_prep", {{0, 0, -1, 1, 1, 0, 1}, {0, 0, 1, 1, 1, 1, 0}, {1, 0, -1, 0, 0, 0, 1}, {1, 0, 1, 0, 0, 1, 0}}},
      {"rt_y_ind_prep", {{0, 1, 0, 1, 1, 0, 1}, {0, 1, 0, 1, 1, 1, 0}, {1, 1, 0, 0, 0, 0, 1}, {1, 1, 0, 0, 0, 1, 0}}},
      {"rt_y_dep_prep", {{0, -1, 0, 1, 1, 0, 1}, {0, -1, 0, 1, 1, 1, 0}, {1, 1, 0, 0, 0, 0, 1}, {1, 1, 0, 0, 0, 1, 0}}},
      {"w0", {{0, 1, 0, 0, 1, 0, 1}, {0, 1, 0, 1, 0, 1, 0}, {1, 1, 0, 0, 1, 0, 1}, {1, 1, 0, 1, 0, 1, 0}}},
      {"w1", {{0, -1, 0, 0, 1, 0, 1}, {0, -1, 0, 1, 0, 1, 0}, {1, 1, 0, 0, 1, 0, 1}, {1, 1, 0, 1, 0, 1, 0}}},
      {"w2", {{0, 0, -1, 0, 1, 0, 1}, {0, 0, 1, 1, 0, 1, 0}, {1, 0, -1, 0, 1, 0, 1}, {1, 0, 1, 1, 0, 1, 0}}},
      {"w3", {{0, 0, 1, 0, 1, 0, 1}, {0, 0, -1, 1, 0, 1, 0}, {1, 0, -1, 0, 1, 0, 1}, {1, 0, 1, 1, 0, 1, 0}}},
      {"wt0", {{0, 0, 1, 0, 1, 1, 0}, {0, 0, -1, 1, 0, 0, 1}, {1, 0, 1, 0, 1, 1, 0}, {1, 0, -1, 1, 0, 0, 1}}},
      {"wt1", {{0, -1, 0, 0, 1, 1, 0}, {0, -1, 0, 1, 0, 0, 1}, {1, -1, 0, 0, 1, 1, 0}, {1, -1, 0, 1, 0, 0, 1}}},
      {"wt2", {{0, 0, -1, 0, 1, 1, 0}, {0, 0, 1, 1, 0, 0, 1}, {1, 0, 1, 0, 1, 1, 0}, {1, 0, -1, 1, 0, 0, 1}}},
      {"wt3", {{0, 1, 0, 0, 1, 1, 0}, {0, 1, 0, 1, 0, 0, 1}, {1, -1, 0, 0, 1, 1, 0}, {1, -1, 0, 1, 0, 0, 1}}},
  };
  return t;
}

Deviation deviation_from_action(const UnitAction& a) {
  Deviation d;
  for (int c = 0; c < 2; ++c)
    d.l[c] = ptm_from_map(
        [&](const CMat& rho) -> CMat {
          CMat out = CMat::Zero(2, 2);
          for (const auto& t : a.terms)
            if (t.c == c) out(t.i, t.j) += cplx(t.re, t.im) * rho(t.k, t.l);
          return out;
        },
        1);
  return d;
}

namespace {

// Base term of the representative EEG: P rho P for S, the symmetric unit for
// C, the antisymmetric unit for A, and i(rho P - P rho) for H. The matching
// trace-preserving correction is appended only if the base term is not TP.
Deviation representative_deviation(const std::string& rep) {
  EegIndex idx = EegIndex::parse(rep);
  const CMat P = idx.p.matrix();
  const CMat Id = CMat::Identity(4, 4);
  std::vector<UnitTerm> base, corr;
  switch (idx.sector) {
    case Sector::S:
      base = {{1.0, P, P}};
      corr = {{-1.0, Id, Id}};
      break;
    case Sector::H:
      base = {{I1, Id, P}, {-I1, P, Id}};
      break;
    case Sector::C: {
      const CMat Q = idx.q->matrix();
      CMat ac = P * Q + Q * P;
      base = {{1.0, P, Q}, {1.0, Q, P}};
      corr = {{-0.5, ac, Id}, {-0.5, Id, ac}};
      break;
    }
    case Sector::A: {
      const CMat Q = idx.q->matrix();
      CMat cm = P * Q - Q * P;
      base = {{I1, P, Q}, {-I1, Q, P}};
      corr = {{0.5 * I1, cm, Id}, {0.5 * I1, Id, cm}};
      break;
    }
  }
  Deviation d;
  for (const auto& t : base) d += unit_term_deviation(t.a, t.b, t.w);
  if (d.tp_violation() > 1e-12)
    for (const auto& t : corr) d += unit_term_deviation(t.a, t.b, t.w);
  return d;
}

}  // namespace

FomgiBasis build_basis() {
  const auto& labels = fomgi_labels();
  const auto& actions = reference_unit_actions();
  FomgiBasis b;
  b.F.resize(28, 28);
  for (size_t j = 0; j < labels.size(); ++j) {
    Deviation d = representative_deviation(labels[j].rep);
    if (d.tp_violation() > 1e-12) throw std::logic_error("deviation " + labels[j].name + " is not TP");
    if (actions[j].name != labels[j].name) throw std::logic_error("reference table order mismatch");
    Deviation ref = deviation_from_action(actions[j]);
    if ((d - ref).norm() > 1e-12)
      throw std::logic_error("generated deviation " + labels[j].name + " disagrees with its unit action");
    b.deviations.push_back(d);
    b.F.col(j) = vec28(d);
  }
  Eigen::JacobiSVD<Mat> svd(b.F);
  const auto& sv = svd.singularValues();
  if (sv[27] < 1e-9) throw std::logic_error("FOMGI change-of-basis matrix is singular");
  b.condition = sv[0] / sv[27];
  b.F_inv = b.F.inverse();

  // Coefficients of every FOMGI quantity on the 240 two-qubit EEG rates.
  const auto& eegs = all_eegs(2);
  Mat D(28, eegs.size());
  for (size_t i = 0; i < eegs.size(); ++i) {
    Deviation d = first_order_deviation(eegs[i]);
    if (d.tp_violation() > 1e-12) throw std::logic_error("EEG deviation is not TP: " + eegs[i].label());
    D.col(i) = vec28(d);
  }
  b.functionals = b.F_inv * D;
  for (long r = 0; r < b.functionals.rows(); ++r)
    for (long c = 0; c < b.functionals.cols(); ++c) {
      double v = b.functionals(r, c);
      if (std::abs(v - std::round(v)) > 1e-9) throw std::logic_error("non-integer FOMGI coefficient");
      b.functionals(r, c) = std::round(v);
    }
  for (size_t j = 0; j < labels.size(); ++j) {
    double c = b.functionals(j, eeg_position(EegIndex::parse(labels[j].rep)));
    if (std::abs(std::abs(c) - 1.0) > 1e-12)
      throw std::logic_error("representative term of " + labels[j].name + " does not have unit weight");
  }
  return b;
}

const FomgiBasis& basis() {
  static const FomgiBasis b = build_basis();
  return b;
}

Deviation deviation_from_strengths(const Vec& s) {
  if (s.size() != 28) throw ValidationError("expected 28 strengths");
  return unvec28(basis().F * s);
}

double StrengthReport::operator[](const std::string& name) const {
  auto it = composites.find(name);
  if (it != composites.end()) return it->second;
  return strengths[fomgi_index(name)];
}

// Composite mechanisms. For each (S, A) pair, damping-like maps with
// probability g give s = g/2 and a = -g/4, so g = s - 2a; the opposite
// direction gives s + 2a. The Gamma strengths are the coefficients of the
// 2S - A and 2S + A unit actions.
std::map<std::string, double> composites_from(const Vec& s) {
  auto v = [&](const char* n) { return s[fomgi_index(n)]; };
  std::map<std::string, double> c;
  c["gamma_meas_down"] = v("s_meas") / 4 - v("a_meas") / 2;
  c["gamma_meas_up"] = v("s_meas") / 4 + v("a_meas") / 2;
  c["pre_mcm_t1"] = v("s_meas") - 2 * v("a_meas");
  c["pre_mcm_excitation"] = v("s_meas") + 2 * v("a_meas");
  c["post_mcm_t1"] = v("s_prep") - 2 * v("a_prep");
  c["post_mcm_excitation"] = v("s_prep") + 2 * v("a_prep");
  c["total_t1"] = c["pre_mcm_t1"] + c["post_mcm_t1"];
  c["readout_error"] = v("s_read");
  c["readout_flip_1to0"] = v("s_read") - 2 * v("a_read");
  c["readout_flip_0to1"] = v("s_read") + 2 * v("a_read");
  c["readout_bias"] = c["readout_flip_1to0"] - c["readout_flip_0to1"];
  double w = 0, wt = 0;
  for (const char* n : {"w0", "w1", "w2", "w3"}) w += v(n) * v(n);
  for (const char* n : {"wt0", "wt1", "wt2", "wt3"}) wt += v(n) * v(n);
  c["weakness"] = std::sqrt(w);
  c["weakness_tilde"] = std::sqrt(wt);
  // Post-measurement rotation angle conditioned on the outcome.
  c["rot_x_post_0"] = 2 * (v("r_x_ind_prep") - v("r_x_dep_prep"));
  c["rot_x_post_1"] = 2 * (v("r_x_ind_prep") + v("r_x_dep_prep"));
  c["rot_y_post_0"] = 2 * (v("r_y_dep_prep") - v("r_y_ind_prep"));
  c["rot_y_post_1"] = -2 * (v("r_y_ind_prep") + v("r_y_dep_prep"));
  return c;
}

StrengthReport extract(const Deviation& dq, double tp_tol) {
  StrengthReport r;
  r.tp_residual = dq.tp_violation();
  if (r.tp_residual > tp_tol)
    throw ValidationError("deviation violates trace preservation (" + std::to_string(r.tp_residual) + ")");
  const FomgiBasis& b = basis();
  Vec q = vec28(dq);
  r.strengths = b.F_inv * q;
  Deviation projected = unvec28(q);
  r.recon_residual = (unvec28(b.F * r.strengths) - projected).norm();
  r.composites = composites_from(r.strengths);
  return r;
}

SectorSummary classify(const StrengthReport& r, double threshold) {
  SectorSummary out;
  const auto& ls = fomgi_labels();
  double best = 0;
  for (size_t j = 0; j < ls.size(); ++j) {
    double v = r.strengths[j];
    out.norms[ls[j].sector] += v * v;
    if (std::abs(v) > threshold) out.sectors[ls[j].sector].push_back({ls[j].name, v});
  }
  for (auto& [s, n] : out.norms) {
    n = std::sqrt(n);
    if (n > threshold && n > best) {
      best = n;
      out.dominant = s;
    }
  }
  out.composites = r.composites;
  return out;
}

void write_report_csv(std::ostream& os, const StrengthReport& r) {
  os << "label,sector,strength,two_sigma\n" << std::setprecision(10);
  const auto& ls = fomgi_labels();
  for (size_t j = 0; j < ls.size(); ++j) {
    os << ls[j].name << ',' << sector_name(ls[j].sector) << ',' << r.strengths[j] << ',';
    if (r.sigma) os << 2 * (*r.sigma)[j];
    os << '\n';
  }
  for (const auto& [k, v] : r.composites) {
    os << k << ",composite," << v << ',';
    auto it = r.composite_sigma.find(k);
    if (it != r.composite_sigma.end()) os << 2 * it->second;
    os << '\n';
  }
}

}  // namespace mcm
