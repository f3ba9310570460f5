#include "mcm/reference.hpp"

#include "mcm/eeg.hpp"
#include "mcm/inference.hpp"

#include <cctype>
#include <cmath>
#include <regex>
#include <sstream>

namespace mcm {

const std::map<std::string, std::string>& fomgi_rate_combinations() {
  static const std::map<std::string, std::string> m = {
      {"s_meas", "s_{xx} + s_{yx} + s_{xy} + s_{yy} - 2c_{xxyy} + 2c_{xyyx}"},
      {"s_prep", "s_{xi} + s_{yi} + s_{xz} + s_{yz} + 2a_{xiyz} + 2a_{xzyi}"},
      {"s_read", "s_{ix} + s_{iy} + s_{zx} + s_{zy} + 2a_{ixzy} - 2a_{iyzx}"},
      {"a_meas", "a_{xxyx} + a_{xxxy} + a_{xyyy} + a_{yxyy}"},
      {"a_prep", "a_{xiyi} + a_{xzyz} + c_{xixz} + c_{yiyz}"},
      {"a_read", "a_{ixiy} + a_{zxzy} + c_{ixzx} + c_{iyzy}"},
      {"r_x_meas", "h_{xx} - h_{yy} - a_{xxzz} + a_{yyzz} + c_{izxy} + c_{izyx} + c_{xyzi} + c_{yxzi}"},
      {"r_y_meas", "h_{yx} + h_{xy} - a_{xyzz} - a_{yxzz} - c_{izxx} + c_{izyy} - c_{xxzi} + c_{yyzi}"},
      {"r_x_ind_prep",
       "h_{xi} + a_{ixyy} - a_{iyyx} + a_{izxz} - 2a_{xizz} - 2a_{xzzi} + c_{xxzy} - c_{xyzx} - c_{yizi} - c_{yzzz}"},
      {"r_x_dep_prep",
       "h_{xz} + a_{izxi} - 2a_{xizi} - a_{xxzx} - a_{xyzy} - 2a_{xzzz} + c_{ixyx} + c_{iyyy} - c_{yizz} - c_{yzzi}"},
      {"r_y_ind_prep",
       "h_{yi} - a_{ixxy} + a_{iyxx} + a_{izyz} - 2a_{yizz} - 2a_{yzzi} + c_{xizi} + c_{xzzz} + c_{yxzy} - c_{yyzx}"},
      {"r_y_dep_prep",
       "h_{yz} + a_{izyi} - 2a_{yizi} - a_{yxzx} - a_{yyzy} - 2a_{yzzz} - c_{ixxx} - c_{iyxy} + c_{xizz} + c_{xzzi}"},
      {"rt_x_meas", "a_{ixxi} - a_{iyyi} + a_{xzzx} - a_{yzzy} - c_{ixyz} - c_{iyxz} + c_{xizy} + c_{yizx}"},
      {"rt_y_meas", "a_{ixyi} + a_{iyxi} + a_{xzzy} + a_{yzzx} + c_{ixxz} - c_{iyyz} - c_{xizx} + c_{yizy}"},
      {"rt_xz_meas", "a_{ixxz} - a_{iyyz} + a_{xizx} - a_{yizy} - c_{ixyi} - c_{iyxi} + c_{xzzy} + c_{yzzx}"},
      {"rt_yz_meas", "a_{ixyz} + a_{iyxz} + a_{xizy} + a_{yizx} + c_{ixxi} - c_{iyyi} - c_{xzzx} + c_{yzzy}"},
      {"rt_x_ind_prep", "a_{ixxx} - a_{ixyy} + a_{iyxy} + a_{iyyx} + c_{xxzy} - c_{xyzx} - c_{yxzx} - c_{yyzy}"},
      {"rt_x_dep_prep", "a_{xxzx} + a_{xyzy} + a_{yxzy} - a_{yyzx} + c_{ixxy} + c_{ixyx} - c_{iyxx} + c_{iyyy}"},
      {"rt_y_ind_prep", "a_{xxzy} - a_{xyzx} - a_{yxzx} - a_{yyzy} + c_{ixxx} - c_{ixyy} + c_{iyxy} + c_{iyyx}"},
      {"rt_y_dep_prep", "a_{ixxy} + a_{ixyx} - a_{iyxx} + a_{iyyy} + c_{xxzx} + c_{xyzy} + c_{yxzy} - c_{yyzx}"},
      {"w0",
       "h_{zy} + a_{iyzi} - a_{xyxz} - a_{yyyz} - 2a_{zyzz} + c_{ixzz} - c_{izzx} - c_{xixx} - c_{yiyx} - 2c_{zizx}"},
      {"w1",
       "h_{iy} - 2a_{iyzz} - a_{xiyx} - a_{xxyi} - a_{zizy} - c_{ixiz} - 2c_{ixzi} + c_{xyyz} - c_{xzyy} + c_{zxzz}"},
      {"w2",
       "h_{zx} + a_{ixzi} - a_{xxxz} - a_{yxyz} - 2a_{zxzz} - c_{iyzz} + c_{izzy} + c_{xixy} + c_{yiyy} + 2c_{zizy}"},
      {"w3",
       "h_{ix} - 2a_{ixzz} + a_{xiyy} + a_{xyyi} - a_{zizx} + c_{iyiz} + 2c_{iyzi} + c_{xxyz} - c_{xzyx} - c_{zyzz}"},
      {"wt0", "-a_{xxxz} + a_{xyyz} - a_{xzyy} + a_{yxyz} + c_{xixy} + c_{xiyx} + c_{xxyi} - c_{yiyy}"},
      {"wt1", "-a_{xxyz} - a_{xyxz} + a_{xzyx} + a_{yyyz} - c_{xixx} + c_{xiyy} + c_{xyyi} + c_{yiyx}"},
      {"wt2", "-a_{xixx} + a_{xiyy} - a_{xyyi} + a_{yiyx} - c_{xxyz} - c_{xyxz} - c_{xzyx} + c_{yyyz}"},
      {"wt3", "-a_{xixy} - a_{xiyx} + a_{xxyi} + a_{yiyy} + c_{xxxz} - c_{xyyz} - c_{xzyy} - c_{yxyz}"},
  };
  return m;
}

Vec parse_rate_combination(const std::string& expr) {
  static const std::regex term(R"(([+-]?)\s*(\d*)\s*([hsca])_\{\s*([ixyz]+)\s*\})");
  Vec v = Vec::Zero(all_eegs(2).size());
  auto begin = std::sregex_iterator(expr.begin(), expr.end(), term);
  size_t consumed = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    for (size_t k = consumed; k < (size_t)m.position(); ++k)
      if (!std::isspace(static_cast<unsigned char>(expr[k]))) throw ValidationError("cannot parse rate combination: " + expr);
    consumed = m.position() + m.length();
    double c = m[2].str().empty() ? 1.0 : std::stod(m[2].str());
    if (m[1].str() == "-") c = -c;
    std::string lab = m[4].str();
    for (auto& ch : lab) ch = static_cast<char>(std::toupper(ch));
    const char t = m[3].str()[0];
    EegIndex idx;
    if (t == 'h' || t == 's') {
      if (lab.size() != 2) throw ValidationError("bad rate label in: " + expr);
      idx = t == 'h' ? eeg_h(lab) : eeg_s(lab);
      if (t == 'h') c = -c;
    } else {
      if (lab.size() != 4) throw ValidationError("bad rate label in: " + expr);
      idx = t == 'c' ? eeg_c(lab.substr(0, 2), lab.substr(2)) : eeg_a(lab.substr(0, 2), lab.substr(2));
      c *= idx.canonicalize();
    }
    v[eeg_position(idx)] += c;
  }
  for (size_t k = consumed; k < expr.size(); ++k)
    if (!std::isspace(static_cast<unsigned char>(expr[k]))) throw ValidationError("cannot parse rate combination: " + expr);
  return v;
}

const std::vector<ComparisonRow>& reference_comparison() {
  static const std::vector<ComparisonRow> t = {
      {"CPTP+Stark", 60, 166, 1.6, std::nullopt},
      {"MPR+Stark", 43, 192, 2.0, 1.5},
      {"MPR", 42, 313, 8.8, 8.4},
      {"CPTP", 59, 284, 8.5, 118},
      {"USI", 34, 15290, 830, 582},
  };
  return t;
}

namespace {
std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}
}  // namespace

std::vector<CheckLine> check_fomgi_tables() {
  std::vector<CheckLine> out;
  const FomgiBasis& b = basis();  // throws if generated deviations disagree with the unit actions
  const auto& labels = fomgi_labels();
  const auto& actions = reference_unit_actions();
  int act_ok = 0;
  for (size_t j = 0; j < labels.size(); ++j)
    if ((b.deviations[j] - deviation_from_action(actions[j])).norm() < 1e-14) ++act_ok;
  out.push_back({"unit actions", act_ok == 28, std::to_string(act_ok) + "/28 generated deviations match"});
  int comb_ok = 0;
  std::string bad;
  for (size_t j = 0; j < labels.size(); ++j) {
    Vec v = parse_rate_combination(fomgi_rate_combinations().at(labels[j].name));
    if ((b.functionals.row(j).transpose() - v).cwiseAbs().maxCoeff() == 0.0)
      ++comb_ok;
    else
      bad += " " + labels[j].name;
  }
  out.push_back({"rate combinations", comb_ok == 28, std::to_string(comb_ok) + "/28 functionals match" + bad});
  return out;
}

std::vector<CheckLine> check_comparison_statistics() {
  std::vector<CheckLine> out;
  const auto& rows = reference_comparison();
  const ComparisonRow& ref = rows[0];
  for (const auto& r : rows) {
    const int k = kReferenceSaturatedParams - r.params;
    const double ns = n_sigma(r.two_delta_logl, k);
    const double tol = r.model == "USI" ? 1.0 : 0.15;
    bool ok = std::abs(ns - r.n_sigma) <= tol;
    std::string d = "N_sigma " + fmt(ns) + " (table " + fmt(r.n_sigma) + ")";
    if (r.gamma) {
      const double g = evidence_ratio(ref.two_delta_logl, ref.params, r.two_delta_logl, r.params);
      const double gtol = r.model == "CPTP" ? 0.0 : (r.model == "USI" ? 1.0 : 0.4);
      ok = ok && std::abs(g - *r.gamma) <= gtol + 1e-12;
      d += ", gamma " + fmt(g) + " (table " + fmt(*r.gamma) + ")";
    }
    out.push_back({r.model, ok, d});
  }
  return out;
}

}  // namespace mcm
