#include "mcm/inference.hpp"

#include <ceres/ceres.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>

namespace mcm {

using nlohmann::json;

double loglikelihood(const GateSet& gs, const CircuitDataset& d) {
  double ll = 0.0;
  for (size_t i = 0; i < d.size(); ++i) {
    auto p = circuit_probability(gs, d.circuits[i]);
    for (size_t o = 0; o < p.size(); ++o)
      if (d.counts[i][o] > 0) ll += d.counts[i][o] * std::log(std::max(p[o], kProbabilityFloor));
  }
  return ll;
}

double saturated_logl(const CircuitDataset& d) {
  double ll = 0.0;
  for (size_t i = 0; i < d.size(); ++i) {
    const double n = static_cast<double>(d.total(i));
    for (long c : d.counts[i])
      if (c > 0) ll += c * std::log(c / n);
  }
  return ll;
}

int k_sat(const CircuitDataset& d) {
  int k = 0;
  for (const auto& c : d.circuits) k += num_outcomes(normalize_circuit(c)) - 1;
  return k;
}

double n_sigma(double two_delta_logl, int k) {
  if (k <= 0) throw ValidationError("n_sigma needs k > 0");
  return (two_delta_logl - k) / std::sqrt(2.0 * k);
}

double evidence_ratio(double two_delta_a, int k_a, double two_delta_b, int k_b) {
  if (k_a == k_b) throw ValidationError("evidence ratio needs different parameter counts");
  if (k_a < k_b) throw ValidationError("evidence ratio: first model must be the larger one");
  return (two_delta_b - two_delta_a) / double(k_a - k_b);
}

double evidence_ratio(const FitReport& larger, const FitReport& reduced) {
  return evidence_ratio(larger.two_delta_logl, larger.k_model, reduced.two_delta_logl, reduced.k_model);
}

namespace {

// Signed deviance residual for one outcome and its derivative in f = N p.
// Sum of squares over a circuit equals 2 (logL_sat - logL) when sum p = 1.
void deviance(double n, double f, double& r, double& drdf) {
  if (n <= 0) {
    r = std::sqrt(2.0 * f);
    drdf = 1.0 / std::sqrt(2.0 * f);
    return;
  }
  const double x = (f - n) / n;
  double D;
  if (std::abs(x) < 1e-3) {
    D = n * x * x * (0.5 - x / 3.0 + x * x / 4.0 - x * x * x / 5.0);
  } else {
    D = n * (x - std::log1p(x));
  }
  r = std::copysign(std::sqrt(2.0 * std::max(D, 0.0)), x);
  if (x == 0.0 || r == 0.0) {
    drdf = 1.0 / std::sqrt(n);
  } else {
    drdf = x * n / (f * r);
  }
}

class DevianceCost : public ceres::CostFunction {
 public:
  DevianceCost(const Parameterization& P, const CircuitDataset& d) : P_(P), d_(d) {
    int nres = 0;
    for (const auto& c : d.circuits) nres += num_outcomes(normalize_circuit(c));
    set_num_residuals(nres);
    mutable_parameter_block_sizes()->push_back(P.size());
  }

  bool Evaluate(double const* const* params, double* residuals, double** jacobians) const override {
    const int n = P_.size();
    Vec x = Eigen::Map<const Vec>(params[0], n);
    Mat Jf;
    Vec m;
    const bool want = jacobians && jacobians[0];
    try {
      m = P_.flat(x, want ? &Jf : nullptr);
    } catch (const ValidationError&) {
      return false;
    }
    Mat G;
    if (want) G.setZero(num_residuals(), kFlatSize);
    int row = 0;
    std::vector<double> p;
    Mat dp;
    for (size_t i = 0; i < d_.size(); ++i) {
      circuit_probability_grad(m, P_.spec().stark, d_.circuits[i], p, dp);
      const double N = static_cast<double>(d_.total(i));
      for (size_t o = 0; o < p.size(); ++o, ++row) {
        if (N <= 0) {
          residuals[row] = 0.0;
          continue;
        }
        const bool floored = !(p[o] > kProbabilityFloor);
        const double pc = floored ? kProbabilityFloor : p[o];
        double r, drdf;
        deviance(static_cast<double>(d_.counts[i][o]), N * pc, r, drdf);
        if (!std::isfinite(r)) return false;
        residuals[row] = r;
        if (want && !floored) G.row(row) = (drdf * N) * dp.row(o);
      }
    }
    if (want) {
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> J(
          jacobians[0], num_residuals(), n);
      J = G * Jf;
    }
    return true;
  }

  // Half the deviance and its gradient, without forming the full Jacobian.
  bool Gradient(const double* x, double* cost, double* grad) const {
    const int n = P_.size();
    Mat Jf;
    Vec m;
    try {
      m = P_.flat(Eigen::Map<const Vec>(x, n), grad ? &Jf : nullptr);
    } catch (const ValidationError&) {
      return false;
    }
    Vec gm = Vec::Zero(kFlatSize);
    double c = 0.0;
    std::vector<double> p;
    Mat dp;
    for (size_t i = 0; i < d_.size(); ++i) {
      circuit_probability_grad(m, P_.spec().stark, d_.circuits[i], p, dp);
      const double N = static_cast<double>(d_.total(i));
      if (N <= 0) continue;
      for (size_t o = 0; o < p.size(); ++o) {
        const bool floored = !(p[o] > kProbabilityFloor);
        double r, drdf;
        deviance(static_cast<double>(d_.counts[i][o]), N * (floored ? kProbabilityFloor : p[o]), r, drdf);
        if (!std::isfinite(r)) return false;
        c += 0.5 * r * r;
        if (grad && !floored) gm += (r * drdf * N) * dp.row(o).transpose();
      }
    }
    *cost = c;
    if (grad) Eigen::Map<Vec>(grad, n) = Jf.transpose() * gm;
    return true;
  }

 private:
  const Parameterization& P_;
  const CircuitDataset& d_;
};

constexpr int kStallPatience = 3;
constexpr int kPolishWindow = 50;
constexpr double kBoundaryRegularization = 1e-8;

class DevianceObjective : public ceres::FirstOrderFunction {
 public:
  DevianceObjective(const Parameterization& P, const CircuitDataset& d) : cost_(P, d), n_(P.size()) {}
  bool Evaluate(const double* x, double* cost, double* grad) const override { return cost_.Gradient(x, cost, grad); }
  int NumParameters() const override { return n_; }

 private:
  DevianceCost cost_;
  int n_;
};

struct StartResult {
  Vec x;
  double cost = 0.0;
  int iterations = 0;
  double gradient = 0.0;
  bool converged = false;
};

// Stops once `patience` consecutive accepted steps each change logL by less
// than rel_tol * |logL|. A single small step is not enough: near the boundary
// of the CP set progress can stall for a step and then resume.
class RelativeLoglStop : public ceres::IterationCallback {
 public:
  RelativeLoglStop(double logl_sat, double rel_tol, int patience)
      : sat_(std::abs(logl_sat)), tol_(rel_tol), patience_(patience) {}
  ceres::CallbackReturnType operator()(const ceres::IterationSummary& it) override {
    if (it.iteration == 0 || !it.step_is_successful) return ceres::SOLVER_CONTINUE;
    small_ = it.cost_change < tol_ * (sat_ + it.cost) ? small_ + 1 : 0;
    return small_ >= patience_ ? ceres::SOLVER_TERMINATE_SUCCESSFULLY : ceres::SOLVER_CONTINUE;
  }

 private:
  double sat_, tol_;
  int patience_, small_ = 0;
};

// Line-search analogue: stops once logL has improved by less than
// rel_tol * |logL| over the last `window` iterations.
class WindowedLoglStop : public ceres::IterationCallback {
 public:
  WindowedLoglStop(double logl_sat, double rel_tol, int window)
      : sat_(std::abs(logl_sat)), tol_(rel_tol), window_(window) {}
  ceres::CallbackReturnType operator()(const ceres::IterationSummary& it) override {
    costs_.push_back(it.cost);
    if (static_cast<int>(costs_.size()) <= window_) return ceres::SOLVER_CONTINUE;
    const double gain = costs_.front() - it.cost;
    costs_.pop_front();
    return gain < tol_ * (sat_ + it.cost) ? ceres::SOLVER_TERMINATE_SUCCESSFULLY : ceres::SOLVER_CONTINUE;
  }

 private:
  double sat_, tol_;
  int window_;
  std::deque<double> costs_;
};

StartResult run_start(const Parameterization& P, const CircuitDataset& d, Vec x, const FitOptions& opt,
                      double logl_sat) {
  ceres::Problem::Options popt;
  popt.cost_function_ownership = ceres::TAKE_OWNERSHIP;
  ceres::Problem problem(popt);
  problem.AddResidualBlock(new DevianceCost(P, d), nullptr, x.data());
  ceres::Solver::Options o;
  o.minimizer_type = ceres::TRUST_REGION;
  o.trust_region_strategy_type = ceres::LEVENBERG_MARQUARDT;
  o.linear_solver_type = ceres::DENSE_QR;
  o.max_num_iterations = opt.max_iterations;
  o.function_tolerance = 1e-14;
  o.gradient_tolerance = 1e-6;
  o.parameter_tolerance = 1e-12;
  o.num_threads = 1;
  o.logging_type = ceres::SILENT;
  o.minimizer_progress_to_stdout = false;
  // cost = logL_sat - logL, so |logL| = |logL_sat| + cost for logL_sat <= 0
  RelativeLoglStop stop(logl_sat, 1e-10, kStallPatience);
  o.callbacks.push_back(&stop);
  ceres::Solver::Summary s;
  ceres::Solve(o, &problem, &s);

  StartResult r;
  r.converged = s.termination_type == ceres::CONVERGENCE || s.termination_type == ceres::USER_SUCCESS;
  r.iterations = static_cast<int>(s.iterations.size());
  ceres::GradientProblem gp(new DevianceObjective(P, d));
  if (opt.polish_iterations > 0) {
    // LM on square-root residuals zig-zags where several zero-count outcomes
    // pin the optimum to the CP boundary; L-BFGS on the deviance itself does not.
    ceres::GradientProblemSolver::Options go;
    go.max_num_iterations = opt.polish_iterations;
    go.function_tolerance = 1e-14;
    go.gradient_tolerance = 1e-10;
    go.parameter_tolerance = 1e-14;
    go.max_lbfgs_rank = 50;
    go.logging_type = ceres::SILENT;
    WindowedLoglStop polish_stop(logl_sat, 1e-10, kPolishWindow);
    go.callbacks.push_back(&polish_stop);
    ceres::GradientProblemSolver::Summary gs;
    ceres::Solve(go, gp, x.data(), &gs);
    r.iterations += static_cast<int>(gs.iterations.size());
    r.converged = gs.termination_type == ceres::CONVERGENCE || gs.termination_type == ceres::USER_SUCCESS;
  }
  r.x = x;
  Vec g(P.size());
  gp.Evaluate(x.data(), &r.cost, g.data());
  r.gradient = g.cwiseAbs().maxCoeff();
  return r;
}

}  // namespace

FitReport fit(const CircuitDataset& d, const ModelSpec& spec, const FitOptions& opt) {
  d.validate();
  if (opt.starts < 1) throw ValidationError("need at least one start");
  Parameterization P(spec);
  Vec x0;
  if (opt.init_params) {
    x0 = *opt.init_params;
    if (x0.size() != P.size()) throw ValidationError("initial parameter vector has the wrong length");
  } else {
    x0 = P.from_gateset(opt.init ? *opt.init : ideal_gateset(), opt.init_regularization);
  }

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, opt.perturbation);
  std::optional<StartResult> best;
  const double lsat = saturated_logl(d);
  for (int s = 0; s < opt.starts; ++s) {
    Vec x = x0;
    if (s == 1 && opt.boundary_start && !opt.init_params) {
      // Nearly rank-deficient seed: reaches boundary optima (pure states,
      // unitary gates) that the regularized seed only creeps towards.
      x = P.from_gateset(opt.init ? *opt.init : ideal_gateset(), kBoundaryRegularization);
    } else if (s > 0) {
      for (int i = 0; i < x.size(); ++i) x[i] += gauss(rng);
    }
    StartResult r = run_start(P, d, x, opt, lsat);
    if (!best || r.cost < best->cost) best = r;
  }

  FitReport rep;
  rep.spec = spec;
  rep.params = best->x;
  rep.gateset = P.instantiate(best->x);
  rep.logl = loglikelihood(rep.gateset, d);
  rep.two_delta_logl = 2.0 * (saturated_logl(d) - rep.logl);
  rep.k_model = spec.nominal_params();
  rep.k_sat = k_sat(d);
  rep.n_sigma = n_sigma(rep.two_delta_logl, rep.k_sat - rep.k_model);
  rep.iterations = best->iterations;
  rep.gradient_norm = best->gradient;
  rep.converged = best->converged;
  return rep;
}

// ---------------------------------------------------------------- gauge

namespace {

struct GaugeCost {
  GaugeCost(const GateSet& fit, const GateSet& target, const GaugeWeights& w) : w_(w) {
    f_ = flatten(fit);
    t_ = flatten(target);
  }

  template <class T>
  bool operator()(const T* g, T* res) const {
    using M4 = Eigen::Matrix<T, 4, 4>;
    M4 M = M4::Zero();
    M(0, 0) = T(1.0);
    for (int r = 1; r < 4; ++r)
      for (int c = 0; c < 4; ++c) M(r, c) = g[4 * (r - 1) + c];
    M4 Mi = M.inverse();
    auto mat = [&](int off) {
      M4 a;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) a(r, c) = T(f_[off + 4 * r + c]);
      return a;
    };
    int k = 0;
    const double ws = std::sqrt(w_.spam), wg = std::sqrt(w_.gates), wm = std::sqrt(w_.mcm);
    Eigen::Matrix<T, 4, 1> rho;
    for (int r = 0; r < 4; ++r) rho[r] = T(f_[flat::rho + r]);
    Eigen::Matrix<T, 4, 1> rr = M * rho;
    for (int r = 0; r < 4; ++r) res[k++] = ws * (rr[r] - t_[flat::rho + r]);
    for (int off : {flat::e0, flat::e1}) {
      Eigen::Matrix<T, 1, 4> e;
      for (int r = 0; r < 4; ++r) e[r] = T(f_[off + r]);
      Eigen::Matrix<T, 1, 4> ee = e * Mi;
      for (int r = 0; r < 4; ++r) res[k++] = ws * (ee[r] - t_[off + r]);
    }
    for (int off : {flat::gi, flat::gx, flat::gy, flat::q0, flat::q1}) {
      const double w = (off == flat::q0 || off == flat::q1) ? wm : wg;
      M4 a = M * mat(off) * Mi;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) res[k++] = w * (a(r, c) - t_[off + 4 * r + c]);
    }
    return true;
  }

  static constexpr int kResiduals = 12 + 16 * 5;

 private:
  Vec f_, t_;
  GaugeWeights w_;
};

}  // namespace

double gateset_distance(const GateSet& a, const GateSet& b, const GaugeWeights& w) {
  Vec fa = flatten(a), fb = flatten(b);
  double s = 0.0;
  auto seg = [&](int off, int len, double wt) { s += wt * (fa.segment(off, len) - fb.segment(off, len)).squaredNorm(); };
  seg(flat::rho, 12, w.spam);
  seg(flat::gi, 48, w.gates);
  seg(flat::q0, 32, w.mcm);
  return std::sqrt(s);
}

GaugeResult gauge_align(const GateSet& fitgs, const GateSet& target, const GaugeWeights& w) {
  double g[12] = {0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  ceres::Problem problem;
  problem.AddResidualBlock(
      new ceres::AutoDiffCostFunction<GaugeCost, GaugeCost::kResiduals, 12>(new GaugeCost(fitgs, target, w)),
      nullptr, g);
  ceres::Solver::Options o;
  o.linear_solver_type = ceres::DENSE_QR;
  o.max_num_iterations = 200;
  o.function_tolerance = 1e-16;
  o.gradient_tolerance = 1e-16;
  o.parameter_tolerance = 1e-14;
  o.logging_type = ceres::SILENT;
  ceres::Solver::Summary s;
  ceres::Solve(o, &problem, &s);
  Mat4 M = Mat4::Zero();
  M(0, 0) = 1.0;
  for (int r = 1; r < 4; ++r)
    for (int c = 0; c < 4; ++c) M(r, c) = g[4 * (r - 1) + c];
  GaugeResult out;
  out.M = M;
  out.gateset = gauge_transform(fitgs, M);
  out.distance = gateset_distance(out.gateset, target, w);
  return out;
}

StrengthReport decompose(const GateSet& aligned, const GateSet& target) {
  return extract(difference(aligned.mcm, target.mcm), 1e-7);
}

// ---------------------------------------------------------------- bootstrap

BootstrapResult bootstrap(const FitReport& f, const CircuitDataset& d, const GateSet& target, int n,
                          std::uint64_t seed, int jobs) {
  if (n < 2) throw ValidationError("bootstrap needs at least 2 resamples");
  basis();  // build shared caches before spawning workers
  BootstrapResult out;
  std::vector<std::optional<StrengthReport>> reps(n);
  std::mutex mu;
  int next = 0;
  auto worker = [&]() {
    for (;;) {
      int b;
      {
        std::lock_guard<std::mutex> lk(mu);
        if (next >= n) return;
        b = next++;
      }
      try {
        CircuitDataset rs;
        rs.circuits = d.circuits;
        rs.shots_per_circuit = d.shots_per_circuit;
        rs.seed = seed;
        for (size_t i = 0; i < d.size(); ++i) {
          auto p = sanitize_probabilities(circuit_probability(f.gateset, d.circuits[i]));
          rs.counts.push_back(sample_counts(p, d.total(i), seed + 7919ULL * (b + 1), i));
        }
        FitOptions o;
        o.starts = 1;
        o.init_params = f.params;
        FitReport r = fit(rs, f.spec, o);
        reps[b] = decompose(gauge_align(r.gateset, target).gateset, target);
      } catch (const std::exception&) {
        // counted as a failure below
      }
    }
  };
  const int nt = std::max(1, std::min(jobs, n));
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (auto& r : reps) {
    if (!r) {
      ++out.failures;
      continue;
    }
    out.strengths.push_back(r->strengths);
    out.composites.push_back(r->composites);
  }
  const int m = static_cast<int>(out.strengths.size());
  if (m < 2) throw std::runtime_error("bootstrap: fewer than two successful resamples");
  Vec mean = Vec::Zero(out.strengths[0].size());
  for (const auto& s : out.strengths) mean += s;
  mean /= m;
  out.sigma = Vec::Zero(mean.size());
  for (const auto& s : out.strengths) out.sigma += (s - mean).cwiseAbs2();
  out.sigma = (out.sigma / (m - 1)).cwiseSqrt();
  for (const auto& [k, _] : out.composites[0]) {
    double mu = 0, var = 0;
    for (const auto& c : out.composites) mu += c.at(k);
    mu /= m;
    for (const auto& c : out.composites) var += (c.at(k) - mu) * (c.at(k) - mu);
    out.composite_sigma[k] = std::sqrt(var / (m - 1));
  }
  return out;
}

void attach_sigma(StrengthReport& r, const BootstrapResult& b) {
  r.sigma = b.sigma;
  r.composite_sigma = b.composite_sigma;
}

// ---------------------------------------------------------------- reports

void compare_models(std::vector<FitReport>& fits, const std::string& reference) {
  const FitReport* ref = nullptr;
  for (const auto& f : fits)
    if (f.tag() == reference) ref = &f;
  if (!ref) return;
  const FitReport refc = *ref;
  for (auto& f : fits) {
    if (f.tag() == reference || f.k_model == refc.k_model) continue;
    f.gamma[reference] = f.k_model < refc.k_model ? evidence_ratio(refc, f) : evidence_ratio(f, refc);
  }
}

void write_comparison_csv(std::ostream& os, const std::vector<FitReport>& fits, const std::string& reference) {
  os << "model,params,two_delta_logl,n_sigma,gamma\n";
  os << std::setprecision(10);
  for (const auto& f : fits) {
    os << f.tag() << "," << f.k_model << "," << f.two_delta_logl << "," << f.n_sigma << ",";
    auto it = f.gamma.find(reference);
    if (it != f.gamma.end()) os << it->second;
    os << "\n";
  }
}

namespace {

json mat_json(const Mat4& m) {
  json a = json::array();
  for (int r = 0; r < 4; ++r) a.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return a;
}
json vec_json(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

Mat4 mat_from(const json& j) {
  Mat4 m;
  if (j.size() != 4) throw ValidationError("PTM must be 4x4");
  for (int r = 0; r < 4; ++r) {
    if (j[r].size() != 4) throw ValidationError("PTM must be 4x4");
    for (int c = 0; c < 4; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}
Vec4 vec_from(const json& j) {
  if (j.size() != 4) throw ValidationError("Pauli vector must have 4 entries");
  return Vec4(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

json gateset_j(const GateSet& gs) {
  json j;
  j["rho"] = vec_json(gs.rho);
  j["povm"] = {vec_json(gs.povm[0]), vec_json(gs.povm[1])};
  for (const auto& [k, g] : gs.gates) j["gates"][k] = mat_json(g);
  j["mcm"] = {mat_json(gs.mcm.q[0]), mat_json(gs.mcm.q[1])};
  j["stark"] = gs.stark;
  j["stark_phi"] = gs.stark_phi;
  return j;
}

}  // namespace

std::string gateset_to_json(const GateSet& gs, int indent) { return gateset_j(gs).dump(indent); }

GateSet gateset_from_json(const std::string& text) {
  try {
    json j = json::parse(text);
    GateSet gs;
    gs.rho = vec_from(j.at("rho"));
    gs.povm[0] = vec_from(j.at("povm").at(0));
    gs.povm[1] = vec_from(j.at("povm").at(1));
    for (const auto& l : kGateLabels) gs.gates[l] = mat_from(j.at("gates").at(l));
    gs.mcm.q[0] = mat_from(j.at("mcm").at(0));
    gs.mcm.q[1] = mat_from(j.at("mcm").at(1));
    if (j.value("stark", false)) gs = apply_stark(gs, j.value("stark_phi", 0.0));
    check_instrument(gs.mcm, 1e-8);
    return gs;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed gate-set JSON: ") + e.what());
  }
}

std::string fit_report_json(const FitReport& r, const StrengthReport* s) {
  json j;
  j["model"] = r.tag();
  j["loglikelihood"] = r.logl;
  j["two_delta_logl"] = r.two_delta_logl;
  j["k_model"] = r.k_model;
  j["k_sat"] = r.k_sat;
  j["n_sigma"] = r.n_sigma;
  j["gamma"] = r.gamma;
  j["optimizer"] = {{"iterations", r.iterations}, {"gradient_norm", r.gradient_norm}, {"converged", r.converged}};
  j["params"] = std::vector<double>(r.params.data(), r.params.data() + r.params.size());
  j["gateset"] = gateset_j(r.gateset);
  if (s) {
    json st = json::object();
    const auto& labels = fomgi_labels();
    for (size_t i = 0; i < labels.size(); ++i) {
      json e = {{"strength", s->strengths[i]}};
      if (s->sigma) e["sigma"] = (*s->sigma)[i];
      st[labels[i].name] = e;
    }
    j["strengths"] = st;
    j["composites"] = s->composites;
    if (!s->composite_sigma.empty()) j["composite_sigma"] = s->composite_sigma;
  }
  return j.dump(1);
}

}  // namespace mcm
