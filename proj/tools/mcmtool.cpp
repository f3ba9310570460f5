// mcmtool: simulate / fit / decompose / compare / sweep / postselect / selftest
#include "mcm/inference.hpp"
#include "mcm/iq_readout.hpp"
#include "mcm/reference.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mcm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNoConvergence = 3;

struct NonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string models;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw ValidationError("cannot write '" + p.string() + "'");
  out << text;
}

json load_config(const Options& o) {
  std::string path = o.config;
  if (path.empty())
    if (const char* env = std::getenv("MCM_CONFIG")) path = env;
  if (path.empty()) return json::object();
  try {
    json j = json::parse(read_file(path));
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ValidationError("malformed config '" + path + "': " + e.what());
  }
}

TruthModelConfig truth_from(const json& j) {
  TruthModelConfig c;
  if (!j.is_object()) throw ValidationError("truth must be an object");
  static const std::map<std::string, double TruthModelConfig::*> fields = {
      {"t1_pre", &TruthModelConfig::t1_pre},           {"t1_post", &TruthModelConfig::t1_post},
      {"thermal_up", &TruthModelConfig::thermal_up},   {"readout_flip", &TruthModelConfig::readout_flip},
      {"weakness_angle", &TruthModelConfig::weakness_angle}, {"post_z_angle", &TruthModelConfig::post_z_angle},
      {"stark_phi", &TruthModelConfig::stark_phi},     {"gate_depol", &TruthModelConfig::gate_depol},
      {"idle_damping", &TruthModelConfig::idle_damping}, {"mcm_depol", &TruthModelConfig::mcm_depol},
      {"spam_error", &TruthModelConfig::spam_error}};
  for (const auto& [k, v] : j.items()) {
    auto it = fields.find(k);
    if (it == fields.end()) throw ValidationError("unknown truth-model field '" + k + "'");
    if (!v.is_number()) throw ValidationError("truth-model field '" + k + "' must be a number");
    c.*(it->second) = v.get<double>();
  }
  c.validate();
  return c;
}

IqConfig iq_from(const json& j) {
  IqConfig c;
  if (j.contains("leak_prob")) c.leak_prob = j["leak_prob"].get<double>();
  if (j.contains("seepage")) c.seepage = j["seepage"].get<double>();
  if (j.contains("centroids"))
    for (int k = 0; k < 3; ++k) c.centroids[k] = {j["centroids"].at(k).at(0).get<double>(), j["centroids"].at(k).at(1).get<double>()};
  if (j.contains("sigma"))
    for (int k = 0; k < 3; ++k) c.sigma[k] = j["sigma"].at(k).get<double>();
  c.validate();
  return c;
}

template <class T>
T get_or(const json& cfg, const char* key, T def) {
  if (!cfg.contains(key)) return def;
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config field '") + key + "': " + e.what());
  }
}

std::uint64_t seed_of(const Options& o, const json& cfg) { return o.seed ? *o.seed : get_or<std::uint64_t>(cfg, "seed", 0); }

std::vector<ModelSpec> models_of(const Options& o, const json& cfg, const std::string& def) {
  if (!o.models.empty()) return parse_model_list(o.models);
  if (cfg.contains("models")) {
    std::string csv;
    for (const auto& m : cfg["models"]) csv += m.get<std::string>() + ",";
    return parse_model_list(csv);
  }
  return parse_model_list(def);
}

fs::path out_dir(const Options& o) {
  fs::path p(o.out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw ValidationError("cannot create output directory '" + o.out + "'");
  return p;
}

CircuitDataset load_dataset(const Options& o, const json& cfg) {
  std::string path = get_or<std::string>(cfg, "dataset", (fs::path(o.out) / "dataset.json").string());
  return dataset_from_json(read_file(path));
}

GateSet target_of(const json& cfg) {
  if (cfg.contains("target")) return gateset_from_json(read_file(cfg["target"].get<std::string>()));
  return ideal_gateset();
}

FitOptions fit_options(const json& cfg, std::uint64_t seed) {
  FitOptions f;
  f.starts = get_or(cfg, "starts", 5);
  f.perturbation = get_or(cfg, "perturbation", 0.01);
  f.max_iterations = get_or(cfg, "max_iterations", 500);
  f.polish_iterations = get_or(cfg, "polish_iterations", 3000);
  if (f.starts < 1 || f.max_iterations < 0 || f.polish_iterations < 0)
    throw ValidationError("starts must be positive and iteration limits nonnegative");
  f.seed = seed;
  return f;
}

// ------------------------------------------------------------------ commands

int cmd_simulate(const Options& o) {
  json cfg = load_config(o);
  const auto seed = seed_of(o, cfg);
  const long shots = get_or<long>(cfg, "shots", 8000);
  TruthModelConfig tc = truth_from(get_or(cfg, "truth", json::object()));
  GateSet truth = build_truth_model(tc);
  auto design = design_circuits();
  auto d = sample_dataset(truth, design.circuits, shots, seed);
  fs::path out = out_dir(o);
  write_file(out / "dataset.json", dataset_to_json(d));
  std::ofstream csv(out / "dataset.csv");
  write_dataset_csv(csv, d);
  write_file(out / "truth_gateset.json", gateset_to_json(truth, 1));
  write_file(out / "truth_strengths.json",
             json(extract(difference(truth.mcm, ideal_instrument()), 1e-7).composites).dump(1));
  std::cout << "simulated " << d.size() << " circuits x " << shots << " shots -> " << (out / "dataset.json").string()
            << "\n";
  return kExitOk;
}

std::vector<FitReport> fit_all(const CircuitDataset& d, const std::vector<ModelSpec>& specs, const FitOptions& fo,
                               int jobs) {
  std::vector<FitReport> fits(specs.size());
  std::vector<std::string> errors(specs.size());
  std::mutex mu;
  size_t next = 0;
  auto worker = [&]() {
    for (;;) {
      size_t i;
      {
        std::lock_guard<std::mutex> lk(mu);
        if (next >= specs.size()) return;
        i = next++;
      }
      try {
        fits[i] = fit(d, specs[i], fo);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min<int>(jobs, specs.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (size_t i = 0; i < specs.size(); ++i)
    if (!errors[i].empty()) throw ValidationError(specs[i].tag() + ": " + errors[i]);
  return fits;
}

std::string file_tag(std::string t) {
  for (auto& c : t)
    if (c == '+') c = '_';
  return t;
}

int cmd_fit(const Options& o) {
  json cfg = load_config(o);
  const auto seed = seed_of(o, cfg);
  auto d = load_dataset(o, cfg);
  auto specs = models_of(o, cfg, "CPTP");
  GateSet target = target_of(cfg);
  auto fits = fit_all(d, specs, fit_options(cfg, seed), o.jobs);
  fs::path out = out_dir(o);
  bool all_conv = true;
  for (auto& f : fits) {
    f.gateset = gauge_align(f.gateset, target).gateset;
    write_file(out / ("fit_" + file_tag(f.tag()) + ".json"), fit_report_json(f));
    std::cout << std::left << std::setw(12) << f.tag() << " 2dlogL=" << f.two_delta_logl << " N_sigma=" << f.n_sigma
              << (f.converged ? "" : "  (not converged)") << "\n";
    all_conv = all_conv && f.converged;
  }
  if (!all_conv) throw NonConvergence("at least one fit did not converge; best iterates written");
  return kExitOk;
}

int cmd_decompose(const Options& o) {
  json cfg = load_config(o);
  const auto seed = seed_of(o, cfg);
  auto d = load_dataset(o, cfg);
  auto specs = models_of(o, cfg, "CPTP");
  GateSet target = target_of(cfg);
  const int nboot = get_or(cfg, "bootstrap", 100);
  FitReport f = fit(d, specs.front(), fit_options(cfg, seed));
  GateSet aligned = gauge_align(f.gateset, target).gateset;
  StrengthReport s = decompose(aligned, target);
  if (nboot >= 2) attach_sigma(s, bootstrap(f, d, target, nboot, seed + 1, o.jobs));
  f.gateset = aligned;
  fs::path out = out_dir(o);
  std::ofstream csv(out / "strengths.csv");
  write_report_csv(csv, s);
  write_file(out / "decomposition.json", fit_report_json(f, &s));
  for (const char* k : {"pre_mcm_t1", "post_mcm_t1", "readout_error", "weakness"}) {
    std::cout << std::left << std::setw(16) << k << s.composites.at(k);
    if (s.composite_sigma.count(k)) std::cout << " +/- " << s.composite_sigma.at(k);
    std::cout << "\n";
  }
  if (!f.converged) throw NonConvergence("fit did not converge; partial report written");
  return kExitOk;
}

int cmd_compare(const Options& o) {
  json cfg = load_config(o);
  const auto seed = seed_of(o, cfg);
  auto d = load_dataset(o, cfg);
  auto specs = models_of(o, cfg, "CPTP+Stark,MPR+Stark,MPR,CPTP,USI");
  std::string ref = get_or<std::string>(cfg, "reference", "");
  if (ref.empty()) {
    int best = -1;
    for (const auto& s : specs)
      if (s.nominal_params() > best) {
        best = s.nominal_params();
        ref = s.tag();
      }
  }
  auto fits = fit_all(d, specs, fit_options(cfg, seed), o.jobs);
  compare_models(fits, ref);
  fs::path out = out_dir(o);
  std::ofstream csv(out / "comparison.csv");
  write_comparison_csv(csv, fits, ref);
  write_comparison_csv(std::cout, fits, ref);
  bool all_conv = true;
  for (const auto& f : fits) {
    write_file(out / ("fit_" + file_tag(f.tag()) + ".json"), fit_report_json(f));
    all_conv = all_conv && f.converged;
  }
  if (!all_conv) throw NonConvergence("at least one fit did not converge; best iterates written");
  return kExitOk;
}

int cmd_sweep(const Options& o) {
  json cfg = load_config(o);
  const auto seed = seed_of(o, cfg);
  if (!cfg.contains("sweep") || !cfg["sweep"].is_array() || cfg["sweep"].empty())
    throw ValidationError("sweep needs a nonempty 'sweep' array of truth-model overrides");
  const json base = get_or(cfg, "truth", json::object());
  const long shots = get_or<long>(cfg, "shots", 8000);
  auto specs = models_of(o, cfg, "CPTP");
  const json points = cfg["sweep"];
  // validate every point up front so a malformed axis is a validation error
  std::vector<TruthModelConfig> truths;
  for (const auto& p : points) {
    json t = base;
    for (const auto& [k, v] : p.items())
      if (k != "label") t[k] = v;
    truths.push_back(truth_from(t));
  }
  const auto design = design_circuits();
  const GateSet target = ideal_gateset();
  std::vector<std::string> rows(points.size());
  std::mutex mu;
  size_t next = 0;
  auto worker = [&]() {
    for (;;) {
      size_t i;
      {
        std::lock_guard<std::mutex> lk(mu);
        if (next >= points.size()) return;
        i = next++;
      }
      std::ostringstream os;
      os.precision(10);
      const std::string label = points[i].value("label", std::to_string(i));
      try {
        GateSet truth = build_truth_model(truths[i]);
        auto d = sample_dataset(truth, design.circuits, shots, seed + i);
        FitOptions fo = fit_options(cfg, seed + i);
        for (const auto& spec : specs) {
          FitReport f = fit(d, spec, fo);
          os << i << "," << label << "," << f.tag() << ",stat,two_delta_logl," << f.two_delta_logl << "\n";
          os << i << "," << label << "," << f.tag() << ",stat,n_sigma," << f.n_sigma << "\n";
          os << i << "," << label << "," << f.tag() << ",stat,converged," << f.converged << "\n";
          if (spec.stark) os << i << "," << label << "," << f.tag() << ",stat,stark_phi," << f.gateset.stark_phi << "\n";
          if (spec.mcm == McmKind::Ideal) continue;
          StrengthReport s = decompose(gauge_align(f.gateset, target).gateset, target);
          const auto& ls = fomgi_labels();
          for (size_t j = 0; j < ls.size(); ++j)
            os << i << "," << label << "," << f.tag() << "," << sector_name(ls[j].sector) << "," << ls[j].name << ","
               << s.strengths[j] << "\n";
          for (const auto& [k, v] : s.composites)
            os << i << "," << label << "," << f.tag() << ",composite," << k << "," << v << "\n";
        }
      } catch (const std::exception& e) {
        std::string msg = e.what();
        for (auto& c : msg)
          if (c == ',' || c == '\n') c = ';';
        os << i << "," << label << ",,error,message," << msg << "\n";
      }
      rows[i] = os.str();
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min<int>(o.jobs, points.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  fs::path out = out_dir(o);
  std::ofstream csv(out / "sweep.csv");
  csv << "point,label,model,sector,name,value\n";
  for (const auto& r : rows) csv << r;
  std::cout << "sweep: " << points.size() << " points -> " << (out / "sweep.csv").string() << "\n";
  return kExitOk;
}

int cmd_postselect(const Options& o) {
  json cfg = load_config(o);
  const auto seed = seed_of(o, cfg);
  const long shots = get_or<long>(cfg, "shots", 8000);
  GateSet truth = build_truth_model(truth_from(get_or(cfg, "truth", json::object())));
  IqConfig ic = iq_from(get_or(cfg, "iq", json::object()));
  auto design = design_circuits();
  IqRecords rec = simulate_iq(truth, design.circuits, shots, ic, seed);
  Classifier c2 = train_from_records(rec, 2, seed), c3 = train_from_records(rec, 3, seed);
  RemovalStats st;
  CircuitDataset raw = classify_records(rec, c2);
  CircuitDataset ps = postselect(rec, c3, &st);
  fs::path out = out_dir(o);
  write_file(out / "dataset_raw.json", dataset_to_json(raw));
  write_file(out / "dataset_postselected.json", dataset_to_json(ps));
  write_file(out / "classifier2.json", classifier_to_json(c2));
  write_file(out / "classifier3.json", classifier_to_json(c3));
  std::ofstream rs(out / "removal.csv");
  rs << "circuit_id,circuit,removed,total,fraction\n";
  for (size_t i = 0; i < rec.circuits.size(); ++i)
    rs << i << "," << circuit_str(rec.circuits[i]) << "," << st.removed[i] << "," << st.total[i] << ","
       << st.fraction[i] << "\n";
  if (get_or(cfg.value("iq", json::object()), "write_iq_csv", false)) {
    std::ofstream iq(out / "iq.csv");
    write_iq_csv(iq, rec);
  }
  std::cout << "removed " << st.removed_total << "/" << st.shots_total << " shots (" << st.aggregate * 100 << "%)\n";
  return kExitOk;
}

int cmd_selftest(const Options&) {
  bool ok = true;
  for (const auto& l : check_fomgi_tables()) {
    std::cout << (l.pass ? "PASS " : "FAIL ") << l.name << ": " << l.detail << "\n";
    ok = ok && l.pass;
  }
  for (const auto& l : check_comparison_statistics()) {
    std::cout << (l.pass ? "PASS " : "FAIL ") << "statistics " << l.name << ": " << l.detail << "\n";
    ok = ok && l.pass;
  }
  auto d = design_circuits();
  bool dz = d.circuits.size() == 128 && d.n_mcm == 36 && d.jacobian_rank == 59;
  std::cout << (dz ? "PASS " : "FAIL ") << "design: " << d.circuits.size() << " circuits, " << d.n_mcm
            << " with MCM, Jacobian rank " << d.jacobian_rank << "\n";
  ok = ok && dz;
  return ok ? kExitOk : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mid-circuit measurement tomography and error decomposition"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sc) {
    sc->add_option("--config", o.config, "JSON config (default: $MCM_CONFIG)");
    sc->add_option("--out", o.out, "output directory")->capture_default_str();
    sc->add_option("--seed", o.seed, "master RNG seed (overrides config)");
    sc->add_option("--jobs", o.jobs, "parallel workers")->check(CLI::PositiveNumber)->capture_default_str();
    sc->add_option("--models", o.models, "comma-separated model tags");
  };
  std::map<std::string, std::function<int(const Options&)>> cmds = {
      {"simulate", cmd_simulate}, {"fit", cmd_fit},         {"decompose", cmd_decompose}, {"compare", cmd_compare},
      {"sweep", cmd_sweep},       {"postselect", cmd_postselect}, {"selftest", cmd_selftest}};
  const std::map<std::string, std::string> help = {
      {"simulate", "sample a synthetic dataset from a truth model"},
      {"fit", "fit models to a dataset and gauge-align them"},
      {"decompose", "fit, extract the 28 FOMGI strengths and bootstrap errors"},
      {"compare", "fit several models and emit the model-comparison table"},
      {"sweep", "simulate+fit+decompose over a list of truth-model points"},
      {"postselect", "simulate IQ shots, classify and remove leaked shots"},
      {"selftest", "reproduce the FOMGI tables and comparison statistics"}};
  for (const auto& [name, _] : cmds) add_common(app.add_subcommand(name, help.at(name)));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }
  try {
    for (const auto& [name, fn] : cmds)
      if (app.got_subcommand(name)) return fn(o);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed config: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NonConvergence& e) {
    std::cerr << "warning: " << e.what() << "\n";
    return kExitNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
