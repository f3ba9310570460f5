// Python bindings: JSON strings for gate sets and datasets, NumPy for matrices.
#include "mcm/inference.hpp"
#include "mcm/iq_readout.hpp"
#include "mcm/reference.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace mcm;

namespace {

TruthModelConfig truth_from(const std::map<std::string, double>& kv) {
  static const std::map<std::string, double TruthModelConfig::*> fields = {
      {"t1_pre", &TruthModelConfig::t1_pre},         {"t1_post", &TruthModelConfig::t1_post},
      {"thermal_up", &TruthModelConfig::thermal_up}, {"readout_flip", &TruthModelConfig::readout_flip},
      {"weakness_angle", &TruthModelConfig::weakness_angle}, {"post_z_angle", &TruthModelConfig::post_z_angle},
      {"stark_phi", &TruthModelConfig::stark_phi},   {"gate_depol", &TruthModelConfig::gate_depol},
      {"idle_damping", &TruthModelConfig::idle_damping}, {"mcm_depol", &TruthModelConfig::mcm_depol},
      {"spam_error", &TruthModelConfig::spam_error}};
  TruthModelConfig c;
  for (const auto& [k, v] : kv) {
    auto it = fields.find(k);
    if (it == fields.end()) throw ValidationError("unknown truth-model field '" + k + "'");
    c.*(it->second) = v;
  }
  c.validate();
  return c;
}

py::dict strengths_dict(const StrengthReport& r) {
  py::dict s, out;
  const auto& ls = fomgi_labels();
  for (size_t j = 0; j < ls.size(); ++j) s[py::str(ls[j].name)] = r.strengths[j];
  out["strengths"] = s;
  out["composites"] = r.composites;
  if (r.sigma) {
    py::dict sg;
    for (size_t j = 0; j < ls.size(); ++j) sg[py::str(ls[j].name)] = (*r.sigma)[j];
    out["sigma"] = sg;
    out["composite_sigma"] = r.composite_sigma;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_mcm, m) {
  m.doc() = "Mid-circuit measurement tomography core";
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  m.def("ideal_gateset", [] { return gateset_to_json(ideal_gateset()); });
  m.def("truth_gateset", [](const std::map<std::string, double>& truth) { return gateset_to_json(build_truth_model(truth_from(truth))); },
        py::arg("truth") = std::map<std::string, double>{});
  m.def("design_circuits", [] { return design_circuits().circuits; });
  m.def("circuit_probability",
        [](const std::string& gs, const Circuit& c) { return circuit_probability(gateset_from_json(gs), c); });

  m.def(
      "simulate",
      [](const std::string& gs, long shots, std::uint64_t seed, std::optional<std::vector<Circuit>> circuits) {
        py::gil_scoped_release nogil;
        return dataset_to_json(sample_dataset(gateset_from_json(gs), circuits ? *circuits : design_circuits().circuits, shots, seed));
      },
      py::arg("gateset"), py::arg("shots"), py::arg("seed") = 0, py::arg("circuits") = py::none());

  m.def(
      "fit",
      [](const std::string& dataset, const std::string& model, int starts, std::uint64_t seed) {
        std::string out;
        {
          py::gil_scoped_release nogil;
          CircuitDataset d = dataset_from_json(dataset);
          FitReport r = fit(d, parse_model(model), {.starts = starts, .seed = seed});
          r.gateset = gauge_align(r.gateset, ideal_gateset()).gateset;
          if (r.spec.mcm == McmKind::Ideal) {
            out = fit_report_json(r);
          } else {
            StrengthReport s = decompose(r.gateset, ideal_gateset());
            out = fit_report_json(r, &s);
          }
        }
        return out;
      },
      py::arg("dataset"), py::arg("model") = "CPTP", py::arg("starts") = 5, py::arg("seed") = 0);

  m.def("loglikelihood", [](const std::string& gs, const std::string& dataset) {
    return loglikelihood(gateset_from_json(gs), dataset_from_json(dataset));
  });
  m.def("saturated_loglikelihood", [](const std::string& dataset) { return saturated_logl(dataset_from_json(dataset)); });

  m.def("crunch", [](const Mat& ptm) {
    Instrument q = crunch(ptm);
    return std::make_pair(Mat(q.q[0]), Mat(q.q[1]));
  });
  m.def(
      "extract",
      [](const Mat& q0, const Mat& q1, double tp_tol) {
        if (q0.rows() != 4 || q0.cols() != 4 || q1.rows() != 4 || q1.cols() != 4)
          throw ValidationError("instrument elements must be 4x4");
        Instrument q{{Mat4(q0), Mat4(q1)}};
        return strengths_dict(extract(difference(q, ideal_instrument()), tp_tol));
      },
      py::arg("q0"), py::arg("q1"), py::arg("tp_tol") = 1e-8);
  m.def("fomgi_labels", [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& l : fomgi_labels()) out.emplace_back(l.name, sector_name(l.sector));
    return out;
  });

  m.def("n_sigma", &n_sigma, py::arg("two_delta_logl"), py::arg("k"));
  m.def("evidence_ratio", py::overload_cast<double, int, double, int>(&evidence_ratio), py::arg("two_delta_a"),
        py::arg("k_a"), py::arg("two_delta_b"), py::arg("k_b"));

  m.def("selftest", [] {
    std::vector<std::tuple<std::string, bool, std::string>> out;
    for (const auto& l : check_fomgi_tables()) out.emplace_back(l.name, l.pass, l.detail);
    for (const auto& l : check_comparison_statistics()) out.emplace_back(l.name, l.pass, l.detail);
    return out;
  });
}
