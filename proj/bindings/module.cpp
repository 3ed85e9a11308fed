#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "adaptivity/dist_design.hpp"
#include "adaptivity/harness.hpp"
#include "adaptivity/serialization.hpp"

namespace py = pybind11;
using namespace adaptivity;

namespace {

// Python passes one context set as an array of row vectors (K x d).
ContextSet set_from_rows(const Eigen::MatrixXd& rows) {
  return ContextSet(Eigen::MatrixXd(rows.transpose()));
}

std::vector<ContextSet> sets_from_rows(const std::vector<Eigen::MatrixXd>& rows) {
  std::vector<ContextSet> sets;
  sets.reserve(rows.size());
  for (const auto& r : rows) sets.push_back(set_from_rows(r));
  return sets;
}

int infer_k_max(const std::vector<ContextSet>& sets, int k_max) {
  if (k_max > 0) return k_max;
  int k = 1;
  for (const ContextSet& s : sets) k = std::max(k, s.size());
  return k;
}

DesignFlavor flavor_from_string(const std::string& name) {
  if (name == "argmax") return DesignFlavor::Argmax;
  if (name == "softmax") return DesignFlavor::Softmax;
  throw std::invalid_argument("flavor must be 'argmax' or 'softmax'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Limited-adaptivity linear bandit learners and distributional G-optimal design";

  py::register_exception<NotPsdError>(m, "NotPsdError");
  py::register_exception<DidNotConvergeError>(m, "DidNotConvergeError");
  py::register_exception<EmptyOutputError>(m, "EmptyOutputError");
  py::register_exception<NormViolationError>(m, "NormViolationError");
  py::register_exception<ConfigError>(m, "ConfigError");

  m.def(
      "quad_form",
      [](const Eigen::MatrixXd& a, double jitter, const Eigen::VectorXd& x) {
        return quad_form(PsdMatrix(a), jitter, x);
      },
      py::arg("a"), py::arg("jitter"), py::arg("x"),
      "x^T (A + jitter I)^{-1} x through a Cholesky factorization");
  m.def(
      "log_det",
      [](const Eigen::MatrixXd& a, double jitter) { return log_det(PsdMatrix(a), jitter); },
      py::arg("a"), py::arg("jitter") = 0.0);
  m.def(
      "eigen_bounds",
      [](const Eigen::MatrixXd& a) { return eigen_bounds(PsdMatrix(a)); },
      py::arg("a"), "(min, max) eigenvalue of a symmetric matrix");

  m.def(
      "g_optimal_design",
      [](const Eigen::MatrixXd& rows, double jitter, double tol_factor, int max_iter) {
        return g_optimal_design(set_from_rows(rows), jitter, tol_factor, max_iter).weights;
      },
      py::arg("vectors"), py::arg("jitter") = 1e-9, py::arg("tol_factor") = 2.0,
      py::arg("max_iter") = 10000,
      "Frank-Wolfe G-optimal design weights for row vectors (K x d)");

  py::class_<SamplePolicy>(m, "Policy")
      .def_static("uniform", &SamplePolicy::uniform)
      .def_static("g_optimal", &SamplePolicy::g_optimal)
      .def_static(
          "argmax", [](const Eigen::MatrixXd& v) { return SamplePolicy::argmax(PsdMatrix(v)); },
          py::arg("v"))
      .def_static(
          "softmax",
          [](const Eigen::MatrixXd& mmat, double alpha) {
            return SamplePolicy::softmax(PsdMatrix(mmat), alpha);
          },
          py::arg("m"), py::arg("alpha"))
      .def_static(
          "mixed",
          [](const std::vector<std::pair<double, SamplePolicy>>& comps) {
            return SamplePolicy::mixed(comps);
          },
          py::arg("components"))
      .def("to_json", [](const SamplePolicy& pi) { return policy_to_json(pi).dump(); })
      .def_static("from_json", [](const std::string& text) {
        return policy_from_json(nlohmann::json::parse(text));
      });

  py::class_<MixedDesignParams>(m, "MixedDesignParams")
      .def_property_readonly("flavor",
                             [](const MixedDesignParams& p) {
                               return p.flavor == DesignFlavor::Argmax ? "argmax" : "softmax";
                             })
      .def_readonly("k_max", &MixedDesignParams::k_max)
      .def_property_readonly("components",
                             [](const MixedDesignParams& p) {
                               std::vector<std::pair<double, Eigen::MatrixXd>> out;
                               for (const auto& [w, mat] : p.components) {
                                 out.emplace_back(w, mat.mat());
                               }
                               return out;
                             })
      .def("validate", &MixedDesignParams::validate, py::arg("lam"))
      .def("to_json", [](const MixedDesignParams& p) { return mixed_params_to_json(p).dump(); });

  py::class_<PolicyEngine>(m, "Engine")
      .def(py::init([](double jitter, double tol_factor, int max_iter) {
             return std::make_unique<PolicyEngine>(GOptimalParams{jitter, tol_factor, max_iter});
           }),
           py::arg("jitter") = 1e-9, py::arg("tol_factor") = 2.0, py::arg("max_iter") = 10000)
      .def(
          "distribution",
          [](PolicyEngine& e, const SamplePolicy& pi, const Eigen::MatrixXd& rows) {
            return e.policy_distribution(pi, set_from_rows(rows)).weights;
          },
          py::arg("policy"), py::arg("vectors"))
      .def(
          "info_matrix",
          [](PolicyEngine& e, const SamplePolicy& pi, const Eigen::MatrixXd& rows) {
            return e.policy_info_matrix(pi, set_from_rows(rows)).mat();
          },
          py::arg("policy"), py::arg("vectors"))
      .def(
          "draw",
          [](PolicyEngine& e, const SamplePolicy& pi, const Eigen::MatrixXd& rows,
             std::uint64_t seed, std::uint64_t stream) {
            CounterRng rng(seed, stream);
            return e.draw_arm(pi, set_from_rows(rows), rng);
          },
          py::arg("policy"), py::arg("vectors"), py::arg("seed"), py::arg("stream") = 0)
      .def(
          "variation",
          [](PolicyEngine& e, const std::vector<Eigen::MatrixXd>& sets, const SamplePolicy& pi,
             double lam) { return e.empirical_variation(sets_from_rows(sets), pi, lam); },
          py::arg("sets"), py::arg("policy"), py::arg("lam"))
      .def(
          "deviation",
          [](PolicyEngine& e, const std::vector<Eigen::MatrixXd>& sets, const SamplePolicy& pi,
             double lam) { return e.empirical_deviation(sets_from_rows(sets), pi, lam); },
          py::arg("sets"), py::arg("policy"), py::arg("lam"));

  m.def(
      "build_mixed_design",
      [](const std::vector<Eigen::MatrixXd>& sets, double lam, const std::string& flavor,
         int k_max, double block_multiplier) {
        std::vector<ContextSet> cs = sets_from_rows(sets);
        PolicyEngine engine;
        return build_mixed_design(cs, lam, flavor_from_string(flavor), infer_k_max(cs, k_max),
                                  block_multiplier, engine);
      },
      py::arg("sets"), py::arg("lam"), py::arg("flavor") = "softmax", py::arg("k_max") = 0,
      py::arg("block_multiplier") = 1.0,
      py::call_guard<py::gil_scoped_release>());

  m.def("assemble_policy", &assemble_policy, py::arg("params"));

  m.def(
      "core_identification",
      [](const std::vector<Eigen::MatrixXd>& sets, double lam, int c) {
        std::vector<ContextSet> cs = sets_from_rows(sets);
        PolicyEngine engine;
        CoreResult r = core_identification(cs, lam, c, engine);
        return std::make_pair(r.kept_indices, r.iterations);
      },
      py::arg("sets"), py::arg("lam"), py::arg("c") = 6,
      py::call_guard<py::gil_scoped_release>());

  m.def(
      "core_learning",
      [](const std::vector<Eigen::MatrixXd>& sets, double lam, int k_max,
         double block_multiplier) {
        std::vector<ContextSet> cs = sets_from_rows(sets);
        PolicyEngine engine;
        return core_learning(cs, lam, infer_k_max(cs, k_max), engine, block_multiplier);
      },
      py::arg("sets"), py::arg("lam"), py::arg("k_max") = 0, py::arg("block_multiplier") = 1.0,
      py::call_guard<py::gil_scoped_release>());

  m.def(
      "feasible_lower_bound_signs",
      [](int d, long t_horizon, long m_budget) {
        return feasible_lower_bound_spec(d, t_horizon, m_budget).u;
      },
      py::arg("d"), py::arg("t"), py::arg("m"),
      "Sign sequences keeping the adversarial instance inside the unit ball");

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        ExperimentConfig cfg = config_from_json(nlohmann::json::parse(config_json));
        ExperimentResult res = [&] {
          py::gil_scoped_release release;
          return run_experiment(cfg);
        }();
        nlohmann::json summary = summary_to_json(cfg, res.summary);
        nlohmann::json per_seed = nlohmann::json::array();
        for (const auto& [seed, rec] : res.runs) {
          per_seed.push_back({{"seed", seed},
                              {"regret", rec.total_regret},
                              {"switches", rec.switches},
                              {"batches", rec.batches_used}});
        }
        summary["per_seed"] = per_seed;
        return summary.dump();
      },
      py::arg("config_json"),
      "Run an experiment config (JSON string); returns the summary as JSON");
}
