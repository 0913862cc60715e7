#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "kshrl/commands.hpp"
#include "kshrl/config.hpp"
#include "kshrl/error.hpp"
#include "kshrl/model.hpp"
#include "kshrl/model_io.hpp"
#include "kshrl/modelsel.hpp"
#include "kshrl/policy.hpp"
#include "kshrl/sim.hpp"

namespace py = pybind11;
using namespace kshrl;

namespace {

CandidateChoice candidate_from(py::object feature) {
    if (feature.is_none()) return CandidateChoice::external();
    return CandidateChoice::state_feature(feature.cast<std::size_t>());
}

py::dict points_to_dict(const std::vector<ComponentPoint>& points) {
    std::vector<double> z, s, v;
    for (const ComponentPoint& p : points) {
        z.push_back(p.z);
        s.push_back(p.s);
        v.push_back(p.value);
    }
    py::dict out;
    out["z"] = z;
    out["s"] = s;
    out["value"] = v;
    return out;
}

sim::SimMDPConfig sim_config(std::size_t d, double sigma, std::uint64_t seed, double correlation) {
    sim::SimMDPConfig cfg;
    cfg.d = d;
    cfg.sigma = sigma;
    cfg.seed = seed;
    cfg.correlation = correlation;
    cfg.validate();
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Kernel-weighted sparse additive Q-function estimation from batch data";

    static py::exception<InputError> input_error(m, "InputError", PyExc_ValueError);
    static py::exception<NumericalError> numerical_error(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const InputError& e) {
            py::set_error(input_error, e.what());
        } catch (const NumericalError& e) {
            py::set_error(numerical_error, e.what());
        }
    });

    py::enum_<KernelFamily>(m, "KernelFamily")
        .value("gaussian", KernelFamily::gaussian)
        .value("epanechnikov", KernelFamily::epanechnikov)
        .value("boxcar", KernelFamily::boxcar);
    py::enum_<FitMethod>(m, "FitMethod")
        .value("analytic", FitMethod::analytic)
        .value("coordinate_descent", FitMethod::coordinate_descent);
    py::enum_<StepRule>(m, "StepRule")
        .value("fixed", StepRule::fixed)
        .value("global_auto", StepRule::global_auto)
        .value("per_group", StepRule::per_group);
    py::enum_<LossKind>(m, "LossKind").value("bellman", LossKind::bellman).value("mse", LossKind::mse);

    py::class_<BasisSpec>(m, "BasisSpec")
        .def_static("bspline", &BasisSpec::bspline, py::arg("m") = 5, py::arg("degree") = 3)
        .def_static("trigonometric", &BasisSpec::trigonometric, py::arg("m"))
        .def_readonly("m", &BasisSpec::m)
        .def_readonly("degree", &BasisSpec::degree)
        .def_readonly("knots", &BasisSpec::knots);
    m.def("eval_basis", &eval_basis, py::arg("spec"), py::arg("s"));

    py::class_<KernelSpec>(m, "KernelSpec")
        .def(py::init([](KernelFamily family, double bandwidth) { return KernelSpec{family, bandwidth}; }),
             py::arg("family") = KernelFamily::gaussian, py::arg("bandwidth") = 0.2)
        .def_readwrite("family", &KernelSpec::family)
        .def_readwrite("bandwidth", &KernelSpec::bandwidth);

    py::class_<SolverConfig>(m, "SolverConfig")
        .def(py::init<>())
        .def_readwrite("lam", &SolverConfig::lambda)
        .def_readwrite("mu", &SolverConfig::mu)
        .def_readwrite("step_rule", &SolverConfig::step_rule)
        .def_readwrite("epsilon", &SolverConfig::epsilon)
        .def_readwrite("max_iter", &SolverConfig::max_iter)
        .def_readwrite("seed", &SolverConfig::seed)
        .def_readwrite("ridge", &SolverConfig::ridge);

    py::class_<Hyperparameters>(m, "Hyperparameters")
        .def(py::init<>())
        .def_readwrite("basis", &Hyperparameters::basis)
        .def_readwrite("kernel", &Hyperparameters::kernel)
        .def_readwrite("solver", &Hyperparameters::solver)
        .def_readwrite("gamma", &Hyperparameters::gamma)
        .def_readwrite("grid_size", &Hyperparameters::grid_size)
        .def_readwrite("method", &Hyperparameters::method);

    py::class_<BatchDataset>(m, "BatchDataset")
        .def_property_readonly("size", &BatchDataset::size)
        .def_readonly("dim", &BatchDataset::dim)
        .def_readonly("num_actions", &BatchDataset::num_actions)
        .def("trajectory_ids", &BatchDataset::trajectory_ids)
        .def("states", [](const BatchDataset& d) {
            Eigen::MatrixXd out(d.size(), d.dim);
            for (std::size_t i = 0; i < d.size(); ++i) {
                for (std::size_t j = 0; j < d.dim; ++j) out(i, j) = d.transitions[i].state[j];
            }
            return out;
        })
        .def("actions", [](const BatchDataset& d) {
            Eigen::VectorXd out(d.size());
            for (std::size_t i = 0; i < d.size(); ++i) out(i) = d.transitions[i].action;
            return out;
        })
        .def("rewards", [](const BatchDataset& d) {
            Eigen::VectorXd out(d.size());
            for (std::size_t i = 0; i < d.size(); ++i) out(i) = d.transitions[i].reward;
            return out;
        })
        .def("__len__", &BatchDataset::size);

    m.def(
        "read_csv",
        [](const std::string& path, py::object candidate_feature, std::optional<std::string> candidate_column,
           std::size_t num_actions) {
            CsvSchema schema;
            schema.num_actions = num_actions;
            schema.choice = candidate_from(candidate_feature);
            schema.candidate = candidate_column;
            return ingest_trajectories_file(path, schema);
        },
        py::arg("path"), py::arg("candidate_feature") = py::none(), py::arg("candidate_column") = py::none(),
        py::arg("num_actions") = 0, "Reads a trajectory CSV (traj_id, t, s_0.., action, reward).");

    m.def(
        "simulate",
        [](std::size_t d, std::size_t episodes, std::size_t length, std::uint64_t seed, double sigma,
           double correlation, std::size_t candidate_feature) {
            return sim::sample_trajectories(sim_config(d, sigma, seed, correlation), episodes, length,
                                            CandidateChoice::state_feature(candidate_feature))
                .data;
        },
        py::arg("d") = 5, py::arg("episodes") = 100, py::arg("length") = 10, py::arg("seed") = 0,
        py::arg("sigma") = 0.0, py::arg("correlation") = 0.0, py::arg("candidate_feature") = 0,
        "Samples trajectories of the benchmark MDP under a uniformly random behavior policy.");

    m.def("reward", [](const std::vector<double>& s, int a) { return sim::reward(s, a); }, py::arg("state"),
          py::arg("action"));

    py::class_<FittedModel>(m, "FittedModel")
        .def_property_readonly("zs", [](const FittedModel& f) { return f.grid.zs; })
        .def_property_readonly("coefficients", [](const FittedModel& f) { return f.grid.B; })
        .def_property_readonly("gamma", [](const FittedModel& f) { return f.grid.gamma; })
        .def_property_readonly("num_blocks", [](const FittedModel& f) { return f.grid.features.layout().num_blocks; })
        .def_property_readonly("included_features",
                               [](const FittedModel& f) { return f.grid.features.layout().included_features(); })
        .def_property_readonly("iterations",
                               [](const FittedModel& f) {
                                   std::vector<std::size_t> out;
                                   for (const FitDiagnostics& d : f.grid.diagnostics) out.push_back(d.iterations);
                                   return out;
                               })
        .def_readonly("warnings", &FittedModel::warnings)
        .def(
            "marginal", [](const FittedModel& f, std::size_t action) { return points_to_dict(extract_marginal(f.grid, action)); },
            py::arg("action"), "g_a(z) at every grid point.")
        .def(
            "joint",
            [](const FittedModel& f, std::size_t feature, std::size_t action, std::size_t points) {
                return points_to_dict(extract_joint(f.grid, feature, action, evenly_spaced_grid(points)));
            },
            py::arg("feature"), py::arg("action"), py::arg("points") = 50, "f_{j,a}(s_j, z), z-major.")
        .def(
            "action",
            [](const FittedModel& f, const std::vector<double>& state, double candidate) {
                return model_action(f, state, candidate);
            },
            py::arg("state"), py::arg("candidate") = 0.0, "Greedy action for a raw state.")
        .def("to_json", [](const FittedModel& f) {
            std::ostringstream out;
            write_model(out, f);
            return out.str();
        });

    m.def("fit", &fit_model, py::arg("data"), py::arg("hyper") = Hyperparameters{}, py::arg("threads") = 1,
          py::call_guard<py::gil_scoped_release>(), "Fits the local model grid under the behavioral policy.");

    m.def(
        "policy_iterate",
        [](const BatchDataset& data, const Hyperparameters& hyper, std::size_t max_iters, double frob_epsilon,
           std::size_t threads) {
            PolicyIterationConfig pi;
            pi.max_policy_iters = max_iters;
            pi.frob_epsilon = frob_epsilon;
            LspiFit fit;
            {
                py::gil_scoped_release release;
                fit = fit_lspi(data, hyper, pi, threads);
            }
            py::dict out;
            out["model"] = fit.model;
            out["frobenius_deltas"] = fit.frobenius_deltas;
            out["converged"] = fit.converged;
            out["stop_reason"] = fit.stop_reason;
            return out;
        },
        py::arg("data"), py::arg("hyper") = Hyperparameters{}, py::arg("max_iters") = 3,
        py::arg("frob_epsilon") = 1e-4, py::arg("threads") = 1);

    m.def("save_model", &save_model, py::arg("path"), py::arg("model"));
    m.def("load_model", &load_model, py::arg("path"));

    m.def(
        "cross_validate",
        [](const BatchDataset& data, const Hyperparameters& hyper, std::size_t folds, LossKind loss,
           std::uint64_t seed, std::size_t threads) {
            py::gil_scoped_release release;
            return k_fold_cv(data, folds, hyper, loss, seed, threads);
        },
        py::arg("data"), py::arg("hyper") = Hyperparameters{}, py::arg("folds") = 5,
        py::arg("loss") = LossKind::bellman, py::arg("seed") = 0, py::arg("threads") = 1,
        "Per-fold validation losses with trajectory-level folds.");

    m.def(
        "regret",
        [](py::object policy, std::size_t d, std::size_t episodes, std::size_t length, std::uint64_t seed) {
            const sim::SimMDPConfig cfg = sim_config(d, 0.0, seed, 0.0);
            sim::SimPolicy rule;
            if (py::isinstance<py::str>(policy)) {
                const std::string name = policy.cast<std::string>();
                if (name == "random") {
                    rule = sim::uniform_random_policy();
                } else if (name == "oracle") {
                    rule = sim::per_step_oracle_policy();
                } else {
                    throw InputError("regret: policy must be a FittedModel, 'random' or 'oracle', got '" + name + "'");
                }
            } else {
                rule = model_policy(policy.cast<const FittedModel&>());
            }
            const sim::RegretResult r = sim::regret_analysis(cfg, rule, episodes, length, seed);
            py::dict out;
            out["mean_regret"] = r.mean_regret;
            out["episode_regret"] = r.episode_regret;
            return out;
        },
        py::arg("policy"), py::arg("d") = 5, py::arg("episodes") = 1000, py::arg("length") = 10,
        py::arg("seed") = 0, "Mean per-step regret against the immediate-reward oracle.");

    m.def(
        "mc_q",
        [](const std::vector<double>& state, int action, double gamma, std::size_t rollouts, std::size_t length,
           std::uint64_t seed) {
            const sim::SimMDPConfig cfg = sim_config(state.size(), 0.0, seed, 0.0);
            const sim::MCEstimate e =
                sim::mc_q_estimate(cfg, state, action, sim::uniform_random_policy(), gamma, rollouts, length, seed);
            return py::make_tuple(e.mean, e.std_error);
        },
        py::arg("state"), py::arg("action"), py::arg("gamma") = 0.5, py::arg("rollouts") = 100,
        py::arg("length") = 10, py::arg("seed") = 0,
        "Monte-Carlo Q estimate under the random policy: (mean, standard error).");

    m.def(
        "run",
        [](const std::string& command, const std::string& config_text, const std::filesystem::path& out,
           std::optional<std::uint64_t> seed) {
            RunConfig config = parse_config(config_text);
            if (seed) set_seed(config, *seed);
            std::ostringstream log;
            {
                py::gil_scoped_release release;
                if (command == "fit") cmd_fit(config, out, log);
                else if (command == "policy-iterate") cmd_policy_iterate(config, out, log);
                else if (command == "simulate") cmd_simulate(config, out, log);
                else if (command == "regret") cmd_regret(config, out, log);
                else if (command == "cv") cmd_cv(config, out, log);
                else if (command == "export-components") cmd_export_components(config, out, log);
                else throw InputError("unknown command '" + command + "'");
            }
            return log.str();
        },
        py::arg("command"), py::arg("config") = "{}", py::arg("out") = ".", py::arg("seed") = py::none(),
        "Runs a CLI command from JSON config text; returns its log.");
}
