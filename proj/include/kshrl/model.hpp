#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kshrl/basis.hpp"
#include "kshrl/dataset.hpp"
#include "kshrl/kernel.hpp"
#include "kshrl/policy.hpp"
#include "kshrl/sim.hpp"
#include "kshrl/solver.hpp"

namespace kshrl {

/// One point of the hyperparameter space.
struct Hyperparameters {
    BasisSpec basis = BasisSpec::bspline(5, 3);
    KernelSpec kernel;
    SolverConfig solver;
    double gamma = 0.5;
    std::size_t grid_size = 25;
    FitMethod method = FitMethod::coordinate_descent;
};

/// A fitted grid together with the normalization it expects.
struct FittedModel {
    NormalizationSpec normalization;
    LocalModelGrid grid;
    /// Transitions without an observed next action (behavioral fits).
    std::size_t dropped = 0;
    std::vector<std::string> warnings;
};

/// normalize -> center -> behavioral design -> local grid on raw data.
FittedModel fit_model(const BatchDataset& raw, const Hyperparameters& hyper, std::size_t threads = 1);

struct LspiFit {
    FittedModel model;
    std::vector<double> frobenius_deltas;
    bool converged = false;
    std::string stop_reason;
};

/// Policy iteration on raw data, starting from the behavioral policy or,
/// if given, from `raw_initial_policy` (which sees raw states and candidates).
LspiFit fit_lspi(const BatchDataset& raw, const Hyperparameters& hyper, const PolicyIterationConfig& pi,
                 std::size_t threads = 1, const ActionRule& raw_initial_policy = {});

/// Greedy action for a raw (unnormalized) state. `raw_candidate` is used
/// only when the candidate is not a state feature. Continuous-mode models
/// return the raw action value of the selected grid point.
double model_action(const FittedModel& model, std::span<const double> raw_state, double raw_candidate = 0.0);

/// model_action as a rule over raw states and candidates.
ActionRule model_rule(const FittedModel& model);

/// Adapts a discrete-action model to the simulator's policy interface.
sim::SimPolicy model_policy(const FittedModel& model);

}  // namespace kshrl
