#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kshrl/basis.hpp"
#include "kshrl/solver.hpp"

namespace kshrl {

/// Index of the grid point nearest to x; distance ties go to the lower index.
std::size_t nearest_grid_index(const std::vector<double>& zs, double x);

/// Q(s, a) from the local model nearest to x (x clamped to [0,1]). In
/// continuous mode the action enters only through x and `action` is ignored.
double q_value(const LocalModelGrid& grid, std::span<const double> s, double action, double x);

/// argmax_a of the local model nearest to the candidate feature of s.
/// Requires the candidate to be a state feature.
std::size_t greedy_action_discrete(const LocalModelGrid& grid, std::span<const double> s);
/// Same with an explicit candidate value (e.g. an external confounder).
std::size_t greedy_action_discrete(const LocalModelGrid& grid, std::span<const double> s, double x);

/// The grid value z whose local model scores phi(s) highest.
double greedy_action_continuous(const LocalModelGrid& grid, std::span<const double> s);

/// Greedy policy of a grid as a next-action rule for design assembly.
ActionRule greedy_rule(const LocalModelGrid& grid);

struct PolicyIterationConfig {
    std::size_t max_policy_iters = 3;
    double frob_epsilon = 1e-4;

    void validate() const;
};

struct PolicyIterationResult {
    LocalModelGrid grid;
    /// ||B(t+1) - B(t)||_F per executed iteration (B(0) is the zero matrix).
    std::vector<double> frobenius_deltas;
    bool converged = false;
    /// "converged" or "max-iterations".
    std::string stop_reason;
};

/// Approximate policy iteration over the local grid. The first evaluation
/// uses observed next actions (behavioral) unless `initial_policy` is set;
/// later iterations rebuild phi' under the current greedy policy and refit
/// every local model starting from its previous coefficients.
PolicyIterationResult ksh_lspi(const BatchDataset& data, const FeatureMap& features, const KernelSpec& kernel,
                               const std::vector<double>& zs, const SolverConfig& solver,
                               const GridFitOptions& options, const PolicyIterationConfig& pi,
                               const ActionRule& initial_policy = {});

}  // namespace kshrl
