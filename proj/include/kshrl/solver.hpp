#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kshrl/basis.hpp"
#include "kshrl/dataset.hpp"
#include "kshrl/kernel.hpp"

namespace kshrl {

/// Shrinkage applied per group update: mu * lambda_g (proximal-gradient
/// scaling) or lambda_g / mu.
enum class ThresholdConvention { standard, inverse_step };

enum class FitMethod { analytic, coordinate_descent };

/// How coordinate descent picks its step: the configured mu for every
/// group, one automatic mu = 1 / max_g ||A_gg||_2, or a per-group
/// mu_g = 1 / ||A_gg||_2 (thresholds scale with each group's own step).
enum class StepRule { fixed, global_auto, per_group };

struct SolverConfig {
    double lambda = 0.0;
    double mu = 1e-3;
    StepRule step_rule = StepRule::per_group;
    double epsilon = 1e-6;
    std::size_t max_iter = 100000;
    std::uint64_t seed = 0;
    double ridge = 1e-8;
    ThresholdConvention threshold = ThresholdConvention::standard;
    /// Coefficient norm treated as divergence.
    double overflow_bound = 1e12;

    void validate() const;
};

/// A_z beta = b_z with A_z = Phi^T W_z (Phi - gamma Phi'), b_z = Phi^T W_z r.
/// A is not symmetric in general.
struct FixedPointSystem {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    double gamma = 0.0;
    double z = 0.0;
};

FixedPointSystem assemble_system(const DesignMatrices& design, const Eigen::VectorXd& weights, double gamma,
                                 double z = 0.0);

/// Solves (A + ridge I) beta = b with a rank-revealing QR.
Eigen::VectorXd solve_analytic(const FixedPointSystem& sys, double ridge);

/// Group soft-threshold (v / ||v||) max(0, ||v|| - t).
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t);

/// One penalized coefficient group: an action block's intercept (size 1,
/// penalty lambda sqrt(m)) or one feature's m coefficients (penalty lambda).
struct CoefficientGroup {
    std::size_t block = 0;
    std::optional<std::size_t> feature;
    std::size_t offset = 0;
    std::size_t size = 0;
    /// Multiplier on lambda.
    double penalty_scale = 1.0;

    bool is_intercept() const { return !feature.has_value(); }
};

std::vector<CoefficientGroup> make_groups(const FeatureLayout& layout);

/// Phi_g^T W ((Phi - gamma Phi') beta - r), computed from the design rows
/// rather than from an assembled system.
Eigen::VectorXd group_gradient(const DesignMatrices& design, const Eigen::VectorXd& weights, double gamma,
                               const Eigen::VectorXd& beta, const CoefficientGroup& group);

/// For bases whose per-feature columns sum to a constant (B-splines), each
/// centered feature block has the all-ones direction in the null space of
/// A. Adds scale * v v^T for every such direction so the system has the
/// unique solution with zero-sum feature blocks.
FixedPointSystem with_sum_to_zero(const FixedPointSystem& sys, const std::vector<CoefficientGroup>& groups);

struct FitDiagnostics {
    double z = 0.0;
    std::size_t iterations = 0;
    bool converged = true;
    double ess = 0.0;
    double last_change = 0.0;
    double step_size = 0.0;
    std::vector<std::string> warnings;
};

struct LocalModel {
    double z = 0.0;
    Eigen::VectorXd beta;
    FitDiagnostics diagnostics;
};

/// Randomized block coordinate descent for the group-penalized fixed point.
/// Each pass visits the slots {intercept, feature 1..} in a fresh random
/// order; a slot updates that group in every action block. Stops when the
/// coefficient change over one pass drops below epsilon.
LocalModel ksh_lstdq(const FixedPointSystem& sys, const SolverConfig& config,
                     const std::vector<CoefficientGroup>& groups, const Eigen::VectorXd& initial,
                     std::uint64_t stream = 0);

/// 1 / max_g ||A_gg||_2.
double auto_step_size(const FixedPointSystem& sys, const std::vector<CoefficientGroup>& groups);

/// Step size of every group under `config.step_rule`.
std::vector<double> group_step_sizes(const FixedPointSystem& sys, const std::vector<CoefficientGroup>& groups,
                                     const SolverConfig& config);

/// M local models: row i of B holds the coefficients fitted at zs[i].
struct LocalModelGrid {
    FeatureMap features;
    KernelSpec kernel;
    ActionMode mode = ActionMode::discrete;
    CandidateChoice candidate;
    double gamma = 0.0;
    std::vector<double> zs;
    Eigen::MatrixXd B;
    std::vector<FitDiagnostics> diagnostics;

    std::size_t size() const { return zs.size(); }
};

struct GridFitOptions {
    double gamma = 0.0;
    FitMethod method = FitMethod::coordinate_descent;
    NextActionSource next_action = NextActionSource::observed;
    ActionRule policy;
    /// Start each coordinate-descent fit from the previous grid point.
    bool warm_start = true;
    /// Per-row starting coefficients (overrides warm starts), M x p.
    std::optional<Eigen::MatrixXd> initial;
    std::size_t threads = 1;
};

/// M points evenly spaced on [0,1] (the midpoint when M = 1).
std::vector<double> evenly_spaced_grid(std::size_t count);

LocalModelGrid fit_local_grid(const BatchDataset& data, const FeatureMap& features, const KernelSpec& kernel,
                              const std::vector<double>& zs, const SolverConfig& config,
                              const GridFitOptions& options);

/// Same, on a prebuilt design (its rows must come from `data`'s mode/candidate).
LocalModelGrid fit_local_grid(const DesignMatrices& design, const FeatureMap& features, ActionMode mode,
                              const CandidateChoice& candidate, const KernelSpec& kernel,
                              const std::vector<double>& zs, const SolverConfig& config,
                              const GridFitOptions& options);

/// One point of an extracted component curve or surface.
struct ComponentPoint {
    double z = 0.0;
    double s = 0.0;  ///< feature value; unused for marginals
    double value = 0.0;
};

/// g_a(z): the intercept of block `action` at every grid point.
std::vector<ComponentPoint> extract_marginal(const LocalModelGrid& grid, std::size_t action);

/// f_{j,a}(s_j, z) over the supplied (normalized) feature grid, z-major.
std::vector<ComponentPoint> extract_joint(const LocalModelGrid& grid, std::size_t feature, std::size_t action,
                                          const std::vector<double>& feature_grid);

}  // namespace kshrl
