#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kshrl/dataset.hpp"

namespace kshrl {

enum class BasisFamily { bspline, trigonometric };

/// Per-feature basis configuration. B-splines use a clamped knot vector on
/// [0,1] with m = #interior intervals + degree.
struct BasisSpec {
    BasisFamily family = BasisFamily::bspline;
    std::size_t m = 5;
    int degree = 3;
    std::vector<double> knots;

    /// Clamped uniform knots on [0,1]; requires m >= degree + 1.
    static BasisSpec bspline(std::size_t m, int degree);
    /// {sin 2πqs, cos 2πqs} for q = 1..ceil(m/2), truncated to m columns.
    static BasisSpec trigonometric(std::size_t m);

    void validate() const;
    friend bool operator==(const BasisSpec&, const BasisSpec&) = default;
};

/// Raw (uncentered) basis values at s; s is clamped to [0,1] first.
Eigen::VectorXd eval_basis(const BasisSpec& spec, double s);

/// Empirical basis means: means(j, l) = mean over training states of psi_l(s_j).
struct CenteringStats {
    Eigen::MatrixXd means;
};

CenteringStats fit_centering(const BasisSpec& spec, const BatchDataset& data);

/// Coefficient layout of one local model: `num_blocks` action blocks, each
/// [intercept, feature blocks of width m for every non-excluded feature].
struct FeatureLayout {
    std::size_t dim = 0;
    std::optional<std::size_t> excluded;
    std::size_t m = 0;
    /// k in discrete mode, 1 in continuous mode.
    std::size_t num_blocks = 1;

    std::size_t effective_dim() const { return excluded ? dim - 1 : dim; }
    std::size_t block_width() const { return 1 + effective_dim() * m; }
    std::size_t num_coefficients() const { return block_width() * num_blocks; }
    /// Included feature indices in ascending order.
    std::vector<std::size_t> included_features() const;
    /// Position of `feature` among the included ones; throws if excluded.
    std::size_t feature_slot(std::size_t feature) const;
    /// Offset of the intercept of `block`.
    std::size_t intercept_offset(std::size_t block) const { return block * block_width(); }
    /// Offset of the first coefficient of `feature` within `block`.
    std::size_t feature_offset(std::size_t block, std::size_t feature) const {
        return block * block_width() + 1 + feature_slot(feature) * m;
    }

    friend bool operator==(const FeatureLayout&, const FeatureLayout&) = default;
};

FeatureLayout layout_for(const BatchDataset& data, const BasisSpec& spec);

/// Centered basis evaluation phi(s, a) for a fixed layout.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(BasisSpec spec, CenteringStats stats, FeatureLayout layout);

    const BasisSpec& spec() const { return spec_; }
    const CenteringStats& stats() const { return stats_; }
    const FeatureLayout& layout() const { return layout_; }

    /// Centered basis of one feature value (length m).
    Eigen::VectorXd centered(std::size_t feature, double value) const;
    /// phi_+(s) = (1, centered blocks of the included features).
    Eigen::VectorXd state_features(std::span<const double> s) const;
    /// phi(s, a): phi_+(s) placed in block `block`, zeros elsewhere.
    Eigen::VectorXd features(std::span<const double> s, std::size_t block) const;

private:
    BasisSpec spec_;
    CenteringStats stats_;
    FeatureLayout layout_;
};

/// phi_+(s) for a possibly excluded feature.
Eigen::VectorXd feature_vector(const BasisSpec& spec, const CenteringStats& stats,
                               std::span<const double> s, std::optional<std::size_t> exclude);

/// phi(s, a) with k action blocks laid out in ascending action order.
Eigen::VectorXd state_action_features(const BasisSpec& spec, const CenteringStats& stats,
                                      std::span<const double> s, std::size_t a, std::size_t k,
                                      std::optional<std::size_t> exclude);

enum class NextActionSource { observed, policy };

/// Next-action rule used to build phi'. Receives the (normalized) next state
/// and the candidate value in force for that state; returns an action index
/// (discrete mode) or action value (continuous mode).
using ActionRule = std::function<double(std::span<const double> state, double candidate)>;

struct DesignMatrices {
    Eigen::MatrixXd phi;
    Eigen::MatrixXd phi_next;
    Eigen::VectorXd rewards;
    Eigen::VectorXd candidates;
    /// Dataset index of every design row.
    std::vector<std::size_t> rows;
    /// Transitions dropped for lack of an observed next action.
    std::size_t dropped = 0;

    std::size_t num_rows() const { return static_cast<std::size_t>(phi.rows()); }
};

/// Assembles phi and phi'. In observed mode a' is the action of the
/// successor transition and transitions without one are dropped.
DesignMatrices build_design(const FeatureMap& map, const BatchDataset& data,
                            NextActionSource source, const ActionRule& policy = {});

}  // namespace kshrl
