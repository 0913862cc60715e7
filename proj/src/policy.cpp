#include "kshrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "kshrl/error.hpp"

namespace kshrl {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

double block_value(const LocalModelGrid& grid, const Eigen::VectorXd& phi_plus, std::size_t row, std::size_t block) {
    const auto width = idx(grid.features.layout().block_width());
    return grid.B.row(idx(row)).segment(idx(block) * width, width).dot(phi_plus);
}

}  // namespace

std::size_t nearest_grid_index(const std::vector<double>& zs, double x) {
    if (zs.empty()) throw InputError("nearest_grid_index: empty grid");
    std::size_t best = 0;
    double best_distance = std::abs(x - zs[0]);
    for (std::size_t i = 1; i < zs.size(); ++i) {
        const double distance = std::abs(x - zs[i]);
        if (distance < best_distance) {
            best = i;
            best_distance = distance;
        }
    }
    return best;
}

double q_value(const LocalModelGrid& grid, std::span<const double> s, double action, double x) {
    const std::size_t row = nearest_grid_index(grid.zs, std::clamp(x, 0.0, 1.0));
    std::size_t block = 0;
    if (grid.mode == ActionMode::discrete) {
        if (action < 0 || action != std::floor(action) ||
            static_cast<std::size_t>(action) >= grid.features.layout().num_blocks) {
            throw InputError("q_value: action out of range");
        }
        block = static_cast<std::size_t>(action);
    }
    return block_value(grid, grid.features.state_features(s), row, block);
}

std::size_t greedy_action_discrete(const LocalModelGrid& grid, std::span<const double> s) {
    if (grid.candidate.kind != CandidateChoice::Kind::feature) {
        throw InputError("greedy_action_discrete: candidate is not a state feature; pass its value explicitly");
    }
    if (grid.candidate.feature >= s.size()) throw InputError("greedy_action_discrete: state too short");
    return greedy_action_discrete(grid, s, s[grid.candidate.feature]);
}

std::size_t greedy_action_discrete(const LocalModelGrid& grid, std::span<const double> s, double x) {
    if (grid.mode != ActionMode::discrete) throw InputError("greedy_action_discrete: grid is continuous-mode");
    const std::size_t row = nearest_grid_index(grid.zs, std::clamp(x, 0.0, 1.0));
    const Eigen::VectorXd phi_plus = grid.features.state_features(s);
    std::size_t best = 0;
    double best_value = block_value(grid, phi_plus, row, 0);
    for (std::size_t a = 1; a < grid.features.layout().num_blocks; ++a) {
        const double value = block_value(grid, phi_plus, row, a);
        if (value > best_value) {
            best = a;
            best_value = value;
        }
    }
    return best;
}

double greedy_action_continuous(const LocalModelGrid& grid, std::span<const double> s) {
    if (grid.mode != ActionMode::continuous) throw InputError("greedy_action_continuous: grid is discrete-mode");
    if (grid.zs.empty()) throw InputError("greedy_action_continuous: empty grid");
    const Eigen::VectorXd phi_plus = grid.features.state_features(s);
    const Eigen::VectorXd values = grid.B * phi_plus;
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.zs.size(); ++i) {
        if (values(idx(i)) > values(idx(best))) best = i;
    }
    return grid.zs[best];
}

ActionRule greedy_rule(const LocalModelGrid& grid) {
    auto shared = std::make_shared<const LocalModelGrid>(grid);
    if (shared->mode == ActionMode::continuous) {
        return [shared](std::span<const double> s, double) { return greedy_action_continuous(*shared, s); };
    }
    return [shared](std::span<const double> s, double x) {
        return static_cast<double>(greedy_action_discrete(*shared, s, x));
    };
}

void PolicyIterationConfig::validate() const {
    if (max_policy_iters == 0) throw InputError("policy iteration: max_policy_iters must be at least 1");
    if (!(frob_epsilon > 0.0)) throw InputError("policy iteration: frob_epsilon must be positive");
}

PolicyIterationResult ksh_lspi(const BatchDataset& data, const FeatureMap& features, const KernelSpec& kernel,
                               const std::vector<double>& zs, const SolverConfig& solver,
                               const GridFitOptions& options, const PolicyIterationConfig& pi,
                               const ActionRule& initial_policy) {
    pi.validate();
    PolicyIterationResult result;
    Eigen::MatrixXd previous =
        Eigen::MatrixXd::Zero(idx(zs.size()), idx(features.layout().num_coefficients()));
    for (std::size_t iter = 0; iter < pi.max_policy_iters; ++iter) {
        GridFitOptions step = options;
        if (iter == 0) {
            step.next_action = initial_policy ? NextActionSource::policy : NextActionSource::observed;
            step.policy = initial_policy;
        } else {
            step.next_action = NextActionSource::policy;
            step.policy = greedy_rule(result.grid);
            step.initial = previous;
        }
        try {
            result.grid = fit_local_grid(data, features, kernel, zs, solver, step);
        } catch (const NumericalError& e) {
            throw NumericalError("policy iteration " + std::to_string(iter + 1) + ": " + e.what());
        } catch (const InputError& e) {
            throw InputError("policy iteration " + std::to_string(iter + 1) + ": " + e.what());
        }
        const double delta = (result.grid.B - previous).norm();
        result.frobenius_deltas.push_back(delta);
        previous = result.grid.B;
        if (delta < pi.frob_epsilon) {
            result.converged = true;
            break;
        }
    }
    result.stop_reason = result.converged ? "converged" : "max-iterations";
    return result;
}

}  // namespace kshrl
