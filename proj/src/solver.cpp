#include "kshrl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "kshrl/error.hpp"
#include "kshrl/parallel.hpp"
#include "kshrl/random.hpp"

namespace kshrl {

namespace {

std::string at_z(double z) {
    std::ostringstream os;
    os.precision(17);
    os << "z=" << z << ": ";
    return os.str();
}

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

}  // namespace

void SolverConfig::validate() const {
    if (!(lambda >= 0.0)) throw InputError("solver: lambda must be nonnegative");
    if (step_rule == StepRule::fixed && !(mu > 0.0)) throw InputError("solver: step size mu must be positive");
    if (!(epsilon > 0.0)) throw InputError("solver: epsilon must be positive");
    if (max_iter == 0) throw InputError("solver: max_iter must be positive");
    if (!(ridge >= 0.0)) throw InputError("solver: ridge must be nonnegative");
    if (!(overflow_bound > 0.0)) throw InputError("solver: overflow bound must be positive");
}

FixedPointSystem assemble_system(const DesignMatrices& design, const Eigen::VectorXd& weights, double gamma,
                                 double z) {
    const Eigen::Index n = design.phi.rows();
    if (design.phi_next.rows() != n || design.phi_next.cols() != design.phi.cols() || design.rewards.size() != n ||
        weights.size() != n) {
        throw InputError("assemble_system: dimension mismatch between design, rewards and weights");
    }
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("assemble_system: gamma must lie in [0, 1)");
    FixedPointSystem sys;
    sys.gamma = gamma;
    sys.z = z;
    const Eigen::MatrixXd weighted = weights.asDiagonal() * design.phi;
    sys.A = weighted.transpose() * (design.phi - gamma * design.phi_next);
    sys.b = weighted.transpose() * design.rewards;
    return sys;
}

Eigen::VectorXd solve_analytic(const FixedPointSystem& sys, double ridge) {
    if (!(ridge >= 0.0)) throw InputError("solve_analytic: ridge must be nonnegative");
    const Eigen::Index p = sys.A.rows();
    if (sys.A.cols() != p || sys.b.size() != p) throw InputError("solve_analytic: dimension mismatch");
    Eigen::MatrixXd lhs = sys.A;
    lhs.diagonal().array() += ridge;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(lhs);
    if (qr.rank() < p) {
        throw NumericalError(at_z(sys.z) + "fixed-point system is singular (rank " + std::to_string(qr.rank()) +
                             " of " + std::to_string(p) + "); use a ridge > 0");
    }
    Eigen::VectorXd beta = qr.solve(sys.b);
    if (!beta.allFinite()) throw NumericalError(at_z(sys.z) + "analytic solve produced non-finite coefficients");
    return beta;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t) {
    if (!(t >= 0.0)) throw InputError("soft_threshold: threshold must be nonnegative");
    const double norm = v.norm();
    if (norm <= t) return Eigen::VectorXd::Zero(v.size());
    return v * ((norm - t) / norm);
}

std::vector<CoefficientGroup> make_groups(const FeatureLayout& layout) {
    std::vector<CoefficientGroup> groups;
    const double intercept_scale = std::sqrt(static_cast<double>(layout.m));
    for (std::size_t a = 0; a < layout.num_blocks; ++a) {
        groups.push_back({a, std::nullopt, layout.intercept_offset(a), 1, intercept_scale});
        for (std::size_t j : layout.included_features()) {
            groups.push_back({a, j, layout.feature_offset(a, j), layout.m, 1.0});
        }
    }
    return groups;
}

Eigen::VectorXd group_gradient(const DesignMatrices& design, const Eigen::VectorXd& weights, double gamma,
                               const Eigen::VectorXd& beta, const CoefficientGroup& group) {
    const Eigen::Index p = design.phi.cols();
    if (beta.size() != p) throw InputError("group_gradient: beta has the wrong dimension");
    if (group.size == 0 || group.offset + group.size > static_cast<std::size_t>(p)) {
        throw InputError("group_gradient: unknown group at offset " + std::to_string(group.offset));
    }
    if (weights.size() != design.phi.rows()) throw InputError("group_gradient: weight vector has the wrong length");
    const Eigen::VectorXd residual = (design.phi - gamma * design.phi_next) * beta - design.rewards;
    return design.phi.middleCols(idx(group.offset), idx(group.size)).transpose() *
           (weights.array() * residual.array()).matrix();
}

FixedPointSystem with_sum_to_zero(const FixedPointSystem& sys, const std::vector<CoefficientGroup>& groups) {
    FixedPointSystem out = sys;
    double scale = sys.A.diagonal().cwiseAbs().mean();
    if (!(scale > 0.0)) scale = 1.0;
    for (const auto& g : groups) {
        if (g.is_intercept()) continue;
        out.A.block(idx(g.offset), idx(g.offset), idx(g.size), idx(g.size)).array() += scale;
    }
    return out;
}

namespace {

double block_norm(const FixedPointSystem& sys, const CoefficientGroup& g) {
    const Eigen::MatrixXd block = sys.A.block(idx(g.offset), idx(g.offset), idx(g.size), idx(g.size));
    return Eigen::JacobiSVD<Eigen::MatrixXd>(block).singularValues()(0);
}

}  // namespace

double auto_step_size(const FixedPointSystem& sys, const std::vector<CoefficientGroup>& groups) {
    double largest = 0.0;
    for (const auto& g : groups) largest = std::max(largest, block_norm(sys, g));
    if (!(largest > 0.0)) throw NumericalError(at_z(sys.z) + "cannot choose a step size for a zero system");
    return 1.0 / largest;
}

std::vector<double> group_step_sizes(const FixedPointSystem& sys, const std::vector<CoefficientGroup>& groups,
                                     const SolverConfig& config) {
    switch (config.step_rule) {
        case StepRule::fixed: return std::vector<double>(groups.size(), config.mu);
        case StepRule::global_auto: return std::vector<double>(groups.size(), auto_step_size(sys, groups));
        case StepRule::per_group: break;
    }
    // A group with no weighted data keeps its coefficients; give it the
    // smallest step of the others so it still moves if coupled.
    std::vector<double> mu(groups.size(), 0.0);
    double largest_norm = 0.0;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const double n = block_norm(sys, groups[gi]);
        largest_norm = std::max(largest_norm, n);
        mu[gi] = n > 0.0 ? 1.0 / n : 0.0;
    }
    if (!(largest_norm > 0.0)) throw NumericalError(at_z(sys.z) + "cannot choose a step size for a zero system");
    for (double& m : mu) {
        if (m == 0.0) m = 1.0 / largest_norm;
    }
    return mu;
}

LocalModel ksh_lstdq(const FixedPointSystem& sys, const SolverConfig& config,
                     const std::vector<CoefficientGroup>& groups, const Eigen::VectorXd& initial,
                     std::uint64_t stream) {
    config.validate();
    const Eigen::Index p = sys.A.rows();
    if (sys.A.cols() != p || sys.b.size() != p) throw InputError("ksh_lstdq: dimension mismatch");

    // Slot 0 holds the intercepts; slot k the k-th included feature. A drawn
    // slot updates its group in every action block.
    std::vector<std::vector<std::size_t>> slots;
    std::size_t covered = 0;
    std::size_t max_block = 0;
    for (const auto& g : groups) max_block = std::max(max_block, g.block);
    std::vector<std::size_t> per_block_rank(max_block + 1, 0);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const std::size_t rank = per_block_rank[groups[gi].block]++;
        if (slots.size() <= rank) slots.resize(rank + 1);
        slots[rank].push_back(gi);
        covered += groups[gi].size;
        if (groups[gi].offset + groups[gi].size > static_cast<std::size_t>(p)) {
            throw InputError("ksh_lstdq: group exceeds coefficient vector");
        }
    }
    if (covered != static_cast<std::size_t>(p)) throw InputError("ksh_lstdq: groups do not partition the coefficients");

    LocalModel model;
    model.z = sys.z;
    model.beta = initial.size() == 0 ? Eigen::VectorXd::Zero(p) : initial;
    if (model.beta.size() != p) throw InputError("ksh_lstdq: initial coefficients have the wrong dimension");

    const std::vector<double> mu = group_step_sizes(sys, groups, config);
    std::vector<double> tau(groups.size());
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const double lambda_g = config.lambda * groups[gi].penalty_scale;
        tau[gi] = config.threshold == ThresholdConvention::standard ? mu[gi] * lambda_g : lambda_g / mu[gi];
    }

    Rng rng = make_rng(config.seed, stream);
    std::vector<std::size_t> order(slots.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    FitDiagnostics& diag = model.diagnostics;
    diag.z = sys.z;
    diag.step_size = *std::min_element(mu.begin(), mu.end());
    diag.converged = false;
    Eigen::VectorXd previous(p);
    for (std::size_t pass = 1; pass <= config.max_iter; ++pass) {
        previous = model.beta;
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t slot : order) {
            for (std::size_t gi : slots[slot]) {
                const auto off = idx(groups[gi].offset);
                const auto size = idx(groups[gi].size);
                const Eigen::VectorXd grad = sys.A.middleRows(off, size) * model.beta - sys.b.segment(off, size);
                model.beta.segment(off, size) = soft_threshold(model.beta.segment(off, size) - mu[gi] * grad, tau[gi]);
            }
        }
        const double norm = model.beta.norm();
        if (!std::isfinite(norm) || norm > config.overflow_bound) {
            throw NumericalError(at_z(sys.z) + "coordinate descent diverged after " + std::to_string(pass) +
                                 " passes; use a smaller step size mu, or, if the local system is not positive stable, a wider "
                                 "bandwidth, a smaller gamma, or the analytic method");
        }
        diag.iterations = pass;
        diag.last_change = (model.beta - previous).norm();
        if (diag.last_change < config.epsilon) {
            diag.converged = true;
            break;
        }
    }
    return model;
}

std::vector<double> evenly_spaced_grid(std::size_t count) {
    if (count == 0) throw InputError("grid must contain at least one point");
    if (count == 1) return {0.5};
    std::vector<double> zs(count);
    for (std::size_t i = 0; i < count; ++i) zs[i] = static_cast<double>(i) / static_cast<double>(count - 1);
    return zs;
}

LocalModelGrid fit_local_grid(const BatchDataset& data, const FeatureMap& features, const KernelSpec& kernel,
                              const std::vector<double>& zs, const SolverConfig& config,
                              const GridFitOptions& options) {
    const DesignMatrices design = build_design(features, data, options.next_action, options.policy);
    if (design.num_rows() == 0) throw InputError("fit_local_grid: no usable transitions");
    return fit_local_grid(design, features, data.mode, data.candidate, kernel, zs, config, options);
}

LocalModelGrid fit_local_grid(const DesignMatrices& design, const FeatureMap& features, ActionMode mode,
                              const CandidateChoice& candidate, const KernelSpec& kernel,
                              const std::vector<double>& zs, const SolverConfig& config,
                              const GridFitOptions& options) {
    config.validate();
    kernel.validate();
    if (zs.empty()) throw InputError("fit_local_grid: empty grid");
    for (std::size_t i = 0; i < zs.size(); ++i) {
        if (!(zs[i] >= 0.0 && zs[i] <= 1.0)) throw InputError("fit_local_grid: grid values must lie in [0,1]");
        if (i > 0 && !(zs[i] > zs[i - 1])) throw InputError("fit_local_grid: grid must be strictly increasing");
    }
    const std::size_t p = features.layout().num_coefficients();
    if (static_cast<std::size_t>(design.phi.cols()) != p) throw InputError("fit_local_grid: design does not match layout");
    if (options.initial && (static_cast<std::size_t>(options.initial->rows()) != zs.size() ||
                            static_cast<std::size_t>(options.initial->cols()) != p)) {
        throw InputError("fit_local_grid: initial coefficients must be M x p");
    }

    LocalModelGrid grid;
    grid.features = features;
    grid.kernel = kernel;
    grid.mode = mode;
    grid.candidate = candidate;
    grid.gamma = options.gamma;
    grid.zs = zs;
    grid.B = Eigen::MatrixXd::Zero(idx(zs.size()), idx(p));
    grid.diagnostics.resize(zs.size());

    const std::vector<CoefficientGroup> groups = make_groups(features.layout());
    const bool constrain = features.spec().family == BasisFamily::bspline;

    auto fit_one = [&](std::size_t i, const Eigen::VectorXd& start) {
        const double z = zs[i];
        try {
            const KernelWeights w = weight_vector(kernel, design.candidates, z);
            const FixedPointSystem sys = assemble_system(design, w.w, options.gamma, z);
            LocalModel model;
            if (options.method == FitMethod::analytic) {
                model.z = z;
                model.beta = solve_analytic(constrain ? with_sum_to_zero(sys, groups) : sys, config.ridge);
                model.diagnostics.z = z;
            } else {
                model = ksh_lstdq(sys, config, groups, start, i);
            }
            model.diagnostics.ess = w.ess;
            if (w.ess < static_cast<double>(p)) {
                std::ostringstream os;
                os.precision(4);
                os << "effective sample size " << w.ess << " is below the coefficient count " << p;
                model.diagnostics.warnings.push_back(os.str());
            }
            if (options.method == FitMethod::coordinate_descent && !model.diagnostics.converged) {
                model.diagnostics.warnings.push_back("coordinate descent hit max_iter before converging");
            }
            grid.B.row(idx(i)) = model.beta.transpose();
            grid.diagnostics[i] = std::move(model.diagnostics);
        } catch (const NumericalError& e) {
            const std::string msg = e.what();
            throw NumericalError(msg.rfind("z=", 0) == 0 ? msg : at_z(z) + msg);
        } catch (const InputError& e) {
            throw InputError(at_z(z) + e.what());
        }
    };

    const bool chained = options.method == FitMethod::coordinate_descent && options.warm_start && !options.initial;
    if (chained) {
        Eigen::VectorXd start = Eigen::VectorXd::Zero(idx(p));
        for (std::size_t i = 0; i < zs.size(); ++i) {
            fit_one(i, start);
            start = grid.B.row(idx(i)).transpose();
        }
    } else {
        parallel_for(zs.size(), options.threads, [&](std::size_t i) {
            const Eigen::VectorXd start = options.initial ? Eigen::VectorXd(options.initial->row(idx(i)).transpose())
                                                          : Eigen::VectorXd::Zero(idx(p));
            fit_one(i, start);
        });
    }
    return grid;
}

std::vector<ComponentPoint> extract_marginal(const LocalModelGrid& grid, std::size_t action) {
    const FeatureLayout& layout = grid.features.layout();
    if (action >= layout.num_blocks) throw InputError("extract_marginal: action out of range");
    std::vector<ComponentPoint> out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out.push_back({grid.zs[i], 0.0, grid.B(idx(i), idx(layout.intercept_offset(action)))});
    }
    return out;
}

std::vector<ComponentPoint> extract_joint(const LocalModelGrid& grid, std::size_t feature, std::size_t action,
                                          const std::vector<double>& feature_grid) {
    const FeatureLayout& layout = grid.features.layout();
    if (action >= layout.num_blocks) throw InputError("extract_joint: action out of range");
    const std::size_t offset = layout.feature_offset(action, feature);
    std::vector<Eigen::VectorXd> basis;
    for (double s : feature_grid) basis.push_back(grid.features.centered(feature, s));
    std::vector<ComponentPoint> out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Eigen::VectorXd coef = grid.B.row(idx(i)).segment(idx(offset), idx(layout.m)).transpose();
        for (std::size_t k = 0; k < feature_grid.size(); ++k) {
            out.push_back({grid.zs[i], feature_grid[k], basis[k].dot(coef)});
        }
    }
    return out;
}

}  // namespace kshrl
