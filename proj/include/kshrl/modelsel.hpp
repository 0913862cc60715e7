#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "kshrl/basis.hpp"
#include "kshrl/dataset.hpp"
#include "kshrl/model.hpp"
#include "kshrl/solver.hpp"

namespace kshrl {

/// Mean squared empirical Bellman residual (Q(s,a) - r - gamma Q(s',a'))^2,
/// both Q values taken from the local model nearest to the transition's
/// candidate. a' is the observed next action unless `policy` is given;
/// transitions without one are skipped (only needed when gamma > 0).
double bellman_loss(const LocalModelGrid& grid, const BatchDataset& data, double gamma,
                    const ActionRule& policy = {});

/// Mean of (Q(s,a) - r)^2 for a grid fitted with gamma = 0.
double validation_mse(const LocalModelGrid& grid, const BatchDataset& data);

enum class LossKind { bellman, mse };

/// Trajectory-level fold of every trajectory id: ids are sorted, shuffled
/// with `seed`, and dealt round-robin into k folds.
std::vector<std::vector<std::string>> assign_folds(const BatchDataset& data, std::size_t k, std::uint64_t seed);

/// Per-fold validation losses. Each fold normalizes and centers on its
/// training trajectories only. The mse loss refits with gamma = 0.
std::vector<double> k_fold_cv(const BatchDataset& raw, std::size_t k, const Hyperparameters& hyper, LossKind loss,
                              std::uint64_t seed, std::size_t threads = 1);

/// Candidate values per hyperparameter; the search space is their
/// Cartesian product, enumerated with the last list varying fastest.
struct HyperGrid {
    std::vector<BasisSpec> bases{BasisSpec::bspline(5, 3)};
    KernelFamily kernel = KernelFamily::gaussian;
    std::vector<double> bandwidths{0.2};
    std::vector<double> lambdas{0.0};
    std::vector<double> mus{1e-3};
    std::vector<double> gammas{0.5};
    std::vector<std::size_t> grid_sizes{25};
    std::vector<double> ridges{1e-8};
    /// Remaining solver settings shared by every combination.
    SolverConfig solver;
    FitMethod method = FitMethod::coordinate_descent;

    std::vector<Hyperparameters> combinations() const;
};

struct CVRow {
    Hyperparameters hyper;
    std::vector<double> fold_losses;
    double mean_loss = 0.0;
    /// Non-empty when fitting failed; mean_loss is then +inf.
    std::string error;
};

struct CVResult {
    std::vector<CVRow> rows;
    std::size_t best = 0;
    std::size_t folds = 0;
};

/// Exhaustive k-fold search; mean-loss ties go to the earliest combination.
CVResult grid_search(const BatchDataset& raw, const HyperGrid& grid, std::size_t k, LossKind loss,
                     std::uint64_t seed, std::size_t threads = 1);

/// CSV: combination columns, fold_1..fold_k, mean_loss, error.
void write_cv_csv(std::ostream& out, const CVResult& result);

}  // namespace kshrl
