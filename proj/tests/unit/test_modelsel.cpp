#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"

#include "helpers.hpp"
#include "kshrl/error.hpp"
#include "kshrl/modelsel.hpp"

using namespace kshrl;

namespace {

// Grid whose Q is the constant c for every (s, a, x).
LocalModelGrid constant_grid(const BatchDataset& data, double c) {
    const BasisSpec spec = BasisSpec::bspline(4, 2);
    LocalModelGrid grid;
    grid.features = FeatureMap(spec, fit_centering(spec, data), layout_for(data, spec));
    grid.candidate = data.candidate;
    grid.zs = {0.0, 0.5, 1.0};
    const auto& layout = grid.features.layout();
    grid.B = Eigen::MatrixXd::Zero(3, static_cast<Eigen::Index>(layout.num_coefficients()));
    for (std::size_t a = 0; a < layout.num_blocks; ++a) grid.B.col(static_cast<Eigen::Index>(layout.intercept_offset(a))).setConstant(c);
    return grid;
}

sim::SimSample small_sim(std::uint64_t seed, std::size_t n = 12) {
    sim::SimMDPConfig cfg;
    cfg.d = 3;
    cfg.seed = seed;
    return sim::sample_trajectories(cfg, n, 6);
}

Hyperparameters small_hyper() {
    Hyperparameters h;
    h.basis = BasisSpec::bspline(4, 2);
    h.kernel = {KernelFamily::gaussian, 0.3};
    h.grid_size = 5;
    h.method = FitMethod::analytic;
    return h;
}

}  // namespace

TEST_CASE("loss collapses") {
    const BatchDataset data = testutil::chain_dataset({0.1, 0.4, 0.9, 0.3, 0.7}, {0, 1, 0, 1, 1}, {1, 2, 3, 4, 5});
    double mean_sq = 0.0;
    for (const auto& tr : data.transitions) mean_sq += tr.reward * tr.reward;
    mean_sq /= 4.0;
    CHECK(validation_mse(constant_grid(data, 0.0), data) == doctest::Approx(mean_sq));
    CHECK(bellman_loss(constant_grid(data, 0.0), data, 0.0) == doctest::Approx(mean_sq));
    // The last transition has no observed next action and is skipped.
    CHECK(bellman_loss(constant_grid(data, 0.0), data, 0.9) == doctest::Approx((1.0 + 4.0 + 9.0) / 3.0));

    BatchDataset flat = data;
    for (auto& tr : flat.transitions) tr.reward = 2.5;
    CHECK(validation_mse(constant_grid(flat, 2.5), flat) == 0.0);
    // Bellman residual of a constant c is c - r - gamma c over transitions
    // that have an observed next action (3 of the 4 here).
    const double res = 2.0 - 2.5 - 0.5 * 2.0;
    CHECK(bellman_loss(constant_grid(flat, 2.0), flat, 0.5) == doctest::Approx(res * res));
    // With an explicit policy every transition counts.
    const ActionRule pol = [](std::span<const double>, double) { return 1.0; };
    CHECK(bellman_loss(constant_grid(flat, 2.0), flat, 0.5, pol) == doctest::Approx(res * res));

    BatchDataset empty = data;
    empty.transitions.clear();
    CHECK_THROWS_AS(validation_mse(constant_grid(data, 0.0), empty), InputError);
    BatchDataset lone = testutil::chain_dataset({0.1, 0.4}, {0, 1}, {1, 2});
    CHECK_THROWS_AS(bellman_loss(constant_grid(data, 0.0), lone, 0.5), InputError);
    CHECK_NOTHROW(bellman_loss(constant_grid(data, 0.0), lone, 0.0));
}

TEST_CASE("fold assignment") {
    const BatchDataset data = small_sim(1, 13).data;
    const auto folds = assign_folds(data, 5, 42);
    REQUIRE(folds.size() == 5);
    std::multiset<std::string> seen;
    std::size_t smallest = 100, largest = 0;
    for (const auto& f : folds) {
        seen.insert(f.begin(), f.end());
        smallest = std::min(smallest, f.size());
        largest = std::max(largest, f.size());
        CHECK(std::is_sorted(f.begin(), f.end()));
    }
    const auto ids = data.trajectory_ids();
    CHECK(seen == std::multiset<std::string>(ids.begin(), ids.end()));
    CHECK(largest - smallest <= 1);
    CHECK(assign_folds(data, 5, 42) == folds);
    CHECK(assign_folds(data, 5, 43) != folds);

    BatchDataset reversed = data;
    std::reverse(reversed.transitions.begin(), reversed.transitions.end());
    CHECK(assign_folds(reversed, 5, 42) == folds);

    CHECK_THROWS_AS(assign_folds(data, 1, 0), InputError);
    CHECK_THROWS_AS(assign_folds(data, 14, 0), InputError);
}

TEST_CASE("k-fold cross-validation") {
    const BatchDataset raw = small_sim(2).data;
    const Hyperparameters h = small_hyper();
    const auto losses = k_fold_cv(raw, 3, h, LossKind::bellman, 5);
    REQUIRE(losses.size() == 3);
    for (double l : losses) CHECK((std::isfinite(l) && l >= 0.0));

    SUBCASE("deterministic, thread- and order-invariant") {
        CHECK(k_fold_cv(raw, 3, h, LossKind::bellman, 5) == losses);
        CHECK(k_fold_cv(raw, 3, h, LossKind::bellman, 5, 3) == losses);
        BatchDataset reversed = raw;
        std::reverse(reversed.transitions.begin(), reversed.transitions.end());
        CHECK(k_fold_cv(reversed, 3, h, LossKind::bellman, 5) == losses);
    }
    SUBCASE("the mse loss refits with gamma = 0 on the training folds only") {
        const auto folds = assign_folds(raw, 3, 5);
        std::vector<std::string> train;
        for (std::size_t g = 1; g < 3; ++g) train.insert(train.end(), folds[g].begin(), folds[g].end());
        Hyperparameters h0 = h;
        h0.gamma = 0.0;
        const FittedModel m = fit_model(canonical_order(raw.subset(train)), h0);
        const BatchDataset valid = apply_normalization(canonical_order(raw.subset(folds[0])), m.normalization);
        const double expect = validation_mse(m.grid, valid);
        CHECK(k_fold_cv(raw, 3, h, LossKind::mse, 5)[0] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("grid search") {
    const BatchDataset raw = small_sim(3).data;
    HyperGrid grid;
    grid.bases = {BasisSpec::bspline(4, 2)};
    grid.bandwidths = {0.3};
    grid.grid_sizes = {5};
    grid.method = FitMethod::analytic;

    SUBCASE("a single combination is the best") {
        const auto res = grid_search(raw, grid, 3, LossKind::mse, 1);
        REQUIRE(res.rows.size() == 1);
        CHECK(res.best == 0);
        CHECK(res.rows[0].error.empty());
    }
    SUBCASE("enumeration order and duplicate ties") {
        grid.lambdas = {0.0, 0.0};
        grid.gammas = {0.0, 0.5};
        const auto combos = grid.combinations();
        REQUIRE(combos.size() == 4);
        CHECK(combos[1].gamma == 0.5);
        CHECK(combos[2].gamma == 0.0);
        const auto res = grid_search(raw, grid, 3, LossKind::bellman, 1, 2);
        CHECK(res.rows[0].mean_loss == res.rows[2].mean_loss);
        CHECK(res.rows[1].mean_loss == res.rows[3].mean_loss);
        CHECK((res.best == 0 || res.best == 1));
    }
    SUBCASE("failing combinations get infinite loss and a message") {
        grid.kernel = KernelFamily::boxcar;
        grid.bandwidths = {1e-4, 0.5};
        const auto res = grid_search(raw, grid, 3, LossKind::mse, 1);
        CHECK(std::isinf(res.rows[0].mean_loss));
        CHECK(!res.rows[0].error.empty());
        CHECK(res.best == 1);
        std::ostringstream out;
        write_cv_csv(out, res);
        const std::string text = out.str();
        CHECK(text.rfind("combination,basis,m,degree,kernel,bandwidth,lambda,mu,gamma,grid_size,ridge,fold_1,fold_2,fold_3,mean_loss,best,error\n", 0) == 0);
        CHECK(text.find("\n1,bspline,4,2,boxcar,0.5,") != std::string::npos);
        CHECK(text.find(",inf,0,\"") != std::string::npos);
    }
    SUBCASE("empty grid") {
        grid.lambdas.clear();
        CHECK_THROWS_AS(grid.combinations(), InputError);
    }
}
