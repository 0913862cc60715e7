#include <random>

#include "doctest.h"

#include "helpers.hpp"
#include "kshrl/error.hpp"
#include "kshrl/policy.hpp"

using namespace kshrl;

namespace {

// Hand-built 2-feature discrete grid: candidate is feature 0, so each block
// is [intercept, 4 coefficients of feature 1].
LocalModelGrid discrete_grid(std::vector<double> zs, std::size_t k = 2) {
    BatchDataset data = testutil::chain_dataset({0.1, 0.4, 0.9, 0.3}, {0, 1, 0, 1}, {1, 2, 3, 4}, k);
    for (auto& tr : data.transitions) {
        tr.state = {tr.state[0], 1.0 - tr.state[0]};
        tr.next_state = {tr.next_state[0], 0.5};
    }
    data.dim = 2;
    const BasisSpec spec = BasisSpec::bspline(4, 2);
    LocalModelGrid grid;
    grid.features = FeatureMap(spec, fit_centering(spec, data), FeatureLayout{2, 0, 4, k});
    grid.candidate = CandidateChoice::state_feature(0);
    grid.zs = std::move(zs);
    grid.B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.zs.size()),
                                   static_cast<Eigen::Index>(grid.features.layout().num_coefficients()));
    return grid;
}

LocalModelGrid continuous_grid(std::vector<double> zs) {
    LocalModelGrid grid = discrete_grid(std::move(zs), 1);
    grid.mode = ActionMode::continuous;
    grid.candidate = CandidateChoice::the_action();
    grid.features = FeatureMap(grid.features.spec(), grid.features.stats(), FeatureLayout{2, std::nullopt, 4, 1});
    grid.B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.zs.size()), 9);
    return grid;
}

}  // namespace

TEST_CASE("nearest grid point with lower-index ties") {
    const std::vector<double> zs{0.0, 0.5, 1.0};
    CHECK(nearest_grid_index(zs, 0.6) == 1);
    CHECK(nearest_grid_index(zs, 0.25) == 0);
    CHECK(nearest_grid_index(zs, 0.75) == 1);
    CHECK(nearest_grid_index(zs, 2.0) == 2);
    CHECK_THROWS_AS(nearest_grid_index({}, 0.5), InputError);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::vector<double> fine{0.0, 0.1, 0.35, 0.7, 0.71, 1.0};
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng);
        const std::size_t best = nearest_grid_index(fine, x);
        for (double z : fine) REQUIRE(std::abs(x - fine[best]) <= std::abs(x - z));
    }
}

TEST_CASE("Q values from hand-built coefficients") {
    LocalModelGrid grid = discrete_grid({0.0, 0.5, 1.0});
    const std::vector<double> s{0.6, 0.2};
    CHECK(q_value(grid, s, 1, 0.6) == 0.0);
    grid.B(1, 5) = 3.0;  // intercept of block 1 at z = 0.5
    CHECK(q_value(grid, s, 1, 0.6) == 3.0);
    CHECK(q_value(grid, std::vector<double>{0.1, 0.9}, 1, 0.5) == 3.0);
    CHECK(q_value(grid, s, 0, 0.6) == 0.0);
    CHECK(q_value(grid, s, 1, 0.9) == 0.0);
    // Clamped candidate.
    grid.B(2, 5) = -1.0;
    CHECK(q_value(grid, s, 1, 7.0) == -1.0);
    CHECK_THROWS_AS(q_value(grid, s, 2, 0.5), InputError);
    CHECK_THROWS_AS(q_value(grid, s, 0.5, 0.5), InputError);
    // Feature coefficients contribute through the centered basis.
    grid.B.row(1).segment(6, 4) << 1.0, 2.0, 3.0, 4.0;
    const Eigen::VectorXd psi = grid.features.centered(1, 0.2);
    CHECK(q_value(grid, s, 1, 0.5) == doctest::Approx(3.0 + psi.dot(Eigen::Vector4d(1, 2, 3, 4))));
}

TEST_CASE("discrete greedy action") {
    LocalModelGrid grid = discrete_grid({0.0, 0.5, 1.0});
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    SUBCASE("identical blocks pick action 0") {
        grid.B.setRandom();
        grid.B.rightCols(5) = grid.B.leftCols(5);
        for (int i = 0; i < 100; ++i) CHECK(greedy_action_discrete(grid, std::vector<double>{u(rng), u(rng)}) == 0);
    }
    SUBCASE("a dominant intercept wins everywhere") {
        grid.B.col(5).setConstant(1.0);
        for (int i = 0; i < 100; ++i) CHECK(greedy_action_discrete(grid, std::vector<double>{u(rng), u(rng)}) == 1);
    }
    SUBCASE("the row is chosen by the candidate feature") {
        grid.B(1, 5) = 1.0;
        CHECK(greedy_action_discrete(grid, std::vector<double>{0.6, 0.0}) == 1);
        CHECK(greedy_action_discrete(grid, std::vector<double>{0.9, 0.0}) == 0);
        CHECK(greedy_action_discrete(grid, std::vector<double>{0.9, 0.0}, 0.4) == 1);
    }
    SUBCASE("shifting every intercept of a row leaves the argmax unchanged") {
        grid.B.setRandom();
        for (int i = 0; i < 200; ++i) {
            const std::vector<double> s{u(rng), u(rng)};
            const std::size_t before = greedy_action_discrete(grid, s);
            LocalModelGrid shifted = grid;
            shifted.B.col(0).array() += 2.5;
            shifted.B.col(5).array() += 2.5;
            REQUIRE(greedy_action_discrete(shifted, s) == before);
        }
    }
    SUBCASE("candidate must be a state feature for the implicit form") {
        grid.candidate = CandidateChoice::external();
        CHECK_THROWS_AS(greedy_action_discrete(grid, std::vector<double>{0.5, 0.5}), InputError);
        CHECK(greedy_action_discrete(grid, std::vector<double>{0.5, 0.5}, 0.5) == 0);
    }
}

TEST_CASE("continuous greedy action") {
    SUBCASE("single grid point") {
        LocalModelGrid grid = continuous_grid({0.5});
        grid.B.setRandom();
        CHECK(greedy_action_continuous(grid, std::vector<double>{0.3, 0.2}) == 0.5);
    }
    SUBCASE("dominant row and ties") {
        LocalModelGrid grid = continuous_grid({0.0, 0.5, 1.0});
        CHECK(greedy_action_continuous(grid, std::vector<double>{0.3, 0.2}) == 0.0);
        grid.B(1, 0) = 1.0;
        CHECK(greedy_action_continuous(grid, std::vector<double>{0.3, 0.2}) == 0.5);
        CHECK(greedy_action_continuous(grid, std::vector<double>{0.9, 0.9}) == 0.5);
        CHECK_THROWS_AS(greedy_action_discrete(grid, std::vector<double>{0.3, 0.2}, 0.1), InputError);
    }
    SUBCASE("rule wrapper") {
        LocalModelGrid grid = continuous_grid({0.0, 1.0});
        grid.B(1, 0) = 1.0;
        const ActionRule rule = greedy_rule(grid);
        grid.B(1, 0) = -1.0;  // the rule keeps its own copy
        CHECK(rule(std::vector<double>{0.2, 0.2}, 0.0) == 1.0);
    }
}

TEST_CASE("policy iteration bookkeeping") {
    const auto prob = testutil::sim_problem(3, 30, 6, 9, BasisSpec::bspline(4, 2));
    const KernelSpec kernel{KernelFamily::gaussian, 0.3};
    const auto zs = evenly_spaced_grid(5);
    GridFitOptions opts;
    opts.method = FitMethod::analytic;
    opts.gamma = 0.5;
    SolverConfig solver;

    SUBCASE("one iteration is behavioral policy evaluation") {
        const auto res = ksh_lspi(prob.data, prob.map, kernel, zs, solver, opts, {1, 1e-4});
        CHECK(res.frobenius_deltas.size() == 1);
        CHECK(res.stop_reason == "max-iterations");
        const auto eval = fit_local_grid(prob.data, prob.map, kernel, zs, solver, opts);
        CHECK(res.grid.B == eval.B);
        CHECK(res.frobenius_deltas[0] == doctest::Approx(eval.B.norm()));
    }
    SUBCASE("with gamma = 0 the second iteration repeats the first") {
        // Start from an explicit policy so every pass uses the same rows
        // (behavioral passes drop transitions without an observed next action).
        GridFitOptions g0 = opts;
        g0.gamma = 0.0;
        const ActionRule start = [](std::span<const double>, double) { return 1.0; };
        const auto res = ksh_lspi(prob.data, prob.map, kernel, zs, solver, g0, {5, 1e-6}, start);
        REQUIRE(res.frobenius_deltas.size() == 2);
        CHECK(res.frobenius_deltas[1] < 1e-9);
        CHECK(res.converged);
        CHECK(res.stop_reason == "converged");
    }
    SUBCASE("later iterations evaluate the previous greedy policy") {
        const auto res = ksh_lspi(prob.data, prob.map, kernel, zs, solver, opts, {2, 1e-12});
        const auto first = ksh_lspi(prob.data, prob.map, kernel, zs, solver, opts, {1, 1e-12});
        GridFitOptions pol = opts;
        pol.next_action = NextActionSource::policy;
        pol.policy = greedy_rule(first.grid);
        CHECK(testutil::max_abs_diff(res.grid.B, fit_local_grid(prob.data, prob.map, kernel, zs, solver, pol).B) < 1e-12);
        CHECK(res.frobenius_deltas.size() == 2);
    }
    SUBCASE("deterministic") {
        GridFitOptions cd = opts;
        cd.method = FitMethod::coordinate_descent;
        const auto a = ksh_lspi(prob.data, prob.map, kernel, zs, solver, cd, {3, 1e-4});
        const auto b = ksh_lspi(prob.data, prob.map, kernel, zs, solver, cd, {3, 1e-4});
        CHECK(a.grid.B == b.grid.B);
        CHECK(a.frobenius_deltas == b.frobenius_deltas);
    }
    SUBCASE("configuration errors") {
        CHECK_THROWS_AS(ksh_lspi(prob.data, prob.map, kernel, zs, solver, opts, {0, 1e-4}), InputError);
        CHECK_THROWS_AS(ksh_lspi(prob.data, prob.map, kernel, zs, solver, opts, {3, 0.0}), InputError);
    }
}
