#include <random>

#include "doctest.h"

#include "helpers.hpp"
#include "kshrl/basis.hpp"
#include "kshrl/error.hpp"

using namespace kshrl;

namespace {

// Independent Cox-de Boor recursion, written directly from the definition.
double cox_de_boor(const std::vector<double>& t, std::size_t i, int p, double s) {
    if (p == 0) {
        const bool last = t[i + 1] == t.back() && s == t.back() && t[i] < t[i + 1];
        return (t[i] <= s && s < t[i + 1]) || last ? 1.0 : 0.0;
    }
    double left = 0.0;
    double right = 0.0;
    if (t[i + p] > t[i]) left = (s - t[i]) / (t[i + p] - t[i]) * cox_de_boor(t, i, p - 1, s);
    if (t[i + p + 1] > t[i + 1]) right = (t[i + p + 1] - s) / (t[i + p + 1] - t[i + 1]) * cox_de_boor(t, i + 1, p - 1, s);
    return left + right;
}

BatchDataset random_states(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BatchDataset data;
    data.dim = d;
    data.num_actions = 2;
    for (std::size_t i = 0; i < n; ++i) {
        Transition tr;
        for (std::size_t j = 0; j < d; ++j) tr.state.push_back(u(rng));
        for (std::size_t j = 0; j < d; ++j) tr.next_state.push_back(u(rng));
        tr.action = static_cast<double>(i % 2);
        tr.reward = u(rng);
        tr.trajectory_id = std::to_string(i / 4);
        tr.time_index = static_cast<std::int64_t>(i % 4);
        data.transitions.push_back(tr);
    }
    return data;
}

}  // namespace

TEST_CASE("B-spline values match an independent recursion") {
    for (auto [m, degree] : {std::pair<std::size_t, int>{5, 3}, {4, 2}, {6, 1}, {3, 0}}) {
        const BasisSpec spec = BasisSpec::bspline(m, degree);
        REQUIRE(spec.knots.size() == m + static_cast<std::size_t>(degree) + 1);
        for (double s : {0.0, 0.1, 0.37, 0.5, 0.99, 1.0}) {
            const Eigen::VectorXd v = eval_basis(spec, s);
            for (std::size_t l = 0; l < m; ++l) {
                CHECK(v(static_cast<Eigen::Index>(l)) == doctest::Approx(cox_de_boor(spec.knots, l, degree, s)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("partition of unity, nonnegativity and local support on random inputs") {
    Rng rng = make_rng(7, 0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const BasisSpec spec = BasisSpec::bspline(8, 3);
    for (int i = 0; i < 10000; ++i) {
        const Eigen::VectorXd v = eval_basis(spec, u(rng));
        CHECK(std::abs(v.sum() - 1.0) < 1e-10);
        CHECK(v.minCoeff() >= 0.0);
        CHECK((v.array() != 0.0).count() <= 4);
    }
}

TEST_CASE("degree 0 with one interior knot is an indicator basis") {
    const BasisSpec spec = BasisSpec::bspline(2, 0);
    CHECK(spec.knots == std::vector<double>{0.0, 0.5, 1.0});
    const Eigen::VectorXd v = eval_basis(spec, 0.25);
    CHECK(v(0) == 1.0);
    CHECK(v(1) == 0.0);
}

TEST_CASE("inputs outside [0,1] are clamped") {
    const BasisSpec spec = BasisSpec::bspline(5, 3);
    CHECK(eval_basis(spec, 1.2) == eval_basis(spec, 1.0));
    CHECK(eval_basis(spec, -3.0) == eval_basis(spec, 0.0));
}

TEST_CASE("trigonometric basis columns") {
    const BasisSpec spec = BasisSpec::trigonometric(3);
    const double s = 0.3;
    const Eigen::VectorXd v = eval_basis(spec, s);
    REQUIRE(v.size() == 3);
    const double two_pi = 2.0 * 3.14159265358979323846;
    CHECK(v(0) == doctest::Approx(std::sin(two_pi * s)));
    CHECK(v(1) == doctest::Approx(std::cos(two_pi * s)));
    CHECK(v(2) == doctest::Approx(std::sin(2 * two_pi * s)));
}

TEST_CASE("centering makes every basis column mean zero over the training states") {
    const BatchDataset data = random_states(200, 3, 11);
    for (const BasisSpec& spec : {BasisSpec::bspline(5, 3), BasisSpec::trigonometric(4)}) {
        const CenteringStats stats = fit_centering(spec, data);
        const FeatureMap map(spec, stats, layout_for(data, spec));
        for (std::size_t j = 0; j < 3; ++j) {
            Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.m));
            for (const auto& tr : data.transitions) total += map.centered(j, tr.state[j]);
            CHECK(total.cwiseAbs().maxCoeff() / 200.0 < 1e-10);
        }
    }
}

TEST_CASE("centering edge cases") {
    BatchDataset one = random_states(1, 2, 3);
    const BasisSpec spec = BasisSpec::bspline(4, 2);
    const CenteringStats stats = fit_centering(spec, one);
    const Eigen::VectorXd phi = feature_vector(spec, stats, one.transitions[0].state, std::nullopt);
    CHECK(phi(0) == 1.0);
    CHECK(phi.tail(phi.size() - 1).cwiseAbs().maxCoeff() == 0.0);

    // Row order does not change the means.
    BatchDataset data = random_states(20, 2, 4);
    BatchDataset reversed = data;
    std::reverse(reversed.transitions.begin(), reversed.transitions.end());
    CHECK(testutil::max_abs_diff(fit_centering(spec, data).means, fit_centering(spec, reversed).means) < 1e-15);
}

TEST_CASE("feature vector shape and exclusion") {
    const BatchDataset data = random_states(10, 3, 5);
    const BasisSpec spec = BasisSpec::bspline(2, 1);
    const CenteringStats stats = fit_centering(spec, data);
    const std::vector<double> s{0.1, 0.5, 0.9};
    const Eigen::VectorXd full = feature_vector(spec, stats, s, std::nullopt);
    CHECK(full.size() == 1 + 3 * 2);
    CHECK(full(0) == 1.0);
    const Eigen::VectorXd drop1 = feature_vector(spec, stats, s, 1);
    REQUIRE(drop1.size() == 1 + 2 * 2);
    CHECK(drop1.segment(1, 2) == full.segment(1, 2));
    CHECK(drop1.segment(3, 2) == full.segment(5, 2));
    CHECK(feature_vector(spec, stats, s, 1) == drop1);
    CHECK_THROWS_AS(feature_vector(spec, stats, s, 3), InputError);
}

TEST_CASE("state-action features place the block by action") {
    // A constant single state gives centered values 0, so phi_+ = (1, 0).
    BatchDataset data = random_states(1, 1, 1);
    data.transitions[0].state = {0.5};
    const BasisSpec spec = BasisSpec::bspline(2, 1);
    const CenteringStats stats = fit_centering(spec, data);
    const std::vector<double> s{0.5};
    Eigen::VectorXd a0 = state_action_features(spec, stats, s, 0, 2, std::nullopt);
    Eigen::VectorXd a1 = state_action_features(spec, stats, s, 1, 2, std::nullopt);
    REQUIRE(a0.size() == 6);
    CHECK(a0(0) == 1.0);
    CHECK(a0.tail(3).isZero());
    CHECK(a1.head(3).isZero());
    CHECK(a1(3) == 1.0);
    CHECK_THROWS_AS(state_action_features(spec, stats, s, 2, 2, std::nullopt), InputError);
}

TEST_CASE("design rows are block exclusive and follow the next-action rule") {
    BatchDataset data = random_states(40, 3, 9);
    data = candidate_view(data, CandidateChoice::state_feature(1));
    const BasisSpec spec = BasisSpec::bspline(4, 2);
    const FeatureMap map(spec, fit_centering(spec, data), layout_for(data, spec));
    const std::size_t width = map.layout().block_width();
    CHECK(width == 1 + 2 * 4);

    const DesignMatrices observed = build_design(map, data, NextActionSource::observed);
    // Trajectories of 4 transitions each: the last of every one has no successor.
    CHECK(observed.num_rows() == 30);
    CHECK(observed.dropped == 10);
    for (Eigen::Index i = 0; i < observed.phi.rows(); ++i) {
        const std::size_t a = data.transitions[observed.rows[static_cast<std::size_t>(i)]].action_index();
        const Eigen::Index other = static_cast<Eigen::Index>((1 - a) * width);
        CHECK(observed.phi.row(i).segment(other, static_cast<Eigen::Index>(width)).isZero());
        CHECK(observed.phi(i, static_cast<Eigen::Index>(a * width)) == 1.0);
    }

    const DesignMatrices constant = build_design(map, data, NextActionSource::policy,
                                                 [](std::span<const double>, double) { return 0.0; });
    CHECK(constant.num_rows() == 40);
    CHECK(constant.phi_next.rightCols(static_cast<Eigen::Index>(width)).isZero());
    CHECK_THROWS_AS(build_design(map, data, NextActionSource::policy), InputError);
}

TEST_CASE("observed mode on a two-transition trajectory keeps one row") {
    const BatchDataset data = testutil::chain_dataset({0.1, 0.5, 0.9}, {0, 1}, {1, 2});
    const BasisSpec spec = BasisSpec::bspline(3, 1);
    const FeatureMap map(spec, fit_centering(spec, data), layout_for(data, spec));
    CHECK(build_design(map, data, NextActionSource::observed).num_rows() == 1);
}

TEST_CASE("continuous mode has one block") {
    BatchDataset data = random_states(10, 2, 2);
    data.mode = ActionMode::continuous;
    data.num_actions = 0;
    data = candidate_view(data, CandidateChoice::the_action());
    const BasisSpec spec = BasisSpec::bspline(3, 2);
    const FeatureMap map(spec, fit_centering(spec, data), layout_for(data, spec));
    const DesignMatrices design = build_design(map, data, NextActionSource::policy,
                                               [](std::span<const double>, double) { return 0.5; });
    CHECK(design.phi.cols() == 1 + 2 * 3);
}
