#include "kshrl/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "kshrl/error.hpp"

namespace kshrl {

BasisSpec BasisSpec::bspline(std::size_t m, int degree) {
    if (degree < 0) throw InputError("bspline: degree must be nonnegative");
    if (m < static_cast<std::size_t>(degree) + 1 || m < 2) {
        throw InputError("bspline: need m >= max(2, degree + 1), got m=" + std::to_string(m) +
                         " degree=" + std::to_string(degree));
    }
    BasisSpec spec;
    spec.family = BasisFamily::bspline;
    spec.m = m;
    spec.degree = degree;
    const std::size_t intervals = m - static_cast<std::size_t>(degree);
    spec.knots.assign(static_cast<std::size_t>(degree), 0.0);
    for (std::size_t i = 0; i <= intervals; ++i) {
        spec.knots.push_back(static_cast<double>(i) / static_cast<double>(intervals));
    }
    spec.knots.insert(spec.knots.end(), static_cast<std::size_t>(degree), 1.0);
    return spec;
}

BasisSpec BasisSpec::trigonometric(std::size_t m) {
    BasisSpec spec;
    spec.family = BasisFamily::trigonometric;
    spec.m = m;
    spec.degree = 0;
    spec.validate();
    return spec;
}

void BasisSpec::validate() const {
    if (m < 2) throw InputError("basis: m must be at least 2");
    if (family == BasisFamily::trigonometric) {
        if (!knots.empty()) throw InputError("basis: trigonometric family takes no knots");
        return;
    }
    if (degree < 0) throw InputError("basis: degree must be nonnegative");
    const auto p = static_cast<std::size_t>(degree);
    if (m < p + 1) throw InputError("basis: m must be at least degree + 1");
    if (knots.size() != m + p + 1) {
        throw InputError("basis: expected " + std::to_string(m + p + 1) + " knots, got " +
                         std::to_string(knots.size()));
    }
    for (std::size_t i = 0; i < knots.size(); ++i) {
        if (!(knots[i] >= 0.0 && knots[i] <= 1.0)) throw InputError("basis: knots must lie in [0,1]");
        if (i > 0 && knots[i] < knots[i - 1]) throw InputError("basis: knots must be nondecreasing");
    }
    for (std::size_t i = 0; i <= p; ++i) {
        if (knots[i] != 0.0 || knots[knots.size() - 1 - i] != 1.0) {
            throw InputError("basis: knot vector must be clamped at 0 and 1");
        }
    }
}

namespace {

// Cox-de Boor recursion on the nonzero functions of the knot span containing s.
Eigen::VectorXd eval_bspline(const BasisSpec& spec, double s) {
    const auto p = static_cast<std::size_t>(spec.degree);
    const std::vector<double>& t = spec.knots;
    const std::size_t m = spec.m;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));

    // Span index k with t[k] <= s < t[k+1]; the right end belongs to the last span.
    std::size_t k = m - 1;
    if (s < t[m]) {
        k = static_cast<std::size_t>(std::upper_bound(t.begin() + static_cast<std::ptrdiff_t>(p),
                                                      t.begin() + static_cast<std::ptrdiff_t>(m) + 1, s) -
                                     t.begin()) -
            1;
    }

    std::vector<double> n(p + 1, 0.0);
    std::vector<double> left(p + 1, 0.0);
    std::vector<double> right(p + 1, 0.0);
    n[0] = 1.0;
    for (std::size_t j = 1; j <= p; ++j) {
        left[j] = s - t[k + 1 - j];
        right[j] = t[k + j] - s;
        double saved = 0.0;
        for (std::size_t r = 0; r < j; ++r) {
            const double denom = right[r + 1] + left[j - r];
            const double tmp = denom > 0.0 ? n[r] / denom : 0.0;
            n[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        n[j] = saved;
    }
    for (std::size_t r = 0; r <= p; ++r) out(static_cast<Eigen::Index>(k - p + r)) = n[r];
    return out;
}

Eigen::VectorXd eval_trigonometric(std::size_t m, double s) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(m));
    for (std::size_t c = 0; c < m; ++c) {
        const double q = static_cast<double>(c / 2 + 1);
        const double arg = 2.0 * std::numbers::pi * q * s;
        out(static_cast<Eigen::Index>(c)) = (c % 2 == 0) ? std::sin(arg) : std::cos(arg);
    }
    return out;
}

}  // namespace

Eigen::VectorXd eval_basis(const BasisSpec& spec, double s) {
    s = std::clamp(s, 0.0, 1.0);
    if (spec.family == BasisFamily::trigonometric) return eval_trigonometric(spec.m, s);
    return eval_bspline(spec, s);
}

CenteringStats fit_centering(const BasisSpec& spec, const BatchDataset& data) {
    spec.validate();
    if (data.empty()) throw InputError("fit_centering: empty dataset");
    CenteringStats stats;
    stats.means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.dim), static_cast<Eigen::Index>(spec.m));
    for (const auto& tr : data.transitions) {
        for (std::size_t j = 0; j < data.dim; ++j) {
            stats.means.row(static_cast<Eigen::Index>(j)) += eval_basis(spec, tr.state[j]).transpose();
        }
    }
    stats.means /= static_cast<double>(data.size());
    return stats;
}

std::vector<std::size_t> FeatureLayout::included_features() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < dim; ++j) {
        if (!excluded || *excluded != j) out.push_back(j);
    }
    return out;
}

std::size_t FeatureLayout::feature_slot(std::size_t feature) const {
    if (feature >= dim) throw InputError("feature " + std::to_string(feature) + " out of range");
    if (excluded && *excluded == feature) {
        throw InputError("feature " + std::to_string(feature) + " is the excluded candidate feature");
    }
    return (excluded && *excluded < feature) ? feature - 1 : feature;
}

FeatureLayout layout_for(const BatchDataset& data, const BasisSpec& spec) {
    FeatureLayout layout;
    layout.dim = data.dim;
    layout.excluded = data.candidate.excluded_feature();
    layout.m = spec.m;
    layout.num_blocks = data.mode == ActionMode::discrete ? data.num_actions : 1;
    return layout;
}

FeatureMap::FeatureMap(BasisSpec spec, CenteringStats stats, FeatureLayout layout)
    : spec_(std::move(spec)), stats_(std::move(stats)), layout_(layout) {
    spec_.validate();
    if (layout_.m != spec_.m) throw InputError("feature map: layout and basis disagree on m");
    if (static_cast<std::size_t>(stats_.means.rows()) != layout_.dim ||
        static_cast<std::size_t>(stats_.means.cols()) != spec_.m) {
        throw InputError("feature map: centering statistics have the wrong shape");
    }
    if (layout_.excluded && *layout_.excluded >= layout_.dim) {
        throw InputError("feature map: excluded feature out of range");
    }
    if (layout_.num_blocks == 0) throw InputError("feature map: need at least one action block");
}

Eigen::VectorXd FeatureMap::centered(std::size_t feature, double value) const {
    return eval_basis(spec_, value) - stats_.means.row(static_cast<Eigen::Index>(feature)).transpose();
}

Eigen::VectorXd FeatureMap::state_features(std::span<const double> s) const {
    if (s.size() != layout_.dim) {
        throw InputError("state has length " + std::to_string(s.size()) + ", expected " +
                         std::to_string(layout_.dim));
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(layout_.block_width()));
    out(0) = 1.0;
    Eigen::Index pos = 1;
    const auto m = static_cast<Eigen::Index>(layout_.m);
    for (std::size_t j : layout_.included_features()) {
        out.segment(pos, m) = centered(j, s[j]);
        pos += m;
    }
    return out;
}

Eigen::VectorXd FeatureMap::features(std::span<const double> s, std::size_t block) const {
    if (block >= layout_.num_blocks) {
        throw InputError("action " + std::to_string(block) + " out of range for " +
                         std::to_string(layout_.num_blocks) + " action blocks");
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout_.num_coefficients()));
    const auto width = static_cast<Eigen::Index>(layout_.block_width());
    out.segment(static_cast<Eigen::Index>(block) * width, width) = state_features(s);
    return out;
}

Eigen::VectorXd feature_vector(const BasisSpec& spec, const CenteringStats& stats, std::span<const double> s,
                               std::optional<std::size_t> exclude) {
    if (exclude && *exclude >= s.size()) {
        throw InputError("feature_vector: exclude index " + std::to_string(*exclude) + " out of range");
    }
    FeatureLayout layout{s.size(), exclude, spec.m, 1};
    return FeatureMap(spec, stats, layout).state_features(s);
}

Eigen::VectorXd state_action_features(const BasisSpec& spec, const CenteringStats& stats,
                                      std::span<const double> s, std::size_t a, std::size_t k,
                                      std::optional<std::size_t> exclude) {
    if (a >= k) throw InputError("action " + std::to_string(a) + " out of range for k=" + std::to_string(k));
    if (exclude && *exclude >= s.size()) {
        throw InputError("state_action_features: exclude index out of range");
    }
    FeatureLayout layout{s.size(), exclude, spec.m, k};
    return FeatureMap(spec, stats, layout).features(s, a);
}

namespace {

std::size_t block_of(const BatchDataset& data, double action) {
    if (data.mode == ActionMode::continuous) return 0;
    if (action < 0 || action != std::floor(action) || static_cast<std::size_t>(action) >= data.num_actions) {
        throw InputError("next action " + std::to_string(action) + " is not a valid action index");
    }
    return static_cast<std::size_t>(action);
}

double next_candidate(const BatchDataset& data, const Transition& tr) {
    if (data.candidate.kind == CandidateChoice::Kind::feature) return tr.next_state[data.candidate.feature];
    return tr.candidate;
}

}  // namespace

DesignMatrices build_design(const FeatureMap& map, const BatchDataset& data, NextActionSource source,
                            const ActionRule& policy) {
    if (source == NextActionSource::policy && !policy) {
        throw InputError("build_design: policy mode requires a policy");
    }
    if (map.layout() != layout_for(data, map.spec())) {
        throw InputError("build_design: feature map layout does not match the dataset");
    }
    DesignMatrices out;
    std::vector<std::optional<std::size_t>> successor;
    if (source == NextActionSource::observed) successor = data.successor_index();
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (source == NextActionSource::observed && !successor[i]) {
            ++out.dropped;
            continue;
        }
        out.rows.push_back(i);
    }
    const auto n = static_cast<Eigen::Index>(out.rows.size());
    const auto p = static_cast<Eigen::Index>(map.layout().num_coefficients());
    const auto width = static_cast<Eigen::Index>(map.layout().block_width());
    out.phi = Eigen::MatrixXd::Zero(n, p);
    out.phi_next = Eigen::MatrixXd::Zero(n, p);
    out.rewards.resize(n);
    out.candidates.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const Transition& tr = data.transitions[out.rows[static_cast<std::size_t>(r)]];
        const double next_action = source == NextActionSource::observed
                                       ? data.transitions[*successor[out.rows[static_cast<std::size_t>(r)]]].action
                                       : policy(tr.next_state, next_candidate(data, tr));
        const auto a = static_cast<Eigen::Index>(block_of(data, tr.action));
        const auto a_next = static_cast<Eigen::Index>(block_of(data, next_action));
        out.phi.row(r).segment(a * width, width) = map.state_features(tr.state).transpose();
        out.phi_next.row(r).segment(a_next * width, width) = map.state_features(tr.next_state).transpose();
        out.rewards(r) = tr.reward;
        out.candidates(r) = tr.candidate;
    }
    return out;
}

}  // namespace kshrl
