#include "kshrl/model.hpp"

#include <memory>

#include "kshrl/error.hpp"

namespace kshrl {

namespace {

struct Prepared {
    NormalizedData normalized;
    FeatureMap features;
    std::vector<double> zs;
};

Prepared prepare(const BatchDataset& raw, const Hyperparameters& hyper) {
    raw.validate();
    if (raw.empty()) throw InputError("fit: empty dataset");
    hyper.basis.validate();
    Prepared out;
    out.normalized = normalize_features(raw);
    const BatchDataset& data = out.normalized.data;
    out.features = FeatureMap(hyper.basis, fit_centering(hyper.basis, data), layout_for(data, hyper.basis));
    out.zs = evenly_spaced_grid(hyper.grid_size);
    return out;
}

GridFitOptions options_for(const Hyperparameters& hyper, std::size_t threads) {
    GridFitOptions options;
    options.gamma = hyper.gamma;
    options.method = hyper.method;
    options.threads = threads;
    return options;
}

}  // namespace

FittedModel fit_model(const BatchDataset& raw, const Hyperparameters& hyper, std::size_t threads) {
    Prepared prep = prepare(raw, hyper);
    GridFitOptions options = options_for(hyper, threads);
    options.next_action = NextActionSource::observed;
    const DesignMatrices design = build_design(prep.features, prep.normalized.data, NextActionSource::observed);
    if (design.num_rows() == 0) throw InputError("fit: no transition has an observed next action");
    FittedModel model;
    model.normalization = prep.normalized.spec;
    model.warnings = prep.normalized.warnings;
    model.dropped = design.dropped;
    model.grid = fit_local_grid(design, prep.features, prep.normalized.data.mode, prep.normalized.data.candidate,
                                hyper.kernel, prep.zs, hyper.solver, options);
    return model;
}

LspiFit fit_lspi(const BatchDataset& raw, const Hyperparameters& hyper, const PolicyIterationConfig& pi,
                 std::size_t threads, const ActionRule& raw_initial_policy) {
    Prepared prep = prepare(raw, hyper);
    ActionRule initial;
    if (raw_initial_policy) {
        const NormalizationSpec norm = prep.normalized.spec;
        const bool feature_candidate = raw.candidate.kind == CandidateChoice::Kind::feature;
        initial = [norm, feature_candidate, raw_initial_policy](std::span<const double> s, double x) {
            std::vector<double> raw_s(s.size());
            for (std::size_t j = 0; j < s.size(); ++j) raw_s[j] = norm.invert(j, s[j]);
            return raw_initial_policy(raw_s, feature_candidate ? 0.0 : norm.invert_candidate(x));
        };
    }
    PolicyIterationResult result = ksh_lspi(prep.normalized.data, prep.features, hyper.kernel, prep.zs,
                                            hyper.solver, options_for(hyper, threads), pi, initial);
    LspiFit out;
    out.model.normalization = prep.normalized.spec;
    out.model.warnings = prep.normalized.warnings;
    out.model.grid = std::move(result.grid);
    out.frobenius_deltas = std::move(result.frobenius_deltas);
    out.converged = result.converged;
    out.stop_reason = std::move(result.stop_reason);
    return out;
}

double model_action(const FittedModel& model, std::span<const double> raw_state, double raw_candidate) {
    const NormalizationSpec& norm = model.normalization;
    if (raw_state.size() != norm.min.size()) throw InputError("model_action: state has the wrong dimension");
    std::vector<double> s(raw_state.size());
    for (std::size_t j = 0; j < s.size(); ++j) s[j] = norm.apply(j, raw_state[j]);
    const LocalModelGrid& grid = model.grid;
    if (grid.mode == ActionMode::continuous) return norm.invert_candidate(greedy_action_continuous(grid, s));
    const double x = grid.candidate.kind == CandidateChoice::Kind::feature ? s[grid.candidate.feature]
                                                                           : norm.apply_candidate(raw_candidate);
    return static_cast<double>(greedy_action_discrete(grid, s, x));
}

ActionRule model_rule(const FittedModel& model) {
    auto shared = std::make_shared<const FittedModel>(model);
    return [shared](std::span<const double> s, double x) { return model_action(*shared, s, x); };
}

sim::SimPolicy model_policy(const FittedModel& model) {
    if (model.grid.mode != ActionMode::discrete) throw InputError("model_policy: simulator needs a discrete model");
    auto shared = std::make_shared<const FittedModel>(model);
    return [shared](std::span<const double> s, Rng&) { return static_cast<int>(model_action(*shared, s)); };
}

}  // namespace kshrl
