#include "kshrl/modelsel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kshrl/error.hpp"
#include "kshrl/format.hpp"
#include "kshrl/names.hpp"
#include "kshrl/parallel.hpp"
#include "kshrl/policy.hpp"
#include "kshrl/random.hpp"

namespace kshrl {

double bellman_loss(const LocalModelGrid& grid, const BatchDataset& data, double gamma, const ActionRule& policy) {
    if (data.empty()) throw InputError("bellman_loss: empty dataset");
    std::vector<std::optional<std::size_t>> successor;
    const bool needs_next = gamma != 0.0;
    if (needs_next && !policy) successor = data.successor_index();
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Transition& tr = data.transitions[i];
        double target = tr.reward;
        if (needs_next) {
            double next_action = 0.0;
            if (policy) {
                const double next_x = data.candidate.kind == CandidateChoice::Kind::feature
                                          ? tr.next_state[data.candidate.feature]
                                          : tr.candidate;
                next_action = policy(tr.next_state, next_x);
            } else if (successor[i]) {
                next_action = data.transitions[*successor[i]].action;
            } else {
                continue;
            }
            target += gamma * q_value(grid, tr.next_state, next_action, tr.candidate);
        }
        const double residual = q_value(grid, tr.state, tr.action, tr.candidate) - target;
        total += residual * residual;
        ++count;
    }
    if (count == 0) throw InputError("bellman_loss: no transition has a next action");
    return total / static_cast<double>(count);
}

double validation_mse(const LocalModelGrid& grid, const BatchDataset& data) {
    return bellman_loss(grid, data, 0.0);
}

std::vector<std::vector<std::string>> assign_folds(const BatchDataset& data, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw InputError("cross-validation: need at least 2 folds");
    std::vector<std::string> ids = data.trajectory_ids();
    if (ids.size() < k) {
        throw InputError("cross-validation: " + std::to_string(ids.size()) + " trajectories cannot fill " +
                         std::to_string(k) + " folds");
    }
    std::sort(ids.begin(), ids.end());
    Rng rng(mix_seed(seed));
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<std::vector<std::string>> folds(k);
    for (std::size_t i = 0; i < ids.size(); ++i) folds[i % k].push_back(ids[i]);
    for (auto& fold : folds) std::sort(fold.begin(), fold.end());
    return folds;
}

std::vector<double> k_fold_cv(const BatchDataset& raw, std::size_t k, const Hyperparameters& hyper, LossKind loss,
                              std::uint64_t seed, std::size_t threads) {
    const auto folds = assign_folds(raw, k, seed);
    Hyperparameters fit_hyper = hyper;
    if (loss == LossKind::mse) fit_hyper.gamma = 0.0;
    std::vector<double> losses(k);
    parallel_for(k, threads, [&](std::size_t f) {
        std::vector<std::string> train_ids;
        for (std::size_t g = 0; g < k; ++g) {
            if (g != f) train_ids.insert(train_ids.end(), folds[g].begin(), folds[g].end());
        }
        const BatchDataset train = canonical_order(raw.subset(train_ids));
        const BatchDataset valid = canonical_order(raw.subset(folds[f]));
        const FittedModel model = fit_model(train, fit_hyper);
        const BatchDataset valid_n = apply_normalization(valid, model.normalization);
        losses[f] = loss == LossKind::mse ? validation_mse(model.grid, valid_n)
                                          : bellman_loss(model.grid, valid_n, fit_hyper.gamma);
    });
    return losses;
}

std::vector<Hyperparameters> HyperGrid::combinations() const {
    std::vector<Hyperparameters> out;
    for (const auto& basis : bases)
        for (double h : bandwidths)
            for (double lambda : lambdas)
                for (double mu : mus)
                    for (double gamma : gammas)
                        for (std::size_t m : grid_sizes)
                            for (double ridge : ridges) {
                                Hyperparameters hp;
                                hp.basis = basis;
                                hp.kernel = {kernel, h};
                                hp.solver = solver;
                                hp.solver.lambda = lambda;
                                hp.solver.mu = mu;
                                hp.solver.ridge = ridge;
                                hp.gamma = gamma;
                                hp.grid_size = m;
                                hp.method = method;
                                out.push_back(hp);
                            }
    if (out.empty()) throw InputError("hyperparameter grid is empty");
    return out;
}

CVResult grid_search(const BatchDataset& raw, const HyperGrid& grid, std::size_t k, LossKind loss,
                     std::uint64_t seed, std::size_t threads) {
    const std::vector<Hyperparameters> combos = grid.combinations();
    assign_folds(raw, k, seed);
    CVResult result;
    result.folds = k;
    result.rows.resize(combos.size());
    parallel_for(combos.size(), threads, [&](std::size_t c) {
        CVRow& row = result.rows[c];
        row.hyper = combos[c];
        try {
            row.fold_losses = k_fold_cv(raw, k, combos[c], loss, seed);
            double sum = 0.0;
            for (double v : row.fold_losses) sum += v;
            row.mean_loss = sum / static_cast<double>(k);
            if (!std::isfinite(row.mean_loss)) {
                row.mean_loss = std::numeric_limits<double>::infinity();
                row.error = "non-finite loss";
            }
        } catch (const Error& e) {
            row.fold_losses.assign(k, std::numeric_limits<double>::infinity());
            row.mean_loss = std::numeric_limits<double>::infinity();
            row.error = e.what();
        }
    });
    for (std::size_t c = 1; c < result.rows.size(); ++c) {
        if (result.rows[c].mean_loss < result.rows[result.best].mean_loss) result.best = c;
    }
    return result;
}

namespace {

std::string csv_escape(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

void write_cv_csv(std::ostream& out, const CVResult& result) {
    out << "combination,basis,m,degree,kernel,bandwidth,lambda,mu,gamma,grid_size,ridge";
    for (std::size_t f = 0; f < result.folds; ++f) out << ",fold_" << f + 1;
    out << ",mean_loss,best,error\n";
    for (std::size_t c = 0; c < result.rows.size(); ++c) {
        const CVRow& row = result.rows[c];
        const Hyperparameters& h = row.hyper;
        out << c << ',' << to_string(h.basis.family) << ',' << h.basis.m << ',' << h.basis.degree << ','
            << to_string(h.kernel.family) << ',' << format_double(h.kernel.bandwidth) << ','
            << format_double(h.solver.lambda) << ',' << format_double(h.solver.mu) << ',' << format_double(h.gamma)
            << ',' << h.grid_size << ',' << format_double(h.solver.ridge);
        for (double v : row.fold_losses) out << ',' << format_double(v);
        for (std::size_t f = row.fold_losses.size(); f < result.folds; ++f) out << ',';
        out << ',' << format_double(row.mean_loss) << ',' << (c == result.best ? 1 : 0) << ',' << csv_escape(row.error) << '\n';
    }
}

}  // namespace kshrl
