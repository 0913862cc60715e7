#include "kshrl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kshrl/error.hpp"
#include "kshrl/format.hpp"

namespace kshrl::sim {

namespace {

std::vector<double> mix(const SimMDPConfig& config, std::vector<double> v) {
    if (config.correlation == 0.0) return v;
    double total = 0.0;
    for (double x : v) total += x;
    const double norm = 1.0 + config.correlation * static_cast<double>(v.size() - 1);
    for (double& x : v) x = ((1.0 - config.correlation) * x + config.correlation * total) / norm;
    return v;
}

double discounted(double gamma, std::size_t power) { return std::pow(gamma, static_cast<double>(power)); }

}  // namespace

void SimMDPConfig::validate() const {
    if (d < 2) throw InputError("sim: state dimension must be at least 2");
    if (!(sigma >= 0.0)) throw InputError("sim: sigma must be nonnegative");
    if (!(correlation >= 0.0 && correlation < 1.0)) throw InputError("sim: correlation must lie in [0, 1)");
}

TransitionDraws draw_transition(const SimMDPConfig& config, Rng& rng) {
    std::uniform_real_distribution<double> shift(0.0, 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    TransitionDraws draws;
    draws.shift.resize(config.d);
    draws.u.resize(config.d);
    draws.noise.resize(config.d);
    for (auto& x : draws.shift) x = shift(rng);
    for (auto& x : draws.u) x = unit(rng);
    for (auto& x : draws.noise) x = config.sigma * noise(rng);
    draws.shift = mix(config, std::move(draws.shift));
    return draws;
}

std::vector<double> transition_with(std::span<const double> s, int a, const TransitionDraws& draws) {
    if (draws.shift.size() != s.size() || draws.u.size() != s.size() || draws.noise.size() != s.size()) {
        throw InputError("transition: draws do not match the state dimension");
    }
    if (a != 0 && a != 1) throw InputError("transition: action must be 0 or 1");
    const double sign = a == 0 ? 1.0 : -1.0;
    std::vector<double> next(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) {
        next[j] = sign * (std::sin(draws.shift[j] + a * draws.u[j]) + 0.1 * s[j] * s[j]) + draws.noise[j];
    }
    return next;
}

std::vector<double> transition(const SimMDPConfig& config, std::span<const double> s, int a, Rng& rng) {
    if (s.size() != config.d) throw InputError("transition: state has the wrong dimension");
    return transition_with(s, a, draw_transition(config, rng));
}

double reward_component(int i, double v, int a) {
    if (a != 0 && a != 1) throw InputError("reward: action must be 0 or 1");
    if (i == 1) return a == 1 ? 5.0 * v * v + 5.0 : -(2.0 * v * v * v - 5.0);
    if (i == 2) return a == 1 ? 5.0 * std::sin(v * v) + 5.0 : 4.0 * v - 5.0;
    throw InputError("reward: component must be 1 or 2");
}

double reward(std::span<const double> s, int a) {
    if (s.size() < 2) throw InputError("reward: state needs at least two features");
    return reward_component(1, s[0], a) + reward_component(2, s[1], a);
}

int oracle_action(std::span<const double> s) { return reward(s, 1) > reward(s, 0) ? 1 : 0; }

std::vector<double> initial_state(const SimMDPConfig& config, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> s(config.d);
    for (auto& x : s) x = unit(rng);
    return mix(config, std::move(s));
}

SimPolicy uniform_random_policy() {
    return [](std::span<const double>, Rng& rng) { return std::bernoulli_distribution(0.5)(rng) ? 1 : 0; };
}

SimPolicy per_step_oracle_policy() {
    return [](std::span<const double> s, Rng&) { return oracle_action(s); };
}

SimSample sample_trajectories(const SimMDPConfig& config, std::size_t n, std::size_t ell,
                              const CandidateChoice& candidate) {
    config.validate();
    if (n == 0 || ell == 0) throw InputError("sample_trajectories: n and ell must be at least 1");
    const SimPolicy behavior = uniform_random_policy();
    SimSample out;
    out.episodes.length = ell;
    BatchDataset& data = out.data;
    data.dim = config.d;
    data.mode = ActionMode::discrete;
    data.num_actions = 2;
    for (std::size_t e = 0; e < n; ++e) {
        Rng rng = make_rng(config.seed, e);
        Episode ep;
        std::vector<double> s = initial_state(config, rng);
        for (std::size_t t = 0; t < ell; ++t) {
            const int a = behavior(s, rng);
            ep.states.push_back(s);
            ep.actions.push_back(a);
            ep.rewards.push_back(reward(s, a));
            if (t + 1 < ell) s = transition(config, s, a, rng);
        }
        for (std::size_t t = 0; t + 1 < ell; ++t) {
            Transition tr;
            tr.state = ep.states[t];
            tr.action = ep.actions[t];
            tr.reward = ep.rewards[t];
            tr.next_state = ep.states[t + 1];
            tr.trajectory_id = std::to_string(e);
            tr.time_index = static_cast<std::int64_t>(t);
            data.transitions.push_back(std::move(tr));
        }
        out.episodes.trajectories.push_back(std::move(ep));
    }
    if (candidate.kind == CandidateChoice::Kind::action) {
        throw InputError("sample_trajectories: actions are discrete and cannot be the candidate");
    }
    if (candidate.kind == CandidateChoice::Kind::feature) data = candidate_view(data, candidate);
    return out;
}

void write_episodes_csv(std::ostream& out, const EpisodeBatch& batch) {
    const std::size_t d = batch.trajectories.empty() ? 0 : batch.trajectories.front().states.front().size();
    out << "traj_id,t";
    for (std::size_t j = 0; j < d; ++j) out << ",s_" << j;
    out << ",action,reward\n";
    for (std::size_t e = 0; e < batch.size(); ++e) {
        const Episode& ep = batch.trajectories[e];
        for (std::size_t t = 0; t < ep.states.size(); ++t) {
            out << e << ',' << t;
            for (double v : ep.states[t]) out << ',' << format_double(v);
            out << ',' << ep.actions[t] << ',' << format_double(ep.rewards[t]) << '\n';
        }
    }
}

namespace {

struct RolloutStats {
    // Welford running mean and squared deviations.
    double mean = 0.0;
    double m2 = 0.0;
    double r_max = 0.0;
    std::size_t n = 0;

    void add(double value) {
        ++n;
        const double delta = value - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (value - mean);
    }

    MCEstimate finish(double gamma, std::size_t ell) const {
        MCEstimate est;
        est.mean = mean;
        if (n > 1) est.std_error = std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
        est.truncation_bound = discounted(gamma, ell) * r_max / (1.0 - gamma);
        return est;
    }
};

// Discounted sum of `component` (0 = full reward) along one rollout from (s, a).
double rollout(const SimMDPConfig& config, std::vector<double> s, int a, const SimPolicy& policy, double gamma,
               std::size_t ell, int component, DiscountIndexing indexing, Rng& env, Rng& act, double& r_max) {
    double total = 0.0;
    for (std::size_t j = 0; j < ell; ++j) {
        if (j > 0) a = policy(s, act);
        const double r = component == 0 ? reward(s, a) : reward_component(component, s[component - 1], a);
        r_max = std::max(r_max, std::abs(r));
        total += discounted(gamma, indexing == DiscountIndexing::from_zero ? j : j + 1) * r;
        if (j + 1 < ell) s = transition(config, s, a, env);
    }
    return total;
}

void check_mc_inputs(const SimMDPConfig& config, double gamma, std::size_t n_rollouts, std::size_t ell) {
    config.validate();
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("monte carlo: gamma must lie in [0, 1)");
    if (n_rollouts == 0 || ell == 0) throw InputError("monte carlo: need at least one rollout of length >= 1");
}

}  // namespace

MCEstimate mc_q_estimate(const SimMDPConfig& config, std::span<const double> s, int a, const SimPolicy& policy,
                         double gamma, std::size_t n_rollouts, std::size_t ell, std::uint64_t seed,
                         DiscountIndexing indexing) {
    check_mc_inputs(config, gamma, n_rollouts, ell);
    if (s.size() != config.d) throw InputError("mc_q_estimate: state has the wrong dimension");
    RolloutStats stats;
    const std::vector<double> start(s.begin(), s.end());
    for (std::size_t r = 0; r < n_rollouts; ++r) {
        Rng env = make_rng(seed, 2 * r);
        Rng act = make_rng(seed, 2 * r + 1);
        stats.add(rollout(config, start, a, policy, gamma, ell, 0, indexing, env, act, stats.r_max));
    }
    return stats.finish(gamma, ell);
}

std::vector<ComponentEstimate> mc_component_estimate(const SimMDPConfig& config, int i,
                                                     const std::vector<double>& grid, int a,
                                                     const SimPolicy& policy, double gamma,
                                                     std::size_t n_rollouts, std::size_t ell, std::uint64_t seed) {
    check_mc_inputs(config, gamma, n_rollouts, ell);
    if (i != 1 && i != 2) throw InputError("mc_component_estimate: component must be 1 or 2");
    std::vector<ComponentEstimate> out;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        RolloutStats stats;
        for (std::size_t r = 0; r < n_rollouts; ++r) {
            const std::uint64_t stream = g * n_rollouts + r;
            Rng env = make_rng(seed, 2 * stream);
            Rng act = make_rng(seed, 2 * stream + 1);
            std::vector<double> s = initial_state(config, env);
            s[static_cast<std::size_t>(i - 1)] = grid[g];
            stats.add(rollout(config, std::move(s), a, policy, gamma, ell, i, DiscountIndexing::from_zero, env, act,
                              stats.r_max));
        }
        out.push_back({grid[g], stats.finish(gamma, ell)});
    }
    return out;
}

RegretResult regret_analysis(const SimMDPConfig& config, const SimPolicy& policy, std::size_t n_episodes,
                             std::size_t ell, std::uint64_t seed) {
    config.validate();
    if (n_episodes == 0 || ell == 0) throw InputError("regret_analysis: need at least one episode of length >= 1");
    RegretResult out;
    double total = 0.0;
    for (std::size_t e = 0; e < n_episodes; ++e) {
        Rng env = make_rng(seed, 2 * e);
        Rng act = make_rng(seed, 2 * e + 1);
        std::vector<double> s = initial_state(config, env);
        double episode_total = 0.0;
        for (std::size_t t = 0; t < ell; ++t) {
            const int a = policy(s, act);
            const double best = std::max(reward(s, 0), reward(s, 1));
            episode_total += best - reward(s, a);
            if (t + 1 < ell) s = transition(config, s, a, env);
        }
        out.episode_regret.push_back(episode_total / static_cast<double>(ell));
        total += episode_total;
    }
    out.mean_regret = total / static_cast<double>(n_episodes * ell);
    return out;
}

}  // namespace kshrl::sim
