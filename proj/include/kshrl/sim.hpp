#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "kshrl/dataset.hpp"
#include "kshrl/random.hpp"

namespace kshrl::sim {

/// Benchmark MDP with binary actions and reward u1(s_1, a) + u2(s_2, a).
/// `correlation` > 0 selects a reconstructed correlated-feature variant:
/// the per-step shift and the initial state are mixed through a matrix with
/// unit diagonal and `correlation` off the diagonal (rows normalized).
struct SimMDPConfig {
    std::size_t d = 5;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    double correlation = 0.0;

    void validate() const;
};

/// Fresh randomness of one transition: shift ~ U(0,2)^d, u ~ U(0,1)^d,
/// noise ~ N(0, sigma^2 I).
struct TransitionDraws {
    std::vector<double> shift;
    std::vector<double> u;
    std::vector<double> noise;
};

TransitionDraws draw_transition(const SimMDPConfig& config, Rng& rng);

/// s' = (-1)^a (sin(shift + a u) + 0.1 s^2) + noise, componentwise.
std::vector<double> transition_with(std::span<const double> s, int a, const TransitionDraws& draws);
std::vector<double> transition(const SimMDPConfig& config, std::span<const double> s, int a, Rng& rng);

/// u1 (i = 1) or u2 (i = 2) evaluated at feature value v.
double reward_component(int i, double v, int a);
double reward(std::span<const double> s, int a);
/// Action maximizing the immediate reward; ties go to action 0.
int oracle_action(std::span<const double> s);

std::vector<double> initial_state(const SimMDPConfig& config, Rng& rng);

/// Action rule on raw simulator states.
using SimPolicy = std::function<int(std::span<const double> state, Rng& rng)>;

SimPolicy uniform_random_policy();
SimPolicy per_step_oracle_policy();

struct Episode {
    std::vector<std::vector<double>> states;
    std::vector<int> actions;
    std::vector<double> rewards;
};

struct EpisodeBatch {
    std::vector<Episode> trajectories;
    std::size_t length = 0;

    std::size_t size() const { return trajectories.size(); }
};

struct SimSample {
    EpisodeBatch episodes;
    /// length - 1 transitions per trajectory, raw (unnormalized) units.
    BatchDataset data;
};

/// n trajectories of length ell under a uniformly random behavior policy.
SimSample sample_trajectories(const SimMDPConfig& config, std::size_t n, std::size_t ell,
                              const CandidateChoice& candidate = CandidateChoice::state_feature(0));

/// Trajectory CSV: traj_id, t, s_0..s_{d-1}, action, reward; one row per step.
void write_episodes_csv(std::ostream& out, const EpisodeBatch& batch);

/// Discount indexing of Monte-Carlo returns: `from_zero` sums
/// gamma^j r_j for j = 0..ell-1; `from_one` sums gamma^j r_{j-1} for j = 1..ell.
enum class DiscountIndexing { from_zero, from_one };

struct MCEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    /// gamma^ell * r_max / (1 - gamma) with r_max the largest |r| observed.
    double truncation_bound = 0.0;
};

MCEstimate mc_q_estimate(const SimMDPConfig& config, std::span<const double> s, int a, const SimPolicy& policy,
                         double gamma, std::size_t n_rollouts, std::size_t ell, std::uint64_t seed,
                         DiscountIndexing indexing = DiscountIndexing::from_zero);

struct ComponentEstimate {
    double s = 0.0;
    MCEstimate estimate;
};

/// U_i(s_i, a) over `grid`: rollouts start at s_i = grid value with the other
/// coordinates drawn from the initial distribution and accumulate only u_i.
std::vector<ComponentEstimate> mc_component_estimate(const SimMDPConfig& config, int i,
                                                     const std::vector<double>& grid, int a,
                                                     const SimPolicy& policy, double gamma,
                                                     std::size_t n_rollouts, std::size_t ell, std::uint64_t seed);

struct RegretResult {
    double mean_regret = 0.0;
    /// Mean per-step regret of each episode.
    std::vector<double> episode_regret;
};

/// Per step, regret = max_a r(s, a) - r(s, policy(s)); averaged over all
/// steps of all episodes. Episode e uses environment stream 2e and policy
/// stream 2e+1 of `seed`, so policies are compared on common random numbers.
RegretResult regret_analysis(const SimMDPConfig& config, const SimPolicy& policy, std::size_t n_episodes,
                             std::size_t ell, std::uint64_t seed);

}  // namespace kshrl::sim
