#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kshrl/basis.hpp"
#include "kshrl/dataset.hpp"
#include "kshrl/sim.hpp"
#include "kshrl/random.hpp"

namespace testutil {

// One-dimensional discrete dataset from parallel vectors; consecutive
// entries of one trajectory are linked by next_state.
inline kshrl::BatchDataset chain_dataset(const std::vector<double>& states, const std::vector<int>& actions,
                                         const std::vector<double>& rewards, std::size_t k = 2,
                                         const std::string& id = "0") {
    kshrl::BatchDataset data;
    data.dim = 1;
    data.num_actions = k;
    data.candidate = kshrl::CandidateChoice::external();
    for (std::size_t t = 0; t + 1 < states.size(); ++t) {
        kshrl::Transition tr;
        tr.state = {states[t]};
        tr.next_state = {states[t + 1]};
        tr.action = actions[t];
        tr.reward = rewards[t];
        tr.candidate = states[t];
        tr.trajectory_id = id;
        tr.time_index = static_cast<std::int64_t>(t);
        data.transitions.push_back(tr);
    }
    return data;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

// Normalized simulator sample with its centered feature map and
// behavioral design.
struct SimProblem {
    kshrl::BatchDataset data;
    kshrl::FeatureMap map;
    kshrl::DesignMatrices design;
};

inline SimProblem sim_problem(std::size_t d, std::size_t n, std::size_t ell, std::uint64_t seed,
                              const kshrl::BasisSpec& basis,
                              const kshrl::CandidateChoice& candidate = kshrl::CandidateChoice::state_feature(0)) {
    kshrl::sim::SimMDPConfig cfg;
    cfg.d = d;
    cfg.seed = seed;
    SimProblem out;
    out.data = kshrl::normalize_features(kshrl::sim::sample_trajectories(cfg, n, ell, candidate).data).data;
    out.map = kshrl::FeatureMap(basis, kshrl::fit_centering(basis, out.data), kshrl::layout_for(out.data, basis));
    out.design = kshrl::build_design(out.map, out.data, kshrl::NextActionSource::observed);
    return out;
}

}  // namespace testutil
