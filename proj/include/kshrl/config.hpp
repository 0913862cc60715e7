#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kshrl/dataset.hpp"
#include "kshrl/model.hpp"
#include "kshrl/modelsel.hpp"
#include "kshrl/policy.hpp"
#include "kshrl/sim.hpp"

namespace kshrl {

enum class DataSourceKind { sim, csv };

struct RegretSettings {
    std::size_t episodes = 1000;
    std::size_t length = 10;
    /// Evaluate this model instead of running policy iteration on the data.
    std::string model;
};

struct CVSettings {
    std::size_t folds = 5;
    LossKind loss = LossKind::bellman;
    HyperGrid grid;
};

struct ExportSettings {
    std::string model;
    /// "marginal" or "joint".
    std::string which = "marginal";
    /// Features for joint surfaces; empty means every included feature.
    std::vector<std::size_t> features;
    /// Empty means every action block.
    std::vector<std::size_t> actions;
    std::size_t feature_grid_size = 50;
};

/// Everything a CLI command needs. Every field has a default; see
/// configs/default.jsonc for the documented key set.
struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    DataSourceKind source = DataSourceKind::sim;
    std::string csv_path;
    /// Column names plus mode and candidate binding (shared by both sources).
    CsvSchema csv;
    sim::SimMDPConfig sim;
    std::size_t sim_episodes = 100;
    std::size_t sim_length = 10;

    Hyperparameters hyper;
    PolicyIterationConfig pi;
    /// Start policy iteration from this model's greedy policy.
    std::string initial_model;

    RegretSettings regret;
    CVSettings cv;
    ExportSettings export_settings;

    /// Cross-field checks; throws InputError.
    void validate() const;
};

/// Parses JSON (comments allowed). Unknown keys are errors. The seed is
/// propagated to the simulator and solver.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Applies a new seed everywhere the config uses one.
void set_seed(RunConfig& config, std::uint64_t seed);

}  // namespace kshrl
