#pragma once

#include <filesystem>
#include <ostream>

#include "kshrl/config.hpp"

// Pipeline wiring behind the CLI. Each command writes its files into
// `out_dir` (created if needed) and a human-readable summary to `log`.
// Errors propagate as InputError / NumericalError.

namespace kshrl {

/// Raw dataset named by the config: simulated or read from CSV.
BatchDataset load_data(const RunConfig& config);

/// model.json + fit_diagnostics.jsonl
void cmd_fit(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);
/// model.json + fit_diagnostics.jsonl + policy_diagnostics.jsonl
void cmd_policy_iterate(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);
/// trajectories.csv
void cmd_simulate(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);
/// regret_episodes.csv + regret_summary.csv
void cmd_regret(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);
/// cv_results.csv
void cmd_cv(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);
/// marginal_a<a>.csv or joint_s<j>_a<a>.csv
void cmd_export_components(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace kshrl
