#include "kshrl/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "json.hpp"

#include "kshrl/error.hpp"
#include "kshrl/format.hpp"
#include "kshrl/model_io.hpp"
#include "kshrl/parallel.hpp"
#include "kshrl/random.hpp"

namespace kshrl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_output(const fs::path& dir, const std::string& name) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory '" + dir.string() + "': " + ec.message());
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw InputError("cannot write '" + (dir / name).string() + "'");
    return out;
}

void write_fit_diagnostics(const fs::path& dir, const LocalModelGrid& grid) {
    std::ofstream out = open_output(dir, "fit_diagnostics.jsonl");
    for (const FitDiagnostics& d : grid.diagnostics) {
        json row = {{"z", d.z},
                    {"iterations", d.iterations},
                    {"converged", d.converged},
                    {"ess", d.ess},
                    {"last_change", d.last_change},
                    {"step_size", d.step_size},
                    {"warnings", d.warnings}};
        out << row.dump() << '\n';
    }
}

void print_fit_summary(std::ostream& log, const FittedModel& model) {
    for (const std::string& w : model.warnings) log << "warning: " << w << '\n';
    if (model.dropped > 0) log << model.dropped << " transitions without an observed next action were dropped\n";
    std::size_t converged = 0;
    char line[160];
    for (const FitDiagnostics& d : model.grid.diagnostics) {
        std::snprintf(line, sizeof line, "z=%.4f iterations=%zu converged=%s ess=%.2f change=%.3g\n", d.z,
                      d.iterations, d.converged ? "yes" : "no", d.ess, d.last_change);
        log << line;
        for (const std::string& w : d.warnings) log << "  warning: " << w << '\n';
        if (d.converged) ++converged;
    }
    log << converged << "/" << model.grid.diagnostics.size() << " local models converged\n";
}

double raw_candidate(const FittedModel& model, double z) {
    const NormalizationSpec& norm = model.normalization;
    if (model.grid.candidate.kind == CandidateChoice::Kind::feature) return norm.invert(model.grid.candidate.feature, z);
    return norm.invert_candidate(z);
}

std::vector<std::size_t> all_blocks(const FittedModel& model) {
    std::vector<std::size_t> out;
    for (std::size_t a = 0; a < model.grid.features.layout().num_blocks; ++a) out.push_back(a);
    return out;
}

}  // namespace

BatchDataset load_data(const RunConfig& config) {
    if (config.source == DataSourceKind::sim) {
        return sim::sample_trajectories(config.sim, config.sim_episodes, config.sim_length, config.csv.choice).data;
    }
    if (!fs::exists(config.csv_path)) throw InputError("trajectory CSV '" + config.csv_path + "' does not exist");
    return ingest_trajectories_file(config.csv_path, config.csv);
}

void cmd_fit(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
    const BatchDataset data = load_data(config);
    const FittedModel model = fit_model(data, config.hyper, resolve_threads(config.threads));
    print_fit_summary(log, model);
    std::ofstream out = open_output(out_dir, "model.json");
    write_model(out, model);
    write_fit_diagnostics(out_dir, model.grid);
}

void cmd_policy_iterate(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
    const BatchDataset data = load_data(config);
    ActionRule initial;
    if (!config.initial_model.empty()) {
        const FittedModel start = load_model(config.initial_model);
        if (start.grid.features.layout().dim != data.dim) {
            throw InputError("initial model '" + config.initial_model + "' has a different state dimension");
        }
        initial = model_rule(start);
    }
    const LspiFit fit = fit_lspi(data, config.hyper, config.pi, resolve_threads(config.threads), initial);
    print_fit_summary(log, fit.model);
    std::ofstream model_out = open_output(out_dir, "model.json");
    write_model(model_out, fit.model);
    write_fit_diagnostics(out_dir, fit.model.grid);
    std::ofstream diag = open_output(out_dir, "policy_diagnostics.jsonl");
    for (std::size_t t = 0; t < fit.frobenius_deltas.size(); ++t) {
        const bool last = t + 1 == fit.frobenius_deltas.size();
        json row = {{"iteration", t + 1},
                    {"frobenius_delta", fit.frobenius_deltas[t]},
                    {"status", last ? fit.stop_reason : std::string("continue")}};
        diag << row.dump() << '\n';
        log << "policy iteration " << t + 1 << ": frobenius delta " << fit.frobenius_deltas[t] << '\n';
    }
    log << "stopped: " << fit.stop_reason << '\n';
}

void cmd_simulate(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
    if (config.source != DataSourceKind::sim) throw InputError("simulate: data.source must be 'sim'");
    const sim::SimSample sample =
        sim::sample_trajectories(config.sim, config.sim_episodes, config.sim_length, config.csv.choice);
    std::ofstream out = open_output(out_dir, "trajectories.csv");
    sim::write_episodes_csv(out, sample.episodes);
    log << "wrote " << config.sim_episodes << " episodes of length " << config.sim_length << '\n';
}

void cmd_regret(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
    if (config.source != DataSourceKind::sim) throw InputError("regret: data.source must be 'sim'");
    FittedModel model;
    if (!config.regret.model.empty()) {
        model = load_model(config.regret.model);
        if (model.grid.features.layout().dim != config.sim.d) {
            throw InputError("regret: model state dimension does not match data.sim.d");
        }
    } else {
        model = fit_lspi(load_data(config), config.hyper, config.pi, resolve_threads(config.threads)).model;
    }
    // The simulator's behavior policy is uniform random; both rows are kept
    // so the table has the same shape as for other behavior policies.
    const std::vector<std::pair<std::string, sim::SimPolicy>> policies{
        {"ksh_lspi", model_policy(model)},
        {"random", sim::uniform_random_policy()},
        {"behavior", sim::uniform_random_policy()},
        {"oracle", sim::per_step_oracle_policy()},
    };
    const std::uint64_t eval_seed = derive_seed(config.seed, 1);
    std::vector<sim::RegretResult> results(policies.size());
    parallel_for(policies.size(), resolve_threads(config.threads), [&](std::size_t i) {
        results[i] = sim::regret_analysis(config.sim, policies[i].second, config.regret.episodes,
                                          config.regret.length, eval_seed);
    });
    std::ofstream episodes = open_output(out_dir, "regret_episodes.csv");
    std::ofstream summary = open_output(out_dir, "regret_summary.csv");
    episodes << "policy,episode,mean_regret\n";
    summary << "policy,mean_regret,std_error,episodes,length\n";
    for (std::size_t i = 0; i < policies.size(); ++i) {
        const sim::RegretResult& r = results[i];
        double sq = 0.0;
        for (std::size_t e = 0; e < r.episode_regret.size(); ++e) {
            episodes << policies[i].first << ',' << e << ',' << format_double(r.episode_regret[e]) << '\n';
            sq += (r.episode_regret[e] - r.mean_regret) * (r.episode_regret[e] - r.mean_regret);
        }
        const double n = static_cast<double>(r.episode_regret.size());
        const double se = n > 1 ? std::sqrt(sq / (n - 1) / n) : 0.0;
        summary << policies[i].first << ',' << format_double(r.mean_regret) << ',' << format_double(se) << ',' << config.regret.episodes << ','
                << config.regret.length << '\n';
        log << policies[i].first << ": mean regret " << r.mean_regret << '\n';
    }
}

void cmd_cv(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
    const BatchDataset data = load_data(config);
    const CVResult result =
        grid_search(data, config.cv.grid, config.cv.folds, config.cv.loss, config.seed, resolve_threads(config.threads));
    std::ofstream out = open_output(out_dir, "cv_results.csv");
    write_cv_csv(out, result);
    std::size_t failed = 0;
    for (const CVRow& row : result.rows) {
        if (!row.error.empty()) ++failed;
    }
    log << result.rows.size() << " combinations, " << failed << " failed; best is combination " << result.best
        << " with mean loss " << result.rows[result.best].mean_loss << '\n';
}

void cmd_export_components(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
    const ExportSettings& ex = config.export_settings;
    if (ex.model.empty()) throw InputError("export-components: export.model is required");
    const FittedModel model = load_model(ex.model);
    const FeatureLayout& layout = model.grid.features.layout();
    const std::vector<std::size_t> actions = ex.actions.empty() ? all_blocks(model) : ex.actions;
    for (std::size_t a : actions) {
        if (a >= layout.num_blocks) throw InputError("export-components: action " + std::to_string(a) + " out of range");
    }
    if (ex.which == "marginal") {
        for (std::size_t a : actions) {
            const std::string name = "marginal_a" + std::to_string(a) + ".csv";
            std::ofstream out = open_output(out_dir, name);
            out << "z,candidate,value\n";
            for (const ComponentPoint& p : extract_marginal(model.grid, a)) {
                out << format_double(p.z) << ',' << format_double(raw_candidate(model, p.z)) << ','
                    << format_double(p.value) << '\n';
            }
            log << "wrote " << name << '\n';
        }
        return;
    }
    const std::vector<std::size_t> features = ex.features.empty() ? layout.included_features() : ex.features;
    const std::vector<double> feature_grid = evenly_spaced_grid(ex.feature_grid_size);
    for (std::size_t j : features) {
        layout.feature_slot(j);
        for (std::size_t a : actions) {
            const std::string name = "joint_s" + std::to_string(j) + "_a" + std::to_string(a) + ".csv";
            std::ofstream out = open_output(out_dir, name);
            out << "z,candidate,s,s_raw,value\n";
            for (const ComponentPoint& p : extract_joint(model.grid, j, a, feature_grid)) {
                out << format_double(p.z) << ',' << format_double(raw_candidate(model, p.z)) << ','
                    << format_double(p.s) << ',' << format_double(model.normalization.invert(j, p.s)) << ','
                    << format_double(p.value) << '\n';
            }
            log << "wrote " << name << '\n';
        }
    }
}

}  // namespace kshrl
