#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "kshrl/commands.hpp"
#include "kshrl/error.hpp"

namespace {

constexpr int kExitUser = 2;
constexpr int kExitNumerical = 3;

using Command = std::function<void(const kshrl::RunConfig&, const std::filesystem::path&, std::ostream&)>;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel-weighted sparse additive Q-learning from batch data"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::string out_dir = ".";

    const std::map<std::string, std::pair<std::string, Command>> commands{
        {"fit", {"Fit the local model grid under the behavioral policy", kshrl::cmd_fit}},
        {"policy-iterate", {"Run approximate policy iteration", kshrl::cmd_policy_iterate}},
        {"simulate", {"Sample trajectories from the benchmark MDP", kshrl::cmd_simulate}},
        {"regret", {"Compare a learned policy against random, behavior and oracle", kshrl::cmd_regret}},
        {"cv", {"Cross-validated hyperparameter grid search", kshrl::cmd_cv}},
        {"export-components", {"Write marginal or joint component functions", kshrl::cmd_export_components}},
    };
    for (const auto& [name, entry] : commands) {
        CLI::App* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", config_path, "JSON config file (comments allowed)");
        sub->add_option("--seed", seed, "Seed for every random draw (overrides the config)");
        sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
        sub->add_option("--threads", threads, "Worker threads, 0 = all cores (overrides the config)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUser;
    }

    try {
        kshrl::RunConfig config = config_path.empty() ? kshrl::parse_config("{}") : kshrl::load_config(config_path);
        if (seed) kshrl::set_seed(config, *seed);
        if (threads) config.threads = *threads;
        for (const auto& [name, entry] : commands) {
            if (app.got_subcommand(name)) entry.second(config, out_dir, std::cout);
        }
    } catch (const kshrl::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const kshrl::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUser;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
