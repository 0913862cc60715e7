#include "kshrl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "kshrl/error.hpp"
#include "kshrl/names.hpp"

namespace kshrl {

using nlohmann::json;

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw InputError("config: '" + path_ + "' must be an object");
    }
    Section(const Section&) = delete;
    Section& operator=(const Section&) = delete;
    ~Section() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) throw InputError("config: unknown key '" + where(key) + "'");
        }
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    template <typename T>
    void read(const std::string& key, T& out) {
        if (!has(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw InputError("config: '" + where(key) + "' has the wrong type");
        }
    }

    template <typename T>
    void read_list(const std::string& key, std::vector<T>& out) {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_array()) {
            out.clear();
            out.push_back(T{});
            read(key, out.front());
            return;
        }
        read(key, out);
        if (out.empty()) throw InputError("config: '" + where(key) + "' must not be empty");
    }

    template <typename E, typename Parse>
    void read_enum(const std::string& key, E& out, Parse parse) {
        std::string name;
        if (!has(key)) return;
        read(key, name);
        out = parse(name);
    }

    Section child(const std::string& key) {
        seen_.insert(key);
        static const json empty = json::object();
        return Section(j_.contains(key) ? j_.at(key) : empty, where(key));
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

BasisSpec read_basis(Section s, const BasisSpec& fallback) {
    BasisFamily family = fallback.family;
    std::size_t m = fallback.m;
    int degree = fallback.degree;
    s.read_enum("family", family, parse_basis_family);
    s.read("m", m);
    s.read("degree", degree);
    BasisSpec spec = family == BasisFamily::bspline ? BasisSpec::bspline(m, degree) : BasisSpec::trigonometric(m);
    spec.validate();
    return spec;
}

void read_solver(Section s, SolverConfig& solver, FitMethod& method) {
    s.read("lambda", solver.lambda);
    s.read("mu", solver.mu);
    s.read_enum("step_rule", solver.step_rule, parse_step_rule);
    s.read("epsilon", solver.epsilon);
    s.read("max_iter", solver.max_iter);
    s.read("ridge", solver.ridge);
    s.read_enum("threshold", solver.threshold, parse_threshold);
    s.read("overflow_bound", solver.overflow_bound);
    s.read_enum("method", method, parse_fit_method);
}

void read_data(Section s, RunConfig& c) {
    std::string source = "sim";
    s.read("source", source);
    if (source == "sim") {
        c.source = DataSourceKind::sim;
    } else if (source == "csv") {
        c.source = DataSourceKind::csv;
    } else {
        throw InputError("config: data.source must be 'sim' or 'csv'");
    }
    s.read_enum("mode", c.csv.mode, parse_action_mode);
    {
        Section cand = s.child("candidate");
        cand.read_enum("kind", c.csv.choice.kind, parse_candidate_kind);
        cand.read("feature", c.csv.choice.feature);
        if (cand.has("column")) {
            std::string column;
            cand.read("column", column);
            c.csv.candidate = column;
        }
    }
    {
        Section csv = s.child("csv");
        csv.read("path", c.csv_path);
        csv.read("trajectory_id", c.csv.trajectory_id);
        csv.read("time", c.csv.time);
        csv.read("state", c.csv.state);
        csv.read("action", c.csv.action);
        csv.read("reward", c.csv.reward);
        csv.read("num_actions", c.csv.num_actions);
    }
    {
        Section sim = s.child("sim");
        sim.read("d", c.sim.d);
        sim.read("sigma", c.sim.sigma);
        sim.read("correlation", c.sim.correlation);
        sim.read("episodes", c.sim_episodes);
        sim.read("length", c.sim_length);
    }
}

void read_cv(Section s, RunConfig& c) {
    s.read("folds", c.cv.folds);
    s.read_enum("loss", c.cv.loss, parse_loss);
    HyperGrid& g = c.cv.grid;
    g.bases = {c.hyper.basis};
    g.kernel = c.hyper.kernel.family;
    g.bandwidths = {c.hyper.kernel.bandwidth};
    g.lambdas = {c.hyper.solver.lambda};
    g.mus = {c.hyper.solver.mu};
    g.gammas = {c.hyper.gamma};
    g.grid_sizes = {c.hyper.grid_size};
    g.ridges = {c.hyper.solver.ridge};
    g.solver = c.hyper.solver;
    g.method = c.hyper.method;
    Section grid = s.child("grid");
    if (grid.has("basis")) {
        const json& list = grid.raw("basis");
        if (!list.is_array() || list.empty()) throw InputError("config: 'cv.grid.basis' must be a nonempty array");
        g.bases.clear();
        for (std::size_t i = 0; i < list.size(); ++i) {
            g.bases.push_back(read_basis(Section(list[i], "cv.grid.basis[" + std::to_string(i) + "]"),
                                         c.hyper.basis));
        }
    }
    grid.read_list("bandwidth", g.bandwidths);
    grid.read_list("lambda", g.lambdas);
    grid.read_list("mu", g.mus);
    grid.read_list("gamma", g.gammas);
    grid.read_list("grid_size", g.grid_sizes);
    grid.read_list("ridge", g.ridges);
}

}  // namespace

void RunConfig::validate() const {
    if (source == DataSourceKind::csv && csv_path.empty()) throw InputError("config: data.csv.path is required");
    if (csv.mode == ActionMode::continuous && csv.num_actions != 0) {
        throw InputError("config: continuous mode forbids data.csv.num_actions");
    }
    if (csv.choice.kind == CandidateChoice::Kind::action && csv.mode != ActionMode::continuous) {
        throw InputError("config: the action can only be the candidate in continuous mode");
    }
    if (source == DataSourceKind::sim) {
        sim.validate();
        if (csv.mode != ActionMode::discrete) throw InputError("config: simulated data has discrete actions");
        if (csv.choice.kind != CandidateChoice::Kind::feature) {
            throw InputError("config: simulated data needs a state-feature candidate");
        }
        if (csv.choice.feature >= sim.d) throw InputError("config: candidate feature out of range");
        if (sim_episodes == 0 || sim_length < 2) {
            throw InputError("config: data.sim needs episodes >= 1 and length >= 2");
        }
    }
    hyper.basis.validate();
    hyper.kernel.validate();
    hyper.solver.validate();
    if (!(hyper.gamma >= 0.0 && hyper.gamma < 1.0)) throw InputError("config: gamma must lie in [0, 1)");
    if (hyper.grid_size == 0) throw InputError("config: grid_size must be positive");
    pi.validate();
    if (regret.episodes == 0 || regret.length == 0) throw InputError("config: regret needs episodes and length >= 1");
    if (cv.folds < 2) throw InputError("config: cv.folds must be at least 2");
    if (export_settings.which != "marginal" && export_settings.which != "joint") {
        throw InputError("config: export.which must be 'marginal' or 'joint'");
    }
    if (export_settings.feature_grid_size < 2) throw InputError("config: export.feature_grid_size must be >= 2");
}

void set_seed(RunConfig& config, std::uint64_t seed) {
    config.seed = seed;
    config.sim.seed = seed;
    config.hyper.solver.seed = seed;
    config.cv.grid.solver.seed = seed;
}

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c;
    c.csv.choice = CandidateChoice::state_feature(0);
    {
        Section root(j, "");
        root.read("seed", c.seed);
        root.read("threads", c.threads);
        read_data(root.child("data"), c);
        c.hyper.basis = read_basis(root.child("basis"), c.hyper.basis);
        {
            Section k = root.child("kernel");
            k.read_enum("family", c.hyper.kernel.family, parse_kernel_family);
            k.read("bandwidth", c.hyper.kernel.bandwidth);
        }
        read_solver(root.child("solver"), c.hyper.solver, c.hyper.method);
        root.read("gamma", c.hyper.gamma);
        root.read("grid_size", c.hyper.grid_size);
        {
            Section pi = root.child("policy_iteration");
            pi.read("max_policy_iters", c.pi.max_policy_iters);
            pi.read("frob_epsilon", c.pi.frob_epsilon);
            pi.read("initial_model", c.initial_model);
        }
        {
            Section r = root.child("regret");
            r.read("episodes", c.regret.episodes);
            r.read("length", c.regret.length);
            r.read("model", c.regret.model);
        }
        read_cv(root.child("cv"), c);
        {
            Section e = root.child("export");
            e.read("model", c.export_settings.model);
            e.read("which", c.export_settings.which);
            e.read("features", c.export_settings.features);
            e.read("actions", c.export_settings.actions);
            e.read("feature_grid_size", c.export_settings.feature_grid_size);
        }
    }
    set_seed(c, c.seed);
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

}  // namespace kshrl
