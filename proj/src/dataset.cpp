#include "kshrl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "kshrl/error.hpp"
#include "kshrl/random.hpp"

namespace kshrl {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '"')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '"')) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(trim(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(trim(field));
    return out;
}

bool is_missing(const std::string& field) { return field.empty() || field == "NA"; }

double parse_number(const std::string& field, std::size_t line, const std::string& column) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw InputError("row " + std::to_string(line) + ": column '" + column +
                         "' is not numeric: '" + field + "'");
    }
    return v;
}

struct Row {
    std::int64_t t = 0;
    std::vector<double> state;
    double action = 0.0;
    double reward = 0.0;
    double candidate = 0.0;
};

}  // namespace

void BatchDataset::validate() const {
    if (dim == 0) throw InputError("dataset: state dimension must be positive");
    if (mode == ActionMode::discrete && num_actions == 0) {
        throw InputError("dataset: discrete mode requires at least one action");
    }
    if (mode == ActionMode::continuous && num_actions != 0) {
        throw InputError("dataset: continuous mode forbids a discrete action count");
    }
    if (auto ex = candidate.excluded_feature(); ex && *ex >= dim) {
        throw InputError("dataset: candidate feature " + std::to_string(*ex) + " out of range");
    }
    if (candidate.kind == CandidateChoice::Kind::action && mode != ActionMode::continuous) {
        throw InputError("dataset: the action can only be the candidate in continuous mode");
    }
    std::unordered_map<std::string, std::int64_t> last_time;
    for (std::size_t i = 0; i < transitions.size(); ++i) {
        const Transition& tr = transitions[i];
        const std::string where = "transition " + std::to_string(i) + ": ";
        if (tr.state.size() != dim || tr.next_state.size() != dim) {
            throw InputError(where + "state length differs from dimension " + std::to_string(dim));
        }
        if (!std::isfinite(tr.candidate)) throw InputError(where + "candidate is not finite");
        if (tr.time_index < 0) throw InputError(where + "negative time index");
        if (mode == ActionMode::discrete) {
            if (tr.action < 0 || tr.action != std::floor(tr.action) ||
                tr.action_index() >= num_actions) {
                throw InputError(where + "action " + std::to_string(tr.action) +
                                 " is not an index below " + std::to_string(num_actions));
            }
        }
        auto [it, inserted] = last_time.try_emplace(tr.trajectory_id, tr.time_index);
        if (!inserted) {
            if (tr.time_index <= it->second) {
                throw InputError(where + "time index not increasing within trajectory '" +
                                 tr.trajectory_id + "'");
            }
            it->second = tr.time_index;
        }
    }
}

std::vector<std::string> BatchDataset::trajectory_ids() const {
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& tr : transitions) {
        if (seen.insert(tr.trajectory_id).second) ids.push_back(tr.trajectory_id);
    }
    return ids;
}

BatchDataset BatchDataset::subset(const std::vector<std::string>& ids) const {
    const std::set<std::string> keep(ids.begin(), ids.end());
    BatchDataset out = *this;
    out.transitions.clear();
    for (const auto& tr : transitions) {
        if (keep.count(tr.trajectory_id)) out.transitions.push_back(tr);
    }
    return out;
}

std::vector<std::optional<std::size_t>> BatchDataset::successor_index() const {
    std::map<std::pair<std::string, std::int64_t>, std::size_t> position;
    for (std::size_t i = 0; i < transitions.size(); ++i) {
        position[{transitions[i].trajectory_id, transitions[i].time_index}] = i;
    }
    std::vector<std::optional<std::size_t>> next(transitions.size());
    for (std::size_t i = 0; i < transitions.size(); ++i) {
        auto it = position.find({transitions[i].trajectory_id, transitions[i].time_index + 1});
        if (it != position.end()) next[i] = it->second;
    }
    return next;
}

BatchDataset canonical_order(const BatchDataset& data) {
    BatchDataset out = data;
    std::stable_sort(out.transitions.begin(), out.transitions.end(),
                     [](const Transition& a, const Transition& b) {
                         if (a.trajectory_id != b.trajectory_id) return a.trajectory_id < b.trajectory_id;
                         return a.time_index < b.time_index;
                     });
    return out;
}

BatchDataset ingest_trajectories(std::istream& csv, const CsvSchema& schema) {
    std::string line;
    if (!std::getline(csv, line)) throw InputError("trajectory CSV is empty (no header)");
    const std::vector<std::string> header = split_csv_line(line);
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i) column.emplace(header[i], i);

    auto require = [&](const std::string& name) {
        auto it = column.find(name);
        if (it == column.end()) throw InputError("trajectory CSV has no column '" + name + "'");
        return it->second;
    };

    std::vector<std::string> state_names = schema.state;
    if (state_names.empty()) {
        for (std::size_t j = 0; column.count("s_" + std::to_string(j)); ++j) {
            state_names.push_back("s_" + std::to_string(j));
        }
        if (state_names.empty()) throw InputError("trajectory CSV has no state columns s_0..");
    }
    const std::size_t id_col = require(schema.trajectory_id);
    const std::size_t time_col = require(schema.time);
    const std::size_t action_col = require(schema.action);
    const std::size_t reward_col = require(schema.reward);
    std::vector<std::size_t> state_cols;
    for (const auto& name : state_names) state_cols.push_back(require(name));

    const CandidateChoice& choice = schema.choice;
    const std::size_t d = state_cols.size();
    std::optional<std::size_t> candidate_col;
    if (choice.kind == CandidateChoice::Kind::column) {
        const std::string name = schema.candidate.value_or("x");
        if (!schema.candidate && !column.count(name)) {
            throw InputError("trajectory CSV has no candidate column 'x' and no candidate choice");
        }
        candidate_col = require(name);
    } else if (choice.kind == CandidateChoice::Kind::feature && choice.feature >= d) {
        throw InputError("candidate feature " + std::to_string(choice.feature) + " out of range");
    }

    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<Row>> rows;
    std::size_t line_no = 1;
    while (std::getline(csv, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != header.size()) {
            throw InputError("row " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
        }
        std::vector<std::size_t> used = state_cols;
        used.insert(used.end(), {id_col, time_col, action_col, reward_col});
        if (candidate_col) used.push_back(*candidate_col);
        if (std::any_of(used.begin(), used.end(), [&](std::size_t c) { return is_missing(f[c]); })) {
            continue;
        }
        Row row;
        const double t = parse_number(f[time_col], line_no, schema.time);
        if (t != std::floor(t) || t < 0) {
            throw InputError("row " + std::to_string(line_no) + ": time index must be a nonnegative integer");
        }
        row.t = static_cast<std::int64_t>(t);
        for (std::size_t j = 0; j < d; ++j) {
            row.state.push_back(parse_number(f[state_cols[j]], line_no, state_names[j]));
        }
        row.action = parse_number(f[action_col], line_no, schema.action);
        row.reward = parse_number(f[reward_col], line_no, schema.reward);
        if (candidate_col) row.candidate = parse_number(f[*candidate_col], line_no, header[*candidate_col]);
        if (schema.mode == ActionMode::discrete && (row.action < 0 || row.action != std::floor(row.action))) {
            throw InputError("row " + std::to_string(line_no) + ": discrete action must be a nonnegative integer");
        }
        const std::string& id = f[id_col];
        auto [it, inserted] = rows.try_emplace(id);
        if (inserted) order.push_back(id);
        it->second.push_back(std::move(row));
    }

    BatchDataset data;
    data.dim = d;
    data.mode = schema.mode;
    data.candidate = choice;
    double max_action = 0.0;
    for (const auto& id : order) {
        auto& traj = rows[id];
        std::stable_sort(traj.begin(), traj.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
        for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
            if (traj[i].t == traj[i + 1].t) {
                throw InputError("trajectory '" + id + "' repeats time index " + std::to_string(traj[i].t));
            }
            if (traj[i + 1].t != traj[i].t + 1) continue;
            Transition tr;
            tr.state = traj[i].state;
            tr.action = traj[i].action;
            tr.reward = traj[i].reward;
            tr.next_state = traj[i + 1].state;
            tr.trajectory_id = id;
            tr.time_index = traj[i].t;
            switch (choice.kind) {
                case CandidateChoice::Kind::feature: tr.candidate = tr.state[choice.feature]; break;
                case CandidateChoice::Kind::action: tr.candidate = tr.action; break;
                case CandidateChoice::Kind::column: tr.candidate = traj[i].candidate; break;
            }
            max_action = std::max(max_action, tr.action);
            data.transitions.push_back(std::move(tr));
        }
    }
    if (data.transitions.empty()) throw InputError("trajectory CSV yields no transitions");
    if (schema.mode == ActionMode::discrete) {
        data.num_actions = schema.num_actions > 0 ? schema.num_actions
                                                  : static_cast<std::size_t>(max_action) + 1;
    }
    data.validate();
    return data;
}

BatchDataset ingest_trajectories_file(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open trajectory CSV '" + path + "'");
    return ingest_trajectories(in, schema);
}

double NormalizationSpec::apply(std::size_t feature, double v) const {
    const double range = max.at(feature) - min.at(feature);
    if (range <= 0.0) return 0.0;
    return (v - min[feature]) / range;
}

double NormalizationSpec::invert(std::size_t feature, double v) const {
    return min.at(feature) + v * (max.at(feature) - min.at(feature));
}

double NormalizationSpec::apply_candidate(double v) const {
    if (!candidate_range) return v;
    const auto [lo, hi] = *candidate_range;
    if (hi <= lo) return 0.0;
    return (v - lo) / (hi - lo);
}

double NormalizationSpec::invert_candidate(double v) const {
    if (!candidate_range) return v;
    const auto [lo, hi] = *candidate_range;
    return lo + v * (hi - lo);
}

NormalizedData normalize_features(const BatchDataset& data) {
    if (data.empty()) throw InputError("normalize_features: empty dataset");
    NormalizedData out;
    NormalizationSpec& spec = out.spec;
    spec.min.assign(data.dim, std::numeric_limits<double>::infinity());
    spec.max.assign(data.dim, -std::numeric_limits<double>::infinity());
    for (const auto& tr : data.transitions) {
        for (std::size_t j = 0; j < data.dim; ++j) {
            spec.min[j] = std::min({spec.min[j], tr.state[j], tr.next_state[j]});
            spec.max[j] = std::max({spec.max[j], tr.state[j], tr.next_state[j]});
        }
    }
    for (std::size_t j = 0; j < data.dim; ++j) {
        if (spec.max[j] == spec.min[j]) {
            out.warnings.push_back("feature " + std::to_string(j) + " is constant (" +
                                   std::to_string(spec.min[j]) + "); normalized to 0");
        }
    }
    if (data.candidate.kind != CandidateChoice::Kind::feature) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& tr : data.transitions) {
            lo = std::min(lo, tr.candidate);
            hi = std::max(hi, tr.candidate);
        }
        spec.candidate_range = std::make_pair(lo, hi);
        if (hi == lo) out.warnings.push_back("candidate is constant; normalized to 0");
    }
    out.data = apply_normalization(data, spec);
    return out;
}

BatchDataset apply_normalization(const BatchDataset& data, const NormalizationSpec& spec) {
    if (spec.min.size() != data.dim || spec.max.size() != data.dim) {
        throw InputError("normalization spec has " + std::to_string(spec.min.size()) +
                         " features, dataset has " + std::to_string(data.dim));
    }
    BatchDataset out = data;
    for (auto& tr : out.transitions) {
        for (std::size_t j = 0; j < data.dim; ++j) {
            tr.state[j] = spec.apply(j, tr.state[j]);
            tr.next_state[j] = spec.apply(j, tr.next_state[j]);
        }
        if (data.candidate.kind == CandidateChoice::Kind::feature) {
            tr.candidate = tr.state[data.candidate.feature];
        } else {
            tr.candidate = spec.apply_candidate(tr.candidate);
        }
    }
    return out;
}

BatchDataset binarize_actions(const BatchDataset& data, const std::map<std::string, double>& baseline) {
    if (data.mode != ActionMode::continuous) {
        throw InputError("binarize_actions: dataset must have continuous actions");
    }
    if (data.candidate.kind == CandidateChoice::Kind::action) {
        throw InputError("binarize_actions: the action is bound as the candidate");
    }
    BatchDataset out = data;
    for (auto& tr : out.transitions) {
        auto it = baseline.find(tr.trajectory_id);
        if (it == baseline.end()) {
            throw InputError("binarize_actions: no baseline for trajectory '" + tr.trajectory_id + "'");
        }
        tr.action = tr.action > it->second ? 1.0 : 0.0;
    }
    out.mode = ActionMode::discrete;
    out.num_actions = 2;
    return out;
}

std::pair<BatchDataset, BatchDataset> split_patient_level(const BatchDataset& data, double fraction,
                                                          std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw InputError("split_patient_level: fraction must lie in (0, 1)");
    }
    std::vector<std::string> ids = data.trajectory_ids();
    if (ids.size() < 2) throw InputError("split_patient_level: need at least 2 trajectories");
    std::sort(ids.begin(), ids.end());
    Rng rng(mix_seed(seed));
    std::shuffle(ids.begin(), ids.end(), rng);
    // The tolerance absorbs representation error, e.g. 0.7 * 10 = 7.000000000000001.
    auto n_first =
        static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ids.size()) - 1e-9));
    n_first = std::min(n_first, ids.size());
    std::vector<std::string> first(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_first));
    std::vector<std::string> second(ids.begin() + static_cast<std::ptrdiff_t>(n_first), ids.end());
    return {data.subset(first), data.subset(second)};
}

BatchDataset candidate_view(const BatchDataset& data, const CandidateChoice& choice) {
    BatchDataset out = data;
    switch (choice.kind) {
        case CandidateChoice::Kind::feature:
            if (choice.feature >= data.dim) {
                throw InputError("candidate_view: feature index " + std::to_string(choice.feature) +
                                 " out of range for dimension " + std::to_string(data.dim));
            }
            for (auto& tr : out.transitions) tr.candidate = tr.state[choice.feature];
            break;
        case CandidateChoice::Kind::action:
            if (data.mode != ActionMode::continuous) {
                throw InputError("candidate_view: the action can only be the candidate in continuous mode");
            }
            for (auto& tr : out.transitions) tr.candidate = tr.action;
            break;
        case CandidateChoice::Kind::column:
            break;
    }
    out.candidate = choice;
    return out;
}

}  // namespace kshrl
