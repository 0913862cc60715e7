#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kshrl {

enum class ActionMode { discrete, continuous };

/// One sampled step (s, a, r, s', x). In discrete mode `action` holds an
/// integral action index; in continuous mode it is the raw action value.
struct Transition {
    std::vector<double> state;
    double action = 0.0;
    double reward = 0.0;
    std::vector<double> next_state;
    double candidate = 0.0;
    std::string trajectory_id;
    std::int64_t time_index = 0;

    std::size_t action_index() const { return static_cast<std::size_t>(action); }
};

/// What the candidate variable x of every transition is bound to.
struct CandidateChoice {
    enum class Kind {
        feature,  ///< a state feature; its block is dropped from the additive sum
        action,   ///< the (continuous) action itself
        column,   ///< an external column, e.g. a confounder read from CSV
    };
    Kind kind = Kind::column;
    std::size_t feature = 0;

    static CandidateChoice state_feature(std::size_t i) { return {Kind::feature, i}; }
    static CandidateChoice the_action() { return {Kind::action, 0}; }
    static CandidateChoice external() { return {Kind::column, 0}; }

    /// Feature index to exclude from the basis, if any.
    std::optional<std::size_t> excluded_feature() const {
        if (kind == Kind::feature) return feature;
        return std::nullopt;
    }
    friend bool operator==(const CandidateChoice&, const CandidateChoice&) = default;
};

/// Ordered collection of transitions grouped by trajectory.
struct BatchDataset {
    std::vector<Transition> transitions;
    std::size_t dim = 0;
    ActionMode mode = ActionMode::discrete;
    /// Number of discrete actions; 0 in continuous mode.
    std::size_t num_actions = 0;
    CandidateChoice candidate = CandidateChoice::external();

    std::size_t size() const { return transitions.size(); }
    bool empty() const { return transitions.empty(); }

    /// Checks every type invariant; throws InputError on the first violation.
    void validate() const;

    /// Distinct trajectory ids in first-appearance order.
    std::vector<std::string> trajectory_ids() const;

    /// Transitions whose trajectory id is in `ids`, keeping input order.
    BatchDataset subset(const std::vector<std::string>& ids) const;

    /// For each transition, the index of the transition in the same
    /// trajectory with time_index + 1, if present.
    std::vector<std::optional<std::size_t>> successor_index() const;
};

/// Copy of `data` with transitions sorted by (trajectory id, time index).
BatchDataset canonical_order(const BatchDataset& data);

/// Column names for trajectory CSV ingestion.
struct CsvSchema {
    std::string trajectory_id = "traj_id";
    std::string time = "t";
    /// State feature columns; empty means auto-detect s_0, s_1, ... in order.
    std::vector<std::string> state;
    std::string action = "action";
    std::string reward = "reward";
    /// Candidate column; used only when the dataset candidate is external.
    std::optional<std::string> candidate;
    ActionMode mode = ActionMode::discrete;
    /// Discrete action count; 0 means max observed action + 1.
    std::size_t num_actions = 0;
    CandidateChoice choice = CandidateChoice::external();
};

/// Reads a trajectory CSV and pairs consecutive rows into transitions.
/// Rows with a missing value (empty or NA) are dropped before pairing, so no
/// transition spans the gap. The last row of each trajectory yields nothing.
BatchDataset ingest_trajectories(std::istream& csv, const CsvSchema& schema);
BatchDataset ingest_trajectories_file(const std::string& path, const CsvSchema& schema);

struct NormalizationSpec {
    std::vector<double> min;
    std::vector<double> max;
    /// Range of the candidate when it is not a state feature.
    std::optional<std::pair<double, double>> candidate_range;

    double apply(std::size_t feature, double v) const;
    double invert(std::size_t feature, double v) const;
    double apply_candidate(double v) const;
    double invert_candidate(double v) const;
};

struct NormalizedData {
    BatchDataset data;
    NormalizationSpec spec;
    std::vector<std::string> warnings;
};

/// Fits min/max over states and next states jointly and maps each feature
/// to [0,1]. Constant features map to 0.0 and produce a warning.
NormalizedData normalize_features(const BatchDataset& data);

/// Applies a previously fitted spec (e.g. the training split's) to `data`.
BatchDataset apply_normalization(const BatchDataset& data, const NormalizationSpec& spec);

/// action <- 1 iff raw action > baseline of its trajectory, else 0.
BatchDataset binarize_actions(const BatchDataset& data,
                              const std::map<std::string, double>& baseline);

/// Partitions trajectories into (first, second); the first part holds
/// ceil(fraction * #trajectories) of them.
std::pair<BatchDataset, BatchDataset> split_patient_level(const BatchDataset& data,
                                                          double fraction,
                                                          std::uint64_t seed);

/// Rebinds the candidate of every transition to `choice`. Choosing
/// `external` keeps the current candidate values.
BatchDataset candidate_view(const BatchDataset& data, const CandidateChoice& choice);

}  // namespace kshrl
