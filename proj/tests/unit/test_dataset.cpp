#include <set>
#include <sstream>

#include "doctest.h"

#include "helpers.hpp"
#include "kshrl/dataset.hpp"
#include "kshrl/error.hpp"

using namespace kshrl;

namespace {

BatchDataset ingest(const std::string& text, CsvSchema schema = {}) {
    std::istringstream in(text);
    return ingest_trajectories(in, schema);
}

CsvSchema feature_schema() {
    CsvSchema schema;
    schema.choice = CandidateChoice::state_feature(0);
    return schema;
}

}  // namespace

TEST_CASE("ingest pairs consecutive rows within a trajectory") {
    const auto data = ingest(
        "traj_id,t,s_0,s_1,action,reward\n"
        "a,0,1,2,0,0.5\n"
        "a,1,3,4,1,1.5\n"
        "a,2,5,6,0,2.5\n",
        feature_schema());
    REQUIRE(data.size() == 2);
    CHECK(data.dim == 2);
    CHECK(data.num_actions == 2);
    CHECK(data.transitions[0].state == std::vector<double>{1, 2});
    CHECK(data.transitions[0].next_state == std::vector<double>{3, 4});
    CHECK(data.transitions[1].action == 1.0);
    CHECK(data.transitions[1].reward == 1.5);
    CHECK(data.transitions[1].candidate == 3.0);
}

TEST_CASE("a missing value breaks the chain instead of bridging the gap") {
    const auto data = ingest(
        "traj_id,t,s_0,action,reward\n"
        "a,0,1,0,1\n"
        "a,1,2,1,\n"
        "a,2,3,0,1\n"
        "b,0,1,0,NA\n"
        "b,1,1,0,1\n"
        "b,2,1,0,1\n",
        feature_schema());
    // Trajectory a keeps rows 0 and 2 (not consecutive): nothing. b keeps 1, 2.
    REQUIRE(data.size() == 1);
    CHECK(data.transitions[0].trajectory_id == "b");
    CHECK(data.transitions[0].time_index == 1);
}

TEST_CASE("pairing count matches consecutive runs") {
    // Runs of complete rows: a {0,1,2} and {4,5}; b {0}. Expected 2 + 1 + 0.
    const auto data = ingest(
        "traj_id,t,s_0,action,reward\n"
        "a,0,1,0,1\na,1,1,0,1\na,2,1,0,1\na,3,NA,0,1\na,4,1,0,1\na,5,1,0,1\n"
        "b,0,1,0,1\n",
        feature_schema());
    CHECK(data.size() == 3);
}

TEST_CASE("ingest errors name the row or column") {
    CHECK_THROWS_WITH_AS(ingest("traj_id,t,s_0,action,reward\na,0,1,abc,1\na,1,1,0,1\n", feature_schema()),
                         doctest::Contains("row 2"), InputError);
    CsvSchema schema = feature_schema();
    schema.reward = "pain";
    CHECK_THROWS_WITH_AS(ingest("traj_id,t,s_0,action,reward\na,0,1,0,1\n", schema), doctest::Contains("pain"),
                         InputError);
    CHECK_THROWS_AS(ingest("traj_id,t,s_0,action,reward\na,0,1,0,1\n", feature_schema()), InputError);
    CHECK_THROWS_AS(ingest_trajectories_file("/nonexistent/file.csv", feature_schema()), InputError);
}

TEST_CASE("external candidate column is read") {
    CsvSchema schema;
    const auto data = ingest("traj_id,t,s_0,action,reward,x\na,0,1,0,1,7\na,1,2,1,1,8\n", schema);
    REQUIRE(data.size() == 1);
    CHECK(data.transitions[0].candidate == 7.0);
}

TEST_CASE("normalization maps the training range to [0,1] and inverts") {
    auto data = testutil::chain_dataset({2, 4, 6}, {0, 0, 0}, {0, 0, 0});
    const NormalizedData n = normalize_features(data);
    CHECK(n.data.transitions[0].state[0] == 0.0);
    CHECK(n.data.transitions[0].next_state[0] == 0.5);
    CHECK(n.data.transitions[1].next_state[0] == 1.0);
    CHECK(n.warnings.empty());
    for (double v : {2.0, 3.3, 6.0}) CHECK(n.spec.invert(0, n.spec.apply(0, v)) == doctest::Approx(v).epsilon(1e-12));

    // Renormalizing normalized data with a spec fitted on it is the identity.
    const NormalizedData again = normalize_features(n.data);
    for (std::size_t i = 0; i < n.data.size(); ++i) {
        CHECK(std::abs(again.data.transitions[i].state[0] - n.data.transitions[i].state[0]) < 1e-12);
    }
}

TEST_CASE("constant features normalize to zero with a warning") {
    auto data = candidate_view(testutil::chain_dataset({5, 5, 5}, {0, 0, 0}, {0, 0, 0}),
                               CandidateChoice::state_feature(0));
    const NormalizedData n = normalize_features(data);
    CHECK(n.data.transitions[0].state[0] == 0.0);
    CHECK(n.data.transitions[1].next_state[0] == 0.0);
    CHECK(n.warnings.size() == 1);
}

TEST_CASE("binarize uses a strict comparison with the baseline") {
    BatchDataset data = testutil::chain_dataset({0, 0, 0, 0}, {0, 0, 0}, {0, 0, 0});
    data.mode = ActionMode::continuous;
    data.num_actions = 0;
    data.transitions[0].action = 1200;
    data.transitions[1].action = 1000;
    data.transitions[2].action = 300;
    const BatchDataset out = binarize_actions(data, {{"0", 1000.0}});
    CHECK(out.transitions[0].action == 1.0);
    CHECK(out.transitions[1].action == 0.0);
    CHECK(out.transitions[2].action == 0.0);
    CHECK(out.mode == ActionMode::discrete);
    CHECK(out.num_actions == 2);
    CHECK_THROWS_AS(binarize_actions(data, {{"other", 1.0}}), InputError);
}

TEST_CASE("patient-level split keeps trajectories whole") {
    BatchDataset data;
    for (int i = 0; i < 10; ++i) {
        auto one = testutil::chain_dataset({0, 1, 2}, {0, 1, 0}, {1, 1, 1}, 2, "p" + std::to_string(i));
        data.dim = one.dim;
        data.num_actions = 2;
        data.transitions.insert(data.transitions.end(), one.transitions.begin(), one.transitions.end());
    }
    const auto [train, valid] = split_patient_level(data, 0.8, 42);
    CHECK(train.trajectory_ids().size() == 8);
    CHECK(valid.trajectory_ids().size() == 2);
    std::set<std::string> all;
    for (const auto& id : train.trajectory_ids()) all.insert(id);
    for (const auto& id : valid.trajectory_ids()) CHECK(all.insert(id).second);
    CHECK(all.size() == 10);
    CHECK(train.size() + valid.size() == data.size());

    const auto [train2, valid2] = split_patient_level(data, 0.8, 42);
    CHECK(train2.trajectory_ids() == train.trajectory_ids());

    const auto one = testutil::chain_dataset({0, 1}, {0, 0}, {0, 0});
    CHECK_THROWS_AS(split_patient_level(one, 0.5, 0), InputError);
}

TEST_CASE("candidate view binds the candidate") {
    BatchDataset data;
    data.dim = 2;
    data.mode = ActionMode::continuous;
    for (int t = 0; t < 3; ++t) {
        Transition tr;
        tr.state = {0.1 * t, 0.2 * t};
        tr.next_state = tr.state;
        tr.action = 3.0 + t;
        tr.time_index = t;
        tr.trajectory_id = "a";
        data.transitions.push_back(tr);
    }
    const BatchDataset by_feature = candidate_view(data, CandidateChoice::state_feature(0));
    for (const auto& tr : by_feature.transitions) CHECK(tr.candidate == tr.state[0]);
    CHECK(by_feature.candidate.excluded_feature() == std::optional<std::size_t>(0));
    const BatchDataset by_action = candidate_view(data, CandidateChoice::the_action());
    for (const auto& tr : by_action.transitions) CHECK(tr.candidate == tr.action);
    CHECK_THROWS_AS(candidate_view(data, CandidateChoice::state_feature(2)), InputError);
}

TEST_CASE("validate rejects broken invariants") {
    auto data = testutil::chain_dataset({0, 1, 2}, {0, 1, 0}, {1, 1, 1});
    CHECK_NOTHROW(data.validate());
    auto bad_action = data;
    bad_action.transitions[0].action = 2;
    CHECK_THROWS_AS(bad_action.validate(), InputError);
    auto bad_dim = data;
    bad_dim.transitions[1].next_state = {1, 2};
    CHECK_THROWS_AS(bad_dim.validate(), InputError);
    auto bad_time = data;
    bad_time.transitions[1].time_index = 0;
    CHECK_THROWS_AS(bad_time.validate(), InputError);
}
