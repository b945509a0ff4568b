#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "vap/sim/boxstack.hpp"

namespace vap::data {

// Task action payload attached to training tuples. Box stacking uses grid
// cell pairs; anything comparable for exact equality works.
using ActionSpec = sim::GridAction;

struct TrainingTuple {
    sim::Observation obs_a;
    sim::Observation obs_b;
    bool is_action = false;          // tuple flag: action pair vs similar pair
    std::optional<ActionSpec> u;     // present iff is_action
};

struct Dataset {
    std::vector<TrainingTuple> tuples;
    sim::SimConfig sim;
    nlohmann::json provenance;  // seed, generation parameters, lineage

    int n_action_pairs() const;
    int n_similar_pairs() const;
};

struct SMTuple {
    sim::Observation obs_a;
    sim::Observation obs_b;
    bool similar = false;  // s signal: same suggested-action evidence
};

struct Query {
    sim::Observation start;
    sim::Observation goal;
};

struct QuerySet {
    std::vector<Query> queries;
    sim::SimConfig sim;
    nlohmann::json provenance;
};

// Renders n_pairs training tuples: action pairs sample (state, valid action)
// and render before/after; similar pairs render one state twice. Tuples are
// shuffled. Training render seeds are even; holdout seeds (make_queries) are
// odd, so the two observation pools never collide.
Dataset generate_dataset(const sim::SimConfig& cfg, int n_pairs, double similar_fraction,
                         std::uint64_t seed);

// Uniform subset without replacement of round(fraction * |ds|) tuples.
Dataset subsample(const Dataset& ds, double fraction, std::uint64_t seed);

// Rearranges action-pair start observations into similarity-labeled pairs:
// s=1 when the two observations have a common outgoing action, s=0 when they
// have differing outgoing actions (one pair can justify both). Emission is
// capped at 4 partners per anchor and signal, sampled with a fixed seed.
std::vector<SMTuple> build_sm_dataset(const Dataset& ds);

// Renders holdout_size fresh observations of random states and samples
// n_queries (start, goal) pairs from them.
QuerySet make_queries(const sim::SimConfig& cfg, int n_queries, int holdout_size,
                      std::uint64_t seed);

// One JSON object per tuple (flags, actions, oracle labels; no pixels).
void export_jsonl(const Dataset& ds, const std::string& path);

}  // namespace vap::data
