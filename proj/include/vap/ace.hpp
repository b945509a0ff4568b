#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <vector>

#include <vap/covered.hpp>
#include <vap/data/dataset.hpp>
#include <vap/errors.hpp>
#include <vap/lpm.hpp>
#include <vap/mapping.hpp>
#include <vap/roadmap.hpp>
#include <vap/sim/boxstack.hpp>
#include <vap/suggest.hpp>
#include <vap/types.hpp>

namespace vap::ace {

// Neighbor scan order for the augmentation candidate list. Descending
// (farthest first) is the default; ascending is kept switchable because the
// farthest-first choice is deliberate but surprising.
enum class SortOrder : int { descending = 0, ascending = 1 };

struct AceConfig {
    float r = 0;           // augmentation search radius, typically the similar-pair mean
    float eps = 0;         // covered-space and clustering radius
    int n_e = 500;         // exploration steps
    SortOrder sort_order = SortOrder::descending;
    float rho_gate = 1.0f;  // prediction-reliability multiplier on eps

    void validate() const {
        if (r <= 0) throw ShapeError("AceConfig: r must be positive");
        if (eps <= 0) throw ShapeError("AceConfig: eps must be positive");
        if (n_e < 0) throw ShapeError("AceConfig: n_e must be nonnegative");
        if (rho_gate <= 0) throw ShapeError("AceConfig: rho_gate must be positive");
    }
};

// One discovered similar pair; both fields are covered-point columns.
struct AugmentPair {
    Index i = 0;
    Index j = 0;
};

// Candidate scan of the augmentation procedure over raw covered points.
// suggestions[c] is the suggested action set of column c, sorted. A pair
// (i, j) is emitted for the first in-radius j whose suggested set equals the
// anchor's and whose gated per-action predictions resolve to the same
// multiset of nearest covered points, with the gate engaging on the same
// action subset on both sides. At most one pair per anchor i, j never equal
// to i.
std::vector<AugmentPair> augment_pairs(
    const CoveredSpace& covered, const std::vector<std::vector<sim::GridAction>>& suggestions,
    const dyn::LpmModel& lpm, float r, SortOrder order, float rho_gate);

// Appends one similar pair per successful anchor to a copy of ds; original
// tuples are preserved verbatim. Empty augmentation is a valid outcome.
// covered must hold the encodings of ds in column order.
data::Dataset augment(const data::Dataset& ds, const suggest::SMParams& sm,
                      const suggest::SuggestionIndex& idx, const dyn::LpmModel& lpm,
                      const CoveredSpace& covered, const AceConfig& cfg);

// Pairs every covered point with its nearest other point when that lies
// within `radius`; no suggestion or prediction gating. Baseline counterpart
// of augment.
data::Dataset augment_baseline(const data::Dataset& ds, const mapping::MmModel& mm,
                               float radius);

struct ConnectResult {
    roadmap::Roadmap rm;
    int n_added = 0;
};

// Shortcut insertion over per-node suggested action sets: each prediction
// from a node representative that lands within eps * rho_gate of another
// node's representative adds a shortcut to the nearest such node. Existing
// edges are never modified.
ConnectResult connect_suggested(const roadmap::Roadmap& rm,
                                const std::vector<std::vector<sim::GridAction>>& node_actions,
                                const dyn::LpmModel& lpm, float eps, float rho_gate);

// Full pipeline: decode each node, suggest actions, then insert shortcuts.
ConnectResult connect(const roadmap::Roadmap& rm, const mapping::MmModel& mm,
                      const suggest::SMParams& sm, const suggest::SuggestionIndex& idx,
                      const dyn::LpmModel& lpm, float eps, float rho_gate);

struct ExploreCandidate {
    sim::GridAction u;
    float d = 0;  // L1 from the predicted next state to the nearest covered point
};

struct ExploreChoice {
    sim::GridAction u;
    std::vector<ExploreCandidate> candidates;
};

// Picks the candidate whose predicted successor is farthest from the covered
// points. Candidates are `suggested` minus the reverse of last_action; ties
// keep the earliest entry, so table-sorted input resolves ties by action
// order. Throws NoCandidateActions when nothing remains.
ExploreChoice choose_exploration(const Vec& z, const std::vector<sim::GridAction>& suggested,
                                 const std::optional<sim::GridAction>& last_action,
                                 const dyn::LpmModel& lpm, const Mat& covered_points);

// Encodes and suggests for one observation, then picks as above.
ExploreChoice explore_step(const sim::Observation& obs, const mapping::MmModel& mm,
                           const suggest::SMParams& sm, const suggest::SuggestionIndex& idx,
                           const dyn::LpmModel& lpm, const Mat& covered_points,
                           const std::optional<sim::GridAction>& last_action);

struct ExploreStepRecord {
    std::optional<std::int32_t> state_label;  // oracle id of the pre-step state
    std::vector<ExploreCandidate> candidates;
    std::optional<sim::GridAction> chosen;    // empty when no candidate survived
    bool valid = false;
};

struct ExploreLog {
    std::vector<ExploreStepRecord> steps;

    int n_steps() const { return static_cast<int>(steps.size()); }
    int n_valid() const;
};

struct ExploreOutcome {
    data::Dataset ds;
    ExploreLog log;
};

// Runs n_e exploration steps on the environment. Every valid step appends
// its action pair to a copy of ds and extends the covered points with the
// pair's encodings; an invalid or candidate-less step resets the environment
// to a random state and clears the last action. Deterministic given the
// environment seed.
ExploreOutcome run_exploration(sim::SimEnv& env, const data::Dataset& ds,
                               const mapping::MmModel& mm, const suggest::SMParams& sm,
                               const suggest::SuggestionIndex& idx, const dyn::LpmModel& lpm,
                               int n_e);

// Uniform-random explorer over the full action table; returns only the newly
// collected pairs. Baseline counterpart of run_exploration.
ExploreOutcome explore_baseline(sim::SimEnv& env, int n_e, std::uint64_t seed);

enum class AugmentMode : int { off = 0, ace = 1, baseline = 2 };
enum class ExploreMode : int { off = 0, ace = 1, baseline = 2 };

struct IntegrateConfig {
    AugmentMode augment = AugmentMode::ace;
    ExploreMode explore = ExploreMode::ace;
    bool connect = true;
    int n_e = 500;
    float w_eps = -0.35f;     // clustering radius scale: mean + w_eps * spread
    float rho_gate = 1.0f;
    SortOrder sort_order = SortOrder::descending;
    float r_override = 0;     // > 0 replaces the similar-pair-mean search radius
    float eps_override = 0;   // > 0 replaces the derived clustering radius
    std::uint64_t baseline_seed = 1234;  // action stream of the baseline explorer
    mapping::MmConfig mm{};
    dyn::LpmConfig lpm{};
    suggest::SmConfig sm{};
    suggest::ClusterConfig cluster{};

    void validate() const {
        if (n_e < 0) throw ShapeError("IntegrateConfig: n_e must be nonnegative");
        if (rho_gate <= 0) throw ShapeError("IntegrateConfig: rho_gate must be positive");
        mm.validate();
        lpm.validate();
        sm.validate();
    }
};

struct IntegrateResult {
    roadmap::Roadmap rm;
    data::Dataset ds;          // final dataset; can seed another round
    mapping::MmModel mm;       // models backing the roadmap
    dyn::LpmModel lpm;
    suggest::SMParams sm;
    suggest::SuggestionIndex index;
    ExploreLog explore_log;
    int n_aug_pairs = 0;
    int n_shortcuts = 0;
    float r = 0;
    float eps = 0;
    nlohmann::json provenance;  // ordered stage records
};

// The full pipeline: train models, augment, retrain on the augmented data,
// explore, build the roadmap, insert shortcuts. Stage toggles degrade it to
// any ablation; with everything off the result is the plain roadmap over ds.
IntegrateResult integrate(const data::Dataset& ds, sim::SimEnv& env,
                          const IntegrateConfig& cfg);

}  // namespace vap::ace
