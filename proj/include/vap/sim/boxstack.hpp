#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vap/errors.hpp"
#include "vap/rng.hpp"
#include "vap/types.hpp"

namespace vap::sim {

// Box stacking world: distinct boxes arranged in column stacks on a grid.
// Rules: one box moves at a time, one box per cell, boxes cannot float, and
// only a top box can be picked.
struct SimConfig {
    int columns = 3;
    int max_height = 3;
    int n_boxes = 4;
    int image_side = 32;
    Scalar position_noise = 0.17f;   // fraction of cell size, per axis
    Scalar brightness_lo = 0.6f;
    Scalar brightness_hi = 1.0f;

    void validate() const;
    bool operator==(const SimConfig&) const = default;
};

// Hidden ground-truth arrangement; oracle-only, never visible to learners.
struct UnderlyingState {
    // stacks[c] lists box ids bottom-to-top for column c
    std::vector<std::vector<int>> stacks;

    auto operator<=>(const UnderlyingState&) const = default;
    std::string to_string() const;
};

// Pick and place cells, both 1-based (column, height level).
struct GridAction {
    int pick_col = 0;
    int pick_level = 0;
    int place_col = 0;
    int place_level = 0;

    auto operator<=>(const GridAction&) const = default;
    std::string to_string() const;
};

// Undoes a move: pick from the placed cell, place back on the picked cell.
GridAction reverse_action(const GridAction& a);

struct Observation {
    Vec pixels;     // flattened [side, side, 3], row-major, values in [0,1]
    int side = 0;
    std::optional<std::int32_t> meta_label;  // oracle state id, evaluation only
};

// All reachable arrangements in deterministic canonical (lexicographic) order.
std::vector<UnderlyingState> enumerate_states(const SimConfig& cfg);

// All (pick, place) cell pairs that are valid in at least one enumerated
// state, ordered by (pick_col, pick_level, place_col, place_level).
std::vector<GridAction> enumerate_actions(const SimConfig& cfg);

// Exactly the actions whose pick cell holds the top box of a nonempty stack
// and whose place cell is the first free level of a different non-full stack.
std::vector<GridAction> valid_actions(const UnderlyingState& state, const SimConfig& cfg);

// Successor state under a valid action; throws InvalidAction otherwise.
UnderlyingState apply_action(const UnderlyingState& state, const GridAction& action,
                             const SimConfig& cfg);

// Deterministic given seed. Boxes are drawn as fixed-color squares jittered
// uniformly within +-position_noise*cell in both axes; the whole image is
// scaled by a brightness factor drawn from [brightness_lo, brightness_hi].
Observation render(const UnderlyingState& state, const SimConfig& cfg, std::uint64_t seed,
                   std::optional<std::int32_t> meta_label = std::nullopt);

// Fixed, mutually distinct color per box id.
Eigen::Matrix<Scalar, 3, 1> box_color(int box_id);

// Enumerated states with index lookup; render() through the table stamps the
// observation with its oracle state id.
class StateTable {
public:
    explicit StateTable(const SimConfig& cfg);

    const SimConfig& config() const { return cfg_; }
    const std::vector<UnderlyingState>& states() const { return states_; }
    const std::vector<GridAction>& actions() const { return actions_; }

    int state_index(const UnderlyingState& s) const;     // throws if unknown
    int action_index(const GridAction& a) const;         // -1 if unknown
    Observation render(int state_index, std::uint64_t seed) const;

    // Averaged edge actions can fall between cells; snap by L1 distance on
    // the four coordinates, ties to the lowest table index.
    int snap_action(Scalar pick_col, Scalar pick_level, Scalar place_col,
                    Scalar place_level) const;

private:
    SimConfig cfg_;
    std::vector<UnderlyingState> states_;
    std::vector<GridAction> actions_;
    std::map<UnderlyingState, int> state_index_;
    std::map<GridAction, int> action_index_;
};

// Directed graph over all enumerated states with one labeled edge per
// (state, valid action). Evaluation oracle.
class TransitionGraph {
public:
    explicit TransitionGraph(const SimConfig& cfg);

    const StateTable& table() const { return table_; }
    int n_states() const { return static_cast<int>(table_.states().size()); }
    int n_actions() const { return static_cast<int>(table_.actions().size()); }

    // (action index, successor state index) per state, ordered by action index
    const std::vector<std::pair<int, int>>& edges_from(int state) const {
        return adj_[static_cast<std::size_t>(state)];
    }
    int out_degree(int state) const { return static_cast<int>(edges_from(state).size()); }

    // successor of `state` under `action`, or nullopt if the move is invalid
    std::optional<int> successor(int state, const GridAction& action) const;
    bool valid_transition(int from_state, const GridAction& action, int to_state) const;

    // BFS hop count, -1 if unreachable
    int bfs_distance(int from_state, int to_state) const;
    bool strongly_connected() const;

private:
    StateTable table_;
    std::vector<std::vector<std::pair<int, int>>> adj_;
};

// Stateful environment for exploration runs: owns the current underlying
// state and a seeded RNG for rendering and resets.
class SimEnv {
public:
    SimEnv(const SimConfig& cfg, std::uint64_t seed);

    const StateTable& table() const { return table_; }
    int current_state() const { return current_; }

    Observation observe();                    // fresh render of the current state
    bool step(const GridAction& action);      // applies if valid; false otherwise
    void reset_random();                      // uniform over all enumerated states

private:
    StateTable table_;
    Rng rng_;
    int current_ = 0;
};

}  // namespace vap::sim
