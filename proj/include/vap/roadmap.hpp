#pragma once

#include <cstdint>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <vap/covered.hpp>
#include <vap/data/dataset.hpp>
#include <vap/errors.hpp>
#include <vap/mapping.hpp>
#include <vap/sim/boxstack.hpp>
#include <vap/types.hpp>

namespace vap::roadmap {

enum class Provenance : std::int32_t { dataset = 0, shortcut = 1 };

struct Node {
    Vec representative;                     // mean of member latent points
    std::vector<Index> members;             // covered-point columns, ascending
    std::optional<std::int32_t> label;      // majority oracle label, evaluation only
};

// At most one edge per ordered node pair. `mean` averages the contributing
// grid cells (pick_col, pick_level, place_col, place_level); `action` is that
// mean snapped to the action table. Shortcut edges carry their inserted
// action verbatim with count 0.
struct Edge {
    Eigen::Vector4f mean = Eigen::Vector4f::Zero();
    sim::GridAction action;
    int count = 0;
    Provenance provenance = Provenance::dataset;
};

struct Roadmap {
    std::vector<Node> nodes;
    std::map<std::pair<int, int>, Edge> edges;
    float eps = 0;

    int n_nodes() const { return static_cast<int>(nodes.size()); }
    int n_edges() const { return static_cast<int>(edges.size()); }
    int n_shortcut_edges() const;
    const Edge* edge(int from, int to) const;  // nullptr when absent

    // Out-neighbors per node in ascending id order.
    std::vector<std::vector<int>> out_adjacency() const;
};

// Directed transition observed between two covered-point columns.
struct Arc {
    Index from = 0;
    Index to = 0;
    sim::GridAction u;
};

// Clusters `points` into the connected components of the L1-within-eps graph
// (radius clustering with a minimum population of one, so every point joins a
// node) and aggregates arcs into edges. Arcs inside one cluster are dropped.
// `point_labels` is either empty or one entry per column, -1 meaning
// unlabeled; a node label is the most frequent member label, ties to the
// smallest. The action table must be nonempty when arcs are given.
Roadmap build_lsr_points(const Mat& points, float eps, const std::vector<Arc>& arcs,
                         const std::vector<sim::GridAction>& action_table,
                         const std::vector<std::int32_t>& point_labels = {});

// Encodes every observation of `ds` (the covered-space column layout) and
// builds the roadmap over the dataset's enumerated action table.
Roadmap build_lsr(const mapping::MmModel& mm, const data::Dataset& ds, float eps);

struct Plan {
    std::vector<int> nodes;                 // node id sequence, start first
    std::vector<sim::GridAction> actions;   // edge actions, one per hop
    Mat latents;                            // representatives, one column per node
    std::vector<sim::Observation> visuals;  // decoded representatives, on request
    float start_snap = 0;                   // L1 from encoded start to its node
    float goal_snap = 0;
};

// Id and L1 distance of the node whose representative is closest to z, ties
// to the lowest id. `exclude` skips one node id. Throws EmptyIndex when no
// candidate remains.
std::pair<int, float> nearest_node(const Roadmap& rm, const Vec& z, int exclude = -1);

// All minimum-hop node paths from the node nearest z_start to the node
// nearest z_goal, in lexicographic node-id order, capped at max_paths.
// Identical endpoints yield one zero-action plan. Throws NoPath when the
// goal node is unreachable.
std::vector<Plan> plan_latent(const Roadmap& rm, const Vec& z_start, const Vec& z_goal,
                              int max_paths = 10);

// Encodes the observations and plans in latent space; with_visuals decodes
// every node on every returned plan.
std::vector<Plan> plan(const Roadmap& rm, const mapping::MmModel& mm,
                       const sim::Observation& start, const sim::Observation& goal,
                       int max_paths = 10, bool with_visuals = false);

// Edge payload for an inserted transition carrying u verbatim.
Edge shortcut_edge(const sim::GridAction& u);

// Returns a copy with edge (from, to) present. An existing edge keeps its
// payload and provenance; a new one is a shortcut carrying u. Throws
// UnknownNode for out-of-range ids and ShapeError for from == to.
Roadmap add_shortcut(const Roadmap& rm, int from, int to, const sim::GridAction& u);

void save_roadmap(const Roadmap& rm, const std::string& path);
Roadmap load_roadmap(const std::string& path);

// Nodes with labels and member counts, edges with actions; for inspection
// and visualization tooling.
nlohmann::json roadmap_to_json(const Roadmap& rm);

}  // namespace vap::roadmap
