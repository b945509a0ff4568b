#include <vap/roadmap.hpp>

#include <algorithm>
#include <functional>
#include <limits>
#include <queue>

#include <vap/data/container.hpp>
#include <vap/data/io.hpp>

namespace vap::roadmap {
namespace {

struct UnionFind {
    std::vector<int> parent;

    explicit UnionFind(Index n) : parent(static_cast<std::size_t>(n)) {
        for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
    }

    int find(int v) {
        while (parent[static_cast<std::size_t>(v)] != v) {
            parent[static_cast<std::size_t>(v)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
            v = parent[static_cast<std::size_t>(v)];
        }
        return v;
    }

    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent[static_cast<std::size_t>(b)] = a;
    }
};

// L1 over the four cell coordinates, ties to the lowest table index.
sim::GridAction snap_to_table(const std::vector<sim::GridAction>& table,
                              const Eigen::Vector4f& m) {
    int best = 0;
    float best_d = std::numeric_limits<float>::infinity();
    for (int i = 0; i < static_cast<int>(table.size()); ++i) {
        const sim::GridAction& a = table[static_cast<std::size_t>(i)];
        const float d = std::abs(m(0) - static_cast<float>(a.pick_col)) +
                        std::abs(m(1) - static_cast<float>(a.pick_level)) +
                        std::abs(m(2) - static_cast<float>(a.place_col)) +
                        std::abs(m(3) - static_cast<float>(a.place_level));
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return table[static_cast<std::size_t>(best)];
}

Eigen::Vector4f action_coords(const sim::GridAction& a) {
    return {static_cast<float>(a.pick_col), static_cast<float>(a.pick_level),
            static_cast<float>(a.place_col), static_cast<float>(a.place_level)};
}

}  // namespace

int Roadmap::n_shortcut_edges() const {
    int c = 0;
    for (const auto& [key, e] : edges)
        if (e.provenance == Provenance::shortcut) ++c;
    return c;
}

const Edge* Roadmap::edge(int from, int to) const {
    const auto it = edges.find({from, to});
    return it == edges.end() ? nullptr : &it->second;
}

std::vector<std::vector<int>> Roadmap::out_adjacency() const {
    std::vector<std::vector<int>> adj(nodes.size());
    for (const auto& [key, e] : edges) adj[static_cast<std::size_t>(key.first)].push_back(key.second);
    return adj;
}

Roadmap build_lsr_points(const Mat& points, float eps, const std::vector<Arc>& arcs,
                         const std::vector<sim::GridAction>& action_table,
                         const std::vector<std::int32_t>& point_labels) {
    const Index n = points.cols();
    if (eps <= 0) throw ShapeError("build_lsr_points: eps must be positive");
    if (!point_labels.empty() && static_cast<Index>(point_labels.size()) != n)
        throw ShapeError("build_lsr_points: one label per point required");
    for (const Arc& a : arcs)
        if (a.from < 0 || a.from >= n || a.to < 0 || a.to >= n)
            throw ShapeError("build_lsr_points: arc endpoint out of range");
    if (!arcs.empty() && action_table.empty())
        throw ShapeError("build_lsr_points: action table required to label edges");

    UnionFind uf(n);
    for (Index i = 0; i + 1 < n; ++i) {
        const auto d =
            (points.rightCols(n - 1 - i).colwise() - points.col(i)).cwiseAbs().colwise().sum();
        for (Index j = 0; j < d.size(); ++j)
            if (d(j) <= eps) uf.unite(static_cast<int>(i), static_cast<int>(i + 1 + j));
    }

    Roadmap rm;
    rm.eps = eps;
    std::vector<int> cluster_of(static_cast<std::size_t>(n), -1);
    std::vector<int> root_id(static_cast<std::size_t>(n), -1);
    for (Index i = 0; i < n; ++i) {
        const int r = uf.find(static_cast<int>(i));
        if (root_id[static_cast<std::size_t>(r)] < 0) {
            root_id[static_cast<std::size_t>(r)] = rm.n_nodes();
            rm.nodes.push_back({Vec::Zero(points.rows()), {}, std::nullopt});
        }
        const int c = root_id[static_cast<std::size_t>(r)];
        cluster_of[static_cast<std::size_t>(i)] = c;
        rm.nodes[static_cast<std::size_t>(c)].members.push_back(i);
    }

    for (Node& node : rm.nodes) {
        for (Index m : node.members) node.representative += points.col(m);
        node.representative /= static_cast<float>(node.members.size());
        if (point_labels.empty()) continue;
        std::map<std::int32_t, int> counts;
        for (Index m : node.members) {
            const std::int32_t l = point_labels[static_cast<std::size_t>(m)];
            if (l >= 0) ++counts[l];
        }
        int best = 0;
        for (const auto& [label, c] : counts)
            if (c > best) {
                best = c;
                node.label = label;
            }
    }

    std::map<std::pair<int, int>, std::pair<Eigen::Vector4f, int>> sums;
    for (const Arc& a : arcs) {
        const int from = cluster_of[static_cast<std::size_t>(a.from)];
        const int to = cluster_of[static_cast<std::size_t>(a.to)];
        if (from == to) continue;
        auto& [sum, count] = sums[{from, to}];
        if (count == 0) sum.setZero();
        sum += action_coords(a.u);
        ++count;
    }
    for (const auto& [key, sc] : sums) {
        Edge e;
        e.mean = sc.first / static_cast<float>(sc.second);
        e.action = snap_to_table(action_table, e.mean);
        e.count = sc.second;
        e.provenance = Provenance::dataset;
        rm.edges.emplace(key, e);
    }
    return rm;
}

Roadmap build_lsr(const mapping::MmModel& mm, const data::Dataset& ds, float eps) {
    if (ds.tuples.empty()) throw ShapeError("build_lsr: dataset is empty");
    const CoveredSpace cov = CoveredSpace::from_dataset(mm, ds, eps);
    std::vector<std::int32_t> labels(static_cast<std::size_t>(cov.size()), -1);
    std::vector<Arc> arcs;
    for (std::size_t i = 0; i < ds.tuples.size(); ++i) {
        const data::TrainingTuple& t = ds.tuples[i];
        if (t.obs_a.meta_label) labels[2 * i] = *t.obs_a.meta_label;
        if (t.obs_b.meta_label) labels[2 * i + 1] = *t.obs_b.meta_label;
        if (t.is_action && t.u)
            arcs.push_back({static_cast<Index>(2 * i), static_cast<Index>(2 * i + 1), *t.u});
    }
    return build_lsr_points(cov.points(), eps, arcs, sim::enumerate_actions(ds.sim), labels);
}

std::pair<int, float> nearest_node(const Roadmap& rm, const Vec& z, int exclude) {
    int best = -1;
    float best_d = std::numeric_limits<float>::infinity();
    for (int i = 0; i < rm.n_nodes(); ++i) {
        if (i == exclude) continue;
        const Node& node = rm.nodes[static_cast<std::size_t>(i)];
        if (node.representative.size() != z.size())
            throw ShapeError("nearest_node: latent size mismatch");
        const float d = (node.representative - z).cwiseAbs().sum();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    if (best < 0) throw EmptyIndex("nearest_node: no candidate nodes");
    return {best, best_d};
}

std::vector<Plan> plan_latent(const Roadmap& rm, const Vec& z_start, const Vec& z_goal,
                              int max_paths) {
    if (max_paths <= 0) throw ShapeError("plan_latent: max_paths must be positive");
    const auto [s, start_snap] = nearest_node(rm, z_start);
    const auto [g, goal_snap] = nearest_node(rm, z_goal);
    const Index latent_dim = rm.nodes[0].representative.size();

    const auto assemble = [&](const std::vector<int>& seq) {
        Plan p;
        p.nodes = seq;
        p.latents = Mat(latent_dim, static_cast<Index>(seq.size()));
        for (std::size_t k = 0; k < seq.size(); ++k)
            p.latents.col(static_cast<Index>(k)) =
                rm.nodes[static_cast<std::size_t>(seq[k])].representative;
        for (std::size_t k = 0; k + 1 < seq.size(); ++k)
            p.actions.push_back(rm.edge(seq[k], seq[k + 1])->action);
        p.start_snap = start_snap;
        p.goal_snap = goal_snap;
        return p;
    };

    std::vector<Plan> plans;
    if (s == g) {
        plans.push_back(assemble({s}));
        return plans;
    }

    const auto adj = rm.out_adjacency();
    std::vector<int> dist(static_cast<std::size_t>(rm.n_nodes()), -1);
    std::queue<int> frontier;
    dist[static_cast<std::size_t>(s)] = 0;
    frontier.push(s);
    while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop();
        for (int v : adj[static_cast<std::size_t>(u)])
            if (dist[static_cast<std::size_t>(v)] < 0) {
                dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
                frontier.push(v);
            }
    }
    if (dist[static_cast<std::size_t>(g)] < 0)
        throw NoPath("no route from node " + std::to_string(s) + " to node " + std::to_string(g));

    // Shortest-path DAG membership: nodes lying on some minimum-hop route.
    std::vector<std::vector<int>> radj(static_cast<std::size_t>(rm.n_nodes()));
    for (const auto& [key, e] : rm.edges) {
        const auto [u, v] = key;
        if (dist[static_cast<std::size_t>(u)] >= 0 &&
            dist[static_cast<std::size_t>(v)] == dist[static_cast<std::size_t>(u)] + 1)
            radj[static_cast<std::size_t>(v)].push_back(u);
    }
    std::vector<char> on_path(static_cast<std::size_t>(rm.n_nodes()), 0);
    on_path[static_cast<std::size_t>(g)] = 1;
    frontier.push(g);
    while (!frontier.empty()) {
        const int v = frontier.front();
        frontier.pop();
        for (int u : radj[static_cast<std::size_t>(v)])
            if (!on_path[static_cast<std::size_t>(u)]) {
                on_path[static_cast<std::size_t>(u)] = 1;
                frontier.push(u);
            }
    }

    std::vector<int> path{s};
    const std::function<void(int)> dfs = [&](int u) {
        if (static_cast<int>(plans.size()) >= max_paths) return;
        if (u == g) {
            plans.push_back(assemble(path));
            return;
        }
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if (dist[static_cast<std::size_t>(v)] != dist[static_cast<std::size_t>(u)] + 1 ||
                !on_path[static_cast<std::size_t>(v)])
                continue;
            path.push_back(v);
            dfs(v);
            path.pop_back();
            if (static_cast<int>(plans.size()) >= max_paths) return;
        }
    };
    dfs(s);
    return plans;
}

std::vector<Plan> plan(const Roadmap& rm, const mapping::MmModel& mm,
                       const sim::Observation& start, const sim::Observation& goal,
                       int max_paths, bool with_visuals) {
    std::vector<Plan> plans =
        plan_latent(rm, mapping::encode(mm, start), mapping::encode(mm, goal), max_paths);
    if (with_visuals)
        for (Plan& p : plans)
            for (int id : p.nodes)
                p.visuals.push_back(
                    mapping::decode(mm, rm.nodes[static_cast<std::size_t>(id)].representative));
    return plans;
}

Edge shortcut_edge(const sim::GridAction& u) {
    Edge e;
    e.mean = action_coords(u);
    e.action = u;
    e.count = 0;
    e.provenance = Provenance::shortcut;
    return e;
}

Roadmap add_shortcut(const Roadmap& rm, int from, int to, const sim::GridAction& u) {
    if (from < 0 || from >= rm.n_nodes())
        throw UnknownNode("add_shortcut: no node " + std::to_string(from));
    if (to < 0 || to >= rm.n_nodes())
        throw UnknownNode("add_shortcut: no node " + std::to_string(to));
    if (from == to) throw ShapeError("add_shortcut: self edges not allowed");
    Roadmap out = rm;
    if (out.edge(from, to)) return out;
    out.edges.emplace(std::make_pair(from, to), shortcut_edge(u));
    return out;
}

void save_roadmap(const Roadmap& rm, const std::string& path) {
    const Index latent_dim = rm.nodes.empty() ? 0 : rm.nodes[0].representative.size();
    data::PackWriter w(nlohmann::json{{"kind", "roadmap"},
                                      {"eps", rm.eps},
                                      {"latent_dim", latent_dim},
                                      {"n_nodes", rm.n_nodes()},
                                      {"n_edges", rm.n_edges()}});

    Mat reps(latent_dim, rm.n_nodes());
    std::vector<std::int32_t> offsets{0}, members, labels;
    for (int i = 0; i < rm.n_nodes(); ++i) {
        const Node& node = rm.nodes[static_cast<std::size_t>(i)];
        reps.col(i) = node.representative;
        for (Index m : node.members) members.push_back(static_cast<std::int32_t>(m));
        offsets.push_back(static_cast<std::int32_t>(members.size()));
        labels.push_back(node.label ? *node.label : -1);
    }
    w.f32("representatives", reps);
    w.i32("member_offsets", offsets);
    w.i32("members", members);
    w.i32("node_labels", labels);

    const Index m = rm.n_edges();
    Mat mean(4, m);
    std::vector<std::int32_t> endpoints, action, count, provenance;
    Index col = 0;
    for (const auto& [key, e] : rm.edges) {
        endpoints.push_back(key.first);
        endpoints.push_back(key.second);
        mean.col(col++) = e.mean;
        action.insert(action.end(), {e.action.pick_col, e.action.pick_level, e.action.place_col,
                                     e.action.place_level});
        count.push_back(e.count);
        provenance.push_back(static_cast<std::int32_t>(e.provenance));
    }
    w.i32("edge_endpoints", endpoints.data(), 2, m);
    w.f32("edge_mean", mean);
    w.i32("edge_action", action.data(), 4, m);
    w.i32("edge_count", count);
    w.i32("edge_provenance", provenance);
    w.save(path);
}

Roadmap load_roadmap(const std::string& path) {
    const data::PackReader r(path);
    if (r.meta().value("kind", "") != "roadmap")
        throw FormatError("not a roadmap container", 0);
    Roadmap rm;
    rm.eps = r.meta().at("eps").get<float>();

    const Mat reps = r.f32("representatives");
    const auto offsets = r.i32("member_offsets");
    const auto members = r.i32("members");
    const auto labels = r.i32("node_labels");
    const Index n = reps.cols();
    if (static_cast<Index>(offsets.size()) != n + 1 || static_cast<Index>(labels.size()) != n)
        throw FormatError("roadmap node arrays disagree", 0);
    for (Index i = 0; i < n; ++i) {
        Node node;
        node.representative = reps.col(i);
        const auto lo = offsets[static_cast<std::size_t>(i)];
        const auto hi = offsets[static_cast<std::size_t>(i) + 1];
        if (lo < 0 || hi < lo || hi > static_cast<std::int32_t>(members.size()))
            throw FormatError("roadmap member offsets out of range", 0);
        for (std::int32_t k = lo; k < hi; ++k)
            node.members.push_back(members[static_cast<std::size_t>(k)]);
        if (labels[static_cast<std::size_t>(i)] >= 0) node.label = labels[static_cast<std::size_t>(i)];
        rm.nodes.push_back(std::move(node));
    }

    const auto endpoints = r.i32("edge_endpoints");
    const Mat mean = r.f32("edge_mean");
    const auto action = r.i32("edge_action");
    const auto count = r.i32("edge_count");
    const auto provenance = r.i32("edge_provenance");
    const Index m = mean.cols();
    if (static_cast<Index>(endpoints.size()) != 2 * m ||
        static_cast<Index>(action.size()) != 4 * m || static_cast<Index>(count.size()) != m ||
        static_cast<Index>(provenance.size()) != m)
        throw FormatError("roadmap edge arrays disagree", 0);
    for (Index j = 0; j < m; ++j) {
        const int from = endpoints[static_cast<std::size_t>(2 * j)];
        const int to = endpoints[static_cast<std::size_t>(2 * j + 1)];
        if (from < 0 || from >= n || to < 0 || to >= n)
            throw FormatError("roadmap edge endpoint out of range", 0);
        Edge e;
        e.mean = mean.col(j);
        const std::size_t a0 = static_cast<std::size_t>(4 * j);
        e.action = {action[a0], action[a0 + 1], action[a0 + 2], action[a0 + 3]};
        e.count = count[static_cast<std::size_t>(j)];
        e.provenance = static_cast<Provenance>(provenance[static_cast<std::size_t>(j)]);
        rm.edges.emplace(std::make_pair(from, to), e);
    }
    return rm;
}

nlohmann::json roadmap_to_json(const Roadmap& rm) {
    nlohmann::json nodes = nlohmann::json::array();
    for (int i = 0; i < rm.n_nodes(); ++i) {
        const Node& node = rm.nodes[static_cast<std::size_t>(i)];
        nlohmann::json jn{{"id", i}, {"n_members", node.members.size()}};
        jn["label"] = node.label ? nlohmann::json(*node.label) : nlohmann::json(nullptr);
        nodes.push_back(std::move(jn));
    }
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [key, e] : rm.edges) {
        edges.push_back(
            {{"from", key.first},
             {"to", key.second},
             {"action",
              {e.action.pick_col, e.action.pick_level, e.action.place_col, e.action.place_level}},
             {"mean", {e.mean(0), e.mean(1), e.mean(2), e.mean(3)}},
             {"count", e.count},
             {"provenance", e.provenance == Provenance::shortcut ? "shortcut" : "dataset"}});
    }
    return {{"eps", rm.eps},
            {"n_nodes", rm.n_nodes()},
            {"n_edges", rm.n_edges()},
            {"nodes", std::move(nodes)},
            {"edges", std::move(edges)}};
}

}  // namespace vap::roadmap
