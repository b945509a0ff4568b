#include "vap/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "vap/errors.hpp"

namespace vap::cluster {

namespace {

// Caps lambda = 1/distance so coincident points stay finite.
constexpr double kTinyDist = 1e-12;

struct Edge {
    double w = 0;
    int a = 0, b = 0;
};

struct DendroNode {
    int left = -1, right = -1;  // ids < n are points, >= n internal nodes
    double dist = 0;
    int size = 0;
};

struct Condensed {
    double birth = 0;
    double stability = 0;
    int parent = -1;
    int child_a = -1, child_b = -1;
    bool selected = false;
};

int node_size(const std::vector<DendroNode>& tree, int n, int v) {
    return v < n ? 1 : tree[static_cast<size_t>(v - n)].size;
}

void points_under(const std::vector<DendroNode>& tree, int n, int v, std::vector<int>* out) {
    std::vector<int> stack{v};
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        if (u < n) {
            out->push_back(u);
            continue;
        }
        stack.push_back(tree[static_cast<size_t>(u - n)].left);
        stack.push_back(tree[static_cast<size_t>(u - n)].right);
    }
}

}  // namespace

HdbscanResult hdbscan(const Mat& points, int min_cluster_size) {
    if (min_cluster_size < 2) throw ShapeError("min_cluster_size must be at least 2");
    const int n = static_cast<int>(points.cols());
    HdbscanResult res;
    res.labels.assign(static_cast<size_t>(n), -1);
    if (n <= 1) return res;

    Mat dist(n, n);
    for (int i = 0; i < n; ++i)
        dist.col(i) = (points.colwise() - points.col(i)).cwiseAbs().colwise().sum().transpose();

    const int k = min_cluster_size - 1;
    std::vector<double> core(static_cast<size_t>(n));
    std::vector<float> row(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        int m = 0;
        for (int j = 0; j < n; ++j)
            if (j != i) row[static_cast<size_t>(m++)] = dist(j, i);
        const int kth = std::min(k, m) - 1;
        std::nth_element(row.begin(), row.begin() + kth, row.begin() + m);
        core[static_cast<size_t>(i)] = static_cast<double>(row[static_cast<size_t>(kth)]);
    }
    const auto mreach = [&](int a, int b) {
        return std::max({core[static_cast<size_t>(a)], core[static_cast<size_t>(b)],
                         static_cast<double>(dist(a, b))});
    };

    // Prim's tree over mutual reachability, then edges sorted ascending so the
    // merge order (and with it the hierarchy) is deterministic.
    std::vector<Edge> edges;
    edges.reserve(static_cast<size_t>(n - 1));
    {
        const double inf = std::numeric_limits<double>::infinity();
        std::vector<double> best(static_cast<size_t>(n), inf);
        std::vector<int> from(static_cast<size_t>(n), 0);
        std::vector<char> used(static_cast<size_t>(n), 0);
        used[0] = 1;
        for (int j = 1; j < n; ++j) best[static_cast<size_t>(j)] = mreach(0, j);
        for (int round = 1; round < n; ++round) {
            int v = -1;
            for (int j = 0; j < n; ++j)
                if (!used[static_cast<size_t>(j)] &&
                    (v < 0 || best[static_cast<size_t>(j)] < best[static_cast<size_t>(v)]))
                    v = j;
            edges.push_back({best[static_cast<size_t>(v)],
                             std::min(from[static_cast<size_t>(v)], v),
                             std::max(from[static_cast<size_t>(v)], v)});
            used[static_cast<size_t>(v)] = 1;
            for (int j = 0; j < n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double w = mreach(v, j);
                if (w < best[static_cast<size_t>(j)]) {
                    best[static_cast<size_t>(j)] = w;
                    from[static_cast<size_t>(j)] = v;
                }
            }
        }
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
        return std::tie(x.w, x.a, x.b) < std::tie(y.w, y.a, y.b);
    });

    // Single-linkage dendrogram via union-find over the sorted edges.
    std::vector<DendroNode> tree;
    tree.reserve(static_cast<size_t>(n - 1));
    std::vector<int> parent(static_cast<size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    const auto find = [&](int x) {
        while (parent[static_cast<size_t>(x)] != x) {
            parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
            x = parent[static_cast<size_t>(x)];
        }
        return x;
    };
    std::vector<int> node_of(static_cast<size_t>(n));
    std::iota(node_of.begin(), node_of.end(), 0);
    for (const Edge& e : edges) {
        const int ra = find(e.a), rb = find(e.b);
        const int na = node_of[static_cast<size_t>(ra)], nb = node_of[static_cast<size_t>(rb)];
        tree.push_back({na, nb, e.w, node_size(tree, n, na) + node_size(tree, n, nb)});
        parent[static_cast<size_t>(rb)] = ra;
        node_of[static_cast<size_t>(ra)] = n + static_cast<int>(tree.size()) - 1;
    }
    const int root = n + static_cast<int>(tree.size()) - 1;

    // Condense: clusters persist through splits that shed fewer than
    // min_cluster_size points; a split into two large sides ends the cluster.
    std::vector<Condensed> cond{{0.0, 0.0, -1, -1, -1, false}};
    std::vector<int> fall_cluster(static_cast<size_t>(n), 0);
    std::vector<std::pair<int, int>> work{{root, 0}};  // (dendro node, condensed id)
    std::vector<int> shed;
    while (!work.empty()) {
        auto [v, c] = work.back();
        work.pop_back();
        while (true) {
            const auto& node = tree[static_cast<size_t>(v - n)];
            const double lambda = 1.0 / std::max(node.dist, kTinyDist);
            const int sl = node_size(tree, n, node.left);
            const int sr = node_size(tree, n, node.right);
            const bool big_l = sl >= min_cluster_size, big_r = sr >= min_cluster_size;
            auto& cl = cond[static_cast<size_t>(c)];
            if (big_l && big_r) {
                const int ca = static_cast<int>(cond.size());
                const int cb = ca + 1;
                cl.stability += node.size * (lambda - cl.birth);
                cl.child_a = ca;
                cl.child_b = cb;
                cond.push_back({lambda, 0.0, c, -1, -1, false});  // invalidates cl
                cond.push_back({lambda, 0.0, c, -1, -1, false});
                work.push_back({node.left, ca});
                work.push_back({node.right, cb});
                break;
            }
            if (big_l || big_r) {
                shed.clear();
                points_under(tree, n, big_l ? node.right : node.left, &shed);
                for (const int p : shed) fall_cluster[static_cast<size_t>(p)] = c;
                cl.stability += static_cast<double>(shed.size()) * (lambda - cl.birth);
                v = big_l ? node.left : node.right;
                continue;
            }
            shed.clear();
            points_under(tree, n, v, &shed);
            for (const int p : shed) fall_cluster[static_cast<size_t>(p)] = c;
            cl.stability += static_cast<double>(shed.size()) * (lambda - cl.birth);
            break;
        }
    }

    // Excess-of-mass selection, children before parents; the root stays out so
    // sparse data degrades to noise rather than one global cluster.
    std::vector<double> score(cond.size(), 0.0);
    for (int i = static_cast<int>(cond.size()) - 1; i >= 0; --i) {
        auto& cl = cond[static_cast<size_t>(i)];
        if (cl.child_a < 0) {
            score[static_cast<size_t>(i)] = cl.stability;
            cl.selected = i != 0;
            continue;
        }
        const double child_sum =
            score[static_cast<size_t>(cl.child_a)] + score[static_cast<size_t>(cl.child_b)];
        if (i != 0 && cl.stability > child_sum) {
            cl.selected = true;
            score[static_cast<size_t>(i)] = cl.stability;
            std::vector<int> sub{cl.child_a, cl.child_b};
            while (!sub.empty()) {
                const int s = sub.back();
                sub.pop_back();
                auto& d = cond[static_cast<size_t>(s)];
                d.selected = false;
                if (d.child_a >= 0) {
                    sub.push_back(d.child_a);
                    sub.push_back(d.child_b);
                }
            }
        } else {
            score[static_cast<size_t>(i)] = child_sum;
        }
    }

    std::vector<int> dense(cond.size(), -1);
    for (size_t i = 0; i < cond.size(); ++i)
        if (cond[i].selected) dense[i] = res.n_clusters++;
    for (int p = 0; p < n; ++p) {
        int c = fall_cluster[static_cast<size_t>(p)];
        while (c >= 0 && !cond[static_cast<size_t>(c)].selected)
            c = cond[static_cast<size_t>(c)].parent;
        if (c >= 0) res.labels[static_cast<size_t>(p)] = dense[static_cast<size_t>(c)];
    }
    return res;
}

}  // namespace vap::cluster
