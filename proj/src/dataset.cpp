#include "vap/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "vap/data/io.hpp"
#include "vap/rng.hpp"

namespace vap::data {

namespace {

std::uint64_t pixel_hash(const Vec& pixels) {
    // FNV-1a over the raw float bytes
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* p = reinterpret_cast<const unsigned char*>(pixels.data());
    const std::size_t n = sizeof(Scalar) * static_cast<std::size_t>(pixels.size());
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

bool same_pixels(const Vec& a, const Vec& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), sizeof(Scalar) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

int Dataset::n_action_pairs() const {
    int n = 0;
    for (const auto& t : tuples) n += t.is_action ? 1 : 0;
    return n;
}

int Dataset::n_similar_pairs() const {
    return static_cast<int>(tuples.size()) - n_action_pairs();
}

Dataset generate_dataset(const sim::SimConfig& cfg, int n_pairs, double similar_fraction,
                         std::uint64_t seed) {
    if (n_pairs < 1) throw ShapeError("n_pairs must be >= 1");
    if (similar_fraction < 0 || similar_fraction >= 1)
        throw ShapeError("similar_fraction must be in [0, 1)");
    const sim::StateTable table(cfg);
    if (table.actions().empty())
        throw DegenerateDataset("no valid actions exist in this configuration");

    Rng rng(seed);
    const int n_similar = static_cast<int>(std::llround(similar_fraction * n_pairs));
    const int n_action = n_pairs - n_similar;
    const auto train_seed = [&] { return rng.next_u64() << 1; };

    Dataset ds;
    ds.sim = cfg;
    ds.tuples.reserve(static_cast<std::size_t>(n_pairs));
    for (int i = 0; i < n_action; ++i) {
        int s = 0;
        std::vector<sim::GridAction> valid;
        for (;;) {
            s = static_cast<int>(rng.uniform_int(table.states().size()));
            valid = sim::valid_actions(table.states()[static_cast<std::size_t>(s)], cfg);
            if (!valid.empty()) break;
        }
        const auto& u = valid[rng.uniform_int(valid.size())];
        const auto next =
            sim::apply_action(table.states()[static_cast<std::size_t>(s)], u, cfg);
        TrainingTuple t;
        t.obs_a = table.render(s, train_seed());
        t.obs_b = table.render(table.state_index(next), train_seed());
        t.is_action = true;
        t.u = u;
        ds.tuples.push_back(std::move(t));
    }
    for (int i = 0; i < n_similar; ++i) {
        const int s = static_cast<int>(rng.uniform_int(table.states().size()));
        TrainingTuple t;
        t.obs_a = table.render(s, train_seed());
        t.obs_b = table.render(s, train_seed());
        t.is_action = false;
        ds.tuples.push_back(std::move(t));
    }
    shuffle(ds.tuples, rng);

    ds.provenance = {{"kind", "generated"},
                     {"seed", seed},
                     {"n_pairs", n_pairs},
                     {"similar_fraction", similar_fraction},
                     {"n_action_pairs", n_action},
                     {"n_similar_pairs", n_similar},
                     {"sim", sim_to_json(cfg)}};
    return ds;
}

Dataset subsample(const Dataset& ds, double fraction, std::uint64_t seed) {
    if (!(fraction > 0 && fraction <= 1)) throw ShapeError("fraction must be in (0, 1]");
    const auto n = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(ds.tuples.size())));
    std::vector<std::size_t> order(ds.tuples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    shuffle(order, rng);
    order.resize(n);
    std::sort(order.begin(), order.end());

    Dataset out;
    out.sim = ds.sim;
    out.tuples.reserve(n);
    for (const std::size_t i : order) out.tuples.push_back(ds.tuples[i]);
    out.provenance = {{"kind", "subsample"},
                      {"fraction", fraction},
                      {"seed", seed},
                      {"n_pairs", n},
                      {"parent", ds.provenance}};
    return out;
}

std::vector<SMTuple> build_sm_dataset(const Dataset& ds) {
    // group action-pair start observations that are bitwise identical, so a
    // reused observation carries the union of its outgoing actions
    struct Group {
        std::size_t tuple_index;                 // representative observation
        std::vector<sim::GridAction> actions;    // outgoing, deduplicated
    };
    std::vector<Group> groups;
    std::map<std::uint64_t, std::vector<std::size_t>> by_hash;  // hash -> group ids

    for (std::size_t i = 0; i < ds.tuples.size(); ++i) {
        const auto& t = ds.tuples[i];
        if (!t.is_action) continue;
        const std::uint64_t h = pixel_hash(t.obs_a.pixels);
        std::size_t gid = groups.size();
        for (const std::size_t g : by_hash[h])
            if (same_pixels(ds.tuples[groups[g].tuple_index].obs_a.pixels, t.obs_a.pixels)) {
                gid = g;
                break;
            }
        if (gid == groups.size()) {
            groups.push_back({i, {}});
            by_hash[h].push_back(gid);
        }
        auto& acts = groups[gid].actions;
        if (std::find(acts.begin(), acts.end(), *t.u) == acts.end()) acts.push_back(*t.u);
    }
    if (groups.empty()) throw EmptyResult("dataset has no action pairs");

    const auto shares_action = [&](const Group& a, const Group& b) {
        for (const auto& u : a.actions)
            if (std::find(b.actions.begin(), b.actions.end(), u) != b.actions.end())
                return true;
        return false;
    };
    const auto differs_action = [&](const Group& a, const Group& b) {
        for (const auto& ua : a.actions)
            for (const auto& ub : b.actions)
                if (!(ua == ub)) return true;
        return false;
    };

    // emission cap per anchor and signal; the rearrangement is quadratic
    // without it. Fixed internal seed: the rearrangement is a deterministic
    // function of the dataset.
    constexpr int kCap = 4;
    Rng rng(0x5e11a9d30c7b21efULL);
    std::set<std::pair<std::pair<std::size_t, std::size_t>, bool>> emitted;
    std::vector<SMTuple> out;
    std::vector<std::size_t> candidates(groups.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;

    for (std::size_t anchor = 0; anchor < groups.size(); ++anchor) {
        shuffle(candidates, rng);
        int pos = 0, neg = 0;
        for (const std::size_t other : candidates) {
            if (pos >= kCap && neg >= kCap) break;
            if (other == anchor) continue;
            const std::pair<std::size_t, std::size_t> ordered = std::minmax(anchor, other);
            const auto emit = [&](bool s) {
                if (!emitted.insert({ordered, s}).second) return;
                out.push_back({ds.tuples[groups[anchor].tuple_index].obs_a,
                               ds.tuples[groups[other].tuple_index].obs_a, s});
            };
            if (pos < kCap && shares_action(groups[anchor], groups[other])) {
                emit(true);
                ++pos;
            }
            if (neg < kCap && differs_action(groups[anchor], groups[other])) {
                emit(false);
                ++neg;
            }
        }
    }
    return out;
}

QuerySet make_queries(const sim::SimConfig& cfg, int n_queries, int holdout_size,
                      std::uint64_t seed) {
    if (n_queries < 0 || holdout_size < 1)
        throw ShapeError("need n_queries >= 0 and holdout_size >= 1");
    if (static_cast<long long>(n_queries) >
        static_cast<long long>(holdout_size) * holdout_size)
        throw ShapeError("n_queries exceeds holdout_size^2");
    const sim::StateTable table(cfg);
    Rng rng(seed);
    const auto holdout_seed = [&] { return (rng.next_u64() << 1) | 1ULL; };

    std::vector<sim::Observation> holdout;
    holdout.reserve(static_cast<std::size_t>(holdout_size));
    for (int i = 0; i < holdout_size; ++i) {
        const int s = static_cast<int>(rng.uniform_int(table.states().size()));
        holdout.push_back(table.render(s, holdout_seed()));
    }

    QuerySet qs;
    qs.sim = cfg;
    qs.queries.reserve(static_cast<std::size_t>(n_queries));
    for (int i = 0; i < n_queries; ++i) {
        const auto a = rng.uniform_int(holdout.size());
        const auto b = rng.uniform_int(holdout.size());
        qs.queries.push_back({holdout[a], holdout[b]});
    }
    qs.provenance = {{"kind", "queries"},
                     {"seed", seed},
                     {"n_queries", n_queries},
                     {"holdout_size", holdout_size},
                     {"sim", sim_to_json(cfg)}};
    return qs;
}

void export_jsonl(const Dataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("IoError", "cannot open for writing: " + path);
    for (std::size_t i = 0; i < ds.tuples.size(); ++i) {
        const auto& t = ds.tuples[i];
        nlohmann::json row{{"index", i}, {"action_pair", t.is_action}};
        row["label_a"] = t.obs_a.meta_label ? nlohmann::json(*t.obs_a.meta_label)
                                            : nlohmann::json(nullptr);
        row["label_b"] = t.obs_b.meta_label ? nlohmann::json(*t.obs_b.meta_label)
                                            : nlohmann::json(nullptr);
        if (t.u)
            row["u"] = {{"pick", {t.u->pick_col, t.u->pick_level}},
                        {"place", {t.u->place_col, t.u->place_level}}};
        f << row.dump() << "\n";
    }
    if (!f) throw Error("IoError", "write failed: " + path);
}

}  // namespace vap::data
