#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <set>
#include <vector>

#include "vap/sim/boxstack.hpp"

using namespace vap;
using namespace vap::sim;

namespace {

// Independent construction of the state space: every arrangement of n distinct
// boxes into c ordered stacks of height <= h arises from exactly one
// (permutation, composition) pair, namely the concatenation of the stacks and
// the tuple of stack sizes.
std::set<UnderlyingState> oracle_states(const SimConfig& cfg) {
    std::vector<int> perm(static_cast<std::size_t>(cfg.n_boxes));
    for (int i = 0; i < cfg.n_boxes; ++i) perm[static_cast<std::size_t>(i)] = i;

    std::vector<std::vector<int>> compositions;
    std::vector<int> sizes;
    auto comp_rec = [&](auto&& self, int col, int left) -> void {
        if (col == cfg.columns) {
            if (left == 0) compositions.push_back(sizes);
            return;
        }
        for (int k = 0; k <= std::min(left, cfg.max_height); ++k) {
            sizes.push_back(k);
            self(self, col + 1, left - k);
            sizes.pop_back();
        }
    };
    comp_rec(comp_rec, 0, cfg.n_boxes);

    std::set<UnderlyingState> out;
    std::sort(perm.begin(), perm.end());
    do {
        for (const auto& comp : compositions) {
            UnderlyingState s;
            std::size_t pos = 0;
            for (const int k : comp) {
                s.stacks.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                                      perm.begin() + static_cast<std::ptrdiff_t>(pos + k));
                pos += static_cast<std::size_t>(k);
            }
            out.insert(s);
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

// Flat restatement of the movement rules, independent of valid_actions().
bool oracle_valid(const UnderlyingState& s, const GridAction& a, const SimConfig& cfg) {
    if (a.pick_col == a.place_col) return false;
    if (a.pick_col < 1 || a.pick_col > cfg.columns) return false;
    if (a.place_col < 1 || a.place_col > cfg.columns) return false;
    const auto& pick = s.stacks[static_cast<std::size_t>(a.pick_col - 1)];
    const auto& place = s.stacks[static_cast<std::size_t>(a.place_col - 1)];
    return a.pick_level == static_cast<int>(pick.size()) && a.pick_level >= 1 &&
           a.place_level == static_cast<int>(place.size()) + 1 &&
           a.place_level <= cfg.max_height;
}

UnderlyingState oracle_apply(const UnderlyingState& s, const GridAction& a) {
    UnderlyingState next = s;
    auto& from = next.stacks[static_cast<std::size_t>(a.pick_col - 1)];
    auto& to = next.stacks[static_cast<std::size_t>(a.place_col - 1)];
    to.push_back(from.back());
    from.pop_back();
    return next;
}

std::int64_t factorial(int n) {
    std::int64_t f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

// Arrangements with fixed stack sizes number n!/prod(k_i!) * prod(k_i!) = n!,
// so the total count is n! times the number of valid compositions.
std::int64_t closed_form_count(const SimConfig& cfg) {
    std::int64_t comps = 0;
    auto rec = [&](auto&& self, int col, int left) -> void {
        if (col == cfg.columns) {
            if (left == 0) ++comps;
            return;
        }
        for (int k = 0; k <= std::min(left, cfg.max_height); ++k) self(self, col + 1, left - k);
    };
    rec(rec, 0, cfg.n_boxes);
    return comps * factorial(cfg.n_boxes);
}

bool same_pixels(const Observation& a, const Observation& b) {
    return a.pixels.size() == b.pixels.size() &&
           std::memcmp(a.pixels.data(), b.pixels.data(),
                       sizeof(Scalar) * static_cast<std::size_t>(a.pixels.size())) == 0;
}

UnderlyingState st(std::vector<std::vector<int>> stacks) {
    return UnderlyingState{std::move(stacks)};
}

}  // namespace

TEST_CASE("state enumeration matches the independent construction") {
    SimConfig cfg;
    const auto states = enumerate_states(cfg);
    CHECK(states.size() == 288);
    CHECK(static_cast<std::int64_t>(states.size()) == closed_form_count(cfg));
    CHECK(std::is_sorted(states.begin(), states.end()));

    const auto oracle = oracle_states(cfg);
    REQUIRE(oracle.size() == states.size());
    CHECK(std::equal(states.begin(), states.end(), oracle.begin()));
}

TEST_CASE("state enumeration handles small and degenerate configs") {
    SimConfig one;
    one.n_boxes = 1;
    CHECK(enumerate_states(one).size() == 3);

    SimConfig empty;
    empty.n_boxes = 0;
    const auto states = enumerate_states(empty);
    REQUIRE(states.size() == 1);
    CHECK(states[0] == st({{}, {}, {}}));

    SimConfig tall;
    tall.columns = 1;
    tall.max_height = 3;
    tall.n_boxes = 2;
    CHECK(enumerate_states(tall).size() == 2);
    CHECK(enumerate_actions(tall).empty());

    for (const SimConfig& cfg :
         {SimConfig{2, 2, 3}, SimConfig{4, 2, 3}, SimConfig{3, 3, 5}}) {
        const auto got = enumerate_states(cfg);
        const auto want = oracle_states(cfg);
        CHECK(static_cast<std::int64_t>(got.size()) == closed_form_count(cfg));
        REQUIRE(got.size() == want.size());
        CHECK(std::equal(got.begin(), got.end(), want.begin()));
    }
}

TEST_CASE("config validation rejects out-of-range parameters") {
    SimConfig cfg;
    cfg.n_boxes = 10;
    CHECK_THROWS_AS(cfg.validate(), ShapeError);
    cfg = SimConfig{};
    cfg.position_noise = 0.5f;
    CHECK_THROWS_AS(cfg.validate(), ShapeError);
    cfg = SimConfig{};
    cfg.brightness_lo = 1.0f;
    cfg.brightness_hi = 0.5f;
    CHECK_THROWS_AS(cfg.validate(), ShapeError);
    cfg = SimConfig{};
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("action enumeration is the union of per-state valid moves") {
    SimConfig cfg;
    const auto actions = enumerate_actions(cfg);
    CHECK(actions.size() == 48);
    CHECK(std::is_sorted(actions.begin(), actions.end()));

    std::set<GridAction> oracle;
    for (const auto& s : oracle_states(cfg))
        for (int pc = 1; pc <= cfg.columns; ++pc)
            for (int pl = 1; pl <= cfg.max_height; ++pl)
                for (int qc = 1; qc <= cfg.columns; ++qc)
                    for (int ql = 1; ql <= cfg.max_height; ++ql)
                        if (oracle_valid(s, GridAction{pc, pl, qc, ql}, cfg))
                            oracle.insert(GridAction{pc, pl, qc, ql});
    REQUIRE(oracle.size() == actions.size());
    CHECK(std::equal(actions.begin(), actions.end(), oracle.begin()));

    // picking a full stack's top onto another full stack is realizable in no
    // state with four boxes, so the pair never appears
    CHECK(std::find(actions.begin(), actions.end(), GridAction{1, 3, 2, 3}) == actions.end());

    SimConfig one;
    one.n_boxes = 1;
    CHECK(enumerate_actions(one).size() == 6);
}

TEST_CASE("valid_actions matches the rule-based oracle on every state") {
    SimConfig cfg;
    for (const auto& s : enumerate_states(cfg)) {
        const auto got = valid_actions(s, cfg);
        CHECK(std::is_sorted(got.begin(), got.end()));
        std::set<GridAction> want;
        for (int pc = 1; pc <= cfg.columns; ++pc)
            for (int pl = 1; pl <= cfg.max_height; ++pl)
                for (int qc = 1; qc <= cfg.columns; ++qc)
                    for (int ql = 1; ql <= cfg.max_height; ++ql)
                        if (oracle_valid(s, GridAction{pc, pl, qc, ql}, cfg))
                            want.insert(GridAction{pc, pl, qc, ql});
        REQUIRE(got.size() == want.size());
        CHECK(std::equal(got.begin(), got.end(), want.begin()));
    }
}

TEST_CASE("valid_actions on reference arrangements") {
    SimConfig cfg;
    const auto a = valid_actions(st({{0, 1, 2}, {3}, {}}), cfg);
    const std::vector<GridAction> want_a{
        GridAction{1, 3, 2, 2}, GridAction{1, 3, 3, 1}, GridAction{2, 1, 3, 1}};
    CHECK(a == want_a);

    const auto b = valid_actions(st({{0}, {1}, {2, 3}}), cfg);
    const std::vector<GridAction> want_b{GridAction{1, 1, 2, 2}, GridAction{1, 1, 3, 3},
                                         GridAction{2, 1, 1, 2}, GridAction{2, 1, 3, 3},
                                         GridAction{3, 2, 1, 2}, GridAction{3, 2, 2, 2}};
    CHECK(b == want_b);

    CHECK(valid_actions(st({{}, {}, {}}), SimConfig{3, 3, 0}).empty());
}

TEST_CASE("apply_action moves exactly one box and reports typed failures") {
    SimConfig cfg;
    const auto s = st({{0, 1}, {2}, {3}});
    CHECK(apply_action(s, GridAction{1, 2, 2, 2}, cfg) == st({{0}, {2, 1}, {3}}));

    const auto check_reason = [&](const UnderlyingState& state, const GridAction& a,
                                  InvalidActionReason want) {
        try {
            apply_action(state, a, cfg);
            FAIL("expected InvalidAction for ", a.to_string());
        } catch (const InvalidAction& e) {
            CHECK(e.reason == want);
        }
    };
    check_reason(s, GridAction{1, 2, 1, 3}, InvalidActionReason::same_column);
    check_reason(s, GridAction{1, 4, 2, 1}, InvalidActionReason::wrong_level);
    check_reason(s, GridAction{0, 1, 2, 2}, InvalidActionReason::wrong_level);
    check_reason(st({{}, {0, 1, 2}, {3}}), GridAction{1, 1, 3, 2},
                 InvalidActionReason::empty_pick);
    check_reason(s, GridAction{1, 1, 2, 2}, InvalidActionReason::not_top);
    check_reason(st({{0, 1, 2}, {3}, {}}), GridAction{2, 1, 1, 3},
                 InvalidActionReason::full_destination);
    check_reason(s, GridAction{1, 2, 2, 3}, InvalidActionReason::wrong_level);
}

TEST_CASE("every valid move is reversible and reverses to the same state") {
    SimConfig cfg;
    for (const auto& s : enumerate_states(cfg)) {
        for (const auto& a : valid_actions(s, cfg)) {
            const auto next = apply_action(s, a, cfg);
            CHECK(next == oracle_apply(s, a));
            const auto back = reverse_action(a);
            const auto valid_next = valid_actions(next, cfg);
            CHECK(std::find(valid_next.begin(), valid_next.end(), back) != valid_next.end());
            CHECK(apply_action(next, back, cfg) == s);
        }
    }
}

TEST_CASE("rendering is seed-deterministic and distinguishes all states") {
    SimConfig cfg;
    const auto states = enumerate_states(cfg);

    const auto obs1 = render(states[17], cfg, 42);
    const auto obs2 = render(states[17], cfg, 42);
    CHECK(same_pixels(obs1, obs2));
    CHECK(obs1.pixels.size() == 32 * 32 * 3);
    CHECK(obs1.pixels.minCoeff() >= 0.0f);
    CHECK(obs1.pixels.maxCoeff() <= 1.0f);
    CHECK_FALSE(same_pixels(obs1, render(states[17], cfg, 43)));

    // same seed, zero noise, fixed brightness: images only reflect the state
    SimConfig clean = cfg;
    clean.position_noise = 0.0f;
    clean.brightness_lo = clean.brightness_hi = 1.0f;
    std::set<std::string> images;
    for (const auto& s : states) {
        const auto obs = render(s, clean, 0);
        images.emplace(reinterpret_cast<const char*>(obs.pixels.data()),
                       sizeof(Scalar) * static_cast<std::size_t>(obs.pixels.size()));
    }
    CHECK(images.size() == states.size());
}

TEST_CASE("box colors are pairwise distinct") {
    for (int i = 0; i < 12; ++i)
        for (int j = i + 1; j < 12; ++j)
            CHECK((box_color(i) - box_color(j)).cwiseAbs().sum() > 0.05f);
}

TEST_CASE("jitter moves the pixel-mass centroid by at most the noise bound") {
    SimConfig cfg;
    cfg.n_boxes = 1;
    const auto state = st({{0}, {}, {}});
    const Scalar cell = 32.0f / 3.0f;
    const Scalar cx = 0.5f * cell;
    const Scalar cy = 32.0f - 0.5f * cell;

    const auto centroid = [&](const Observation& obs) {
        double mass = 0, sx = 0, sy = 0;
        for (int py = 0; py < obs.side; ++py)
            for (int px = 0; px < obs.side; ++px) {
                const Index base = (static_cast<Index>(py) * obs.side + px) * 3;
                const double m =
                    obs.pixels[base] + obs.pixels[base + 1] + obs.pixels[base + 2];
                mass += m;
                sx += m * (px + 0.5);
                sy += m * (py + 0.5);
            }
        REQUIRE(mass > 0);
        return std::pair<double, double>{sx / mass, sy / mass};
    };

    SimConfig clean = cfg;
    clean.position_noise = 0.0f;
    const auto [x0, y0] = centroid(render(state, clean, 9));
    CHECK(std::abs(x0 - cx) < 0.1);
    CHECK(std::abs(y0 - cy) < 0.1);

    double min_x = 1e9, max_x = -1e9;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto [x, y] = centroid(render(state, cfg, seed));
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        CHECK(std::abs(x - cx) <= cfg.position_noise * cell + 0.1);
        CHECK(std::abs(y - cy) <= cfg.position_noise * cell + 0.1);
    }
    // jitter actually spreads positions across most of the allowed range
    CHECK(max_x - min_x > cfg.position_noise * cell);
}

TEST_CASE("state table indexes states and actions and stamps oracle labels") {
    const StateTable table{SimConfig{}};
    REQUIRE(table.states().size() == 288);
    for (int i = 0; i < 288; ++i)
        CHECK(table.state_index(table.states()[static_cast<std::size_t>(i)]) == i);
    CHECK_THROWS_AS(table.state_index(st({{0, 1, 2, 3}, {}, {}})), UnknownNode);

    for (int i = 0; i < 48; ++i)
        CHECK(table.action_index(table.actions()[static_cast<std::size_t>(i)]) == i);
    CHECK(table.action_index(GridAction{1, 1, 1, 1}) == -1);

    const auto obs = table.render(211, 7);
    REQUIRE(obs.meta_label.has_value());
    CHECK(*obs.meta_label == 211);
}

TEST_CASE("snap_action rounds to the nearest action, ties to the lowest index") {
    const StateTable table{SimConfig{}};
    for (int i = 0; i < 48; ++i) {
        const auto& a = table.actions()[static_cast<std::size_t>(i)];
        CHECK(table.snap_action(static_cast<Scalar>(a.pick_col),
                                static_cast<Scalar>(a.pick_level),
                                static_cast<Scalar>(a.place_col),
                                static_cast<Scalar>(a.place_level)) == i);
        CHECK(table.snap_action(a.pick_col + 0.2f, a.pick_level - 0.15f, a.place_col + 0.1f,
                                a.place_level + 0.05f) == i);
    }
    const int lo = table.action_index(GridAction{1, 1, 2, 1});
    const int hi = table.action_index(GridAction{1, 1, 2, 2});
    REQUIRE(lo >= 0);
    REQUIRE(hi >= 0);
    CHECK(table.snap_action(1.0f, 1.0f, 2.0f, 1.5f) == std::min(lo, hi));
}

TEST_CASE("transition graph agrees with rule-level reachability") {
    const TransitionGraph graph{SimConfig{}};
    const SimConfig cfg = graph.table().config();
    CHECK(graph.n_states() == 288);
    CHECK(graph.n_actions() == 48);
    CHECK(graph.strongly_connected());

    std::int64_t total_edges = 0;
    for (int s = 0; s < graph.n_states(); ++s) {
        const auto& state = graph.table().states()[static_cast<std::size_t>(s)];
        const auto valid = valid_actions(state, cfg);
        REQUIRE(graph.out_degree(s) == static_cast<int>(valid.size()));
        total_edges += graph.out_degree(s);
        for (const auto& a : valid) {
            const auto succ = graph.successor(s, a);
            REQUIRE(succ.has_value());
            CHECK(*succ == graph.table().state_index(apply_action(state, a, cfg)));
            CHECK(graph.valid_transition(s, a, *succ));
            CHECK_FALSE(graph.valid_transition(s, a, (*succ + 1) % graph.n_states()));
        }
        CHECK_FALSE(graph.successor(s, GridAction{1, 1, 1, 1}).has_value());
    }
    // reversibility makes the edge count even
    CHECK(total_edges % 2 == 0);
}

TEST_CASE("bfs distances match an independent search and are symmetric") {
    const TransitionGraph graph{SimConfig{}};
    const SimConfig cfg = graph.table().config();

    // independent BFS over an adjacency list built from the rule oracle
    const auto states = enumerate_states(cfg);
    std::vector<std::vector<int>> nbrs(states.size());
    std::map<UnderlyingState, int> idx;
    for (std::size_t i = 0; i < states.size(); ++i) idx[states[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < states.size(); ++i)
        for (int pc = 1; pc <= cfg.columns; ++pc)
            for (int pl = 1; pl <= cfg.max_height; ++pl)
                for (int qc = 1; qc <= cfg.columns; ++qc)
                    for (int ql = 1; ql <= cfg.max_height; ++ql) {
                        const GridAction a{pc, pl, qc, ql};
                        if (oracle_valid(states[i], a, cfg))
                            nbrs[i].push_back(idx.at(oracle_apply(states[i], a)));
                    }
    const auto oracle_bfs = [&](int from, int to) {
        std::vector<int> dist(states.size(), -1);
        dist[static_cast<std::size_t>(from)] = 0;
        std::vector<int> queue{from};
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const int s = queue[head];
            for (const int t : nbrs[static_cast<std::size_t>(s)])
                if (dist[static_cast<std::size_t>(t)] < 0) {
                    dist[static_cast<std::size_t>(t)] = dist[static_cast<std::size_t>(s)] + 1;
                    queue.push_back(t);
                }
        }
        return dist[static_cast<std::size_t>(to)];
    };

    Rng rng(123);
    for (int i = 0; i < 60; ++i) {
        const int a = static_cast<int>(rng.uniform_int(states.size()));
        const int b = static_cast<int>(rng.uniform_int(states.size()));
        const int d = graph.bfs_distance(a, b);
        CHECK(d == oracle_bfs(a, b));
        CHECK(d == graph.bfs_distance(b, a));
        CHECK(d >= 0);
    }
    CHECK(graph.bfs_distance(100, 100) == 0);
}

TEST_CASE("environment steps follow the rules and streams are reproducible") {
    SimEnv env1{SimConfig{}, 99};
    SimEnv env2{SimConfig{}, 99};
    CHECK(env1.current_state() == env2.current_state());
    CHECK(same_pixels(env1.observe(), env2.observe()));
    CHECK(same_pixels(env1.observe(), env2.observe()));

    SimEnv fresh{SimConfig{}, 99};
    const auto first = fresh.observe();
    const auto second = fresh.observe();
    CHECK_FALSE(same_pixels(first, second));

    SimEnv env{SimConfig{}, 7};
    const auto& table = env.table();
    const auto before = env.current_state();
    const auto valid =
        valid_actions(table.states()[static_cast<std::size_t>(before)], table.config());
    REQUIRE_FALSE(valid.empty());
    CHECK(env.step(valid[0]));
    const auto expect = apply_action(table.states()[static_cast<std::size_t>(before)],
                                     valid[0], table.config());
    CHECK(env.current_state() == table.state_index(expect));

    const auto here = env.current_state();
    CHECK_FALSE(env.step(GridAction{1, 1, 1, 1}));
    CHECK(env.current_state() == here);

    bool moved = false;
    for (int i = 0; i < 64 && !moved; ++i) {
        env.reset_random();
        moved = env.current_state() != here;
    }
    CHECK(moved);
}
