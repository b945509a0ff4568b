#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <vector>

#include <vap/eval.hpp>

using namespace vap;

namespace {

Vec indicator(Index dim, Index hot) {
    Vec e = Vec::Zero(dim);
    e[hot] = 1;
    return e;
}

sim::Observation labeled_obs(Index dim, Index hot, std::optional<std::int32_t> label) {
    sim::Observation o;
    o.pixels = indicator(dim, hot);
    o.side = 1;
    o.meta_label = label;
    return o;
}

// Latent equals the pixels verbatim.
mapping::MmModel identity_mapper(Index dim) {
    mapping::MmModel mm;
    nn::Dense<Scalar> enc;
    enc.W = Mat::Zero(2 * dim, dim);
    enc.W.topRows(dim).setIdentity();
    enc.b = Vec::Zero(2 * dim);
    mm.encoder.layers.push_back(std::move(enc));
    nn::Dense<Scalar> dec;
    dec.W = Mat::Identity(dim, dim);
    dec.b = Vec::Zero(dim);
    mm.decoder.layers.push_back(std::move(dec));
    mm.latent_dim = dim;
    mm.image_side = 1;
    return mm;
}

roadmap::Node node_at(Index dim, Index hot, std::optional<std::int32_t> label) {
    roadmap::Node n;
    n.representative = indicator(dim, hot);
    n.members = {hot};
    n.label = label;
    return n;
}

roadmap::Edge dataset_edge(const sim::GridAction& u) {
    roadmap::Edge e;
    e.action = u;
    e.count = 1;
    return e;
}

sim::SimConfig small_world() {
    sim::SimConfig sc;
    sc.columns = 3;
    sc.max_height = 2;
    sc.n_boxes = 2;
    return sc;
}

// First action index valid in state `from`, or the first one invalid there.
int pick_action(const sim::TransitionGraph& g, int from, bool valid) {
    const int n_a = static_cast<int>(g.table().actions().size());
    for (int ai = 0; ai < n_a; ++ai) {
        bool found = false;
        for (const auto& [ei, t] : g.edges_from(from))
            if (ei == ai) found = true;
        if (found == valid) return ai;
    }
    REQUIRE(false);
    return -1;
}

data::TrainingTuple pair_tuple(std::int32_t label_a, std::int32_t label_b) {
    data::TrainingTuple t;
    t.obs_a = labeled_obs(2, 0, label_a);
    t.obs_b = labeled_obs(2, 1, label_b);
    return t;
}

// Two real hops s0 -> s1 -> s2 of the enumerated world.
struct Chain {
    int s0, s1, s2;
    sim::GridAction u01, u12;
};

Chain real_chain(const sim::TransitionGraph& g) {
    Chain c;
    c.s0 = 0;
    const auto e0 = g.edges_from(c.s0).front();
    c.s1 = e0.second;
    c.u01 = g.table().actions()[static_cast<std::size_t>(e0.first)];
    const auto e1 = g.edges_from(c.s1).front();
    c.s2 = e1.second;
    c.u12 = g.table().actions()[static_cast<std::size_t>(e1.first)];
    return c;
}

eval::ExperimentConfig tiny_experiment() {
    eval::ExperimentConfig cfg;
    cfg.sim = small_world();
    cfg.sim.image_side = 12;
    cfg.n_train_pairs = 40;
    cfg.similar_fraction = 0.3;
    cfg.n_test_queries = 20;
    cfg.n_validation_queries = 8;
    cfg.holdout_size = 30;
    cfg.fractions = {0.5, 1.0};
    cfg.frameworks = {"eps-lsr", "ace-lsr"};
    cfg.seeds = {1};
    cfg.w_grid = {-0.45f, -0.15f};
    cfg.n_e = 6;
    cfg.max_paths = 4;
    cfg.data_seed = 555;
    cfg.base.mm.latent_dim = 3;
    cfg.base.mm.hidden = {24};
    cfg.base.mm.train.epochs = 4;
    cfg.base.mm.train.batch_size = 16;
    cfg.base.lpm.hidden = {24};
    cfg.base.lpm.train.epochs = 4;
    cfg.base.sm.sm_dim = 3;
    cfg.base.sm.hidden = {24};
    cfg.base.sm.train.epochs = 4;
    return cfg;
}

}  // namespace

TEST_CASE("plan scoring checks every hop and the goal label against the oracle") {
    const sim::SimConfig sc = small_world();
    const sim::TransitionGraph g(sc);
    const Chain c = real_chain(g);
    const auto mm = identity_mapper(3);

    roadmap::Roadmap rm;
    rm.eps = 0.5f;
    rm.nodes = {node_at(3, 0, c.s0), node_at(3, 1, c.s1), node_at(3, 2, c.s2)};
    rm.edges[{0, 1}] = dataset_edge(c.u01);
    rm.edges[{1, 2}] = dataset_edge(c.u12);

    data::QuerySet qs;
    qs.sim = sc;
    qs.queries.push_back({labeled_obs(3, 0, c.s0), labeled_obs(3, 1, c.s1)});
    qs.queries.push_back({labeled_obs(3, 0, c.s0), labeled_obs(3, 2, c.s2)});

    SUBCASE("an oracle-faithful roadmap scores perfectly") {
        const eval::PlanMetrics pm = eval::eval_plans(rm, mm, qs, g);
        CHECK(pm.n_queries == 2);
        CHECK(pm.n_plans == 2);
        CHECK(pm.n_no_path == 0);
        CHECK(pm.n_transitions == 3);
        CHECK(pm.n_valid_transitions == 3);
        CHECK(pm.pct_trans == 100);
        CHECK(pm.pct_all == 100);
        CHECK(pm.pct_any == 100);
    }

    SUBCASE("a corrupted hop fails its query but not the others") {
        rm.edges[{1, 2}].action =
            g.table().actions()[static_cast<std::size_t>(pick_action(g, c.s1, false))];
        const eval::PlanMetrics pm = eval::eval_plans(rm, mm, qs, g);
        CHECK(pm.n_transitions == 3);
        CHECK(pm.n_valid_transitions == 2);
        CHECK(pm.pct_trans == doctest::Approx(200.0f / 3));
        CHECK(pm.pct_all == 50);
        CHECK(pm.pct_any == 50);
    }

    SUBCASE("a goal label mismatch fails the query even when every hop is valid") {
        data::QuerySet qm;
        qm.sim = sc;
        qm.queries.push_back({labeled_obs(3, 0, c.s0), labeled_obs(3, 1, c.s2)});
        const eval::PlanMetrics pm = eval::eval_plans(rm, mm, qm, g);
        CHECK(pm.n_plans == 1);
        CHECK(pm.pct_trans == 100);
        CHECK(pm.pct_all == 0);
        CHECK(pm.pct_any == 0);
    }

    SUBCASE("unreachable goals count as incorrect and add no transitions") {
        rm.edges.clear();
        data::QuerySet qm;
        qm.sim = sc;
        qm.queries.push_back({labeled_obs(3, 0, c.s0), labeled_obs(3, 0, c.s0)});
        qm.queries.push_back({labeled_obs(3, 0, c.s0), labeled_obs(3, 2, c.s2)});
        const eval::PlanMetrics pm = eval::eval_plans(rm, mm, qm, g);
        CHECK(pm.n_queries == 2);
        CHECK(pm.n_plans == 1);
        CHECK(pm.n_no_path == 1);
        CHECK(pm.n_transitions == 0);
        CHECK(pm.pct_trans == 0);
        CHECK(pm.pct_all == 50);
        CHECK(pm.pct_any == 50);
    }

    SUBCASE("missing labels are an error, not a silent miss") {
        rm.nodes[1].label.reset();
        CHECK_THROWS_AS(eval::eval_plans(rm, mm, qs, g), MissingLabels);

        rm.nodes[1].label = c.s1;
        data::QuerySet qm;
        qm.sim = sc;
        qm.queries.push_back({labeled_obs(3, 0, c.s0), labeled_obs(3, 1, std::nullopt)});
        CHECK_THROWS_AS(eval::eval_plans(rm, mm, qm, g), MissingLabels);
    }

    SUBCASE("empty query sets are rejected") {
        data::QuerySet qm;
        qm.sim = sc;
        CHECK_THROWS_AS(eval::eval_plans(rm, mm, qm, g), ShapeError);
    }
}

TEST_CASE("any and all diverge when only one of two minimum-hop paths is sound") {
    const sim::SimConfig sc = small_world();
    const sim::TransitionGraph g(sc);
    const Chain c = real_chain(g);
    REQUIRE(g.edges_from(c.s0).size() >= 2);
    const auto e_alt = g.edges_from(c.s0)[1];
    const int s1b = e_alt.second;
    const sim::GridAction u_alt = g.table().actions()[static_cast<std::size_t>(e_alt.first)];

    roadmap::Roadmap rm;
    rm.eps = 0.5f;
    rm.nodes = {node_at(4, 0, c.s0), node_at(4, 1, c.s1), node_at(4, 2, s1b),
                node_at(4, 3, c.s2)};
    rm.edges[{0, 1}] = dataset_edge(c.u01);
    rm.edges[{0, 2}] = dataset_edge(u_alt);
    rm.edges[{1, 3}] = dataset_edge(c.u12);
    rm.edges[{2, 3}] =
        dataset_edge(g.table().actions()[static_cast<std::size_t>(pick_action(g, s1b, false))]);

    data::QuerySet qs;
    qs.sim = sc;
    qs.queries.push_back({labeled_obs(4, 0, c.s0), labeled_obs(4, 3, c.s2)});

    const eval::PlanMetrics pm = eval::eval_plans(rm, identity_mapper(4), qs, g);
    CHECK(pm.n_plans == 2);
    CHECK(pm.n_transitions == 4);
    CHECK(pm.n_valid_transitions == 3);
    CHECK(pm.pct_trans == 75);
    CHECK(pm.pct_all == 0);
    CHECK(pm.pct_any == 100);
}

TEST_CASE("augmented pairs are correct when both sides share an oracle label") {
    data::Dataset ds;
    ds.sim = small_world();
    ds.tuples.push_back(pair_tuple(5, 5));
    ds.tuples.push_back(pair_tuple(5, 6));
    ds.tuples.push_back(pair_tuple(7, 7));
    ds.tuples.push_back(pair_tuple(8, 9));

    const eval::PairScore all = eval::eval_augment(ds, 0, 4);
    CHECK(all.n == 4);
    CHECK(all.pct == 50);

    const eval::PairScore tail = eval::eval_augment(ds, 2, 2);
    CHECK(tail.n == 2);
    CHECK(tail.pct == 50);

    const eval::PairScore vacuous = eval::eval_augment(ds, 4, 0);
    CHECK(vacuous.n == 0);
    CHECK(vacuous.pct == 100);

    CHECK_THROWS_AS(eval::eval_augment(ds, 3, 2), ShapeError);

    ds.tuples[1].obs_b.meta_label.reset();
    CHECK_THROWS_AS(eval::eval_augment(ds, 0, 4), MissingLabels);
}

TEST_CASE("edge scoring covers shortcuts only") {
    const sim::SimConfig sc = small_world();
    const sim::TransitionGraph g(sc);
    const Chain c = real_chain(g);

    roadmap::Roadmap rm;
    rm.eps = 0.5f;
    rm.nodes = {node_at(4, 0, c.s0), node_at(4, 1, c.s1), node_at(4, 2, c.s2),
                node_at(4, 3, c.s0)};

    SUBCASE("no shortcuts score vacuously perfect") {
        rm.edges[{0, 1}] = dataset_edge(c.u01);
        const eval::PairScore es = eval::eval_edges(rm, g);
        CHECK(es.n == 0);
        CHECK(es.pct == 100);
    }

    SUBCASE("one of three shortcuts is a real transition") {
        // The dataset edge is deliberately wrong and must not count.
        rm.edges[{0, 1}] =
            dataset_edge(g.table().actions()[static_cast<std::size_t>(pick_action(g, c.s0, false))]);
        rm.edges[{1, 2}] = roadmap::shortcut_edge(c.u12);
        rm.edges[{2, 0}] = roadmap::shortcut_edge(
            g.table().actions()[static_cast<std::size_t>(pick_action(g, c.s2, false))]);
        // Matching labels cannot form a transition: every action moves a box.
        rm.edges[{0, 3}] = roadmap::shortcut_edge(c.u01);
        const eval::PairScore es = eval::eval_edges(rm, g);
        CHECK(es.n == 3);
        CHECK(es.pct == doctest::Approx(100.0f / 3));
    }
}

TEST_CASE("exploration validity is the share of valid steps") {
    ace::ExploreLog log;
    CHECK(eval::eval_explore(log) == 0);
    for (const bool v : {true, true, false, true}) {
        ace::ExploreStepRecord rec;
        rec.valid = v;
        log.steps.push_back(rec);
    }
    CHECK(eval::eval_explore(log) == 75);
}

TEST_CASE("framework names map onto stage toggles") {
    ace::IntegrateConfig base;
    base.n_e = 123;
    base.w_eps = -0.2f;
    struct Row {
        const char* name;
        ace::AugmentMode augment;
        ace::ExploreMode explore;
        bool connect;
    };
    const std::vector<Row> rows{
        {"eps-lsr", ace::AugmentMode::off, ace::ExploreMode::off, false},
        {"ab-lsr", ace::AugmentMode::baseline, ace::ExploreMode::off, false},
        {"a-lsr", ace::AugmentMode::ace, ace::ExploreMode::off, false},
        {"c-lsr", ace::AugmentMode::off, ace::ExploreMode::off, true},
        {"eb-lsr", ace::AugmentMode::off, ace::ExploreMode::baseline, false},
        {"e-lsr", ace::AugmentMode::off, ace::ExploreMode::ace, false},
        {"ace-lsr", ace::AugmentMode::ace, ace::ExploreMode::ace, true},
    };
    for (const Row& row : rows) {
        CAPTURE(row.name);
        const ace::IntegrateConfig cfg = eval::framework_config(base, row.name);
        CHECK(cfg.augment == row.augment);
        CHECK(cfg.explore == row.explore);
        CHECK(cfg.connect == row.connect);
        CHECK(cfg.n_e == 123);
        CHECK(cfg.w_eps == -0.2f);
    }
    CHECK_THROWS_AS(eval::framework_config(base, "lsr"), ShapeError);
}

TEST_CASE("experiment config serialization and hashing are stable") {
    const eval::ExperimentConfig cfg;
    const nlohmann::json j = eval::experiment_config_json(cfg);
    CHECK(j.at("n_train_pairs") == 2500);
    CHECK(j.at("fractions").size() == 7);
    CHECK(j.at("w_grid").size() == 7);
    CHECK(j.at("model").at("latent_dim") == 16);
    CHECK(j.at("model").at("sort_order") == "descending");
    CHECK(j.at("sim").at("columns") == 3);

    CHECK(eval::config_hash(j) == eval::config_hash(j));
    CHECK(eval::config_hash(nlohmann::json::object()) == 0x08f44b07b5901a25ULL);

    nlohmann::json j2 = j;
    j2["n_e"] = 7;
    CHECK(eval::config_hash(j2) != eval::config_hash(j));
}

TEST_CASE("experiment config validation rejects malformed settings") {
    const eval::ExperimentConfig good = tiny_experiment();
    good.validate();

    auto broken = [&](auto mutate) {
        eval::ExperimentConfig cfg = tiny_experiment();
        mutate(cfg);
        CHECK_THROWS_AS(cfg.validate(), ShapeError);
    };
    broken([](auto& c) { c.fractions = {1.5}; });
    broken([](auto& c) { c.fractions.clear(); });
    broken([](auto& c) { c.frameworks = {"nope"}; });
    broken([](auto& c) { c.frameworks.clear(); });
    broken([](auto& c) { c.seeds.clear(); });
    broken([](auto& c) { c.w_grid.clear(); });
    broken([](auto& c) { c.n_e = -1; });
    broken([](auto& c) { c.holdout_size = 1; });
    broken([](auto& c) { c.n_train_pairs = 0; });
    broken([](auto& c) { c.max_paths = 0; });
    broken([](auto& c) { c.similar_fraction = 1.5; });
}

TEST_CASE("a small experiment runs every cell deterministically") {
    const eval::ExperimentConfig cfg = tiny_experiment();
    const eval::ExperimentReport rep = eval::run_experiment(cfg);

    REQUIRE(rep.cells.size() == 4);
    for (const eval::CellResult& cell : rep.cells) {
        CAPTURE(cell.framework);
        CAPTURE(cell.fraction);
        REQUIRE(cell.error == "");
        CHECK(cell.metrics.plans.n_queries == cfg.n_test_queries);
        CHECK(cell.metrics.plans.pct_all <= cell.metrics.plans.pct_any);
        const bool in_grid = cell.w_eps == cfg.w_grid[0] || cell.w_eps == cfg.w_grid[1];
        CHECK(in_grid);
        CHECK(cell.eps > 0);
        CHECK(cell.r > 0);
        CHECK(cell.runtime_s >= 0);
        CHECK(cell.config_hash != 0);
        if (cell.framework == "eps-lsr") {
            CHECK(cell.metrics.pairs.n == 0);
            CHECK(cell.metrics.edges.n == 0);
            CHECK(cell.metrics.pct_explore == 0);
        }
    }
    CHECK(rep.cells[0].config_hash != rep.cells[1].config_hash);

    // Bitwise rerun, modulo wall-clock fields.
    const eval::ExperimentReport rep2 = eval::run_experiment(cfg);
    nlohmann::json a = rep.to_json();
    nlohmann::json b = rep2.to_json();
    for (nlohmann::json* j : {&a, &b}) {
        (*j).erase("total_runtime_s");
        for (auto& cell : (*j)["cells"]) cell["metrics"].erase("runtime_s");
        for (auto& agg : (*j)["aggregates"]) agg["metrics"].erase("runtime_s");
    }
    CHECK(a == b);

    const std::string csv = rep.to_csv();
    const auto lines = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
    CHECK(lines == 1 + rep.cells.size() * 12);
    CHECK(csv.rfind("fraction,framework,seed,metric,value,config_hash\n", 0) == 0);

    const nlohmann::json j = rep.to_json();
    CHECK(j.at("cells").size() == 4);
    CHECK(j.at("aggregates").size() == 4);
    REQUIRE(j.at("series").size() == 2);
    for (const auto& s : j.at("series")) {
        CHECK(s.at("fractions").size() == 2);
        CHECK(s.at("pct_any_mean").size() == 2);
    }
    // One seed per cell, so the series mean equals the cell value.
    const auto& s0 = j.at("series")[0];
    CHECK(s0.at("framework") == "eps-lsr");
    CHECK(s0.at("pct_any_mean")[0].get<double>() ==
          doctest::Approx(rep.cells[0].metrics.plans.pct_any));

    const auto dir = std::filesystem::temp_directory_path() / "vap_eval_report_test";
    std::filesystem::remove_all(dir);
    eval::write_report(rep, dir.string());
    for (const char* name : {"report.json", "report.csv", "series.csv"})
        CHECK(std::filesystem::exists(dir / name));
    std::ifstream f(dir / "report.json");
    nlohmann::json loaded;
    f >> loaded;
    CHECK(loaded.at("config").at("data_seed") == 555);
    CHECK(loaded.at("cells").size() == 4);
    std::ifstream sf(dir / "series.csv");
    std::string line;
    std::size_t n_series_lines = 0;
    while (std::getline(sf, line))
        if (!line.empty()) ++n_series_lines;
    CHECK(n_series_lines == 1 + 4);
    std::filesystem::remove_all(dir);
}
