#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <set>
#include <vector>

#include <vap/cluster.hpp>
#include <vap/data/io.hpp>
#include <vap/nn/gradcheck.hpp>
#include <vap/rng.hpp>
#include <vap/suggest.hpp>

using namespace vap;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

// Pairwise label agreement must match pairwise blob agreement.
void check_matches_partition(const std::vector<int>& labels, const std::vector<int>& blobs) {
    REQUIRE(labels.size() == blobs.size());
    for (size_t i = 0; i < labels.size(); ++i)
        for (size_t j = i + 1; j < labels.size(); ++j)
            CHECK((labels[i] == labels[j]) == (blobs[i] == blobs[j]));
}

sim::GridAction act(int a, int b, int c, int d) { return sim::GridAction{a, b, c, d}; }

}  // namespace

TEST_CASE("density clustering separates well-spaced blobs") {
    Rng rng(31);
    const int n_blobs = 8, per_blob = 20, dim = 4;
    Mat pts(dim, n_blobs * per_blob);
    std::vector<int> blob(static_cast<size_t>(n_blobs * per_blob));
    for (int b = 0; b < n_blobs; ++b) {
        Vec center = Vec::Zero(dim);
        center[b % dim] = (b < dim) ? 50.0f : -50.0f;
        for (int i = 0; i < per_blob; ++i) {
            const int col = b * per_blob + i;
            for (int r = 0; r < dim; ++r)
                pts(r, col) = center[r] + static_cast<Scalar>(rng.normal());
            blob[static_cast<size_t>(col)] = b;
        }
    }
    const auto res = cluster::hdbscan(pts, 2);
    CHECK(res.n_clusters == n_blobs);
    check_matches_partition(res.labels, blob);
    for (const int l : res.labels) CHECK(l >= 0);

    const auto again = cluster::hdbscan(pts, 2);
    CHECK(again.labels == res.labels);
}

TEST_CASE("equidistant points all degrade to noise") {
    const int n = 6;
    Mat pts = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) pts(i, i) = 1.0f;  // pairwise L1 distance 2
    const auto res = cluster::hdbscan(pts, 2);
    CHECK(res.n_clusters == 0);
    for (const int l : res.labels) CHECK(l == -1);
}

TEST_CASE("coincident pairs form their own clusters and outliers stay noise") {
    Mat pts(2, 7);
    pts.col(0) << 0, 0;
    pts.col(1) << 0, 0;
    pts.col(2) << 40, 0;
    pts.col(3) << 40, 0;
    pts.col(4) << 0, 40;
    pts.col(5) << 0, 40;
    pts.col(6) << 200, 200;
    const auto res = cluster::hdbscan(pts, 2);
    CHECK(res.n_clusters == 3);
    CHECK(res.labels[0] == res.labels[1]);
    CHECK(res.labels[2] == res.labels[3]);
    CHECK(res.labels[4] == res.labels[5]);
    CHECK(res.labels[0] != res.labels[2]);
    CHECK(res.labels[0] != res.labels[4]);
    CHECK(res.labels[6] == -1);
}

TEST_CASE("density clustering edge cases") {
    CHECK_THROWS_AS(cluster::hdbscan(Mat::Zero(2, 5), 1), ShapeError);
    CHECK(cluster::hdbscan(Mat(2, 0), 2).labels.empty());
    const auto lone = cluster::hdbscan(Mat::Zero(2, 1), 2);
    REQUIRE(lone.labels.size() == 1);
    CHECK(lone.labels[0] == -1);
}

TEST_CASE("index unions actions of coincident members") {
    Mat members(2, 6);
    members.col(0) << 0, 0;
    members.col(1) << 0, 0;
    members.col(2) << 30, 0;
    members.col(3) << 30, 0;
    members.col(4) << 0, 30;
    members.col(5) << 0, 30;
    std::vector<sim::GridAction> actions = {act(1, 1, 2, 1), act(2, 1, 1, 1), act(1, 1, 3, 1),
                                            act(1, 1, 3, 1), act(3, 1, 1, 1), act(3, 1, 2, 1)};
    const auto idx = suggest::build_index_embedded(members, actions);
    CHECK(idx.n_clusters() == 3);
    CHECK(idx.cluster_of[0] == idx.cluster_of[1]);
    const auto& set01 = idx.cluster_actions[static_cast<size_t>(idx.cluster_of[0])];
    CHECK(set01 == std::vector<sim::GridAction>{act(1, 1, 2, 1), act(2, 1, 1, 1)});
    const auto& set23 = idx.cluster_actions[static_cast<size_t>(idx.cluster_of[2])];
    CHECK(set23 == std::vector<sim::GridAction>{act(1, 1, 3, 1)});

    Vec q(2);
    q << 1, 29;
    CHECK(suggest::suggest_embedded(idx, q) ==
          std::vector<sim::GridAction>{act(3, 1, 1, 1), act(3, 1, 2, 1)});
}

TEST_CASE("spread members become singleton clusters labeled with their own action") {
    const int n = 6;
    Mat members = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) members(i, i) = 1.0f;
    std::vector<sim::GridAction> actions;
    for (int i = 0; i < n; ++i) actions.push_back(act(1, 1, 2, i + 1));
    const auto idx = suggest::build_index_embedded(members, actions);
    CHECK(idx.n_clusters() == n);
    std::set<int> seen(idx.cluster_of.begin(), idx.cluster_of.end());
    CHECK(seen.size() == static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& set = idx.cluster_actions[static_cast<size_t>(idx.cluster_of[i])];
        CHECK(set == std::vector<sim::GridAction>{actions[static_cast<size_t>(i)]});
    }
}

TEST_CASE("oracle state-indicator embedding recovers states and their actions") {
    sim::SimConfig sc;
    sc.columns = 3;
    sc.max_height = 2;
    sc.n_boxes = 2;
    const sim::StateTable table(sc);
    const auto states = sim::enumerate_states(sc);
    const Index n_states = static_cast<Index>(states.size());
    REQUIRE(n_states == 12);

    std::vector<Vec> embeddings;
    std::vector<sim::GridAction> actions;
    std::vector<int> state_of_member;
    for (Index s = 0; s < n_states; ++s) {
        for (const auto& u : sim::valid_actions(states[static_cast<size_t>(s)], sc)) {
            Vec e = Vec::Zero(n_states);
            e[s] = 1;
            embeddings.push_back(e);
            actions.push_back(u);
            state_of_member.push_back(static_cast<int>(s));
        }
    }
    Mat members(n_states, static_cast<Index>(embeddings.size()));
    for (size_t i = 0; i < embeddings.size(); ++i)
        members.col(static_cast<Index>(i)) = embeddings[i];

    const auto idx = suggest::build_index_embedded(members, actions);
    CHECK(idx.n_clusters() == n_states);
    check_matches_partition(idx.cluster_of, state_of_member);
    for (Index s = 0; s < n_states; ++s) {
        Vec q = Vec::Zero(n_states);
        q[s] = 1;
        CHECK(suggest::suggest_embedded(idx, q) ==
              sim::valid_actions(states[static_cast<size_t>(s)], sc));
    }
}

TEST_CASE("contrastive training pulls shared-action pairs together") {
    sim::SimConfig sc;
    sc.columns = 2;
    sc.max_height = 2;
    sc.n_boxes = 2;
    const data::Dataset ds = data::generate_dataset(sc, 150, 0.2f, 41);
    const auto sm_ds = data::build_sm_dataset(ds);
    bool has_similar = false, has_distinct = false;
    for (const auto& t : sm_ds) (t.similar ? has_similar : has_distinct) = true;
    REQUIRE(has_similar);
    REQUIRE(has_distinct);

    suggest::SmConfig cfg;
    cfg.sm_dim = 4;
    cfg.hidden = {32};
    cfg.train.epochs = 40;
    cfg.train.batch_size = 16;
    cfg.train.seed = 5;
    std::vector<double> trace;
    const suggest::SMParams sm = suggest::train_sm(sm_ds, cfg, &trace);
    REQUIRE(trace.size() == 40);
    CHECK(trace.back() < trace.front());

    double d_sim = 0, d_diff = 0;
    int n_sim = 0, n_diff = 0;
    for (const auto& t : sm_ds) {
        const double d = l1_distance(suggest::embed(sm, t.obs_a), suggest::embed(sm, t.obs_b));
        if (t.similar) {
            d_sim += d;
            ++n_sim;
        } else {
            d_diff += d;
            ++n_diff;
        }
    }
    CHECK(d_sim / n_sim < d_diff / n_diff);

    const suggest::SMParams again = suggest::train_sm(sm_ds, cfg);
    CHECK(std::memcmp(sm.net.layers[0].W.data(), again.net.layers[0].W.data(),
                      sizeof(Scalar) * static_cast<size_t>(sm.net.layers[0].W.size())) == 0);

    // Zero margin silences the repel term but training still runs.
    suggest::SmConfig zero = cfg;
    zero.margin = 0.0f;
    zero.train.epochs = 2;
    CHECK(suggest::train_sm(sm_ds, zero).net.all_finite());

    std::vector<data::SMTuple> one_class(sm_ds.begin(), sm_ds.end());
    std::erase_if(one_class, [](const data::SMTuple& t) { return !t.similar; });
    CHECK_THROWS_AS(suggest::train_sm(one_class, cfg), DegenerateDataset);
}

TEST_CASE("siamese loss gradients agree with central differences") {
    for (const std::uint64_t seed : {3ULL, 4ULL}) {
        Rng rng(seed);
        nn::Mlp<double> net = nn::make_mlp<double>({6, 5, 3}, rng);
        nn::MatX<double> xa(6, 4), xb(6, 4);
        for (nn::MatX<double>* m : {&xa, &xb})
            for (Index c = 0; c < m->cols(); ++c)
                for (Index r = 0; r < m->rows(); ++r) (*m)(r, c) = rng.normal();
        const std::vector<char> similar{1, 0, 1, 0};
        const auto f = [&](const nn::Mlp<double>& p) {
            nn::MlpGrads<double> g;
            const double loss = suggest::sm_batch_loss<double>(p, xa, xb, similar, 1.2, &g);
            return std::pair<double, nn::MlpGrads<double>>{loss, std::move(g)};
        };
        CHECK(nn::gradient_check_rel_error<double>(net, f, 1e-5) <= 1e-4);
    }
}

TEST_CASE("index build on a trained suggester keeps its invariants") {
    sim::SimConfig sc;
    sc.columns = 2;
    sc.max_height = 2;
    sc.n_boxes = 2;
    const data::Dataset ds = data::generate_dataset(sc, 120, 0.2f, 43);
    suggest::SmConfig cfg;
    cfg.sm_dim = 4;
    cfg.hidden = {32};
    cfg.train.epochs = 15;
    cfg.train.seed = 2;
    const suggest::SMParams sm = suggest::train_sm(data::build_sm_dataset(ds), cfg);

    const auto idx = suggest::build_index(sm, ds);
    Index n_action = 0;
    std::set<sim::GridAction> dataset_actions;
    for (const auto& t : ds.tuples)
        if (t.is_action) {
            ++n_action;
            dataset_actions.insert(*t.u);
        }
    REQUIRE(idx.size() == n_action);

    // Every member sits in exactly one cluster and labels are recomputable as
    // the union of member actions.
    std::vector<std::set<sim::GridAction>> unions(static_cast<size_t>(idx.n_clusters()));
    for (Index i = 0; i < idx.size(); ++i) {
        const int c = idx.cluster_of[static_cast<size_t>(i)];
        REQUIRE(c >= 0);
        REQUIRE(c < idx.n_clusters());
        unions[static_cast<size_t>(c)].insert(idx.member_action[static_cast<size_t>(i)]);
    }
    for (int c = 0; c < idx.n_clusters(); ++c) {
        const auto& label = idx.cluster_actions[static_cast<size_t>(c)];
        CHECK(label == std::vector<sim::GridAction>(unions[static_cast<size_t>(c)].begin(),
                                                    unions[static_cast<size_t>(c)].end()));
    }

    // Suggestions never invent actions and are deterministic.
    const auto got = suggest::suggest(idx, sm, ds.tuples[0].obs_a);
    for (const auto& u : got) CHECK(dataset_actions.count(u) == 1);
    CHECK(suggest::suggest(idx, sm, ds.tuples[0].obs_a) == got);

    data::Dataset no_actions = ds;
    std::erase_if(no_actions.tuples, [](const data::TrainingTuple& t) { return t.is_action; });
    CHECK_THROWS_AS(suggest::build_index(sm, no_actions), NoActionPairs);
    CHECK_THROWS_AS(suggest::suggest_embedded(suggest::SuggestionIndex{}, Vec::Zero(4)),
                    EmptyIndex);
}

TEST_CASE("suggester and index containers round-trip") {
    sim::SimConfig sc;
    sc.columns = 2;
    sc.max_height = 2;
    sc.n_boxes = 2;
    const data::Dataset ds = data::generate_dataset(sc, 80, 0.25f, 47);
    suggest::SmConfig cfg;
    cfg.sm_dim = 3;
    cfg.hidden = {16};
    cfg.train.epochs = 5;
    const suggest::SMParams sm = suggest::train_sm(data::build_sm_dataset(ds), cfg);
    const auto idx = suggest::build_index(sm, ds);

    const std::string sm_path = temp_path("vap_sm_roundtrip.pack");
    const std::string idx_path = temp_path("vap_smindex_roundtrip.pack");
    suggest::save_sm(sm_path, sm);
    suggest::save_index(idx_path, idx);
    const suggest::SMParams sm2 = suggest::load_sm(sm_path);
    const auto idx2 = suggest::load_index(idx_path);

    CHECK(sm2.margin == sm.margin);
    for (size_t l = 0; l < sm.net.layers.size(); ++l)
        CHECK(std::memcmp(sm2.net.layers[l].W.data(), sm.net.layers[l].W.data(),
                          sizeof(Scalar) * static_cast<size_t>(sm.net.layers[l].W.size())) == 0);
    CHECK(idx2.cluster_of == idx.cluster_of);
    CHECK(idx2.member_action == idx.member_action);
    CHECK(idx2.cluster_actions == idx.cluster_actions);
    CHECK(suggest::suggest(idx2, sm2, ds.tuples[1].obs_a) ==
          suggest::suggest(idx, sm, ds.tuples[1].obs_a));

    data::save_models(sm_path, {{"net", &sm.net}}, {{"kind", "mm"}});
    CHECK_THROWS_AS(suggest::load_sm(sm_path), FormatError);
    std::filesystem::remove(sm_path);
    std::filesystem::remove(idx_path);
}

TEST_CASE("action binning partitions the coordinate space") {
    using suggest::ContinuousAction;
    std::vector<ContinuousAction> actions;
    actions.push_back(ContinuousAction(0.1f, 0.2f, 0.3f, 0.4f));
    actions.push_back(ContinuousAction(0.9f, 0.8f, 0.7f, 0.6f));

    const auto single = suggest::bin_actions(actions, 1.0f);
    REQUIRE(single.bins.size() == 1);
    CHECK(single.bins[0].count == 2);
    CHECK(single.bins[0].mean.isApprox(ContinuousAction(0.5f, 0.5f, 0.5f, 0.5f), 1e-6f));

    // Coarse inputs relative to the bin width stay singletons.
    std::vector<ContinuousAction> coarse;
    coarse.push_back(ContinuousAction(0.1f, 0.1f, 0.1f, 0.1f));
    coarse.push_back(ContinuousAction(0.6f, 0.1f, 0.1f, 0.1f));
    coarse.push_back(ContinuousAction(0.1f, 0.6f, 0.1f, 0.1f));
    const auto grid = suggest::bin_actions(coarse, 0.25f);
    REQUIRE(grid.bins.size() == 3);
    for (const auto& bin : grid.bins) CHECK(bin.count == 1);

    CHECK_THROWS_AS(suggest::bin_actions(actions, 0.0f), ShapeError);
    CHECK_THROWS_AS(suggest::bin_actions(actions, 1.5f), ShapeError);
}

TEST_CASE("uniform random actions occupy a bounded number of bins") {
    Rng rng(99);
    std::vector<suggest::ContinuousAction> actions(10000);
    for (auto& a : actions)
        for (int c = 0; c < 4; ++c) a[c] = static_cast<float>(rng.uniform());

    const auto table = suggest::bin_actions(actions, 0.15f);
    CHECK(table.bins_per_axis == 7);
    CHECK(table.bins.size() <= 2401);  // ceil(1/0.15)^4
    CHECK(table.bins.size() >= 100);
    int total = 0;
    for (const auto& bin : table.bins) {
        total += bin.count;
        for (int c = 0; c < 4; ++c) {
            const float lo = static_cast<float>(bin.id[static_cast<size_t>(c)]) * 0.15f;
            CHECK(bin.mean[c] >= lo);
            CHECK(bin.mean[c] <= std::min(1.0f, lo + 0.15f));
        }
    }
    CHECK(total == 10000);

    const auto picks = suggest::bin_actions(actions, 0.15f, true);
    CHECK(picks.bins.size() <= 49);
    for (const auto& bin : picks.bins) {
        CHECK(bin.id[2] == 0);
        CHECK(bin.id[3] == 0);
    }
}
