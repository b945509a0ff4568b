#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <vector>

#include <vap/data/io.hpp>
#include <vap/lpm.hpp>
#include <vap/sim/boxstack.hpp>

using namespace vap;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

sim::SimConfig small_sim() {
    sim::SimConfig sc;
    sc.columns = 2;
    sc.max_height = 2;
    sc.n_boxes = 2;
    return sc;
}

mapping::MmModel quick_mapper(const data::Dataset& ds, Index latent, std::uint64_t seed) {
    mapping::MmConfig cfg;
    cfg.latent_dim = latent;
    cfg.hidden = {32};
    cfg.weights.margin = 2.0f;
    cfg.train.epochs = 10;
    cfg.train.batch_size = 16;
    cfg.train.seed = seed;
    return mapping::train_mm(ds, cfg);
}

// Predictor that copies the latent input and ignores the action bits.
dyn::LpmModel identity_lpm(const sim::SimConfig& sc, Index latent) {
    dyn::LpmModel lpm;
    lpm.latent_dim = latent;
    lpm.actions = sim::enumerate_actions(sc);
    nn::Dense<Scalar> layer;
    const Index in = latent + static_cast<Index>(lpm.actions.size());
    layer.W = Mat::Zero(latent, in);
    layer.W.leftCols(latent).setIdentity();
    layer.b = Vec::Zero(latent);
    lpm.net.layers.push_back(layer);
    return lpm;
}

double dataset_mse(const dyn::LpmModel& lpm, const mapping::MmModel& mm,
                   const data::Dataset& ds) {
    double total = 0;
    int n = 0;
    for (const auto& t : ds.tuples) {
        if (!t.is_action) continue;
        const Vec pred = dyn::predict(lpm, mapping::encode(mm, t.obs_a), *t.u);
        total += (pred - mapping::encode(mm, t.obs_b)).squaredNorm();
        ++n;
    }
    return total / n;
}

}  // namespace

TEST_CASE("action vocabulary indexing is total over enumerated actions") {
    const sim::SimConfig sc;  // 3 columns, 4 boxes: 48 actions
    const dyn::LpmModel lpm = identity_lpm(sc, 2);
    REQUIRE(lpm.actions.size() == 48);
    for (Index i = 0; i < 48; ++i) {
        CHECK(dyn::action_index(lpm, lpm.actions[static_cast<size_t>(i)]) == i);
        const Vec v = dyn::one_hot_action(lpm, lpm.actions[static_cast<size_t>(i)]);
        CHECK(v.sum() == 1.0f);
        CHECK(v[i] == 1.0f);
    }
    // Never valid in any state: picking from a full column into a full slot.
    CHECK_THROWS_AS(dyn::action_index(lpm, sim::GridAction{1, 3, 2, 3}), UnknownAction);
    CHECK_THROWS_AS(dyn::one_hot_action(lpm, sim::GridAction{0, 0, 0, 0}), UnknownAction);
}

TEST_CASE("predictor memorizes a single transition") {
    const sim::SimConfig sc = small_sim();
    data::Dataset ds = data::generate_dataset(sc, 40, 0.0f, 11);
    ds.tuples.resize(1);
    REQUIRE(ds.tuples[0].is_action);
    const mapping::MmModel mm = quick_mapper(data::generate_dataset(sc, 40, 0.25f, 11), 2, 3);

    dyn::LpmConfig cfg;
    cfg.hidden = {32};
    cfg.train.epochs = 300;
    cfg.train.batch_size = 1;
    const dyn::LpmModel lpm = dyn::train_lpm(ds, mm, cfg);

    const Vec pred = dyn::predict(lpm, mapping::encode(mm, ds.tuples[0].obs_a),
                                  *ds.tuples[0].u);
    CHECK(l1_distance(pred, mapping::encode(mm, ds.tuples[0].obs_b)) < 1e-2f);
}

TEST_CASE("training shrinks prediction error by an order of magnitude") {
    const sim::SimConfig sc = small_sim();
    const data::Dataset ds = data::generate_dataset(sc, 120, 0.2f, 17);
    const mapping::MmModel mm = quick_mapper(ds, 2, 5);

    dyn::LpmConfig cfg;
    cfg.hidden = {100, 100};
    cfg.train.epochs = 0;
    const dyn::LpmModel raw = dyn::train_lpm(ds, mm, cfg);
    cfg.train.epochs = 120;
    std::vector<double> trace;
    const dyn::LpmModel fit = dyn::train_lpm(ds, mm, cfg, &trace);

    REQUIRE(trace.size() == 120);
    CHECK(dataset_mse(raw, mm, ds) > 10.0 * dataset_mse(fit, mm, ds));

    // Same config, same bits.
    const dyn::LpmModel again = dyn::train_lpm(ds, mm, cfg);
    CHECK(std::memcmp(fit.net.layers[0].W.data(), again.net.layers[0].W.data(),
                      sizeof(Scalar) * static_cast<size_t>(fit.net.layers[0].W.size())) == 0);
}

TEST_CASE("prediction validates its inputs") {
    const sim::SimConfig sc = small_sim();
    const dyn::LpmModel lpm = identity_lpm(sc, 3);
    const Vec z = Vec::Ones(3);
    CHECK(l1_distance(dyn::predict(lpm, z, Index(0)), z) == 0.0f);
    CHECK_THROWS_AS(dyn::predict(lpm, Vec::Ones(2), Index(0)), ShapeError);
    CHECK_THROWS_AS(dyn::predict(lpm, z, Index(-1)), UnknownAction);
    CHECK_THROWS_AS(dyn::predict(lpm, z, static_cast<Index>(lpm.actions.size())),
                    UnknownAction);
    CHECK_THROWS_AS(dyn::predict(lpm, z, sim::GridAction{9, 9, 9, 9}), UnknownAction);
}

TEST_CASE("reliability gate widens with the gate factor and keeps the value") {
    const sim::SimConfig sc = small_sim();
    const dyn::LpmModel lpm = identity_lpm(sc, 2);
    Mat pts(2, 1);
    pts.col(0) << 0, 0;
    const CoveredSpace covered(pts, 1.0f);
    const sim::GridAction u = lpm.actions[0];

    Vec near(2), far(2);
    near << 0.25f, 0.25f;  // L1 distance 0.5
    far << 1.0f, 0.5f;     // L1 distance 1.5

    const auto hit = dyn::predict_reliable(lpm, near, u, covered, 1.0f);
    REQUIRE(hit.has_value());
    CHECK(l1_distance(*hit, near) == 0.0f);

    CHECK_FALSE(dyn::predict_reliable(lpm, far, u, covered, 1.0f).has_value());
    const auto wide = dyn::predict_reliable(lpm, far, u, covered, 2.0f);
    REQUIRE(wide.has_value());
    CHECK(l1_distance(*wide, far) == 0.0f);

    const CoveredSpace empty;
    CHECK_FALSE(dyn::predict_reliable(lpm, near, u, empty, 1.0f).has_value());
}

TEST_CASE("similar-only datasets cannot train a predictor") {
    const sim::SimConfig sc = small_sim();
    data::Dataset ds = data::generate_dataset(sc, 20, 0.5f, 9);
    const mapping::MmModel mm = quick_mapper(ds, 2, 1);
    std::erase_if(ds.tuples, [](const data::TrainingTuple& t) { return t.is_action; });
    REQUIRE(!ds.tuples.empty());
    dyn::LpmConfig cfg;
    CHECK_THROWS_AS(dyn::train_lpm(ds, mm, cfg), NoActionPairs);
}

TEST_CASE("predictor containers round-trip") {
    const sim::SimConfig sc = small_sim();
    const data::Dataset ds = data::generate_dataset(sc, 60, 0.2f, 13);
    const mapping::MmModel mm = quick_mapper(ds, 2, 2);
    dyn::LpmConfig cfg;
    cfg.hidden = {16};
    cfg.train.epochs = 3;
    const dyn::LpmModel lpm = dyn::train_lpm(ds, mm, cfg);

    const std::string path = temp_path("vap_lpm_roundtrip.pack");
    dyn::save_lpm(path, lpm);
    const dyn::LpmModel back = dyn::load_lpm(path);
    CHECK(back.latent_dim == lpm.latent_dim);
    REQUIRE(back.actions.size() == lpm.actions.size());
    CHECK(back.actions == lpm.actions);
    REQUIRE(back.net.layers.size() == lpm.net.layers.size());
    for (size_t l = 0; l < lpm.net.layers.size(); ++l)
        CHECK(std::memcmp(back.net.layers[l].W.data(), lpm.net.layers[l].W.data(),
                          sizeof(Scalar) * static_cast<size_t>(lpm.net.layers[l].W.size())) ==
              0);

    const std::string other = temp_path("vap_lpm_wrongkind.pack");
    data::save_models(other, {{"net", &lpm.net}}, {{"kind", "mm"}});
    CHECK_THROWS_AS(dyn::load_lpm(other), FormatError);
    std::filesystem::remove(path);
    std::filesystem::remove(other);
}
