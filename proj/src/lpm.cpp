#include "vap/lpm.hpp"

#include <algorithm>
#include <numeric>

#include "vap/data/io.hpp"
#include "vap/rng.hpp"

namespace vap::dyn {

Index action_index(const LpmModel& lpm, const sim::GridAction& u) {
    const auto it = std::find(lpm.actions.begin(), lpm.actions.end(), u);
    if (it == lpm.actions.end())
        throw UnknownAction("action " + u.to_string() + " is not in the vocabulary");
    return static_cast<Index>(it - lpm.actions.begin());
}

Vec one_hot_action(const LpmModel& lpm, const sim::GridAction& u) {
    Vec v = Vec::Zero(static_cast<Index>(lpm.actions.size()));
    v[action_index(lpm, u)] = 1;
    return v;
}

LpmModel train_lpm(const data::Dataset& ds, const mapping::MmModel& mm, const LpmConfig& cfg,
                   std::vector<double>* loss_trace) {
    cfg.validate();
    LpmModel lpm;
    lpm.latent_dim = mm.latent_dim;
    lpm.actions = sim::enumerate_actions(ds.sim);

    std::vector<Index> rows;
    for (Index i = 0; i < static_cast<Index>(ds.tuples.size()); ++i)
        if (ds.tuples[static_cast<size_t>(i)].is_action) rows.push_back(i);
    if (rows.empty()) throw NoActionPairs("train_lpm: dataset has no action pairs");

    const Index n = static_cast<Index>(rows.size());
    const Index n_actions = static_cast<Index>(lpm.actions.size());
    const Index dim = ds.tuples.front().obs_a.pixels.size();

    Mat before(dim, n), after(dim, n);
    for (Index i = 0; i < n; ++i) {
        const auto& t = ds.tuples[static_cast<size_t>(rows[static_cast<size_t>(i)])];
        before.col(i) = t.obs_a.pixels;
        after.col(i) = t.obs_b.pixels;
    }
    const Mat z_before = mapping::encode_batch(mm, before);
    const Mat z_after = mapping::encode_batch(mm, after);

    Mat inputs = Mat::Zero(mm.latent_dim + n_actions, n);
    inputs.topRows(mm.latent_dim) = z_before;
    for (Index i = 0; i < n; ++i) {
        const auto& t = ds.tuples[static_cast<size_t>(rows[static_cast<size_t>(i)])];
        if (!t.u.has_value()) throw ShapeError("action tuple without an action");
        inputs(mm.latent_dim + action_index(lpm, *t.u), i) = 1;
    }

    Rng rng(cfg.train.seed);
    std::vector<Index> hidden = cfg.hidden;
    std::vector<Index> widths;
    widths.push_back(mm.latent_dim + n_actions);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(mm.latent_dim);
    lpm.net = nn::make_mlp<Scalar>(widths, rng);

    std::vector<Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), Index(0));
    shuffle(order, rng);
    Mat xs(inputs.rows(), n), ts(mm.latent_dim, n);
    for (Index i = 0; i < n; ++i) {
        xs.col(i) = inputs.col(order[static_cast<size_t>(i)]);
        ts.col(i) = z_after.col(order[static_cast<size_t>(i)]);
    }
    const auto batches = nn::make_batches(xs, ts, cfg.train.batch_size);
    lpm.net = nn::train<Scalar>(std::move(lpm.net), batches, cfg.train,
                                nn::regression_mse<Scalar>, loss_trace);
    return lpm;
}

Vec predict(const LpmModel& lpm, const Vec& z, Index action) {
    if (z.size() != lpm.latent_dim)
        throw ShapeError("predict: latent has " + std::to_string(z.size()) +
                         " entries, expected " + std::to_string(lpm.latent_dim));
    if (action < 0 || action >= static_cast<Index>(lpm.actions.size()))
        throw UnknownAction("action index " + std::to_string(action) + " out of range");
    Vec input = Vec::Zero(lpm.net.input_width());
    input.head(lpm.latent_dim) = z;
    input[lpm.latent_dim + action] = 1;
    return nn::forward(lpm.net, input);
}

Vec predict(const LpmModel& lpm, const Vec& z, const sim::GridAction& u) {
    return predict(lpm, z, action_index(lpm, u));
}

std::optional<Vec> predict_reliable(const LpmModel& lpm, const Vec& z, const sim::GridAction& u,
                                    const CoveredSpace& covered, float rho_gate) {
    Vec next = predict(lpm, z, u);
    if (covered.size() == 0) return std::nullopt;
    if (covered.nearest(next).second > covered.eps() * rho_gate) return std::nullopt;
    return next;
}

void save_lpm(const std::string& path, const LpmModel& lpm) {
    nlohmann::json acts = nlohmann::json::array();
    for (const auto& u : lpm.actions)
        acts.push_back({u.pick_col, u.pick_level, u.place_col, u.place_level});
    const nlohmann::json meta = {
        {"kind", "lpm"}, {"latent_dim", lpm.latent_dim}, {"actions", acts}};
    data::save_models(path, {{"net", &lpm.net}}, meta);
}

LpmModel load_lpm(const std::string& path) {
    auto [nets, meta] = data::load_models(path);
    if (meta.value("kind", "") != "lpm") throw FormatError("not a predictor container", 0);
    if (!nets.count("net")) throw FormatError("predictor container is missing the net", 0);
    LpmModel lpm;
    lpm.net = std::move(nets.at("net"));
    lpm.latent_dim = meta.at("latent_dim").get<Index>();
    for (const auto& a : meta.at("actions")) {
        if (a.size() != 4) throw FormatError("malformed action entry", 0);
        lpm.actions.push_back(
            {a[0].get<int>(), a[1].get<int>(), a[2].get<int>(), a[3].get<int>()});
    }
    return lpm;
}

}  // namespace vap::dyn
