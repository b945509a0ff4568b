#include "vap/suggest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "vap/data/container.hpp"
#include "vap/data/io.hpp"
#include "vap/rng.hpp"

namespace vap::suggest {

SMParams train_sm(const std::vector<data::SMTuple>& sm_ds, const SmConfig& cfg,
                  std::vector<double>* loss_trace) {
    cfg.validate();
    const Index n = static_cast<Index>(sm_ds.size());
    bool has_similar = false, has_distinct = false;
    for (const auto& t : sm_ds) (t.similar ? has_similar : has_distinct) = true;
    if (!has_similar || !has_distinct)
        throw DegenerateDataset("train_sm: need both similarity classes, got " +
                                std::to_string(n) + " tuples of one kind");

    const Index dim = sm_ds.front().obs_a.pixels.size();
    Mat xa(dim, n), xb(dim, n);
    std::vector<char> similar(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const auto& t = sm_ds[static_cast<size_t>(i)];
        if (t.obs_a.pixels.size() != dim || t.obs_b.pixels.size() != dim)
            throw ShapeError("train_sm: observations differ in pixel count");
        xa.col(i) = t.obs_a.pixels;
        xb.col(i) = t.obs_b.pixels;
        similar[static_cast<size_t>(i)] = t.similar ? 1 : 0;
    }

    Rng rng(cfg.train.seed);
    std::vector<Index> widths;
    widths.push_back(dim);
    widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
    widths.push_back(cfg.sm_dim);
    SMParams sm;
    sm.margin = cfg.margin;
    sm.net = nn::make_mlp<Scalar>(widths, rng);

    nn::Optimizer<Scalar> opt(cfg.train.optimizer, static_cast<Scalar>(cfg.train.learning_rate));
    std::vector<Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), Index(0));
    Mat xap(dim, n), xbp(dim, n);
    std::vector<char> flags(static_cast<size_t>(n));
    for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        shuffle(order, rng);
        for (Index i = 0; i < n; ++i) {
            xap.col(i) = xa.col(order[static_cast<size_t>(i)]);
            xbp.col(i) = xb.col(order[static_cast<size_t>(i)]);
            flags[static_cast<size_t>(i)] =
                similar[static_cast<size_t>(order[static_cast<size_t>(i)])];
        }
        double epoch_loss = 0;
        Index n_batches = 0;
        for (Index start = 0; start < n; start += cfg.train.batch_size) {
            const Index b = std::min<Index>(cfg.train.batch_size, n - start);
            const std::vector<char> bflags(flags.begin() + start, flags.begin() + start + b);
            nn::MlpGrads<Scalar> grads;
            const Scalar loss =
                sm_batch_loss<Scalar>(sm.net, xap.middleCols(start, b), xbp.middleCols(start, b),
                                      bflags, sm.margin, &grads);
            if (!std::isfinite(static_cast<double>(loss)))
                throw DivergenceError("train_sm: non-finite loss at epoch " +
                                      std::to_string(epoch));
            opt.step(sm.net, grads);
            epoch_loss += static_cast<double>(loss);
            ++n_batches;
        }
        if (loss_trace) loss_trace->push_back(epoch_loss / static_cast<double>(n_batches));
    }
    return sm;
}

Vec embed(const SMParams& sm, const sim::Observation& obs) {
    if (obs.pixels.size() != sm.net.input_width())
        throw ShapeError("embed: observation has " + std::to_string(obs.pixels.size()) +
                         " pixels, net expects " + std::to_string(sm.net.input_width()));
    return nn::forward(sm.net, obs.pixels);
}

Mat embed_batch(const SMParams& sm, const Mat& pixels) { return nn::forward(sm.net, pixels); }

SuggestionIndex build_index_embedded(Mat members, std::vector<sim::GridAction> actions,
                                     const ClusterConfig& cc) {
    if (members.cols() != static_cast<Index>(actions.size()))
        throw ShapeError("build_index: one action per member required");
    if (members.cols() == 0) throw NoActionPairs("build_index: no action pairs to index");

    SuggestionIndex idx;
    idx.members = std::move(members);
    idx.member_action = std::move(actions);

    const auto clustering = cluster::hdbscan(idx.members, cc.min_cluster_size);
    idx.cluster_of.assign(clustering.labels.begin(), clustering.labels.end());
    int next = clustering.n_clusters;
    for (auto& c : idx.cluster_of)
        if (c < 0) c = next++;

    idx.cluster_actions.assign(static_cast<size_t>(next), {});
    for (size_t i = 0; i < idx.cluster_of.size(); ++i)
        idx.cluster_actions[static_cast<size_t>(idx.cluster_of[i])].push_back(
            idx.member_action[i]);
    for (auto& set : idx.cluster_actions) {
        std::sort(set.begin(), set.end());
        set.erase(std::unique(set.begin(), set.end()), set.end());
    }
    return idx;
}

SuggestionIndex build_index(const SMParams& sm, const data::Dataset& ds,
                            const ClusterConfig& cc) {
    std::vector<Index> rows;
    for (Index i = 0; i < static_cast<Index>(ds.tuples.size()); ++i)
        if (ds.tuples[static_cast<size_t>(i)].is_action) rows.push_back(i);
    if (rows.empty()) throw NoActionPairs("build_index: dataset has no action pairs");

    const Index dim = ds.tuples.front().obs_a.pixels.size();
    Mat pixels(dim, static_cast<Index>(rows.size()));
    std::vector<sim::GridAction> actions;
    actions.reserve(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        const auto& t = ds.tuples[static_cast<size_t>(rows[i])];
        if (!t.u.has_value()) throw ShapeError("build_index: action tuple without an action");
        pixels.col(static_cast<Index>(i)) = t.obs_a.pixels;
        actions.push_back(*t.u);
    }
    return build_index_embedded(embed_batch(sm, pixels), std::move(actions), cc);
}

const std::vector<sim::GridAction>& suggest_embedded(const SuggestionIndex& idx, const Vec& e) {
    if (idx.size() == 0) throw EmptyIndex("suggest on an empty index");
    if (e.size() != idx.members.rows())
        throw ShapeError("suggest: embedding width " + std::to_string(e.size()) +
                         " != index width " + std::to_string(idx.members.rows()));
    Index best = 0;
    (idx.members.colwise() - e).cwiseAbs().colwise().sum().minCoeff(&best);
    return idx.cluster_actions[static_cast<size_t>(idx.cluster_of[static_cast<size_t>(best)])];
}

std::vector<sim::GridAction> suggest(const SuggestionIndex& idx, const SMParams& sm,
                                     const sim::Observation& obs) {
    return suggest_embedded(idx, embed(sm, obs));
}

void save_sm(const std::string& path, const SMParams& sm) {
    data::save_models(path, {{"net", &sm.net}}, {{"kind", "sm"}, {"margin", sm.margin}});
}

SMParams load_sm(const std::string& path) {
    auto [nets, meta] = data::load_models(path);
    if (meta.value("kind", "") != "sm") throw FormatError("not a suggester container", 0);
    if (!nets.count("net")) throw FormatError("suggester container is missing the net", 0);
    SMParams sm;
    sm.net = std::move(nets.at("net"));
    sm.margin = meta.at("margin").get<float>();
    return sm;
}

void save_index(const std::string& path, const SuggestionIndex& idx) {
    data::PackWriter w(nlohmann::json{{"type", "smindex"}});
    w.f32("members", idx.members);
    w.i32("cluster_of", std::vector<std::int32_t>(idx.cluster_of.begin(), idx.cluster_of.end()));
    std::vector<std::int32_t> acts;
    acts.reserve(idx.member_action.size() * 4);
    for (const auto& u : idx.member_action) {
        acts.push_back(u.pick_col);
        acts.push_back(u.pick_level);
        acts.push_back(u.place_col);
        acts.push_back(u.place_level);
    }
    w.i32("member_action", acts.data(), 4, static_cast<Index>(idx.member_action.size()));
    w.save(path);
}

SuggestionIndex load_index(const std::string& path) {
    data::PackReader r(path);
    if (r.meta().value("type", "") != "smindex") throw FormatError("not an index container", 0);
    SuggestionIndex idx;
    idx.members = r.f32("members");
    const auto clusters = r.i32("cluster_of");
    idx.cluster_of.assign(clusters.begin(), clusters.end());
    const auto acts = r.i32("member_action");
    if (acts.size() != clusters.size() * 4 ||
        static_cast<Index>(clusters.size()) != idx.members.cols())
        throw FormatError("index container fields disagree in length", 0);
    for (size_t i = 0; i < clusters.size(); ++i)
        idx.member_action.push_back(
            {acts[4 * i], acts[4 * i + 1], acts[4 * i + 2], acts[4 * i + 3]});

    // Labels are the union of member actions by invariant, so they are not
    // stored; rebuild them.
    int next = 0;
    for (const int c : idx.cluster_of) next = std::max(next, c + 1);
    idx.cluster_actions.assign(static_cast<size_t>(next), {});
    for (size_t i = 0; i < idx.cluster_of.size(); ++i) {
        if (idx.cluster_of[i] < 0) throw FormatError("negative cluster id in index", 0);
        idx.cluster_actions[static_cast<size_t>(idx.cluster_of[i])].push_back(
            idx.member_action[i]);
    }
    for (auto& set : idx.cluster_actions) {
        std::sort(set.begin(), set.end());
        set.erase(std::unique(set.begin(), set.end()), set.end());
    }
    return idx;
}

std::array<int, 4> ActionBinTable::bin_of(const ContinuousAction& a) const {
    std::array<int, 4> id{};
    const int last = pick_only ? 2 : 4;
    for (int c = 0; c < last; ++c) {
        const float v = std::clamp(a[c], 0.0f, 1.0f);
        id[static_cast<size_t>(c)] =
            std::min(bins_per_axis - 1, static_cast<int>(v / bin_fraction));
    }
    return id;
}

ActionBinTable bin_actions(const std::vector<ContinuousAction>& actions, float bin_fraction,
                           bool pick_only) {
    if (!(bin_fraction > 0.0f) || bin_fraction > 1.0f)
        throw ShapeError("bin_fraction must be in (0, 1]");
    ActionBinTable table;
    table.bin_fraction = bin_fraction;
    table.pick_only = pick_only;
    table.bins_per_axis = static_cast<int>(std::ceil(1.0f / bin_fraction));

    std::map<std::array<int, 4>, ActionBin> bins;
    for (const auto& a : actions) {
        const auto id = table.bin_of(a);
        auto& bin = bins[id];
        bin.id = id;
        bin.mean += a;
        bin.count += 1;
    }
    for (auto& [id, bin] : bins) {
        bin.mean /= static_cast<float>(bin.count);
        table.bins.push_back(bin);
    }
    return table;
}

}  // namespace vap::suggest
