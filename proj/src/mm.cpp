#include "vap/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vap/data/io.hpp"
#include "vap/rng.hpp"

namespace vap::mapping {

namespace {

void fill_normal(Mat& m, Rng& rng) {
    for (Index c = 0; c < m.cols(); ++c)
        for (Index r = 0; r < m.rows(); ++r) m(r, c) = static_cast<Scalar>(rng.normal());
}

std::vector<Index> make_widths(Index in, const std::vector<Index>& hidden, Index out) {
    std::vector<Index> widths;
    widths.push_back(in);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(out);
    return widths;
}

}  // namespace

MmModel train_mm(const data::Dataset& ds, const MmConfig& cfg, std::vector<double>* loss_trace) {
    cfg.validate();
    const Index n = static_cast<Index>(ds.tuples.size());
    if (n == 0) throw ShapeError("train_mm: dataset is empty");
    const Index dim = ds.tuples.front().obs_a.pixels.size();

    Mat x1(dim, n), x2(dim, n);
    std::vector<char> is_action(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const auto& t = ds.tuples[static_cast<size_t>(i)];
        if (t.obs_a.pixels.size() != dim || t.obs_b.pixels.size() != dim)
            throw ShapeError("train_mm: observations differ in pixel count");
        x1.col(i) = t.obs_a.pixels;
        x2.col(i) = t.obs_b.pixels;
        is_action[static_cast<size_t>(i)] = t.is_action ? 1 : 0;
    }

    Rng rng(cfg.train.seed);
    MmModel mm;
    mm.latent_dim = cfg.latent_dim;
    mm.image_side = ds.sim.image_side;
    mm.weights = cfg.weights;
    mm.encoder = nn::make_mlp<Scalar>(make_widths(dim, cfg.hidden, 2 * cfg.latent_dim), rng);
    std::vector<Index> dec_hidden(cfg.hidden.rbegin(), cfg.hidden.rend());
    mm.decoder = nn::make_mlp<Scalar>(make_widths(cfg.latent_dim, dec_hidden, dim), rng);

    const auto lr = static_cast<Scalar>(cfg.train.learning_rate);
    nn::Optimizer<Scalar> enc_opt(cfg.train.optimizer, lr);
    nn::Optimizer<Scalar> dec_opt(cfg.train.optimizer, lr);
    const auto& w = cfg.weights;

    std::vector<Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), Index(0));
    Mat x1p(dim, n), x2p(dim, n);
    std::vector<char> flags(static_cast<size_t>(n));
    for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        shuffle(order, rng);
        for (Index i = 0; i < n; ++i) {
            x1p.col(i) = x1.col(order[static_cast<size_t>(i)]);
            x2p.col(i) = x2.col(order[static_cast<size_t>(i)]);
            flags[static_cast<size_t>(i)] = is_action[static_cast<size_t>(order[static_cast<size_t>(i)])];
        }
        double epoch_loss = 0;
        Index n_batches = 0;
        for (Index start = 0; start < n; start += cfg.train.batch_size) {
            const Index b = std::min<Index>(cfg.train.batch_size, n - start);
            Mat noise1(cfg.latent_dim, b), noise2(cfg.latent_dim, b);
            fill_normal(noise1, rng);
            fill_normal(noise2, rng);
            const std::vector<char> bflags(flags.begin() + start, flags.begin() + start + b);
            nn::MlpGrads<Scalar> eg, dg;
            const auto parts = mm_batch_loss<Scalar>(
                mm.encoder, mm.decoder, cfg.latent_dim, Mat(x1p.middleCols(start, b)),
                Mat(x2p.middleCols(start, b)), bflags, noise1, noise2, w.beta_kl,
                w.gamma_action, w.margin, &eg, &dg);
            if (!std::isfinite(static_cast<double>(parts.total)))
                throw DivergenceError("train_mm: non-finite loss at epoch " +
                                      std::to_string(epoch));
            enc_opt.step(mm.encoder, eg);
            dec_opt.step(mm.decoder, dg);
            epoch_loss += static_cast<double>(parts.total);
            ++n_batches;
        }
        if (loss_trace) loss_trace->push_back(epoch_loss / static_cast<double>(n_batches));
    }
    return mm;
}

Vec encode(const MmModel& mm, const sim::Observation& obs) {
    if (obs.pixels.size() != mm.encoder.input_width())
        throw ShapeError("encode: observation has " + std::to_string(obs.pixels.size()) +
                         " pixels, encoder expects " + std::to_string(mm.encoder.input_width()));
    const Vec out = nn::forward(mm.encoder, obs.pixels);
    return out.head(mm.latent_dim);
}

Mat encode_batch(const MmModel& mm, const Mat& pixels) {
    return nn::forward(mm.encoder, pixels).topRows(mm.latent_dim);
}

sim::Observation decode(const MmModel& mm, const Vec& z) {
    if (z.size() != mm.latent_dim)
        throw ShapeError("decode: latent has " + std::to_string(z.size()) +
                         " entries, expected " + std::to_string(mm.latent_dim));
    sim::Observation obs;
    obs.pixels = nn::forward(mm.decoder, z).cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
    obs.side = mm.image_side;
    return obs;
}

LatentStats latent_stats(const MmModel& mm, const data::Dataset& ds) {
    std::vector<double> dists;
    for (const auto& t : ds.tuples) {
        if (t.is_action) continue;
        dists.push_back(static_cast<double>(l1_distance(encode(mm, t.obs_a), encode(mm, t.obs_b))));
    }
    if (dists.empty()) throw NoSimilarPairs("latent_stats: dataset has no similar pairs");
    double mean = 0;
    for (const double d : dists) mean += d;
    mean /= static_cast<double>(dists.size());
    double var = 0;
    for (const double d : dists) var += (d - mean) * (d - mean);
    var /= static_cast<double>(dists.size());
    return {static_cast<float>(mean), static_cast<float>(std::sqrt(var))};
}

float epsilon(const LatentStats& stats, float w) {
    return std::max(stats.mu0 + w * stats.sigma0, kEpsilonFloor);
}

void save_mm(const std::string& path, const MmModel& mm) {
    const nlohmann::json meta = {{"kind", "mm"},
                                 {"latent_dim", mm.latent_dim},
                                 {"image_side", mm.image_side},
                                 {"beta_kl", mm.weights.beta_kl},
                                 {"gamma_action", mm.weights.gamma_action},
                                 {"margin", mm.weights.margin}};
    data::save_models(path, {{"encoder", &mm.encoder}, {"decoder", &mm.decoder}}, meta);
}

MmModel load_mm(const std::string& path) {
    auto [nets, meta] = data::load_models(path);
    if (meta.value("kind", "") != "mm") throw FormatError("not a mapper container", 0);
    if (!nets.count("encoder") || !nets.count("decoder"))
        throw FormatError("mapper container is missing a network", 0);
    MmModel mm;
    mm.encoder = std::move(nets.at("encoder"));
    mm.decoder = std::move(nets.at("decoder"));
    mm.latent_dim = meta.at("latent_dim").get<Index>();
    mm.image_side = meta.at("image_side").get<Index>();
    mm.weights.beta_kl = meta.at("beta_kl").get<float>();
    mm.weights.gamma_action = meta.at("gamma_action").get<float>();
    mm.weights.margin = meta.at("margin").get<float>();
    return mm;
}

}  // namespace vap::mapping
