#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <vap/data/dataset.hpp>
#include <vap/errors.hpp>
#include <vap/nn/losses.hpp>
#include <vap/nn/mlp.hpp>
#include <vap/nn/train.hpp>
#include <vap/types.hpp>

namespace vap::mapping {

// Relative weights of the three loss terms. Margin is the latent L1 distance
// below which action pairs are pushed apart.
struct MmWeights {
    float beta_kl = 1e-3f;
    float gamma_action = 1.0f;
    float margin = 5.0f;
};

struct MmConfig {
    Index latent_dim = 16;
    std::vector<Index> hidden = {256, 256};
    MmWeights weights{};
    nn::TrainConfig train{};

    void validate() const {
        if (latent_dim <= 0) throw ShapeError("latent_dim must be positive");
        for (Index h : hidden)
            if (h <= 0) throw ShapeError("hidden widths must be positive");
        if (weights.margin < 0) throw ShapeError("margin must be nonnegative");
        train.validate();
    }
};

// Observation-to-latent model. The encoder emits [mean; logvar] of width
// 2*latent_dim; the latent representation of an observation is the mean.
struct MmModel {
    nn::Mlp<float> encoder;
    nn::Mlp<float> decoder;
    Index latent_dim = 0;
    Index image_side = 0;
    MmWeights weights{};
};

// Spread of latent L1 distances across pairs labelled as visually similar.
struct LatentStats {
    float mu0 = 0;
    float sigma0 = 0;
};

// Lower bound of the clustering radius for degenerate latent statistics.
inline constexpr float kEpsilonFloor = 1e-6f;

template <typename S>
struct MmLossParts {
    S recon = 0;
    S kl = 0;
    S contrast = 0;
    S total = 0;
};

namespace detail {

template <typename S>
nn::MatX<S> sign(const nn::MatX<S>& m) {
    return m.unaryExpr([](S v) { return S((v > S(0)) - (v < S(0))); });
}

}  // namespace detail

// Loss core over one batch of observation pairs; columns are samples.
// noise1/noise2 are pre-drawn standard normal draws shaped latent_dim x n.
// All terms are means over the batch. When grad outputs are given they are
// overwritten with d(total)/d(params); the encoder sees both pair sides.
template <typename S>
MmLossParts<S> mm_batch_loss(const nn::Mlp<S>& enc, const nn::Mlp<S>& dec, Index latent_dim,
                             const nn::MatX<S>& x1, const nn::MatX<S>& x2,
                             const std::vector<char>& is_action,
                             const nn::MatX<S>& noise1, const nn::MatX<S>& noise2,
                             S beta_kl, S gamma_action, S margin,
                             nn::MlpGrads<S>* enc_grads = nullptr,
                             nn::MlpGrads<S>* dec_grads = nullptr) {
    const Index n = x1.cols();
    if (n == 0) throw ShapeError("mm_batch_loss: empty batch");
    if (x2.rows() != x1.rows() || x2.cols() != n)
        throw ShapeError("mm_batch_loss: pair sides disagree");
    if (enc.input_width() != x1.rows() || enc.output_width() != 2 * latent_dim)
        throw ShapeError("mm_batch_loss: encoder widths do not match");
    if (dec.input_width() != latent_dim || dec.output_width() != x1.rows())
        throw ShapeError("mm_batch_loss: decoder widths do not match");
    if (noise1.rows() != latent_dim || noise1.cols() != n || noise2.rows() != latent_dim ||
        noise2.cols() != n)
        throw ShapeError("mm_batch_loss: noise must be latent_dim x batch");
    if (static_cast<Index>(is_action.size()) != n)
        throw ShapeError("mm_batch_loss: flag count does not match batch");

    const S inv_n = S(1) / S(n);

    nn::ForwardCache<S> ce1, ce2, cd1, cd2;
    const nn::MatX<S> out1 = nn::forward(enc, x1, &ce1);
    const nn::MatX<S> out2 = nn::forward(enc, x2, &ce2);
    const nn::MatX<S> mean1 = out1.topRows(latent_dim);
    const nn::MatX<S> mean2 = out2.topRows(latent_dim);
    const nn::MatX<S> logvar1 = out1.bottomRows(latent_dim);
    const nn::MatX<S> logvar2 = out2.bottomRows(latent_dim);

    const nn::MatX<S> spread1 = (S(0.5) * logvar1).array().exp();
    const nn::MatX<S> spread2 = (S(0.5) * logvar2).array().exp();
    const nn::MatX<S> z1 = mean1 + spread1.cwiseProduct(noise1);
    const nn::MatX<S> z2 = mean2 + spread2.cwiseProduct(noise2);

    const nn::MatX<S> xhat1 = nn::forward(dec, z1, &cd1);
    const nn::MatX<S> xhat2 = nn::forward(dec, z2, &cd2);

    MmLossParts<S> parts;
    parts.recon = (nn::mse(xhat1, x1) + nn::mse(xhat2, x2)) * inv_n;
    parts.kl = (nn::kl_standard_normal(mean1, logvar1) + nn::kl_standard_normal(mean2, logvar2)) *
               inv_n;

    // Contrastive term on posterior means: attract similar pairs, push action
    // pairs beyond the margin. dcoef holds d(term_i)/d(d_i) for reuse below.
    const nn::MatX<S> diff = mean1 - mean2;
    Eigen::Array<S, 1, Eigen::Dynamic> dist = diff.cwiseAbs().colwise().sum().array();
    Eigen::Array<S, 1, Eigen::Dynamic> dcoef(1, n);
    S contrast = 0;
    for (Index i = 0; i < n; ++i) {
        if (is_action[static_cast<size_t>(i)]) {
            contrast += nn::hinge_repel(dist(i), margin);
            dcoef(i) = nn::hinge_repel_deriv(dist(i), margin);
        } else {
            contrast += nn::attract(dist(i));
            dcoef(i) = nn::attract_deriv(dist(i));
        }
    }
    parts.contrast = contrast * inv_n;
    parts.total = parts.recon + beta_kl * parts.kl + gamma_action * parts.contrast;

    if (enc_grads == nullptr && dec_grads == nullptr) return parts;
    if (enc_grads == nullptr || dec_grads == nullptr)
        throw ShapeError("mm_batch_loss: gradients must be requested for both nets");

    const nn::MatX<S> dxhat1 = S(2) * inv_n * (xhat1 - x1);
    const nn::MatX<S> dxhat2 = S(2) * inv_n * (xhat2 - x2);
    nn::MlpGrads<S> dec1 = nn::backward(dec, cd1, dxhat1);
    nn::MlpGrads<S> dec2 = nn::backward(dec, cd2, dxhat2);
    const nn::MatX<S> dz1 = dec1.dX;
    const nn::MatX<S> dz2 = dec2.dX;
    *dec_grads = std::move(dec1);
    *dec_grads += dec2;

    const nn::MatX<S> dcontrast = (detail::sign<S>(diff).array().rowwise() * dcoef).matrix();
    nn::MatX<S> dout1(2 * latent_dim, n);
    nn::MatX<S> dout2(2 * latent_dim, n);
    dout1.topRows(latent_dim) = dz1 + beta_kl * inv_n * nn::kl_grad_mean(mean1) +
                                gamma_action * inv_n * dcontrast;
    dout2.topRows(latent_dim) = dz2 + beta_kl * inv_n * nn::kl_grad_mean(mean2) -
                                gamma_action * inv_n * dcontrast;
    dout1.bottomRows(latent_dim) =
        dz1.cwiseProduct(S(0.5) * spread1.cwiseProduct(noise1)) +
        beta_kl * inv_n * nn::kl_grad_logvar(logvar1);
    dout2.bottomRows(latent_dim) =
        dz2.cwiseProduct(S(0.5) * spread2.cwiseProduct(noise2)) +
        beta_kl * inv_n * nn::kl_grad_logvar(logvar2);

    nn::MlpGrads<S> enc1 = nn::backward(enc, ce1, dout1);
    nn::MlpGrads<S> enc2 = nn::backward(enc, ce2, dout2);
    *enc_grads = std::move(enc1);
    *enc_grads += enc2;
    return parts;
}

// Trains encoder and decoder jointly on observation pairs. Deterministic for
// a fixed config; the input dataset is not modified.
MmModel train_mm(const data::Dataset& ds, const MmConfig& cfg,
                 std::vector<double>* loss_trace = nullptr);

Vec encode(const MmModel& mm, const sim::Observation& obs);
Mat encode_batch(const MmModel& mm, const Mat& pixels);
sim::Observation decode(const MmModel& mm, const Vec& z);

// Mean and population standard deviation of latent L1 distances over pairs
// flagged as similar. Throws NoSimilarPairs when the dataset has none.
LatentStats latent_stats(const MmModel& mm, const data::Dataset& ds);

// Clustering radius mu0 + w * sigma0, floored at a tiny positive constant so
// degenerate statistics still yield a usable radius.
float epsilon(const LatentStats& stats, float w);

void save_mm(const std::string& path, const MmModel& mm);
MmModel load_mm(const std::string& path);

}  // namespace vap::mapping
