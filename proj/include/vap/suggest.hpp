#pragma once

#include <array>
#include <string>
#include <vector>

#include <vap/cluster.hpp>
#include <vap/data/dataset.hpp>
#include <vap/errors.hpp>
#include <vap/nn/losses.hpp>
#include <vap/nn/mlp.hpp>
#include <vap/nn/train.hpp>
#include <vap/sim/boxstack.hpp>
#include <vap/types.hpp>

namespace vap::suggest {

struct SmConfig {
    Index sm_dim = 12;
    std::vector<Index> hidden = {128, 64};
    float margin = 1.0f;
    nn::TrainConfig train{};

    SmConfig() { train.epochs = 100; }

    void validate() const {
        if (sm_dim <= 0) throw ShapeError("sm_dim must be positive");
        for (Index h : hidden)
            if (h <= 0) throw ShapeError("hidden widths must be positive");
        if (margin < 0) throw ShapeError("margin must be nonnegative");
        train.validate();
    }
};

// Siamese embedding net: observations sharing an action set land close in the
// embedding, others at least `margin` apart (L1).
struct SMParams {
    nn::Mlp<float> net;
    float margin = 1.0f;
};

// Contrastive loss over one batch of observation pairs; columns are samples.
// Mean over the batch of attract(d) on similar pairs and hinge_repel(d,
// margin) otherwise, d the L1 embedding distance. Gradients cover both sides.
template <typename S>
S sm_batch_loss(const nn::Mlp<S>& net, const nn::MatX<S>& xa, const nn::MatX<S>& xb,
                const std::vector<char>& similar, S margin,
                nn::MlpGrads<S>* grads = nullptr) {
    const Index n = xa.cols();
    if (n == 0) throw ShapeError("sm_batch_loss: empty batch");
    if (xb.rows() != xa.rows() || xb.cols() != n)
        throw ShapeError("sm_batch_loss: pair sides disagree");
    if (static_cast<Index>(similar.size()) != n)
        throw ShapeError("sm_batch_loss: flag count does not match batch");

    nn::ForwardCache<S> ca, cb;
    const nn::MatX<S> ea = nn::forward(net, xa, &ca);
    const nn::MatX<S> eb = nn::forward(net, xb, &cb);
    const nn::MatX<S> diff = ea - eb;
    const S inv_n = S(1) / S(n);

    S loss = 0;
    Eigen::Array<S, 1, Eigen::Dynamic> dcoef(1, n);
    for (Index i = 0; i < n; ++i) {
        const S d = diff.col(i).cwiseAbs().sum();
        if (similar[static_cast<size_t>(i)]) {
            loss += nn::attract(d);
            dcoef(i) = nn::attract_deriv(d);
        } else {
            loss += nn::hinge_repel(d, margin);
            dcoef(i) = nn::hinge_repel_deriv(d, margin);
        }
    }
    loss *= inv_n;
    if (grads == nullptr) return loss;

    const nn::MatX<S> dsign =
        (diff.unaryExpr([](S v) { return S((v > S(0)) - (v < S(0))); }).array().rowwise() *
         (dcoef * inv_n))
            .matrix();
    nn::MlpGrads<S> ga = nn::backward(net, ca, dsign);
    nn::MlpGrads<S> gb = nn::backward(net, cb, nn::MatX<S>(-dsign));
    *grads = std::move(ga);
    *grads += gb;
    return loss;
}

// Trains the embedding on rearranged pairs. Throws DegenerateDataset unless
// both similarity classes are present.
SMParams train_sm(const std::vector<data::SMTuple>& sm_ds, const SmConfig& cfg,
                  std::vector<double>* loss_trace = nullptr);

Vec embed(const SMParams& sm, const sim::Observation& obs);
Mat embed_batch(const SMParams& sm, const Mat& pixels);

struct ClusterConfig {
    int min_cluster_size = 2;
};

// Density clusters over the embedded start observations of the dataset's
// action pairs. Noise points become singleton clusters so every indexed state
// stays queryable; each cluster's action set is the union of its members'
// outgoing actions.
struct SuggestionIndex {
    Mat members;  // embedding per action-pair start, one column each
    std::vector<int> cluster_of;
    std::vector<sim::GridAction> member_action;
    std::vector<std::vector<sim::GridAction>> cluster_actions;

    Index size() const { return members.cols(); }
    int n_clusters() const { return static_cast<int>(cluster_actions.size()); }
};

// Core build over precomputed embeddings; columns of members line up with
// actions. Exists so evaluation can swap in exact embeddings.
SuggestionIndex build_index_embedded(Mat members, std::vector<sim::GridAction> actions,
                                     const ClusterConfig& cc = {});
SuggestionIndex build_index(const SMParams& sm, const data::Dataset& ds,
                            const ClusterConfig& cc = {});

// Action set of the cluster whose member embedding is closest (L1, ties to
// the lowest member index). Throws EmptyIndex on an empty index.
const std::vector<sim::GridAction>& suggest_embedded(const SuggestionIndex& idx, const Vec& e);
std::vector<sim::GridAction> suggest(const SuggestionIndex& idx, const SMParams& sm,
                                     const sim::Observation& obs);

void save_sm(const std::string& path, const SMParams& sm);
SMParams load_sm(const std::string& path);
void save_index(const std::string& path, const SuggestionIndex& idx);
SuggestionIndex load_index(const std::string& path);

// Continuous pick-and-place action: pick (u, v) then place (u, v), all
// normalized to [0, 1].
using ContinuousAction = Eigen::Vector4f;

struct ActionBin {
    std::array<int, 4> id{};
    ContinuousAction mean = ContinuousAction::Zero();
    int count = 0;
};

// Grid partition of the action coordinates with cell width bin_fraction.
// In pick-only mode the place coordinates do not participate in the key.
struct ActionBinTable {
    float bin_fraction = 0;
    bool pick_only = false;
    int bins_per_axis = 0;
    std::vector<ActionBin> bins;  // sorted by id

    std::array<int, 4> bin_of(const ContinuousAction& a) const;
};

ActionBinTable bin_actions(const std::vector<ContinuousAction>& actions, float bin_fraction,
                           bool pick_only = false);

}  // namespace vap::suggest
