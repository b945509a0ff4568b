#pragma once

#include <optional>
#include <string>
#include <vector>

#include <vap/covered.hpp>
#include <vap/data/dataset.hpp>
#include <vap/errors.hpp>
#include <vap/mapping.hpp>
#include <vap/nn/train.hpp>
#include <vap/sim/boxstack.hpp>
#include <vap/types.hpp>

namespace vap::dyn {

struct LpmConfig {
    std::vector<Index> hidden = {100, 100};
    nn::TrainConfig train{};

    void validate() const {
        for (Index h : hidden)
            if (h <= 0) throw ShapeError("hidden widths must be positive");
        train.validate();
    }
};

// Latent transition predictor: (latent state, one-hot action) -> next latent
// state. The action vocabulary is the simulator's enumerated action list and
// fixes the one-hot layout.
struct LpmModel {
    nn::Mlp<float> net;
    Index latent_dim = 0;
    std::vector<sim::GridAction> actions;
};

// Index of u in the model's vocabulary. Throws UnknownAction when absent.
Index action_index(const LpmModel& lpm, const sim::GridAction& u);
Vec one_hot_action(const LpmModel& lpm, const sim::GridAction& u);

// Regression on the dataset's action tuples: encode both sides, predict the
// successor's latent mean. Throws NoActionPairs when the dataset has none.
LpmModel train_lpm(const data::Dataset& ds, const mapping::MmModel& mm, const LpmConfig& cfg,
                   std::vector<double>* loss_trace = nullptr);

Vec predict(const LpmModel& lpm, const Vec& z, Index action);
Vec predict(const LpmModel& lpm, const Vec& z, const sim::GridAction& u);

// The prediction, gated: engaged only when the predicted state lies within
// rho_gate * eps of the covered space. The value itself is never altered.
std::optional<Vec> predict_reliable(const LpmModel& lpm, const Vec& z, const sim::GridAction& u,
                                    const CoveredSpace& covered, float rho_gate);

void save_lpm(const std::string& path, const LpmModel& lpm);
LpmModel load_lpm(const std::string& path);

}  // namespace vap::dyn
