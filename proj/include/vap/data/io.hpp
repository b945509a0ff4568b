#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vap/data/container.hpp"
#include "vap/data/dataset.hpp"
#include "vap/nn/mlp.hpp"

namespace vap::data {

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

void save_queries(const QuerySet& qs, const std::string& path);
QuerySet load_queries(const std::string& path);

// Generic model container: any number of named dense networks plus caller
// metadata (model kind, hyperparameters, provenance).
void save_models(const std::string& path,
                 const std::vector<std::pair<std::string, const nn::Mlp<float>*>>& nets,
                 nlohmann::json meta);
std::pair<std::map<std::string, nn::Mlp<float>>, nlohmann::json> load_models(
    const std::string& path);

// SimConfig round-trip helpers shared by every artifact.
nlohmann::json sim_to_json(const sim::SimConfig& cfg);
sim::SimConfig sim_from_json(const nlohmann::json& j);

}  // namespace vap::data
