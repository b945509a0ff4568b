#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include <vap/ace.hpp>
#include <vap/data/dataset.hpp>
#include <vap/errors.hpp>
#include <vap/mapping.hpp>
#include <vap/roadmap.hpp>
#include <vap/sim/boxstack.hpp>
#include <vap/types.hpp>

namespace vap::eval {

// Planning scores over a query set. Transitions are pooled over every
// proposed plan of every query; a query counts toward pct_all when all of its
// plans are correct and toward pct_any when at least one is.
struct PlanMetrics {
    int n_queries = 0;
    int n_plans = 0;
    int n_transitions = 0;
    int n_valid_transitions = 0;
    int n_all_correct = 0;
    int n_any_correct = 0;
    int n_no_path = 0;
    float pct_trans = 0;
    float pct_all = 0;
    float pct_any = 0;
};

// A plan is correct iff every hop is an oracle-valid transition between the
// node labels under the edge action and the final node label matches the
// goal. Unreachable queries are incorrect and contribute no transitions.
// Throws MissingLabels when a visited node or query observation lacks one.
PlanMetrics eval_plans(const roadmap::Roadmap& rm, const mapping::MmModel& mm,
                       const data::QuerySet& queries, const sim::TransitionGraph& oracle,
                       int max_paths = 10);

// Count and correctness percentage; an empty sample scores 100 so vacuous
// stages do not read as failures.
struct PairScore {
    int n = 0;
    float pct = 100;
};

// Scores tuples [first, first + count): correct iff both observations carry
// the same oracle label.
PairScore eval_augment(const data::Dataset& ds, std::size_t first, std::size_t count);

// Scores shortcut edges only: correct iff the oracle permits the transition
// between the node labels under the edge action.
PairScore eval_edges(const roadmap::Roadmap& rm, const sim::TransitionGraph& oracle);

// Percentage of valid steps; an empty log scores 0.
float eval_explore(const ace::ExploreLog& log);

struct CellMetrics {
    PlanMetrics plans;
    PairScore pairs;
    PairScore edges;
    float pct_explore = 0;
};

// Stage toggles for a named variant: eps-lsr, ab-lsr, a-lsr, c-lsr, eb-lsr,
// e-lsr, ace-lsr. Throws ShapeError on an unknown name.
ace::IntegrateConfig framework_config(const ace::IntegrateConfig& base,
                                      const std::string& name);

struct ExperimentConfig {
    sim::SimConfig sim;
    int n_train_pairs = 2500;
    double similar_fraction = 0.2;
    int n_test_queries = 1000;
    int n_validation_queries = 200;
    int holdout_size = 2500;
    std::vector<double> fractions{0.3, 0.4, 0.5, 0.6, 0.75, 0.8, 1.0};
    std::vector<std::string> frameworks{"eps-lsr", "ace-lsr"};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<float> w_grid{-0.65f, -0.55f, -0.45f, -0.35f, -0.25f, -0.15f, -0.05f};
    float w_nominal = -0.35f;  // radius scale used by the pipeline stages themselves
    int n_e = 500;
    int max_paths = 10;
    std::uint64_t data_seed = 1000;
    ace::IntegrateConfig base{};

    void validate() const;
};

struct CellResult {
    double fraction = 0;
    std::string framework;
    std::uint64_t seed = 0;
    CellMetrics metrics;
    float w_eps = 0;
    float eps = 0;
    float r = 0;
    double runtime_s = 0;
    std::uint64_t config_hash = 0;
    std::string error;  // empty on success

    bool ok() const { return error.empty(); }
};

struct ExperimentReport {
    nlohmann::json config;
    std::vector<CellResult> cells;
    double total_runtime_s = 0;

    nlohmann::json to_json() const;  // cells, per-(fraction, framework) aggregates, series
    std::string to_csv() const;      // fraction,framework,seed,metric,value,config_hash
};

// Runs every (fraction, framework, seed) cell: subsample, integrate with the
// nominal radius scale, pick w from the grid by validation pct_any, score on
// the test queries. A failing cell records its error and the run continues.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

// report.json, report.csv and series.csv under out_dir (created if absent).
void write_report(const ExperimentReport& rep, const std::string& out_dir);

nlohmann::json experiment_config_json(const ExperimentConfig& cfg);

// FNV-1a over the canonical dump; stable across runs and platforms.
std::uint64_t config_hash(const nlohmann::json& j);

}  // namespace vap::eval
