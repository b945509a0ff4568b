#include <vap/eval.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <utility>

namespace vap::eval {
namespace {

std::int32_t require_label(const sim::Observation& obs, const char* what) {
    if (!obs.meta_label) throw MissingLabels(std::string(what) + " observation has no label");
    return *obs.meta_label;
}

std::int32_t require_label(const roadmap::Node& node, int id) {
    if (!node.label)
        throw MissingLabels("roadmap node " + std::to_string(id) + " has no label");
    return *node.label;
}

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string format_hash(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Stable metric order of the CSV and the aggregate tables.
using MetricGetter = double (*)(const CellResult&);
const std::vector<std::pair<const char*, MetricGetter>>& metric_table() {
    static const std::vector<std::pair<const char*, MetricGetter>> table{
        {"pct_trans", [](const CellResult& c) -> double { return c.metrics.plans.pct_trans; }},
        {"pct_all", [](const CellResult& c) -> double { return c.metrics.plans.pct_all; }},
        {"pct_any", [](const CellResult& c) -> double { return c.metrics.plans.pct_any; }},
        {"n_pairs", [](const CellResult& c) -> double { return c.metrics.pairs.n; }},
        {"pct_pairs", [](const CellResult& c) -> double { return c.metrics.pairs.pct; }},
        {"n_edges", [](const CellResult& c) -> double { return c.metrics.edges.n; }},
        {"pct_edges", [](const CellResult& c) -> double { return c.metrics.edges.pct; }},
        {"pct_explore", [](const CellResult& c) -> double { return c.metrics.pct_explore; }},
        {"w_eps", [](const CellResult& c) -> double { return c.w_eps; }},
        {"eps", [](const CellResult& c) -> double { return c.eps; }},
        {"r", [](const CellResult& c) -> double { return c.r; }},
        {"runtime_s", [](const CellResult& c) -> double { return c.runtime_s; }},
    };
    return table;
}

nlohmann::json cell_to_json(const CellResult& c) {
    nlohmann::json m;
    for (const auto& [name, get] : metric_table()) m[name] = get(c);
    return {{"fraction", c.fraction}, {"framework", c.framework},
            {"seed", c.seed},         {"metrics", std::move(m)},
            {"error", c.error},       {"config_hash", format_hash(c.config_hash)}};
}

}  // namespace

PlanMetrics eval_plans(const roadmap::Roadmap& rm, const mapping::MmModel& mm,
                       const data::QuerySet& queries, const sim::TransitionGraph& oracle,
                       int max_paths) {
    if (queries.queries.empty()) throw ShapeError("eval_plans: no queries");
    PlanMetrics out;
    out.n_queries = static_cast<int>(queries.queries.size());
    for (const data::Query& q : queries.queries) {
        require_label(q.start, "start");
        const std::int32_t goal_label = require_label(q.goal, "goal");

        std::vector<roadmap::Plan> plans;
        try {
            plans = roadmap::plan(rm, mm, q.start, q.goal, max_paths);
        } catch (const NoPath&) {
            ++out.n_no_path;
            continue;
        }
        bool all_ok = true;
        bool any_ok = false;
        for (const roadmap::Plan& p : plans) {
            ++out.n_plans;
            bool ok = true;
            for (std::size_t k = 0; k + 1 < p.nodes.size(); ++k) {
                const std::int32_t a =
                    require_label(rm.nodes[static_cast<std::size_t>(p.nodes[k])], p.nodes[k]);
                const std::int32_t b = require_label(
                    rm.nodes[static_cast<std::size_t>(p.nodes[k + 1])], p.nodes[k + 1]);
                const bool valid = oracle.valid_transition(a, p.actions[k], b);
                ++out.n_transitions;
                if (valid)
                    ++out.n_valid_transitions;
                else
                    ok = false;
            }
            const int last = p.nodes.back();
            ok = ok && require_label(rm.nodes[static_cast<std::size_t>(last)], last) ==
                           goal_label;
            all_ok = all_ok && ok;
            any_ok = any_ok || ok;
        }
        if (all_ok) ++out.n_all_correct;
        if (any_ok) ++out.n_any_correct;
    }
    out.pct_trans = out.n_transitions == 0 ? 0.0f
                                           : 100.0f * static_cast<float>(out.n_valid_transitions) /
                                                 static_cast<float>(out.n_transitions);
    out.pct_all = 100.0f * static_cast<float>(out.n_all_correct) /
                  static_cast<float>(out.n_queries);
    out.pct_any = 100.0f * static_cast<float>(out.n_any_correct) /
                  static_cast<float>(out.n_queries);
    return out;
}

PairScore eval_augment(const data::Dataset& ds, std::size_t first, std::size_t count) {
    if (first + count > ds.tuples.size())
        throw ShapeError("eval_augment: range exceeds the dataset");
    PairScore out;
    out.n = static_cast<int>(count);
    if (count == 0) return out;
    int correct = 0;
    for (std::size_t k = first; k < first + count; ++k) {
        const data::TrainingTuple& t = ds.tuples[k];
        if (require_label(t.obs_a, "pair") == require_label(t.obs_b, "pair")) ++correct;
    }
    out.pct = 100.0f * static_cast<float>(correct) / static_cast<float>(count);
    return out;
}

PairScore eval_edges(const roadmap::Roadmap& rm, const sim::TransitionGraph& oracle) {
    PairScore out;
    int correct = 0;
    for (const auto& [key, e] : rm.edges) {
        if (e.provenance != roadmap::Provenance::shortcut) continue;
        ++out.n;
        const std::int32_t a =
            require_label(rm.nodes[static_cast<std::size_t>(key.first)], key.first);
        const std::int32_t b =
            require_label(rm.nodes[static_cast<std::size_t>(key.second)], key.second);
        if (oracle.valid_transition(a, e.action, b)) ++correct;
    }
    if (out.n > 0) out.pct = 100.0f * static_cast<float>(correct) / static_cast<float>(out.n);
    return out;
}

float eval_explore(const ace::ExploreLog& log) {
    if (log.steps.empty()) return 0;
    return 100.0f * static_cast<float>(log.n_valid()) / static_cast<float>(log.n_steps());
}

ace::IntegrateConfig framework_config(const ace::IntegrateConfig& base,
                                      const std::string& name) {
    ace::IntegrateConfig cfg = base;
    cfg.augment = ace::AugmentMode::off;
    cfg.explore = ace::ExploreMode::off;
    cfg.connect = false;
    if (name == "eps-lsr") {
    } else if (name == "ab-lsr") {
        cfg.augment = ace::AugmentMode::baseline;
    } else if (name == "a-lsr") {
        cfg.augment = ace::AugmentMode::ace;
    } else if (name == "c-lsr") {
        cfg.connect = true;
    } else if (name == "eb-lsr") {
        cfg.explore = ace::ExploreMode::baseline;
    } else if (name == "e-lsr") {
        cfg.explore = ace::ExploreMode::ace;
    } else if (name == "ace-lsr") {
        cfg.augment = ace::AugmentMode::ace;
        cfg.explore = ace::ExploreMode::ace;
        cfg.connect = true;
    } else {
        throw ShapeError("unknown framework: " + name);
    }
    return cfg;
}

void ExperimentConfig::validate() const {
    sim.validate();
    base.validate();
    if (n_train_pairs <= 0) throw ShapeError("n_train_pairs must be positive");
    if (similar_fraction < 0 || similar_fraction > 1)
        throw ShapeError("similar_fraction must lie in [0, 1]");
    if (n_test_queries <= 0 || n_validation_queries <= 0)
        throw ShapeError("query counts must be positive");
    if (holdout_size < 2) throw ShapeError("holdout_size must be at least 2");
    if (fractions.empty()) throw ShapeError("no fractions");
    for (const double f : fractions)
        if (f <= 0 || f > 1) throw ShapeError("fractions must lie in (0, 1]");
    if (frameworks.empty()) throw ShapeError("no frameworks");
    for (const std::string& f : frameworks) framework_config(base, f);
    if (seeds.empty()) throw ShapeError("no seeds");
    if (w_grid.empty()) throw ShapeError("no w_grid values");
    if (n_e < 0) throw ShapeError("n_e must be nonnegative");
    if (max_paths <= 0) throw ShapeError("max_paths must be positive");
}

nlohmann::json experiment_config_json(const ExperimentConfig& cfg) {
    return {
        {"sim",
         {{"columns", cfg.sim.columns},
          {"max_height", cfg.sim.max_height},
          {"n_boxes", cfg.sim.n_boxes},
          {"image_side", cfg.sim.image_side},
          {"position_noise", cfg.sim.position_noise},
          {"brightness_lo", cfg.sim.brightness_lo},
          {"brightness_hi", cfg.sim.brightness_hi}}},
        {"n_train_pairs", cfg.n_train_pairs},
        {"similar_fraction", cfg.similar_fraction},
        {"n_test_queries", cfg.n_test_queries},
        {"n_validation_queries", cfg.n_validation_queries},
        {"holdout_size", cfg.holdout_size},
        {"fractions", cfg.fractions},
        {"frameworks", cfg.frameworks},
        {"seeds", cfg.seeds},
        {"w_grid", cfg.w_grid},
        {"w_nominal", cfg.w_nominal},
        {"n_e", cfg.n_e},
        {"max_paths", cfg.max_paths},
        {"data_seed", cfg.data_seed},
        {"model",
         {{"latent_dim", cfg.base.mm.latent_dim},
          {"mm_hidden", cfg.base.mm.hidden},
          {"mm_epochs", cfg.base.mm.train.epochs},
          {"mm_batch", cfg.base.mm.train.batch_size},
          {"mm_lr", cfg.base.mm.train.learning_rate},
          {"mm_margin", cfg.base.mm.weights.margin},
          {"beta_kl", cfg.base.mm.weights.beta_kl},
          {"gamma_action", cfg.base.mm.weights.gamma_action},
          {"lpm_hidden", cfg.base.lpm.hidden},
          {"lpm_epochs", cfg.base.lpm.train.epochs},
          {"sm_dim", cfg.base.sm.sm_dim},
          {"sm_hidden", cfg.base.sm.hidden},
          {"sm_epochs", cfg.base.sm.train.epochs},
          {"sm_margin", cfg.base.sm.margin},
          {"min_cluster_size", cfg.base.cluster.min_cluster_size},
          {"rho_gate", cfg.base.rho_gate},
          {"sort_order",
           cfg.base.sort_order == ace::SortOrder::descending ? "descending" : "ascending"}}}};
}

std::uint64_t config_hash(const nlohmann::json& j) {
    const std::string s = j.dump();
    std::uint64_t h = 14695981039346656037ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();

    ExperimentReport rep;
    rep.config = experiment_config_json(cfg);

    const sim::TransitionGraph oracle(cfg.sim);
    const data::Dataset full =
        data::generate_dataset(cfg.sim, cfg.n_train_pairs, cfg.similar_fraction, cfg.data_seed);
    const data::QuerySet test =
        data::make_queries(cfg.sim, cfg.n_test_queries, cfg.holdout_size, cfg.data_seed + 1);
    const data::QuerySet validation = data::make_queries(
        cfg.sim, cfg.n_validation_queries, cfg.holdout_size, cfg.data_seed + 2);

    for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi) {
        const double fraction = cfg.fractions[fi];
        const data::Dataset ds =
            fraction >= 1.0 ? full
                            : data::subsample(full, fraction,
                                              cfg.data_seed + 77 + static_cast<std::uint64_t>(fi));
        for (std::size_t wi = 0; wi < cfg.frameworks.size(); ++wi) {
            const std::string& name = cfg.frameworks[wi];
            for (const std::uint64_t seed : cfg.seeds) {
                CellResult cell;
                cell.fraction = fraction;
                cell.framework = name;
                cell.seed = seed;
                nlohmann::json cj = rep.config;
                cj["cell"] = {{"fraction", fraction}, {"framework", name}, {"seed", seed}};
                cell.config_hash = config_hash(cj);

                const auto c0 = clock::now();
                try {
                    ace::IntegrateConfig icfg = framework_config(cfg.base, name);
                    icfg.n_e = cfg.n_e;
                    icfg.w_eps = cfg.w_nominal;
                    icfg.mm.train.seed = seed;
                    icfg.lpm.train.seed = seed + 500000;
                    icfg.sm.train.seed = seed + 900000;
                    icfg.baseline_seed = seed + 1300000;
                    sim::SimEnv env(cfg.sim, seed * 1000003ULL + fi * 101 + wi);
                    const ace::IntegrateResult res = ace::integrate(ds, env, icfg);

                    // The models are fixed here; the radius scale only decides
                    // how the final roadmap is assembled, so the grid search
                    // rebuilds and scores against the validation queries.
                    const mapping::LatentStats stats = mapping::latent_stats(res.mm, res.ds);
                    roadmap::Roadmap best_rm;
                    float best_any = -1;
                    for (const float w : cfg.w_grid) {
                        const float e = mapping::epsilon(stats, w);
                        roadmap::Roadmap rm = roadmap::build_lsr(res.mm, res.ds, e);
                        if (icfg.connect)
                            rm = ace::connect(rm, res.mm, res.sm, res.index, res.lpm, e,
                                              icfg.rho_gate)
                                     .rm;
                        const PlanMetrics vm =
                            eval_plans(rm, res.mm, validation, oracle, cfg.max_paths);
                        if (vm.pct_any > best_any) {
                            best_any = vm.pct_any;
                            cell.w_eps = w;
                            cell.eps = e;
                            best_rm = std::move(rm);
                        }
                    }
                    cell.r = res.r;
                    cell.metrics.plans = eval_plans(best_rm, res.mm, test, oracle, cfg.max_paths);
                    cell.metrics.pairs =
                        eval_augment(res.ds, ds.tuples.size(),
                                     static_cast<std::size_t>(res.n_aug_pairs));
                    cell.metrics.edges = eval_edges(best_rm, oracle);
                    cell.metrics.pct_explore = eval_explore(res.explore_log);
                } catch (const std::exception& ex) {
                    cell.error = ex.what();
                }
                cell.runtime_s =
                    std::chrono::duration<double>(clock::now() - c0).count();
                std::cerr << "[experiment] fraction=" << fraction << " framework=" << name
                          << " seed=" << seed << " ";
                if (cell.ok())
                    std::cerr << "any=" << cell.metrics.plans.pct_any << " w=" << cell.w_eps;
                else
                    std::cerr << "error=" << cell.error;
                std::cerr << " (" << format_value(cell.runtime_s) << "s)" << std::endl;
                rep.cells.push_back(std::move(cell));
            }
        }
    }
    rep.total_runtime_s = std::chrono::duration<double>(clock::now() - t0).count();
    return rep;
}

nlohmann::json ExperimentReport::to_json() const {
    nlohmann::json cells_json = nlohmann::json::array();
    for (const CellResult& c : cells) cells_json.push_back(cell_to_json(c));

    // Aggregates and series follow the config's fraction and framework order.
    nlohmann::json aggregates = nlohmann::json::array();
    nlohmann::json series = nlohmann::json::array();
    const auto& fractions = config.at("fractions");
    const auto& frameworks = config.at("frameworks");
    for (const auto& fw : frameworks) {
        nlohmann::json s_fracs = nlohmann::json::array();
        nlohmann::json s_means = nlohmann::json::array();
        for (const auto& fr : fractions) {
            std::vector<const CellResult*> group;
            for (const CellResult& c : cells)
                if (c.ok() && c.framework == fw.get<std::string>() &&
                    c.fraction == fr.get<double>())
                    group.push_back(&c);
            if (group.empty()) continue;
            nlohmann::json metrics;
            for (const auto& [mname, get] : metric_table()) {
                double sum = 0, sq = 0;
                for (const CellResult* c : group) {
                    const double v = get(*c);
                    sum += v;
                    sq += v * v;
                }
                const double n = static_cast<double>(group.size());
                const double mean = sum / n;
                const double var = std::max(0.0, sq / n - mean * mean);
                metrics[mname] = {{"mean", mean}, {"std", std::sqrt(var)}};
            }
            const double any_mean = metrics.at("pct_any").at("mean").get<double>();
            aggregates.push_back({{"fraction", fr},
                                  {"framework", fw},
                                  {"n_cells", group.size()},
                                  {"metrics", std::move(metrics)}});
            s_fracs.push_back(fr);
            s_means.push_back(any_mean);
        }
        series.push_back({{"framework", fw},
                          {"fractions", std::move(s_fracs)},
                          {"pct_any_mean", std::move(s_means)}});
    }
    return {{"config", config},
            {"cells", std::move(cells_json)},
            {"aggregates", std::move(aggregates)},
            {"series", std::move(series)},
            {"total_runtime_s", total_runtime_s}};
}

std::string ExperimentReport::to_csv() const {
    std::string out = "fraction,framework,seed,metric,value,config_hash\n";
    for (const CellResult& c : cells) {
        if (!c.ok()) continue;
        for (const auto& [name, get] : metric_table()) {
            out += format_value(c.fraction);
            out += ',';
            out += c.framework;
            out += ',';
            out += std::to_string(c.seed);
            out += ',';
            out += name;
            out += ',';
            out += format_value(get(c));
            out += ',';
            out += format_hash(c.config_hash);
            out += '\n';
        }
    }
    return out;
}

void write_report(const ExperimentReport& rep, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream f(fs::path(out_dir) / "report.json");
        if (!f) throw Error("IoError", "cannot write report.json under " + out_dir);
        f << rep.to_json().dump(2) << '\n';
    }
    {
        std::ofstream f(fs::path(out_dir) / "report.csv");
        if (!f) throw Error("IoError", "cannot write report.csv under " + out_dir);
        f << rep.to_csv();
    }
    {
        std::ofstream f(fs::path(out_dir) / "series.csv");
        if (!f) throw Error("IoError", "cannot write series.csv under " + out_dir);
        f << "framework,fraction,pct_any_mean\n";
        const nlohmann::json j = rep.to_json();
        for (const auto& s : j.at("series")) {
            const auto& fr = s.at("fractions");
            const auto& mn = s.at("pct_any_mean");
            for (std::size_t k = 0; k < fr.size(); ++k)
                f << s.at("framework").get<std::string>() << ',' << format_value(fr[k]) << ','
                  << format_value(mn[k]) << '\n';
        }
    }
}

}  // namespace vap::eval
