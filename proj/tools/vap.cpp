#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include <vap/ace.hpp>
#include <vap/data/io.hpp>
#include <vap/errors.hpp>
#include <vap/eval.hpp>
#include <vap/mapping.hpp>
#include <vap/roadmap.hpp>

namespace {

using nlohmann::json;
using namespace vap;

void add_sim_options(CLI::App* cmd, sim::SimConfig& sc) {
    cmd->add_option("--columns", sc.columns, "grid columns");
    cmd->add_option("--max-height", sc.max_height, "stack height limit");
    cmd->add_option("--boxes", sc.n_boxes, "number of boxes");
    cmd->add_option("--image-side", sc.image_side, "rendered image side in pixels");
    cmd->add_option("--position-noise", sc.position_noise, "box placement jitter");
    cmd->add_option("--brightness-lo", sc.brightness_lo, "brightness range lower bound");
    cmd->add_option("--brightness-hi", sc.brightness_hi, "brightness range upper bound");
}

void add_train_options(CLI::App* cmd, nn::TrainConfig& tc) {
    cmd->add_option("--epochs", tc.epochs, "training epochs");
    cmd->add_option("--batch", tc.batch_size, "minibatch size");
    cmd->add_option("--lr", tc.learning_rate, "learning rate");
    cmd->add_option("--seed", tc.seed, "weight init and shuffle seed");
}

void add_mm_options(CLI::App* cmd, mapping::MmConfig& mc) {
    cmd->add_option("--latent", mc.latent_dim, "latent dimension");
    cmd->add_option("--hidden", mc.hidden, "encoder hidden widths")->delimiter(',');
    cmd->add_option("--beta-kl", mc.weights.beta_kl, "KL weight");
    cmd->add_option("--gamma", mc.weights.gamma_action, "action-pair repulsion weight");
    cmd->add_option("--margin", mc.weights.margin, "action-pair distance margin");
    add_train_options(cmd, mc.train);
}

void add_lpm_options(CLI::App* cmd, dyn::LpmConfig& lc) {
    cmd->add_option("--hidden", lc.hidden, "hidden widths")->delimiter(',');
    add_train_options(cmd, lc.train);
}

void add_sm_options(CLI::App* cmd, suggest::SmConfig& sc) {
    cmd->add_option("--dim", sc.sm_dim, "embedding dimension");
    cmd->add_option("--hidden", sc.hidden, "hidden widths")->delimiter(',');
    cmd->add_option("--margin", sc.margin, "dissimilar-pair margin");
    add_train_options(cmd, sc.train);
}

ace::SortOrder parse_sort(const std::string& s) {
    if (s == "descending") return ace::SortOrder::descending;
    if (s == "ascending") return ace::SortOrder::ascending;
    throw ShapeError("sort order must be ascending or descending");
}

ace::AugmentMode parse_augment(const std::string& s) {
    if (s == "off") return ace::AugmentMode::off;
    if (s == "ace") return ace::AugmentMode::ace;
    if (s == "baseline") return ace::AugmentMode::baseline;
    throw ShapeError("augment mode must be off, ace or baseline");
}

ace::ExploreMode parse_explore(const std::string& s) {
    if (s == "off") return ace::ExploreMode::off;
    if (s == "ace") return ace::ExploreMode::ace;
    if (s == "baseline") return ace::ExploreMode::baseline;
    throw ShapeError("explore mode must be off, ace or baseline");
}

// Radius shared by build-lsr, augment and connect: explicit --eps wins,
// otherwise mean + w * spread of the similar-pair distances.
float resolve_eps(float eps, float w, const mapping::MmModel& mm, const data::Dataset& ds) {
    if (eps > 0) return eps;
    return mapping::epsilon(mapping::latent_stats(mm, ds), w);
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open " + path);
    json j;
    in >> j;
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("IoError", "cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

template <typename T>
void maybe(const json& j, const char* key, T& into) {
    if (j.contains(key)) into = j.at(key).get<T>();
}

eval::ExperimentConfig parse_experiment_config(const json& j) {
    eval::ExperimentConfig cfg;
    if (j.contains("sim")) {
        const json& s = j.at("sim");
        maybe(s, "columns", cfg.sim.columns);
        maybe(s, "max_height", cfg.sim.max_height);
        maybe(s, "n_boxes", cfg.sim.n_boxes);
        maybe(s, "image_side", cfg.sim.image_side);
        maybe(s, "position_noise", cfg.sim.position_noise);
        maybe(s, "brightness_lo", cfg.sim.brightness_lo);
        maybe(s, "brightness_hi", cfg.sim.brightness_hi);
    }
    maybe(j, "n_train_pairs", cfg.n_train_pairs);
    maybe(j, "similar_fraction", cfg.similar_fraction);
    maybe(j, "n_test_queries", cfg.n_test_queries);
    maybe(j, "n_validation_queries", cfg.n_validation_queries);
    maybe(j, "holdout_size", cfg.holdout_size);
    maybe(j, "fractions", cfg.fractions);
    maybe(j, "frameworks", cfg.frameworks);
    maybe(j, "seeds", cfg.seeds);
    maybe(j, "w_grid", cfg.w_grid);
    maybe(j, "w_nominal", cfg.w_nominal);
    maybe(j, "n_e", cfg.n_e);
    maybe(j, "max_paths", cfg.max_paths);
    maybe(j, "data_seed", cfg.data_seed);
    if (j.contains("model")) {
        const json& m = j.at("model");
        maybe(m, "latent_dim", cfg.base.mm.latent_dim);
        maybe(m, "mm_hidden", cfg.base.mm.hidden);
        maybe(m, "mm_epochs", cfg.base.mm.train.epochs);
        maybe(m, "mm_batch", cfg.base.mm.train.batch_size);
        maybe(m, "mm_lr", cfg.base.mm.train.learning_rate);
        maybe(m, "mm_margin", cfg.base.mm.weights.margin);
        maybe(m, "beta_kl", cfg.base.mm.weights.beta_kl);
        maybe(m, "gamma_action", cfg.base.mm.weights.gamma_action);
        maybe(m, "lpm_hidden", cfg.base.lpm.hidden);
        maybe(m, "lpm_epochs", cfg.base.lpm.train.epochs);
        maybe(m, "sm_dim", cfg.base.sm.sm_dim);
        maybe(m, "sm_hidden", cfg.base.sm.hidden);
        maybe(m, "sm_epochs", cfg.base.sm.train.epochs);
        maybe(m, "sm_margin", cfg.base.sm.margin);
        maybe(m, "min_cluster_size", cfg.base.cluster.min_cluster_size);
        maybe(m, "rho_gate", cfg.base.rho_gate);
        if (m.contains("sort_order"))
            cfg.base.sort_order = parse_sort(m.at("sort_order").get<std::string>());
    }
    return cfg;
}

json plan_metrics_json(const eval::PlanMetrics& m) {
    return {{"pct_trans", m.pct_trans}, {"pct_all", m.pct_all}, {"pct_any", m.pct_any}};
}

int run(CLI::App& app, int argc, char** argv) {
    // gen-data
    auto* gen = app.add_subcommand("gen-data", "render a training dataset and query sets");
    sim::SimConfig gen_sim;
    int gen_pairs = 2500, gen_queries = 0, gen_holdout = 2500;
    double gen_similar = 0.2;
    std::uint64_t gen_seed = 1000;
    std::string gen_out, gen_queries_out;
    add_sim_options(gen, gen_sim);
    gen->add_option("--pairs", gen_pairs, "number of training tuples");
    gen->add_option("--similar", gen_similar, "similar-pair fraction");
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--out", gen_out, "dataset output path")->required();
    gen->add_option("--queries-out", gen_queries_out, "query set output path");
    gen->add_option("--n-queries", gen_queries, "queries to sample from the holdout");
    gen->add_option("--holdout", gen_holdout, "holdout observation count");
    gen->callback([&] {
        const data::Dataset ds = data::generate_dataset(gen_sim, gen_pairs, gen_similar, gen_seed);
        data::save_dataset(ds, gen_out);
        json out = {{"tuples", ds.tuples.size()},
                    {"action_pairs", ds.n_action_pairs()},
                    {"similar_pairs", ds.n_similar_pairs()}};
        if (!gen_queries_out.empty()) {
            const data::QuerySet qs =
                data::make_queries(gen_sim, gen_queries, gen_holdout, gen_seed + 1);
            data::save_queries(qs, gen_queries_out);
            out["queries"] = qs.queries.size();
        }
        std::cout << out.dump(2) << '\n';
    });

    // subsample
    auto* sub = app.add_subcommand("subsample", "uniform subset of a dataset");
    std::string sub_in, sub_out;
    double sub_fraction = 1.0;
    std::uint64_t sub_seed = 0;
    sub->add_option("--in", sub_in, "input dataset")->required();
    sub->add_option("--fraction", sub_fraction, "kept fraction")->required();
    sub->add_option("--seed", sub_seed, "sampling seed");
    sub->add_option("--out", sub_out, "output dataset")->required();
    sub->callback([&] {
        const data::Dataset ds = data::subsample(data::load_dataset(sub_in), sub_fraction, sub_seed);
        data::save_dataset(ds, sub_out);
        std::cout << json{{"tuples", ds.tuples.size()}}.dump(2) << '\n';
    });

    // train mm|lpm|sm
    auto* train = app.add_subcommand("train", "fit a model on a dataset");
    train->require_subcommand(1);
    std::string tr_data, tr_out, tr_mm, tr_index_out;

    auto* tmm = train->add_subcommand("mm", "variational mapper with contrastive latent shaping");
    mapping::MmConfig mm_cfg;
    tmm->add_option("--data", tr_data, "training dataset")->required();
    tmm->add_option("--out", tr_out, "model output path")->required();
    add_mm_options(tmm, mm_cfg);
    tmm->callback([&] {
        const data::Dataset ds = data::load_dataset(tr_data);
        const mapping::MmModel mm = mapping::train_mm(ds, mm_cfg);
        mapping::save_mm(tr_out, mm);
        const auto st = mapping::latent_stats(mm, ds);
        std::cout << json{{"mu0", st.mu0}, {"sigma0", st.sigma0}}.dump(2) << '\n';
    });

    auto* tlpm = train->add_subcommand("lpm", "latent action dynamics predictor");
    dyn::LpmConfig lpm_cfg;
    tlpm->add_option("--data", tr_data, "training dataset")->required();
    tlpm->add_option("--mm", tr_mm, "mapper supplying the latents")->required();
    tlpm->add_option("--out", tr_out, "model output path")->required();
    add_lpm_options(tlpm, lpm_cfg);
    tlpm->callback([&] {
        const data::Dataset ds = data::load_dataset(tr_data);
        const dyn::LpmModel lpm = dyn::train_lpm(ds, mapping::load_mm(tr_mm), lpm_cfg);
        dyn::save_lpm(tr_out, lpm);
        std::cout << json{{"saved", tr_out}}.dump(2) << '\n';
    });

    auto* tsm = train->add_subcommand("sm", "action-similarity embedding and suggestion index");
    suggest::SmConfig sm_cfg;
    suggest::ClusterConfig cl_cfg;
    tsm->add_option("--data", tr_data, "training dataset")->required();
    tsm->add_option("--out", tr_out, "model output path")->required();
    tsm->add_option("--index-out", tr_index_out, "suggestion index output path");
    tsm->add_option("--min-cluster", cl_cfg.min_cluster_size, "density cluster size floor");
    add_sm_options(tsm, sm_cfg);
    tsm->callback([&] {
        const data::Dataset ds = data::load_dataset(tr_data);
        const suggest::SMParams sm = suggest::train_sm(data::build_sm_dataset(ds), sm_cfg);
        suggest::save_sm(tr_out, sm);
        json out = {{"saved", tr_out}};
        if (!tr_index_out.empty()) {
            const suggest::SuggestionIndex idx = suggest::build_index(sm, ds, cl_cfg);
            suggest::save_index(tr_index_out, idx);
            out["clusters"] = idx.n_clusters();
        }
        std::cout << out.dump(2) << '\n';
    });

    // build-lsr
    auto* build = app.add_subcommand("build-lsr", "cluster latents into a roadmap");
    std::string b_data, b_mm, b_out;
    float b_eps = 0, b_w = -0.35f;
    build->add_option("--data", b_data, "dataset")->required();
    build->add_option("--mm", b_mm, "mapper model")->required();
    build->add_option("--out", b_out, "roadmap output path")->required();
    build->add_option("--eps", b_eps, "clustering radius, overrides --w");
    build->add_option("--w", b_w, "radius scale: mean + w * spread");
    build->callback([&] {
        const data::Dataset ds = data::load_dataset(b_data);
        const mapping::MmModel mm = mapping::load_mm(b_mm);
        const float eps = resolve_eps(b_eps, b_w, mm, ds);
        const roadmap::Roadmap rm = roadmap::build_lsr(mm, ds, eps);
        roadmap::save_roadmap(rm, b_out);
        std::cout << json{{"eps", eps}, {"nodes", rm.n_nodes()}, {"edges", rm.edges.size()}}
                         .dump(2)
                  << '\n';
    });

    // ace augment|connect|explore|integrate
    auto* ace_cmd = app.add_subcommand("ace", "augmentation, shortcuts and exploration");
    ace_cmd->require_subcommand(1);
    std::string a_data, a_mm, a_lpm, a_sm, a_index, a_roadmap, a_out, a_log_out, a_sort =
        "descending";
    float a_eps = 0, a_w = -0.35f, a_r = 0, a_rho = 1.0f;

    auto* aug = ace_cmd->add_subcommand("augment", "mine new similar pairs into the dataset");
    aug->add_option("--data", a_data, "dataset")->required();
    aug->add_option("--mm", a_mm, "mapper model")->required();
    aug->add_option("--lpm", a_lpm, "dynamics model")->required();
    aug->add_option("--sm", a_sm, "similarity model")->required();
    aug->add_option("--index", a_index, "suggestion index")->required();
    aug->add_option("--out", a_out, "augmented dataset output")->required();
    aug->add_option("--r", a_r, "candidate radius, defaults to the similar-pair mean");
    aug->add_option("--eps", a_eps, "covered-space radius, overrides --w");
    aug->add_option("--w", a_w, "radius scale: mean + w * spread");
    aug->add_option("--rho", a_rho, "reliability gate multiplier");
    aug->add_option("--sort", a_sort, "candidate order: descending or ascending");
    aug->callback([&] {
        const data::Dataset ds = data::load_dataset(a_data);
        const mapping::MmModel mm = mapping::load_mm(a_mm);
        ace::AceConfig cfg;
        cfg.r = a_r > 0 ? a_r : mapping::latent_stats(mm, ds).mu0;
        cfg.eps = resolve_eps(a_eps, a_w, mm, ds);
        cfg.rho_gate = a_rho;
        cfg.sort_order = parse_sort(a_sort);
        const CoveredSpace covered = CoveredSpace::from_dataset(mm, ds, cfg.eps);
        const data::Dataset out = ace::augment(ds, suggest::load_sm(a_sm),
                                               suggest::load_index(a_index),
                                               dyn::load_lpm(a_lpm), covered, cfg);
        data::save_dataset(out, a_out);
        std::cout << json{{"n_new", out.tuples.size() - ds.tuples.size()},
                          {"r", cfg.r},
                          {"eps", cfg.eps}}
                         .dump(2)
                  << '\n';
    });

    auto* con = ace_cmd->add_subcommand("connect", "insert suggested shortcut edges");
    con->add_option("--roadmap", a_roadmap, "input roadmap")->required();
    con->add_option("--data", a_data, "dataset the roadmap was built from")->required();
    con->add_option("--mm", a_mm, "mapper model")->required();
    con->add_option("--lpm", a_lpm, "dynamics model")->required();
    con->add_option("--sm", a_sm, "similarity model")->required();
    con->add_option("--index", a_index, "suggestion index")->required();
    con->add_option("--out", a_out, "roadmap output")->required();
    con->add_option("--eps", a_eps, "gate radius, overrides --w");
    con->add_option("--w", a_w, "radius scale: mean + w * spread");
    con->add_option("--rho", a_rho, "reliability gate multiplier");
    con->callback([&] {
        const data::Dataset ds = data::load_dataset(a_data);
        const mapping::MmModel mm = mapping::load_mm(a_mm);
        const float eps = resolve_eps(a_eps, a_w, mm, ds);
        const ace::ConnectResult res =
            ace::connect(roadmap::load_roadmap(a_roadmap), mm, suggest::load_sm(a_sm),
                         suggest::load_index(a_index), dyn::load_lpm(a_lpm), eps, a_rho);
        roadmap::save_roadmap(res.rm, a_out);
        std::cout << json{{"n_added", res.n_added}, {"eps", eps}}.dump(2) << '\n';
    });

    auto* exp = ace_cmd->add_subcommand("explore", "collect new action pairs from the environment");
    int e_steps = 500;
    std::uint64_t e_seed = 7;
    exp->add_option("--data", a_data, "dataset")->required();
    exp->add_option("--mm", a_mm, "mapper model")->required();
    exp->add_option("--lpm", a_lpm, "dynamics model")->required();
    exp->add_option("--sm", a_sm, "similarity model")->required();
    exp->add_option("--index", a_index, "suggestion index")->required();
    exp->add_option("--out", a_out, "extended dataset output")->required();
    exp->add_option("--log-out", a_log_out, "step log output (JSON)");
    exp->add_option("--n-e", e_steps, "exploration steps");
    exp->add_option("--env-seed", e_seed, "environment seed");
    exp->callback([&] {
        const data::Dataset ds = data::load_dataset(a_data);
        sim::SimEnv env(ds.sim, e_seed);
        ace::ExploreOutcome out =
            ace::run_exploration(env, ds, mapping::load_mm(a_mm), suggest::load_sm(a_sm),
                                 suggest::load_index(a_index), dyn::load_lpm(a_lpm), e_steps);
        data::save_dataset(out.ds, a_out);
        const json summary = {{"n_steps", out.log.n_steps()},
                              {"n_valid", out.log.n_valid()},
                              {"pct_explore", eval::eval_explore(out.log)}};
        if (!a_log_out.empty()) write_json_file(a_log_out, summary);
        std::cout << summary.dump(2) << '\n';
    });

    auto* integ = ace_cmd->add_subcommand("integrate", "full pipeline into an output directory");
    ace::IntegrateConfig icfg;
    std::string i_data, i_out_dir, i_augment = "ace", i_explore = "ace", i_sort = "descending";
    std::uint64_t i_env_seed = 7;
    bool i_no_connect = false;
    integ->add_option("--data", i_data, "dataset")->required();
    integ->add_option("--out-dir", i_out_dir, "artifact directory")->required();
    integ->add_option("--augment", i_augment, "off, ace or baseline");
    integ->add_option("--explore", i_explore, "off, ace or baseline");
    integ->add_flag("--no-connect", i_no_connect, "skip shortcut insertion");
    integ->add_option("--n-e", icfg.n_e, "exploration steps");
    integ->add_option("--w", icfg.w_eps, "radius scale: mean + w * spread");
    integ->add_option("--rho", icfg.rho_gate, "reliability gate multiplier");
    integ->add_option("--sort", i_sort, "candidate order: descending or ascending");
    integ->add_option("--r-override", icfg.r_override, "fixed augmentation radius");
    integ->add_option("--eps-override", icfg.eps_override, "fixed clustering radius");
    integ->add_option("--env-seed", i_env_seed, "environment seed");
    integ->add_option("--baseline-seed", icfg.baseline_seed, "baseline explorer action seed");
    integ->add_option("--latent", icfg.mm.latent_dim, "mapper latent dimension");
    integ->add_option("--mm-hidden", icfg.mm.hidden, "mapper hidden widths")->delimiter(',');
    integ->add_option("--mm-epochs", icfg.mm.train.epochs, "mapper epochs");
    integ->add_option("--beta-kl", icfg.mm.weights.beta_kl, "KL weight");
    integ->add_option("--gamma", icfg.mm.weights.gamma_action, "action-pair repulsion weight");
    integ->add_option("--lpm-hidden", icfg.lpm.hidden, "dynamics hidden widths")->delimiter(',');
    integ->add_option("--lpm-epochs", icfg.lpm.train.epochs, "dynamics epochs");
    integ->add_option("--sm-dim", icfg.sm.sm_dim, "similarity embedding dimension");
    integ->add_option("--sm-hidden", icfg.sm.hidden, "similarity hidden widths")->delimiter(',');
    integ->add_option("--sm-epochs", icfg.sm.train.epochs, "similarity epochs");
    integ->add_option("--min-cluster", icfg.cluster.min_cluster_size, "density cluster floor");
    integ->add_option("--seed", icfg.mm.train.seed, "mapper training seed");
    integ->callback([&] {
        icfg.augment = parse_augment(i_augment);
        icfg.explore = parse_explore(i_explore);
        icfg.connect = !i_no_connect;
        icfg.sort_order = parse_sort(i_sort);
        const data::Dataset ds = data::load_dataset(i_data);
        sim::SimEnv env(ds.sim, i_env_seed);
        const ace::IntegrateResult res = ace::integrate(ds, env, icfg);
        const std::filesystem::path dir(i_out_dir);
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw Error("IoError", "cannot create " + i_out_dir);
        roadmap::save_roadmap(res.rm, (dir / "roadmap.vap").string());
        data::save_dataset(res.ds, (dir / "dataset.vap").string());
        mapping::save_mm((dir / "mm.vap").string(), res.mm);
        dyn::save_lpm((dir / "lpm.vap").string(), res.lpm);
        suggest::save_sm((dir / "sm.vap").string(), res.sm);
        suggest::save_index((dir / "index.vap").string(), res.index);
        write_json_file((dir / "provenance.json").string(), res.provenance);
        std::cout << json{{"nodes", res.rm.n_nodes()},
                          {"n_aug_pairs", res.n_aug_pairs},
                          {"n_shortcuts", res.n_shortcuts},
                          {"pct_explore", eval::eval_explore(res.explore_log)},
                          {"r", res.r},
                          {"eps", res.eps}}
                         .dump(2)
                  << '\n';
    });

    // eval
    auto* ev = app.add_subcommand("eval", "score a roadmap against the simulator oracle");
    std::string ev_roadmap, ev_mm, ev_queries;
    int ev_max_paths = 10;
    ev->add_option("--roadmap", ev_roadmap, "roadmap")->required();
    ev->add_option("--mm", ev_mm, "mapper model")->required();
    ev->add_option("--queries", ev_queries, "query set")->required();
    ev->add_option("--max-paths", ev_max_paths, "plans per query");
    ev->callback([&] {
        const data::QuerySet qs = data::load_queries(ev_queries);
        const sim::TransitionGraph oracle(qs.sim);
        const roadmap::Roadmap rm = roadmap::load_roadmap(ev_roadmap);
        const eval::PlanMetrics m =
            eval::eval_plans(rm, mapping::load_mm(ev_mm), qs, oracle, ev_max_paths);
        const eval::PairScore edges = eval::eval_edges(rm, oracle);
        json out = plan_metrics_json(m);
        out["edges"] = {{"n", edges.n}, {"pct", edges.pct}};
        std::cout << out.dump(2) << '\n';
    });

    // experiment
    auto* ex = app.add_subcommand("experiment", "run the fraction x framework x seed grid");
    std::string ex_config, ex_out_dir = ".";
    ex->add_option("--config", ex_config, "experiment config (JSON)");
    ex->add_option("--out-dir", ex_out_dir, "report directory");
    ex->callback([&] {
        const eval::ExperimentConfig cfg =
            ex_config.empty() ? eval::ExperimentConfig{}
                              : parse_experiment_config(read_json_file(ex_config));
        const eval::ExperimentReport rep = eval::run_experiment(cfg);
        eval::write_report(rep, ex_out_dir);
        int failed = 0;
        for (const auto& c : rep.cells)
            if (!c.ok()) ++failed;
        std::cout << json{{"cells", rep.cells.size()},
                          {"failed", failed},
                          {"total_runtime_s", rep.total_runtime_s},
                          {"out_dir", ex_out_dir}}
                         .dump(2)
                  << '\n';
        if (failed > 0) throw Error("CellError", std::to_string(failed) + " cells failed");
    });

    // report
    auto* rep_cmd = app.add_subcommand("report", "summarize a saved experiment report");
    std::string rp_in;
    bool rp_series = false;
    rep_cmd->add_option("--in", rp_in, "report.json path")->required();
    rep_cmd->add_flag("--series", rp_series, "print plot series as CSV instead");
    rep_cmd->callback([&] {
        const json j = read_json_file(rp_in);
        if (rp_series) {
            std::cout << "framework,fraction,pct_any_mean\n";
            for (const auto& s : j.at("series")) {
                const auto& fr = s.at("fractions");
                const auto& ys = s.at("pct_any_mean");
                for (std::size_t i = 0; i < fr.size(); ++i)
                    std::cout << s.at("framework").get<std::string>() << ','
                              << fr[i].get<double>() << ',' << ys[i].get<double>() << '\n';
            }
            return;
        }
        std::printf("%-10s %-9s %6s %7s %7s %7s %7s\n", "framework", "fraction", "cells",
                    "any", "all", "trans", "explore");
        for (const auto& a : j.at("aggregates")) {
            const auto& m = a.at("metrics");
            const auto mean = [&](const char* k) {
                return m.at(k).at("mean").get<double>();
            };
            std::printf("%-10s %-9.2f %6d %7.1f %7.1f %7.1f %7.1f\n",
                        a.at("framework").get<std::string>().c_str(),
                        a.at("fraction").get<double>(), a.at("n_cells").get<int>(),
                        mean("pct_any"), mean("pct_all"), mean("pct_trans"),
                        mean("pct_explore"));
        }
    });

    app.require_subcommand(1);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << json{{"error", "UsageError"}, {"message", e.what()}}.dump() << '\n';
        return e.get_exit_code();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent space roadmaps with augment-connect-explore"};
    try {
        return run(app, argc, argv);
    } catch (const Error& e) {
        std::cerr << json{{"error", e.kind}, {"message", e.what()}}.dump() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "Unhandled"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
}
