#include <vap/ace.hpp>

#include <algorithm>
#include <limits>
#include <utility>

#include <vap/rng.hpp>

namespace vap::ace {
namespace {

const sim::Observation& column_obs(const data::Dataset& ds, Index c) {
    const data::TrainingTuple& t = ds.tuples[static_cast<std::size_t>(c / 2)];
    return (c % 2 == 0) ? t.obs_a : t.obs_b;
}

// Gated per-action prediction outcomes of one covered point: which actions
// pass the reliability gate, and the multiset of nearest covered points the
// passing predictions resolve to.
struct Profile {
    std::vector<char> gate;
    std::vector<Index> nearest;
};

Profile make_profile(const CoveredSpace& covered, const Vec& z,
                     const std::vector<sim::GridAction>& actions, const dyn::LpmModel& lpm,
                     float rho_gate) {
    Profile p;
    p.gate.reserve(actions.size());
    for (const sim::GridAction& u : actions) {
        const auto pred = dyn::predict_reliable(lpm, z, u, covered, rho_gate);
        p.gate.push_back(pred ? 1 : 0);
        if (pred) p.nearest.push_back(covered.nearest(*pred).first);
    }
    std::sort(p.nearest.begin(), p.nearest.end());
    return p;
}

const char* mode_name(AugmentMode m) {
    switch (m) {
        case AugmentMode::off: return "off";
        case AugmentMode::ace: return "ace";
        case AugmentMode::baseline: return "baseline";
    }
    return "off";
}

const char* mode_name(ExploreMode m) {
    switch (m) {
        case ExploreMode::off: return "off";
        case ExploreMode::ace: return "ace";
        case ExploreMode::baseline: return "baseline";
    }
    return "off";
}

}  // namespace

std::vector<AugmentPair> augment_pairs(
    const CoveredSpace& covered, const std::vector<std::vector<sim::GridAction>>& suggestions,
    const dyn::LpmModel& lpm, float r, SortOrder order, float rho_gate) {
    const Index n = covered.size();
    if (static_cast<Index>(suggestions.size()) != n)
        throw ShapeError("augment_pairs: one suggestion set per covered point required");
    if (r <= 0) throw ShapeError("augment_pairs: r must be positive");
    if (rho_gate <= 0) throw ShapeError("augment_pairs: rho_gate must be positive");

    std::vector<std::optional<Profile>> profiles(static_cast<std::size_t>(n));
    const auto profile = [&](Index c) -> const Profile& {
        auto& slot = profiles[static_cast<std::size_t>(c)];
        if (!slot)
            slot = make_profile(covered, covered.point(c),
                                suggestions[static_cast<std::size_t>(c)], lpm, rho_gate);
        return *slot;
    };

    std::vector<AugmentPair> out;
    std::vector<std::pair<float, Index>> cands;
    for (Index i = 0; i < n; ++i) {
        const Eigen::RowVectorXf dist =
            (covered.points().colwise() - covered.point(i)).cwiseAbs().colwise().sum();
        cands.clear();
        for (Index j = 0; j < n; ++j)
            if (j != i && dist(j) <= r) cands.emplace_back(dist(j), j);
        if (order == SortOrder::descending)
            std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first > b.first : a.second < b.second;
            });
        else
            std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first < b.first : a.second < b.second;
            });
        for (const auto& [d, j] : cands) {
            if (suggestions[static_cast<std::size_t>(i)] !=
                suggestions[static_cast<std::size_t>(j)])
                continue;
            const Profile& pi = profile(i);
            const Profile& pj = profile(j);
            if (pi.gate != pj.gate || pi.nearest != pj.nearest) continue;
            out.push_back({i, j});
            break;
        }
    }
    return out;
}

data::Dataset augment(const data::Dataset& ds, const suggest::SMParams& sm,
                      const suggest::SuggestionIndex& idx, const dyn::LpmModel& lpm,
                      const CoveredSpace& covered, const AceConfig& cfg) {
    cfg.validate();
    if (covered.size() != static_cast<Index>(2 * ds.tuples.size()))
        throw ShapeError("augment: covered space does not match the dataset");

    std::vector<std::vector<sim::GridAction>> suggestions;
    suggestions.reserve(static_cast<std::size_t>(covered.size()));
    for (const data::TrainingTuple& t : ds.tuples) {
        suggestions.push_back(suggest::suggest(idx, sm, t.obs_a));
        suggestions.push_back(suggest::suggest(idx, sm, t.obs_b));
    }
    const auto pairs =
        augment_pairs(covered, suggestions, lpm, cfg.r, cfg.sort_order, cfg.rho_gate);

    data::Dataset out = ds;
    for (const AugmentPair& p : pairs) {
        data::TrainingTuple t;
        t.obs_a = column_obs(ds, p.i);
        t.obs_b = column_obs(ds, p.j);
        t.is_action = false;
        out.tuples.push_back(std::move(t));
    }
    out.provenance["augment"] = {
        {"mode", "ace"},
        {"r", cfg.r},
        {"sort", cfg.sort_order == SortOrder::descending ? "descending" : "ascending"},
        {"n_new", pairs.size()}};
    return out;
}

data::Dataset augment_baseline(const data::Dataset& ds, const mapping::MmModel& mm,
                               float radius) {
    if (radius <= 0) throw ShapeError("augment_baseline: radius must be positive");
    data::Dataset out = ds;
    std::size_t n_new = 0;
    if (!ds.tuples.empty()) {
        const CoveredSpace covered = CoveredSpace::from_dataset(mm, ds, radius);
        const Index n = covered.size();
        for (Index i = 0; i < n; ++i) {
            Eigen::RowVectorXf dist =
                (covered.points().colwise() - covered.point(i)).cwiseAbs().colwise().sum();
            dist(i) = std::numeric_limits<float>::infinity();
            Index j = 0;
            const float d = dist.minCoeff(&j);
            if (d > radius) continue;
            data::TrainingTuple t;
            t.obs_a = column_obs(ds, i);
            t.obs_b = column_obs(ds, j);
            t.is_action = false;
            out.tuples.push_back(std::move(t));
            ++n_new;
        }
    }
    out.provenance["augment"] = {{"mode", "baseline"}, {"radius", radius}, {"n_new", n_new}};
    return out;
}

ConnectResult connect_suggested(const roadmap::Roadmap& rm,
                                const std::vector<std::vector<sim::GridAction>>& node_actions,
                                const dyn::LpmModel& lpm, float eps, float rho_gate) {
    if (static_cast<int>(node_actions.size()) != rm.n_nodes())
        throw ShapeError("connect_suggested: one action set per node required");
    if (eps <= 0) throw ShapeError("connect_suggested: eps must be positive");
    if (rho_gate <= 0) throw ShapeError("connect_suggested: rho_gate must be positive");

    ConnectResult res{rm, 0};
    if (rm.n_nodes() < 2) return res;
    for (int i = 0; i < rm.n_nodes(); ++i) {
        const Vec& zi = rm.nodes[static_cast<std::size_t>(i)].representative;
        for (const sim::GridAction& u : node_actions[static_cast<std::size_t>(i)]) {
            const Vec zn = dyn::predict(lpm, zi, u);
            const auto [j, d] = roadmap::nearest_node(rm, zn, i);
            if (d >= eps * rho_gate) continue;
            if (res.rm.edge(i, j)) continue;
            res.rm.edges.emplace(std::make_pair(i, j), roadmap::shortcut_edge(u));
            ++res.n_added;
        }
    }
    return res;
}

ConnectResult connect(const roadmap::Roadmap& rm, const mapping::MmModel& mm,
                      const suggest::SMParams& sm, const suggest::SuggestionIndex& idx,
                      const dyn::LpmModel& lpm, float eps, float rho_gate) {
    std::vector<std::vector<sim::GridAction>> node_actions;
    node_actions.reserve(static_cast<std::size_t>(rm.n_nodes()));
    for (const roadmap::Node& node : rm.nodes)
        node_actions.push_back(
            suggest::suggest(idx, sm, mapping::decode(mm, node.representative)));
    return connect_suggested(rm, node_actions, lpm, eps, rho_gate);
}

ExploreChoice choose_exploration(const Vec& z, const std::vector<sim::GridAction>& suggested,
                                 const std::optional<sim::GridAction>& last_action,
                                 const dyn::LpmModel& lpm, const Mat& covered_points) {
    if (covered_points.cols() == 0) throw EmptyIndex("choose_exploration: no covered points");
    if (covered_points.rows() != z.size())
        throw ShapeError("choose_exploration: covered points do not match the latent size");

    std::optional<sim::GridAction> banned;
    if (last_action) banned = sim::reverse_action(*last_action);

    ExploreChoice choice;
    for (const sim::GridAction& u : suggested) {
        if (banned && u == *banned) continue;
        const Vec zn = dyn::predict(lpm, z, u);
        const float d = (covered_points.colwise() - zn).cwiseAbs().colwise().sum().minCoeff();
        choice.candidates.push_back({u, d});
    }
    if (choice.candidates.empty())
        throw NoCandidateActions("choose_exploration: nothing left after reverse removal");

    std::size_t best = 0;
    for (std::size_t k = 1; k < choice.candidates.size(); ++k)
        if (choice.candidates[k].d > choice.candidates[best].d) best = k;
    choice.u = choice.candidates[best].u;
    return choice;
}

ExploreChoice explore_step(const sim::Observation& obs, const mapping::MmModel& mm,
                           const suggest::SMParams& sm, const suggest::SuggestionIndex& idx,
                           const dyn::LpmModel& lpm, const Mat& covered_points,
                           const std::optional<sim::GridAction>& last_action) {
    return choose_exploration(mapping::encode(mm, obs), suggest::suggest(idx, sm, obs),
                              last_action, lpm, covered_points);
}

int ExploreLog::n_valid() const {
    int c = 0;
    for (const ExploreStepRecord& s : steps)
        if (s.valid) ++c;
    return c;
}

ExploreOutcome run_exploration(sim::SimEnv& env, const data::Dataset& ds,
                               const mapping::MmModel& mm, const suggest::SMParams& sm,
                               const suggest::SuggestionIndex& idx, const dyn::LpmModel& lpm,
                               int n_e) {
    if (n_e < 0) throw ShapeError("run_exploration: n_e must be nonnegative");
    ExploreOutcome out{ds, {}};
    if (n_e == 0) return out;
    if (ds.tuples.empty()) throw ShapeError("run_exploration: dataset is empty");

    // Covered points grow as valid pairs are appended; capacity is final.
    Mat pts(mm.latent_dim, static_cast<Index>(2 * ds.tuples.size()) + 2 * n_e);
    Index cnt = 0;
    {
        const Index d = ds.tuples[0].obs_a.pixels.size();
        Mat px(d, static_cast<Index>(2 * ds.tuples.size()));
        for (std::size_t i = 0; i < ds.tuples.size(); ++i) {
            px.col(static_cast<Index>(2 * i)) = ds.tuples[i].obs_a.pixels;
            px.col(static_cast<Index>(2 * i + 1)) = ds.tuples[i].obs_b.pixels;
        }
        pts.leftCols(px.cols()) = mapping::encode_batch(mm, px);
        cnt = px.cols();
    }

    std::optional<sim::GridAction> last;
    for (int step = 0; step < n_e; ++step) {
        const sim::Observation obs = env.observe();
        ExploreStepRecord rec;
        rec.state_label = obs.meta_label;
        ExploreChoice choice;
        try {
            choice = explore_step(obs, mm, sm, idx, lpm, pts.leftCols(cnt), last);
        } catch (const NoCandidateActions&) {
            out.log.steps.push_back(std::move(rec));
            env.reset_random();
            last.reset();
            continue;
        }
        rec.candidates = choice.candidates;
        rec.chosen = choice.u;
        rec.valid = env.step(choice.u);
        if (rec.valid) {
            const sim::Observation next = env.observe();
            pts.col(cnt++) = mapping::encode(mm, obs);
            pts.col(cnt++) = mapping::encode(mm, next);
            data::TrainingTuple t;
            t.obs_a = obs;
            t.obs_b = next;
            t.is_action = true;
            t.u = choice.u;
            out.ds.tuples.push_back(std::move(t));
            last = choice.u;
        } else {
            env.reset_random();
            last.reset();
        }
        out.log.steps.push_back(std::move(rec));
    }
    out.ds.provenance["explore"] = {
        {"mode", "ace"}, {"n_e", n_e}, {"n_valid", out.log.n_valid()}};
    return out;
}

ExploreOutcome explore_baseline(sim::SimEnv& env, int n_e, std::uint64_t seed) {
    if (n_e < 0) throw ShapeError("explore_baseline: n_e must be nonnegative");
    ExploreOutcome out;
    out.ds.sim = env.table().config();
    Rng rng(seed);
    const std::vector<sim::GridAction>& actions = env.table().actions();
    for (int step = 0; step < n_e; ++step) {
        const sim::Observation obs = env.observe();
        const sim::GridAction u =
            actions[static_cast<std::size_t>(rng.uniform_int(actions.size()))];
        ExploreStepRecord rec;
        rec.state_label = obs.meta_label;
        rec.chosen = u;
        rec.valid = env.step(u);
        if (rec.valid) {
            data::TrainingTuple t;
            t.obs_a = obs;
            t.obs_b = env.observe();
            t.is_action = true;
            t.u = u;
            out.ds.tuples.push_back(std::move(t));
        } else {
            env.reset_random();
        }
        out.log.steps.push_back(std::move(rec));
    }
    out.ds.provenance["explore"] = {
        {"mode", "baseline"}, {"n_e", n_e}, {"n_valid", out.log.n_valid()}, {"seed", seed}};
    return out;
}

IntegrateResult integrate(const data::Dataset& ds, sim::SimEnv& env,
                          const IntegrateConfig& cfg) {
    cfg.validate();
    if (ds.tuples.empty()) throw ShapeError("integrate: dataset is empty");

    IntegrateResult res;
    nlohmann::json stages = nlohmann::json::array();

    // Suggestion machinery only matters when some stage consumes it.
    const bool needs_suggest = cfg.augment == AugmentMode::ace ||
                               cfg.explore == ExploreMode::ace || cfg.connect;
    mapping::MmModel mm = mapping::train_mm(ds, cfg.mm);
    dyn::LpmModel lpm;
    suggest::SMParams sm;
    suggest::SuggestionIndex idx;
    if (needs_suggest) {
        lpm = dyn::train_lpm(ds, mm, cfg.lpm);
        sm = suggest::train_sm(data::build_sm_dataset(ds), cfg.sm);
        idx = suggest::build_index(sm, ds, cfg.cluster);
    }
    stages.push_back({{"stage", "build_models"},
                      {"n_tuples", ds.tuples.size()},
                      {"suggest_models", needs_suggest},
                      {"mm_seed", cfg.mm.train.seed},
                      {"lpm_seed", cfg.lpm.train.seed},
                      {"sm_seed", cfg.sm.train.seed}});

    const mapping::LatentStats stats1 = mapping::latent_stats(mm, ds);
    res.r = cfg.r_override > 0 ? cfg.r_override : stats1.mu0;
    data::Dataset aug = ds;
    if (cfg.augment == AugmentMode::ace) {
        const float eps1 =
            cfg.eps_override > 0 ? cfg.eps_override : mapping::epsilon(stats1, cfg.w_eps);
        const CoveredSpace covered = CoveredSpace::from_dataset(mm, ds, eps1);
        AceConfig acfg;
        acfg.r = res.r;
        acfg.eps = eps1;
        acfg.n_e = cfg.n_e;
        acfg.sort_order = cfg.sort_order;
        acfg.rho_gate = cfg.rho_gate;
        aug = augment(ds, sm, idx, lpm, covered, acfg);
    } else if (cfg.augment == AugmentMode::baseline) {
        aug = augment_baseline(ds, mm, res.r);
    }
    res.n_aug_pairs = static_cast<int>(aug.tuples.size() - ds.tuples.size());
    stages.push_back({{"stage", "augment"},
                      {"mode", mode_name(cfg.augment)},
                      {"r", res.r},
                      {"n_pairs", res.n_aug_pairs}});

    // Retraining on an unchanged dataset reproduces the same models, so it
    // only runs when augmentation found something.
    const bool retrained = res.n_aug_pairs > 0;
    if (retrained) {
        mm = mapping::train_mm(aug, cfg.mm);
        if (needs_suggest) {
            lpm = dyn::train_lpm(aug, mm, cfg.lpm);
            sm = suggest::train_sm(data::build_sm_dataset(aug), cfg.sm);
            idx = suggest::build_index(sm, aug, cfg.cluster);
        }
    }
    stages.push_back({{"stage", "rebuild_models"}, {"retrained", retrained}});

    data::Dataset full = aug;
    const int n_e = cfg.explore == ExploreMode::off ? 0 : cfg.n_e;
    if (cfg.explore == ExploreMode::ace && n_e > 0) {
        ExploreOutcome outcome = run_exploration(env, aug, mm, sm, idx, lpm, n_e);
        full = std::move(outcome.ds);
        res.explore_log = std::move(outcome.log);
    } else if (cfg.explore == ExploreMode::baseline && n_e > 0) {
        ExploreOutcome outcome = explore_baseline(env, n_e, cfg.baseline_seed);
        for (data::TrainingTuple& t : outcome.ds.tuples) full.tuples.push_back(std::move(t));
        full.provenance["explore"] = outcome.ds.provenance["explore"];
        res.explore_log = std::move(outcome.log);
    }
    stages.push_back({{"stage", "explore"},
                      {"mode", mode_name(cfg.explore)},
                      {"n_e", n_e},
                      {"n_valid", res.explore_log.n_valid()}});

    const mapping::LatentStats stats2 =
        retrained ? mapping::latent_stats(mm, full) : stats1;
    res.eps = cfg.eps_override > 0 ? cfg.eps_override : mapping::epsilon(stats2, cfg.w_eps);
    roadmap::Roadmap rm = roadmap::build_lsr(mm, full, res.eps);
    stages.push_back({{"stage", "build_lsr"},
                      {"eps", res.eps},
                      {"n_nodes", rm.n_nodes()},
                      {"n_edges", rm.n_edges()}});

    if (cfg.connect) {
        ConnectResult cr = connect(rm, mm, sm, idx, lpm, res.eps, cfg.rho_gate);
        rm = std::move(cr.rm);
        res.n_shortcuts = cr.n_added;
    }
    stages.push_back(
        {{"stage", "connect"}, {"enabled", cfg.connect}, {"n_added", res.n_shortcuts}});

    res.rm = std::move(rm);
    res.ds = std::move(full);
    res.mm = std::move(mm);
    res.lpm = std::move(lpm);
    res.sm = std::move(sm);
    res.index = std::move(idx);
    res.provenance = {{"stages", std::move(stages)},
                      {"r", res.r},
                      {"eps", res.eps},
                      {"w_eps", cfg.w_eps},
                      {"rho_gate", cfg.rho_gate}};
    return res;
}

}  // namespace vap::ace
