#include "vap/data/io.hpp"

namespace vap::data {

namespace {

std::string act_name(nn::Activation a) {
    return a == nn::Activation::leaky_relu ? "leaky_relu" : "linear";
}

nn::Activation act_from(const std::string& s, std::size_t offset) {
    if (s == "linear") return nn::Activation::linear;
    if (s == "leaky_relu") return nn::Activation::leaky_relu;
    throw FormatError("unknown activation '" + s + "'", offset);
}

std::int32_t label_of(const sim::Observation& o) {
    return o.meta_label ? *o.meta_label : -1;
}

void set_label(sim::Observation& o, std::int32_t v) {
    if (v >= 0) o.meta_label = v;
}

}  // namespace

nlohmann::json sim_to_json(const sim::SimConfig& cfg) {
    return {{"columns", cfg.columns},
            {"max_height", cfg.max_height},
            {"n_boxes", cfg.n_boxes},
            {"image_side", cfg.image_side},
            {"position_noise", cfg.position_noise},
            {"brightness", {cfg.brightness_lo, cfg.brightness_hi}}};
}

sim::SimConfig sim_from_json(const nlohmann::json& j) {
    sim::SimConfig cfg;
    try {
        cfg.columns = j.at("columns").get<int>();
        cfg.max_height = j.at("max_height").get<int>();
        cfg.n_boxes = j.at("n_boxes").get<int>();
        cfg.image_side = j.at("image_side").get<int>();
        cfg.position_noise = j.at("position_noise").get<Scalar>();
        cfg.brightness_lo = j.at("brightness").at(0).get<Scalar>();
        cfg.brightness_hi = j.at("brightness").at(1).get<Scalar>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad sim config: ") + e.what(), 0);
    }
    cfg.validate();
    return cfg;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    const Index n = static_cast<Index>(ds.tuples.size());
    const Index dim = n > 0 ? ds.tuples.front().obs_a.pixels.size() : 0;
    Mat pa(dim, n), pb(dim, n);
    std::vector<std::int32_t> labels(static_cast<std::size_t>(2 * n));
    std::vector<std::int32_t> aflag(static_cast<std::size_t>(n));
    std::vector<std::int32_t> action(static_cast<std::size_t>(4 * n), -1);
    for (Index i = 0; i < n; ++i) {
        const auto& t = ds.tuples[static_cast<std::size_t>(i)];
        if (t.obs_a.pixels.size() != dim || t.obs_b.pixels.size() != dim)
            throw ShapeError("inconsistent observation sizes in dataset");
        pa.col(i) = t.obs_a.pixels;
        pb.col(i) = t.obs_b.pixels;
        labels[static_cast<std::size_t>(2 * i)] = label_of(t.obs_a);
        labels[static_cast<std::size_t>(2 * i + 1)] = label_of(t.obs_b);
        aflag[static_cast<std::size_t>(i)] = t.is_action ? 1 : 0;
        if (t.u) {
            action[static_cast<std::size_t>(4 * i)] = t.u->pick_col;
            action[static_cast<std::size_t>(4 * i + 1)] = t.u->pick_level;
            action[static_cast<std::size_t>(4 * i + 2)] = t.u->place_col;
            action[static_cast<std::size_t>(4 * i + 3)] = t.u->place_level;
        }
    }
    PackWriter w({{"type", "dataset"},
                  {"sim", sim_to_json(ds.sim)},
                  {"provenance", ds.provenance},
                  {"side", ds.sim.image_side}});
    w.f32("pixels_a", pa);
    w.f32("pixels_b", pb);
    w.i32("labels", labels.data(), 2, n);
    w.i32("aflag", aflag.data(), 1, n);
    w.i32("action", action.data(), 4, n);
    w.save(path);
}

Dataset load_dataset(const std::string& path) {
    PackReader r(path);
    if (r.meta().value("type", "") != "dataset")
        throw FormatError("not a dataset container", 0);
    Dataset ds;
    ds.sim = sim_from_json(r.meta().at("sim"));
    ds.provenance = r.meta().value("provenance", nlohmann::json::object());

    const Mat pa = r.f32("pixels_a");
    const Mat pb = r.f32("pixels_b");
    const auto labels = r.i32("labels");
    const auto aflag = r.i32("aflag");
    const auto action = r.i32("action");
    const Index n = pa.cols();
    if (pb.cols() != n || static_cast<Index>(aflag.size()) != n ||
        static_cast<Index>(labels.size()) != 2 * n ||
        static_cast<Index>(action.size()) != 4 * n)
        throw FormatError("dataset tensors disagree on tuple count", 0);

    ds.tuples.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        auto& t = ds.tuples[static_cast<std::size_t>(i)];
        t.obs_a.pixels = pa.col(i);
        t.obs_b.pixels = pb.col(i);
        t.obs_a.side = t.obs_b.side = ds.sim.image_side;
        set_label(t.obs_a, labels[static_cast<std::size_t>(2 * i)]);
        set_label(t.obs_b, labels[static_cast<std::size_t>(2 * i + 1)]);
        t.is_action = aflag[static_cast<std::size_t>(i)] != 0;
        if (t.is_action)
            t.u = sim::GridAction{action[static_cast<std::size_t>(4 * i)],
                                  action[static_cast<std::size_t>(4 * i + 1)],
                                  action[static_cast<std::size_t>(4 * i + 2)],
                                  action[static_cast<std::size_t>(4 * i + 3)]};
    }
    return ds;
}

void save_queries(const QuerySet& qs, const std::string& path) {
    const Index n = static_cast<Index>(qs.queries.size());
    const Index dim = n > 0 ? qs.queries.front().start.pixels.size() : 0;
    Mat ps(dim, n), pg(dim, n);
    std::vector<std::int32_t> labels(static_cast<std::size_t>(2 * n));
    for (Index i = 0; i < n; ++i) {
        const auto& q = qs.queries[static_cast<std::size_t>(i)];
        ps.col(i) = q.start.pixels;
        pg.col(i) = q.goal.pixels;
        labels[static_cast<std::size_t>(2 * i)] = label_of(q.start);
        labels[static_cast<std::size_t>(2 * i + 1)] = label_of(q.goal);
    }
    PackWriter w({{"type", "queries"},
                  {"sim", sim_to_json(qs.sim)},
                  {"provenance", qs.provenance}});
    w.f32("pixels_start", ps);
    w.f32("pixels_goal", pg);
    w.i32("labels", labels.data(), 2, n);
    w.save(path);
}

QuerySet load_queries(const std::string& path) {
    PackReader r(path);
    if (r.meta().value("type", "") != "queries")
        throw FormatError("not a query container", 0);
    QuerySet qs;
    qs.sim = sim_from_json(r.meta().at("sim"));
    qs.provenance = r.meta().value("provenance", nlohmann::json::object());
    const Mat ps = r.f32("pixels_start");
    const Mat pg = r.f32("pixels_goal");
    const auto labels = r.i32("labels");
    const Index n = ps.cols();
    if (pg.cols() != n || static_cast<Index>(labels.size()) != 2 * n)
        throw FormatError("query tensors disagree on count", 0);
    qs.queries.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        auto& q = qs.queries[static_cast<std::size_t>(i)];
        q.start.pixels = ps.col(i);
        q.goal.pixels = pg.col(i);
        q.start.side = q.goal.side = qs.sim.image_side;
        set_label(q.start, labels[static_cast<std::size_t>(2 * i)]);
        set_label(q.goal, labels[static_cast<std::size_t>(2 * i + 1)]);
    }
    return qs;
}

void save_models(const std::string& path,
                 const std::vector<std::pair<std::string, const nn::Mlp<float>*>>& nets,
                 nlohmann::json meta) {
    nlohmann::json archs = nlohmann::json::object();
    PackWriter w;
    for (const auto& [name, net] : nets) {
        nlohmann::json arch = nlohmann::json::array();
        for (std::size_t l = 0; l < net->layers.size(); ++l) {
            const auto& layer = net->layers[l];
            arch.push_back({{"in", layer.W.cols()},
                            {"out", layer.W.rows()},
                            {"act", act_name(layer.act)}});
            const std::string tag = name + "." + std::to_string(l);
            w.f32(tag + ".W", layer.W.data(), layer.W.rows(), layer.W.cols());
            w.f32(tag + ".b", layer.b.data(), layer.b.size(), 1);
        }
        archs[name] = arch;
    }
    w.meta() = {{"type", "models"}, {"nets", archs}, {"meta", std::move(meta)}};
    w.save(path);
}

std::pair<std::map<std::string, nn::Mlp<float>>, nlohmann::json> load_models(
    const std::string& path) {
    PackReader r(path);
    if (r.meta().value("type", "") != "models")
        throw FormatError("not a model container", 0);
    std::map<std::string, nn::Mlp<float>> nets;
    for (const auto& [name, arch] : r.meta().at("nets").items()) {
        nn::Mlp<float> net;
        for (std::size_t l = 0; l < arch.size(); ++l) {
            const auto& spec = arch[l];
            const std::string tag = name + "." + std::to_string(l);
            nn::Dense<float> layer;
            layer.W = r.f32(tag + ".W");
            layer.b = r.f32(tag + ".b").col(0);
            layer.act = act_from(spec.at("act").get<std::string>(), 0);
            if (layer.W.rows() != spec.at("out").get<Index>() ||
                layer.W.cols() != spec.at("in").get<Index>() ||
                layer.b.size() != layer.W.rows())
                throw FormatError("model tensor shape disagrees with arch for " + tag, 0);
            net.layers.push_back(std::move(layer));
        }
        nets[name] = std::move(net);
    }
    return {std::move(nets), r.meta().value("meta", nlohmann::json::object())};
}

}  // namespace vap::data
