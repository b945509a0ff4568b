#include "vap/sim/boxstack.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace vap::sim {

void SimConfig::validate() const {
    if (columns < 1) throw ShapeError("columns must be >= 1");
    if (max_height < 1) throw ShapeError("max_height must be >= 1");
    if (n_boxes < 0 || n_boxes > columns * max_height)
        throw ShapeError("n_boxes must be in [0, columns*max_height]");
    if (image_side < 1) throw ShapeError("image_side must be >= 1");
    if (!(position_noise >= 0 && position_noise < 0.5f))
        throw ShapeError("position_noise must be in [0, 0.5)");
    if (!(brightness_lo <= brightness_hi))
        throw ShapeError("brightness range must satisfy lo <= hi");
}

std::string UnderlyingState::to_string() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t c = 0; c < stacks.size(); ++c) {
        if (c) os << "|";
        for (std::size_t i = 0; i < stacks[c].size(); ++i) {
            if (i) os << ",";
            os << stacks[c][i];
        }
    }
    os << "]";
    return os.str();
}

std::string GridAction::to_string() const {
    std::ostringstream os;
    os << "(" << pick_col << "," << pick_level << ")->(" << place_col << "," << place_level
       << ")";
    return os.str();
}

GridAction reverse_action(const GridAction& a) {
    return GridAction{a.place_col, a.place_level, a.pick_col, a.pick_level};
}

namespace {

void enumerate_rec(const SimConfig& cfg, int column, std::vector<int>& remaining,
                   UnderlyingState& partial, std::vector<UnderlyingState>& out) {
    if (column == cfg.columns) {
        if (remaining.empty()) out.push_back(partial);
        return;
    }
    // choose an ordered tuple of distinct remaining boxes for this column
    std::vector<std::vector<int>> stacks_here;
    std::vector<int> stack;
    auto rec = [&](auto&& self) -> void {
        stacks_here.push_back(stack);
        if (static_cast<int>(stack.size()) == cfg.max_height) return;
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            const int box = remaining[i];
            if (box < 0) continue;
            remaining[i] = -1;
            stack.push_back(box);
            self(self);
            stack.pop_back();
            remaining[i] = box;
        }
    };
    rec(rec);
    for (const auto& s : stacks_here) {
        partial.stacks.push_back(s);
        std::vector<int> rest;
        for (const int b : remaining)
            if (std::find(s.begin(), s.end(), b) == s.end()) rest.push_back(b);
        enumerate_rec(cfg, column + 1, rest, partial, out);
        partial.stacks.pop_back();
    }
}

}  // namespace

std::vector<UnderlyingState> enumerate_states(const SimConfig& cfg) {
    cfg.validate();
    std::vector<int> boxes(static_cast<std::size_t>(cfg.n_boxes));
    for (int i = 0; i < cfg.n_boxes; ++i) boxes[static_cast<std::size_t>(i)] = i;
    std::vector<UnderlyingState> out;
    UnderlyingState partial;
    enumerate_rec(cfg, 0, boxes, partial, out);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<GridAction> valid_actions(const UnderlyingState& state, const SimConfig& cfg) {
    std::vector<GridAction> out;
    const int cols = static_cast<int>(state.stacks.size());
    for (int pc = 1; pc <= cols; ++pc) {
        const auto& pick = state.stacks[static_cast<std::size_t>(pc - 1)];
        if (pick.empty()) continue;
        const int pick_level = static_cast<int>(pick.size());
        for (int qc = 1; qc <= cols; ++qc) {
            if (qc == pc) continue;
            const auto& place = state.stacks[static_cast<std::size_t>(qc - 1)];
            if (static_cast<int>(place.size()) >= cfg.max_height) continue;
            const int place_level = static_cast<int>(place.size()) + 1;
            out.push_back(GridAction{pc, pick_level, qc, place_level});
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<GridAction> enumerate_actions(const SimConfig& cfg) {
    const auto states = enumerate_states(cfg);
    std::vector<GridAction> all;
    for (const auto& s : states) {
        auto v = valid_actions(s, cfg);
        all.insert(all.end(), v.begin(), v.end());
    }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
}

UnderlyingState apply_action(const UnderlyingState& state, const GridAction& action,
                             const SimConfig& cfg) {
    const int cols = static_cast<int>(state.stacks.size());
    if (action.pick_col == action.place_col)
        throw InvalidAction(InvalidActionReason::same_column, action.to_string());
    if (action.pick_col < 1 || action.pick_col > cols || action.place_col < 1 ||
        action.place_col > cols || action.pick_level < 1 || action.pick_level > cfg.max_height ||
        action.place_level < 1 || action.place_level > cfg.max_height)
        throw InvalidAction(InvalidActionReason::wrong_level, action.to_string());

    const auto& pick = state.stacks[static_cast<std::size_t>(action.pick_col - 1)];
    const auto& place = state.stacks[static_cast<std::size_t>(action.place_col - 1)];
    if (static_cast<int>(pick.size()) < action.pick_level)
        throw InvalidAction(pick.empty() ? InvalidActionReason::empty_pick
                                         : InvalidActionReason::not_top,
                            action.to_string() + " pick cell empty");
    if (static_cast<int>(pick.size()) > action.pick_level)
        throw InvalidAction(InvalidActionReason::not_top, action.to_string());
    if (static_cast<int>(place.size()) >= cfg.max_height)
        throw InvalidAction(InvalidActionReason::full_destination, action.to_string());
    if (static_cast<int>(place.size()) != action.place_level - 1)
        throw InvalidAction(InvalidActionReason::wrong_level, action.to_string());

    UnderlyingState next = state;
    auto& from = next.stacks[static_cast<std::size_t>(action.pick_col - 1)];
    auto& to = next.stacks[static_cast<std::size_t>(action.place_col - 1)];
    to.push_back(from.back());
    from.pop_back();
    return next;
}

Eigen::Matrix<Scalar, 3, 1> box_color(int box_id) {
    static const Scalar palette[8][3] = {
        {0.95f, 0.15f, 0.15f},  // red
        {0.15f, 0.85f, 0.20f},  // green
        {0.20f, 0.40f, 0.95f},  // blue
        {0.95f, 0.90f, 0.15f},  // yellow
        {0.90f, 0.25f, 0.90f},  // magenta
        {0.15f, 0.90f, 0.90f},  // cyan
        {0.95f, 0.55f, 0.10f},  // orange
        {0.60f, 0.60f, 0.60f},  // gray
    };
    if (box_id >= 0 && box_id < 8)
        return Eigen::Matrix<Scalar, 3, 1>(palette[box_id][0], palette[box_id][1],
                                           palette[box_id][2]);
    // golden-ratio hue walk for configs with more boxes than the palette
    const double h = std::fmod(0.618033988749895 * (box_id - 7), 1.0) * 6.0;
    const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(h)) {
        case 0: r = 1; g = x; break;
        case 1: r = x; g = 1; break;
        case 2: g = 1; b = x; break;
        case 3: g = x; b = 1; break;
        case 4: r = x; b = 1; break;
        default: r = 1; b = x; break;
    }
    return Eigen::Matrix<Scalar, 3, 1>(static_cast<Scalar>(0.3 + 0.7 * r),
                                       static_cast<Scalar>(0.3 + 0.7 * g),
                                       static_cast<Scalar>(0.3 + 0.7 * b));
}

Observation render(const UnderlyingState& state, const SimConfig& cfg, std::uint64_t seed,
                   std::optional<std::int32_t> meta_label) {
    const int side = cfg.image_side;
    Observation obs;
    obs.side = side;
    obs.meta_label = meta_label;
    obs.pixels = Vec::Zero(static_cast<Index>(side) * side * 3);

    Rng rng(seed);
    const Scalar brightness =
        static_cast<Scalar>(rng.uniform(cfg.brightness_lo, cfg.brightness_hi));
    const Scalar cell_w = static_cast<Scalar>(side) / static_cast<Scalar>(cfg.columns);
    const Scalar cell_h = static_cast<Scalar>(side) / static_cast<Scalar>(cfg.max_height);
    const Scalar half = 0.3f * std::min(cell_w, cell_h);

    for (std::size_t c = 0; c < state.stacks.size(); ++c) {
        for (std::size_t lvl = 0; lvl < state.stacks[c].size(); ++lvl) {
            const int box = state.stacks[c][lvl];
            const Scalar dx =
                static_cast<Scalar>(rng.uniform(-cfg.position_noise, cfg.position_noise)) * cell_w;
            const Scalar dy =
                static_cast<Scalar>(rng.uniform(-cfg.position_noise, cfg.position_noise)) * cell_h;
            const Scalar cx = (static_cast<Scalar>(c) + 0.5f) * cell_w + dx;
            const Scalar cy = static_cast<Scalar>(side) -
                              (static_cast<Scalar>(lvl) + 0.5f) * cell_h + dy;
            const Scalar x0 = cx - half, x1 = cx + half;
            const Scalar y0 = cy - half, y1 = cy + half;
            const auto color = box_color(box);

            const int px0 = std::max(0, static_cast<int>(std::floor(x0)));
            const int px1 = std::min(side - 1, static_cast<int>(std::floor(x1)));
            const int py0 = std::max(0, static_cast<int>(std::floor(y0)));
            const int py1 = std::min(side - 1, static_cast<int>(std::floor(y1)));
            for (int py = py0; py <= py1; ++py) {
                const Scalar oy = std::min<Scalar>(static_cast<Scalar>(py) + 1, y1) -
                                  std::max<Scalar>(static_cast<Scalar>(py), y0);
                if (oy <= 0) continue;
                for (int px = px0; px <= px1; ++px) {
                    const Scalar ox = std::min<Scalar>(static_cast<Scalar>(px) + 1, x1) -
                                      std::max<Scalar>(static_cast<Scalar>(px), x0);
                    if (ox <= 0) continue;
                    const Scalar cov = ox * oy;
                    const Index base = (static_cast<Index>(py) * side + px) * 3;
                    for (int ch = 0; ch < 3; ++ch)
                        obs.pixels[base + ch] += cov * color[ch];
                }
            }
        }
    }
    obs.pixels = (obs.pixels * brightness).cwiseMin(Scalar(1)).cwiseMax(Scalar(0));
    return obs;
}

StateTable::StateTable(const SimConfig& cfg)
    : cfg_(cfg), states_(enumerate_states(cfg)), actions_(enumerate_actions(cfg)) {
    for (std::size_t i = 0; i < states_.size(); ++i)
        state_index_[states_[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < actions_.size(); ++i)
        action_index_[actions_[i]] = static_cast<int>(i);
}

int StateTable::state_index(const UnderlyingState& s) const {
    const auto it = state_index_.find(s);
    if (it == state_index_.end()) throw UnknownNode("state not enumerated: " + s.to_string());
    return it->second;
}

int StateTable::action_index(const GridAction& a) const {
    const auto it = action_index_.find(a);
    return it == action_index_.end() ? -1 : it->second;
}

Observation StateTable::render(int state_index, std::uint64_t seed) const {
    return sim::render(states_[static_cast<std::size_t>(state_index)], cfg_, seed,
                       static_cast<std::int32_t>(state_index));
}

int StateTable::snap_action(Scalar pick_col, Scalar pick_level, Scalar place_col,
                            Scalar place_level) const {
    int best = -1;
    Scalar best_d = 0;
    for (std::size_t i = 0; i < actions_.size(); ++i) {
        const auto& a = actions_[i];
        const Scalar d = std::abs(pick_col - static_cast<Scalar>(a.pick_col)) +
                         std::abs(pick_level - static_cast<Scalar>(a.pick_level)) +
                         std::abs(place_col - static_cast<Scalar>(a.place_col)) +
                         std::abs(place_level - static_cast<Scalar>(a.place_level));
        if (best < 0 || d < best_d) {
            best = static_cast<int>(i);
            best_d = d;
        }
    }
    if (best < 0) throw UnknownAction("empty action table");
    return best;
}

TransitionGraph::TransitionGraph(const SimConfig& cfg) : table_(cfg) {
    adj_.resize(table_.states().size());
    for (std::size_t s = 0; s < table_.states().size(); ++s) {
        for (const auto& a : valid_actions(table_.states()[s], cfg)) {
            const auto next = apply_action(table_.states()[s], a, cfg);
            adj_[s].emplace_back(table_.action_index(a), table_.state_index(next));
        }
        std::sort(adj_[s].begin(), adj_[s].end());
    }
}

std::optional<int> TransitionGraph::successor(int state, const GridAction& action) const {
    const int ai = table_.action_index(action);
    if (ai < 0) return std::nullopt;
    for (const auto& [a, t] : adj_[static_cast<std::size_t>(state)])
        if (a == ai) return t;
    return std::nullopt;
}

bool TransitionGraph::valid_transition(int from_state, const GridAction& action,
                                       int to_state) const {
    const auto succ = successor(from_state, action);
    return succ.has_value() && *succ == to_state;
}

int TransitionGraph::bfs_distance(int from_state, int to_state) const {
    if (from_state == to_state) return 0;
    std::vector<int> dist(adj_.size(), -1);
    dist[static_cast<std::size_t>(from_state)] = 0;
    std::deque<int> queue{from_state};
    while (!queue.empty()) {
        const int s = queue.front();
        queue.pop_front();
        for (const auto& [a, t] : adj_[static_cast<std::size_t>(s)]) {
            if (dist[static_cast<std::size_t>(t)] >= 0) continue;
            dist[static_cast<std::size_t>(t)] = dist[static_cast<std::size_t>(s)] + 1;
            if (t == to_state) return dist[static_cast<std::size_t>(t)];
            queue.push_back(t);
        }
    }
    return -1;
}

bool TransitionGraph::strongly_connected() const {
    if (adj_.empty()) return true;
    // every move is reversible, so reachability from node 0 in both directions
    // is checked explicitly rather than assumed
    const auto reach = [&](bool forward) {
        std::vector<std::vector<int>> nbrs(adj_.size());
        for (std::size_t s = 0; s < adj_.size(); ++s)
            for (const auto& [a, t] : adj_[s])
                nbrs[forward ? s : static_cast<std::size_t>(t)].push_back(
                    forward ? t : static_cast<int>(s));
        std::vector<char> seen(adj_.size(), 0);
        std::deque<int> queue{0};
        seen[0] = 1;
        std::size_t count = 1;
        while (!queue.empty()) {
            const int s = queue.front();
            queue.pop_front();
            for (const int t : nbrs[static_cast<std::size_t>(s)]) {
                if (seen[static_cast<std::size_t>(t)]) continue;
                seen[static_cast<std::size_t>(t)] = 1;
                ++count;
                queue.push_back(t);
            }
        }
        return count == adj_.size();
    };
    return reach(true) && reach(false);
}

SimEnv::SimEnv(const SimConfig& cfg, std::uint64_t seed) : table_(cfg), rng_(seed) {
    current_ = static_cast<int>(rng_.uniform_int(table_.states().size()));
}

Observation SimEnv::observe() { return table_.render(current_, rng_.next_u64()); }

bool SimEnv::step(const GridAction& action) {
    const auto& state = table_.states()[static_cast<std::size_t>(current_)];
    try {
        const auto next = apply_action(state, action, table_.config());
        current_ = table_.state_index(next);
        return true;
    } catch (const InvalidAction&) {
        return false;
    }
}

void SimEnv::reset_random() {
    current_ = static_cast<int>(rng_.uniform_int(table_.states().size()));
}

}  // namespace vap::sim
