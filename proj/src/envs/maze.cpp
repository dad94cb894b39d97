#include "oarl/envs/maze.hpp"

#include <deque>

#include "oarl/io.hpp"

namespace oarl::envs {

void ConfoundedMazeConfig::validate() const {
    if (grid_size < 3 || grid_size % 2 == 0) {
        throw ConfigError("maze: grid_size must be odd and >= 3, got " + std::to_string(grid_size));
    }
    if (max_steps < grid_size) throw ConfigError("maze: max_steps too small");
}

uint64_t ConfoundedMazeConfig::digest() const {
    ByteWriter w;
    w.u32(static_cast<uint32_t>(grid_size));
    w.u64(wall_layout_seed);
    w.u8(static_cast<uint8_t>(goal_mode));
    w.f32(reward_goal);
    w.u32(static_cast<uint32_t>(max_steps));
    return fnv1a64(w.data().data(), w.data().size());
}

ConfoundedMaze::ConfoundedMaze(ConfoundedMazeConfig config) : config_(std::move(config)) {
    config_.validate();
    carve();
}

void ConfoundedMaze::carve() {
    const int g = config_.grid_size;
    walls_.assign(static_cast<size_t>(g * g), 1);
    auto at = [&](int r, int c) -> uint8_t& { return walls_[static_cast<size_t>(r * g + c)]; };

    // Rooms sit on even coordinates; depth-first backtracking knocks out the
    // wall between a room and an unvisited neighbour two cells away.
    Rng rng(derive_seed(config_.wall_layout_seed, "maze-walls"));
    const int rooms = (g + 1) / 2;
    std::vector<uint8_t> visited(static_cast<size_t>(rooms * rooms), 0);
    auto seen = [&](int rr, int rc) -> uint8_t& { return visited[static_cast<size_t>(rr * rooms + rc)]; };

    struct Pos {
        int r, c;
    };
    std::vector<Pos> stack;
    const Pos start{rooms - 1, 0};  // bottom-left room
    stack.push_back(start);
    seen(start.r, start.c) = 1;
    at(start.r * 2, start.c * 2) = 0;

    const int dr[4] = {-1, 1, 0, 0};
    const int dc[4] = {0, 0, -1, 1};
    while (!stack.empty()) {
        const Pos cur = stack.back();
        int order[4] = {0, 1, 2, 3};
        for (int i = 3; i > 0; --i) {
            const int j = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(i + 1)));
            std::swap(order[i], order[j]);
        }
        bool advanced = false;
        for (int k = 0; k < 4 && !advanced; ++k) {
            const int nr = cur.r + dr[order[k]];
            const int nc = cur.c + dc[order[k]];
            if (nr < 0 || nr >= rooms || nc < 0 || nc >= rooms || seen(nr, nc)) continue;
            seen(nr, nc) = 1;
            at(nr * 2, nc * 2) = 0;
            at(cur.r * 2 + dr[order[k]], cur.c * 2 + dc[order[k]]) = 0;
            stack.push_back(Pos{nr, nc});
            advanced = true;
        }
        if (!advanced) stack.pop_back();
    }
}

std::vector<std::pair<int, int>> ConfoundedMaze::candidate_goals() const {
    const int g = config_.grid_size;
    std::vector<std::pair<int, int>> out;
    for (int r = 0; r < g; ++r) {
        for (int c = 0; c < g; ++c) {
            if (wall(r, c)) continue;
            if (r == g - 1 && c == 0) continue;  // the start cell
            out.emplace_back(r, c);
        }
    }
    return out;
}

void ConfoundedMaze::reset(uint64_t seed) {
    const int g = config_.grid_size;
    state_ = MazeState{};
    state_.agent_r = g - 1;
    state_.agent_c = 0;
    if (config_.goal_mode == GoalMode::FixedTopRight) {
        state_.goal_r = 0;
        state_.goal_c = g - 1;
    } else {
        Rng rng(derive_seed(seed, "maze-goal"));
        const auto goals = candidate_goals();
        const auto& pick = goals[rng.uniform_int(goals.size())];
        state_.goal_r = pick.first;
        state_.goal_c = pick.second;
    }
}

MazeStepOutcome ConfoundedMaze::step(MazeAction action) {
    if (state_.done) throw ContractError("maze: step() called on a finished episode");
    const int g = config_.grid_size;
    int nr = state_.agent_r, nc = state_.agent_c;
    switch (action) {
        case MazeAction::Up: nr -= 1; break;
        case MazeAction::Down: nr += 1; break;
        case MazeAction::Left: nc -= 1; break;
        case MazeAction::Right: nc += 1; break;
        default: throw ContractError("maze: unknown action index");
    }
    if (nr >= 0 && nr < g && nc >= 0 && nc < g && !wall(nr, nc)) {
        state_.agent_r = nr;
        state_.agent_c = nc;
    }
    state_.t += 1;

    MazeStepOutcome out;
    if (state_.agent_r == state_.goal_r && state_.agent_c == state_.goal_c) {
        out.reward = config_.reward_goal;
        out.done = true;
        out.reached_goal = true;
    } else if (state_.t >= config_.max_steps) {
        out.done = true;
    }
    state_.done = out.done;
    return out;
}

std::vector<float> ConfoundedMaze::observe() const {
    const int g = config_.grid_size;
    const size_t cells = static_cast<size_t>(g * g);
    std::vector<float> obs(3 * cells, 0.0f);
    obs[static_cast<size_t>(state_.agent_r * g + state_.agent_c)] = 1.0f;
    for (size_t i = 0; i < cells; ++i) obs[cells + i] = walls_[i] ? 1.0f : 0.0f;
    obs[2 * cells + static_cast<size_t>(state_.goal_r * g + state_.goal_c)] = 1.0f;
    return obs;
}

bool maze_fully_connected(const ConfoundedMaze& maze) {
    const int g = maze.config().grid_size;
    std::vector<uint8_t> seen(static_cast<size_t>(g * g), 0);
    std::deque<std::pair<int, int>> frontier;
    frontier.emplace_back(g - 1, 0);
    seen[static_cast<size_t>((g - 1) * g)] = 1;
    size_t reached = 0;
    while (!frontier.empty()) {
        const auto [r, c] = frontier.front();
        frontier.pop_front();
        reached += 1;
        const int dr[4] = {-1, 1, 0, 0};
        const int dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
            const int nr = r + dr[k], nc = c + dc[k];
            if (nr < 0 || nr >= g || nc < 0 || nc >= g) continue;
            if (maze.wall(nr, nc) || seen[static_cast<size_t>(nr * g + nc)]) continue;
            seen[static_cast<size_t>(nr * g + nc)] = 1;
            frontier.emplace_back(nr, nc);
        }
    }
    size_t open = 0;
    for (int r = 0; r < g; ++r) {
        for (int c = 0; c < g; ++c) {
            if (!maze.wall(r, c)) open += 1;
        }
    }
    return reached == open;
}

}  // namespace oarl::envs
