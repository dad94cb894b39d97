#include "oarl/data/policy.hpp"

#include <algorithm>
#include <deque>
#include <limits>

namespace oarl::data {

envs::TrafficAction scripted_traffic_action(const envs::TrafficWorldState& s,
                                            const envs::TrafficWorldConfig& cfg) {
    const int target = s.agent_cell + 1;
    const bool occupied =
        std::find(s.vehicle_cells.begin(), s.vehicle_cells.end(), target) != s.vehicle_cells.end();
    const bool held_at_light = s.light == envs::LightPhase::Red && s.agent_cell == cfg.light_cell;
    if (occupied || held_at_light) return envs::TrafficAction::Wait;
    return envs::TrafficAction::Forward;
}

envs::TrafficAction tile_follower_action(const envs::TrafficWorldState& s) {
    return s.tile_yellow ? envs::TrafficAction::Wait : envs::TrafficAction::Forward;
}

envs::MazeAction maze_shortest_path_action(const envs::ConfoundedMaze& env) {
    const int g = env.config().grid_size;
    const auto& st = env.state();
    constexpr int kUnreached = std::numeric_limits<int>::max();
    std::vector<int> dist(static_cast<size_t>(g * g), kUnreached);
    auto idx = [&](int r, int c) { return static_cast<size_t>(r * g + c); };

    std::deque<std::pair<int, int>> frontier;
    dist[idx(st.goal_r, st.goal_c)] = 0;
    frontier.emplace_back(st.goal_r, st.goal_c);
    const int dr[4] = {-1, 1, 0, 0};
    const int dc[4] = {0, 0, -1, 1};
    while (!frontier.empty()) {
        const auto [r, c] = frontier.front();
        frontier.pop_front();
        for (int k = 0; k < 4; ++k) {
            const int nr = r + dr[k], nc = c + dc[k];
            if (nr < 0 || nr >= g || nc < 0 || nc >= g || env.wall(nr, nc)) continue;
            if (dist[idx(nr, nc)] != kUnreached) continue;
            dist[idx(nr, nc)] = dist[idx(r, c)] + 1;
            frontier.emplace_back(nr, nc);
        }
    }

    const int here = dist[idx(st.agent_r, st.agent_c)];
    if (here == kUnreached) {
        throw ContractError("maze policy: agent cell is disconnected from the goal");
    }
    // Fixed tie order: Up, Down, Left, Right.
    for (int k = 0; k < 4; ++k) {
        const int nr = st.agent_r + dr[k], nc = st.agent_c + dc[k];
        if (nr < 0 || nr >= g || nc < 0 || nc >= g || env.wall(nr, nc)) continue;
        if (dist[idx(nr, nc)] == here - 1) return static_cast<envs::MazeAction>(k);
    }
    throw ContractError("maze policy: no descending neighbour found");
}

}  // namespace oarl::data
