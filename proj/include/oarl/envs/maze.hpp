#pragma once

#include <cstdint>
#include <vector>

#include "oarl/common.hpp"
#include "oarl/rng.hpp"

namespace oarl::envs {

enum class GoalMode : uint8_t { FixedTopRight = 0, UniformRandom = 1 };

enum class MazeAction : int { Up = 0, Down = 1, Left = 2, Right = 3 };

struct ConfoundedMazeConfig {
    int grid_size = 7;
    uint64_t wall_layout_seed = 0;
    GoalMode goal_mode = GoalMode::FixedTopRight;
    float reward_goal = 10.0f;
    int max_steps = 4 * 7 * 7;

    static constexpr int action_count = 4;
    int obs_dim() const { return 3 * grid_size * grid_size; }
    void validate() const;
    uint64_t digest() const;
};

struct MazeState {
    int agent_r = 0, agent_c = 0;
    int goal_r = 0, goal_c = 0;
    int t = 0;
    bool done = false;
};

struct MazeStepOutcome {
    float reward = 0.0f;
    bool done = false;
    bool reached_goal = false;
};

// Perfect maze carved by depth-first backtracking over the odd lattice;
// start is the bottom-left room, goal fixed top-right or sampled per reset.
class ConfoundedMaze {
public:
    explicit ConfoundedMaze(ConfoundedMazeConfig config);

    void reset(uint64_t seed);
    MazeStepOutcome step(MazeAction action);

    std::vector<float> observe() const;
    const MazeState& state() const { return state_; }
    const ConfoundedMazeConfig& config() const { return config_; }
    bool wall(int r, int c) const { return walls_[static_cast<size_t>(r * config_.grid_size + c)] != 0; }
    const std::vector<uint8_t>& walls() const { return walls_; }

    // All non-wall cells except the start; goals are sampled from these.
    std::vector<std::pair<int, int>> candidate_goals() const;

private:
    void carve();

    ConfoundedMazeConfig config_;
    std::vector<uint8_t> walls_;
    MazeState state_;
};

// True when every open cell is reachable from (start_r, start_c).
bool maze_fully_connected(const ConfoundedMaze& maze);

}  // namespace oarl::envs
