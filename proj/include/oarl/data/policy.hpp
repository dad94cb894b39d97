#pragma once

#include "oarl/envs/maze.hpp"
#include "oarl/envs/traffic.hpp"

namespace oarl::data {

enum class PolicyKind : uint8_t { TrafficScripted = 0, MazeShortestPath = 1 };

// Scripted behavior with optional epsilon-uniform noise layered on top.
struct BehaviorPolicy {
    PolicyKind kind = PolicyKind::TrafficScripted;
    double epsilon = 0.0;
};

// Forward iff the next cell is free and the agent is not held at a red light.
envs::TrafficAction scripted_traffic_action(const envs::TrafficWorldState& s,
                                            const envs::TrafficWorldConfig& cfg);

// Forward iff the tile is not flashing. Used to measure how well the
// cosmetic tile predicts the scripted behavior.
envs::TrafficAction tile_follower_action(const envs::TrafficWorldState& s);

// First move of a breadth-first shortest path to the goal.
envs::MazeAction maze_shortest_path_action(const envs::ConfoundedMaze& env);

}  // namespace oarl::data
