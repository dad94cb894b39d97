#pragma once

#include "oarl/data/dataset.hpp"
#include "oarl/data/policy.hpp"
#include "oarl/envs/maze.hpp"
#include "oarl/envs/traffic.hpp"

namespace oarl::data {

// Rolls out n_episodes of the scripted behavior (plus optional epsilon
// noise) and records every transition. Single-threaded; episode e draws all
// its randomness from seeds derived from (seed, e).
TransitionDataset collect_traffic(const envs::TrafficWorldConfig& config, const BehaviorPolicy& policy,
                                  size_t n_episodes, uint64_t seed);

TransitionDataset collect_maze(const envs::ConfoundedMazeConfig& config, const BehaviorPolicy& policy,
                               size_t n_episodes, uint64_t seed);

// Episode classification used to characterize the traffic data distribution.
struct TrafficEpisodeStats {
    size_t episodes = 0;
    size_t red_at_front_episodes = 0;   // agent held at the light while it is red
    size_t halted_queue_episodes = 0;   // tile flashed at least once
    size_t tile_and_forward_transitions = 0;
    size_t transitions = 0;
    size_t tile_follower_matches = 0;   // transitions where the tile rule predicts the action
};

// Replays episode boundaries over the stored observations (no simulator
// involved) and classifies each episode.
TrafficEpisodeStats classify_traffic_dataset(const TransitionDataset& ds,
                                             const envs::TrafficWorldConfig& config);

}  // namespace oarl::data
