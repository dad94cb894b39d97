#include "oarl/data/collect.hpp"

#include <algorithm>

#include "oarl/rng.hpp"

namespace oarl::data {

namespace {

void push_transition(TransitionDataset& ds, const std::vector<float>& obs, uint16_t action, float reward,
                     const std::vector<float>& next_obs, bool done) {
    ds.obs.insert(ds.obs.end(), obs.begin(), obs.end());
    ds.next_obs.insert(ds.next_obs.end(), next_obs.begin(), next_obs.end());
    ds.actions.push_back(action);
    ds.rewards.push_back(reward);
    ds.dones.push_back(done ? 1 : 0);
}

}  // namespace

TransitionDataset collect_traffic(const envs::TrafficWorldConfig& config, const BehaviorPolicy& policy,
                                  size_t n_episodes, uint64_t seed) {
    if (policy.kind != PolicyKind::TrafficScripted) {
        throw ConfigError("collect: policy kind does not drive a traffic environment");
    }
    if (n_episodes < 1) throw ConfigError("collect: n_episodes must be >= 1");

    TransitionDataset ds;
    ds.meta.env_kind = "traffic";
    ds.meta.config_digest = config.digest();
    ds.meta.spurious_enabled = config.spurious_tile_enabled;
    ds.meta.obs_dim = static_cast<uint32_t>(config.obs_dim());
    ds.meta.action_count = envs::TrafficWorldConfig::action_count;
    ds.meta.collection_seed = seed;
    ds.episode_offsets.push_back(0);

    envs::TrafficWorld env(config);
    for (size_t e = 0; e < n_episodes; ++e) {
        env.reset(derive_seed(seed, "episode", e));
        Rng noise(derive_seed(seed, "policy", e));
        bool done = false;
        while (!done) {
            const auto obs = env.observe();
            envs::TrafficAction a = scripted_traffic_action(env.state(), config);
            if (policy.epsilon > 0.0 && noise.uniform_real() < policy.epsilon) {
                a = static_cast<envs::TrafficAction>(
                    noise.uniform_int(envs::TrafficWorldConfig::action_count));
            }
            const auto out = env.step(a);
            const auto next_obs = env.observe();
            push_transition(ds, obs, static_cast<uint16_t>(a), out.reward, next_obs, out.done);
            done = out.done;
        }
        ds.episode_offsets.push_back(ds.size());
    }
    ds.meta.n_episodes = n_episodes;
    ds.validate();
    return ds;
}

TransitionDataset collect_maze(const envs::ConfoundedMazeConfig& config, const BehaviorPolicy& policy,
                               size_t n_episodes, uint64_t seed) {
    if (policy.kind != PolicyKind::MazeShortestPath) {
        throw ConfigError("collect: policy kind does not drive a maze environment");
    }
    if (n_episodes < 1) throw ConfigError("collect: n_episodes must be >= 1");

    TransitionDataset ds;
    ds.meta.env_kind = "maze";
    ds.meta.config_digest = config.digest();
    ds.meta.spurious_enabled = false;
    ds.meta.obs_dim = static_cast<uint32_t>(config.obs_dim());
    ds.meta.action_count = envs::ConfoundedMazeConfig::action_count;
    ds.meta.collection_seed = seed;
    ds.episode_offsets.push_back(0);

    envs::ConfoundedMaze env(config);
    for (size_t e = 0; e < n_episodes; ++e) {
        env.reset(derive_seed(seed, "episode", e));
        Rng noise(derive_seed(seed, "policy", e));
        bool done = false;
        while (!done) {
            const auto obs = env.observe();
            envs::MazeAction a = maze_shortest_path_action(env);
            if (policy.epsilon > 0.0 && noise.uniform_real() < policy.epsilon) {
                a = static_cast<envs::MazeAction>(
                    noise.uniform_int(envs::ConfoundedMazeConfig::action_count));
            }
            const auto out = env.step(a);
            const auto next_obs = env.observe();
            push_transition(ds, obs, static_cast<uint16_t>(a), out.reward, next_obs, out.done);
            done = out.done;
        }
        ds.episode_offsets.push_back(ds.size());
    }
    ds.meta.n_episodes = n_episodes;
    ds.validate();
    return ds;
}

TrafficEpisodeStats classify_traffic_dataset(const TransitionDataset& ds,
                                             const envs::TrafficWorldConfig& config) {
    if (ds.meta.env_kind != "traffic") throw ConfigError("classify: dataset is not from a traffic environment");
    const int L = config.corridor_len;
    TrafficEpisodeStats st;
    st.episodes = ds.episode_count();
    st.transitions = ds.size();

    for (size_t e = 0; e + 1 < ds.episode_offsets.size(); ++e) {
        bool red_at_front = false;
        bool tile_seen = false;
        for (size_t i = ds.episode_offsets[e]; i < ds.episode_offsets[e + 1]; ++i) {
            const float* o = ds.obs_row(i);
            int agent_cell = -1;
            for (int c = 0; c < L; ++c) {
                if (o[c] > 0.5f) {
                    agent_cell = c;
                    break;
                }
            }
            const bool red = o[3 * L + 1] > 0.5f;
            const bool tile = o[3 * L + 2] > 0.5f;
            const bool forward = ds.actions[i] == 1;
            if (red && agent_cell == config.light_cell) red_at_front = true;
            if (tile) tile_seen = true;
            if (tile && forward) st.tile_and_forward_transitions += 1;
            const bool follower_forward = !tile;
            if (follower_forward == forward) st.tile_follower_matches += 1;
        }
        if (red_at_front) st.red_at_front_episodes += 1;
        if (tile_seen) st.halted_queue_episodes += 1;
    }
    return st;
}

}  // namespace oarl::data
