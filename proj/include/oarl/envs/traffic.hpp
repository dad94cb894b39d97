#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oarl/common.hpp"
#include "oarl/rng.hpp"

namespace oarl::envs {

enum class LightPhase : uint8_t { Green = 0, Red = 1 };

enum class TrafficAction : int { Wait = 0, Forward = 1 };

enum class DoneReason : uint8_t { Running = 0, Goal = 1, RedViolation = 2, Timeout = 3 };

struct TrafficWorldConfig {
    int corridor_len = 12;
    int light_cell = 9;  // corridor_len - 3
    int num_vehicles_min = 0;
    int num_vehicles_max = 3;
    double p_red_max = 0.02;
    double p_red_min = 0.001;
    int red_duration = 5;
    int max_steps = 60;
    bool spurious_tile_enabled = true;
    float reward_goal = 1.0f;
    float reward_red_violation = -1.0f;
    float reward_collision = -1.0f;

    static constexpr int action_count = 2;
    int obs_dim() const { return 3 * corridor_len + 3; }
    void validate() const;
    uint64_t digest() const;
};

// Fixed evaluation episode: schedules pin every random choice.
struct ScenarioSpec {
    std::string name;
    std::vector<LightPhase> light_schedule;           // indexed by state time t
    std::optional<std::vector<uint8_t>> tile_schedule; // nullopt = derived from traffic
    std::vector<int> vehicle_init;
};

struct TrafficWorldState {
    int agent_cell = 0;
    std::vector<int> vehicle_cells;  // strictly increasing, all > agent_cell
    LightPhase light = LightPhase::Green;
    int red_remaining = 0;
    bool tile_yellow = false;
    int t = 0;
    bool done = false;
    DoneReason reason = DoneReason::Running;
};

struct StepOutcome {
    float reward = 0.0f;
    bool done = false;
    DoneReason reason = DoneReason::Running;
};

// One-dimensional corridor with leading vehicles, a distance-dependent
// traffic light, and a cosmetic tile that mirrors whether the vehicle
// directly ahead is stopped.
class TrafficWorld {
public:
    explicit TrafficWorld(TrafficWorldConfig config);

    void reset(uint64_t seed);
    void reset(const ScenarioSpec& scenario);
    StepOutcome step(TrafficAction action);

    std::vector<float> observe() const;
    const TrafficWorldState& state() const { return state_; }
    const TrafficWorldConfig& config() const { return config_; }

private:
    void apply_tile(bool leading_vehicle_stalled);
    LightPhase scheduled_light(int t) const;

    TrafficWorldConfig config_;
    TrafficWorldState state_;
    std::optional<ScenarioSpec> scenario_;
    Rng rng_{0};
};

// The four fixed evaluation episodes; suite score = mean episode reward.
std::vector<ScenarioSpec> scenario_suite(const TrafficWorldConfig& config);
ScenarioSpec scenario_by_name(const TrafficWorldConfig& config, const std::string& name);
const std::vector<std::string>& scenario_names();

}  // namespace oarl::envs
