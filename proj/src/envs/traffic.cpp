#include "oarl/envs/traffic.hpp"

#include <algorithm>
#include <sstream>

#include "oarl/io.hpp"

namespace oarl::envs {

void TrafficWorldConfig::validate() const {
    if (corridor_len < 3) throw ConfigError("traffic: corridor_len must be >= 3");
    if (!(light_cell > 0 && light_cell < corridor_len - 1)) {
        throw ConfigError("traffic: light_cell must satisfy 0 < light_cell < corridor_len-1, got " +
                          std::to_string(light_cell));
    }
    if (!(p_red_min >= 0.0 && p_red_min <= p_red_max && p_red_max <= 1.0)) {
        throw ConfigError("traffic: need 0 <= p_red_min <= p_red_max <= 1");
    }
    if (max_steps <= corridor_len) throw ConfigError("traffic: max_steps must exceed corridor_len");
    if (num_vehicles_min < 0 || num_vehicles_max < num_vehicles_min) {
        throw ConfigError("traffic: vehicle count range is invalid");
    }
    if (num_vehicles_max > 0 && num_vehicles_max + 4 > light_cell) {
        throw ConfigError("traffic: vehicle count range must leave the randomized queue before the light");
    }
    if (red_duration < 1) throw ConfigError("traffic: red_duration must be >= 1");
}

uint64_t TrafficWorldConfig::digest() const {
    ByteWriter w;
    w.u32(static_cast<uint32_t>(corridor_len));
    w.u32(static_cast<uint32_t>(light_cell));
    w.u32(static_cast<uint32_t>(num_vehicles_min));
    w.u32(static_cast<uint32_t>(num_vehicles_max));
    w.f64(p_red_max);
    w.f64(p_red_min);
    w.u32(static_cast<uint32_t>(red_duration));
    w.u32(static_cast<uint32_t>(max_steps));
    w.u8(spurious_tile_enabled ? 1 : 0);
    w.f32(reward_goal);
    w.f32(reward_red_violation);
    w.f32(reward_collision);
    return fnv1a64(w.data().data(), w.data().size());
}

TrafficWorld::TrafficWorld(TrafficWorldConfig config) : config_(std::move(config)) {
    config_.validate();
}

LightPhase TrafficWorld::scheduled_light(int t) const {
    const auto& sched = scenario_->light_schedule;
    return sched[static_cast<size_t>(std::min<int>(t, static_cast<int>(sched.size()) - 1))];
}

void TrafficWorld::apply_tile(bool leading_vehicle_stalled) {
    if (!config_.spurious_tile_enabled) {
        state_.tile_yellow = false;
        return;
    }
    if (scenario_ && scenario_->tile_schedule) {
        const auto& sched = *scenario_->tile_schedule;
        state_.tile_yellow =
            sched[static_cast<size_t>(std::min<int>(state_.t, static_cast<int>(sched.size()) - 1))] != 0;
        return;
    }
    state_.tile_yellow = leading_vehicle_stalled;
}

void TrafficWorld::reset(uint64_t seed) {
    scenario_.reset();
    rng_ = Rng(seed);
    state_ = TrafficWorldState{};
    const int span = config_.num_vehicles_max - config_.num_vehicles_min + 1;
    const int n = config_.num_vehicles_min + static_cast<int>(rng_.uniform_int(static_cast<uint64_t>(span)));
    state_.vehicle_cells.clear();
    if (n > 0) {
        // Contiguous queue a randomized distance ahead, always short of the light.
        const int offset = 2 + static_cast<int>(rng_.uniform_int(3));
        for (int i = 0; i < n; ++i) state_.vehicle_cells.push_back(offset + i);
    }
    state_.light = LightPhase::Green;
    state_.red_remaining = 0;
    // At reset nothing has moved yet; the tile reflects whether the vehicle
    // directly ahead could advance if a step ran now (green light, front-to-back).
    apply_tile(false);
}

void TrafficWorld::reset(const ScenarioSpec& scenario) {
    if (scenario.light_schedule.size() < static_cast<size_t>(config_.max_steps + 1)) {
        throw ConfigError("scenario '" + scenario.name + "': light schedule shorter than max_steps+1");
    }
    if (scenario.tile_schedule &&
        scenario.tile_schedule->size() < static_cast<size_t>(config_.max_steps + 1)) {
        throw ConfigError("scenario '" + scenario.name + "': tile schedule shorter than max_steps+1");
    }
    for (size_t i = 0; i < scenario.vehicle_init.size(); ++i) {
        const int c = scenario.vehicle_init[i];
        if (c <= 0 || c >= config_.corridor_len) {
            throw ConfigError("scenario '" + scenario.name + "': vehicle cell out of range");
        }
        if (i > 0 && scenario.vehicle_init[i] <= scenario.vehicle_init[i - 1]) {
            throw ConfigError("scenario '" + scenario.name + "': vehicle cells must be strictly increasing");
        }
    }
    scenario_ = scenario;
    state_ = TrafficWorldState{};
    state_.vehicle_cells = scenario.vehicle_init;
    state_.light = scheduled_light(0);
    state_.red_remaining = state_.light == LightPhase::Red ? config_.red_duration : 0;
    apply_tile(false);
}

StepOutcome TrafficWorld::step(TrafficAction action) {
    if (state_.done) throw ContractError("traffic: step() called on a finished episode");

    // (1) Light update.
    if (scenario_) {
        state_.light = scheduled_light(state_.t + 1);
    } else if (state_.light == LightPhase::Green) {
        const int d = std::max(0, config_.light_cell - state_.agent_cell);
        const double p = config_.p_red_min +
                         (config_.p_red_max - config_.p_red_min) * static_cast<double>(d) / config_.corridor_len;
        if (rng_.bernoulli(p)) {
            state_.light = LightPhase::Red;
            state_.red_remaining = config_.red_duration;
        }
    } else {
        state_.red_remaining -= 1;
        if (state_.red_remaining <= 0) {
            state_.light = LightPhase::Green;
            state_.red_remaining = 0;
        }
    }

    // (2) Vehicles advance front-to-back; a vehicle halts at the light while
    // red or when the cell ahead is occupied. Past the last cell it exits.
    bool lead_vehicle_stalled = false;
    {
        auto& v = state_.vehicle_cells;
        std::vector<int> next = v;
        for (size_t i = v.size(); i-- > 0;) {
            const int cell = v[i];
            const bool at_red_light = state_.light == LightPhase::Red && cell == config_.light_cell;
            const int target = cell + 1;
            const bool blocked = (i + 1 < next.size()) && next[i + 1] == target;
            if (at_red_light || blocked) {
                next[i] = cell;
                if (i == 0) lead_vehicle_stalled = true;
            } else {
                next[i] = target;
            }
        }
        v.clear();
        for (int c : next) {
            if (c <= config_.corridor_len - 1) v.push_back(c);
        }
    }

    // (3) Agent action.
    StepOutcome out;
    if (action == TrafficAction::Forward) {
        const int target = state_.agent_cell + 1;
        const bool occupied =
            std::find(state_.vehicle_cells.begin(), state_.vehicle_cells.end(), target) != state_.vehicle_cells.end();
        if (occupied) {
            out.reward += config_.reward_collision;
        } else if (state_.light == LightPhase::Red && state_.agent_cell == config_.light_cell) {
            state_.agent_cell = target;
            out.reward += config_.reward_red_violation;
            out.done = true;
            out.reason = DoneReason::RedViolation;
        } else {
            state_.agent_cell = target;
            if (state_.agent_cell == config_.corridor_len - 1) {
                out.reward += config_.reward_goal;
                out.done = true;
                out.reason = DoneReason::Goal;
            }
        }
    }

    // (4) Tile reflects whether the vehicle directly ahead just stalled.
    state_.t += 1;
    apply_tile(!state_.vehicle_cells.empty() && lead_vehicle_stalled);

    // (5) Horizon.
    if (!out.done && state_.t >= config_.max_steps) {
        out.done = true;
        out.reason = DoneReason::Timeout;
    }

    state_.done = out.done;
    state_.reason = out.reason;
    return out;
}

std::vector<float> TrafficWorld::observe() const {
    const int L = config_.corridor_len;
    std::vector<float> obs(static_cast<size_t>(config_.obs_dim()), 0.0f);
    obs[static_cast<size_t>(state_.agent_cell)] = 1.0f;
    for (int c : state_.vehicle_cells) obs[static_cast<size_t>(L + c)] = 1.0f;
    obs[static_cast<size_t>(2 * L + (L - 1))] = 1.0f;  // goal channel, fixed right end
    obs[static_cast<size_t>(3 * L + 0)] = state_.light == LightPhase::Green ? 1.0f : 0.0f;
    obs[static_cast<size_t>(3 * L + 1)] = state_.light == LightPhase::Red ? 1.0f : 0.0f;
    obs[static_cast<size_t>(3 * L + 2)] = state_.tile_yellow ? 1.0f : 0.0f;
    return obs;
}

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names = {
        "simple-green-with-tile",
        "simple-red-no-tile",
        "traffic-light-switches-with-tile",
        "always-green-with-tile",
    };
    return names;
}

std::vector<ScenarioSpec> scenario_suite(const TrafficWorldConfig& config) {
    config.validate();
    const size_t n = static_cast<size_t>(config.max_steps + 1);

    std::vector<ScenarioSpec> suite;

    // Unobstructed, green throughout, tile forced on: rewards ignoring it.
    {
        ScenarioSpec s;
        s.name = "simple-green-with-tile";
        s.light_schedule.assign(n, LightPhase::Green);
        s.tile_schedule = std::vector<uint8_t>(n, 1);
        suite.push_back(std::move(s));
    }

    // Unobstructed, red phase covering the approach, tile forced off:
    // the agent must hold at the light with no tile cue.
    {
        ScenarioSpec s;
        s.name = "simple-red-no-tile";
        s.light_schedule.assign(n, LightPhase::Green);
        const int red_until = config.light_cell + config.red_duration;  // states [0, red_until)
        for (int t = 0; t < red_until && t < static_cast<int>(n); ++t) {
            s.light_schedule[static_cast<size_t>(t)] = LightPhase::Red;
        }
        s.tile_schedule = std::vector<uint8_t>(n, 0);
        suite.push_back(std::move(s));
    }

    // Behind traffic; the light turns red as the queue reaches it; tile derived.
    {
        ScenarioSpec s;
        s.name = "traffic-light-switches-with-tile";
        s.light_schedule.assign(n, LightPhase::Green);
        const int red_from = config.light_cell - 1;  // queue front arrives about now
        for (int t = red_from; t < red_from + config.red_duration && t < static_cast<int>(n); ++t) {
            s.light_schedule[static_cast<size_t>(t)] = LightPhase::Red;
        }
        s.vehicle_init = {1, 2};
        suite.push_back(std::move(s));
    }

    // Behind traffic, green throughout, tile derived (never flashes).
    {
        ScenarioSpec s;
        s.name = "always-green-with-tile";
        s.light_schedule.assign(n, LightPhase::Green);
        s.vehicle_init = {1, 2};
        suite.push_back(std::move(s));
    }

    return suite;
}

ScenarioSpec scenario_by_name(const TrafficWorldConfig& config, const std::string& name) {
    auto suite = scenario_suite(config);
    for (auto& s : suite) {
        if (s.name == name) return s;
    }
    std::ostringstream msg;
    msg << "unknown scenario '" << name << "'; valid names:";
    for (const auto& valid : scenario_names()) msg << " " << valid;
    throw ConfigError(msg.str());
}

}  // namespace oarl::envs
