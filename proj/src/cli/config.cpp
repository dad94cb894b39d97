#include "oarl/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "oarl/common.hpp"

namespace oarl::cli {
namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
    throw ConfigError("config key '" + key + "': cannot read '" + value + "' as " + expected);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) bad_value(key, value, "a number");
        return v;
    } catch (const std::logic_error&) {
        bad_value(key, value, "a number");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        if (!value.empty() && value[0] == '-') bad_value(key, value, "a non-negative integer");
        uint64_t v = std::stoull(value, &used);
        if (used != value.size()) bad_value(key, value, "a non-negative integer");
        return v;
    } catch (const std::logic_error&) {
        bad_value(key, value, "a non-negative integer");
    }
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        long long v = std::stoll(value, &used);
        if (used != value.size() || v < INT32_MIN || v > INT32_MAX) {
            bad_value(key, value, "an integer");
        }
        return static_cast<int>(v);
    } catch (const std::logic_error&) {
        bad_value(key, value, "an integer");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value, "true or false");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : value) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    cur = trim(cur);
    if (!cur.empty() || !out.empty()) out.push_back(cur);
    return out;
}

std::vector<uint64_t> parse_u64_list(const std::string& key, const std::string& value) {
    std::vector<uint64_t> out;
    for (const std::string& item : split_list(value)) {
        if (item.empty()) bad_value(key, value, "a comma-separated integer list");
        out.push_back(parse_u64(key, item));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    if (trim(value).empty()) return out;  // empty list: a linear head
    for (const std::string& item : split_list(value)) {
        if (item.empty()) bad_value(key, value, "a comma-separated integer list");
        out.push_back(parse_int(key, item));
    }
    return out;
}

const char* policy_name(data::PolicyKind kind) {
    switch (kind) {
        case data::PolicyKind::TrafficScripted: return "traffic-scripted";
        case data::PolicyKind::MazeShortestPath: return "maze-shortest-path";
    }
    throw ContractError("unknown policy kind");
}

data::PolicyKind policy_by_name(const std::string& key, const std::string& name) {
    if (name == "traffic-scripted") return data::PolicyKind::TrafficScripted;
    if (name == "maze-shortest-path") return data::PolicyKind::MazeShortestPath;
    bad_value(key, name, "'traffic-scripted' or 'maze-shortest-path'");
}

const char* mode_name(sampling::SamplerMode mode) {
    return mode == sampling::SamplerMode::DatasetRecompute ? "dataset-recompute" : "batch-priority";
}

const char* episodic_name(sampling::EpisodicMode mode) {
    return mode == sampling::EpisodicMode::Off ? "off" : "max-over-episode";
}

const char* source_name(sampling::SamplerSource source) {
    return source == sampling::SamplerSource::TrainingEnsemble ? "training-ensemble" : "external";
}

const char* goal_mode_name(envs::GoalMode mode) {
    return mode == envs::GoalMode::FixedTopRight ? "fixed-top-right" : "uniform-random";
}

struct Line {
    std::string section;
    std::string key;
    std::string value;
    size_t number;
};

std::vector<Line> tokenize(const std::string& text) {
    std::vector<Line> lines;
    std::istringstream in(text);
    std::string raw;
    size_t number = 0;
    while (std::getline(in, raw)) {
        ++number;
        const std::string stripped = trim(raw);
        if (stripped.empty() || stripped[0] == '#') continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(number) + ": expected 'section.key = value'");
        }
        const std::string key_full = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        const size_t dot = key_full.find('.');
        if (dot == std::string::npos || dot == 0 || dot + 1 == key_full.size()) {
            throw ConfigError("config line " + std::to_string(number) + ": key '" + key_full +
                              "' is not of the form section.key");
        }
        lines.push_back({key_full.substr(0, dot), key_full.substr(dot + 1), value, number});
    }
    return lines;
}

void apply_env(ExperimentConfig& cfg, const Line& ln) {
    const std::string full = ln.section + "." + ln.key;
    if (ln.key == "kind") return;  // consumed in the first pass
    if (cfg.env_kind == EnvKind::Traffic) {
        auto& t = cfg.traffic;
        if (ln.key == "corridor_len") t.corridor_len = parse_int(full, ln.value);
        else if (ln.key == "light_cell") t.light_cell = parse_int(full, ln.value);
        else if (ln.key == "num_vehicles_min") t.num_vehicles_min = parse_int(full, ln.value);
        else if (ln.key == "num_vehicles_max") t.num_vehicles_max = parse_int(full, ln.value);
        else if (ln.key == "p_red_max") t.p_red_max = parse_double(full, ln.value);
        else if (ln.key == "p_red_min") t.p_red_min = parse_double(full, ln.value);
        else if (ln.key == "red_duration") t.red_duration = parse_int(full, ln.value);
        else if (ln.key == "max_steps") t.max_steps = parse_int(full, ln.value);
        else if (ln.key == "spurious_tile_enabled") t.spurious_tile_enabled = parse_bool(full, ln.value);
        else if (ln.key == "reward_goal") t.reward_goal = static_cast<float>(parse_double(full, ln.value));
        else if (ln.key == "reward_red_violation") t.reward_red_violation = static_cast<float>(parse_double(full, ln.value));
        else if (ln.key == "reward_collision") t.reward_collision = static_cast<float>(parse_double(full, ln.value));
        else throw ConfigError("config line " + std::to_string(ln.number) + ": unknown key '" + full + "' for env.kind = traffic");
    } else {
        auto& m = cfg.maze;
        if (ln.key == "grid_size") m.grid_size = parse_int(full, ln.value);
        else if (ln.key == "wall_layout_seed") m.wall_layout_seed = parse_u64(full, ln.value);
        else if (ln.key == "goal_mode") {
            if (ln.value == "fixed-top-right") m.goal_mode = envs::GoalMode::FixedTopRight;
            else if (ln.value == "uniform-random") m.goal_mode = envs::GoalMode::UniformRandom;
            else bad_value(full, ln.value, "'fixed-top-right' or 'uniform-random'");
        }
        else if (ln.key == "reward_goal") m.reward_goal = static_cast<float>(parse_double(full, ln.value));
        else if (ln.key == "max_steps") m.max_steps = parse_int(full, ln.value);
        else throw ConfigError("config line " + std::to_string(ln.number) + ": unknown key '" + full + "' for env.kind = maze");
    }
}

void apply_dataset(DatasetSection& d, const Line& ln) {
    const std::string full = ln.section + "." + ln.key;
    if (ln.key == "path") d.path = ln.value;
    else if (ln.key == "episodes") d.episodes = parse_u64(full, ln.value);
    else if (ln.key == "policy") d.policy = policy_by_name(full, ln.value);
    else if (ln.key == "epsilon") d.epsilon = parse_double(full, ln.value);
    else if (ln.key == "seed") d.seed = parse_u64(full, ln.value);
    else if (ln.key == "subsample_fraction") d.subsample_fraction = parse_double(full, ln.value);
    else if (ln.key == "subsample_seed") d.subsample_seed = parse_u64(full, ln.value);
    else throw ConfigError("config line " + std::to_string(ln.number) + ": unknown key '" + full + "'");
}

void apply_learner(learner::CqlConfig& l, const Line& ln) {
    const std::string full = ln.section + "." + ln.key;
    if (ln.key == "alpha0") l.alpha0 = parse_double(full, ln.value);
    else if (ln.key == "gamma") l.gamma = parse_double(full, ln.value);
    else if (ln.key == "lr") l.lr = parse_double(full, ln.value);
    else if (ln.key == "batch_size") l.batch_size = parse_u64(full, ln.value);
    else if (ln.key == "target_update_interval") l.target_update_interval = parse_int(full, ln.value);
    else if (ln.key == "ensemble_size") l.ensemble_size = parse_int(full, ln.value);
    else if (ln.key == "clip_norm") l.clip_norm = parse_double(full, ln.value);
    else if (ln.key == "hidden") l.hidden = parse_int_list(full, ln.value);
    else throw ConfigError("config line " + std::to_string(ln.number) + ": unknown key '" + full + "'");
}

void apply_sampler(sampling::SamplerConfig& s, const Line& ln) {
    const std::string full = ln.section + "." + ln.key;
    if (ln.key == "kind") s.kind = sampling::acquisition_by_name(ln.value);
    else if (ln.key == "mode") {
        if (ln.value == "dataset-recompute") s.mode = sampling::SamplerMode::DatasetRecompute;
        else if (ln.value == "batch-priority") s.mode = sampling::SamplerMode::BatchPriority;
        else bad_value(full, ln.value, "'dataset-recompute' or 'batch-priority'");
    }
    else if (ln.key == "rescore_interval") s.rescore_interval = parse_u64(full, ln.value);
    else if (ln.key == "alpha_per") s.alpha_per = parse_double(full, ln.value);
    else if (ln.key == "eps_per") s.eps_per = parse_double(full, ln.value);
    else if (ln.key == "beta") s.beta = parse_double(full, ln.value);
    else if (ln.key == "beta_increment") s.beta_increment = parse_double(full, ln.value);
    else if (ln.key == "episodic") {
        if (ln.value == "off") s.episodic = sampling::EpisodicMode::Off;
        else if (ln.value == "max-over-episode") s.episodic = sampling::EpisodicMode::MaxOverEpisode;
        else bad_value(full, ln.value, "'off' or 'max-over-episode'");
    }
    else if (ln.key == "warm_start_epochs") s.warm_start_epochs = parse_int(full, ln.value);
    else if (ln.key == "source") {
        if (ln.value == "training-ensemble") s.source = sampling::SamplerSource::TrainingEnsemble;
        else if (ln.value == "external") s.source = sampling::SamplerSource::External;
        else bad_value(full, ln.value, "'training-ensemble' or 'external'");
    }
    else if (ln.key == "external_checkpoint") s.external_checkpoint = ln.value;
    else throw ConfigError("config line " + std::to_string(ln.number) + ": unknown key '" + full + "'");
}

void apply_eval(EvalSection& e, const Line& ln) {
    const std::string full = ln.section + "." + ln.key;
    if (ln.key == "epochs") e.epochs = parse_u64(full, ln.value);
    else if (ln.key == "steps_per_epoch") e.steps_per_epoch = parse_u64(full, ln.value);
    else if (ln.key == "evals_per_epoch") e.evals_per_epoch = parse_u64(full, ln.value);
    else if (ln.key == "episodes_per_case") e.episodes_per_case = parse_u64(full, ln.value);
    else if (ln.key == "seed") e.seed = parse_u64(full, ln.value);
    else throw ConfigError("config line " + std::to_string(ln.number) + ": unknown key '" + full + "'");
}

void apply_run(ExperimentConfig& cfg, bool& seeds_given, const Line& ln) {
    const std::string full = ln.section + "." + ln.key;
    if (ln.key == "seeds") {
        cfg.seeds = parse_u64_list(full, ln.value);
        seeds_given = true;
    } else if (ln.key == "output_dir") {
        cfg.output_dir = ln.value;
    } else {
        throw ConfigError("config line " + std::to_string(ln.number) + ": unknown key '" + full + "'");
    }
}

std::string format_double(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

}  // namespace

int ExperimentConfig::env_obs_dim() const {
    return env_kind == EnvKind::Traffic ? traffic.obs_dim() : maze.obs_dim();
}

int ExperimentConfig::env_action_count() const {
    return env_kind == EnvKind::Traffic ? envs::TrafficWorldConfig::action_count
                                        : envs::ConfoundedMazeConfig::action_count;
}

const char* ExperimentConfig::env_name() const {
    return env_kind == EnvKind::Traffic ? "traffic" : "maze";
}

void ExperimentConfig::validate() const {
    if (env_kind == EnvKind::Traffic) traffic.validate();
    else maze.validate();
    learner.validate();
    // An external scoring ensemble may have a different member count; its
    // shape is checked when the checkpoint is opened.
    if (sampler.source == sampling::SamplerSource::TrainingEnsemble) {
        sampler.validate(learner.ensemble_size);
    } else {
        sampling::SamplerConfig relaxed = sampler;
        relaxed.validate(2);
    }
    if (dataset.path.empty()) throw ConfigError("dataset.path must not be empty");
    if (dataset.epsilon < 0.0 || dataset.epsilon > 1.0) {
        throw ConfigError("dataset.epsilon must lie in [0, 1]");
    }
    if (dataset.subsample_fraction <= 0.0 || dataset.subsample_fraction > 1.0) {
        throw ConfigError("dataset.subsample_fraction must lie in (0, 1]");
    }
    if (eval.epochs == 0) throw ConfigError("eval.epochs must be positive");
    if (eval.steps_per_epoch == 0) throw ConfigError("eval.steps_per_epoch must be positive");
    if (eval.evals_per_epoch == 0 || eval.steps_per_epoch % eval.evals_per_epoch != 0) {
        throw ConfigError("eval.evals_per_epoch must divide eval.steps_per_epoch");
    }
    if (eval.episodes_per_case == 0) throw ConfigError("eval.episodes_per_case must be positive");
    if (seeds.empty()) throw ConfigError("run.seeds must not be empty");
    std::set<uint64_t> unique(seeds.begin(), seeds.end());
    if (unique.size() != seeds.size()) throw ConfigError("run.seeds must be distinct");
    if (output_dir.empty()) throw ConfigError("run.output_dir must not be empty");
}

ExperimentConfig parse_config(const std::string& text) {
    const std::vector<Line> lines = tokenize(text);

    ExperimentConfig cfg;
    // First pass: the environment kind decides which defaults seed the rest.
    for (const Line& ln : lines) {
        if (ln.section == "env" && ln.key == "kind") {
            if (ln.value == "traffic") cfg.env_kind = EnvKind::Traffic;
            else if (ln.value == "maze") cfg.env_kind = EnvKind::Maze;
            else bad_value("env.kind", ln.value, "'traffic' or 'maze'");
        }
    }
    if (cfg.env_kind == EnvKind::Traffic) {
        cfg.learner = learner::CqlConfig::traffic_defaults();
    } else {
        cfg.learner = learner::CqlConfig::maze_defaults();
        cfg.dataset.policy = data::PolicyKind::MazeShortestPath;
        cfg.dataset.episodes = 1000;
    }

    bool seeds_given = false;
    for (const Line& ln : lines) {
        if (ln.section == "env") apply_env(cfg, ln);
        else if (ln.section == "dataset") apply_dataset(cfg.dataset, ln);
        else if (ln.section == "learner") apply_learner(cfg.learner, ln);
        else if (ln.section == "sampler") apply_sampler(cfg.sampler, ln);
        else if (ln.section == "eval") apply_eval(cfg.eval, ln);
        else if (ln.section == "run") apply_run(cfg, seeds_given, ln);
        else throw ConfigError("config line " + std::to_string(ln.number) + ": unknown section '" + ln.section + "'");
    }

    if (!seeds_given) {
        const size_t count = cfg.env_kind == EnvKind::Traffic ? 7 : 9;
        cfg.seeds.clear();
        for (size_t i = 1; i <= count; ++i) cfg.seeds.push_back(i);
    }

    cfg.validate();
    return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "env.kind = " << cfg.env_name() << "\n";
    if (cfg.env_kind == EnvKind::Traffic) {
        const auto& t = cfg.traffic;
        out << "env.corridor_len = " << t.corridor_len << "\n";
        out << "env.light_cell = " << t.light_cell << "\n";
        out << "env.num_vehicles_min = " << t.num_vehicles_min << "\n";
        out << "env.num_vehicles_max = " << t.num_vehicles_max << "\n";
        out << "env.p_red_max = " << format_double(t.p_red_max) << "\n";
        out << "env.p_red_min = " << format_double(t.p_red_min) << "\n";
        out << "env.red_duration = " << t.red_duration << "\n";
        out << "env.max_steps = " << t.max_steps << "\n";
        out << "env.spurious_tile_enabled = " << (t.spurious_tile_enabled ? "true" : "false") << "\n";
        out << "env.reward_goal = " << format_double(t.reward_goal) << "\n";
        out << "env.reward_red_violation = " << format_double(t.reward_red_violation) << "\n";
        out << "env.reward_collision = " << format_double(t.reward_collision) << "\n";
    } else {
        const auto& m = cfg.maze;
        out << "env.grid_size = " << m.grid_size << "\n";
        out << "env.wall_layout_seed = " << m.wall_layout_seed << "\n";
        out << "env.goal_mode = " << goal_mode_name(m.goal_mode) << "\n";
        out << "env.reward_goal = " << format_double(m.reward_goal) << "\n";
        out << "env.max_steps = " << m.max_steps << "\n";
    }
    out << "dataset.path = " << cfg.dataset.path << "\n";
    out << "dataset.episodes = " << cfg.dataset.episodes << "\n";
    out << "dataset.policy = " << policy_name(cfg.dataset.policy) << "\n";
    out << "dataset.epsilon = " << format_double(cfg.dataset.epsilon) << "\n";
    out << "dataset.seed = " << cfg.dataset.seed << "\n";
    out << "dataset.subsample_fraction = " << format_double(cfg.dataset.subsample_fraction) << "\n";
    out << "dataset.subsample_seed = " << cfg.dataset.subsample_seed << "\n";
    const auto& l = cfg.learner;
    out << "learner.alpha0 = " << format_double(l.alpha0) << "\n";
    out << "learner.gamma = " << format_double(l.gamma) << "\n";
    out << "learner.lr = " << format_double(l.lr) << "\n";
    out << "learner.batch_size = " << l.batch_size << "\n";
    out << "learner.target_update_interval = " << l.target_update_interval << "\n";
    out << "learner.ensemble_size = " << l.ensemble_size << "\n";
    out << "learner.clip_norm = " << format_double(l.clip_norm) << "\n";
    out << "learner.hidden = ";
    for (size_t i = 0; i < l.hidden.size(); ++i) out << (i ? "," : "") << l.hidden[i];
    out << "\n";
    const auto& s = cfg.sampler;
    out << "sampler.kind = " << sampling::acquisition_name(s.kind) << "\n";
    out << "sampler.mode = " << mode_name(s.mode) << "\n";
    out << "sampler.rescore_interval = " << s.rescore_interval << "\n";
    out << "sampler.alpha_per = " << format_double(s.alpha_per) << "\n";
    out << "sampler.eps_per = " << format_double(s.eps_per) << "\n";
    out << "sampler.beta = " << format_double(s.beta) << "\n";
    out << "sampler.beta_increment = " << format_double(s.beta_increment) << "\n";
    out << "sampler.episodic = " << episodic_name(s.episodic) << "\n";
    out << "sampler.warm_start_epochs = " << s.warm_start_epochs << "\n";
    out << "sampler.source = " << source_name(s.source) << "\n";
    out << "sampler.external_checkpoint = " << s.external_checkpoint << "\n";
    const auto& e = cfg.eval;
    out << "eval.epochs = " << e.epochs << "\n";
    out << "eval.steps_per_epoch = " << e.steps_per_epoch << "\n";
    out << "eval.evals_per_epoch = " << e.evals_per_epoch << "\n";
    out << "eval.episodes_per_case = " << e.episodes_per_case << "\n";
    out << "eval.seed = " << e.seed << "\n";
    out << "run.seeds = ";
    for (size_t i = 0; i < cfg.seeds.size(); ++i) out << (i ? "," : "") << cfg.seeds[i];
    out << "\n";
    out << "run.output_dir = " << cfg.output_dir << "\n";
    return out.str();
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrorKind::ReadFailed, "cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(IoErrorKind::WriteFailed, "cannot open config file for write: " + path);
    out << serialize_config(cfg);
    if (!out) throw IoError(IoErrorKind::WriteFailed, "failed writing config file: " + path);
}

}  // namespace oarl::cli
