#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oarl/data/policy.hpp"
#include "oarl/envs/maze.hpp"
#include "oarl/envs/traffic.hpp"
#include "oarl/learner/cql.hpp"
#include "oarl/sampling/sampler.hpp"

namespace oarl::cli {

enum class EnvKind { Traffic, Maze };

// Where training data comes from: `path` names the on-disk file that
// `collect` writes and the other subcommands read; the remaining fields
// describe the collection itself. A fraction below one keeps a seeded
// episode-level subsample of the loaded file.
struct DatasetSection {
    std::string path = "dataset.bin";
    uint64_t episodes = 7000;
    data::PolicyKind policy = data::PolicyKind::TrafficScripted;
    double epsilon = 0.0;
    uint64_t seed = 0;
    double subsample_fraction = 1.0;
    uint64_t subsample_seed = 0;
};

struct EvalSection {
    uint64_t epochs = 10;
    uint64_t steps_per_epoch = 200;
    uint64_t evals_per_epoch = 1;   // must divide steps_per_epoch
    uint64_t episodes_per_case = 5; // maze suite only
    uint64_t seed = 1234;           // shared across training seeds for comparability
};

// One experiment: environment, data source, learner, sampler, evaluation
// cadence, training seeds, and where outputs land.
struct ExperimentConfig {
    EnvKind env_kind = EnvKind::Traffic;
    envs::TrafficWorldConfig traffic;
    envs::ConfoundedMazeConfig maze;
    DatasetSection dataset;
    learner::CqlConfig learner;
    sampling::SamplerConfig sampler;
    EvalSection eval;
    std::vector<uint64_t> seeds;  // defaulted per environment when absent
    std::string output_dir = "runs/out";

    int env_obs_dim() const;
    int env_action_count() const;
    const char* env_name() const;

    void validate() const;
};

// Line-oriented `section.key = value` text. Blank lines and lines starting
// with '#' are skipped; later occurrences of a key win; unknown keys are
// rejected. parse(serialize(c)) == c holds for every valid config.
ExperimentConfig parse_config(const std::string& text);
std::string serialize_config(const ExperimentConfig& cfg);

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

}  // namespace oarl::cli
