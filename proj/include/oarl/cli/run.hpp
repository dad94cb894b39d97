#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "oarl/cli/config.hpp"
#include "oarl/eval/eval.hpp"

namespace oarl::cli {

// Exit-code categories for the command-line shell.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDivergence = 4;

struct CollectOutcome {
    std::string dataset_path;
    std::string manifest_path;
    uint64_t episodes = 0;
    uint64_t transitions = 0;
    uint64_t file_checksum = 0;
};

// Rolls out the behavior policy, writes the dataset file plus a text
// manifest beside it describing what was recorded.
CollectOutcome run_collect(const ExperimentConfig& cfg, std::ostream& log);

struct TrainSeedOutcome {
    uint64_t seed = 0;
    bool diverged = false;
    std::string diagnostic;        // non-empty when diverged
    eval::RewardCurve curve;       // suite reward after each evaluation
    std::string checkpoint_path;   // final learner weights (empty when diverged)
};

struct TrainOutcome {
    std::vector<TrainSeedOutcome> seeds;
    std::vector<eval::AggregatePoint> aggregate;  // across completed seeds

    bool any_divergence() const;
    size_t completed_seeds() const;
};

// Trains every configured seed: build the ensemble, run the warm-start
// epoch, then alternate acquisition sampling with gradient steps, evaluating
// the policy suite on the configured cadence. A diverging seed is aborted
// with a diagnostic while the remaining seeds continue. Outputs per seed:
// <output_dir>/seed-<s>/{curve.csv, checkpoint.bin}; run-level:
// config.txt and aggregate.csv.
TrainOutcome run_train(const ExperimentConfig& cfg, std::ostream& log);

// Loads a checkpoint and evaluates the suite once; no training. Writes
// <output_dir>/evaluation.csv.
eval::EvalReport run_evaluate(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                              std::ostream& log);

struct RunComparison {
    std::string label;
    std::vector<eval::AggregatePoint> aggregate;
    std::optional<uint64_t> convergence_step;
};

struct CompareOutcome {
    std::vector<RunComparison> runs;
};

// Reads the curve files of one or more training run directories, aligns
// them by gradient step, and emits per-run IQM aggregates, a convergence
// table at the given target, and a self-contained SVG reward plot.
CompareOutcome run_compare(const std::vector<std::string>& run_dirs, const std::string& out_dir,
                           double target, int window, std::ostream& log);

// Scores the whole dataset with the configured acquisition and reports how
// the rare-case transitions (flashing tile + forward action) rank inside
// the full score distribution. Writes <output_dir>/histogram.csv.
eval::HistogramReport run_histogram(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                                    std::ostream& log);

}  // namespace oarl::cli
