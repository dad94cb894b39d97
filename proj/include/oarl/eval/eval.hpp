#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oarl/envs/maze.hpp"
#include "oarl/envs/traffic.hpp"
#include "oarl/learner/cql.hpp"

namespace oarl::eval {

struct EvalReport {
    std::vector<std::pair<std::string, double>> scenario_rewards;
    double suite_mean = 0.0;
    int epoch = -1;
    uint64_t gradient_step = 0;
    uint64_t seed = 0;
};

// Greedy rollout of the ensemble through each named corridor scenario.
// Everything is deterministic, so one episode per scenario suffices.
EvalReport evaluate_traffic_suite(const learner::EnsembleQ& ens,
                                  const envs::TrafficWorldConfig& cfg);

// Two maze cases — the fixed top-right goal and uniformly re-drawn goals —
// each averaged over `episodes_per_case` seeded episodes.
EvalReport evaluate_maze_suite(const learner::EnsembleQ& ens,
                               const envs::ConfoundedMazeConfig& cfg, size_t episodes_per_case,
                               uint64_t eval_seed);

struct CurvePoint {
    uint64_t gradient_step = 0;
    double suite_reward = 0.0;
};

struct RewardCurve {
    uint64_t seed = 0;
    std::vector<CurvePoint> points;

    void validate() const;  // gradient steps strictly increasing
};

// Interquartile mean: sort, trim floor(k/4) from each end, average the rest.
double iqm(std::vector<double> values);

// Earliest evaluation step at which the curve reaches `target` and stays at
// or above it for the next `window` evaluations. Nullopt when never sustained.
std::optional<uint64_t> steps_to_convergence(const RewardCurve& curve, double target,
                                             int window = 2);

struct AggregatePoint {
    uint64_t gradient_step = 0;
    double iqm_reward = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
};

// Cross-seed aggregation aligned by gradient step; steps missing from a seed
// (e.g. an aborted run) simply contribute nothing at that step.
std::vector<AggregatePoint> aggregate_curves(const std::vector<RewardCurve>& curves);

struct HistogramReport {
    double tail_mean = 0.0;
    double percentile = 0.0;  // rank of tail_mean among all scores, by <= count
    std::vector<double> bin_edges;   // bins + 1 monotone edges
    std::vector<uint64_t> bin_counts;
};

// Fixed-width histogram of all scores plus the percentile rank of the mean
// score over the masked tail subset.
HistogramReport score_histogram(const std::vector<double>& scores,
                                const std::vector<uint8_t>& tail_mask, size_t bins = 50);

// CSV emission. Curve rows: seed, epoch, gradient_step, scenario, reward —
// one row per scenario plus a "suite" row per evaluation.
void write_curves_csv(const std::string& path, const std::vector<EvalReport>& reports);
void write_aggregate_csv(const std::string& path, const std::vector<AggregatePoint>& points);
void write_histogram_csv(const std::string& path, const HistogramReport& report);

}  // namespace oarl::eval
