#include "oarl/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "oarl/common.hpp"
#include "oarl/rng.hpp"

namespace oarl::eval {

namespace {

double rollout_traffic(const learner::EnsembleQ& ens, envs::TrafficWorld& env) {
    double total = 0.0;
    while (!env.state().done) {
        const std::vector<float> obs = env.observe();
        const int a = learner::greedy_action(ens, obs.data());
        const envs::StepOutcome out = env.step(static_cast<envs::TrafficAction>(a));
        total += static_cast<double>(out.reward);
    }
    return total;
}

double rollout_maze(const learner::EnsembleQ& ens, envs::ConfoundedMaze& env) {
    double total = 0.0;
    while (!env.state().done) {
        const std::vector<float> obs = env.observe();
        const int a = learner::greedy_action(ens, obs.data());
        const envs::MazeStepOutcome out = env.step(static_cast<envs::MazeAction>(a));
        total += static_cast<double>(out.reward);
    }
    return total;
}

void finalize_mean(EvalReport& report) {
    double sum = 0.0;
    for (const auto& [name, reward] : report.scenario_rewards) {
        (void)name;
        sum += reward;
    }
    report.suite_mean =
        report.scenario_rewards.empty()
            ? 0.0
            : sum / static_cast<double>(report.scenario_rewards.size());
}

// Linear-interpolation percentile over a sorted copy.
double percentile_of(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = lo + 1 < values.size() ? lo + 1 : lo;
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace

EvalReport evaluate_traffic_suite(const learner::EnsembleQ& ens,
                                  const envs::TrafficWorldConfig& cfg) {
    if (ens.obs_dim != static_cast<int>(cfg.obs_dim()) || ens.action_count != cfg.action_count) {
        throw ConfigError("ensemble shape does not match the corridor environment");
    }
    EvalReport report;
    envs::TrafficWorld env(cfg);
    for (const envs::ScenarioSpec& spec : envs::scenario_suite(cfg)) {
        env.reset(spec);
        report.scenario_rewards.emplace_back(spec.name, rollout_traffic(ens, env));
    }
    finalize_mean(report);
    return report;
}

EvalReport evaluate_maze_suite(const learner::EnsembleQ& ens,
                               const envs::ConfoundedMazeConfig& cfg, size_t episodes_per_case,
                               uint64_t eval_seed) {
    if (ens.obs_dim != static_cast<int>(cfg.obs_dim()) || ens.action_count != cfg.action_count) {
        throw ConfigError("ensemble shape does not match the maze environment");
    }
    if (episodes_per_case == 0) throw ConfigError("episodes_per_case must be positive");

    EvalReport report;
    const std::pair<const char*, envs::GoalMode> cases[] = {
        {"fixed-goal", envs::GoalMode::FixedTopRight},
        {"random-goal", envs::GoalMode::UniformRandom},
    };
    for (const auto& [name, mode] : cases) {
        envs::ConfoundedMazeConfig case_cfg = cfg;
        case_cfg.goal_mode = mode;
        envs::ConfoundedMaze env(case_cfg);
        double sum = 0.0;
        for (size_t e = 0; e < episodes_per_case; ++e) {
            env.reset(derive_seed(eval_seed, name, e));
            sum += rollout_maze(ens, env);
        }
        report.scenario_rewards.emplace_back(name, sum / static_cast<double>(episodes_per_case));
    }
    finalize_mean(report);
    return report;
}

void RewardCurve::validate() const {
    for (size_t i = 1; i < points.size(); ++i) {
        if (points[i].gradient_step <= points[i - 1].gradient_step) {
            throw ContractError("reward curve steps must be strictly increasing");
        }
    }
}

double iqm(std::vector<double> values) {
    if (values.empty()) throw ContractError("interquartile mean of an empty set");
    std::sort(values.begin(), values.end());
    const size_t trim = values.size() / 4;
    double sum = 0.0;
    size_t count = 0;
    for (size_t i = trim; i < values.size() - trim; ++i) {
        sum += values[i];
        count += 1;
    }
    return sum / static_cast<double>(count);
}

std::optional<uint64_t> steps_to_convergence(const RewardCurve& curve, double target,
                                             int window) {
    if (curve.points.empty()) throw ContractError("convergence check on an empty curve");
    if (window < 0) throw ConfigError("window must be non-negative");
    curve.validate();
    const size_t w = static_cast<size_t>(window);
    for (size_t i = 0; i + w < curve.points.size(); ++i) {
        bool sustained = true;
        for (size_t j = i; j <= i + w; ++j) {
            if (curve.points[j].suite_reward < target) {
                sustained = false;
                break;
            }
        }
        if (sustained) return curve.points[i].gradient_step;
    }
    return std::nullopt;
}

std::vector<AggregatePoint> aggregate_curves(const std::vector<RewardCurve>& curves) {
    std::vector<uint64_t> steps;
    for (const RewardCurve& c : curves) {
        c.validate();
        for (const CurvePoint& p : c.points) steps.push_back(p.gradient_step);
    }
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());

    std::vector<AggregatePoint> out;
    out.reserve(steps.size());
    for (uint64_t step : steps) {
        std::vector<double> values;
        for (const RewardCurve& c : curves) {
            for (const CurvePoint& p : c.points) {
                if (p.gradient_step == step) {
                    values.push_back(p.suite_reward);
                    break;
                }
            }
        }
        AggregatePoint pt;
        pt.gradient_step = step;
        pt.iqm_reward = iqm(values);
        pt.q25 = percentile_of(values, 0.25);
        pt.q75 = percentile_of(values, 0.75);
        out.push_back(pt);
    }
    return out;
}

HistogramReport score_histogram(const std::vector<double>& scores,
                                const std::vector<uint8_t>& tail_mask, size_t bins) {
    if (scores.empty()) throw ContractError("histogram of an empty score set");
    if (tail_mask.size() != scores.size()) {
        throw ContractError("tail mask length must match the score count");
    }
    if (bins == 0) throw ConfigError("histogram needs at least one bin");

    double tail_sum = 0.0;
    size_t tail_count = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (tail_mask[i]) {
            tail_sum += scores[i];
            tail_count += 1;
        }
    }
    if (tail_count == 0) throw ContractError("tail mask selects no transitions");

    HistogramReport report;
    report.tail_mean = tail_sum / static_cast<double>(tail_count);

    size_t at_or_below = 0;
    for (double s : scores) at_or_below += (s <= report.tail_mean) ? 1 : 0;
    report.percentile =
        100.0 * static_cast<double>(at_or_below) / static_cast<double>(scores.size());

    const double lo = *std::min_element(scores.begin(), scores.end());
    const double hi = *std::max_element(scores.begin(), scores.end());
    const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
    report.bin_edges.resize(bins + 1);
    for (size_t b = 0; b <= bins; ++b) {
        report.bin_edges[b] = lo + width * static_cast<double>(b);
    }
    report.bin_counts.assign(bins, 0);
    for (double s : scores) {
        size_t b = static_cast<size_t>((s - lo) / width);
        if (b >= bins) b = bins - 1;
        report.bin_counts[b] += 1;
    }
    return report;
}

void write_curves_csv(const std::string& path, const std::vector<EvalReport>& reports) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::WriteFailed, "cannot open " + path);
    out << "seed,epoch,gradient_step,scenario,reward\n";
    out << std::setprecision(12);
    for (const EvalReport& r : reports) {
        for (const auto& [name, reward] : r.scenario_rewards) {
            out << r.seed << ',' << r.epoch << ',' << r.gradient_step << ',' << name << ','
                << reward << '\n';
        }
        out << r.seed << ',' << r.epoch << ',' << r.gradient_step << ",suite," << r.suite_mean
            << '\n';
    }
    if (!out) throw IoError(IoErrorKind::WriteFailed, "failed writing " + path);
}

void write_aggregate_csv(const std::string& path, const std::vector<AggregatePoint>& points) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::WriteFailed, "cannot open " + path);
    out << "gradient_step,iqm_reward,q25,q75\n";
    out << std::setprecision(12);
    for (const AggregatePoint& p : points) {
        out << p.gradient_step << ',' << p.iqm_reward << ',' << p.q25 << ',' << p.q75 << '\n';
    }
    if (!out) throw IoError(IoErrorKind::WriteFailed, "failed writing " + path);
}

void write_histogram_csv(const std::string& path, const HistogramReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::WriteFailed, "cannot open " + path);
    out << "# tail_mean," << std::setprecision(12) << report.tail_mean << '\n';
    out << "# percentile," << report.percentile << '\n';
    out << "bin_lo,bin_hi,count\n";
    for (size_t b = 0; b < report.bin_counts.size(); ++b) {
        out << report.bin_edges[b] << ',' << report.bin_edges[b + 1] << ','
            << report.bin_counts[b] << '\n';
    }
    if (!out) throw IoError(IoErrorKind::WriteFailed, "failed writing " + path);
}

}  // namespace oarl::eval
