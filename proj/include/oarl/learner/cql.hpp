#pragma once

#include <string>
#include <vector>

#include "oarl/data/dataset.hpp"
#include "oarl/net/adam.hpp"
#include "oarl/net/mlp.hpp"

namespace oarl::learner {

struct CqlConfig {
    double alpha0 = 1.0;       // conservatism coefficient
    double gamma = 0.99;       // discount
    double lr = 5e-3;
    size_t batch_size = 512;
    int target_update_interval = 4;
    int ensemble_size = 3;
    double clip_norm = 5.0;
    std::vector<int> hidden = {64, 64};

    void validate() const;
    static CqlConfig traffic_defaults();
    static CqlConfig maze_defaults();
};

// Online members, their frozen target copies, and per-member optimizer state.
struct EnsembleQ {
    std::vector<net::MlpParams> members;
    std::vector<net::MlpParams> targets;
    std::vector<net::AdamState> adam;
    uint64_t gradient_steps = 0;
    int obs_dim = 0;
    int action_count = 0;

    size_t size() const { return members.size(); }
    uint64_t digest() const;
};

EnsembleQ make_ensemble(int obs_dim, int action_count, const CqlConfig& cfg, uint64_t seed);

// Double-DQN regression target for one member: r + gamma * (1-done) *
// Q_target_i(s', argmax_a Q_online_i(s', a)). Reads only member i.
std::vector<float> bellman_target(const EnsembleQ& ens, size_t member, const data::Batch& batch,
                                  double gamma);

struct CqlLossReport {
    std::vector<double> member_td;  // per-member 1/2 * mean squared TD error
    double penalty = 0.0;           // logsumexp Q-bar - Q-bar(s, a_data), batch mean
    double total = 0.0;             // mean member TD + alpha0 * penalty
};

// Loss and the exact per-member upstream gradients dL/dQ^i (batch x actions).
CqlLossReport cql_loss(const EnsembleQ& ens, const data::Batch& batch, const CqlConfig& cfg,
                       std::vector<std::vector<float>>* upstream_out);

struct TrainStepReport {
    std::vector<double> member_td;
    double penalty = 0.0;
    double total = 0.0;
    double grad_norm = 0.0;  // joint pre-clip norm
    uint64_t step = 0;
};

TrainStepReport train_step(EnsembleQ& ens, const data::Batch& batch, const CqlConfig& cfg);

void sync_targets(EnsembleQ& ens);

// Ensemble-mean Q for a batch of observations (rows x action_count).
std::vector<float> ensemble_mean_q(const EnsembleQ& ens, const float* obs, size_t rows);

// Argmax of the ensemble-mean row; ties break toward the lowest index.
int greedy_action(const EnsembleQ& ens, const float* obs);
std::vector<int> greedy_actions(const EnsembleQ& ens, const float* obs, size_t rows);

// Softmax-weighted value of a Q row, computed with max subtraction.
double softmax_value(const float* q, int n);

// Per-member advantage of `action` relative to the softmax-weighted value.
double advantage(const net::MlpParams& member, const float* obs, int action);

void save_checkpoint(const EnsembleQ& ens, const std::string& path);
EnsembleQ load_checkpoint(const std::string& path);

}  // namespace oarl::learner
