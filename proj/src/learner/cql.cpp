#include "oarl/learner/cql.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "oarl/common.hpp"
#include "oarl/io.hpp"
#include "oarl/rng.hpp"

namespace oarl::learner {

void CqlConfig::validate() const {
    if (alpha0 < 0.0) throw ConfigError("alpha0 must be non-negative");
    if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("gamma must lie in [0, 1)");
    if (lr <= 0.0) throw ConfigError("lr must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (target_update_interval <= 0) throw ConfigError("target_update_interval must be positive");
    if (ensemble_size <= 0) throw ConfigError("ensemble_size must be positive");
    if (clip_norm <= 0.0) throw ConfigError("clip_norm must be positive");
    for (int h : hidden) {
        if (h <= 0) throw ConfigError("hidden layer widths must be positive");
    }
}

CqlConfig CqlConfig::traffic_defaults() {
    CqlConfig cfg;
    cfg.alpha0 = 1.0;
    cfg.gamma = 0.99;
    cfg.lr = 5e-3;
    cfg.batch_size = 512;
    cfg.target_update_interval = 4;
    cfg.ensemble_size = 3;
    cfg.clip_norm = 5.0;
    return cfg;
}

CqlConfig CqlConfig::maze_defaults() {
    CqlConfig cfg;
    cfg.alpha0 = 1.0;
    cfg.gamma = 0.99;
    cfg.lr = 1e-3;
    cfg.batch_size = 2048;
    cfg.target_update_interval = 50;
    cfg.ensemble_size = 5;
    cfg.clip_norm = 5.0;
    return cfg;
}

uint64_t EnsembleQ::digest() const {
    ByteWriter w;
    w.u32(static_cast<uint32_t>(members.size()));
    w.u64(gradient_steps);
    for (const auto& m : members) w.u64(net::param_digest(m));
    for (const auto& t : targets) w.u64(net::param_digest(t));
    const auto& buf = w.data();
    return fnv1a64(buf.data(), buf.size());
}

EnsembleQ make_ensemble(int obs_dim, int action_count, const CqlConfig& cfg, uint64_t seed) {
    cfg.validate();
    if (obs_dim <= 0) throw ConfigError("obs_dim must be positive");
    if (action_count <= 0) throw ConfigError("action_count must be positive");

    net::MlpArch arch;
    arch.input_dim = obs_dim;
    arch.hidden.assign(cfg.hidden.begin(), cfg.hidden.end());
    arch.output_dim = action_count;
    arch.validate();

    EnsembleQ ens;
    ens.obs_dim = obs_dim;
    ens.action_count = action_count;
    ens.members.reserve(static_cast<size_t>(cfg.ensemble_size));
    for (int i = 0; i < cfg.ensemble_size; ++i) {
        const uint64_t member_seed = derive_seed(seed, "q-member", static_cast<uint64_t>(i));
        ens.members.push_back(net::init(arch, member_seed));
    }
    ens.targets = ens.members;
    ens.adam.reserve(ens.members.size());
    for (const auto& m : ens.members) ens.adam.push_back(net::AdamState::zeros_like(m));
    return ens;
}

namespace {

void check_q_finite(const std::vector<float>& q, size_t member, const char* what) {
    for (float v : q) {
        if (!is_finite(v)) {
            throw DivergenceError("non-finite " + std::string(what) + " in ensemble member " +
                                  std::to_string(member));
        }
    }
}

}  // namespace

std::vector<float> bellman_target(const EnsembleQ& ens, size_t member, const data::Batch& batch,
                                  double gamma) {
    if (member >= ens.members.size()) throw ContractError("ensemble member index out of range");
    const size_t rows = batch.indices.size();
    const int ac = ens.action_count;

    const std::vector<float> q_next = net::forward(ens.members[member], batch.next_obs, rows);
    const std::vector<float> q_next_target = net::forward(ens.targets[member], batch.next_obs, rows);
    check_q_finite(q_next, member, "online next-state value");
    check_q_finite(q_next_target, member, "target next-state value");

    std::vector<float> out(rows);
    for (size_t b = 0; b < rows; ++b) {
        int best = 0;
        const float* row = q_next.data() + b * static_cast<size_t>(ac);
        for (int a = 1; a < ac; ++a) {
            if (row[a] > row[best]) best = a;
        }
        const double boot = static_cast<double>(q_next_target[b * static_cast<size_t>(ac) +
                                                              static_cast<size_t>(best)]);
        const double mask = batch.dones[b] ? 0.0 : 1.0;
        out[b] = static_cast<float>(static_cast<double>(batch.rewards[b]) + gamma * mask * boot);
    }
    return out;
}

CqlLossReport cql_loss(const EnsembleQ& ens, const data::Batch& batch, const CqlConfig& cfg,
                       std::vector<std::vector<float>>* upstream_out) {
    const size_t n = ens.members.size();
    const size_t rows = batch.indices.size();
    const int ac = ens.action_count;
    if (rows == 0) throw ContractError("cql_loss requires a non-empty batch");

    // Forward every member on the batch observations once.
    std::vector<std::vector<float>> q(n);
    for (size_t i = 0; i < n; ++i) {
        q[i] = net::forward(ens.members[i], batch.obs, rows);
        check_q_finite(q[i], i, "Q value");
    }

    // Per-member TD terms against per-member double-DQN targets.
    CqlLossReport report;
    report.member_td.resize(n, 0.0);
    std::vector<std::vector<float>> targets(n);
    for (size_t i = 0; i < n; ++i) {
        targets[i] = bellman_target(ens, i, batch, cfg.gamma);
        double acc = 0.0;
        for (size_t b = 0; b < rows; ++b) {
            const double delta =
                static_cast<double>(q[i][b * static_cast<size_t>(ac) + batch.actions[b]]) -
                static_cast<double>(targets[i][b]);
            acc += 0.5 * delta * delta;
        }
        report.member_td[i] = acc / static_cast<double>(rows);
    }

    // Ensemble-mean Q and the conservatism penalty.
    std::vector<double> mean_q(rows * static_cast<size_t>(ac), 0.0);
    for (size_t i = 0; i < n; ++i) {
        for (size_t k = 0; k < mean_q.size(); ++k) mean_q[k] += static_cast<double>(q[i][k]);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& v : mean_q) v *= inv_n;

    double penalty_acc = 0.0;
    std::vector<double> softmax(rows * static_cast<size_t>(ac), 0.0);
    for (size_t b = 0; b < rows; ++b) {
        const double* row = mean_q.data() + b * static_cast<size_t>(ac);
        double m = row[0];
        for (int a = 1; a < ac; ++a) m = std::max(m, row[a]);
        double z = 0.0;
        for (int a = 0; a < ac; ++a) z += std::exp(row[a] - m);
        const double lse = m + std::log(z);
        penalty_acc += lse - row[batch.actions[b]];
        for (int a = 0; a < ac; ++a) {
            softmax[b * static_cast<size_t>(ac) + static_cast<size_t>(a)] =
                std::exp(row[a] - m) / z;
        }
    }
    report.penalty = penalty_acc / static_cast<double>(rows);

    double td_mean = 0.0;
    for (double v : report.member_td) td_mean += v;
    td_mean *= inv_n;
    report.total = td_mean + cfg.alpha0 * report.penalty;

    if (upstream_out != nullptr) {
        upstream_out->assign(n, std::vector<float>(rows * static_cast<size_t>(ac), 0.0f));
        const double inv_rows = 1.0 / static_cast<double>(rows);
        for (size_t i = 0; i < n; ++i) {
            std::vector<float>& up = (*upstream_out)[i];
            for (size_t b = 0; b < rows; ++b) {
                const size_t base = b * static_cast<size_t>(ac);
                const double delta = static_cast<double>(q[i][base + batch.actions[b]]) -
                                     static_cast<double>(targets[i][b]);
                for (int a = 0; a < ac; ++a) {
                    const double indicator = (a == static_cast<int>(batch.actions[b])) ? 1.0 : 0.0;
                    const double td_part = delta * indicator;
                    const double pen_part =
                        cfg.alpha0 * (softmax[base + static_cast<size_t>(a)] - indicator);
                    up[base + static_cast<size_t>(a)] =
                        static_cast<float>(inv_n * inv_rows * (td_part + pen_part));
                }
            }
        }
    }
    return report;
}

TrainStepReport train_step(EnsembleQ& ens, const data::Batch& batch, const CqlConfig& cfg) {
    const size_t n = ens.members.size();
    const size_t rows = batch.indices.size();
    if (static_cast<int>(batch.obs_dim) != ens.obs_dim) {
        throw ContractError("batch observation width does not match the ensemble");
    }

    // Forward with caches so the backward pass reuses activations.
    std::vector<net::ForwardCache> caches(n);
    for (size_t i = 0; i < n; ++i) {
        net::forward_cached(ens.members[i], batch.obs.data(), rows, caches[i]);
        check_q_finite(caches[i].output, i, "Q value");
    }

    std::vector<std::vector<float>> upstream;
    const CqlLossReport loss = cql_loss(ens, batch, cfg, &upstream);

    std::vector<net::MlpGrads> grads;
    grads.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        net::MlpGrads g = net::MlpGrads::zeros_like(ens.members[i]);
        net::backward_from_cache(ens.members[i], batch.obs.data(), caches[i], upstream[i].data(),
                                 g);
        grads.push_back(std::move(g));
    }
    std::vector<net::MlpGrads*> grad_ptrs;
    grad_ptrs.reserve(n);
    for (auto& g : grads) grad_ptrs.push_back(&g);

    const double pre_clip = net::clip_global_norm(grad_ptrs, cfg.clip_norm);

    net::AdamConfig opt;
    opt.lr = cfg.lr;
    for (size_t i = 0; i < n; ++i) net::adam_step(ens.members[i], ens.adam[i], grads[i], opt);

    ens.gradient_steps += 1;
    if (ens.gradient_steps % static_cast<uint64_t>(cfg.target_update_interval) == 0) {
        sync_targets(ens);
    }

    TrainStepReport report;
    report.member_td = loss.member_td;
    report.penalty = loss.penalty;
    report.total = loss.total;
    report.grad_norm = pre_clip;
    report.step = ens.gradient_steps;
    return report;
}

void sync_targets(EnsembleQ& ens) { ens.targets = ens.members; }

std::vector<float> ensemble_mean_q(const EnsembleQ& ens, const float* obs, size_t rows) {
    const size_t n = ens.members.size();
    const size_t cells = rows * static_cast<size_t>(ens.action_count);
    std::vector<double> acc(cells, 0.0);
    std::vector<float> q(cells);
    for (size_t i = 0; i < n; ++i) {
        net::forward(ens.members[i], obs, rows, q.data());
        for (size_t k = 0; k < cells; ++k) acc[k] += static_cast<double>(q[k]);
    }
    std::vector<float> out(cells);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (size_t k = 0; k < cells; ++k) out[k] = static_cast<float>(acc[k] * inv_n);
    return out;
}

int greedy_action(const EnsembleQ& ens, const float* obs) {
    const std::vector<float> q = ensemble_mean_q(ens, obs, 1);
    int best = 0;
    for (int a = 1; a < ens.action_count; ++a) {
        if (q[static_cast<size_t>(a)] > q[static_cast<size_t>(best)]) best = a;
    }
    return best;
}

std::vector<int> greedy_actions(const EnsembleQ& ens, const float* obs, size_t rows) {
    const std::vector<float> q = ensemble_mean_q(ens, obs, rows);
    const int ac = ens.action_count;
    std::vector<int> out(rows);
    for (size_t b = 0; b < rows; ++b) {
        const float* row = q.data() + b * static_cast<size_t>(ac);
        int best = 0;
        for (int a = 1; a < ac; ++a) {
            if (row[a] > row[best]) best = a;
        }
        out[b] = best;
    }
    return out;
}

double softmax_value(const float* q, int n) {
    if (n <= 0) throw ContractError("softmax_value requires at least one action");
    double m = static_cast<double>(q[0]);
    for (int a = 1; a < n; ++a) m = std::max(m, static_cast<double>(q[a]));
    double z = 0.0;
    for (int a = 0; a < n; ++a) z += std::exp(static_cast<double>(q[a]) - m);
    double v = 0.0;
    for (int a = 0; a < n; ++a) {
        v += static_cast<double>(q[a]) * (std::exp(static_cast<double>(q[a]) - m) / z);
    }
    return v;
}

double advantage(const net::MlpParams& member, const float* obs, int action) {
    if (action < 0 || action >= member.arch.output_dim) {
        throw ContractError("advantage action index out of range");
    }
    std::vector<float> q(static_cast<size_t>(member.arch.output_dim));
    net::forward(member, obs, 1, q.data());
    return static_cast<double>(q[static_cast<size_t>(action)]) -
           softmax_value(q.data(), member.arch.output_dim);
}

namespace {
constexpr char kCheckpointMagic[] = "OARLQ";
constexpr uint32_t kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(const EnsembleQ& ens, const std::string& path) {
    ByteWriter w;
    w.u32(static_cast<uint32_t>(ens.members.size()));
    w.u32(static_cast<uint32_t>(ens.obs_dim));
    w.u32(static_cast<uint32_t>(ens.action_count));
    w.u64(ens.gradient_steps);
    for (const auto& m : ens.members) net::serialize_params(m, w);
    for (const auto& t : ens.targets) net::serialize_params(t, w);
    for (const auto& a : ens.adam) net::serialize_adam(a, w);
    write_envelope(path, kCheckpointMagic, kCheckpointVersion, w.data());
}

EnsembleQ load_checkpoint(const std::string& path) {
    const std::vector<uint8_t> payload = read_envelope(path, kCheckpointMagic, kCheckpointVersion);
    ByteReader r(payload);
    EnsembleQ ens;
    const uint32_t count = r.u32();
    ens.obs_dim = static_cast<int>(r.u32());
    ens.action_count = static_cast<int>(r.u32());
    ens.gradient_steps = r.u64();
    ens.members.reserve(count);
    for (uint32_t i = 0; i < count; ++i) ens.members.push_back(net::deserialize_params(r));
    ens.targets.reserve(count);
    for (uint32_t i = 0; i < count; ++i) ens.targets.push_back(net::deserialize_params(r));
    ens.adam.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        ens.adam.push_back(net::deserialize_adam(r, ens.members[i]));
    }
    if (!r.exhausted()) throw IoError(IoErrorKind::ChecksumMismatch, "trailing checkpoint bytes");
    for (const auto& m : ens.members) {
        if (m.arch.input_dim != ens.obs_dim || m.arch.output_dim != ens.action_count) {
            throw IoError(IoErrorKind::ChecksumMismatch,
                          "checkpoint member shape does not match its header");
        }
    }
    return ens;
}

}  // namespace oarl::learner
