#include "oarl/sampling/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "oarl/common.hpp"
#include "oarl/parallel.hpp"

namespace oarl::sampling {

const char* acquisition_name(AcquisitionKind kind) {
    switch (kind) {
        case AcquisitionKind::Uniform: return "uniform";
        case AcquisitionKind::TDError: return "td-error";
        case AcquisitionKind::VarianceData: return "variance-data";
        case AcquisitionKind::VarianceGreedy: return "variance-greedy";
    }
    throw ContractError("unknown acquisition kind");
}

AcquisitionKind acquisition_by_name(const std::string& name) {
    if (name == "uniform") return AcquisitionKind::Uniform;
    if (name == "td-error") return AcquisitionKind::TDError;
    if (name == "variance-data") return AcquisitionKind::VarianceData;
    if (name == "variance-greedy") return AcquisitionKind::VarianceGreedy;
    throw ConfigError("unknown acquisition kind '" + name +
                      "'; expected one of uniform, td-error, variance-data, variance-greedy");
}

void SamplerConfig::validate(int ensemble_size) const {
    if (rescore_interval < 1) throw ConfigError("rescore_interval must be at least 1");
    if (alpha_per < 0.0) throw ConfigError("alpha_per must be non-negative");
    if (eps_per <= 0.0) throw ConfigError("eps_per must be positive");
    if (beta != 0.0 || beta_increment != 0.0) {
        throw ConfigError("importance-weight correction is not supported; beta and its "
                          "increment must stay zero");
    }
    if (warm_start_epochs < 0) throw ConfigError("warm_start_epochs must be non-negative");
    const bool variance_kind =
        kind == AcquisitionKind::VarianceData || kind == AcquisitionKind::VarianceGreedy;
    if (variance_kind && ensemble_size < 2) {
        throw ConfigError("variance acquisition needs an ensemble of at least 2 members");
    }
    if (source == SamplerSource::External && external_checkpoint.empty()) {
        throw ConfigError("external sampler source requires a checkpoint path");
    }
}

void ScoreTable::refresh_cache() {
    const size_t n = scores.size();
    prefix.assign(n, 0.0);
    double sum = 0.0;
    for (double s : scores) {
        if (!(s >= 0.0)) throw ContractError("acquisition scores must be non-negative");
        sum += s;
    }
    uniform_fallback = !(sum > 0.0);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        acc += uniform_fallback ? 1.0 / static_cast<double>(n) : scores[i] / sum;
        prefix[i] = acc;
    }
    if (n > 0) prefix[n - 1] = 1.0;
}

std::vector<double> score_td_error(const learner::EnsembleQ& ens, const data::Batch& batch,
                                   double gamma) {
    const size_t rows = batch.size();
    const size_t n = ens.size();
    const int ac = ens.action_count;
    std::vector<double> out(rows, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const std::vector<float> q = net::forward(ens.members[i], batch.obs, rows);
        const std::vector<float> targets = learner::bellman_target(ens, i, batch, gamma);
        for (size_t b = 0; b < rows; ++b) {
            const double delta =
                static_cast<double>(q[b * static_cast<size_t>(ac) + batch.actions[b]]) -
                static_cast<double>(targets[b]);
            out[b] += std::abs(delta);
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& v : out) v *= inv_n;
    return out;
}

std::vector<double> score_variance(const learner::EnsembleQ& ens, const data::Batch& batch,
                                   bool greedy) {
    const size_t n = ens.size();
    if (n < 2) {
        throw ConfigError("variance acquisition needs an ensemble of at least 2 members");
    }
    const size_t rows = batch.size();
    const int ac = ens.action_count;

    std::vector<std::vector<float>> q(n);
    for (size_t i = 0; i < n; ++i) q[i] = net::forward(ens.members[i], batch.obs, rows);

    // Pick the action each transition is scored at.
    std::vector<int> at(rows);
    if (greedy) {
        for (size_t b = 0; b < rows; ++b) {
            const size_t base = b * static_cast<size_t>(ac);
            int best = 0;
            double best_v = -1e300;
            for (int a = 0; a < ac; ++a) {
                double mean = 0.0;
                for (size_t i = 0; i < n; ++i) {
                    mean += static_cast<double>(q[i][base + static_cast<size_t>(a)]);
                }
                if (mean > best_v) {
                    best_v = mean;
                    best = a;
                }
            }
            at[b] = best;
        }
    } else {
        for (size_t b = 0; b < rows; ++b) at[b] = static_cast<int>(batch.actions[b]);
    }

    std::vector<double> out(rows, 0.0);
    std::vector<double> adv(n, 0.0);
    for (size_t b = 0; b < rows; ++b) {
        const size_t base = b * static_cast<size_t>(ac);
        double mean = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const float* row = q[i].data() + base;
            adv[i] = static_cast<double>(row[at[b]]) - learner::softmax_value(row, ac);
            mean += adv[i];
        }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (size_t i = 0; i < n; ++i) var += (adv[i] - mean) * (adv[i] - mean);
        out[b] = var / static_cast<double>(n);
    }
    return out;
}

std::vector<double> score_batch(const learner::EnsembleQ& ens, const data::Batch& batch,
                                AcquisitionKind kind, double gamma) {
    switch (kind) {
        case AcquisitionKind::Uniform: return std::vector<double>(batch.size(), 1.0);
        case AcquisitionKind::TDError: return score_td_error(ens, batch, gamma);
        case AcquisitionKind::VarianceData: return score_variance(ens, batch, false);
        case AcquisitionKind::VarianceGreedy: return score_variance(ens, batch, true);
    }
    throw ContractError("unknown acquisition kind");
}

std::vector<double> score_dataset(const learner::EnsembleQ& ens,
                                  const data::TransitionDataset& ds, AcquisitionKind kind,
                                  double gamma) {
    const size_t n = ds.size();
    std::vector<double> out(n, 0.0);
    if (kind == AcquisitionKind::Uniform) {
        std::fill(out.begin(), out.end(), 1.0);
        return out;
    }
    parallel_for_chunks(n, 8192, [&](size_t begin, size_t end) {
        std::vector<uint64_t> idx(end - begin);
        for (size_t i = begin; i < end; ++i) idx[i - begin] = i;
        const data::Batch chunk = data::gather(ds, idx);
        const std::vector<double> scores = score_batch(ens, chunk, kind, gamma);
        std::copy(scores.begin(), scores.end(), out.begin() + static_cast<ptrdiff_t>(begin));
    });
    return out;
}

std::vector<uint64_t> normalize_and_sample(ScoreTable& table, size_t batch_size, Rng& rng) {
    if (table.scores.empty()) throw ContractError("cannot sample from an empty score table");
    table.refresh_cache();
    std::vector<uint64_t> out(batch_size);
    for (size_t k = 0; k < batch_size; ++k) {
        const double u = rng.uniform_real();
        const auto it = std::upper_bound(table.prefix.begin(), table.prefix.end(), u);
        size_t idx = static_cast<size_t>(it - table.prefix.begin());
        if (idx >= table.scores.size()) idx = table.scores.size() - 1;
        out[k] = idx;
    }
    return out;
}

bool maybe_rescore(ScoreTable& table, const learner::EnsembleQ& ens,
                   const data::TransitionDataset& ds, uint64_t step, const SamplerConfig& cfg,
                   double gamma) {
    if (cfg.mode != SamplerMode::DatasetRecompute) {
        throw ContractError("periodic rescoring applies only to the dataset-recompute mode");
    }
    const bool first_fill = table.scores.size() != ds.size();
    const bool stale = step >= table.last_full_rescore_step &&
                       step - table.last_full_rescore_step >= cfg.rescore_interval;
    if (!first_fill && !stale) return false;
    table.scores = score_dataset(ens, ds, cfg.kind, gamma);
    if (cfg.episodic == EpisodicMode::MaxOverEpisode) {
        episodic_aggregate(table.scores, ds.episode_offsets);
    }
    table.last_full_rescore_step = step;
    table.refresh_cache();
    return true;
}

void episodic_aggregate(std::vector<double>& scores,
                        const std::vector<uint64_t>& episode_offsets) {
    if (episode_offsets.empty() || episode_offsets.back() != scores.size()) {
        throw ContractError("episode offsets do not cover the score table");
    }
    for (size_t e = 0; e + 1 < episode_offsets.size(); ++e) {
        const size_t lo = episode_offsets[e];
        const size_t hi = episode_offsets[e + 1];
        double m = 0.0;
        for (size_t i = lo; i < hi; ++i) m = std::max(m, scores[i]);
        for (size_t i = lo; i < hi; ++i) scores[i] = m;
    }
}

namespace {
size_t next_pow2(size_t v) {
    size_t p = 1;
    while (p < v) p <<= 1;
    return p;
}
}  // namespace

SumTree::SumTree(size_t leaves, double initial_priority) {
    cap_ = next_pow2(std::max<size_t>(1, leaves));
    n_ = leaves;
    tree_.assign(2 * cap_, 0.0);
    for (size_t i = 0; i < n_; ++i) tree_[cap_ + i] = initial_priority;
    for (size_t i = cap_ - 1; i >= 1; --i) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
}

double SumTree::total() const { return tree_.empty() ? 0.0 : tree_[1]; }

double SumTree::get(size_t index) const {
    if (index >= n_) throw ContractError("priority index out of range");
    return tree_[cap_ + index];
}

void SumTree::repair_path(size_t leaf_slot) {
    for (size_t p = leaf_slot / 2; p >= 1; p /= 2) tree_[p] = tree_[2 * p] + tree_[2 * p + 1];
}

void SumTree::set(size_t index, double priority) {
    if (index >= n_) throw ContractError("priority index out of range");
    if (!(priority >= 0.0)) throw ContractError("priorities must be non-negative");
    tree_[cap_ + index] = priority;
    repair_path(cap_ + index);
}

double SumTree::max_priority() const {
    double m = 0.0;
    for (size_t i = 0; i < n_; ++i) m = std::max(m, tree_[cap_ + i]);
    return m;
}

void SumTree::append() {
    const double p = n_ == 0 ? 1.0 : max_priority();
    if (n_ == cap_ || tree_.empty()) {
        const size_t new_cap = next_pow2(std::max<size_t>(1, n_ + 1));
        std::vector<double> old_leaves(n_);
        for (size_t i = 0; i < n_; ++i) old_leaves[i] = tree_[cap_ + i];
        cap_ = new_cap;
        tree_.assign(2 * cap_, 0.0);
        for (size_t i = 0; i < n_; ++i) tree_[cap_ + i] = old_leaves[i];
        for (size_t i = cap_ - 1; i >= 1; --i) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
    }
    tree_[cap_ + n_] = p;
    n_ += 1;
    repair_path(cap_ + n_ - 1);
}

size_t SumTree::find_prefix(double mass) const {
    if (n_ == 0 || !(total() > 0.0)) throw ContractError("cannot sample from an empty priority tree");
    if (mass < 0.0) mass = 0.0;
    if (mass >= total()) mass = total() * (1.0 - 1e-15);
    size_t node = 1;
    while (node < cap_) {
        const size_t left = 2 * node;
        if (mass < tree_[left]) {
            node = left;
        } else {
            mass -= tree_[left];
            node = left + 1;
        }
    }
    size_t idx = node - cap_;
    if (idx >= n_) idx = n_ - 1;
    return idx;
}

double SumTree::recompute_total() const {
    double sum = 0.0;
    for (size_t i = 0; i < n_; ++i) sum += tree_[cap_ + i];
    return sum;
}

double priority_from_score(double score, const SamplerConfig& cfg) {
    if (!(score >= 0.0)) throw ContractError("acquisition scores must be non-negative");
    return std::pow(score + cfg.eps_per, cfg.alpha_per);
}

std::vector<uint64_t> priority_sample(const SumTree& tree, size_t batch_size, Rng& rng) {
    if (tree.size() == 0 || !(tree.total() > 0.0)) {
        throw ContractError("cannot sample from an empty priority tree");
    }
    std::vector<uint64_t> out(batch_size);
    const double seg = tree.total() / static_cast<double>(batch_size);
    for (size_t k = 0; k < batch_size; ++k) {
        const double u = (static_cast<double>(k) + rng.uniform_real()) * seg;
        out[k] = tree.find_prefix(u);
    }
    return out;
}

void priority_update(SumTree& tree, const std::vector<uint64_t>& indices,
                     const std::vector<double>& scores, const SamplerConfig& cfg) {
    if (indices.size() != scores.size()) {
        throw ContractError("priority update needs one score per index");
    }
    for (size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= tree.size()) throw ContractError("priority index out of range");
        tree.set(indices[k], priority_from_score(scores[k], cfg));
    }
}

AcquisitionKind effective_sampler(uint64_t step, int epoch, const SamplerConfig& cfg) {
    (void)step;
    if (epoch < cfg.warm_start_epochs) return AcquisitionKind::Uniform;
    return cfg.kind;
}

void write_score_csv(const std::string& path, const ScoreTable& table,
                     const data::TransitionDataset& ds) {
    if (table.scores.size() != ds.size()) {
        throw ContractError("score table does not match the dataset size");
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::WriteFailed, "cannot open " + path);
    out << "transition_index,episode_id,score\n";
    out << std::setprecision(12);
    for (size_t i = 0; i < table.scores.size(); ++i) {
        out << i << ',' << ds.episode_of(i) << ',' << table.scores[i] << '\n';
    }
    if (!out) throw IoError(IoErrorKind::WriteFailed, "failed writing " + path);
}

}  // namespace oarl::sampling
