#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oarl/data/dataset.hpp"
#include "oarl/learner/cql.hpp"
#include "oarl/rng.hpp"

namespace oarl::sampling {

enum class AcquisitionKind { Uniform, TDError, VarianceData, VarianceGreedy };
enum class SamplerMode { DatasetRecompute, BatchPriority };
enum class EpisodicMode { Off, MaxOverEpisode };
enum class SamplerSource { TrainingEnsemble, External };

const char* acquisition_name(AcquisitionKind kind);
AcquisitionKind acquisition_by_name(const std::string& name);

struct SamplerConfig {
    AcquisitionKind kind = AcquisitionKind::Uniform;
    SamplerMode mode = SamplerMode::DatasetRecompute;
    uint64_t rescore_interval = 4;  // gradient steps between full rescores
    double alpha_per = 0.6;         // priority exponent
    double eps_per = 1e-6;          // additive priority constant
    double beta = 0.0;              // importance-weight exponent, kept at zero
    double beta_increment = 0.0;
    EpisodicMode episodic = EpisodicMode::Off;
    int warm_start_epochs = 1;
    SamplerSource source = SamplerSource::TrainingEnsemble;
    std::string external_checkpoint;  // scoring ensemble location when External

    void validate(int ensemble_size) const;
};

// Raw per-transition scores plus a normalized sampling cache. Scores stay
// unnormalized; refresh_cache builds the probability prefix sums.
struct ScoreTable {
    std::vector<double> scores;
    uint64_t last_full_rescore_step = 0;
    std::vector<double> prefix;  // cumulative probabilities, prefix.back() == 1
    bool uniform_fallback = false;

    void refresh_cache();
    size_t size() const { return scores.size(); }
};

// Per-transition scores for a gathered batch. Uniform scores everything 1.
std::vector<double> score_batch(const learner::EnsembleQ& ens, const data::Batch& batch,
                                AcquisitionKind kind, double gamma);

// Full-dataset scoring, chunked.
std::vector<double> score_dataset(const learner::EnsembleQ& ens,
                                  const data::TransitionDataset& ds, AcquisitionKind kind,
                                  double gamma);

// Mean absolute per-member regression error of each transition.
std::vector<double> score_td_error(const learner::EnsembleQ& ens, const data::Batch& batch,
                                   double gamma);

// Population variance across members of the advantage at either the stored
// action (greedy=false) or the scoring ensemble's mean-value argmax.
std::vector<double> score_variance(const learner::EnsembleQ& ens, const data::Batch& batch,
                                   bool greedy);

// Multinomial draw with replacement over the table's normalized scores.
std::vector<uint64_t> normalize_and_sample(ScoreTable& table, size_t batch_size, Rng& rng);

// Full rescore when at least `rescore_interval` steps have elapsed. Returns
// whether a rescore happened.
bool maybe_rescore(ScoreTable& table, const learner::EnsembleQ& ens,
                   const data::TransitionDataset& ds, uint64_t step, const SamplerConfig& cfg,
                   double gamma);

// Replace each score by the maximum within its episode.
void episodic_aggregate(std::vector<double>& scores, const std::vector<uint64_t>& episode_offsets);

// Binary indexed sum tree over transition priorities.
class SumTree {
public:
    SumTree() = default;
    explicit SumTree(size_t leaves, double initial_priority = 1.0);

    size_t size() const { return n_; }
    double total() const;
    double get(size_t index) const;
    void set(size_t index, double priority);
    double max_priority() const;
    // New transitions enter at the current maximum priority so they are
    // sampled at least once before their first refresh.
    void append();
    // Walk down to the leaf owning the given cumulative mass in [0, total).
    size_t find_prefix(double mass) const;
    // Recompute every internal sum from the leaves (verification helper).
    double recompute_total() const;

private:
    void repair_path(size_t leaf_slot);
    size_t cap_ = 0;            // leaf capacity, power of two
    size_t n_ = 0;              // live leaves
    std::vector<double> tree_;  // 1-based heap layout, leaves at [cap_, cap_+n_)
};

double priority_from_score(double score, const SamplerConfig& cfg);

// Stratified proportional draw: one uniform point per equal stratum of the
// total mass.
std::vector<uint64_t> priority_sample(const SumTree& tree, size_t batch_size, Rng& rng);

// Overwrite the priorities of the given transitions with freshly computed
// scores; all other leaves keep their stale values.
void priority_update(SumTree& tree, const std::vector<uint64_t>& indices,
                     const std::vector<double>& scores, const SamplerConfig& cfg);

// Uniform during the warm-start epochs, the configured kind afterwards.
AcquisitionKind effective_sampler(uint64_t step, int epoch, const SamplerConfig& cfg);

// CSV export: transition_index, episode_id, score.
void write_score_csv(const std::string& path, const ScoreTable& table,
                     const data::TransitionDataset& ds);

}  // namespace oarl::sampling
