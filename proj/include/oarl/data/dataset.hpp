#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oarl/common.hpp"

namespace oarl::data {

struct DatasetMeta {
    std::string env_kind;  // "traffic" or "maze"
    uint64_t config_digest = 0;
    bool spurious_enabled = false;
    uint64_t n_episodes = 0;
    uint32_t obs_dim = 0;
    uint32_t action_count = 0;
    uint64_t collection_seed = 0;
};

// Structure-of-arrays transition store; row i is one transition. Episode
// boundaries are kept so episodic scoring and sub-sampling stay exact.
struct TransitionDataset {
    std::vector<float> obs;        // size() * obs_dim
    std::vector<float> next_obs;   // size() * obs_dim
    std::vector<uint16_t> actions;
    std::vector<float> rewards;
    std::vector<uint8_t> dones;
    std::vector<uint64_t> episode_offsets;  // n_episodes + 1 entries, first 0, last size()
    DatasetMeta meta;

    size_t size() const { return actions.size(); }
    size_t episode_count() const { return episode_offsets.empty() ? 0 : episode_offsets.size() - 1; }
    size_t episode_of(size_t index) const;
    const float* obs_row(size_t i) const { return obs.data() + i * meta.obs_dim; }
    const float* next_obs_row(size_t i) const { return next_obs.data() + i * meta.obs_dim; }

    void validate() const;
    uint64_t digest() const;
};

// A gathered minibatch, materialized so learners never index the dataset.
struct Batch {
    std::vector<float> obs;
    std::vector<float> next_obs;
    std::vector<uint16_t> actions;
    std::vector<float> rewards;
    std::vector<uint8_t> dones;
    std::vector<uint64_t> indices;  // rows of the source dataset
    uint32_t obs_dim = 0;

    size_t size() const { return actions.size(); }
};

Batch gather(const TransitionDataset& ds, const std::vector<uint64_t>& indices);

// Uniform choice of whole episodes, order preserving; fraction 1 is identity.
TransitionDataset subsample(const TransitionDataset& ds, double fraction, uint64_t seed);

// Concatenation of compatible datasets (same env kind and shapes).
TransitionDataset concat(const TransitionDataset& a, const TransitionDataset& b);

void save_dataset(const TransitionDataset& ds, const std::string& path);
TransitionDataset load_dataset(const std::string& path);

}  // namespace oarl::data
