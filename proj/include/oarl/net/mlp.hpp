#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oarl/common.hpp"
#include "oarl/io.hpp"

namespace oarl::net {

// Fully-connected architecture: rectified-linear hidden layers, identity output.
struct MlpArch {
    int input_dim = 0;
    std::vector<int> hidden = {64, 64};
    int output_dim = 0;

    void validate() const;
    size_t layer_count() const { return hidden.size() + 1; }
};

// One affine layer, y = W x + b. W is row-major, out x in.
struct LayerParams {
    int in = 0;
    int out = 0;
    std::vector<float> w;
    std::vector<float> b;
};

struct MlpParams {
    MlpArch arch;
    std::vector<LayerParams> layers;
    uint64_t init_seed = 0;

    size_t param_count() const;
};

// Gradients mirror the parameter shapes.
struct MlpGrads {
    std::vector<LayerParams> layers;

    static MlpGrads zeros_like(const MlpParams& p);
};

// He-style scaled-uniform fan-in init, zero biases. Deterministic per seed.
MlpParams init(const MlpArch& arch, uint64_t seed);

// Batched forward pass; obs is batch x input_dim row-major, q_out batch x output_dim.
void forward(const MlpParams& p, const float* obs, size_t batch, float* q_out);
std::vector<float> forward(const MlpParams& p, const std::vector<float>& obs_batch, size_t batch);

// Post-activation cache so the trainer can reuse one forward per backward.
struct ForwardCache {
    size_t batch = 0;
    std::vector<std::vector<float>> hidden_acts;  // one per hidden layer
    std::vector<float> output;
};

void forward_cached(const MlpParams& p, const float* obs, size_t batch, ForwardCache& cache);

// Exact analytic gradients of the scalar loss whose per-output partials are
// `upstream` (batch x output_dim). Accumulation over the batch is 64-bit,
// in fixed row order.
MlpGrads backward(const MlpParams& p, const float* obs, size_t batch, const float* upstream);
void backward_from_cache(const MlpParams& p, const float* obs, const ForwardCache& cache,
                         const float* upstream, MlpGrads& out);

uint64_t param_digest(const MlpParams& p);

void serialize_params(const MlpParams& p, ByteWriter& w);
MlpParams deserialize_params(ByteReader& r);

}  // namespace oarl::net
