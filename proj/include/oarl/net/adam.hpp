#pragma once

#include <vector>

#include "oarl/net/mlp.hpp"

namespace oarl::net {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second-moment accumulators mirroring the parameter shapes.
struct AdamState {
    std::vector<LayerParams> m;
    std::vector<LayerParams> v;
    uint64_t step = 0;

    static AdamState zeros_like(const MlpParams& p);
};

// Squared L2 norm of a gradient set, accumulated in f64.
double grad_sq_norm(const MlpGrads& g);

// Joint global-norm clip across every gradient set in `grads`; returns the
// pre-clip norm. Rejects non-finite gradients.
double clip_global_norm(std::vector<MlpGrads*>& grads, double max_norm);
double clip_global_norm(MlpGrads& g, double max_norm);

// One bias-corrected Adam update, in place.
void adam_step(MlpParams& p, AdamState& st, const MlpGrads& g, const AdamConfig& cfg);

void serialize_adam(const AdamState& st, ByteWriter& w);
AdamState deserialize_adam(ByteReader& r, const MlpParams& shape);

}  // namespace oarl::net
