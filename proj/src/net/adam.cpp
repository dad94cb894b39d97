#include "oarl/net/adam.hpp"

#include <cmath>

namespace oarl::net {

AdamState AdamState::zeros_like(const MlpParams& p) {
    AdamState st;
    const MlpGrads z = MlpGrads::zeros_like(p);
    st.m = z.layers;
    st.v = z.layers;
    st.step = 0;
    return st;
}

double grad_sq_norm(const MlpGrads& g) {
    double acc = 0.0;
    for (const auto& l : g.layers) {
        for (float v : l.w) acc += static_cast<double>(v) * v;
        for (float v : l.b) acc += static_cast<double>(v) * v;
    }
    return acc;
}

namespace {

void check_finite(const MlpGrads& g) {
    for (size_t l = 0; l < g.layers.size(); ++l) {
        for (float v : g.layers[l].w) {
            if (!is_finite(v)) {
                throw DivergenceError("non-finite weight gradient in layer " + std::to_string(l));
            }
        }
        for (float v : g.layers[l].b) {
            if (!is_finite(v)) {
                throw DivergenceError("non-finite bias gradient in layer " + std::to_string(l));
            }
        }
    }
}

void scale_grads(MlpGrads& g, float s) {
    for (auto& l : g.layers) {
        for (auto& v : l.w) v *= s;
        for (auto& v : l.b) v *= s;
    }
}

}  // namespace

double clip_global_norm(std::vector<MlpGrads*>& grads, double max_norm) {
    if (max_norm <= 0.0) throw ConfigError("clip_global_norm: max_norm must be > 0");
    double sq = 0.0;
    for (MlpGrads* g : grads) {
        check_finite(*g);
        sq += grad_sq_norm(*g);
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const float s = static_cast<float>(max_norm / norm);
        for (MlpGrads* g : grads) scale_grads(*g, s);
    }
    return norm;
}

double clip_global_norm(MlpGrads& g, double max_norm) {
    std::vector<MlpGrads*> one{&g};
    return clip_global_norm(one, max_norm);
}

void adam_step(MlpParams& p, AdamState& st, const MlpGrads& g, const AdamConfig& cfg) {
    if (st.m.size() != p.layers.size()) throw ContractError("adam_step: state/params layer mismatch");
    if (g.layers.size() != p.layers.size()) throw ContractError("adam_step: grads/params layer mismatch");
    check_finite(g);

    st.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));

    for (size_t l = 0; l < p.layers.size(); ++l) {
        auto update = [&](std::vector<float>& param, std::vector<float>& m, std::vector<float>& v,
                          const std::vector<float>& grad) {
            for (size_t k = 0; k < param.size(); ++k) {
                const double gk = grad[k];
                const double mk = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
                const double vk = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
                m[k] = static_cast<float>(mk);
                v[k] = static_cast<float>(vk);
                const double mhat = mk / bc1;
                const double vhat = vk / bc2;
                param[k] = static_cast<float>(param[k] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
            }
        };
        update(p.layers[l].w, st.m[l].w, st.v[l].w, g.layers[l].w);
        update(p.layers[l].b, st.m[l].b, st.v[l].b, g.layers[l].b);
    }
}

void serialize_adam(const AdamState& st, ByteWriter& w) {
    w.u64(st.step);
    auto dump = [&](const std::vector<LayerParams>& ls) {
        for (const auto& l : ls) {
            for (float v : l.w) w.f32(v);
            for (float v : l.b) w.f32(v);
        }
    };
    dump(st.m);
    dump(st.v);
}

AdamState deserialize_adam(ByteReader& r, const MlpParams& shape) {
    AdamState st = AdamState::zeros_like(shape);
    st.step = r.u64();
    auto load = [&](std::vector<LayerParams>& ls) {
        for (auto& l : ls) {
            for (auto& v : l.w) v = r.f32();
            for (auto& v : l.b) v = r.f32();
        }
    };
    load(st.m);
    load(st.v);
    return st;
}

}  // namespace oarl::net
