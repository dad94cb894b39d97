#include "oarl/net/mlp.hpp"

#include <cmath>
#include <cstring>

#include "oarl/rng.hpp"

namespace oarl::net {

void MlpArch::validate() const {
    if (input_dim < 1) throw ConfigError("mlp arch: input_dim must be >= 1, got " + std::to_string(input_dim));
    if (output_dim < 1) throw ConfigError("mlp arch: output_dim must be >= 1, got " + std::to_string(output_dim));
    for (size_t i = 0; i < hidden.size(); ++i) {
        if (hidden[i] < 1) {
            throw ConfigError("mlp arch: hidden layer " + std::to_string(i) + " has width " +
                              std::to_string(hidden[i]) + ", must be >= 1");
        }
    }
}

size_t MlpParams::param_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

MlpGrads MlpGrads::zeros_like(const MlpParams& p) {
    MlpGrads g;
    g.layers.reserve(p.layers.size());
    for (const auto& l : p.layers) {
        LayerParams z;
        z.in = l.in;
        z.out = l.out;
        z.w.assign(l.w.size(), 0.0f);
        z.b.assign(l.b.size(), 0.0f);
        g.layers.push_back(std::move(z));
    }
    return g;
}

MlpParams init(const MlpArch& arch, uint64_t seed) {
    arch.validate();
    MlpParams p;
    p.arch = arch;
    p.init_seed = seed;
    Rng rng(seed);

    std::vector<int> widths;
    widths.push_back(arch.input_dim);
    for (int h : arch.hidden) widths.push_back(h);
    widths.push_back(arch.output_dim);

    p.layers.resize(widths.size() - 1);
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
        LayerParams& lp = p.layers[l];
        lp.in = widths[l];
        lp.out = widths[l + 1];
        lp.w.resize(static_cast<size_t>(lp.in) * lp.out);
        lp.b.assign(static_cast<size_t>(lp.out), 0.0f);
        const double limit = std::sqrt(6.0 / lp.in);
        for (auto& w : lp.w) w = static_cast<float>((rng.uniform_real() * 2.0 - 1.0) * limit);
    }
    return p;
}

namespace {

// y = relu?(W x + b) over a batch of rows.
void affine(const LayerParams& L, const float* x, size_t batch, float* y, bool relu) {
    for (size_t bi = 0; bi < batch; ++bi) {
        const float* xr = x + bi * static_cast<size_t>(L.in);
        float* yr = y + bi * static_cast<size_t>(L.out);
        for (int o = 0; o < L.out; ++o) {
            const float* wr = L.w.data() + static_cast<size_t>(o) * L.in;
            float acc = L.b[static_cast<size_t>(o)];
            for (int i = 0; i < L.in; ++i) acc += wr[i] * xr[i];
            yr[o] = (relu && acc < 0.0f) ? 0.0f : acc;
        }
    }
}

}  // namespace

void forward_cached(const MlpParams& p, const float* obs, size_t batch, ForwardCache& cache) {
    const size_t n_hidden = p.arch.hidden.size();
    cache.batch = batch;
    cache.hidden_acts.resize(n_hidden);
    const float* cur = obs;
    for (size_t l = 0; l < n_hidden; ++l) {
        auto& act = cache.hidden_acts[l];
        act.resize(batch * static_cast<size_t>(p.layers[l].out));
        affine(p.layers[l], cur, batch, act.data(), true);
        cur = act.data();
    }
    cache.output.resize(batch * static_cast<size_t>(p.arch.output_dim));
    affine(p.layers.back(), cur, batch, cache.output.data(), false);
}

void forward(const MlpParams& p, const float* obs, size_t batch, float* q_out) {
    ForwardCache cache;
    forward_cached(p, obs, batch, cache);
    std::memcpy(q_out, cache.output.data(), cache.output.size() * sizeof(float));
}

std::vector<float> forward(const MlpParams& p, const std::vector<float>& obs_batch, size_t batch) {
    if (batch == 0) throw ContractError("mlp forward: batch must be >= 1");
    if (obs_batch.size() != batch * static_cast<size_t>(p.arch.input_dim)) {
        throw ContractError("mlp forward: obs size " + std::to_string(obs_batch.size()) +
                            " != batch * input_dim = " +
                            std::to_string(batch * static_cast<size_t>(p.arch.input_dim)));
    }
    std::vector<float> out(batch * static_cast<size_t>(p.arch.output_dim));
    forward(p, obs_batch.data(), batch, out.data());
    return out;
}

void backward_from_cache(const MlpParams& p, const float* obs, const ForwardCache& cache,
                         const float* upstream, MlpGrads& out) {
    const size_t batch = cache.batch;
    const size_t n_layers = p.layers.size();
    if (out.layers.size() != n_layers) out = MlpGrads::zeros_like(p);

    // Per-layer f64 accumulators, cast to f32 at the end.
    std::vector<std::vector<double>> dw(n_layers), db(n_layers);
    for (size_t l = 0; l < n_layers; ++l) {
        dw[l].assign(p.layers[l].w.size(), 0.0);
        db[l].assign(p.layers[l].b.size(), 0.0);
    }

    const size_t out_dim = static_cast<size_t>(p.arch.output_dim);
    std::vector<float> g_cur(upstream, upstream + batch * out_dim);
    std::vector<float> g_prev;

    for (size_t l = n_layers; l-- > 0;) {
        const LayerParams& L = p.layers[l];
        const float* a_prev = (l == 0) ? obs : cache.hidden_acts[l - 1].data();

        for (size_t bi = 0; bi < batch; ++bi) {
            const float* gr = g_cur.data() + bi * static_cast<size_t>(L.out);
            const float* ar = a_prev + bi * static_cast<size_t>(L.in);
            for (int o = 0; o < L.out; ++o) {
                const double g = gr[o];
                if (g == 0.0) continue;
                db[l][static_cast<size_t>(o)] += g;
                double* dwr = dw[l].data() + static_cast<size_t>(o) * L.in;
                for (int i = 0; i < L.in; ++i) dwr[i] += g * ar[i];
            }
        }

        if (l > 0) {
            // g_prev = (g_cur . W) masked by the rectifier's active set.
            const auto& act = cache.hidden_acts[l - 1];
            g_prev.assign(batch * static_cast<size_t>(L.in), 0.0f);
            for (size_t bi = 0; bi < batch; ++bi) {
                const float* gr = g_cur.data() + bi * static_cast<size_t>(L.out);
                float* pr = g_prev.data() + bi * static_cast<size_t>(L.in);
                const float* ar = act.data() + bi * static_cast<size_t>(L.in);
                for (int o = 0; o < L.out; ++o) {
                    const float g = gr[o];
                    if (g == 0.0f) continue;
                    const float* wr = L.w.data() + static_cast<size_t>(o) * L.in;
                    for (int i = 0; i < L.in; ++i) pr[i] += g * wr[i];
                }
                for (int i = 0; i < L.in; ++i) {
                    if (ar[i] <= 0.0f) pr[i] = 0.0f;
                }
            }
            g_cur.swap(g_prev);
        }
    }

    for (size_t l = 0; l < n_layers; ++l) {
        auto& gl = out.layers[l];
        for (size_t k = 0; k < dw[l].size(); ++k) gl.w[k] = static_cast<float>(dw[l][k]);
        for (size_t k = 0; k < db[l].size(); ++k) gl.b[k] = static_cast<float>(db[l][k]);
    }
}

MlpGrads backward(const MlpParams& p, const float* obs, size_t batch, const float* upstream) {
    ForwardCache cache;
    forward_cached(p, obs, batch, cache);
    MlpGrads g = MlpGrads::zeros_like(p);
    backward_from_cache(p, obs, cache, upstream, g);
    return g;
}

uint64_t param_digest(const MlpParams& p) {
    uint64_t h = fnv1a64(&p.init_seed, sizeof(p.init_seed));
    for (const auto& l : p.layers) {
        h = fnv1a64(l.w.data(), l.w.size() * sizeof(float), h);
        h = fnv1a64(l.b.data(), l.b.size() * sizeof(float), h);
    }
    return h;
}

void serialize_params(const MlpParams& p, ByteWriter& w) {
    w.u32(static_cast<uint32_t>(p.arch.input_dim));
    w.u32(static_cast<uint32_t>(p.arch.hidden.size()));
    for (int h : p.arch.hidden) w.u32(static_cast<uint32_t>(h));
    w.u32(static_cast<uint32_t>(p.arch.output_dim));
    w.u64(p.init_seed);
    for (const auto& l : p.layers) {
        for (float v : l.w) w.f32(v);
        for (float v : l.b) w.f32(v);
    }
}

MlpParams deserialize_params(ByteReader& r) {
    MlpArch arch;
    arch.input_dim = static_cast<int>(r.u32());
    const uint32_t n_hidden = r.u32();
    arch.hidden.clear();
    for (uint32_t i = 0; i < n_hidden; ++i) arch.hidden.push_back(static_cast<int>(r.u32()));
    arch.output_dim = static_cast<int>(r.u32());
    arch.validate();

    MlpParams p;
    p.arch = arch;
    p.init_seed = r.u64();

    std::vector<int> widths;
    widths.push_back(arch.input_dim);
    for (int h : arch.hidden) widths.push_back(h);
    widths.push_back(arch.output_dim);
    p.layers.resize(widths.size() - 1);
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
        LayerParams& lp = p.layers[l];
        lp.in = widths[l];
        lp.out = widths[l + 1];
        lp.w.resize(static_cast<size_t>(lp.in) * lp.out);
        lp.b.resize(static_cast<size_t>(lp.out));
        for (auto& v : lp.w) v = r.f32();
        for (auto& v : lp.b) v = r.f32();
    }
    return p;
}

}  // namespace oarl::net
