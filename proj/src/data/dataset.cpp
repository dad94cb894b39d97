#include "oarl/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "oarl/io.hpp"
#include "oarl/rng.hpp"

namespace oarl::data {

namespace {
constexpr const char* kMagic = "OARL";
constexpr uint32_t kFormatVersion = 1;
}  // namespace

size_t TransitionDataset::episode_of(size_t index) const {
    if (index >= size()) throw ContractError("dataset: transition index out of range");
    const auto it = std::upper_bound(episode_offsets.begin(), episode_offsets.end(), index);
    return static_cast<size_t>(std::distance(episode_offsets.begin(), it)) - 1;
}

void TransitionDataset::validate() const {
    const size_t n = size();
    if (obs.size() != n * meta.obs_dim || next_obs.size() != n * meta.obs_dim ||
        rewards.size() != n || dones.size() != n) {
        throw ContractError("dataset: column lengths disagree");
    }
    if (episode_offsets.empty() || episode_offsets.front() != 0 || episode_offsets.back() != n) {
        throw ContractError("dataset: episode offsets must start at 0 and end at the transition count");
    }
    for (size_t e = 1; e < episode_offsets.size(); ++e) {
        if (episode_offsets[e] <= episode_offsets[e - 1]) {
            throw ContractError("dataset: episode offsets must be strictly increasing");
        }
    }
    if (episode_count() != meta.n_episodes) {
        throw ContractError("dataset: meta episode count disagrees with offsets");
    }
    for (size_t e = 0; e + 1 < episode_offsets.size(); ++e) {
        const size_t last = episode_offsets[e + 1] - 1;
        for (size_t i = episode_offsets[e]; i <= last; ++i) {
            if ((dones[i] != 0) != (i == last)) {
                throw ContractError("dataset: done flag must mark exactly the last step of episode " +
                                    std::to_string(e));
            }
        }
    }
    for (float r : rewards) {
        if (!is_finite(r)) throw ContractError("dataset: non-finite reward");
    }
}

uint64_t TransitionDataset::digest() const {
    uint64_t h = fnv1a64(&meta.obs_dim, sizeof(meta.obs_dim));
    h = fnv1a64(&meta.action_count, sizeof(meta.action_count), h);
    const uint64_t n = size();
    h = fnv1a64(&n, sizeof(n), h);
    h = fnv1a64(obs.data(), obs.size() * sizeof(float), h);
    h = fnv1a64(next_obs.data(), next_obs.size() * sizeof(float), h);
    h = fnv1a64(actions.data(), actions.size() * sizeof(uint16_t), h);
    h = fnv1a64(rewards.data(), rewards.size() * sizeof(float), h);
    h = fnv1a64(dones.data(), dones.size() * sizeof(uint8_t), h);
    h = fnv1a64(episode_offsets.data(), episode_offsets.size() * sizeof(uint64_t), h);
    return h;
}

Batch gather(const TransitionDataset& ds, const std::vector<uint64_t>& indices) {
    Batch b;
    b.obs_dim = ds.meta.obs_dim;
    b.indices = indices;
    b.obs.resize(indices.size() * ds.meta.obs_dim);
    b.next_obs.resize(indices.size() * ds.meta.obs_dim);
    b.actions.resize(indices.size());
    b.rewards.resize(indices.size());
    b.dones.resize(indices.size());
    for (size_t k = 0; k < indices.size(); ++k) {
        const uint64_t i = indices[k];
        if (i >= ds.size()) throw ContractError("gather: transition index out of range");
        std::copy_n(ds.obs_row(i), ds.meta.obs_dim, b.obs.data() + k * ds.meta.obs_dim);
        std::copy_n(ds.next_obs_row(i), ds.meta.obs_dim, b.next_obs.data() + k * ds.meta.obs_dim);
        b.actions[k] = ds.actions[i];
        b.rewards[k] = ds.rewards[i];
        b.dones[k] = ds.dones[i];
    }
    return b;
}

TransitionDataset subsample(const TransitionDataset& ds, double fraction, uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("subsample: fraction must be in (0, 1], got " + std::to_string(fraction));
    }
    const size_t n_ep = ds.episode_count();
    const size_t keep = static_cast<size_t>(std::llround(fraction * static_cast<double>(n_ep)));
    if (keep < 1) throw ConfigError("subsample: fraction keeps no episodes");

    std::vector<size_t> order(n_ep);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, "subsample"));
    for (size_t i = 0; i < keep; ++i) {
        const size_t j = i + rng.uniform_int(n_ep - i);
        std::swap(order[i], order[j]);
    }
    std::vector<size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(chosen.begin(), chosen.end());

    TransitionDataset out;
    out.meta = ds.meta;
    out.meta.n_episodes = keep;
    out.episode_offsets.push_back(0);
    for (size_t e : chosen) {
        const size_t lo = ds.episode_offsets[e];
        const size_t hi = ds.episode_offsets[e + 1];
        out.obs.insert(out.obs.end(), ds.obs.begin() + static_cast<std::ptrdiff_t>(lo * ds.meta.obs_dim),
                       ds.obs.begin() + static_cast<std::ptrdiff_t>(hi * ds.meta.obs_dim));
        out.next_obs.insert(out.next_obs.end(),
                            ds.next_obs.begin() + static_cast<std::ptrdiff_t>(lo * ds.meta.obs_dim),
                            ds.next_obs.begin() + static_cast<std::ptrdiff_t>(hi * ds.meta.obs_dim));
        out.actions.insert(out.actions.end(), ds.actions.begin() + static_cast<std::ptrdiff_t>(lo),
                           ds.actions.begin() + static_cast<std::ptrdiff_t>(hi));
        out.rewards.insert(out.rewards.end(), ds.rewards.begin() + static_cast<std::ptrdiff_t>(lo),
                           ds.rewards.begin() + static_cast<std::ptrdiff_t>(hi));
        out.dones.insert(out.dones.end(), ds.dones.begin() + static_cast<std::ptrdiff_t>(lo),
                         ds.dones.begin() + static_cast<std::ptrdiff_t>(hi));
        out.episode_offsets.push_back(out.size());
    }
    out.validate();
    return out;
}

TransitionDataset concat(const TransitionDataset& a, const TransitionDataset& b) {
    if (a.meta.env_kind != b.meta.env_kind || a.meta.obs_dim != b.meta.obs_dim ||
        a.meta.action_count != b.meta.action_count) {
        throw ConfigError("concat: datasets have incompatible shapes");
    }
    TransitionDataset out = a;
    out.obs.insert(out.obs.end(), b.obs.begin(), b.obs.end());
    out.next_obs.insert(out.next_obs.end(), b.next_obs.begin(), b.next_obs.end());
    out.actions.insert(out.actions.end(), b.actions.begin(), b.actions.end());
    out.rewards.insert(out.rewards.end(), b.rewards.begin(), b.rewards.end());
    out.dones.insert(out.dones.end(), b.dones.begin(), b.dones.end());
    const size_t base = a.size();
    for (size_t e = 1; e < b.episode_offsets.size(); ++e) {
        out.episode_offsets.push_back(base + b.episode_offsets[e]);
    }
    out.meta.n_episodes = a.meta.n_episodes + b.meta.n_episodes;
    out.meta.config_digest = fnv1a64(&b.meta.config_digest, sizeof(b.meta.config_digest), a.meta.config_digest);
    out.validate();
    return out;
}

void save_dataset(const TransitionDataset& ds, const std::string& path) {
    ds.validate();
    ByteWriter w;
    w.u32(ds.meta.obs_dim);
    w.u32(ds.meta.action_count);
    w.u64(ds.size());
    w.u64(ds.episode_count());
    for (uint64_t off : ds.episode_offsets) w.u64(off);
    for (size_t i = 0; i < ds.size(); ++i) {
        const float* o = ds.obs_row(i);
        const float* no = ds.next_obs_row(i);
        for (uint32_t k = 0; k < ds.meta.obs_dim; ++k) w.f32(o[k]);
        for (uint32_t k = 0; k < ds.meta.obs_dim; ++k) w.f32(no[k]);
        w.u16(ds.actions[i]);
        w.f32(ds.rewards[i]);
        w.u8(ds.dones[i]);
    }
    write_envelope(path, kMagic, kFormatVersion, w.data());

    std::ofstream mf(path + ".manifest");
    if (!mf) throw IoError(IoErrorKind::WriteFailed, "cannot write manifest beside " + path);
    mf << "env_kind = " << ds.meta.env_kind << "\n";
    mf << "config_digest = " << hex64(ds.meta.config_digest) << "\n";
    mf << "spurious_enabled = " << (ds.meta.spurious_enabled ? "true" : "false") << "\n";
    mf << "n_episodes = " << ds.meta.n_episodes << "\n";
    mf << "obs_dim = " << ds.meta.obs_dim << "\n";
    mf << "action_count = " << ds.meta.action_count << "\n";
    mf << "collection_seed = " << ds.meta.collection_seed << "\n";
    mf << "transitions = " << ds.size() << "\n";
    mf << "data_digest = " << hex64(ds.digest()) << "\n";
}

namespace {

DatasetMeta read_manifest(const std::string& path) {
    std::ifstream mf(path);
    if (!mf) throw IoError(IoErrorKind::ReadFailed, "missing dataset manifest: " + path);
    DatasetMeta meta;
    std::string line;
    while (std::getline(mf, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "env_kind") meta.env_kind = val;
        else if (key == "config_digest") meta.config_digest = std::stoull(val, nullptr, 16);
        else if (key == "spurious_enabled") meta.spurious_enabled = (val == "true");
        else if (key == "n_episodes") meta.n_episodes = std::stoull(val);
        else if (key == "obs_dim") meta.obs_dim = static_cast<uint32_t>(std::stoul(val));
        else if (key == "action_count") meta.action_count = static_cast<uint32_t>(std::stoul(val));
        else if (key == "collection_seed") meta.collection_seed = std::stoull(val);
    }
    return meta;
}

}  // namespace

TransitionDataset load_dataset(const std::string& path) {
    const auto payload = read_envelope(path, kMagic, kFormatVersion);
    ByteReader r(payload);

    TransitionDataset ds;
    ds.meta = read_manifest(path + ".manifest");
    const uint32_t obs_dim = r.u32();
    const uint32_t action_count = r.u32();
    const uint64_t n = r.u64();
    const uint64_t n_ep = r.u64();
    if (obs_dim != ds.meta.obs_dim || action_count != ds.meta.action_count) {
        throw IoError(IoErrorKind::ReadFailed, "dataset header disagrees with its manifest: " + path);
    }
    ds.episode_offsets.resize(n_ep + 1);
    for (auto& off : ds.episode_offsets) off = r.u64();
    ds.obs.resize(n * obs_dim);
    ds.next_obs.resize(n * obs_dim);
    ds.actions.resize(n);
    ds.rewards.resize(n);
    ds.dones.resize(n);
    for (uint64_t i = 0; i < n; ++i) {
        for (uint32_t k = 0; k < obs_dim; ++k) ds.obs[i * obs_dim + k] = r.f32();
        for (uint32_t k = 0; k < obs_dim; ++k) ds.next_obs[i * obs_dim + k] = r.f32();
        ds.actions[i] = r.u16();
        ds.rewards[i] = r.f32();
        ds.dones[i] = r.u8();
    }
    if (!r.exhausted()) {
        throw IoError(IoErrorKind::ChecksumMismatch, "dataset payload longer than header declares: " + path);
    }
    ds.validate();
    return ds;
}

}  // namespace oarl::data
