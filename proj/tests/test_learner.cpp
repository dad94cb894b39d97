#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "oarl/common.hpp"
#include "oarl/data/dataset.hpp"
#include "oarl/learner/cql.hpp"
#include "oarl/net/mlp.hpp"
#include "oarl/rng.hpp"

using namespace oarl;
using learner::CqlConfig;
using learner::EnsembleQ;

namespace {

// Zero every parameter of a network, then pin the output-layer biases, making
// the network emit `out_bias` for every input.
void set_constant_output(net::MlpParams& p, const std::vector<float>& out_bias) {
    for (auto& layer : p.layers) {
        std::fill(layer.w.begin(), layer.w.end(), 0.0f);
        std::fill(layer.b.begin(), layer.b.end(), 0.0f);
    }
    auto& last = p.layers.back();
    REQUIRE(out_bias.size() == last.b.size());
    last.b = out_bias;
}

data::Batch one_row_batch(const std::vector<float>& obs, uint16_t action, float reward,
                          bool done, const std::vector<float>& next_obs) {
    data::Batch b;
    b.obs = obs;
    b.next_obs = next_obs;
    b.actions = {action};
    b.rewards = {reward};
    b.dones = {static_cast<uint8_t>(done ? 1 : 0)};
    b.indices = {0};
    b.obs_dim = static_cast<uint32_t>(obs.size());
    return b;
}

// Five-state corridor with a stay action (0) and an advance action (1).
// Advancing from state 3 pays +1 and terminates; everything else pays 0.
struct ChainMdp {
    static constexpr int kStates = 5;
    static constexpr int kActions = 2;
    double gamma = 0.9;

    int next_state(int s, int a) const { return a == 1 ? s + 1 : s; }
    double reward(int s, int a) const { return (s == 3 && a == 1) ? 1.0 : 0.0; }
    bool terminal_after(int s, int a) const { return s == 3 && a == 1; }

    // Exact optimal Q via value iteration over the non-terminal states 0..3.
    std::vector<double> optimal_q() const {
        std::vector<double> q(4 * kActions, 0.0);
        for (int sweep = 0; sweep < 10000; ++sweep) {
            std::vector<double> next(q);
            double change = 0.0;
            for (int s = 0; s < 4; ++s) {
                for (int a = 0; a < kActions; ++a) {
                    double boot = 0.0;
                    if (!terminal_after(s, a)) {
                        const int s2 = next_state(s, a);
                        boot = std::max(q[s2 * kActions], q[s2 * kActions + 1]);
                    }
                    next[s * kActions + a] = reward(s, a) + gamma * boot;
                    change = std::max(change, std::abs(next[s * kActions + a] - q[s * kActions + a]));
                }
            }
            q = next;
            if (change < 1e-13) break;
        }
        return q;
    }

    data::Batch all_transitions() const {
        data::Batch b;
        b.obs_dim = kStates;
        uint64_t row = 0;
        for (int s = 0; s < 4; ++s) {
            for (int a = 0; a < kActions; ++a) {
                std::vector<float> obs(kStates, 0.0f);
                obs[static_cast<size_t>(s)] = 1.0f;
                std::vector<float> nxt(kStates, 0.0f);
                nxt[static_cast<size_t>(next_state(s, a))] = 1.0f;
                b.obs.insert(b.obs.end(), obs.begin(), obs.end());
                b.next_obs.insert(b.next_obs.end(), nxt.begin(), nxt.end());
                b.actions.push_back(static_cast<uint16_t>(a));
                b.rewards.push_back(static_cast<float>(reward(s, a)));
                b.dones.push_back(terminal_after(s, a) ? 1 : 0);
                b.indices.push_back(row++);
            }
        }
        return b;
    }
};

CqlConfig tiny_config(int ensemble, double alpha0) {
    CqlConfig cfg;
    cfg.ensemble_size = ensemble;
    cfg.alpha0 = alpha0;
    cfg.hidden = {8};
    cfg.batch_size = 4;
    return cfg;
}

}  // namespace

TEST_CASE("learner config validation rejects out-of-range values") {
    CqlConfig cfg = CqlConfig::traffic_defaults();
    CHECK_NOTHROW(cfg.validate());

    CqlConfig bad = cfg;
    bad.gamma = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.gamma = -0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.ensemble_size = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.lr = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.clip_norm = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.alpha0 = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.target_update_interval = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.hidden = {16, 0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("preset configs carry the documented training constants") {
    const CqlConfig t = CqlConfig::traffic_defaults();
    CHECK(t.alpha0 == doctest::Approx(1.0));
    CHECK(t.lr == doctest::Approx(5e-3));
    CHECK(t.batch_size == 512);
    CHECK(t.target_update_interval == 4);
    CHECK(t.ensemble_size == 3);
    CHECK(t.clip_norm == doctest::Approx(5.0));
    CHECK(t.gamma == doctest::Approx(0.99));

    const CqlConfig m = CqlConfig::maze_defaults();
    CHECK(m.lr == doctest::Approx(1e-3));
    CHECK(m.batch_size == 2048);
    CHECK(m.target_update_interval == 50);
    CHECK(m.ensemble_size == 5);
    CHECK(m.clip_norm == doctest::Approx(5.0));
}

TEST_CASE("ensemble members start distinct while targets mirror them") {
    const EnsembleQ ens = learner::make_ensemble(6, 3, tiny_config(3, 1.0), 99);
    REQUIRE(ens.size() == 3);
    CHECK(net::param_digest(ens.members[0]) != net::param_digest(ens.members[1]));
    CHECK(net::param_digest(ens.members[1]) != net::param_digest(ens.members[2]));
    for (size_t i = 0; i < 3; ++i) {
        CHECK(net::param_digest(ens.members[i]) == net::param_digest(ens.targets[i]));
        CHECK(ens.adam[i].step == 0);
    }
    CHECK(ens.gradient_steps == 0);

    const EnsembleQ again = learner::make_ensemble(6, 3, tiny_config(3, 1.0), 99);
    CHECK(again.digest() == ens.digest());
    const EnsembleQ other = learner::make_ensemble(6, 3, tiny_config(3, 1.0), 100);
    CHECK(other.digest() != ens.digest());
}

TEST_CASE("terminal transitions regress to the bare reward") {
    EnsembleQ ens = learner::make_ensemble(4, 2, tiny_config(1, 0.0), 7);
    // Give the bootstrap a large value so leakage through the terminal mask
    // would be unmistakable.
    set_constant_output(ens.members[0], {100.0f, 200.0f});
    set_constant_output(ens.targets[0], {300.0f, 400.0f});

    const std::vector<float> obs{1, 0, 0, 0};
    const std::vector<float> nxt{0, 1, 0, 0};
    const auto t = learner::bellman_target(ens, 0, one_row_batch(obs, 0, -1.0f, true, nxt), 0.99);
    REQUIRE(t.size() == 1);
    CHECK(t[0] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("a zero discount also reduces the target to the reward") {
    EnsembleQ ens = learner::make_ensemble(4, 2, tiny_config(1, 0.0), 7);
    set_constant_output(ens.members[0], {1.0f, 5.0f});
    set_constant_output(ens.targets[0], {10.0f, 20.0f});
    const std::vector<float> obs{1, 0, 0, 0};
    const std::vector<float> nxt{0, 1, 0, 0};
    const auto t = learner::bellman_target(ens, 0, one_row_batch(obs, 1, 0.25f, false, nxt), 0.0);
    CHECK(t[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("bootstrap action comes from the online net and its value from the target net") {
    EnsembleQ ens = learner::make_ensemble(4, 2, tiny_config(1, 0.0), 7);
    // Online prefers action 0; the target net values action 1 higher. The
    // decoupled rule must evaluate the target at the online argmax.
    set_constant_output(ens.members[0], {5.0f, 1.0f});
    set_constant_output(ens.targets[0], {10.0f, 20.0f});
    const std::vector<float> obs{1, 0, 0, 0};
    const std::vector<float> nxt{0, 1, 0, 0};
    const auto t = learner::bellman_target(ens, 0, one_row_batch(obs, 0, 0.5f, false, nxt), 0.99);
    CHECK(t[0] == doctest::Approx(0.5 + 0.99 * 10.0).epsilon(1e-6));
}

TEST_CASE("each member regresses toward its own target copy") {
    CqlConfig cfg = tiny_config(2, 0.0);
    EnsembleQ ens = learner::make_ensemble(5, 2, cfg, 21);
    ChainMdp mdp;
    const data::Batch batch = mdp.all_transitions();

    const auto t0_before = learner::bellman_target(ens, 0, batch, 0.9);
    const auto t1_before = learner::bellman_target(ens, 1, batch, 0.9);

    // Perturb only member 1's target copy.
    for (float& b : ens.targets[1].layers.back().b) b += 1.0f;

    const auto t0_after = learner::bellman_target(ens, 0, batch, 0.9);
    const auto t1_after = learner::bellman_target(ens, 1, batch, 0.9);

    bool member1_changed = false;
    for (size_t i = 0; i < t0_before.size(); ++i) {
        CHECK(t0_after[i] == t0_before[i]);
        if (t1_after[i] != t1_before[i]) member1_changed = true;
    }
    CHECK(member1_changed);
}

TEST_CASE("loss vanishes for an all-zero net on zero-reward data without conservatism") {
    CqlConfig cfg = tiny_config(2, 0.0);
    EnsembleQ ens = learner::make_ensemble(3, 2, cfg, 5);
    for (auto& m : ens.members) set_constant_output(m, {0.0f, 0.0f});
    learner::sync_targets(ens);

    const std::vector<float> obs{1, 0, 0};
    const std::vector<float> nxt{0, 1, 0};
    const data::Batch batch = one_row_batch(obs, 0, 0.0f, false, nxt);
    const auto report = learner::cql_loss(ens, batch, cfg, nullptr);
    CHECK(report.total == doctest::Approx(0.0).epsilon(1e-15));
    for (double td : report.member_td) CHECK(td == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("the conservatism penalty is exactly zero with a single action") {
    CqlConfig cfg = tiny_config(2, 1.0);
    EnsembleQ ens = learner::make_ensemble(3, 1, cfg, 5);
    const std::vector<float> obs{0.3f, -0.2f, 1.0f};
    const std::vector<float> nxt{0.1f, 0.4f, -1.0f};
    const data::Batch batch = one_row_batch(obs, 0, 0.7f, false, nxt);
    const auto report = learner::cql_loss(ens, batch, cfg, nullptr);
    CHECK(report.penalty == 0.0);
}

TEST_CASE("penalty on a (2, 0) value row with the low action in the data") {
    CqlConfig cfg = tiny_config(1, 1.0);
    EnsembleQ ens = learner::make_ensemble(3, 2, cfg, 5);
    set_constant_output(ens.members[0], {2.0f, 0.0f});
    learner::sync_targets(ens);

    const std::vector<float> obs{1, 0, 0};
    const std::vector<float> nxt{0, 1, 0};
    const data::Batch batch = one_row_batch(obs, 0, 0.0f, false, nxt);
    const auto report = learner::cql_loss(ens, batch, cfg, nullptr);
    // log(exp(2) + exp(0)) - 2, evaluated independently.
    CHECK(report.penalty == doctest::Approx(0.126928011042972).epsilon(1e-9));

    // The same row with the high action selected flips the sign structure:
    // log-sum-exp minus the max is small and positive.
    const data::Batch high = one_row_batch(obs, 1, 0.0f, false, nxt);
    const auto report_high = learner::cql_loss(ens, high, cfg, nullptr);
    CHECK(report_high.penalty == doctest::Approx(2.126928011042972).epsilon(1e-9));
}

TEST_CASE("report total is the mean member error plus the weighted penalty") {
    CqlConfig cfg = tiny_config(3, 0.7);
    EnsembleQ ens = learner::make_ensemble(5, 2, cfg, 31);
    ChainMdp mdp;
    const auto report = learner::cql_loss(ens, mdp.all_transitions(), cfg, nullptr);
    double mean_td = 0.0;
    for (double td : report.member_td) mean_td += td;
    mean_td /= static_cast<double>(report.member_td.size());
    CHECK(report.total == doctest::Approx(mean_td + 0.7 * report.penalty).epsilon(1e-12));
    CHECK(report.penalty > 0.0);
}

TEST_CASE("a zero-gradient step leaves parameters untouched but advances the counters") {
    CqlConfig cfg = tiny_config(2, 0.0);
    cfg.target_update_interval = 4;
    EnsembleQ ens = learner::make_ensemble(3, 2, cfg, 5);
    for (auto& m : ens.members) set_constant_output(m, {0.0f, 0.0f});
    learner::sync_targets(ens);
    const uint64_t digest_before = net::param_digest(ens.members[0]);

    const std::vector<float> obs{1, 0, 0};
    const std::vector<float> nxt{0, 1, 0};
    const auto report = learner::train_step(ens, one_row_batch(obs, 0, 0.0f, false, nxt), cfg);
    CHECK(report.grad_norm == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(report.step == 1);
    CHECK(ens.gradient_steps == 1);
    CHECK(ens.adam[0].step == 1);
    CHECK(net::param_digest(ens.members[0]) == digest_before);
}

TEST_CASE("training is bit-reproducible for a fixed seed and batch stream") {
    CqlConfig cfg = tiny_config(2, 1.0);
    cfg.lr = 1e-2;
    ChainMdp mdp;
    const data::Batch batch = mdp.all_transitions();

    EnsembleQ a = learner::make_ensemble(5, 2, cfg, 77);
    EnsembleQ b = learner::make_ensemble(5, 2, cfg, 77);
    for (int k = 0; k < 9; ++k) {
        const auto ra = learner::train_step(a, batch, cfg);
        const auto rb = learner::train_step(b, batch, cfg);
        CHECK(ra.total == rb.total);
        CHECK(ra.grad_norm == rb.grad_norm);
    }
    CHECK(a.digest() == b.digest());
}

TEST_CASE("the reported gradient norm is the pre-clip norm") {
    ChainMdp mdp;
    const data::Batch batch = mdp.all_transitions();

    CqlConfig loose = tiny_config(2, 1.0);
    loose.clip_norm = 1e6;
    CqlConfig tight = loose;
    tight.clip_norm = 1e-4;

    EnsembleQ a = learner::make_ensemble(5, 2, loose, 11);
    EnsembleQ b = learner::make_ensemble(5, 2, tight, 11);
    const auto ra = learner::train_step(a, batch, loose);
    const auto rb = learner::train_step(b, batch, tight);
    CHECK(ra.grad_norm == doctest::Approx(rb.grad_norm).epsilon(1e-12));
    CHECK(ra.grad_norm > 0.0);
    // The tight clip must have produced a smaller parameter change.
    CHECK(a.digest() != b.digest());
}

TEST_CASE("target copies refresh only on the scheduled step") {
    CqlConfig cfg = tiny_config(1, 1.0);
    cfg.target_update_interval = 4;
    cfg.lr = 1e-2;
    EnsembleQ ens = learner::make_ensemble(5, 2, cfg, 13);
    const uint64_t initial_target = net::param_digest(ens.targets[0]);

    ChainMdp mdp;
    const data::Batch batch = mdp.all_transitions();
    for (int k = 1; k <= 3; ++k) {
        learner::train_step(ens, batch, cfg);
        CHECK(net::param_digest(ens.targets[0]) == initial_target);
        CHECK(net::param_digest(ens.members[0]) != initial_target);
    }
    learner::train_step(ens, batch, cfg);
    CHECK(ens.gradient_steps == 4);
    CHECK(net::param_digest(ens.targets[0]) == net::param_digest(ens.members[0]));

    // Re-syncing without further training changes nothing.
    const uint64_t synced = net::param_digest(ens.targets[0]);
    learner::sync_targets(ens);
    CHECK(net::param_digest(ens.targets[0]) == synced);
}

TEST_CASE("greedy action maximizes the ensemble mean and breaks ties low") {
    CqlConfig cfg = tiny_config(1, 1.0);
    cfg.hidden = {4};
    EnsembleQ tie = learner::make_ensemble(3, 3, cfg, 3);
    set_constant_output(tie.members[0], {1.0f, 1.0f, 1.0f});
    const std::vector<float> obs{0.5f, -0.5f, 1.0f};
    CHECK(learner::greedy_action(tie, obs.data()) == 0);

    set_constant_output(tie.members[0], {1.0f, 2.0f, 2.0f});
    CHECK(learner::greedy_action(tie, obs.data()) == 1);

    // Mean aggregation, not majority vote: two members prefer action 1 but a
    // third outweighs them on action 0.
    CqlConfig cfg3 = tiny_config(3, 1.0);
    cfg3.hidden = {4};
    EnsembleQ ens = learner::make_ensemble(3, 2, cfg3, 3);
    set_constant_output(ens.members[0], {0.0f, 1.0f});
    set_constant_output(ens.members[1], {0.0f, 1.0f});
    set_constant_output(ens.members[2], {3.0f, 0.0f});
    CHECK(learner::greedy_action(ens, obs.data()) == 0);

    const auto batch_greedy = learner::greedy_actions(ens, obs.data(), 1);
    REQUIRE(batch_greedy.size() == 1);
    CHECK(batch_greedy[0] == 0);
}

TEST_CASE("greedy choice ignores a constant shift of every action value") {
    CqlConfig cfg = tiny_config(2, 1.0);
    EnsembleQ ens = learner::make_ensemble(4, 3, cfg, 17);
    Rng rng(derive_seed(17, "greedy-shift"));
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<float> obs(4);
        for (auto& v : obs) v = static_cast<float>(rng.normal());
        const int before = learner::greedy_action(ens, obs.data());
        EnsembleQ shifted = ens;
        for (auto& m : shifted.members) {
            for (float& b : m.layers.back().b) b += 3.25f;
        }
        CHECK(learner::greedy_action(shifted, obs.data()) == before);
    }
}

TEST_CASE("softmax-weighted value matches hand-computed rows and shifts additively") {
    const float row[2] = {2.0f, 0.0f};
    CHECK(learner::softmax_value(row, 2) == doctest::Approx(1.761594155955765).epsilon(1e-9));

    const float shifted[2] = {12.0f, 10.0f};
    CHECK(learner::softmax_value(shifted, 2) ==
          doctest::Approx(11.761594155955765).epsilon(1e-9));

    const float uniform[4] = {0.5f, 0.5f, 0.5f, 0.5f};
    CHECK(learner::softmax_value(uniform, 4) == doctest::Approx(0.5).epsilon(1e-12));

    // Large magnitudes must not overflow thanks to max subtraction.
    const float big[2] = {1000.0f, 998.0f};
    const double v = learner::softmax_value(big, 2);
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(999.761594155955765).epsilon(1e-9));
}

TEST_CASE("advantage of an action against the softmax-weighted value") {
    CqlConfig cfg = tiny_config(1, 1.0);
    EnsembleQ ens = learner::make_ensemble(3, 2, cfg, 5);
    set_constant_output(ens.members[0], {2.0f, 0.0f});
    const std::vector<float> obs{1, 0, 0};
    CHECK(learner::advantage(ens.members[0], obs.data(), 0) ==
          doctest::Approx(0.238405844044235).epsilon(1e-9));
    CHECK(learner::advantage(ens.members[0], obs.data(), 1) ==
          doctest::Approx(-1.761594155955765).epsilon(1e-9));
    CHECK_THROWS_AS(learner::advantage(ens.members[0], obs.data(), 2), ContractError);

    // The softmax-weighted average of advantages over actions is identically
    // zero for any value row.
    Rng rng(derive_seed(5, "adv-identity"));
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<float> q(4);
        for (auto& v : q) v = static_cast<float>(rng.normal() * 3.0);
        const double vstar = learner::softmax_value(q.data(), 4);
        double m = q[0];
        for (float x : q) m = std::max(m, static_cast<double>(x));
        double z = 0.0;
        for (float x : q) z += std::exp(static_cast<double>(x) - m);
        double acc = 0.0;
        for (float x : q) {
            acc += (std::exp(static_cast<double>(x) - m) / z) *
                   (static_cast<double>(x) - vstar);
        }
        CHECK(acc == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("a lone conservatism gradient lowers the penalty on the same batch") {
    CqlConfig cfg = tiny_config(2, 1.0);
    cfg.lr = 1e-3;
    cfg.clip_norm = 100.0;
    EnsembleQ ens = learner::make_ensemble(3, 2, cfg, 41);
    // Zero nets with zero-reward data: the regression term contributes no
    // gradient, so any movement is the penalty at work.
    for (auto& m : ens.members) set_constant_output(m, {0.0f, 0.0f});
    learner::sync_targets(ens);

    const std::vector<float> obs{1, 0, 0};
    const std::vector<float> nxt{0, 1, 0};
    const data::Batch batch = one_row_batch(obs, 0, 0.0f, false, nxt);

    const double before = learner::cql_loss(ens, batch, cfg, nullptr).penalty;
    CHECK(before == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    learner::train_step(ens, batch, cfg);
    const double after = learner::cql_loss(ens, batch, cfg, nullptr).penalty;
    CHECK(after < before);
}

TEST_CASE("analytic loss gradients match finite differences through the full objective") {
    CqlConfig cfg = tiny_config(2, 0.8);
    cfg.hidden = {5};
    cfg.gamma = 0.9;
    EnsembleQ ens = learner::make_ensemble(5, 2, cfg, 101);
    ChainMdp mdp;
    const data::Batch batch = mdp.all_transitions();

    std::vector<std::vector<float>> upstream;
    learner::cql_loss(ens, batch, cfg, &upstream);

    // Directly perturb Q outputs: wiggle one output bias of one member and
    // compare the loss change against the upstream gradient, which for a bias
    // of the final layer sums the per-row upstream entries for that action.
    for (size_t member = 0; member < 2; ++member) {
        for (int action = 0; action < 2; ++action) {
            const double h = 1e-4;
            EnsembleQ plus = ens;
            plus.members[member].layers.back().b[static_cast<size_t>(action)] +=
                static_cast<float>(h);
            EnsembleQ minus = ens;
            minus.members[member].layers.back().b[static_cast<size_t>(action)] -=
                static_cast<float>(h);
            // Keep target nets fixed at the originals so only the online Q moves.
            plus.targets = ens.targets;
            minus.targets = ens.targets;
            const double lp = learner::cql_loss(plus, batch, cfg, nullptr).total;
            const double lm = learner::cql_loss(minus, batch, cfg, nullptr).total;
            const double fd = (lp - lm) / (2.0 * h);

            double analytic = 0.0;
            for (size_t b = 0; b < batch.size(); ++b) {
                analytic += static_cast<double>(
                    upstream[member][b * 2 + static_cast<size_t>(action)]);
            }
            CHECK(fd == doctest::Approx(analytic).epsilon(5e-3));
        }
    }
}

TEST_CASE("non-finite values surface as a divergence error naming the member") {
    CqlConfig cfg = tiny_config(3, 1.0);
    EnsembleQ ens = learner::make_ensemble(3, 2, cfg, 23);
    ens.members[1].layers.back().b[0] = std::numeric_limits<float>::quiet_NaN();

    const std::vector<float> obs{1, 0, 0};
    const std::vector<float> nxt{0, 1, 0};
    const data::Batch batch = one_row_batch(obs, 0, 0.0f, false, nxt);
    try {
        learner::cql_loss(ens, batch, cfg, nullptr);
        FAIL("expected a divergence error");
    } catch (const DivergenceError& e) {
        CHECK(std::string(e.what()).find("member 1") != std::string::npos);
    }
    CHECK_THROWS_AS(learner::train_step(ens, batch, cfg), DivergenceError);
}

TEST_CASE("fitted values reach the dynamic-programming solution on the corridor") {
    ChainMdp mdp;
    const std::vector<double> qstar = mdp.optimal_q();
    // Sanity-check the oracle itself at one corner: the pre-terminal advance
    // pays exactly 1 and staying discounts it once.
    CHECK(qstar[3 * 2 + 1] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(qstar[3 * 2 + 0] == doctest::Approx(0.9).epsilon(1e-10));
    CHECK(qstar[0 * 2 + 0] == doctest::Approx(0.6561).epsilon(1e-10));

    CqlConfig cfg;
    cfg.alpha0 = 0.0;  // pure fitted Q-iteration
    cfg.gamma = mdp.gamma;
    cfg.ensemble_size = 1;
    cfg.hidden = {};  // tabular-capable affine head over one-hot states
    cfg.lr = 0.05;
    cfg.clip_norm = 1e6;
    cfg.target_update_interval = 20;
    cfg.batch_size = 8;

    EnsembleQ ens = learner::make_ensemble(ChainMdp::kStates, ChainMdp::kActions, cfg, 2024);
    const data::Batch batch = mdp.all_transitions();
    for (int step = 0; step < 4000; ++step) learner::train_step(ens, batch, cfg);

    double worst = 0.0;
    for (int s = 0; s < 4; ++s) {
        std::vector<float> obs(ChainMdp::kStates, 0.0f);
        obs[static_cast<size_t>(s)] = 1.0f;
        const std::vector<float> q = learner::ensemble_mean_q(ens, obs.data(), 1);
        for (int a = 0; a < ChainMdp::kActions; ++a) {
            worst = std::max(worst, std::abs(static_cast<double>(q[static_cast<size_t>(a)]) -
                                             qstar[s * 2 + a]));
        }
    }
    CHECK(worst < 1e-2);
}

TEST_CASE("conservatism drags data-absent actions below their unpenalized fit") {
    // Train twice on the corridor data from the same seed, once plain and once
    // with a strong penalty. The penalized run must assign lower values to
    // actions while still fitting the data distribution's ordering.
    ChainMdp mdp;
    const data::Batch batch = mdp.all_transitions();

    CqlConfig plain;
    plain.alpha0 = 0.0;
    plain.gamma = mdp.gamma;
    plain.ensemble_size = 1;
    plain.hidden = {};
    plain.lr = 0.05;
    plain.clip_norm = 1e6;
    plain.target_update_interval = 20;
    CqlConfig penalized = plain;
    penalized.alpha0 = 2.0;

    EnsembleQ a = learner::make_ensemble(ChainMdp::kStates, ChainMdp::kActions, plain, 7);
    EnsembleQ b = learner::make_ensemble(ChainMdp::kStates, ChainMdp::kActions, penalized, 7);
    for (int step = 0; step < 2500; ++step) {
        learner::train_step(a, batch, plain);
        learner::train_step(b, batch, penalized);
    }

    double mean_plain = 0.0;
    double mean_penalized = 0.0;
    for (int s = 0; s < 4; ++s) {
        std::vector<float> obs(ChainMdp::kStates, 0.0f);
        obs[static_cast<size_t>(s)] = 1.0f;
        const auto qa = learner::ensemble_mean_q(a, obs.data(), 1);
        const auto qb = learner::ensemble_mean_q(b, obs.data(), 1);
        for (int act = 0; act < 2; ++act) {
            mean_plain += qa[static_cast<size_t>(act)];
            mean_penalized += qb[static_cast<size_t>(act)];
        }
    }
    CHECK(mean_penalized < mean_plain);
}

TEST_CASE("checkpoints restore training state exactly") {
    CqlConfig cfg = tiny_config(2, 1.0);
    cfg.lr = 5e-3;
    cfg.target_update_interval = 3;
    EnsembleQ ens = learner::make_ensemble(5, 2, cfg, 55);
    ChainMdp mdp;
    const data::Batch batch = mdp.all_transitions();
    for (int step = 0; step < 7; ++step) learner::train_step(ens, batch, cfg);

    const std::string path = "/tmp/oarl_test_checkpoint.bin";
    learner::save_checkpoint(ens, path);
    EnsembleQ loaded = learner::load_checkpoint(path);

    CHECK(loaded.digest() == ens.digest());
    CHECK(loaded.gradient_steps == ens.gradient_steps);
    CHECK(loaded.obs_dim == ens.obs_dim);
    CHECK(loaded.action_count == ens.action_count);

    // Optimizer state must survive: one further identical step on both copies
    // stays bit-identical, which fails if Adam moments were dropped.
    learner::train_step(ens, batch, cfg);
    learner::train_step(loaded, batch, cfg);
    CHECK(loaded.digest() == ens.digest());

    std::remove(path.c_str());
    CHECK_THROWS_AS(learner::load_checkpoint(path), IoError);
}

TEST_CASE("rejects batches whose observation width differs from the ensemble") {
    CqlConfig cfg = tiny_config(1, 1.0);
    EnsembleQ ens = learner::make_ensemble(4, 2, cfg, 5);
    const std::vector<float> obs{1, 0, 0};
    const std::vector<float> nxt{0, 1, 0};
    CHECK_THROWS_AS(learner::train_step(ens, one_row_batch(obs, 0, 0.0f, false, nxt), cfg),
                    ContractError);
}
