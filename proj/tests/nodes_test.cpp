#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "splitmesh/dataset.hpp"
#include "splitmesh/errors.hpp"
#include "splitmesh/harness.hpp"
#include "splitmesh/model.hpp"
#include "splitmesh/model_spec.hpp"
#include "splitmesh/nodes.hpp"
#include "splitmesh/wire.hpp"

using namespace splitmesh;

namespace {

// Three dense groups so the first can live on a client and two stay behind.
ModelSpec tiny_reg_model() {
    ModelSpec m;
    m.input_shape = {4};
    m.layers = {DenseSpec{5}, ActivationSpec{ActKind::LeakyRelu, 0.01},
                DenseSpec{3}, ActivationSpec{ActKind::LeakyRelu, 0.01}, DenseSpec{1}};
    m.loss = LossKind::MSE;
    return m;
}

struct mini_rig {
    SplitPlan plan;
    TrainConfig cfg;
    std::vector<Dataset> shards;

    mini_rig(std::vector<std::size_t> sizes, std::uint32_t epochs = 1, std::uint32_t batch = 4,
             std::uint64_t seed = 42) {
        plan = split_model(tiny_reg_model());
        cfg.epochs = epochs;
        cfg.batch_size = batch;
        cfg.learning_rate = 0.01;
        cfg.seed = seed;
        cfg.loss = LossKind::MSE;
        std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
        auto full = synth(TaskKind::Regression, total, {4}, seed + 1);
        std::uint64_t off = 0;
        for (auto s : sizes) {
            std::vector<std::uint64_t> rows(s);
            std::iota(rows.begin(), rows.end(), off);
            off += s;
            shards.push_back(gather_dataset(full, rows));
        }
    }

    std::vector<std::size_t> sizes() const {
        std::vector<std::size_t> out;
        for (const auto& s : shards) out.push_back(s.size());
        return out;
    }

    ClientNode client(std::uint32_t id, const ServerNode& server) const {
        ClientNode c(id, shards[id], std::nullopt, plan, cfg);
        c.configure(server.config_for(id));
        return c;
    }
};

}  // namespace

TEST_CASE("schedule splits equal shards with a rotating extra row") {
    auto s = compute_schedule({64, 64, 64}, 64);
    CHECK(s.batch == 64);
    REQUIRE(s.rounds.size() == 3);
    CHECK(s.rounds[0] == std::vector<std::size_t>{22, 21, 21});
    CHECK(s.rounds[1] == std::vector<std::size_t>{21, 22, 21});
    CHECK(s.rounds[2] == std::vector<std::size_t>{21, 21, 22});
}

TEST_CASE("schedule drains a short final round") {
    auto s = compute_schedule({52, 52, 52}, 64);
    REQUIRE(s.rounds.size() == 3);
    CHECK(s.rounds[0] == std::vector<std::size_t>{22, 21, 21});
    CHECK(s.rounds[1] == std::vector<std::size_t>{21, 22, 21});
    CHECK(s.rounds[2] == std::vector<std::size_t>{9, 9, 10});

    auto single = compute_schedule({5}, 2);
    REQUIRE(single.rounds.size() == 3);
    CHECK(single.rounds[0] == std::vector<std::size_t>{2});
    CHECK(single.rounds[2] == std::vector<std::size_t>{1});
}

TEST_CASE("schedule rounds cover every row exactly once") {
    struct { std::vector<std::size_t> sizes; std::size_t batch; } cases[] = {
        {{100, 1, 1}, 8}, {{7, 7, 7, 7}, 16}, {{64}, 64}, {{3, 17}, 5}, {{52, 52, 52}, 64}};
    for (const auto& tc : cases) {
        auto s = compute_schedule(tc.sizes, tc.batch);
        std::vector<std::size_t> used(tc.sizes.size(), 0);
        std::size_t total = std::accumulate(tc.sizes.begin(), tc.sizes.end(), std::size_t{0});
        std::size_t seen = 0;
        for (const auto& round : s.rounds) {
            REQUIRE(round.size() == tc.sizes.size());
            std::size_t sum = 0;
            for (std::size_t c = 0; c < round.size(); ++c) {
                used[c] += round[c];
                sum += round[c];
            }
            CHECK(sum == std::min(tc.batch, total - seen));
            seen += sum;
        }
        CHECK(used == tc.sizes);
    }
}

TEST_CASE("round ids increase through training and evaluation slots") {
    CHECK(train_round_id(0, 3, 0) == 0);
    CHECK(train_round_id(0, 3, 2) == 2);
    CHECK(eval_round_id(0, 3) == 3);
    CHECK(train_round_id(1, 3, 0) == 4);  // strictly after epoch 0 evaluation
    CHECK(eval_round_id(2, 5) == 17);

    std::uint64_t prev = 0;
    bool first = true;
    for (std::size_t e = 0; e < 4; ++e) {
        for (std::size_t r = 0; r <= 6; ++r) {
            std::uint64_t id = train_round_id(e, 6, r);
            if (!first) CHECK(id == prev + 1);
            prev = id;
            first = false;
        }
    }
}

TEST_CASE("server hands every client the same fingerprinted plan") {
    mini_rig rig({6, 4});
    ServerNode server(rig.plan, rig.cfg, rig.sizes());
    auto c0 = server.config_for(0);
    auto c1 = server.config_for(1);
    CHECK(c0.plan_hash == plan_hash(rig.plan, rig.cfg));
    CHECK(c0.plan_hash == c1.plan_hash);
    CHECK(c0.shard_size == 6);
    CHECK(c1.shard_size == 4);
    CHECK(c0.client_segment_json == model_spec_to_json(rig.plan.client_segment));
    CHECK(spec_equal(model_spec_from_json(c0.client_segment_json), rig.plan.client_segment));
    CHECK_THROWS_AS(server.config_for(2), MissingClient);
}

TEST_CASE("client refuses to run against a mismatched server view") {
    mini_rig rig({6, 4});
    ServerNode server(rig.plan, rig.cfg, rig.sizes());
    auto good = server.config_for(0);

    ClientNode c(0, rig.shards[0], std::nullopt, rig.plan, rig.cfg);
    CHECK_FALSE(c.configured());
    std::vector<std::uint64_t> rows{0};
    CHECK_THROWS_AS(c.client_round(0, rows), NotConfigured);

    SUBCASE("plan hash") {
        auto bad = good;
        bad.plan_hash ^= 1;
        CHECK_THROWS_AS(c.configure(bad), ConfigError);
    }
    SUBCASE("shard size") {
        auto bad = good;
        bad.shard_size = 5;
        CHECK_THROWS_AS(c.configure(bad), ConfigError);
    }
    SUBCASE("learning rate") {
        auto bad = good;
        bad.train.learning_rate = 0.5;
        CHECK_THROWS_AS(c.configure(bad), ConfigError);
    }
    SUBCASE("segment spec") {
        auto bad = good;
        bad.client_segment_json = model_spec_to_json(rig.plan.server_segment);
        CHECK_THROWS_AS(c.configure(bad), ConfigError);
    }
    SUBCASE("accepts the honest view") {
        c.configure(good);
        CHECK(c.configured());
        CHECK_NOTHROW(c.client_round(0, rows));
    }
}

TEST_CASE("activation messages are byte identical across replicas") {
    mini_rig a({8}), b({8});
    ServerNode sa(a.plan, a.cfg, a.sizes()), sb(b.plan, b.cfg, b.sizes());
    auto ca = a.client(0, sa);
    auto cb = b.client(0, sb);
    std::vector<std::uint64_t> rows{3, 1, 5};
    auto ma = ca.client_round(0, rows);
    auto mb = cb.client_round(0, rows);
    CHECK(encode_message(ma) == encode_message(mb));
    CHECK(ma.tensor.shape == std::vector<std::size_t>{3, 5});
    CHECK(ma.labels.shape == std::vector<std::size_t>{3});
}

TEST_CASE("client round enforces shard bounds and gradient pairing") {
    mini_rig rig({6});
    ServerNode server(rig.plan, rig.cfg, rig.sizes());
    auto c = rig.client(0, server);

    std::vector<std::uint64_t> out_of_range{0, 6};
    CHECK_THROWS_AS(c.client_round(0, out_of_range), ShapeMismatch);
    CHECK_THROWS_AS(c.client_round(0, std::vector<std::uint64_t>{}), ShapeMismatch);

    std::vector<std::uint64_t> rows{0, 1};
    auto act = c.client_round(0, rows);

    // a second send before gradients arrive would desynchronise the round
    CHECK_THROWS_AS(c.client_round(1, rows), StaleRound);

    GradientsMsg g;
    g.round_id = 0;
    g.client_id = 0;
    g.tensor = Tensor(act.tensor.shape);

    SUBCASE("wrong round id") {
        auto bad = g;
        bad.round_id = 9;
        CHECK_THROWS_AS(c.apply_gradients(bad), StaleRound);
    }
    SUBCASE("addressed to someone else") {
        auto bad = g;
        bad.client_id = 1;
        CHECK_THROWS_AS(c.apply_gradients(bad), RoundMismatch);
    }
    SUBCASE("wrong slice shape") {
        auto bad = g;
        bad.tensor = Tensor({1, 5});
        CHECK_THROWS_AS(c.apply_gradients(bad), ShapeMismatch);
    }
    SUBCASE("zero gradients leave parameters untouched") {
        auto before = snapshot_params(c.model());
        c.apply_gradients(g);
        auto after = snapshot_params(c.model());
        REQUIRE(before.size() == after.size());
        for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].data == after[i].data);
        // and the pending slot is free again
        CHECK_NOTHROW(c.client_round(1, rows));
    }
}

TEST_CASE("server concatenates ascending by client id and returns matching slices") {
    mini_rig rig({6, 4});
    ServerNode server(rig.plan, rig.cfg, rig.sizes());
    auto c0 = rig.client(0, server);
    auto c1 = rig.client(1, server);

    auto a0 = c0.client_round(0, std::vector<std::uint64_t>{0, 1, 2});
    auto a1 = c1.client_round(0, std::vector<std::uint64_t>{0, 1});

    // delivery order must not matter, only the id ordering
    auto out = server.server_round({a1, a0}, {0, 1});
    CHECK(out.rows == 5);
    CHECK(std::isfinite(out.loss));
    REQUIRE(out.grads.size() == 2);
    CHECK(out.grads[0].client_id == 0);
    CHECK(out.grads[1].client_id == 1);
    CHECK(out.grads[0].tensor.shape == a0.tensor.shape);
    CHECK(out.grads[1].tensor.shape == a1.tensor.shape);

    CHECK_NOTHROW(c0.apply_gradients(out.grads[0]));
    CHECK_NOTHROW(c1.apply_gradients(out.grads[1]));
}

TEST_CASE("server rejects duplicates, strangers, absences and replays") {
    mini_rig rig({6, 4});
    ServerNode server(rig.plan, rig.cfg, rig.sizes());
    auto c0 = rig.client(0, server);
    auto c1 = rig.client(1, server);
    auto a0 = c0.client_round(0, std::vector<std::uint64_t>{0, 1});
    auto a1 = c1.client_round(0, std::vector<std::uint64_t>{0});

    SUBCASE("duplicate sender") {
        CHECK_THROWS_AS(server.server_round({a0, a0}, {0}), RoundMismatch);
    }
    SUBCASE("expected client missing") {
        CHECK_THROWS_AS(server.server_round({a0}, {0, 1}), MissingClient);
    }
    SUBCASE("unexpected sender") {
        CHECK_THROWS_AS(server.server_round({a0, a1}, {0}), MissingClient);
    }
    SUBCASE("no expected clients at all") {
        CHECK_THROWS_AS(server.server_round({}, {}), MissingClient);
    }
    SUBCASE("mixed round ids") {
        auto skewed = a1;
        skewed.round_id = 5;
        CHECK_THROWS_AS(server.server_round({a0, skewed}, {0, 1}), RoundMismatch);
    }
    SUBCASE("round ids must move forward") {
        CHECK_NOTHROW(server.server_round({a0, a1}, {0, 1}));
        CHECK_THROWS_AS(server.server_round({a0, a1}, {0, 1}), StaleRound);
    }
}

TEST_CASE("evaluation without validation rows reports not-a-number") {
    mini_rig rig({6});
    ServerNode server(rig.plan, rig.cfg, rig.sizes());
    auto m = server.eval_round({}, 3, 0.5);
    CHECK(m.epoch == 3);
    CHECK(m.loss == 0.5);
    CHECK(std::isnan(m.metric));

    ClientNode no_val(0, rig.shards[0], std::nullopt, rig.plan, rig.cfg);
    no_val.configure(server.config_for(0));
    CHECK_FALSE(no_val.eval_message(1).has_value());
}

TEST_CASE("with one site the split run equals monolithic training bit for bit") {
    ExperimentConfig cfg;
    cfg.preset_name = "covid";
    cfg.scale = "desk";
    cfg.dataset = "synth";
    cfg.clients = 1;
    cfg.ratio = "1";
    cfg.epochs = 2;
    cfg.seed = 7;
    auto built = build_experiment(cfg);

    auto split = train_simulation(built.setup);
    auto mono = oracle_train(built.setup);

    REQUIRE(split.round_losses.size() == mono.round_losses.size());
    for (std::size_t i = 0; i < split.round_losses.size(); ++i)
        CHECK(split.round_losses[i] == mono.round_losses[i]);
    REQUIRE(split.epochs.size() == mono.epochs.size());
    for (std::size_t e = 0; e < split.epochs.size(); ++e) {
        CHECK(split.epochs[e].train_loss == mono.epochs[e].train_loss);
        CHECK(split.epochs[e].val_metric == mono.epochs[e].val_metric);
    }
    REQUIRE(split.client_params.size() == 1);
    REQUIRE(mono.client_params.size() == 1);
    for (std::size_t p = 0; p < split.client_params[0].size(); ++p)
        CHECK(split.client_params[0][p].data == mono.client_params[0][p].data);
    for (std::size_t p = 0; p < split.server_params.size(); ++p)
        CHECK(split.server_params[p].data == mono.server_params[p].data);
}

TEST_CASE("three equal shards with batch 64 run three rounds per epoch") {
    ExperimentConfig cfg;
    cfg.preset_name = "covid";
    cfg.scale = "desk";
    cfg.dataset = "synth";
    cfg.clients = 3;
    cfg.ratio = "1:1:1";
    cfg.epochs = 2;
    cfg.batch_size = 64;
    cfg.synth_n = 192;
    cfg.seed = 5;
    auto built = build_experiment(cfg);

    auto result = train_simulation(built.setup);
    // 64 rows per shard lose 12 to validation, so training runs on 52 each
    REQUIRE(result.schedule.rounds.size() == 3);
    CHECK(result.schedule.rounds[0] == std::vector<std::size_t>{22, 21, 21});
    CHECK(result.schedule.rounds[1] == std::vector<std::size_t>{21, 22, 21});
    CHECK(result.schedule.rounds[2] == std::vector<std::size_t>{9, 9, 10});
    CHECK(result.round_losses.size() == 6);
    REQUIRE(result.epochs.size() == 2);
    for (const auto& e : result.epochs) {
        CHECK(std::isfinite(e.train_loss));
        CHECK(e.val_metric == e.val_metric);  // validation rows exist, metric is real
    }
}

TEST_CASE("simulation transcripts are byte identical across reruns") {
    mini_rig rig({10, 7}, 2, 4);
    ExperimentSetup setup{rig.plan, rig.cfg, {}};
    for (const auto& s : rig.shards) setup.clients.push_back(ClientData{s, std::nullopt});

    Transcript t1, t2;
    auto r1 = train_simulation(setup, &t1);
    auto r2 = train_simulation(setup, &t2);
    CHECK(t1.frames > 0);
    CHECK(t1.frames == t2.frames);
    CHECK(t1.bytes == t2.bytes);
    CHECK(r1.round_losses == r2.round_losses);
}

TEST_CASE("zero epochs still handshakes and closes cleanly") {
    mini_rig rig({5, 5}, 0, 4);
    ExperimentSetup setup{rig.plan, rig.cfg, {}};
    for (const auto& s : rig.shards) setup.clients.push_back(ClientData{s, std::nullopt});

    Transcript t;
    auto result = train_simulation(setup, &t);
    CHECK(result.epochs.empty());
    CHECK(result.round_losses.empty());
    // Hello and Config per client, then the Done pair
    CHECK(t.frames == 3 * setup.clients.size());
}
