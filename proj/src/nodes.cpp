#include "splitmesh/nodes.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "splitmesh/errors.hpp"
#include "splitmesh/loss.hpp"

namespace splitmesh {

RoundSchedule compute_schedule(const std::vector<std::size_t>& train_sizes, std::size_t batch) {
    if (batch < 1) throw BatchTooSmall("batch size must be >= 1");
    RoundSchedule s;
    s.batch = batch;
    std::vector<std::size_t> left = train_sizes;
    std::size_t total = 0;
    for (auto v : left) total += v;
    while (total > 0) {
        std::size_t target = std::min(batch, total);
        auto alloc = batch_allocation(target, left);
        for (std::size_t c = 0; c < left.size(); ++c) left[c] -= alloc[c];
        total -= target;
        s.rounds.push_back(std::move(alloc));
    }
    return s;
}

ClientNode::ClientNode(std::uint32_t id, Dataset train, std::optional<Dataset> val,
                       const SplitPlan& plan, const TrainConfig& cfg)
    : id_(id),
      train_(std::move(train)),
      val_(std::move(val)),
      segment_(plan.client_segment),
      cfg_(cfg),
      expected_hash_(plan_hash(plan, cfg)),
      shuffle_rng_(derive_seed(cfg.seed, seed_tag::client_shuffle(id))) {
    SplitMix64 param_rng(derive_seed(cfg.seed, seed_tag::client_params(id)));
    model_ = ModelT<float>::build(segment_, param_rng);
}

void ClientNode::configure(const ConfigMsg& cfg) {
    if (cfg.plan_hash != expected_hash_)
        throw ConfigError("client " + std::to_string(id_) + ": server plan hash mismatch");
    if (cfg.shard_size != train_.size())
        throw ConfigError("client " + std::to_string(id_) + ": server expects shard of " +
                          std::to_string(cfg.shard_size) + " rows, local shard has " +
                          std::to_string(train_.size()));
    if (cfg.train.epochs != cfg_.epochs || cfg.train.batch_size != cfg_.batch_size ||
        cfg.train.learning_rate != cfg_.learning_rate || cfg.train.seed != cfg_.seed ||
        cfg.train.loss != cfg_.loss)
        throw ConfigError("client " + std::to_string(id_) + ": train config mismatch");
    if (!spec_equal(model_spec_from_json(cfg.client_segment_json), segment_))
        throw ConfigError("client " + std::to_string(id_) + ": segment spec mismatch");
    configured_ = true;
}

const std::vector<std::uint64_t>& ClientNode::begin_epoch() {
    epoch_order_.resize(train_.size());
    for (std::size_t i = 0; i < epoch_order_.size(); ++i) epoch_order_[i] = i;
    fisher_yates_shuffle(epoch_order_, shuffle_rng_);
    return epoch_order_;
}

ActivationsMsg ClientNode::client_round(std::uint64_t round_id,
                                        std::span<const std::uint64_t> rows) {
    if (!configured_) throw NotConfigured("client " + std::to_string(id_) + " not configured");
    if (rows.empty()) throw ShapeMismatch("client_round with zero rows");
    if (pending_)
        throw StaleRound("client " + std::to_string(id_) + ": round " +
                         std::to_string(pending_round_) + " still awaiting gradients");
    std::vector<std::uint64_t> idx(rows.begin(), rows.end());
    for (auto r : idx)
        if (r >= train_.size())
            throw ShapeMismatch("client " + std::to_string(id_) + ": sample index " +
                                std::to_string(r) + " outside shard of " +
                                std::to_string(train_.size()));
    ActivationsMsg m;
    m.round_id = round_id;
    m.client_id = id_;
    m.tensor = model_.forward(gather_rows(train_.features, idx));
    m.labels = gather_rows(train_.labels, idx);
    pending_ = true;
    pending_round_ = round_id;
    pending_act_shape_ = m.tensor.shape;
    return m;
}

void ClientNode::apply_gradients(const GradientsMsg& g) {
    if (!configured_) throw NotConfigured("client " + std::to_string(id_) + " not configured");
    if (!pending_ || g.round_id != pending_round_)
        throw StaleRound("client " + std::to_string(id_) + ": gradients for round " +
                         std::to_string(g.round_id) + " do not match pending round");
    if (g.client_id != id_)
        throw RoundMismatch("gradients addressed to client " + std::to_string(g.client_id) +
                            " delivered to client " + std::to_string(id_));
    if (g.tensor.shape != pending_act_shape_)
        throw ShapeMismatch("gradient slice shape " + g.tensor.shape_str() +
                            " does not match sent activations");
    model_.backward(g.tensor);
    sgd_step(model_, static_cast<float>(cfg_.learning_rate));
    pending_ = false;
}

std::optional<ActivationsMsg> ClientNode::eval_message(std::uint64_t round_id) {
    if (!configured_) throw NotConfigured("client " + std::to_string(id_) + " not configured");
    if (!val_) return std::nullopt;
    ActivationsMsg m;
    m.round_id = round_id;
    m.client_id = id_;
    m.tensor = model_.forward(val_->features);
    m.labels = val_->labels;
    return m;
}

ServerNode::ServerNode(const SplitPlan& plan, const TrainConfig& cfg,
                       std::vector<std::size_t> client_train_sizes)
    : plan_(plan), cfg_(cfg), train_sizes_(std::move(client_train_sizes)),
      hash_(plan_hash(plan, cfg)) {
    SplitMix64 param_rng(derive_seed(cfg.seed, seed_tag::server_params()));
    model_ = ModelT<float>::build(plan_.server_segment, param_rng);
}

ConfigMsg ServerNode::config_for(std::uint32_t client_id) const {
    if (client_id >= train_sizes_.size())
        throw MissingClient("no shard for client " + std::to_string(client_id));
    ConfigMsg c;
    c.plan_hash = hash_;
    c.train = cfg_;
    c.client_segment_json = model_spec_to_json(plan_.client_segment);
    c.shard_size = train_sizes_[client_id];
    return c;
}

namespace {

// Ascending client id; also trips on duplicates and unknown senders.
std::vector<ActivationsMsg> order_by_client(const std::vector<ActivationsMsg>& acts,
                                            const std::vector<std::uint32_t>& expected) {
    std::vector<ActivationsMsg> sorted = acts;
    std::sort(sorted.begin(), sorted.end(),
              [](const ActivationsMsg& a, const ActivationsMsg& b) { return a.client_id < b.client_id; });
    std::vector<std::uint32_t> exp = expected;
    std::sort(exp.begin(), exp.end());
    for (const auto& id : exp) {
        bool found = false;
        for (const auto& a : sorted) found = found || a.client_id == id;
        if (!found) throw MissingClient("no activations from client " + std::to_string(id));
    }
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i + 1 < sorted.size() && sorted[i].client_id == sorted[i + 1].client_id)
            throw RoundMismatch("duplicate activations from client " +
                                std::to_string(sorted[i].client_id));
        bool known = false;
        for (const auto& id : exp) known = known || id == sorted[i].client_id;
        if (!known)
            throw MissingClient("unexpected activations from client " +
                                std::to_string(sorted[i].client_id));
    }
    return sorted;
}

}  // namespace

ServerNode::RoundOutput ServerNode::server_round(const std::vector<ActivationsMsg>& acts,
                                                 const std::vector<std::uint32_t>& expected) {
    if (expected.empty()) throw MissingClient("round with no expected clients");
    auto sorted = order_by_client(acts, expected);
    const std::uint64_t round = sorted.front().round_id;
    for (const auto& a : sorted)
        if (a.round_id != round)
            throw RoundMismatch("client " + std::to_string(a.client_id) + " sent round " +
                                std::to_string(a.round_id) + ", expected " + std::to_string(round));
    if (has_last_round_ && round <= last_round_)
        throw StaleRound("round " + std::to_string(round) + " not after round " +
                         std::to_string(last_round_));

    std::vector<Tensor> maps, labs;
    for (const auto& a : sorted) {
        maps.push_back(a.tensor);
        labs.push_back(a.labels);
    }
    Tensor batch = concat_axis0(maps);
    Tensor labels = concat_axis0(labs);

    Tensor out = model_.forward(batch);
    auto lr = loss_forward(cfg_.loss, out, reshape(labels, out.shape));
    Tensor grad_in = model_.backward(lr.grad);
    sgd_step(model_, static_cast<float>(cfg_.learning_rate));

    RoundOutput res;
    res.loss = lr.value;
    res.rows = batch.shape[0];
    std::size_t off = 0;
    for (const auto& a : sorted) {
        GradientsMsg g;
        g.round_id = round;
        g.client_id = a.client_id;
        g.tensor = slice_axis0(grad_in, off, a.tensor.shape[0]);
        off += a.tensor.shape[0];
        res.grads.push_back(std::move(g));
    }
    has_last_round_ = true;
    last_round_ = round;
    return res;
}

MetricsMsg ServerNode::eval_round(const std::vector<ActivationsMsg>& acts, std::uint32_t epoch,
                                  double train_loss) {
    MetricsMsg m;
    m.epoch = epoch;
    m.loss = train_loss;
    if (acts.empty()) {
        m.metric = std::numeric_limits<double>::quiet_NaN();
        return m;
    }
    std::vector<std::uint32_t> senders;
    for (const auto& a : acts) senders.push_back(a.client_id);
    auto sorted = order_by_client(acts, senders);
    std::vector<Tensor> maps, labs;
    for (const auto& a : sorted) {
        maps.push_back(a.tensor);
        labs.push_back(a.labels);
    }
    Tensor pred = model_.forward(concat_axis0(maps));
    Tensor labels = reshape(concat_axis0(labs), pred.shape);
    if (is_classification(cfg_.loss)) {
        m.metric = binary_accuracy(pred, labels);
    } else {
        std::vector<double> p(pred.data.begin(), pred.data.end());
        std::vector<double> t(labels.data.begin(), labels.data.end());
        m.metric = rmsle_nonneg(p, t);
    }
    return m;
}

namespace {

ActivationsMsg expect_activations(Message&& m) {
    if (auto* a = std::get_if<ActivationsMsg>(&m)) return std::move(*a);
    throw ProtocolError("expected Activations frame");
}

}  // namespace

TrainResult train_simulation(const ExperimentSetup& setup, Transcript* transcript) {
    const std::size_t N = setup.clients.size();
    if (N == 0) throw ConfigError("no clients in setup");
    std::vector<std::size_t> train_sizes;
    for (std::size_t c = 0; c < N; ++c) {
        if (setup.clients[c].train.size() == 0)
            throw ConfigError("client " + std::to_string(c) +
                              " has no training rows; enlarge the dataset or rebalance");
        train_sizes.push_back(setup.clients[c].train.size());
    }

    ServerNode server(setup.plan, setup.train, train_sizes);
    std::vector<ClientNode> clients;
    clients.reserve(N);
    std::vector<std::unique_ptr<Transport>> c_end, s_end;
    for (std::size_t c = 0; c < N; ++c) {
        clients.emplace_back(static_cast<std::uint32_t>(c), setup.clients[c].train,
                             setup.clients[c].val, setup.plan, setup.train);
        auto [ce, se] = make_pipe(transcript);
        c_end.push_back(std::move(ce));
        s_end.push_back(std::move(se));
    }

    // handshake: Hello up, Config down, then the client cross-checks
    for (std::size_t c = 0; c < N; ++c) {
        c_end[c]->send(HelloMsg{static_cast<std::uint32_t>(c), kProtocolVersion});
        handshake_server(*s_end[c], server.config_for(static_cast<std::uint32_t>(c)));
        Message reply = c_end[c]->recv();
        const auto* cfg = std::get_if<ConfigMsg>(&reply);
        if (!cfg) throw ProtocolError("expected Config reply");
        clients[c].configure(*cfg);
    }

    TrainResult result;
    result.schedule = compute_schedule(train_sizes, setup.train.batch_size);
    const std::size_t R = result.schedule.rounds.size();

    for (std::size_t epoch = 0; epoch < setup.train.epochs; ++epoch) {
        auto epoch_start = std::chrono::steady_clock::now();
        std::vector<std::vector<std::uint64_t>> orders;
        for (auto& cl : clients) orders.push_back(cl.begin_epoch());
        std::vector<std::size_t> cursor(N, 0);

        double loss_acc = 0.0;
        std::size_t rows_acc = 0;
        for (std::size_t r = 0; r < R; ++r) {
            const auto& alloc = result.schedule.rounds[r];
            const std::uint64_t round = train_round_id(epoch, R, r);
            std::vector<std::uint32_t> expected;
            for (std::size_t c = 0; c < N; ++c) {
                if (alloc[c] == 0) continue;
                expected.push_back(static_cast<std::uint32_t>(c));
                std::span<const std::uint64_t> rows(orders[c].data() + cursor[c], alloc[c]);
                c_end[c]->send(clients[c].client_round(round, rows));
                cursor[c] += alloc[c];
            }
            std::vector<ActivationsMsg> acts;
            for (auto c : expected) acts.push_back(expect_activations(s_end[c]->recv()));
            auto out = server.server_round(acts, expected);
            result.round_losses.push_back(out.loss);
            loss_acc += out.loss * static_cast<double>(out.rows);
            rows_acc += out.rows;
            for (auto& g : out.grads) {
                std::uint32_t c = g.client_id;
                s_end[c]->send(g);
                Message m = c_end[c]->recv();
                const auto* gm = std::get_if<GradientsMsg>(&m);
                if (!gm) throw ProtocolError("expected Gradients frame");
                clients[c].apply_gradients(*gm);
            }
        }
        double epoch_loss = rows_acc > 0 ? loss_acc / static_cast<double>(rows_acc) : 0.0;

        const std::uint64_t eval_round = eval_round_id(epoch, R);
        std::vector<std::uint32_t> eval_clients;
        for (std::size_t c = 0; c < N; ++c) {
            auto msg = clients[c].eval_message(eval_round);
            if (!msg) continue;
            eval_clients.push_back(static_cast<std::uint32_t>(c));
            c_end[c]->send(*msg);
        }
        std::vector<ActivationsMsg> eval_acts;
        for (auto c : eval_clients) eval_acts.push_back(expect_activations(s_end[c]->recv()));
        MetricsMsg metrics = server.eval_round(eval_acts, static_cast<std::uint32_t>(epoch), epoch_loss);
        for (std::size_t c = 0; c < N; ++c) {
            s_end[c]->send(metrics);
            c_end[c]->recv();  // clients observe the epoch metrics
        }
        result.epochs.push_back(EpochMetrics{epoch_loss, metrics.metric});
        result.epoch_wall_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count());
    }

    for (std::size_t c = 0; c < N; ++c) {
        s_end[c]->send(DoneMsg{});
        Message m = c_end[c]->recv();
        if (!std::holds_alternative<DoneMsg>(m)) throw ProtocolError("expected Done frame");
        c_end[c]->close();
    }

    for (auto& cl : clients) result.client_params.push_back(snapshot_params(cl.model()));
    result.server_params = snapshot_params(server.model());
    return result;
}

}  // namespace splitmesh
