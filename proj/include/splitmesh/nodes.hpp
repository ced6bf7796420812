#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "splitmesh/dataset.hpp"
#include "splitmesh/model.hpp"
#include "splitmesh/model_spec.hpp"
#include "splitmesh/transport.hpp"
#include "splitmesh/wire.hpp"

namespace splitmesh {

// Per-round row contributions. rounds[r][c] is client c's batch share; 0 marks
// an exhausted shard. Every round satisfies sum == min(batch, rows left).
struct RoundSchedule {
    std::size_t batch = 0;
    std::vector<std::vector<std::size_t>> rounds;
};

RoundSchedule compute_schedule(const std::vector<std::size_t>& train_sizes, std::size_t batch);

// Round ids: epoch * (rounds_per_epoch + 1) + r for training rounds, with
// r = rounds_per_epoch for the per-epoch evaluation exchange; strictly
// increasing within and across epochs.
inline std::uint64_t train_round_id(std::size_t epoch, std::size_t rounds_per_epoch, std::size_t r) {
    return static_cast<std::uint64_t>(epoch) * (rounds_per_epoch + 1) + r;
}
inline std::uint64_t eval_round_id(std::size_t epoch, std::size_t rounds_per_epoch) {
    return train_round_id(epoch, rounds_per_epoch, rounds_per_epoch);
}

// Holds the first hidden group and this site's private shard. Parameters come
// from the stream derived for (seed, client id); the epoch shuffle runs on its
// own derived stream, one Fisher-Yates draw per epoch.
class ClientNode {
  public:
    ClientNode(std::uint32_t id, Dataset train, std::optional<Dataset> val, const SplitPlan& plan,
               const TrainConfig& cfg);

    // Cross-checks the server's view (plan hash, segment spec, train config,
    // shard size) before any data flows.
    void configure(const ConfigMsg& cfg);
    bool configured() const { return configured_; }

    // Draws and returns this epoch's traversal order over local train rows.
    const std::vector<std::uint64_t>& begin_epoch();

    // Forward through the client segment over the given local rows; keeps the
    // trace for the matching apply_gradients.
    ActivationsMsg client_round(std::uint64_t round_id, std::span<const std::uint64_t> rows);

    // Backward with the server's input-gradient slice, then one SGD step.
    void apply_gradients(const GradientsMsg& g);

    // Forward over the whole validation slice; nullopt when none exists.
    std::optional<ActivationsMsg> eval_message(std::uint64_t round_id);

    std::uint32_t id() const { return id_; }
    std::size_t train_size() const { return train_.size(); }
    std::size_t val_size() const { return val_ ? val_->size() : 0; }
    ModelT<float>& model() { return model_; }

  private:
    std::uint32_t id_;
    Dataset train_;
    std::optional<Dataset> val_;
    ModelSpec segment_;
    TrainConfig cfg_;
    std::uint64_t expected_hash_;
    ModelT<float> model_;
    SplitMix64 shuffle_rng_;
    std::vector<std::uint64_t> epoch_order_;
    bool configured_ = false;
    bool pending_ = false;
    std::uint64_t pending_round_ = 0;
    std::vector<std::size_t> pending_act_shape_;
};

// Holds the remaining groups. Concatenates per-client feature maps along the
// batch axis in ascending client id order, completes forward/backward, and
// returns each client exactly its own gradient rows.
class ServerNode {
  public:
    ServerNode(const SplitPlan& plan, const TrainConfig& cfg,
               std::vector<std::size_t> client_train_sizes);

    ConfigMsg config_for(std::uint32_t client_id) const;

    struct RoundOutput {
        std::vector<GradientsMsg> grads;  // ascending client id
        double loss = 0.0;
        std::size_t rows = 0;
    };
    // expected: client ids that must contribute this round (schedule b > 0).
    RoundOutput server_round(const std::vector<ActivationsMsg>& acts,
                             const std::vector<std::uint32_t>& expected);

    // Forward-only pass over the concatenated validation maps. Empty input
    // (no client holds validation rows) reports a NaN metric.
    MetricsMsg eval_round(const std::vector<ActivationsMsg>& acts, std::uint32_t epoch,
                          double train_loss);

    std::size_t client_count() const { return train_sizes_.size(); }
    ModelT<float>& model() { return model_; }

  private:
    SplitPlan plan_;
    TrainConfig cfg_;
    std::vector<std::size_t> train_sizes_;
    std::uint64_t hash_;
    ModelT<float> model_;
    bool has_last_round_ = false;
    std::uint64_t last_round_ = 0;
};

struct ClientData {
    Dataset train;
    std::optional<Dataset> val;
};

struct ExperimentSetup {
    SplitPlan plan;
    TrainConfig train;
    std::vector<ClientData> clients;
};

struct EpochMetrics {
    double train_loss = 0.0;
    double val_metric = 0.0;  // accuracy fraction or rmsle; NaN without validation rows
};

struct TrainResult {
    std::vector<EpochMetrics> epochs;
    std::vector<double> round_losses;
    RoundSchedule schedule;
    std::vector<std::vector<Tensor>> client_params;  // final, per client
    std::vector<Tensor> server_params;               // final
    std::vector<double> epoch_wall_seconds;          // measured, not deterministic
};

// Single-threaded split-training run. All traffic crosses in-process pipes as
// encoded frames, so a transcript captures exactly the bytes a network peer
// would see.
TrainResult train_simulation(const ExperimentSetup& setup, Transcript* transcript = nullptr);

}  // namespace splitmesh
