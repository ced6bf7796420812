#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "splitmesh/dataset.hpp"
#include "splitmesh/nodes.hpp"

namespace splitmesh {

struct ExperimentConfig {
    std::string preset_name = "covid";
    std::string scale = "desk";
    std::optional<ModelSpec> inline_model;  // overrides the preset when present
    std::string dataset = "synth";          // synth | csv:<path> | dir:<path>
    std::size_t clients = 1;
    std::string ratio = "1";
    std::optional<std::uint32_t> epochs;  // unset fields fall back to the preset
    std::optional<std::uint32_t> batch_size;
    std::optional<double> learning_rate;
    std::uint64_t seed = 42;
    std::string mode = "split";  // split | oracle
    std::string out = "metrics.csv";
    std::uint64_t synth_n = 0;  // 0 = 10 * batch_size
    double synth_sigma = 1.0;
    std::vector<std::string> csv_features = {"age", "sex", "height", "weight", "tc", "hdl", "tg"};
    std::string csv_label = "ldl";
    std::uint16_t port = 7310;
};

// Strict parse of the documented JSON schema; unknown keys are errors.
ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig config_from_json_file(const std::string& path);

struct BuiltExperiment {
    ExperimentSetup setup;
    ModelSpec model;
    SplitRatio ratio;
    std::string experiment_id;
    std::size_t dataset_rows = 0;
    std::size_t dropped_rows = 0;
};

// Dataset + partition + per-shard 80/20 eval split + normalization (CSV
// sources) + split plan, all derived deterministically from the config.
BuiltExperiment build_experiment(const ExperimentConfig& config);

// Per-client shard sizes before the train/validation split, for planning the
// same run without building datasets.
std::vector<std::uint64_t> shard_sizes_for(std::uint64_t n, const SplitRatio& ratio);

// Monolithic baseline: one replica of the client segment per shard plus the
// server segment in a single process, trained over the interleaved union of
// shards on the exact schedule and seed derivations the split run uses. No
// nodes, no wire; plain tensor calls.
TrainResult oracle_train(const ExperimentSetup& setup);

struct RunOutcome {
    std::string experiment_id;
    std::vector<EpochMetrics> epochs;
    double final_train_loss = 0.0;
    double final_val_metric = 0.0;
    std::vector<double> epoch_wall_seconds;
};

// Trains per config (split simulation or monolithic oracle) and appends rows
// to the three streams: per-epoch metrics, one-line summary, wall-clock
// sidecar. Stream pointers may be null.
RunOutcome run_single(const ExperimentConfig& config, std::ostream* metrics_csv,
                      std::ostream* timing_csv);

// Convenience wrapper writing `out`, `out`.summary.csv and `out`.timing.csv.
RunOutcome run_experiment(const ExperimentConfig& config);

// The nine client-count x ratio cells of the study design.
std::vector<std::pair<std::size_t, std::string>> reference_grid();
// reference_grid plus the single-client cell, for equivalence checks.
std::vector<std::pair<std::size_t, std::string>> equivalence_grid();

struct SweepCell {
    std::size_t clients = 0;
    std::string ratio;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    std::vector<double> final_metrics;  // one per repeat
};

struct SweepResult {
    std::vector<SweepCell> cells;
    bool all_ok = true;
};

// Runs every cell with seed = base seed + cell index (repeat r adds 7919*r),
// appending per-epoch rows per run and one summary row per cell. A failing
// cell is recorded and the sweep continues.
SweepResult sweep(const ExperimentConfig& base,
                  const std::vector<std::pair<std::size_t, std::string>>& grid,
                  std::size_t repeats, const std::string& out_path);

struct OracleReport {
    double max_loss_diff = 0.0;   // per-epoch train loss, absolute
    double max_param_diff = 0.0;  // any parameter element, absolute
    bool pass = false;            // both differences exactly zero
    std::size_t epochs = 0;
    std::size_t params_compared = 0;
};

// Negative-control hook for tests: scales the oracle's learning rate so a
// deliberate mismatch must surface as a nonzero difference.
struct OracleTweak {
    double lr_scale = 1.0;
};

OracleReport compare_oracle(const ExperimentConfig& config, const OracleTweak& tweak = {});

// Peak absolute Pearson correlation between an image and a (nearest-neighbor
// upsampled) feature-map channel over all shifts up to half the image size.
// Zero-variance windows contribute 0.
double peak_ncc(const std::vector<float>& image, std::size_t H, std::size_t W,
                const std::vector<float>& chan, std::size_t h, std::size_t w);

struct PrivacyReportRow {
    std::size_t sample = 0;
    std::size_t channel = 0;
    double peak = 0.0;
};

struct PrivacyReport {
    std::vector<PrivacyReportRow> rows;
    std::size_t samples = 0;
    std::size_t channels = 0;
};

// Trains per config, then dumps `samples` inputs of client 0 with their
// first-hidden-group feature maps as .nt pairs plus a correlation CSV into
// out_dir. Image-shaped inputs only.
PrivacyReport privacy_report(const ExperimentConfig& config, std::size_t samples,
                             const std::string& out_dir);

// Locale-independent %.9g rendering used for all CSV numbers.
std::string fmt_double(double v);

// Accuracy is reported as a percentage; regression metrics pass through.
double display_metric(double metric, LossKind loss);

// CSV emission shared by local runs and the TCP server, so both paths write
// byte-identical files. Each file opens with a schema-version comment line.
void csv_metrics_header(std::ostream& os);
void csv_summary_header(std::ostream& os);
void csv_timing_header(std::ostream& os);
void csv_metrics_row(std::ostream& os, const std::string& id, std::size_t clients,
                     const std::string& ratio, std::size_t epoch1, double train_loss,
                     double shown_metric);
void csv_summary_row(std::ostream& os, const std::string& id, std::size_t clients,
                     const std::string& ratio, std::uint64_t seed, std::size_t epochs,
                     double final_loss, double final_metric, double mean, double mn, double mx);
void csv_timing_row(std::ostream& os, const std::string& id, std::size_t epoch1, double seconds);

}  // namespace splitmesh
