#include "splitmesh/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "splitmesh/errors.hpp"
#include "splitmesh/loaders.hpp"
#include "splitmesh/log.hpp"
#include "splitmesh/loss.hpp"

namespace splitmesh {

using nlohmann::json;
namespace fs = std::filesystem;

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

namespace {

const char* kConfigKeys[] = {"preset",     "scale",   "model",         "dataset", "clients",
                             "ratio",      "epochs",  "batch_size",    "learning_rate",
                             "seed",       "mode",    "out",           "synth_n", "synth_sigma",
                             "csv_features", "csv_label", "port"};

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config json: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config json: top level must be an object");
    for (const auto& [key, _] : j.items()) {
        bool known = false;
        for (const char* k : kConfigKeys) known = known || key == k;
        if (!known) throw ConfigError("config json: unknown key '" + key + "'");
    }
    ExperimentConfig c;
    try {
        if (j.contains("preset")) c.preset_name = j.at("preset").get<std::string>();
        if (j.contains("scale")) c.scale = j.at("scale").get<std::string>();
        if (j.contains("model")) c.inline_model = model_spec_from_json(j.at("model").dump());
        if (j.contains("dataset")) c.dataset = j.at("dataset").get<std::string>();
        if (j.contains("clients")) c.clients = j.at("clients").get<std::size_t>();
        if (j.contains("ratio")) c.ratio = j.at("ratio").get<std::string>();
        if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::uint32_t>();
        if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::uint32_t>();
        if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("mode")) c.mode = j.at("mode").get<std::string>();
        if (j.contains("out")) c.out = j.at("out").get<std::string>();
        if (j.contains("synth_n")) c.synth_n = j.at("synth_n").get<std::uint64_t>();
        if (j.contains("synth_sigma")) c.synth_sigma = j.at("synth_sigma").get<double>();
        if (j.contains("csv_features"))
            c.csv_features = j.at("csv_features").get<std::vector<std::string>>();
        if (j.contains("csv_label")) c.csv_label = j.at("csv_label").get<std::string>();
        if (j.contains("port")) c.port = j.at("port").get<std::uint16_t>();
    } catch (const ParseError&) {
        throw;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config json: ") + e.what());
    }
    return c;
}

ExperimentConfig config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json_text(buf.str());
}

std::vector<std::uint64_t> shard_sizes_for(std::uint64_t n, const SplitRatio& ratio) {
    return apportion_largest_remainder(n, ratio.parts);
}

BuiltExperiment build_experiment(const ExperimentConfig& config) {
    ExperimentConfig cfg = config;
    if (cfg.mode == "oracle") {
        cfg.clients = 1;
        cfg.ratio = "1";
    } else if (cfg.mode != "split") {
        throw ConfigError("mode must be 'split' or 'oracle', got '" + cfg.mode + "'");
    }

    ModelSpec model;
    TrainConfig train;
    std::string id_base;
    if (cfg.inline_model) {
        model = *cfg.inline_model;
        train.loss = model.loss;
        id_base = "custom";
    } else {
        Preset p = preset(cfg.preset_name, cfg.scale);
        model = p.model;
        train = p.train;
        id_base = p.name + "-" + p.scale;
    }
    if (cfg.epochs) train.epochs = *cfg.epochs;
    if (cfg.batch_size) train.batch_size = *cfg.batch_size;
    if (cfg.learning_rate) train.learning_rate = *cfg.learning_rate;
    train.seed = cfg.seed;
    train.loss = model.loss;
    if (train.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (train.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(train.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");

    SplitRatio ratio;
    try {
        ratio = parse_ratio(cfg.ratio);
    } catch (const ParseError& e) {
        throw ConfigError(e.what());
    }
    if (ratio.parts.size() != cfg.clients)
        throw ConfigError("ratio '" + cfg.ratio + "' has " + std::to_string(ratio.parts.size()) +
                          " parts for " + std::to_string(cfg.clients) + " clients");

    TaskKind task = is_classification(model.loss) ? TaskKind::Classification : TaskKind::Regression;
    Dataset data;
    bool csv_source = false;
    if (cfg.dataset == "synth") {
        std::uint64_t n = cfg.synth_n ? cfg.synth_n : 10ull * train.batch_size;
        data = synth(task, n, model.input_shape, derive_seed(train.seed, seed_tag::synth()),
                     cfg.synth_sigma);
    } else if (cfg.dataset.rfind("csv:", 0) == 0) {
        data = load_csv(cfg.dataset.substr(4), cfg.csv_features, cfg.csv_label);
        csv_source = true;
    } else if (cfg.dataset.rfind("dir:", 0) == 0) {
        data = load_tensor_dir(cfg.dataset.substr(4));
    } else {
        throw ConfigError("dataset must be 'synth', 'csv:<path>' or 'dir:<path>'");
    }
    if (data.sample_shape() != model.input_shape) {
        Tensor probe(model.input_shape);
        throw ConfigError("dataset sample shape " + data.features.shape_str() +
                          " (minus batch) does not match model input " + probe.shape_str());
    }
    if ((data.task == TaskKind::Classification) != is_classification(model.loss))
        throw ConfigError("dataset task does not match the model loss");

    auto parts = partition(data.size(), ratio, derive_seed(train.seed, seed_tag::partition()));
    std::vector<EvalSplit> splits;
    for (std::size_t c = 0; c < cfg.clients; ++c)
        splits.push_back(eval_split(parts.shards[c],
                                    derive_seed(train.seed, seed_tag::eval_split(
                                                                static_cast<std::uint32_t>(c)))));

    if (csv_source) {
        // normalization stats from the union of training rows only
        std::vector<std::uint64_t> train_rows;
        for (const auto& s : splits) train_rows.insert(train_rows.end(), s.train.begin(), s.train.end());
        std::sort(train_rows.begin(), train_rows.end());
        zscore_apply(data, zscore_fit(data, train_rows));
    }

    BuiltExperiment b;
    b.model = model;
    b.ratio = ratio;
    b.dataset_rows = data.size();
    b.dropped_rows = data.dropped_rows;
    b.setup.plan = split_model(model);
    b.setup.train = train;
    for (std::size_t c = 0; c < cfg.clients; ++c) {
        if (splits[c].train.empty())
            throw ConfigError("client " + std::to_string(c) +
                              " would receive no training rows; enlarge the dataset");
        ClientData cd;
        cd.train = gather_dataset(data, splits[c].train);
        if (!splits[c].val.empty()) cd.val = gather_dataset(data, splits[c].val);
        b.setup.clients.push_back(std::move(cd));
    }
    b.experiment_id = id_base + "-c" + std::to_string(cfg.clients) + "-r" + cfg.ratio + "-s" +
                      std::to_string(train.seed) + (config.mode == "oracle" ? "-oracle" : "");
    return b;
}

TrainResult oracle_train(const ExperimentSetup& setup) {
    const std::size_t N = setup.clients.size();
    if (N == 0) throw ConfigError("no clients in setup");
    std::vector<std::size_t> train_sizes;
    for (std::size_t c = 0; c < N; ++c) {
        if (setup.clients[c].train.size() == 0)
            throw ConfigError("client " + std::to_string(c) + " has no training rows");
        train_sizes.push_back(setup.clients[c].train.size());
    }
    const TrainConfig& tc = setup.train;

    std::vector<ModelT<float>> reps;
    std::vector<SplitMix64> shuffles;
    for (std::size_t c = 0; c < N; ++c) {
        SplitMix64 pr(derive_seed(tc.seed, seed_tag::client_params(static_cast<std::uint32_t>(c))));
        reps.push_back(ModelT<float>::build(setup.plan.client_segment, pr));
        shuffles.emplace_back(derive_seed(tc.seed, seed_tag::client_shuffle(static_cast<std::uint32_t>(c))));
    }
    SplitMix64 sr(derive_seed(tc.seed, seed_tag::server_params()));
    ModelT<float> server = ModelT<float>::build(setup.plan.server_segment, sr);

    TrainResult res;
    res.schedule = compute_schedule(train_sizes, tc.batch_size);
    const std::size_t R = res.schedule.rounds.size();

    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        auto epoch_start = std::chrono::steady_clock::now();
        std::vector<std::vector<std::uint64_t>> orders(N);
        for (std::size_t c = 0; c < N; ++c) {
            orders[c].resize(train_sizes[c]);
            for (std::size_t i = 0; i < train_sizes[c]; ++i) orders[c][i] = i;
            fisher_yates_shuffle(orders[c], shuffles[c]);
        }
        std::vector<std::size_t> cursor(N, 0);

        double loss_acc = 0.0;
        std::size_t rows_acc = 0;
        for (std::size_t r = 0; r < R; ++r) {
            const auto& alloc = res.schedule.rounds[r];
            std::vector<std::size_t> active;
            std::vector<Tensor> maps, labs;
            for (std::size_t c = 0; c < N; ++c) {
                if (alloc[c] == 0) continue;
                active.push_back(c);
                std::vector<std::uint64_t> rows(orders[c].begin() + static_cast<std::ptrdiff_t>(cursor[c]),
                                                orders[c].begin() +
                                                    static_cast<std::ptrdiff_t>(cursor[c] + alloc[c]));
                cursor[c] += alloc[c];
                maps.push_back(reps[c].forward(gather_rows(setup.clients[c].train.features, rows)));
                labs.push_back(gather_rows(setup.clients[c].train.labels, rows));
            }
            Tensor batch = concat_axis0(maps);
            Tensor out = server.forward(batch);
            auto lr = loss_forward(tc.loss, out, reshape(concat_axis0(labs), out.shape));
            Tensor grad_in = server.backward(lr.grad);
            sgd_step(server, static_cast<float>(tc.learning_rate));
            std::size_t off = 0;
            for (std::size_t c : active) {
                Tensor slice = slice_axis0(grad_in, off, alloc[c]);
                off += alloc[c];
                reps[c].backward(slice);
                sgd_step(reps[c], static_cast<float>(tc.learning_rate));
            }
            res.round_losses.push_back(lr.value);
            loss_acc += lr.value * static_cast<double>(batch.shape[0]);
            rows_acc += batch.shape[0];
        }
        double epoch_loss = rows_acc > 0 ? loss_acc / static_cast<double>(rows_acc) : 0.0;

        double metric = std::numeric_limits<double>::quiet_NaN();
        std::vector<Tensor> vmaps, vlabs;
        for (std::size_t c = 0; c < N; ++c) {
            if (!setup.clients[c].val) continue;
            vmaps.push_back(reps[c].forward(setup.clients[c].val->features));
            vlabs.push_back(setup.clients[c].val->labels);
        }
        if (!vmaps.empty()) {
            Tensor pred = server.forward(concat_axis0(vmaps));
            Tensor labels = reshape(concat_axis0(vlabs), pred.shape);
            if (is_classification(tc.loss)) {
                metric = binary_accuracy(pred, labels);
            } else {
                std::vector<double> p(pred.data.begin(), pred.data.end());
                std::vector<double> t(labels.data.begin(), labels.data.end());
                metric = rmsle_nonneg(p, t);
            }
        }
        res.epochs.push_back(EpochMetrics{epoch_loss, metric});
        res.epoch_wall_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count());
    }

    for (std::size_t c = 0; c < N; ++c) res.client_params.push_back(snapshot_params(reps[c]));
    res.server_params = snapshot_params(server);
    return res;
}

double display_metric(double metric, LossKind loss) {
    return is_classification(loss) ? metric * 100.0 : metric;
}

void csv_metrics_header(std::ostream& os) {
    os << "# splitmesh-metrics v1\n";
    os << "experiment_id,clients,ratio,epoch,train_loss,val_metric\n";
}

void csv_summary_header(std::ostream& os) {
    os << "# splitmesh-summary v1\n";
    os << "experiment_id,clients,ratio,seed,epochs,final_train_loss,final_val_metric,"
          "metric_mean,metric_min,metric_max\n";
}

void csv_timing_header(std::ostream& os) {
    os << "# splitmesh-timing v1\n";
    os << "experiment_id,epoch,wall_seconds\n";
}

void csv_metrics_row(std::ostream& os, const std::string& id, std::size_t clients,
                     const std::string& ratio, std::size_t epoch1, double train_loss,
                     double shown_metric) {
    os << id << ',' << clients << ',' << ratio << ',' << epoch1 << ',' << fmt_double(train_loss)
       << ',' << fmt_double(shown_metric) << '\n';
}

void csv_summary_row(std::ostream& os, const std::string& id, std::size_t clients,
                     const std::string& ratio, std::uint64_t seed, std::size_t epochs,
                     double final_loss, double final_metric, double mean, double mn, double mx) {
    os << id << ',' << clients << ',' << ratio << ',' << seed << ',' << epochs << ','
       << fmt_double(final_loss) << ',' << fmt_double(final_metric) << ',' << fmt_double(mean)
       << ',' << fmt_double(mn) << ',' << fmt_double(mx) << '\n';
}

void csv_timing_row(std::ostream& os, const std::string& id, std::size_t epoch1, double seconds) {
    os << id << ',' << epoch1 << ',' << fmt_double(seconds) << '\n';
}

RunOutcome run_single(const ExperimentConfig& config, std::ostream* metrics_csv,
                      std::ostream* timing_csv) {
    BuiltExperiment b = build_experiment(config);
    TrainResult tr =
        config.mode == "oracle" ? oracle_train(b.setup) : train_simulation(b.setup, nullptr);

    RunOutcome out;
    out.experiment_id = b.experiment_id;
    out.epochs = tr.epochs;
    out.epoch_wall_seconds = tr.epoch_wall_seconds;
    LossKind loss = b.setup.train.loss;
    std::size_t clients = b.setup.clients.size();
    for (std::size_t e = 0; e < tr.epochs.size(); ++e) {
        if (metrics_csv)
            csv_metrics_row(*metrics_csv, b.experiment_id, clients, ratio_to_string(b.ratio), e + 1,
                            tr.epochs[e].train_loss, display_metric(tr.epochs[e].val_metric, loss));
        if (timing_csv) csv_timing_row(*timing_csv, b.experiment_id, e + 1, tr.epoch_wall_seconds[e]);
    }
    if (!tr.epochs.empty()) {
        out.final_train_loss = tr.epochs.back().train_loss;
        out.final_val_metric = display_metric(tr.epochs.back().val_metric, loss);
    }
    return out;
}

RunOutcome run_experiment(const ExperimentConfig& config) {
    std::ofstream metrics(config.out, std::ios::trunc);
    if (!metrics) throw IoError("cannot create " + config.out);
    std::ofstream summary(config.out + ".summary.csv", std::ios::trunc);
    std::ofstream timing(config.out + ".timing.csv", std::ios::trunc);
    csv_metrics_header(metrics);
    csv_summary_header(summary);
    csv_timing_header(timing);
    RunOutcome out = run_single(config, &metrics, &timing);
    csv_summary_row(summary, out.experiment_id, config.mode == "oracle" ? 1 : config.clients,
                    config.mode == "oracle" ? "1" : config.ratio, config.seed, out.epochs.size(),
                    out.final_train_loss, out.final_val_metric, out.final_val_metric,
                    out.final_val_metric, out.final_val_metric);
    return out;
}

std::vector<std::pair<std::size_t, std::string>> reference_grid() {
    return {{3, "1:1:1"},     {3, "7:2:1"},     {3, "8:1:1"},
            {4, "1:1:1:1"},   {4, "4:3:2:1"},   {4, "7:1:1:1"},
            {5, "1:1:1:1:1"}, {5, "4:2:2:1:1"}, {5, "6:1:1:1:1"}};
}

std::vector<std::pair<std::size_t, std::string>> equivalence_grid() {
    std::vector<std::pair<std::size_t, std::string>> g{{1, "1"}};
    for (auto& cell : reference_grid()) g.push_back(cell);
    return g;
}

SweepResult sweep(const ExperimentConfig& base,
                  const std::vector<std::pair<std::size_t, std::string>>& grid,
                  std::size_t repeats, const std::string& out_path) {
    if (grid.empty()) throw ConfigError("sweep grid is empty");
    if (repeats < 1) throw ConfigError("sweep repeats must be >= 1");
    std::ofstream metrics(out_path, std::ios::trunc);
    if (!metrics) throw IoError("cannot create " + out_path);
    std::ofstream summary(out_path + ".summary.csv", std::ios::trunc);
    std::ofstream timing(out_path + ".timing.csv", std::ios::trunc);
    csv_metrics_header(metrics);
    csv_summary_header(summary);
    csv_timing_header(timing);

    SweepResult result;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        SweepCell cell;
        cell.clients = grid[i].first;
        cell.ratio = grid[i].second;
        cell.seed = base.seed + i;
        std::string cell_id;
        double final_loss = std::numeric_limits<double>::quiet_NaN();
        std::size_t cell_epochs = 0;
        try {
            for (std::size_t rep = 0; rep < repeats; ++rep) {
                ExperimentConfig cfg = base;
                cfg.mode = "split";
                cfg.clients = cell.clients;
                cfg.ratio = cell.ratio;
                cfg.seed = cell.seed + 7919 * rep;
                RunOutcome out = run_single(cfg, &metrics, &timing);
                if (rep == 0) {
                    cell_id = out.experiment_id;
                    final_loss = out.final_train_loss;
                    cell_epochs = out.epochs.size();
                }
                cell.final_metrics.push_back(out.final_val_metric);
            }
        } catch (const std::exception& e) {
            cell.failed = true;
            cell.error = e.what();
            result.all_ok = false;
            log_warn("sweep cell " + std::to_string(i) + " (" + std::to_string(cell.clients) +
                     " clients, " + cell.ratio + ") failed: " + cell.error);
        }
        double mean = std::numeric_limits<double>::quiet_NaN();
        double mn = mean, mx = mean, final_metric = mean;
        if (!cell.final_metrics.empty()) {
            mn = mx = mean = 0.0;
            for (double v : cell.final_metrics) mean += v;
            mean /= static_cast<double>(cell.final_metrics.size());
            mn = *std::min_element(cell.final_metrics.begin(), cell.final_metrics.end());
            mx = *std::max_element(cell.final_metrics.begin(), cell.final_metrics.end());
            final_metric = cell.final_metrics.front();
        }
        if (cell_id.empty())
            cell_id = "failed-c" + std::to_string(cell.clients) + "-r" + cell.ratio + "-s" +
                      std::to_string(cell.seed);
        csv_summary_row(summary, cell_id, cell.clients, cell.ratio, cell.seed, cell_epochs,
                        final_loss, final_metric, mean, mn, mx);
        result.cells.push_back(std::move(cell));
    }
    return result;
}

OracleReport compare_oracle(const ExperimentConfig& config, const OracleTweak& tweak) {
    if (config.mode != "split")
        throw ConfigError("compare_oracle needs a split-mode config");
    BuiltExperiment b = build_experiment(config);
    TrainResult sim = train_simulation(b.setup, nullptr);
    ExperimentSetup oracle_setup = b.setup;
    oracle_setup.train.learning_rate *= tweak.lr_scale;
    TrainResult orc = oracle_train(oracle_setup);

    OracleReport rep;
    rep.epochs = sim.epochs.size();
    if (sim.epochs.size() != orc.epochs.size())
        throw ConfigError("oracle produced a different epoch count");
    for (std::size_t e = 0; e < sim.epochs.size(); ++e)
        rep.max_loss_diff = std::max(rep.max_loss_diff,
                                     std::fabs(sim.epochs[e].train_loss - orc.epochs[e].train_loss));
    auto diff_params = [&](const std::vector<Tensor>& a, const std::vector<Tensor>& bt) {
        if (a.size() != bt.size()) throw ConfigError("oracle parameter list mismatch");
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i].shape != bt[i].shape) throw ConfigError("oracle parameter shape mismatch");
            for (std::size_t k = 0; k < a[i].data.size(); ++k) {
                rep.max_param_diff =
                    std::max(rep.max_param_diff,
                             std::fabs(static_cast<double>(a[i].data[k]) -
                                       static_cast<double>(bt[i].data[k])));
                ++rep.params_compared;
            }
        }
    };
    if (sim.client_params.size() != orc.client_params.size())
        throw ConfigError("oracle client count mismatch");
    for (std::size_t c = 0; c < sim.client_params.size(); ++c)
        diff_params(sim.client_params[c], orc.client_params[c]);
    diff_params(sim.server_params, orc.server_params);
    rep.pass = rep.max_loss_diff == 0.0 && rep.max_param_diff == 0.0;
    return rep;
}

double peak_ncc(const std::vector<float>& image, std::size_t H, std::size_t W,
                const std::vector<float>& chan, std::size_t h, std::size_t w) {
    if (image.size() != H * W || chan.size() != h * w)
        throw ShapeMismatch("peak_ncc: buffer sizes do not match dims");
    std::vector<double> up(H * W);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            up[y * W + x] = chan[(y * h / H) * w + (x * w / W)];

    const std::ptrdiff_t maxdy = static_cast<std::ptrdiff_t>(H / 2);
    const std::ptrdiff_t maxdx = static_cast<std::ptrdiff_t>(W / 2);
    double peak = 0.0;
    for (std::ptrdiff_t dy = -maxdy; dy <= maxdy; ++dy)
        for (std::ptrdiff_t dx = -maxdx; dx <= maxdx; ++dx) {
            double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
            std::size_t n = 0;
            std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
            std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(H, static_cast<std::ptrdiff_t>(H) - dy);
            std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
            std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, static_cast<std::ptrdiff_t>(W) - dx);
            for (std::ptrdiff_t y = y0; y < y1; ++y)
                for (std::ptrdiff_t x = x0; x < x1; ++x) {
                    double a = image[static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)];
                    double b = up[static_cast<std::size_t>(y + dy) * W + static_cast<std::size_t>(x + dx)];
                    sx += a;
                    sy += b;
                    sxx += a * a;
                    syy += b * b;
                    sxy += a * b;
                    ++n;
                }
            if (n < 8) continue;
            double nd = static_cast<double>(n);
            double va = nd * sxx - sx * sx;
            double vb = nd * syy - sy * sy;
            if (va <= 0.0 || vb <= 0.0) continue;  // zero variance counts as correlation 0
            double r = (nd * sxy - sx * sy) / std::sqrt(va * vb);
            peak = std::max(peak, std::fabs(r));
        }
    return peak;
}

PrivacyReport privacy_report(const ExperimentConfig& config, std::size_t samples,
                             const std::string& out_dir) {
    if (samples < 1) throw ConfigError("privacy report needs at least one sample");
    BuiltExperiment b = build_experiment(config);
    if (b.setup.plan.client_segment.input_shape.size() != 3)
        throw ConfigError("privacy report needs an image-shaped ([C,H,W]) model input");
    TrainResult tr = train_simulation(b.setup, nullptr);

    SplitMix64 pr(derive_seed(b.setup.train.seed, seed_tag::client_params(0)));
    ModelT<float> segment = ModelT<float>::build(b.setup.plan.client_segment, pr);
    load_params(segment, tr.client_params[0]);

    const Dataset& shard = b.setup.clients[0].train;
    std::size_t count = std::min<std::size_t>(samples, shard.size());
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "correlations.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot create correlations.csv in " + out_dir);
    csv << "# splitmesh-privacy v1\n";
    csv << "sample,channel,peak_ncc\n";

    PrivacyReport rep;
    rep.samples = count;
    const std::size_t C = shard.features.shape[1], H = shard.features.shape[2],
                      W = shard.features.shape[3];
    for (std::size_t i = 0; i < count; ++i) {
        Tensor input = slice_axis0(shard.features, i, 1);  // [1,C,H,W]
        Tensor fm = segment.forward(input);                // [1,K,h,w]
        char name[64];
        std::snprintf(name, sizeof name, "input_%03zu.nt", i);
        write_nt((fs::path(out_dir) / name).string(), reshape(input, {C, H, W}));
        std::snprintf(name, sizeof name, "featmap_%03zu.nt", i);
        const std::size_t K = fm.shape[1], h = fm.shape[2], w = fm.shape[3];
        write_nt((fs::path(out_dir) / name).string(), reshape(fm, {K, h, w}));
        rep.channels = K;
        // channel 0 of the input is the reference signal
        std::vector<float> ref(input.data.begin(), input.data.begin() + static_cast<std::ptrdiff_t>(H * W));
        for (std::size_t k = 0; k < K; ++k) {
            std::vector<float> ch(fm.data.begin() + static_cast<std::ptrdiff_t>(k * h * w),
                                  fm.data.begin() + static_cast<std::ptrdiff_t>((k + 1) * h * w));
            double peak = peak_ncc(ref, H, W, ch, h, w);
            csv << i << ',' << k << ',' << fmt_double(peak) << '\n';
            rep.rows.push_back(PrivacyReportRow{i, k, peak});
        }
    }
    return rep;
}

}  // namespace splitmesh
