#include <cstddef>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "splitmesh/errors.hpp"
#include "splitmesh/harness.hpp"
#include "splitmesh/loaders.hpp"
#include "splitmesh/tcp.hpp"
#include "splitmesh/wire.hpp"

namespace {

using namespace splitmesh;

// 0 success, 2 config error, 3 runtime error, 4 oracle mismatch
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitOracle = 4;

void print_outcome(const RunOutcome& out) {
    std::cout << "experiment " << out.experiment_id << ": " << out.epochs.size()
              << " epochs, final loss " << fmt_double(out.final_train_loss) << ", final metric "
              << fmt_double(out.final_val_metric) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"splitmesh: multi-site split learning over a binary wire protocol"};
    app.require_subcommand(1);

    std::string config_path, listen_addr, connect_addr, grid_name = "reference";
    std::string out_override, out_dir = "privacy_report";
    std::string preset_name = "covid", preset_scale = "desk";
    std::string pgm_in, pgm_out;
    std::size_t shard = 0, samples = 8, repeats = 1, resize_h = 0, resize_w = 0;
    double lr_scale = 1.0;

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config JSON file")->required();
    };

    auto* run_local = app.add_subcommand("run-local", "train all nodes in-process over byte pipes");
    add_config(run_local);

    auto* oracle = app.add_subcommand("oracle", "train the monolithic baseline for the same config");
    add_config(oracle);

    auto* server = app.add_subcommand("server", "serve the model trunk over TCP");
    add_config(server);
    server->add_option("--listen", listen_addr, "host:port to listen on (default from config)");

    auto* client = app.add_subcommand("client", "run one data-holding client over TCP");
    add_config(client);
    client->add_option("--shard", shard, "which client slot this process fills")->required();
    client->add_option("--connect", connect_addr, "server host:port (default from config)");

    auto* sweep_cmd = app.add_subcommand("sweep", "run a client-count x split-ratio grid");
    add_config(sweep_cmd);
    sweep_cmd->add_option("--grid", grid_name, "reference (9 cells) or equivalence (adds 1-client)")
        ->check(CLI::IsMember({"reference", "equivalence"}));
    sweep_cmd->add_option("--repeats", repeats, "runs per cell; summary reports mean and range");
    sweep_cmd->add_option("--out", out_override, "metrics CSV path (default from config)");

    auto* cmp = app.add_subcommand("compare-oracle", "check split vs monolithic equivalence");
    add_config(cmp);
    cmp->add_option("--lr-scale", lr_scale, "scale the oracle learning rate (negative control)");

    auto* privacy = app.add_subcommand("privacy-report", "dump inputs vs first-group feature maps");
    add_config(privacy);
    privacy->add_option("--samples", samples, "how many client-0 samples to dump");
    privacy->add_option("--out-dir", out_dir, "output directory");

    auto* preset_cmd = app.add_subcommand("preset", "print a named model preset as JSON");
    preset_cmd->add_option("--name", preset_name, "covid | mura | cholesterol");
    preset_cmd->add_option("--scale", preset_scale, "full | desk");

    auto* convert = app.add_subcommand("convert-pgm", "convert a binary PGM image to a .nt tensor");
    convert->add_option("--in", pgm_in, "input .pgm (P5)")->required();
    convert->add_option("--out", pgm_out, "output .nt path")->required();
    convert->add_option("--height", resize_h, "bilinear-resize to this height");
    convert->add_option("--width", resize_w, "bilinear-resize to this width");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;  // help exits clean; bad flags are config errors
    }

    try {
        if (run_local->parsed()) {
            ExperimentConfig cfg = config_from_json_file(config_path);
            cfg.mode = "split";
            print_outcome(run_experiment(cfg));
            std::cout << "metrics written to " << cfg.out << "\n";
            return 0;
        }
        if (oracle->parsed()) {
            ExperimentConfig cfg = config_from_json_file(config_path);
            cfg.mode = "oracle";
            print_outcome(run_experiment(cfg));
            std::cout << "metrics written to " << cfg.out << "\n";
            return 0;
        }
        if (server->parsed()) {
            ExperimentConfig cfg = config_from_json_file(config_path);
            cfg.mode = "split";
            return run_tcp_server(cfg, listen_addr);
        }
        if (client->parsed()) {
            ExperimentConfig cfg = config_from_json_file(config_path);
            cfg.mode = "split";
            return run_tcp_client(cfg, shard, connect_addr);
        }
        if (sweep_cmd->parsed()) {
            ExperimentConfig cfg = config_from_json_file(config_path);
            auto grid = grid_name == "reference" ? reference_grid() : equivalence_grid();
            std::string out_path = out_override.empty() ? cfg.out : out_override;
            SweepResult res = sweep(cfg, grid, repeats, out_path);
            std::size_t failed = 0;
            for (const auto& c : res.cells) failed += c.failed ? 1 : 0;
            std::cout << res.cells.size() << " cells, " << failed << " failed; metrics written to "
                      << out_path << "\n";
            return res.all_ok ? 0 : kExitRuntime;
        }
        if (cmp->parsed()) {
            ExperimentConfig cfg = config_from_json_file(config_path);
            cfg.mode = "split";
            OracleReport rep = compare_oracle(cfg, OracleTweak{lr_scale});
            std::cout << "epochs " << rep.epochs << ", params compared " << rep.params_compared
                      << "\nmax |loss diff|  " << fmt_double(rep.max_loss_diff)
                      << "\nmax |param diff| " << fmt_double(rep.max_param_diff) << "\n"
                      << (rep.pass ? "EQUIVALENT" : "MISMATCH") << "\n";
            return rep.pass ? 0 : kExitOracle;
        }
        if (privacy->parsed()) {
            ExperimentConfig cfg = config_from_json_file(config_path);
            cfg.mode = "split";
            PrivacyReport rep = privacy_report(cfg, samples, out_dir);
            std::cout << rep.samples << " samples x " << rep.channels << " channels written to "
                      << out_dir << "\n";
            return 0;
        }
        if (preset_cmd->parsed()) {
            Preset p = preset(preset_name, preset_scale);
            nlohmann::json j;
            j["name"] = p.name;
            j["scale"] = p.scale;
            j["model"] = nlohmann::json::parse(model_spec_to_json(p.model));
            j["train"] = {{"epochs", p.train.epochs},
                          {"batch_size", p.train.batch_size},
                          {"learning_rate", p.train.learning_rate},
                          {"seed", p.train.seed},
                          {"loss", is_classification(p.train.loss) ? "bce" : "mse"}};
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (convert->parsed()) {
            Tensor img = load_pgm(pgm_in);
            if ((resize_h == 0) != (resize_w == 0))
                throw ConfigError("--height and --width must be given together");
            if (resize_h > 0) img = bilinear_resize(img, resize_h, resize_w);
            write_nt(pgm_out, img);
            std::cout << "wrote " << pgm_out << " shape " << img.shape_str() << "\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const UnknownPreset& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const splitmesh::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}
