// owml: Othello-GPT interpretability pipeline.
//
// Each subcommand runs one pipeline stage against a key = value config.
// Precedence, lowest to highest: built-in defaults, --config file,
// --set KEY=VALUE flags, OWML_<KEY> environment variables.
//
// Exit codes: 0 success, 2 configuration error, 3 missing or unreadable
// input artifact, 4 numeric failure during training or analysis.

#include <CLI11.hpp>
#include <cstdio>
#include <string>
#include <vector>

#include "owml/pipeline.hpp"

namespace {

struct StageSpec {
    const char* name;
    const char* help;
    void (*run)(const owml::RunConfig&);
};

void run_train_gpt(const owml::RunConfig& cfg) {
    owml::pipeline::train_gpt(cfg, [](const owml::TrainMetricsRow& r) {
        std::printf("step %ld  lr %.6f  train %.4f  eval %.4f  legal %.4f\n",
                    r.step, r.lr, r.train_loss, r.eval_loss, r.legal_rate);
        std::fflush(stdout);
    });
}

void run_all_stages(const owml::RunConfig& cfg) {
    owml::pipeline::run_all(cfg, [](const owml::TrainMetricsRow& r) {
        std::printf("step %ld  lr %.6f  train %.4f  eval %.4f  legal %.4f\n",
                    r.step, r.lr, r.train_loss, r.eval_loss, r.legal_rate);
        std::fflush(stdout);
    });
}

constexpr StageSpec kStages[] = {
    {"gen-data", "generate the training and held-out game transcripts",
     owml::pipeline::gen_data},
    {"train-gpt", "train the transformer on the game transcripts", run_train_gpt},
    {"extract-acts", "extract residual-stream activations per layer",
     owml::pipeline::extract_acts},
    {"train-sae", "train sparse autoencoders on the activations",
     owml::pipeline::train_sae_stage},
    {"train-probe", "train linear board-state probes on the activations",
     owml::pipeline::train_probe_stage},
    {"score-color", "score SAE features against tile-color labels",
     owml::pipeline::score_color},
    {"score-stability", "score SAE features against tile-stability labels",
     owml::pipeline::score_stability},
    {"align-neurons", "count MLP neurons aligned with the color probe",
     owml::pipeline::align_neurons},
    {"report", "assemble grids, curves and tables from stored scores",
     owml::pipeline::report},
    {"run-all", "run every stage in order", run_all_stages},
};

struct StageArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir, layers;
    long seed = -1, threads = -1;
    bool print_config = false;
};

owml::RunConfig resolve_config(const StageArgs& args) {
    owml::RunConfig cfg;
    if (!args.config_path.empty())
        owml::apply_config_file(cfg, args.config_path);
    for (const std::string& kv : args.sets) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw owml::ConfigError("--set expects KEY=VALUE, got: " + kv);
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!args.out_dir.empty()) cfg.set("out_dir", args.out_dir);
    if (!args.layers.empty()) cfg.set("layers", args.layers);
    if (args.seed >= 0) cfg.set("seed", std::to_string(args.seed));
    if (args.threads >= 1) cfg.set("threads", std::to_string(args.threads));
    owml::apply_env(cfg);
    // parse every typed key now so bad values fail before any work starts
    for (const char* key : {"seed", "threads", "n_games", "eval_games",
                            "max_seq_len", "states_per_game", "acts_games",
                            "n_layers", "n_heads", "d_model", "gpt_steps",
                            "gpt_batch", "gpt_eval_every", "sae_d_latent",
                            "sae_steps", "sae_batch", "sae_seeds", "probe_steps",
                            "probe_batch", "color_top_k", "stability_seeds",
                            "align_baseline_samples"})
        cfg.i64(key);
    for (const char* key : {"gpt_lr", "sae_lambda", "sae_lr", "probe_lr",
                            "color_auroc_threshold", "stability_auroc_threshold",
                            "align_threshold"})
        cfg.dbl(key);
    cfg.flag("gpt_cosine_decay");
    cfg.layer_list();
    owml::pipeline::structure_from(cfg.get("probe_structure"));
    owml::pipeline::tally_from(cfg.get("color_tally"));
    owml::pipeline::auroc_method_from(cfg.get("color_auroc_method"));
    owml::pipeline::auroc_method_from(cfg.get("stability_auroc_method"));
    owml::pipeline::adjacency_from(cfg.get("stability_adjacency"));
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"owml: train a small Othello GPT and analyze what it learned"};
    app.require_subcommand(1);

    StageArgs args;
    const StageSpec* chosen = nullptr;
    for (const StageSpec& stage : kStages) {
        CLI::App* sub = app.add_subcommand(stage.name, stage.help);
        sub->add_option("-c,--config", args.config_path,
                        "key = value config file");
        sub->add_option("-s,--set", args.sets,
                        "override one config key (KEY=VALUE, repeatable)");
        sub->add_option("-o,--out-dir", args.out_dir, "artifact directory");
        sub->add_option("--seed", args.seed, "master seed");
        sub->add_option("--threads", args.threads,
                        "worker cap for parallel stage internals");
        sub->add_option("--layers", args.layers, "layers: 'all' or CSV");
        sub->add_flag("--print-config", args.print_config,
                      "print the resolved config before running");
        sub->callback([&chosen, &stage]() { chosen = &stage; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and friends exit 0; every usage error is a config error
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        owml::RunConfig cfg = resolve_config(args);
        if (args.print_config) std::fputs(cfg.resolved().c_str(), stdout);
        chosen->run(cfg);
    } catch (const owml::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const owml::pipeline::MissingInput& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const owml::FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const owml::TruncatedFile& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const owml::IOFailure& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const owml::NonFiniteValue& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 4;
    }
    return 0;
}
