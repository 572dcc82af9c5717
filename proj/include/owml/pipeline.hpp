#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "owml/analysis.hpp"
#include "owml/config.hpp"
#include "owml/dataset.hpp"
#include "owml/gpt.hpp"
#include "owml/probe.hpp"
#include "owml/sae.hpp"

namespace owml::pipeline {

namespace fs = std::filesystem;

struct MissingInput : std::runtime_error {
    explicit MissingInput(const std::string& path)
        : std::runtime_error("missing input: " + path) {}
};

// ---------------------------------------------------------------------------
// Artifact layout under out_dir
// ---------------------------------------------------------------------------

inline fs::path out_dir(const RunConfig& cfg) { return cfg.get("out_dir"); }
inline fs::path games_path(const RunConfig& cfg) {
    return out_dir(cfg) / "games.othl";
}
inline fs::path eval_games_path(const RunConfig& cfg) {
    return out_dir(cfg) / "eval_games.othl";
}
inline fs::path gpt_path(const RunConfig& cfg) {
    return out_dir(cfg) / "gpt.ockp";
}
inline fs::path train_log_path(const RunConfig& cfg) {
    return out_dir(cfg) / "gpt_train_log.csv";
}
inline fs::path acts_path(const RunConfig& cfg, int layer) {
    return out_dir(cfg) / ("acts_layer" + std::to_string(layer) + ".oact");
}
inline fs::path sae_path(const RunConfig& cfg, int layer, int seed_idx) {
    return out_dir(cfg) / ("sae_layer" + std::to_string(layer) + "_seed" +
                           std::to_string(seed_idx) + ".ockp");
}
inline const char* structure_name(ProbeStructure s) {
    return s == ProbeStructure::MulticlassLocation ? "multiclass" : "pertile";
}
inline fs::path probe_path(const RunConfig& cfg, int layer, int mode,
                           ProbeStructure structure) {
    return out_dir(cfg) / ("probe_layer" + std::to_string(layer) + "_" +
                           mode_name(mode) + "_" + structure_name(structure) +
                           ".ockp");
}
inline fs::path probe_acc_path(const RunConfig& cfg) {
    return out_dir(cfg) / "probe_accuracy.csv";
}
inline fs::path color_scores_path(const RunConfig& cfg, int layer, int seed_idx) {
    return out_dir(cfg) / ("scores_color_layer" + std::to_string(layer) +
                           "_seed" + std::to_string(seed_idx) + ".csv");
}
inline fs::path stability_scores_path(const RunConfig& cfg, int layer,
                                      int seed_idx) {
    return out_dir(cfg) / ("scores_stability_layer" + std::to_string(layer) +
                           "_seed" + std::to_string(seed_idx) + ".csv");
}
inline fs::path align_grid_base(const RunConfig& cfg, int layer,
                                MLPSublayer sub) {
    return out_dir(cfg) /
           ("align_layer" + std::to_string(layer) + "_" +
            (sub == MLPSublayer::Encoding ? "encoding" : "projection"));
}
inline fs::path report_dir(const RunConfig& cfg) {
    return out_dir(cfg) / "report";
}
inline fs::path manifest_path(const RunConfig& cfg, const std::string& stage) {
    return out_dir(cfg) / "manifests" / (stage + ".json");
}

// ---------------------------------------------------------------------------
// Manifests: inputs/outputs with content hashes, config hash, wall time
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingInput(path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (is.read(buf, sizeof buf) || is.gcount() > 0)
        h = fnv1a(buf, std::size_t(is.gcount()), h);
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
    return buf;
}

inline std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out;
}

// Deterministic flat JSON (sorted keys); wall_time_s is the only
// run-dependent field.
inline void write_manifest(const RunConfig& cfg, const std::string& stage,
                           const std::vector<fs::path>& inputs,
                           const std::vector<fs::path>& outputs,
                           double wall_time_s) {
    fs::create_directories(out_dir(cfg) / "manifests");
    std::ofstream os(manifest_path(cfg, stage));
    if (!os) throw IOFailure("cannot write manifest for " + stage);
    os << "{\n  \"stage\": \"" << json_escape(stage) << "\",\n";
    const std::string resolved = cfg.resolved();
    os << "  \"config_hash\": \""
       << hex64(fnv1a(resolved.data(), resolved.size())) << "\",\n";
    os << "  \"config\": {\n";
    bool first = true;
    for (const auto& [key, dd] : RunConfig::schema()) {
        os << (first ? "" : ",\n") << "    \"" << key << "\": \""
           << json_escape(cfg.get(key)) << "\"";
        first = false;
    }
    os << "\n  },\n";
    auto emit_files = [&](const char* name, const std::vector<fs::path>& files) {
        os << "  \"" << name << "\": {\n";
        bool f = true;
        for (const auto& p : files) {
            os << (f ? "" : ",\n") << "    \"" << json_escape(p.string())
               << "\": \"" << hex64(fnv1a_file(p)) << "\"";
            f = false;
        }
        os << "\n  },\n";
    };
    emit_files("inputs", inputs);
    emit_files("outputs", outputs);
    os << "  \"wall_time_s\": " << wall_time_s << "\n}\n";
}

// Removes declared outputs unless commit() was reached, so failed stages do
// not leave partial artifacts behind.
class StageGuard {
  public:
    void declare(const fs::path& p) { outputs_.push_back(p); }
    const std::vector<fs::path>& outputs() const { return outputs_; }
    void commit() { committed_ = true; }
    ~StageGuard() {
        if (committed_) return;
        for (const auto& p : outputs_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }

  private:
    std::vector<fs::path> outputs_;
    bool committed_ = false;
};

inline void require_input(const fs::path& p) {
    if (!fs::exists(p)) throw MissingInput(p.string());
}

class StageTimer {
  public:
    double seconds() const {
        return std::chrono::duration<double>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

  private:
    std::chrono::steady_clock::time_point start_ =
        std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------------------
// Labels shared by probes and feature scoring
// ---------------------------------------------------------------------------

// Per activation row: tile masks for the three §3.2 modes (relative to the
// player to move after the row's move), the stability mask, and the Eq.-2
// location label (the move played at that timestep).
struct RowLabels {
    std::vector<std::uint64_t> empty, own, enemy, stable;
    std::vector<int> location;
};

inline RowLabels make_row_labels(
    const std::vector<std::vector<Tile>>& games,
    const std::vector<std::pair<std::uint32_t, std::uint16_t>>& alignment,
    EdgeAdjacency adjacency) {
    RowLabels out;
    std::int64_t cached_game = -1;
    std::vector<std::pair<Board, Player>> traj;
    for (const auto& [g, t] : alignment) {
        if (std::int64_t(g) != cached_game) {
            GameRecord rec;
            rec.moves = games.at(g);
            traj = board_trajectory(rec);
            cached_game = g;
        }
        Board b = traj.at(t).first;
        // perspective: the player who actually moves next (silent passes)
        Player persp = b.to_move;
        if (legal_moves(b) == 0) {
            Board flipped = b;
            flipped.to_move = other(b.to_move);
            if (legal_moves(flipped) != 0) persp = flipped.to_move;
        }
        out.empty.push_back(tile_labels(b, persp, TileMode::Empty));
        out.own.push_back(tile_labels(b, persp, TileMode::Own));
        out.enemy.push_back(tile_labels(b, persp, TileMode::Enemy));
        out.stable.push_back(stability_map(b, adjacency).stable_mask);
        out.location.push_back(int(games.at(g).at(t)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Feature scoring: confusion + F1 + AUROC for every (feature, tile[, mode])
// ---------------------------------------------------------------------------

namespace scoredetail {

// tie-shared 1-based average ranks of a column
inline void average_ranks(const std::vector<float>& values,
                          std::vector<double>& rank,
                          std::vector<int>& order) {
    const std::size_t n = values.size();
    rank.resize(n);
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return values[a] < values[b]; });
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = 0.5 * double(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
}

}  // namespace scoredetail

// Scores one feature column against per-row 64-bit label masks, one score per
// tile. Rank AUROC shares a single ranking of the column across all tiles.
inline void score_feature_against_masks(
    const std::vector<float>& column, const std::vector<std::uint64_t>& masks,
    AurocMethod method, int layer, int feature, int mode,
    std::vector<FeatureScore>& sink) {
    const std::size_t n = column.size();
    if (n != masks.size()) throw LengthMismatch("score: rows");

    std::array<long, 64> n_pos{}, tp{};
    std::array<double, 64> pos_rank_sum{};
    long n_active = 0;
    std::vector<double> rank;
    std::vector<int> order;
    if (method == AurocMethod::Rank)
        scoredetail::average_ranks(column, rank, order);
    for (std::size_t i = 0; i < n; ++i) {
        const bool active = column[i] > 0.0f;
        n_active += active;
        std::uint64_t m = masks[i];
        while (m) {
            const int t = std::countr_zero(m);
            m &= m - 1;
            ++n_pos[t];
            tp[t] += active;
            if (method == AurocMethod::Rank) pos_rank_sum[t] += rank[i];
        }
    }
    for (int t = 0; t < 64; ++t) {
        FeatureScore s;
        s.layer = layer;
        s.feature = feature;
        s.tile = t;
        s.mode = mode;
        const long np = n_pos[t], nn = long(n) - np;
        s.tp = tp[t];
        s.fp = n_active - tp[t];
        s.fn = np - tp[t];
        s.tn = long(n) - s.tp - s.fp - s.fn;
        s.f1 = f1(s.tp, s.fp, s.fn);
        if (np == 0 || nn == 0) {
            s.auroc = 0.5;  // single-class tile: uninformative by convention
        } else if (method == AurocMethod::Rank) {
            const double u = pos_rank_sum[t] - 0.5 * double(np) * double(np + 1);
            s.auroc = u / (double(np) * double(nn));
        } else {
            const double tpr = double(s.tp) / double(np);
            const double fpr = double(s.fp) / double(nn);
            s.auroc = (1.0 + tpr - fpr) / 2.0;
        }
        sink.push_back(s);
    }
}

inline AurocMethod auroc_method_from(const std::string& name) {
    if (name == "rank") return AurocMethod::Rank;
    if (name == "trapezoid") return AurocMethod::BinaryTrapezoid;
    throw ConfigError("unknown auroc method: " + name);
}

inline EdgeAdjacency adjacency_from(const std::string& name) {
    if (name == "four") return EdgeAdjacency::Four;
    if (name == "eight") return EdgeAdjacency::Eight;
    throw ConfigError("unknown stability adjacency: " + name);
}

inline ProbeStructure structure_from(const std::string& name) {
    if (name == "pertile") return ProbeStructure::PerTileIndependent;
    if (name == "multiclass") return ProbeStructure::MulticlassLocation;
    throw ConfigError("unknown probe structure: " + name);
}

inline TallyMode tally_from(const std::string& name) {
    if (name == "best") return TallyMode::BestTile;
    if (name == "pertile") return TallyMode::PerTile;
    throw ConfigError("unknown color tally: " + name);
}

// Work-stealing loop over [0, n_items); the first exception wins and is
// rethrown on the calling thread after all workers drain.
inline void parallel_for(int n_workers, int n_items,
                         const std::function<void(int)>& fn) {
    n_workers = std::max(1, std::min(n_workers, n_items));
    if (n_workers == 1) {
        for (int i = 0; i < n_items; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w)
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < n_items;
                 i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

inline std::uint64_t sae_seed_for(const RunConfig& cfg, int layer,
                                  int seed_idx) {
    return std::uint64_t(cfg.i64("seed")) * 1000003ULL +
           std::uint64_t(layer) * 1009ULL + std::uint64_t(seed_idx);
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

inline void gen_data(const RunConfig& cfg) {
    StageTimer timer;
    fs::create_directories(out_dir(cfg));
    StageGuard guard;
    guard.declare(games_path(cfg));
    guard.declare(eval_games_path(cfg));

    DatasetManifest train{.n_games = std::uint32_t(cfg.i64("n_games")),
                          .seed = std::uint64_t(cfg.i64("seed")),
                          .max_seq_len = int(cfg.i64("max_seq_len")),
                          .states_per_game = int(cfg.i64("states_per_game"))};
    // held-out games live in a disjoint seed block
    DatasetManifest eval{.n_games = std::uint32_t(cfg.i64("eval_games")),
                         .seed = std::uint64_t(cfg.i64("seed")) + 1000000,
                         .max_seq_len = train.max_seq_len,
                         .states_per_game = train.states_per_game};
    generate_dataset(train, games_path(cfg).string());
    generate_dataset(eval, eval_games_path(cfg).string());
    guard.commit();
    write_manifest(cfg, "gen-data", {}, guard.outputs(), timer.seconds());
}

inline GPTConfig gpt_config_from(const RunConfig& cfg) {
    GPTConfig g;
    g.n_layers = int(cfg.i64("n_layers"));
    g.n_heads = int(cfg.i64("n_heads"));
    g.d_model = int(cfg.i64("d_model"));
    g.max_seq_len = int(cfg.i64("max_seq_len"));
    g.validate();
    return g;
}

inline void train_gpt(
    const RunConfig& cfg,
    const std::function<void(const TrainMetricsRow&)>& on_metrics = {}) {
    StageTimer timer;
    require_input(games_path(cfg));
    require_input(eval_games_path(cfg));
    auto train_games = read_transcripts(games_path(cfg).string());
    auto eval_games = read_transcripts(eval_games_path(cfg).string());

    auto model = init_model(gpt_config_from(cfg),
                            std::uint64_t(cfg.i64("seed")));
    TrainHyper hyper;
    hyper.lr = cfg.dbl("gpt_lr");
    hyper.batch_size = int(cfg.i64("gpt_batch"));
    hyper.steps = int(cfg.i64("gpt_steps"));
    hyper.seed = std::uint64_t(cfg.i64("seed")) + 7;
    hyper.eval_every = int(cfg.i64("gpt_eval_every"));
    hyper.eval_games = int(eval_games.size());
    hyper.cosine_decay = cfg.flag("gpt_cosine_decay");

    StageGuard guard;
    guard.declare(gpt_path(cfg));
    guard.declare(train_log_path(cfg));
    std::ofstream log(train_log_path(cfg));
    if (!log) throw IOFailure("cannot write train log");
    log << "step,lr,train_loss,eval_loss,legal_rate\n";
    train(model, train_games, eval_games, hyper, [&](const TrainMetricsRow& r) {
        log << r.step << ',' << csvdetail::fmt(r.lr) << ','
            << csvdetail::fmt(r.train_loss) << ',' << csvdetail::fmt(r.eval_loss)
            << ',' << csvdetail::fmt(r.legal_rate) << '\n';
        log.flush();
        if (on_metrics) on_metrics(r);
    });
    save_gpt(gpt_path(cfg).string(), model);
    guard.commit();
    write_manifest(cfg, "train-gpt", {games_path(cfg), eval_games_path(cfg)},
                   guard.outputs(), timer.seconds());
}

// One forward pass per game captures every requested layer at once.
inline void extract_acts(const RunConfig& cfg) {
    StageTimer timer;
    require_input(gpt_path(cfg));
    require_input(games_path(cfg));
    auto model = load_gpt(gpt_path(cfg).string());
    auto games = read_transcripts(games_path(cfg).string());
    const std::size_t n_games =
        std::min<std::size_t>(games.size(), std::size_t(cfg.i64("acts_games")));
    const int states = int(cfg.i64("states_per_game"));
    const auto layers = cfg.layer_list();

    const int d = model.cfg.d_model;
    std::vector<ActivationSet> sets(layers.size());
    std::vector<std::vector<float>> rows(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) sets[i].layer = layers[i];

    GptForwardCache cache;
    for (std::size_t g = 0; g < n_games; ++g) {
        if (games[g].empty()) continue;
        std::vector<int> inputs(games[g].begin(), games[g].end());
        gpt_forward(model, inputs, 1, int(inputs.size()), cache);
        const int keep = std::min(int(inputs.size()), states);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const Tensor2D& stream = cache.layers[layers[i] - 1].x_out;
            rows[i].insert(rows[i].end(), stream.row(0), stream.row(0) + keep * d);
            for (int t = 0; t < keep; ++t)
                sets[i].alignment.push_back({std::uint32_t(g), std::uint16_t(t)});
        }
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        sets[i].vectors = Tensor2D(int(sets[i].alignment.size()), d);
        sets[i].vectors.data = std::move(rows[i]);
    }
    StageGuard guard;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        guard.declare(acts_path(cfg, layers[i]));
        write_activations(sets[i], acts_path(cfg, layers[i]).string());
    }
    guard.commit();
    write_manifest(cfg, "extract-acts", {gpt_path(cfg), games_path(cfg)},
                   guard.outputs(), timer.seconds());
}

inline void train_sae_stage(const RunConfig& cfg) {
    StageTimer timer;
    const auto layers = cfg.layer_list();
    const int n_seeds = int(cfg.i64("sae_seeds"));
    SAETrainHyper hyper;
    hyper.lr = cfg.dbl("sae_lr");
    hyper.batch_size = int(cfg.i64("sae_batch"));
    hyper.steps = int(cfg.i64("sae_steps"));
    int d_latent = int(cfg.i64("sae_d_latent"));
    if (d_latent == 0) d_latent = 2 * int(cfg.i64("d_model"));

    std::vector<fs::path> inputs;
    StageGuard guard;
    for (int layer : layers) {
        require_input(acts_path(cfg, layer));
        inputs.push_back(acts_path(cfg, layer));
        auto acts = read_activations(acts_path(cfg, layer).string());
        for (int s = 0; s < n_seeds; ++s) guard.declare(sae_path(cfg, layer, s));
        parallel_for(int(cfg.i64("threads")), n_seeds, [&](int s) {
            auto model = train_sae(acts, d_latent, float(cfg.dbl("sae_lambda")),
                                   hyper, sae_seed_for(cfg, layer, s));
            save_sae(sae_path(cfg, layer, s).string(), model);
        });
    }
    guard.commit();
    write_manifest(cfg, "train-sae", inputs, guard.outputs(), timer.seconds());
}

inline void train_probe_stage(const RunConfig& cfg) {
    StageTimer timer;
    require_input(games_path(cfg));
    auto games = read_transcripts(games_path(cfg).string());
    const auto layers = cfg.layer_list();
    ProbeTrainHyper hyper;
    hyper.lr = cfg.dbl("probe_lr");
    hyper.batch_size = int(cfg.i64("probe_batch"));
    hyper.steps = int(cfg.i64("probe_steps"));
    const auto adjacency = adjacency_from(cfg.get("stability_adjacency"));

    std::vector<fs::path> inputs{games_path(cfg)};
    StageGuard guard;
    guard.declare(probe_acc_path(cfg));
    fs::create_directories(out_dir(cfg));
    std::ofstream acc(probe_acc_path(cfg));
    if (!acc) throw IOFailure("cannot write probe accuracy table");
    acc << "layer,mode,structure,train_accuracy,val_accuracy\n";

    for (int layer : layers) {
        require_input(acts_path(cfg, layer));
        inputs.push_back(acts_path(cfg, layer));
        auto acts = read_activations(acts_path(cfg, layer).string());
        const RowLabels rows = make_row_labels(games, acts.alignment, adjacency);
        const ProbeStructure structures[] = {ProbeStructure::PerTileIndependent,
                                             ProbeStructure::MulticlassLocation};
        // 6 fits per layer: results land in fixed slots so the accuracy table
        // is written in the same order regardless of worker count
        std::vector<ProbeTrainResult> results(6);
        for (int j = 0; j < 6; ++j)
            guard.declare(probe_path(cfg, layer, j % 3, structures[j / 3]));
        parallel_for(int(cfg.i64("threads")), 6, [&](int j) {
            const int mode = j % 3;
            ProbeLabels labels;
            labels.location = rows.location;
            labels.tiles = mode == 0 ? rows.empty
                           : mode == 1 ? rows.own
                                       : rows.enemy;
            results[j] = train_probe(acts, labels, TileMode(mode),
                                     structures[j / 3], hyper,
                                     std::uint64_t(cfg.i64("seed")) + 31);
        });
        for (int j = 0; j < 6; ++j) {
            const int mode = j % 3;
            const ProbeStructure structure = structures[j / 3];
            save_probe(probe_path(cfg, layer, mode, structure).string(),
                       results[j].model);
            acc << layer << ',' << mode_name(mode) << ','
                << structure_name(structure) << ','
                << csvdetail::fmt(results[j].train_accuracy) << ','
                << csvdetail::fmt(results[j].val_accuracy) << '\n';
        }
    }
    guard.commit();
    write_manifest(cfg, "train-probe", inputs, guard.outputs(), timer.seconds());
}

// Color scoring: every (feature, tile, mode) triple per layer and SAE seed.
inline void score_color(const RunConfig& cfg) {
    StageTimer timer;
    require_input(games_path(cfg));
    auto games = read_transcripts(games_path(cfg).string());
    const auto layers = cfg.layer_list();
    const int n_seeds = int(cfg.i64("sae_seeds"));
    const auto method = auroc_method_from(cfg.get("color_auroc_method"));
    const auto adjacency = adjacency_from(cfg.get("stability_adjacency"));

    std::vector<fs::path> inputs{games_path(cfg)};
    StageGuard guard;
    for (int layer : layers) {
        require_input(acts_path(cfg, layer));
        inputs.push_back(acts_path(cfg, layer));
        auto acts = read_activations(acts_path(cfg, layer).string());
        const RowLabels rows = make_row_labels(games, acts.alignment, adjacency);
        for (int s = 0; s < n_seeds; ++s) {
            require_input(sae_path(cfg, layer, s));
            inputs.push_back(sae_path(cfg, layer, s));
            auto sae = load_sae(sae_path(cfg, layer, s).string());
            Tensor2D H = feature_activations(sae, acts);
            std::vector<FeatureScore> scores;
            scores.reserve(std::size_t(H.cols) * 64 * 3);
            std::vector<float> column(H.rows);
            for (int f = 0; f < H.cols; ++f) {
                for (int i = 0; i < H.rows; ++i) column[i] = H.at(i, f);
                score_feature_against_masks(column, rows.empty, method, layer,
                                            f, 0, scores);
                score_feature_against_masks(column, rows.own, method, layer, f,
                                            1, scores);
                score_feature_against_masks(column, rows.enemy, method, layer,
                                            f, 2, scores);
            }
            guard.declare(color_scores_path(cfg, layer, s));
            write_scores_csv(color_scores_path(cfg, layer, s).string(), scores);
        }
    }
    guard.commit();
    write_manifest(cfg, "score-color", inputs, guard.outputs(), timer.seconds());
}

// Stability scoring (§3.4): per (feature, tile) with the stability labels.
inline void score_stability(const RunConfig& cfg) {
    StageTimer timer;
    require_input(games_path(cfg));
    auto games = read_transcripts(games_path(cfg).string());
    const auto layers = cfg.layer_list();
    const int n_seeds = int(cfg.i64("stability_seeds"));
    const auto method = auroc_method_from(cfg.get("stability_auroc_method"));
    const auto adjacency = adjacency_from(cfg.get("stability_adjacency"));

    std::vector<fs::path> inputs{games_path(cfg)};
    StageGuard guard;
    for (int layer : layers) {
        require_input(acts_path(cfg, layer));
        inputs.push_back(acts_path(cfg, layer));
        auto acts = read_activations(acts_path(cfg, layer).string());
        const RowLabels rows = make_row_labels(games, acts.alignment, adjacency);
        for (int s = 0; s < n_seeds; ++s) {
            require_input(sae_path(cfg, layer, s));
            inputs.push_back(sae_path(cfg, layer, s));
            auto sae = load_sae(sae_path(cfg, layer, s).string());
            Tensor2D H = feature_activations(sae, acts);
            std::vector<FeatureScore> scores;
            scores.reserve(std::size_t(H.cols) * 64);
            std::vector<float> column(H.rows);
            for (int f = 0; f < H.cols; ++f) {
                for (int i = 0; i < H.rows; ++i) column[i] = H.at(i, f);
                score_feature_against_masks(column, rows.stable, method, layer,
                                            f, -1, scores);
            }
            guard.declare(stability_scores_path(cfg, layer, s));
            write_scores_csv(stability_scores_path(cfg, layer, s).string(),
                             scores);
        }
    }
    guard.commit();
    write_manifest(cfg, "score-stability", inputs, guard.outputs(),
                   timer.seconds());
}

// §3.3.1: cosine alignment of MLP neurons with the Own-mode ("my color")
// probe, for both MLP sublayers, plus the Monte Carlo chance baseline.
inline void align_neurons(const RunConfig& cfg) {
    StageTimer timer;
    require_input(gpt_path(cfg));
    auto model = load_gpt(gpt_path(cfg).string());
    const auto layers = cfg.layer_list();
    const auto structure = structure_from(cfg.get("probe_structure"));
    const double threshold = cfg.dbl("align_threshold");

    std::vector<fs::path> inputs{gpt_path(cfg)};
    StageGuard guard;
    for (int layer : layers) {
        const fs::path ppath = probe_path(cfg, layer, 1, structure);
        require_input(ppath);
        inputs.push_back(ppath);
        auto probe = load_probe(ppath.string());
        for (MLPSublayer sub : {MLPSublayer::Encoding, MLPSublayer::Projection}) {
            auto rep = neuron_probe_alignment(model, layer, probe, sub,
                                              threshold);
            TileFrequencyGrid grid;
            grid.layer = layer;
            grid.metric = "alignment";
            grid.threshold = threshold;
            std::copy(rep.counts.begin(), rep.counts.end(),
                      grid.counts.begin());
            const fs::path base = align_grid_base(cfg, layer, sub);
            guard.declare(base.string() + ".csv");
            guard.declare(base.string() + ".svg");
            emit_heatmap(grid, base.string());
        }
    }
    const double baseline = alignment_random_baseline(
        int(cfg.i64("d_model")), threshold,
        int(cfg.i64("align_baseline_samples")),
        std::uint64_t(cfg.i64("seed")) + 101);
    const fs::path bpath = out_dir(cfg) / "align_baseline.csv";
    guard.declare(bpath);
    {
        std::ofstream os(bpath);
        os << "d_model,threshold,random_pair_fraction\n";
        os << cfg.i64("d_model") << ',' << csvdetail::fmt(threshold) << ','
           << csvdetail::fmt(baseline) << '\n';
    }
    guard.commit();
    write_manifest(cfg, "align-neurons", inputs, guard.outputs(),
                   timer.seconds());
}

// Assembles accuracy curves, color grids, stability grids, and the
// appendix-style stability feature tables from the stored score tables.
inline void report(const RunConfig& cfg) {
    StageTimer timer;
    const auto layers = cfg.layer_list();
    const int n_sae_seeds = int(cfg.i64("sae_seeds"));
    const int n_stab_seeds = int(cfg.i64("stability_seeds"));
    fs::create_directories(report_dir(cfg));

    std::vector<fs::path> inputs;
    StageGuard guard;

    // Figure-2 analogue: copy the accuracy table into the report
    require_input(probe_acc_path(cfg));
    inputs.push_back(probe_acc_path(cfg));
    {
        std::ifstream is(probe_acc_path(cfg));
        std::ofstream os(report_dir(cfg) / "probe_accuracy.csv");
        guard.declare(report_dir(cfg) / "probe_accuracy.csv");
        os << is.rdbuf();
    }

    // Figure-3 analogue: per-layer color grids aggregated across SAE seeds
    for (int layer : layers) {
        std::vector<std::vector<int>> per_seed_features;
        std::vector<std::vector<FeatureScore>> per_seed_scores;
        for (int s = 0; s < n_sae_seeds; ++s) {
            require_input(color_scores_path(cfg, layer, s));
            inputs.push_back(color_scores_path(cfg, layer, s));
            auto scores =
                read_scores_csv(color_scores_path(cfg, layer, s).string());
            per_seed_features.push_back(top_color_features(
                scores, cfg.dbl("color_auroc_threshold"),
                int(cfg.i64("color_top_k"))));
            per_seed_scores.push_back(std::move(scores));
        }
        auto grid = aggregate_seed_frequency(
            per_seed_features, per_seed_scores,
            cfg.dbl("color_auroc_threshold"),
            tally_from(cfg.get("color_tally")));
        grid.layer = layer;
        const fs::path base =
            report_dir(cfg) / ("color_grid_layer" + std::to_string(layer));
        guard.declare(base.string() + ".csv");
        guard.declare(base.string() + ".svg");
        emit_heatmap(grid, base.string());
    }

    // Figure-5 analogue + appendix tables for stability
    std::ofstream sums(report_dir(cfg) / "stability_layer_sums.csv");
    guard.declare(report_dir(cfg) / "stability_layer_sums.csv");
    sums << "layer,seed,qualifying_pairs\n";
    std::vector<std::vector<std::vector<FeatureScore>>> per_seed_layer_scores(
        n_stab_seeds);
    for (int layer : layers) {
        TileFrequencyGrid combined;
        combined.layer = layer;
        combined.metric = "stability";
        combined.threshold = cfg.dbl("stability_auroc_threshold");
        combined.seeds = n_stab_seeds;
        for (int s = 0; s < n_stab_seeds; ++s) {
            require_input(stability_scores_path(cfg, layer, s));
            inputs.push_back(stability_scores_path(cfg, layer, s));
            auto scores =
                read_scores_csv(stability_scores_path(cfg, layer, s).string());
            auto grid = stability_tile_frequency(
                scores, cfg.dbl("stability_auroc_threshold"));
            for (int t = 0; t < 64; ++t) combined.counts[t] += grid.counts[t];
            sums << layer << ',' << s << ',' << grid.total() << '\n';
            per_seed_layer_scores[s].push_back(std::move(scores));
        }
        const fs::path base =
            report_dir(cfg) / ("stability_grid_layer" + std::to_string(layer));
        guard.declare(base.string() + ".csv");
        guard.declare(base.string() + ".svg");
        emit_heatmap(combined, base.string());
    }
    sums.close();
    for (int s = 0; s < n_stab_seeds; ++s) {
        auto table = stability_feature_frequency(
            per_seed_layer_scores[s], cfg.dbl("stability_auroc_threshold"));
        const fs::path tpath =
            report_dir(cfg) /
            ("stability_features_seed" + std::to_string(s) + ".csv");
        guard.declare(tpath);
        write_feature_table_csv(tpath.string(), table, int(layers.size()));
    }
    guard.commit();
    write_manifest(cfg, "report", inputs, guard.outputs(), timer.seconds());
}

inline void run_all(
    const RunConfig& cfg,
    const std::function<void(const TrainMetricsRow&)>& on_metrics = {}) {
    gen_data(cfg);
    train_gpt(cfg, on_metrics);
    extract_acts(cfg);
    train_sae_stage(cfg);
    train_probe_stage(cfg);
    score_color(cfg);
    score_stability(cfg);
    align_neurons(cfg);
    report(cfg);
}

}  // namespace owml::pipeline
