#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "owml/gpt.hpp"
#include "owml/io.hpp"
#include "owml/othello.hpp"
#include "owml/rng.hpp"
#include "owml/tensor.hpp"

namespace owml {

constexpr int kProbeTiles = 64;

struct InvalidLabel : std::runtime_error {
    explicit InvalidLabel(const std::string& what) : std::runtime_error(what) {}
};

struct ZeroVector : std::runtime_error {
    explicit ZeroVector(const std::string& what) : std::runtime_error(what) {}
};

// MulticlassLocation implements Eq. 2 verbatim: one softmax over the 64 board
// locations, labels are single location indices. PerTileIndependent reads each
// location as its own binary classifier (64 logistic heads sharing the input);
// it is the default for the layer-wise accuracy curves because the tile-mode
// labels are per-tile properties.
enum class ProbeStructure : std::uint8_t { MulticlassLocation = 0,
                                           PerTileIndependent = 1 };

template <typename T>
struct ProbeModelT {
    Tensor<T> W;  // d × 64
    TileMode mode = TileMode::Own;
    int layer = 0;
    ProbeStructure structure = ProbeStructure::PerTileIndependent;

    int d() const { return W.rows; }
};

using ProbeModel = ProbeModelT<float>;

// Per-row labels for both structures: `location` is the Eq.-2 class index,
// `tiles` is the 64-bit per-tile mask (bit t set = positive label at tile t).
struct ProbeLabels {
    std::vector<int> location;
    std::vector<std::uint64_t> tiles;
};

template <typename T = float>
inline ProbeModelT<T> init_probe(int d, TileMode mode, ProbeStructure structure,
                                 int layer, std::uint64_t seed) {
    if (d < 1) throw std::invalid_argument("probe: d must be >= 1");
    ProbeModelT<T> p;
    p.W = Tensor<T>(d, kProbeTiles);
    p.mode = mode;
    p.layer = layer;
    p.structure = structure;
    Rng rng(seed);
    for (auto& v : p.W.data) v = T(rng.normal() * 0.02);
    return p;
}

// ŷ = softmax(Wᵀh) over 64 locations, or 64 independent sigmoids.
template <typename T>
inline std::vector<double> probe_forward(const ProbeModelT<T>& p,
                                         const std::vector<T>& h) {
    if (int(h.size()) != p.d()) throw ShapeMismatch("probe_forward: input width");
    std::vector<double> logits(kProbeTiles, 0.0);
    for (int j = 0; j < kProbeTiles; ++j) {
        double acc = 0.0;
        for (int i = 0; i < p.d(); ++i) acc += double(h[i]) * double(p.W.at(i, j));
        logits[j] = acc;
    }
    if (p.structure == ProbeStructure::MulticlassLocation) {
        const double mx = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (double& v : logits) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (double& v : logits) v /= sum;
    } else {
        for (double& v : logits) v = 1.0 / (1.0 + std::exp(-v));
    }
    return logits;
}

// Single-sample Eq.-2 cross-entropy (or mean binary cross-entropy per tile).
template <typename T>
inline double probe_loss(const ProbeModelT<T>& p, const std::vector<T>& h,
                         int location, std::uint64_t tiles) {
    auto y = probe_forward(p, h);
    if (p.structure == ProbeStructure::MulticlassLocation) {
        if (location < 0 || location >= kProbeTiles)
            throw InvalidLabel("probe_loss: location out of range");
        return -std::log(std::max(y[location], 1e-300));
    }
    double loss = 0.0;
    for (int t = 0; t < kProbeTiles; ++t) {
        const double q = std::clamp(y[t], 1e-300, 1.0 - 1e-15);
        loss += ((tiles >> t) & 1) ? -std::log(q) : -std::log(1.0 - q);
    }
    return loss / kProbeTiles;
}

// Mean loss over the rows of X; gradients accumulate into dW when given.
template <typename T>
inline double probe_batch_loss(const ProbeModelT<T>& p, const Tensor<T>& X,
                               const ProbeLabels& labels,
                               std::span<const int> rows,
                               Tensor<T>* dW = nullptr) {
    if (X.cols != p.d()) throw ShapeMismatch("probe_batch_loss: input width");
    const int B = int(rows.size());
    if (B < 1) throw std::invalid_argument("probe_batch_loss: empty batch");
    Tensor<T> Xb(B, X.cols);
    for (int i = 0; i < B; ++i)
        std::copy(X.row(rows[i]), X.row(rows[i]) + X.cols, Xb.row(i));
    Tensor<T> logits(B, kProbeTiles);
    matmul(Xb, p.W, logits);

    Tensor<T> dlogits(B, kProbeTiles);
    double loss = 0.0;
    if (p.structure == ProbeStructure::MulticlassLocation) {
        std::vector<int> targets(B);
        for (int i = 0; i < B; ++i) {
            const int loc = labels.location[rows[i]];
            if (loc < 0 || loc >= kProbeTiles)
                throw InvalidLabel("probe: location out of range");
            targets[i] = loc;
        }
        std::vector<std::uint8_t> mask(B, 1);
        loss = cross_entropy<T>(logits, targets, mask, dW ? &dlogits : nullptr);
    } else {
        for (int i = 0; i < B; ++i) {
            const std::uint64_t tiles = labels.tiles[rows[i]];
            for (int t = 0; t < kProbeTiles; ++t) {
                const double z = double(logits.at(i, t));
                const double yb = double((tiles >> t) & 1);
                // stable log(1+exp): -log sigmoid(z) = softplus(-z)
                const double sp = z > 0 ? z + std::log1p(std::exp(-z))
                                        : std::log1p(std::exp(z));
                loss += sp - yb * z;
                if (dW) {
                    const double q = 1.0 / (1.0 + std::exp(-z));
                    dlogits.at(i, t) = T((q - yb) / double(B * kProbeTiles));
                }
            }
        }
        loss /= double(B) * kProbeTiles;
    }
    if (dW) matmul_tn(Xb, dlogits, *dW, /*accumulate=*/true);
    return loss;
}

// Argmax accuracy (MulticlassLocation) or mean per-tile accuracy at 0.5.
template <typename T>
inline double probe_accuracy(const ProbeModelT<T>& p, const Tensor<T>& X,
                             const ProbeLabels& labels,
                             std::span<const int> rows) {
    if (X.cols != p.d()) throw ShapeMismatch("probe_accuracy: input width");
    double correct = 0.0;
    for (int r : rows) {
        std::vector<T> h(X.row(r), X.row(r) + X.cols);
        auto y = probe_forward(p, h);
        if (p.structure == ProbeStructure::MulticlassLocation) {
            const int pred =
                int(std::max_element(y.begin(), y.end()) - y.begin());
            correct += (pred == labels.location[r]);
        } else {
            const std::uint64_t tiles = labels.tiles[r];
            int hits = 0;
            for (int t = 0; t < kProbeTiles; ++t)
                hits += ((y[t] > 0.5) == bool((tiles >> t) & 1));
            correct += double(hits) / kProbeTiles;
        }
    }
    return rows.empty() ? 0.0 : correct / double(rows.size());
}

template <typename T>
inline double probe_accuracy(const ProbeModelT<T>& p, const Tensor<T>& X,
                             const ProbeLabels& labels) {
    std::vector<int> rows(X.rows);
    for (int i = 0; i < X.rows; ++i) rows[i] = i;
    return probe_accuracy(p, X, labels, rows);
}

struct ProbeTrainHyper {
    double lr = 1e-3;
    int batch_size = 256;
    int steps = 2000;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double val_fraction = 0.2;
};

struct ProbeTrainResult {
    ProbeModel model;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    std::vector<int> train_rows, val_rows;
};

// Adam on frozen activations with an 80/20 split BY GAME (alignment game ids),
// so no game contributes to both sides.
inline ProbeTrainResult train_probe(const ActivationSet& acts,
                                    const ProbeLabels& labels, TileMode mode,
                                    ProbeStructure structure,
                                    const ProbeTrainHyper& hyper,
                                    std::uint64_t seed) {
    const Tensor2D& X = acts.vectors;
    if (X.rows < 1) throw std::invalid_argument("train_probe: no activations");
    if (acts.alignment.size() != std::size_t(X.rows))
        throw ShapeMismatch("train_probe: alignment rows");
    const bool multiclass = structure == ProbeStructure::MulticlassLocation;
    if (multiclass && labels.location.size() != std::size_t(X.rows))
        throw ShapeMismatch("train_probe: location labels");
    if (!multiclass && labels.tiles.size() != std::size_t(X.rows))
        throw ShapeMismatch("train_probe: tile labels");

    // deterministic game-level split
    std::vector<std::uint32_t> games;
    for (const auto& [g, t] : acts.alignment) games.push_back(g);
    std::sort(games.begin(), games.end());
    games.erase(std::unique(games.begin(), games.end()), games.end());
    std::uint64_t shuffle_seed = seed ^ 0x9e3779b97f4a7c15ULL;
    Rng rng(splitmix64(shuffle_seed));
    for (std::size_t i = games.size(); i > 1; --i)
        std::swap(games[i - 1], games[rng.below(i)]);
    const std::size_t n_val =
        std::max<std::size_t>(1, std::size_t(hyper.val_fraction * games.size()));
    std::vector<std::uint32_t> val_games(games.end() - n_val, games.end());
    std::sort(val_games.begin(), val_games.end());
    auto is_val = [&](std::uint32_t g) {
        return std::binary_search(val_games.begin(), val_games.end(), g);
    };

    ProbeTrainResult res;
    for (int i = 0; i < X.rows; ++i)
        (is_val(acts.alignment[i].first) ? res.val_rows : res.train_rows)
            .push_back(i);
    if (res.train_rows.empty() || res.val_rows.empty())
        throw std::invalid_argument("train_probe: need >= 2 games for a split");

    res.model = init_probe<float>(X.cols, mode, structure, acts.layer, seed);
    ParamStore store;
    store.add("W", X.cols, kProbeTiles);
    store.value("W").data = res.model.W.data;

    Rng batch_rng(splitmix64(shuffle_seed));
    const int B = std::min<int>(hyper.batch_size, int(res.train_rows.size()));
    std::vector<int> batch(B);
    for (int step = 1; step <= hyper.steps; ++step) {
        for (int i = 0; i < B; ++i)
            batch[i] = res.train_rows[batch_rng.below(res.train_rows.size())];
        res.model.W.data = store.value("W").data;
        store.zero_grad();
        probe_batch_loss(res.model, X, labels, batch, &store.grad("W"));
        adam_step(store, hyper.lr, hyper.beta1, hyper.beta2, hyper.adam_eps,
                  step);
    }
    res.model.W.data = store.value("W").data;
    res.train_accuracy = probe_accuracy(res.model, X, labels, res.train_rows);
    res.val_accuracy = probe_accuracy(res.model, X, labels, res.val_rows);
    return res;
}

// ---------------------------------------------------------------------------
// §3.3.1 cosine-similarity alignment between MLP neurons and probe directions
// ---------------------------------------------------------------------------

template <typename A, typename B>
inline double cosine_similarity(const std::vector<A>& a, const std::vector<B>& b) {
    if (a.size() != b.size()) throw ShapeMismatch("cosine_similarity: lengths");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += double(a[i]) * double(b[i]);
        aa += double(a[i]) * double(a[i]);
        bb += double(b[i]) * double(b[i]);
    }
    if (aa == 0.0 || bb == 0.0) throw ZeroVector("cosine_similarity: zero norm");
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

enum class MLPSublayer : std::uint8_t { Encoding = 0, Projection = 1 };

struct AlignmentReport {
    std::array<int, 64> counts{};  // per-tile neurons with |cos| > threshold
    double threshold = 0.2;
    int layer = 0;  // 1-based transformer layer
    MLPSublayer sublayer = MLPSublayer::Encoding;
    int neurons = 0;
    int zero_neurons_skipped = 0;
};

// Encoding: each neuron's input direction in residual space (a column of the
// stored d→4d weight). Projection: each neuron's output direction (a row of
// the stored 4d→d weight). Absolute cosine, so sign conventions are moot.
inline AlignmentReport neuron_probe_alignment(const GptModel& model, int layer,
                                              const ProbeModel& probe,
                                              MLPSublayer sublayer,
                                              double threshold = 0.2) {
    if (layer < 1 || layer > model.cfg.n_layers)
        throw LayerOutOfRange(layer);
    const int d = model.cfg.d_model;
    if (probe.d() != d) throw ShapeMismatch("neuron_probe_alignment: probe width");
    const char* wname =
        sublayer == MLPSublayer::Encoding ? "mlp.enc.w" : "mlp.dec.w";
    const Tensor2D& W = model.params.value(gptname::layer(layer - 1, wname));
    const int n_neurons = model.cfg.d_mlp();

    AlignmentReport rep;
    rep.threshold = threshold;
    rep.layer = layer;
    rep.sublayer = sublayer;
    rep.neurons = n_neurons;
    std::vector<float> neuron(d), dir(d);
    for (int k = 0; k < n_neurons; ++k) {
        for (int i = 0; i < d; ++i)
            neuron[i] = sublayer == MLPSublayer::Encoding ? W.at(i, k) : W.at(k, i);
        double n2 = 0.0;
        for (float v : neuron) n2 += double(v) * double(v);
        if (n2 == 0.0) {
            ++rep.zero_neurons_skipped;
            continue;
        }
        for (int t = 0; t < 64; ++t) {
            for (int i = 0; i < d; ++i) dir[i] = probe.W.at(i, t);
            if (std::abs(cosine_similarity(neuron, dir)) > threshold)
                ++rep.counts[t];
        }
    }
    return rep;
}

// Monte Carlo chance baseline: fraction of random unit-vector pairs at
// dimension d whose |cosine| exceeds the threshold.
inline double alignment_random_baseline(int d, double threshold, int samples,
                                        std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> a(d), b(d);
    int hits = 0;
    for (int s = 0; s < samples; ++s) {
        for (int i = 0; i < d; ++i) {
            a[i] = rng.normal();
            b[i] = rng.normal();
        }
        if (std::abs(cosine_similarity(a, b)) > threshold) ++hits;
    }
    return double(hits) / samples;
}

// ---------------------------------------------------------------------------
// Persistence: OCKP with W plus metadata (layer, mode, structure, seed-free)
// ---------------------------------------------------------------------------

inline void save_probe(const std::string& path, const ProbeModel& p) {
    std::vector<CheckpointSection> sections;
    sections.push_back({"W",
                        {std::uint32_t(p.W.rows), std::uint32_t(p.W.cols)},
                        p.W.data});
    sections.push_back({"probe.meta",
                        {1, 3},
                        {float(p.layer), float(int(p.mode)),
                         float(int(p.structure))}});
    write_checkpoint_sections(path, sections);
}

inline ProbeModel load_probe(const std::string& path) {
    auto sections = read_checkpoint_sections(path);
    ProbeModel p;
    bool have_w = false, have_meta = false;
    for (const auto& s : sections) {
        if (s.name == "W" && s.dims.size() == 2) {
            p.W = Tensor2D(int(s.dims[0]), int(s.dims[1]));
            p.W.data = s.data;
            have_w = true;
        } else if (s.name == "probe.meta" && s.data.size() == 3) {
            p.layer = int(s.data[0]);
            p.mode = TileMode(int(s.data[1]));
            p.structure = ProbeStructure(int(s.data[2]));
            have_meta = true;
        }
    }
    if (!have_w || !have_meta) throw FormatError("probe checkpoint: missing section");
    if (p.W.cols != kProbeTiles) throw FormatError("probe checkpoint: W shape");
    return p;
}

}  // namespace owml
