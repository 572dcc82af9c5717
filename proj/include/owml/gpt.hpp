#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "owml/dataset.hpp"
#include "owml/io.hpp"
#include "owml/othello.hpp"
#include "owml/rng.hpp"
#include "owml/tensor.hpp"

namespace owml {

struct TokenOutOfRange : std::runtime_error {
    explicit TokenOutOfRange(int t)
        : std::runtime_error("token out of range: " + std::to_string(t)) {}
};
struct LayerOutOfRange : std::runtime_error {
    explicit LayerOutOfRange(int l)
        : std::runtime_error("layer out of range: " + std::to_string(l)) {}
};

struct GPTConfig {
    int n_layers = 4;
    int n_heads = 4;
    int d_model = 128;
    int vocab = kVocab;
    int max_seq_len = 61;  // 60 moves + EOS
    int mlp_ratio = 4;

    int head_dim() const { return d_model / n_heads; }
    int d_mlp() const { return d_model * mlp_ratio; }

    void validate() const {
        if (d_model % n_heads != 0)
            throw std::invalid_argument("d_model must be divisible by n_heads");
        if (vocab != kVocab)
            throw std::invalid_argument("vocab must be 66");
        if (n_layers < 1 || max_seq_len < 2)
            throw std::invalid_argument("bad GPT config");
    }
};

template <typename T>
struct GptModelT {
    GPTConfig cfg;
    ParamStoreT<T> params;
};

using GptModel = GptModelT<float>;

namespace gptname {
inline std::string layer(int l, const char* suffix) {
    return "layer" + std::to_string(l) + "." + suffix;
}
}  // namespace gptname

// Weights ~ N(0, 0.02), biases and norm shifts zero, norm gains one.
template <typename T = float>
GptModelT<T> init_model(const GPTConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    GptModelT<T> model;
    model.cfg = cfg;
    auto& ps = model.params;
    Rng rng(seed);
    auto winit = [&](Tensor<T>& t) {
        for (auto& v : t.data) v = T(rng.normal() * 0.02);
    };
    auto ones = [](Tensor<T>& t) {
        for (auto& v : t.data) v = T(1);
    };
    winit(ps.add("tok_emb", cfg.vocab, cfg.d_model));
    winit(ps.add("pos_emb", cfg.max_seq_len, cfg.d_model));
    for (int l = 0; l < cfg.n_layers; ++l) {
        ones(ps.add(gptname::layer(l, "ln1.g"), 1, cfg.d_model));
        ps.add(gptname::layer(l, "ln1.b"), 1, cfg.d_model);
        winit(ps.add(gptname::layer(l, "qkv.w"), cfg.d_model, 3 * cfg.d_model));
        ps.add(gptname::layer(l, "qkv.b"), 1, 3 * cfg.d_model);
        winit(ps.add(gptname::layer(l, "proj.w"), cfg.d_model, cfg.d_model));
        ps.add(gptname::layer(l, "proj.b"), 1, cfg.d_model);
        ones(ps.add(gptname::layer(l, "ln2.g"), 1, cfg.d_model));
        ps.add(gptname::layer(l, "ln2.b"), 1, cfg.d_model);
        winit(ps.add(gptname::layer(l, "mlp.enc.w"), cfg.d_model, cfg.d_mlp()));
        ps.add(gptname::layer(l, "mlp.enc.b"), 1, cfg.d_mlp());
        winit(ps.add(gptname::layer(l, "mlp.dec.w"), cfg.d_mlp(), cfg.d_model));
        ps.add(gptname::layer(l, "mlp.dec.b"), 1, cfg.d_model);
    }
    ones(ps.add("lnf.g", 1, cfg.d_model));
    ps.add("lnf.b", 1, cfg.d_model);
    winit(ps.add("w_out", cfg.d_model, cfg.vocab));
    return model;
}

// ---------------------------------------------------------------------------
// Batched forward with caches for backward. Sequences are stacked row-major:
// row s * seq_len + t. The residual stream is captured after each block's
// MLP output is added back.
// ---------------------------------------------------------------------------

template <typename T>
struct GptForwardCacheT {
    int batch = 0, seq_len = 0;
    std::vector<int> ids;
    struct Layer {
        Tensor<T> x_in, xn1, qkv, att_out, x_mid, xn2, mlp_pre, mlp_act, x_out;
        LayerNormCache<T> ln1, ln2;
        std::vector<AttentionCache<T>> heads;  // batch * n_heads entries
    };
    std::vector<Layer> layers;
    Tensor<T> x_final, xnf;
    LayerNormCache<T> lnf;
    Tensor<T> logits;
};

using GptForwardCache = GptForwardCacheT<float>;

namespace gptdetail {

// Copy head-h columns of the q/k/v block for sequence s into a (T x hd) tile.
template <typename T>
inline void gather_head(const Tensor<T>& qkv, int s, int seq_len, int d_model,
                        int block, int head, int hd, Tensor<T>& out) {
    for (int t = 0; t < seq_len; ++t) {
        const T* src = qkv.row(s * seq_len + t) + block * d_model + head * hd;
        std::copy(src, src + hd, out.row(t));
    }
}

template <typename T>
inline void scatter_head_add(const Tensor<T>& tile, int s, int seq_len, int d_model,
                             int block, int head, int hd, Tensor<T>& qkv) {
    for (int t = 0; t < seq_len; ++t) {
        T* dst = qkv.row(s * seq_len + t) + block * d_model + head * hd;
        const T* src = tile.row(t);
        for (int d = 0; d < hd; ++d) dst[d] += src[d];
    }
}

}  // namespace gptdetail

template <typename T>
void gpt_forward(const GptModelT<T>& model, std::span<const int> tokens,
                 int batch, int seq_len, GptForwardCacheT<T>& cache) {
    const auto& cfg = model.cfg;
    const auto& ps = model.params;
    if (seq_len > cfg.max_seq_len)
        throw ShapeMismatch("sequence longer than max_seq_len");
    for (int t : tokens)
        if (t < 0 || t >= cfg.vocab) throw TokenOutOfRange(t);

    const int rows = batch * seq_len;
    const int d = cfg.d_model;
    const int hd = cfg.head_dim();
    cache.batch = batch;
    cache.seq_len = seq_len;
    cache.ids.assign(tokens.begin(), tokens.end());
    cache.layers.resize(cfg.n_layers);

    Tensor<T> x(rows, d);
    embedding_lookup(ps.value("tok_emb"), tokens, x);
    const Tensor<T>& pos = ps.value("pos_emb");
    for (int s = 0; s < batch; ++s)
        for (int t = 0; t < seq_len; ++t) {
            T* r = x.row(s * seq_len + t);
            const T* p = pos.row(t);
            for (int j = 0; j < d; ++j) r[j] += p[j];
        }

    for (int l = 0; l < cfg.n_layers; ++l) {
        auto& lc = cache.layers[l];
        lc.x_in = x;
        lc.xn1 = Tensor<T>(rows, d);
        layer_norm(lc.x_in, ps.value(gptname::layer(l, "ln1.g")),
                   ps.value(gptname::layer(l, "ln1.b")), lc.xn1, lc.ln1);
        lc.qkv = Tensor<T>(rows, 3 * d);
        matmul(lc.xn1, ps.value(gptname::layer(l, "qkv.w")), lc.qkv);
        add_bias(lc.qkv, ps.value(gptname::layer(l, "qkv.b")));

        lc.att_out = Tensor<T>(rows, d);
        lc.heads.assign(std::size_t(batch) * cfg.n_heads, {});
        Tensor<T> q(seq_len, hd), k(seq_len, hd), v(seq_len, hd), o(seq_len, hd);
        for (int s = 0; s < batch; ++s) {
            for (int h = 0; h < cfg.n_heads; ++h) {
                gptdetail::gather_head(lc.qkv, s, seq_len, d, 0, h, hd, q);
                gptdetail::gather_head(lc.qkv, s, seq_len, d, 1, h, hd, k);
                gptdetail::gather_head(lc.qkv, s, seq_len, d, 2, h, hd, v);
                causal_attention(q, k, v, o, lc.heads[s * cfg.n_heads + h]);
                for (int t = 0; t < seq_len; ++t)
                    std::copy(o.row(t), o.row(t) + hd,
                              lc.att_out.row(s * seq_len + t) + h * hd);
            }
        }

        Tensor<T> att_proj(rows, d);
        matmul(lc.att_out, ps.value(gptname::layer(l, "proj.w")), att_proj);
        add_bias(att_proj, ps.value(gptname::layer(l, "proj.b")));
        lc.x_mid = lc.x_in;
        for (std::size_t i = 0; i < lc.x_mid.size(); ++i)
            lc.x_mid.data[i] += att_proj.data[i];

        lc.xn2 = Tensor<T>(rows, d);
        layer_norm(lc.x_mid, ps.value(gptname::layer(l, "ln2.g")),
                   ps.value(gptname::layer(l, "ln2.b")), lc.xn2, lc.ln2);
        lc.mlp_pre = Tensor<T>(rows, cfg.d_mlp());
        matmul(lc.xn2, ps.value(gptname::layer(l, "mlp.enc.w")), lc.mlp_pre);
        add_bias(lc.mlp_pre, ps.value(gptname::layer(l, "mlp.enc.b")));
        lc.mlp_act = Tensor<T>(rows, cfg.d_mlp());
        gelu(lc.mlp_pre, lc.mlp_act);
        Tensor<T> mlp_out(rows, d);
        matmul(lc.mlp_act, ps.value(gptname::layer(l, "mlp.dec.w")), mlp_out);
        add_bias(mlp_out, ps.value(gptname::layer(l, "mlp.dec.b")));
        lc.x_out = lc.x_mid;
        for (std::size_t i = 0; i < lc.x_out.size(); ++i)
            lc.x_out.data[i] += mlp_out.data[i];
        x = lc.x_out;
    }

    cache.x_final = x;
    cache.xnf = Tensor<T>(rows, d);
    layer_norm(cache.x_final, ps.value("lnf.g"), ps.value("lnf.b"), cache.xnf,
               cache.lnf);
    cache.logits = Tensor<T>(rows, cfg.vocab);
    matmul(cache.xnf, ps.value("w_out"), cache.logits);
}

// Mean NLL over unmasked positions plus full parameter gradients.
template <typename T>
double gpt_backward(GptModelT<T>& model, const GptForwardCacheT<T>& cache,
                    std::span<const int> targets,
                    std::span<const std::uint8_t> mask) {
    const auto& cfg = model.cfg;
    auto& ps = model.params;
    const int rows = cache.batch * cache.seq_len;
    const int d = cfg.d_model;
    const int hd = cfg.head_dim();

    Tensor<T> dlogits(rows, cfg.vocab);
    const double loss = cross_entropy(cache.logits, targets, mask, &dlogits);

    Tensor<T> dxnf(rows, d);
    matmul_nt(dlogits, ps.value("w_out"), dxnf);
    matmul_tn(cache.xnf, dlogits, ps.grad("w_out"), true);

    Tensor<T> dx(rows, d);
    layer_norm_backward(dxnf, cache.x_final, ps.value("lnf.g"), cache.lnf, dx,
                        ps.grad("lnf.g"), ps.grad("lnf.b"));

    Tensor<T> dmlp_act(rows, cfg.d_mlp()), dmlp_pre(rows, cfg.d_mlp());
    Tensor<T> dxn(rows, d), dtmp(rows, d);
    Tensor<T> dqkv(rows, 3 * d), datt(rows, d);
    Tensor<T> q(cache.seq_len, hd), k(cache.seq_len, hd), v(cache.seq_len, hd);
    Tensor<T> dq(cache.seq_len, hd), dk(cache.seq_len, hd), dv(cache.seq_len, hd);

    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const auto& lc = cache.layers[l];
        // MLP branch: x_out = x_mid + dec(gelu(enc(ln2(x_mid))))
        matmul_tn(lc.mlp_act, dx, ps.grad(gptname::layer(l, "mlp.dec.w")), true);
        add_bias_backward(dx, ps.grad(gptname::layer(l, "mlp.dec.b")));
        matmul_nt(dx, ps.value(gptname::layer(l, "mlp.dec.w")), dmlp_act);
        gelu_backward(dmlp_act, lc.mlp_pre, dmlp_pre);
        matmul_tn(lc.xn2, dmlp_pre, ps.grad(gptname::layer(l, "mlp.enc.w")), true);
        add_bias_backward(dmlp_pre, ps.grad(gptname::layer(l, "mlp.enc.b")));
        matmul_nt(dmlp_pre, ps.value(gptname::layer(l, "mlp.enc.w")), dxn);
        layer_norm_backward(dxn, lc.x_mid, ps.value(gptname::layer(l, "ln2.g")),
                            lc.ln2, dtmp, ps.grad(gptname::layer(l, "ln2.g")),
                            ps.grad(gptname::layer(l, "ln2.b")));
        for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dtmp.data[i];

        // Attention branch: x_mid = x_in + proj(att(qkv(ln1(x_in))))
        matmul_tn(lc.att_out, dx, ps.grad(gptname::layer(l, "proj.w")), true);
        add_bias_backward(dx, ps.grad(gptname::layer(l, "proj.b")));
        matmul_nt(dx, ps.value(gptname::layer(l, "proj.w")), datt);

        dqkv.zero();
        Tensor<T> dout_head(cache.seq_len, hd);
        for (int s = 0; s < cache.batch; ++s) {
            for (int h = 0; h < cfg.n_heads; ++h) {
                gptdetail::gather_head(lc.qkv, s, cache.seq_len, d, 0, h, hd, q);
                gptdetail::gather_head(lc.qkv, s, cache.seq_len, d, 1, h, hd, k);
                gptdetail::gather_head(lc.qkv, s, cache.seq_len, d, 2, h, hd, v);
                for (int t = 0; t < cache.seq_len; ++t) {
                    const T* src = datt.row(s * cache.seq_len + t) + h * hd;
                    std::copy(src, src + hd, dout_head.row(t));
                }
                causal_attention_backward(dout_head, q, k, v,
                                          lc.heads[s * cfg.n_heads + h], dq, dk, dv);
                gptdetail::scatter_head_add(dq, s, cache.seq_len, d, 0, h, hd, dqkv);
                gptdetail::scatter_head_add(dk, s, cache.seq_len, d, 1, h, hd, dqkv);
                gptdetail::scatter_head_add(dv, s, cache.seq_len, d, 2, h, hd, dqkv);
            }
        }
        matmul_tn(lc.xn1, dqkv, ps.grad(gptname::layer(l, "qkv.w")), true);
        add_bias_backward(dqkv, ps.grad(gptname::layer(l, "qkv.b")));
        matmul_nt(dqkv, ps.value(gptname::layer(l, "qkv.w")), dxn);
        layer_norm_backward(dxn, lc.x_in, ps.value(gptname::layer(l, "ln1.g")),
                            lc.ln1, dtmp, ps.grad(gptname::layer(l, "ln1.g")),
                            ps.grad(gptname::layer(l, "ln1.b")));
        for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dtmp.data[i];
    }

    embedding_backward(dx, cache.ids, ps.grad("tok_emb"));
    Tensor<T>& dpos = ps.grad("pos_emb");
    for (int s = 0; s < cache.batch; ++s)
        for (int t = 0; t < cache.seq_len; ++t) {
            const T* g = dx.row(s * cache.seq_len + t);
            T* dst = dpos.row(t);
            for (int j = 0; j < d; ++j) dst[j] += g[j];
        }
    return loss;
}

// ---------------------------------------------------------------------------
// Inference-level API
// ---------------------------------------------------------------------------

struct ResidualStreamRecord {
    int layer = 0;  // 1-based
    Tensor2D vectors;
    std::vector<std::pair<std::uint32_t, std::uint16_t>> alignment;
};

// Forward one sequence; returns logits and the per-layer residual stream
// (PAD positions dropped from the records).
inline std::pair<Tensor2D, std::vector<ResidualStreamRecord>> forward(
    const GptModel& model, const TokenSequence& tokens,
    std::uint32_t game_id = 0) {
    GptForwardCache cache;
    gpt_forward(model, tokens, 1, int(tokens.size()), cache);
    std::vector<ResidualStreamRecord> records;
    std::vector<int> keep;
    for (int t = 0; t < int(tokens.size()); ++t)
        if (tokens[t] != kPadToken) keep.push_back(t);
    for (int l = 0; l < model.cfg.n_layers; ++l) {
        ResidualStreamRecord rec;
        rec.layer = l + 1;
        rec.vectors = Tensor2D(int(keep.size()), model.cfg.d_model);
        for (std::size_t i = 0; i < keep.size(); ++i) {
            const float* src = cache.layers[l].x_out.row(keep[i]);
            std::copy(src, src + model.cfg.d_model, rec.vectors.row(int(i)));
            rec.alignment.push_back({game_id, std::uint16_t(keep[i])});
        }
        records.push_back(std::move(rec));
    }
    return {std::move(cache.logits), std::move(records)};
}

inline double token_loss(const Tensor2D& logits, std::span<const int> targets,
                         std::span<const std::uint8_t> mask) {
    return cross_entropy<float>(logits, targets, mask, nullptr);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace gptdetail {

// Input/target/mask triple for one game: inputs are the first seq_len
// tokens, targets the next-token shift, PAD targets masked out.
struct Example {
    std::vector<int> inputs, targets;
    std::vector<std::uint8_t> mask;
};

inline Example make_example(const std::vector<Tile>& moves, int max_seq_len) {
    GameRecord g;
    g.moves = moves;
    TokenSequence toks = tokenize(g, max_seq_len);
    Example ex;
    const int t_len = max_seq_len - 1;
    ex.inputs.assign(toks.begin(), toks.begin() + t_len);
    ex.targets.assign(toks.begin() + 1, toks.begin() + 1 + t_len);
    ex.mask.resize(t_len);
    for (int i = 0; i < t_len; ++i)
        ex.mask[i] = ex.targets[i] != kPadToken ? 1 : 0;
    return ex;
}

}  // namespace gptdetail

inline double eval_loss(const GptModel& model,
                        const std::vector<std::vector<Tile>>& games) {
    double total = 0.0;
    long count = 0;
    GptForwardCache cache;
    for (const auto& g : games) {
        auto ex = gptdetail::make_example(g, model.cfg.max_seq_len);
        gpt_forward(model, ex.inputs, 1, int(ex.inputs.size()), cache);
        int active = 0;
        for (auto m : ex.mask) active += m;
        total += token_loss(cache.logits, ex.targets, ex.mask) * active;
        count += active;
    }
    return total / double(count);
}

// Fraction of positions (those with a legal next move) where the argmax
// token is legal.
inline double legal_move_rate(const GptModel& model,
                              const std::vector<std::vector<Tile>>& games) {
    long hits = 0, total = 0;
    GptForwardCache cache;
    for (const auto& g : games) {
        auto ex = gptdetail::make_example(g, model.cfg.max_seq_len);
        gpt_forward(model, ex.inputs, 1, int(ex.inputs.size()), cache);
        Board b = initial_board();
        for (std::size_t p = 0; p + 1 < g.size(); ++p) {
            if (legal_moves(b) == 0) b.to_move = other(b.to_move);
            b = apply_move(b, g[p]);
            Board next = b;
            if (legal_moves(next) == 0) next.to_move = other(next.to_move);
            const std::uint64_t legal = legal_moves(next);
            if (legal == 0) continue;
            const float* r = cache.logits.row(int(p));
            int best = 0;
            for (int j = 1; j < model.cfg.vocab; ++j)
                if (r[j] > r[best]) best = j;
            if (best < 64 && (legal & (1ULL << best))) ++hits;
            ++total;
        }
    }
    return total ? double(hits) / double(total) : 0.0;
}

// Chance baseline for legal_move_rate: mean |legal| / vocab over the same
// positions an argmax model is scored on.
inline double legal_move_chance(const std::vector<std::vector<Tile>>& games) {
    double sum = 0.0;
    long total = 0;
    for (const auto& g : games) {
        Board b = initial_board();
        for (std::size_t p = 0; p + 1 < g.size(); ++p) {
            if (legal_moves(b) == 0) b.to_move = other(b.to_move);
            b = apply_move(b, g[p]);
            Board next = b;
            if (legal_moves(next) == 0) next.to_move = other(next.to_move);
            const int n = std::popcount(legal_moves(next));
            if (n == 0) continue;
            sum += double(n) / kVocab;
            ++total;
        }
    }
    return total ? sum / double(total) : 0.0;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainHyper {
    double lr = 1e-3;
    int batch_size = 64;
    long steps = 20000;
    std::uint64_t seed = 0;
    int eval_every = 250;
    int eval_games = 200;
    bool cosine_decay = true;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
};

struct TrainMetricsRow {
    long step;
    double lr;
    double train_loss;
    double eval_loss;       // NaN when not evaluated this step
    double legal_rate;      // NaN when not evaluated this step
};

// Adam over shuffled batches with cosine decay. Metrics are appended every
// eval_every steps (and at the final step). Aborts on non-finite updates,
// keeping the last finite parameters.
inline std::vector<TrainMetricsRow> train(
    GptModel& model, const std::vector<std::vector<Tile>>& train_games,
    const std::vector<std::vector<Tile>>& held_out, const TrainHyper& hyper,
    const std::function<void(const TrainMetricsRow&)>& on_metrics = nullptr) {
    if (train_games.empty()) throw std::invalid_argument("train: empty dataset");
    Rng rng(hyper.seed);
    std::vector<TrainMetricsRow> log;
    const int t_len = model.cfg.max_seq_len - 1;
    GptForwardCache cache;
    std::vector<int> inputs, targets;
    std::vector<std::uint8_t> mask;
    for (long step = 1; step <= hyper.steps; ++step) {
        inputs.clear();
        targets.clear();
        mask.clear();
        for (int b = 0; b < hyper.batch_size; ++b) {
            const auto& g = train_games[rng.below(train_games.size())];
            auto ex = gptdetail::make_example(g, model.cfg.max_seq_len);
            inputs.insert(inputs.end(), ex.inputs.begin(), ex.inputs.end());
            targets.insert(targets.end(), ex.targets.begin(), ex.targets.end());
            mask.insert(mask.end(), ex.mask.begin(), ex.mask.end());
        }
        model.params.zero_grad();
        gpt_forward(model, inputs, hyper.batch_size, t_len, cache);
        const double loss = gpt_backward(model, cache, targets, mask);
        double lr = hyper.lr;
        if (hyper.cosine_decay) {
            const double progress = double(step) / double(hyper.steps);
            lr = hyper.lr * 0.5 * (1.0 + std::cos(3.141592653589793 * progress));
            lr = std::max(lr, hyper.lr * 0.01);
        }
        adam_step(model.params, lr, hyper.beta1, hyper.beta2, hyper.adam_eps, step);

        if (step % hyper.eval_every == 0 || step == hyper.steps) {
            TrainMetricsRow row{step, lr, loss,
                                std::numeric_limits<double>::quiet_NaN(),
                                std::numeric_limits<double>::quiet_NaN()};
            if (!held_out.empty()) {
                std::vector<std::vector<Tile>> sample(
                    held_out.begin(),
                    held_out.begin() +
                        std::min<std::size_t>(held_out.size(), hyper.eval_games));
                row.eval_loss = eval_loss(model, sample);
                row.legal_rate = legal_move_rate(model, sample);
            }
            log.push_back(row);
            if (on_metrics) on_metrics(row);
        }
    }
    return log;
}

// ---------------------------------------------------------------------------
// Activation extraction
// ---------------------------------------------------------------------------

// Residual vectors for the first `states_per_game` timesteps of each game,
// written as one ActivationSet for the requested layer (1-based).
inline ActivationSet extract_activations(const GptModel& model,
                                         const std::vector<std::vector<Tile>>& games,
                                         int layer, int states_per_game) {
    if (layer < 1 || layer > model.cfg.n_layers) throw LayerOutOfRange(layer);
    ActivationSet set;
    set.layer = layer;
    std::vector<std::pair<std::uint32_t, std::uint16_t>> align;
    std::vector<float> rows;
    GptForwardCache cache;
    const int d = model.cfg.d_model;
    for (std::uint32_t gi = 0; gi < games.size(); ++gi) {
        const auto& moves = games[gi];
        if (moves.empty()) continue;
        std::vector<int> inputs(moves.begin(), moves.end());
        gpt_forward(model, inputs, 1, int(inputs.size()), cache);
        const int keep = std::min<int>(int(moves.size()), states_per_game);
        const Tensor2D& stream = cache.layers[layer - 1].x_out;
        for (int t = 0; t < keep; ++t) {
            const float* src = stream.row(t);
            rows.insert(rows.end(), src, src + d);
            align.push_back({gi, std::uint16_t(t)});
        }
    }
    set.vectors = Tensor2D(int(align.size()), d);
    set.vectors.data = std::move(rows);
    set.alignment = std::move(align);
    return set;
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

inline void save_gpt(const std::string& path, const GptModel& model) {
    CheckpointSection meta;
    meta.name = "gpt.config";
    meta.dims = {6};
    meta.data = {float(model.cfg.n_layers),    float(model.cfg.n_heads),
                 float(model.cfg.d_model),     float(model.cfg.vocab),
                 float(model.cfg.max_seq_len), float(model.cfg.mlp_ratio)};
    save_param_store(path, model.params, {meta});
}

inline GptModel load_gpt(const std::string& path) {
    auto sections = read_checkpoint_sections(path);
    GPTConfig cfg;
    bool found = false;
    for (const auto& s : sections)
        if (s.name == "gpt.config") {
            if (s.data.size() != 6) throw FormatError("gpt.config: bad size");
            cfg.n_layers = int(s.data[0]);
            cfg.n_heads = int(s.data[1]);
            cfg.d_model = int(s.data[2]);
            cfg.vocab = int(s.data[3]);
            cfg.max_seq_len = int(s.data[4]);
            cfg.mlp_ratio = int(s.data[5]);
            found = true;
        }
    if (!found) throw FormatError("checkpoint has no gpt.config section");
    GptModel model = init_model(cfg, 0);
    load_param_store(path, model.params);
    return model;
}

}  // namespace owml
