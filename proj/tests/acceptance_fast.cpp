// Acceptance gate, part 1: the oracle-checkable criteria that run in seconds.
// Prints one PASS/FAIL line per criterion; exit status is nonzero if any fail.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <vector>

#include "owml/analysis.hpp"
#include "owml/gpt.hpp"
#include "owml/probe.hpp"
#include "owml/sae.hpp"
#include "reference_engine.hpp"

using namespace owml;

namespace {

bool g_all_pass = true;

void criterion(int n, bool pass, const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    char detail[512];
    std::vsnprintf(detail, sizeof detail, fmt, args);
    va_end(args);
    std::printf("criterion %d: %s - %s\n", n, pass ? "PASS" : "FAIL", detail);
    std::fflush(stdout);
    g_all_pass = g_all_pass && pass;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

// Random reachable position: replay a random game prefix.
Board random_position(std::uint64_t seed) {
    Rng rng(seed);
    GameRecord g = random_game(seed);
    const std::size_t cut = rng.below(g.moves.size() + 1);
    Board b = initial_board();
    for (std::size_t i = 0; i < cut; ++i) {
        if (legal_moves(b) == 0) b.to_move = other(b.to_move);
        b = apply_move(b, g.moves[i]);
    }
    if (legal_moves(b) == 0) b.to_move = other(b.to_move);
    return b;
}

std::uint64_t perft_bitboard(const Board& b, int depth) {
    if (depth == 0) return 1;
    std::uint64_t m = legal_moves(b);
    if (m == 0) {
        Board passed = b;
        passed.to_move = other(b.to_move);
        if (legal_moves(passed) == 0) return 1;
        return perft_bitboard(passed, depth);
    }
    std::uint64_t n = 0;
    while (m) {
        Tile t = static_cast<Tile>(std::countr_zero(m));
        m &= m - 1;
        n += perft_bitboard(apply_move(b, t), depth - 1);
    }
    return n;
}

// --------------------------------------------------------------------------
// Criterion 1: bitboard rules equal the naive reference; perft 1..5 exact.
// --------------------------------------------------------------------------
void check_engine_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    long mismatches = 0;
    for (std::uint64_t seed = 1; seed <= 10000; ++seed) {
        const Board b = random_position(seed);
        std::uint64_t naive_mask = 0;
        for (Tile t : ref::legal_moves_naive(b)) naive_mask |= 1ULL << t;
        if (legal_moves(b) != naive_mask) {
            ++mismatches;
            continue;
        }
        std::uint64_t m = naive_mask;
        while (m) {
            const Tile t = static_cast<Tile>(std::countr_zero(m));
            m &= m - 1;
            if (!(apply_move(b, t) == ref::apply_move_naive(b, t))) ++mismatches;
        }
    }
    static const std::uint64_t kPerft[5] = {4, 12, 56, 244, 1396};
    bool perft_ok = true;
    const Board start = initial_board();
    for (int depth = 1; depth <= 5; ++depth) {
        const std::uint64_t fast = perft_bitboard(start, depth);
        if (fast != ref::perft_naive(start, depth) || fast != kPerft[depth - 1])
            perft_ok = false;
    }
    const double dt = seconds_since(t0);
    criterion(1, mismatches == 0 && perft_ok && dt < 60.0,
              "engine oracle: %ld mismatches on 10000 positions, perft 1..5 %s, "
              "%.1fs",
              mismatches, perft_ok ? "exact" : "WRONG", dt);
}

// --------------------------------------------------------------------------
// Criterion 2: stability fixpoint equals brute force + analytic cases.
// --------------------------------------------------------------------------
void check_stability_oracle() {
    long mismatches = 0;
    for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
        // half reachable positions, half arbitrary disjoint masks
        Board b;
        if (seed % 2 == 0) {
            b = random_position(seed + 50000);
        } else {
            Rng rng(seed);
            b.black = rng.next();
            b.white = rng.next() & ~b.black;
        }
        for (bool eight : {false, true}) {
            const auto adj = eight ? EdgeAdjacency::Eight : EdgeAdjacency::Four;
            if (stability_map(b, adj).stable_mask != ref::stability_naive(b, eight))
                ++mismatches;
        }
    }
    Board empty;
    const bool empty_ok = stability_map(empty).stable_mask == 0;
    Board corner;
    corner.black = 1ULL;  // a1 only
    const bool corner_ok = stability_map(corner).stable_mask == 1ULL;
    Board full;
    full.black = ~0ULL;
    const bool full_ok = std::popcount(stability_map(full).stable_mask) == 28;
    criterion(2, mismatches == 0 && empty_ok && corner_ok && full_ok,
              "stability oracle: %ld mismatches on 1000 boards x 2 adjacencies; "
              "empty=%d corner=%d full28=%d",
              mismatches, int(empty_ok), int(corner_ok), int(full_ok));
}

// --------------------------------------------------------------------------
// Criterion 3: gradients of every op and composed model vs central differences.
// --------------------------------------------------------------------------
using Checked =
    std::vector<std::pair<std::string, std::pair<Tensor<double>*, Tensor<double>*>>>;

Tensor<double> random_tensor(Rng& rng, int r, int c) {
    Tensor<double> t(r, c);
    for (auto& v : t.data) v = rng.normal() * 0.5;
    return t;
}

double weighted_sum(const Tensor<double>& t, const Tensor<double>& w) {
    double s = 0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t.data[i] * w.data[i];
    return s;
}

void check_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    const int kInstances = 20;
    double worst_tight = 0.0;   // matmul and probe: 1e-4 budget
    double worst_loose = 0.0;   // everything else: 1e-3 budget
    auto track = [](double& worst, double v) { worst = std::max(worst, v); };

    for (int i = 0; i < kInstances; ++i) {
        Rng rng(1000 + i);

        {  // matmul (checks nn forward and the nt/tn adjoints)
            Tensor<double> a = random_tensor(rng, 4, 5), b = random_tensor(rng, 5, 3);
            Tensor<double> w = random_tensor(rng, 4, 3);
            std::function<double()> loss = [&]() {
                Tensor<double> c(4, 3);
                matmul(a, b, c);
                return weighted_sum(c, w);
            };
            Tensor<double> da(4, 5), db(5, 3);
            matmul_nt(w, b, da);
            matmul_tn(a, w, db);
            Checked checked{{"a", {&a, &da}}, {"b", {&b, &db}}};
            track(worst_tight, grad_check(loss, checked, 1e-4).max_rel_error);
        }

        {  // add_bias
            Tensor<double> x = random_tensor(rng, 4, 6), b = random_tensor(rng, 1, 6);
            Tensor<double> w = random_tensor(rng, 4, 6);
            std::function<double()> loss = [&]() {
                Tensor<double> y = x;
                add_bias(y, b);
                return weighted_sum(y, w);
            };
            Tensor<double> db(1, 6);
            Tensor<double> dy = w;
            add_bias_backward(dy, db);
            Checked checked{{"b", {&b, &db}}};
            track(worst_loose, grad_check(loss, checked, 1e-5).max_rel_error);
        }

        {  // embedding lookup
            Tensor<double> table = random_tensor(rng, 7, 4);
            std::vector<int> ids{1, 3, 3, 6};
            Tensor<double> w = random_tensor(rng, 4, 4);
            std::function<double()> loss = [&]() {
                Tensor<double> y(4, 4);
                embedding_lookup(table, ids, y);
                return weighted_sum(y, w);
            };
            Tensor<double> dtable(7, 4);
            embedding_backward(w, ids, dtable);
            Checked checked{{"table", {&table, &dtable}}};
            track(worst_loose, grad_check(loss, checked, 1e-5).max_rel_error);
        }

        {  // layer_norm
            Tensor<double> x = random_tensor(rng, 3, 8);
            Tensor<double> g = random_tensor(rng, 1, 8), b = random_tensor(rng, 1, 8);
            Tensor<double> w = random_tensor(rng, 3, 8);
            std::function<double()> loss = [&]() {
                Tensor<double> y(3, 8);
                LayerNormCache<double> cache;
                layer_norm(x, g, b, y, cache);
                return weighted_sum(y, w);
            };
            Tensor<double> y(3, 8), dx(3, 8), dg(1, 8), db(1, 8);
            LayerNormCache<double> cache;
            layer_norm(x, g, b, y, cache);
            layer_norm_backward(w, x, g, cache, dx, dg, db);
            Checked checked{{"x", {&x, &dx}}, {"g", {&g, &dg}}, {"b", {&b, &db}}};
            track(worst_loose, grad_check(loss, checked, 1e-5).max_rel_error);
        }

        {  // gelu
            Tensor<double> x = random_tensor(rng, 3, 5), w = random_tensor(rng, 3, 5);
            std::function<double()> loss = [&]() {
                Tensor<double> y(3, 5);
                gelu(x, y);
                return weighted_sum(y, w);
            };
            Tensor<double> dx(3, 5);
            gelu_backward(w, x, dx);
            Checked checked{{"x", {&x, &dx}}};
            track(worst_loose, grad_check(loss, checked, 1e-5).max_rel_error);
        }

        {  // causal attention
            Tensor<double> q = random_tensor(rng, 4, 3), k = random_tensor(rng, 4, 3);
            Tensor<double> v = random_tensor(rng, 4, 3), w = random_tensor(rng, 4, 3);
            std::function<double()> loss = [&]() {
                Tensor<double> o(4, 3);
                AttentionCache<double> cache;
                causal_attention(q, k, v, o, cache);
                return weighted_sum(o, w);
            };
            Tensor<double> o(4, 3), dq(4, 3), dk(4, 3), dv(4, 3);
            AttentionCache<double> cache;
            causal_attention(q, k, v, o, cache);
            causal_attention_backward(w, q, k, v, cache, dq, dk, dv);
            Checked checked{{"q", {&q, &dq}}, {"k", {&k, &dk}}, {"v", {&v, &dv}}};
            track(worst_loose, grad_check(loss, checked, 1e-5).max_rel_error);
        }

        {  // cross entropy (softmax_rows is exercised via attention and here)
            Tensor<double> logits = random_tensor(rng, 4, 6);
            std::vector<int> targets{0, 2, 5, 1};
            std::vector<std::uint8_t> mask{1, 1, 0, 1};
            std::function<double()> loss = [&]() {
                return cross_entropy<double>(logits, targets, mask, nullptr);
            };
            Tensor<double> dlogits(4, 6);
            cross_entropy<double>(logits, targets, mask, &dlogits);
            Checked checked{{"logits", {&logits, &dlogits}}};
            track(worst_loose, grad_check(loss, checked, 1e-5).max_rel_error);
        }

        {  // composed 2-layer GPT, every parameter
            GPTConfig cfg{.n_layers = 2, .n_heads = 2, .d_model = 8, .max_seq_len = 5};
            auto model = init_model<double>(cfg, 400 + i);
            std::vector<int> inputs{int(rng.below(64)), int(rng.below(64)),
                                    int(rng.below(64)), int(rng.below(64))};
            std::vector<int> targets{inputs[1], inputs[2], inputs[3], kEosToken};
            std::vector<std::uint8_t> mask{1, 1, 1, 1};
            std::function<double()> loss = [&]() {
                GptForwardCacheT<double> c;
                gpt_forward(model, inputs, 1, 4, c);
                return cross_entropy<double>(c.logits, targets, mask, nullptr);
            };
            model.params.zero_grad();
            GptForwardCacheT<double> cache;
            gpt_forward(model, inputs, 1, 4, cache);
            gpt_backward(model, cache, targets, mask);
            Checked checked;
            for (auto& p : model.params.params)
                checked.push_back({p.name, {&p.value, &p.grad}});
            track(worst_loose, grad_check(loss, checked, 1e-5).max_rel_error);
        }

        {  // SAE loss
            auto m = init_sae<double>(5, 8, 0.1, 1, 500 + i);
            for (auto& v : m.mu.data) v = rng.normal() * 0.2;
            Tensor<double> X = random_tensor(rng, 3, 5);
            std::function<double()> loss = [&]() {
                return sae_loss(m, X, false);
            };
            m.params.zero_grad();
            sae_loss(m, X, true);
            Checked checked;
            for (auto& p : m.params.params)
                checked.push_back({p.name, {&p.value, &p.grad}});
            track(worst_loose, grad_check(loss, checked, 1e-6).max_rel_error);
        }

        for (auto structure : {ProbeStructure::MulticlassLocation,
                               ProbeStructure::PerTileIndependent}) {  // probes
            auto p = init_probe<double>(6, TileMode::Own, structure, 0, 600 + i);
            Tensor<double> X = random_tensor(rng, 4, 6);
            ProbeLabels labels;
            for (int r = 0; r < 4; ++r) {
                labels.location.push_back(int(rng.below(64)));
                labels.tiles.push_back(rng.next());
            }
            std::vector<int> rows{0, 1, 2, 3};
            const std::span<const int> rspan(rows);
            std::function<double()> loss = [&]() {
                return probe_batch_loss<double>(p, X, labels, rspan, nullptr);
            };
            Tensor<double> dW(6, 64);
            probe_batch_loss<double>(p, X, labels, rspan, &dW);
            Checked checked{{"W", {&p.W, &dW}}};
            track(worst_tight, grad_check(loss, checked, 1e-6).max_rel_error);
        }
    }
    const double dt = seconds_since(t0);
    criterion(3, worst_tight < 1e-4 && worst_loose < 1e-3 && dt < 120.0,
              "gradients: worst rel error %.2e (matmul/probe budget 1e-4), "
              "%.2e (other ops budget 1e-3), %d instances each, %.1fs",
              worst_tight, worst_loose, kInstances, dt);
}

// --------------------------------------------------------------------------
// Criterion 7: AUROC equals the exhaustive pairwise oracle; trapezoid exact.
// --------------------------------------------------------------------------
double pairwise_auroc(const std::vector<float>& values,
                      const std::vector<std::uint8_t>& labels) {
    double wins = 0.0;
    long pairs = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!labels[i]) continue;
        for (std::size_t j = 0; j < values.size(); ++j) {
            if (labels[j]) continue;
            ++pairs;
            if (values[i] > values[j]) wins += 1.0;
            else if (values[i] == values[j]) wins += 0.5;
        }
    }
    return wins / double(pairs);
}

void check_auroc() {
    long rank_mismatch = 0, trap_mismatch = 0;
    for (std::uint64_t inst = 0; inst < 1000; ++inst) {
        Rng rng(7000 + inst);
        const int n = 2 + int(rng.below(199));
        std::vector<float> values(n);
        std::vector<std::uint8_t> labels(n);
        bool seen0 = false, seen1 = false;
        for (int i = 0; i < n; ++i) {
            // quantized values force plenty of ties, including at zero
            values[i] = float(int(rng.below(7)) - 3) * 0.5f;
            labels[i] = std::uint8_t(rng.below(2));
            (labels[i] ? seen1 : seen0) = true;
        }
        if (!seen0) labels[0] = 0;
        if (!seen1) labels[n - 1] = 1;

        if (auroc(values, labels, AurocMethod::Rank) !=
            pairwise_auroc(values, labels))
            ++rank_mismatch;

        const Confusion c = binary_confusion(values, labels);
        long n_pos = c.tp + c.fn, n_neg = c.fp + c.tn;
        const double expect =
            (1.0 + double(c.tp) / n_pos - double(c.fp) / n_neg) / 2.0;
        if (auroc(values, labels, AurocMethod::BinaryTrapezoid) != expect)
            ++trap_mismatch;
    }
    criterion(7, rank_mismatch == 0 && trap_mismatch == 0,
              "auroc: rank vs pairwise oracle %ld/1000 mismatches, "
              "trapezoid closed form %ld/1000 mismatches",
              rank_mismatch, trap_mismatch);
}

}  // namespace

int main() {
    check_engine_oracle();
    check_stability_oracle();
    check_gradients();
    check_auroc();
    return g_all_pass ? 0 : 1;
}
