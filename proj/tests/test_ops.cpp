#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "owml/rng.hpp"
#include "owml/tensor.hpp"

using namespace owml;

namespace {

Tensor<double> random_tensor(Rng& rng, int r, int c, double scale = 1.0) {
    Tensor<double> t(r, c);
    for (auto& v : t.data) v = rng.normal() * scale;
    return t;
}

using Checked =
    std::vector<std::pair<std::string, std::pair<Tensor<double>*, Tensor<double>*>>>;

}  // namespace

TEST_CASE("softmax rows: uniform on zero input, rows sum to 1") {
    Tensor<double> x(3, 5), y(3, 5);
    softmax_rows(x, y);
    for (auto v : y.data) CHECK(v == doctest::Approx(0.2));
    Rng rng(1);
    Tensor<double> r = random_tensor(rng, 4, 7);
    softmax_rows(r, y = Tensor<double>(4, 7));
    for (int i = 0; i < 4; ++i) {
        double s = 0;
        for (int j = 0; j < 7; ++j) s += y.at(i, j);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("layer norm of a constant row is pure shift") {
    Tensor<double> x(1, 8), gamma(1, 8), beta(1, 8), y(1, 8);
    for (auto& v : x.data) v = 3.7;
    for (auto& v : gamma.data) v = 2.0;
    for (auto& v : beta.data) v = 0.5;
    LayerNormCache<double> cache;
    layer_norm(x, gamma, beta, y, cache);
    for (auto v : y.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("cross entropy closed forms") {
    Tensor<double> logits(4, 66);
    std::vector<int> targets{1, 2, 3, 4};
    std::vector<std::uint8_t> mask{1, 1, 1, 1};
    CHECK(cross_entropy<double>(logits, targets, mask, nullptr) ==
          doctest::Approx(std::log(66.0)).epsilon(1e-9));
    // near-one-hot logits -> near-zero loss
    for (int i = 0; i < 4; ++i) logits.at(i, targets[i]) = 50.0;
    CHECK(cross_entropy<double>(logits, targets, mask, nullptr) < 1e-6);
    // all masked
    std::vector<std::uint8_t> none{0, 0, 0, 0};
    CHECK_THROWS_AS(cross_entropy<double>(logits, targets, none, nullptr), AllMasked);
}

TEST_CASE("matmul gradients match central differences") {
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        Rng rng(trial + 10);
        Tensor<double> a = random_tensor(rng, 4, 4);
        Tensor<double> b = random_tensor(rng, 4, 4);
        Tensor<double> w = random_tensor(rng, 4, 4);  // fixed cotangent weights
        auto loss = [&]() {
            Tensor<double> c(4, 4);
            matmul(a, b, c);
            double s = 0;
            for (std::size_t i = 0; i < c.size(); ++i) s += w.data[i] * c.data[i];
            return s;
        };
        // analytic: dA = W B^T, dB = A^T W
        Tensor<double> da(4, 4), db(4, 4);
        matmul_nt(w, b, da);
        matmul_tn(a, w, db);
        Checked checked{{"a", {&a, &da}}, {"b", {&b, &db}}};
        auto rep = grad_check(loss, checked, 1e-4);
        CHECK(rep.max_rel_error < 1e-4);
    }
}

TEST_CASE("add_bias and embedding gradients") {
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        Rng rng(trial + 50);
        Tensor<double> x = random_tensor(rng, 3, 5);
        Tensor<double> b = random_tensor(rng, 1, 5);
        Tensor<double> w = random_tensor(rng, 3, 5);
        auto loss = [&]() {
            Tensor<double> y = x;
            add_bias(y, b);
            double s = 0;
            for (std::size_t i = 0; i < y.size(); ++i) s += w.data[i] * y.data[i];
            return s;
        };
        Tensor<double> db(1, 5);
        add_bias_backward(w, db, false);
        Checked checked{{"b", {&b, &db}}};
        CHECK(grad_check(loss, checked, 1e-5).max_rel_error < 1e-4);

        Tensor<double> table = random_tensor(rng, 6, 4);
        std::vector<int> ids{2, 0, 5, 2};
        Tensor<double> wy = random_tensor(rng, 4, 4);
        auto eloss = [&]() {
            Tensor<double> y(4, 4);
            embedding_lookup(table, ids, y);
            double s = 0;
            for (std::size_t i = 0; i < y.size(); ++i) s += wy.data[i] * y.data[i];
            return s;
        };
        Tensor<double> dtable(6, 4);
        embedding_backward(wy, ids, dtable);
        Checked echecked{{"table", {&table, &dtable}}};
        CHECK(grad_check(eloss, echecked, 1e-5).max_rel_error < 1e-4);
    }
}

TEST_CASE("layer norm gradients") {
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        Rng rng(trial + 100);
        Tensor<double> x = random_tensor(rng, 3, 6);
        Tensor<double> gamma = random_tensor(rng, 1, 6, 0.5);
        Tensor<double> beta = random_tensor(rng, 1, 6, 0.5);
        Tensor<double> w = random_tensor(rng, 3, 6);
        auto loss = [&]() {
            Tensor<double> y(3, 6);
            LayerNormCache<double> c;
            layer_norm(x, gamma, beta, y, c);
            double s = 0;
            for (std::size_t i = 0; i < y.size(); ++i) s += w.data[i] * y.data[i];
            return s;
        };
        Tensor<double> y(3, 6);
        LayerNormCache<double> cache;
        layer_norm(x, gamma, beta, y, cache);
        Tensor<double> dx(3, 6), dgamma(1, 6), dbeta(1, 6);
        layer_norm_backward(w, x, gamma, cache, dx, dgamma, dbeta);
        Checked checked{{"x", {&x, &dx}},
                        {"gamma", {&gamma, &dgamma}},
                        {"beta", {&beta, &dbeta}}};
        CHECK(grad_check(loss, checked, 1e-5).max_rel_error < 1e-3);
    }
}

TEST_CASE("gelu and softmax gradients") {
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        Rng rng(trial + 200);
        Tensor<double> x = random_tensor(rng, 2, 5);
        Tensor<double> w = random_tensor(rng, 2, 5);
        auto gloss = [&]() {
            Tensor<double> y(2, 5);
            gelu(x, y);
            double s = 0;
            for (std::size_t i = 0; i < y.size(); ++i) s += w.data[i] * y.data[i];
            return s;
        };
        Tensor<double> dx(2, 5);
        gelu_backward(w, x, dx);
        Checked gc{{"x", {&x, &dx}}};
        CHECK(grad_check(gloss, gc, 1e-5).max_rel_error < 1e-3);

        auto sloss = [&]() {
            Tensor<double> y(2, 5);
            softmax_rows(x, y);
            double s = 0;
            for (std::size_t i = 0; i < y.size(); ++i) s += w.data[i] * y.data[i];
            return s;
        };
        Tensor<double> y(2, 5), dsx(2, 5);
        softmax_rows(x, y);
        softmax_backward(w, y, dsx);
        Checked sc{{"x", {&x, &dsx}}};
        CHECK(grad_check(sloss, sc, 1e-5).max_rel_error < 1e-3);
    }
}

TEST_CASE("causal attention gradients") {
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        Rng rng(trial + 300);
        const int t_len = 5, hd = 8;
        Tensor<double> q = random_tensor(rng, t_len, hd);
        Tensor<double> k = random_tensor(rng, t_len, hd);
        Tensor<double> v = random_tensor(rng, t_len, hd);
        Tensor<double> w = random_tensor(rng, t_len, hd);
        auto loss = [&]() {
            Tensor<double> o(t_len, hd);
            AttentionCache<double> c;
            causal_attention(q, k, v, o, c);
            double s = 0;
            for (std::size_t i = 0; i < o.size(); ++i) s += w.data[i] * o.data[i];
            return s;
        };
        Tensor<double> o(t_len, hd);
        AttentionCache<double> cache;
        causal_attention(q, k, v, o, cache);
        Tensor<double> dq(t_len, hd), dk(t_len, hd), dv(t_len, hd);
        causal_attention_backward(w, q, k, v, cache, dq, dk, dv);
        Checked checked{{"q", {&q, &dq}}, {"k", {&k, &dk}}, {"v", {&v, &dv}}};
        CHECK(grad_check(loss, checked, 1e-5).max_rel_error < 1e-3);
    }
}

TEST_CASE("causal attention: future positions cannot affect the past") {
    Rng rng(7);
    const int t_len = 6, hd = 4;
    Tensor<double> q = random_tensor(rng, t_len, hd);
    Tensor<double> k = random_tensor(rng, t_len, hd);
    Tensor<double> v = random_tensor(rng, t_len, hd);
    Tensor<double> o1(t_len, hd), o2(t_len, hd);
    AttentionCache<double> c;
    causal_attention(q, k, v, o1, c);
    // perturb everything at position 4 and 5
    for (int p = 4; p < 6; ++p)
        for (int d = 0; d < hd; ++d) {
            q.at(p, d) += 10;
            k.at(p, d) -= 3;
            v.at(p, d) *= -2;
        }
    causal_attention(q, k, v, o2, c);
    for (int p = 0; p < 4; ++p)
        for (int d = 0; d < hd; ++d) CHECK(o1.at(p, d) == o2.at(p, d));
}

TEST_CASE("cross entropy gradient") {
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        Rng rng(trial + 400);
        Tensor<double> logits = random_tensor(rng, 4, 9);
        std::vector<int> targets{1, 0, 8, 4};
        std::vector<std::uint8_t> mask{1, 0, 1, 1};
        auto loss = [&]() {
            return cross_entropy<double>(logits, targets, mask, nullptr);
        };
        Tensor<double> dlogits(4, 9);
        cross_entropy<double>(logits, targets, mask, &dlogits);
        Checked checked{{"logits", {&logits, &dlogits}}};
        CHECK(grad_check(loss, checked, 1e-5).max_rel_error < 1e-3);
    }
}

TEST_CASE("adam closed forms") {
    ParamStoreT<double> store;
    store.add("w", 1, 4);
    // zero gradient -> no movement
    adam_step(store, 1e-2, 0.9, 0.999, 1e-8, 1);
    for (auto v : store.value("w").data) CHECK(v == 0.0);
    // constant gradient, first step -> update magnitude ~ lr
    for (auto& g : store.grad("w").data) g = 3.0;
    adam_step(store, 1e-2, 0.9, 0.999, 1e-8, 1);
    for (auto v : store.value("w").data)
        CHECK(v == doctest::Approx(-1e-2).epsilon(1e-4));
    // gradients zeroed after the step
    for (auto g : store.grad("w").data) CHECK(g == 0.0);
}

TEST_CASE("adam is deterministic") {
    auto run = [] {
        ParamStoreT<double> s;
        s.add("w", 2, 2);
        Rng rng(5);
        for (auto& v : s.value("w").data) v = rng.normal();
        for (long step = 1; step <= 10; ++step) {
            for (std::size_t i = 0; i < 4; ++i)
                s.grad("w").data[i] = s.value("w").data[i] * 0.3;
            adam_step(s, 1e-3, 0.9, 0.999, 1e-8, step);
        }
        return s.value("w").data;
    };
    CHECK(run() == run());
}

TEST_CASE("composed two-layer network end-to-end gradient") {
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        Rng rng(trial + 500);
        Tensor<double> x = random_tensor(rng, 3, 4);
        Tensor<double> w1 = random_tensor(rng, 4, 6, 0.5);
        Tensor<double> b1 = random_tensor(rng, 1, 6, 0.1);
        Tensor<double> w2 = random_tensor(rng, 6, 5, 0.5);
        std::vector<int> targets{0, 3, 2};
        std::vector<std::uint8_t> mask{1, 1, 1};
        auto loss = [&]() {
            Tensor<double> h(3, 6), a(3, 6), logits(3, 5);
            matmul(x, w1, h);
            add_bias(h, b1);
            gelu(h, a);
            matmul(a, w2, logits);
            return cross_entropy<double>(logits, targets, mask, nullptr);
        };
        // analytic
        Tensor<double> h(3, 6), a(3, 6), logits(3, 5);
        matmul(x, w1, h);
        add_bias(h, b1);
        gelu(h, a);
        matmul(a, w2, logits);
        Tensor<double> dlogits(3, 5);
        cross_entropy<double>(logits, targets, mask, &dlogits);
        Tensor<double> da(3, 6), dw2(6, 5), dh(3, 6), dw1(4, 6), db1(1, 6);
        matmul_nt(dlogits, w2, da);
        matmul_tn(a, dlogits, dw2);
        gelu_backward(da, h, dh);
        matmul_tn(x, dh, dw1);
        add_bias_backward(dh, db1, false);
        Checked checked{{"w1", {&w1, &dw1}},
                        {"b1", {&b1, &db1}},
                        {"w2", {&w2, &dw2}}};
        CHECK(grad_check(loss, checked, 1e-5).max_rel_error < 1e-3);
    }
}
