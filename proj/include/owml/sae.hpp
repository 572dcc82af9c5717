#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "owml/io.hpp"
#include "owml/rng.hpp"
#include "owml/tensor.hpp"

namespace owml {

// Sparse autoencoder over residual-stream activations:
//   h    = relu(W_enc · (x − mu − b_dec) + b_enc)
//   x̂    = W_dec · h + b_dec + mu
//   L    = ‖x − x̂‖² + λ‖h‖₁   (batch loss is the mean over rows)
// mu is a per-layer centering vector captured from the training activations
// (zero by default, so the hand formulas above hold verbatim). The d_latent
// dictionary vectors — stored as the rows of W_dec — are renormalized to unit
// length after every optimizer step so the L1 penalty cannot be gamed by
// rescaling.
template <typename T>
struct SAEModelT {
    int d_in = 0;
    int d_latent = 0;
    int layer = 0;
    T lambda = T(0.1);
    std::uint64_t seed = 0;
    ParamStoreT<T> params;  // W_enc (d_in × d_latent), b_enc, W_dec (d_latent × d_in), b_dec
    Tensor<T> mu;           // (1 × d_in) centering vector

    Tensor<T>& W_enc() { return params.value("W_enc"); }
    Tensor<T>& b_enc() { return params.value("b_enc"); }
    Tensor<T>& W_dec() { return params.value("W_dec"); }
    Tensor<T>& b_dec() { return params.value("b_dec"); }
    const Tensor<T>& W_enc() const { return params.value("W_enc"); }
    const Tensor<T>& b_enc() const { return params.value("b_enc"); }
    const Tensor<T>& W_dec() const { return params.value("W_dec"); }
    const Tensor<T>& b_dec() const { return params.value("b_dec"); }
};

using SAEModel = SAEModelT<float>;

namespace saedetail {

template <typename T>
inline void renorm_decoder_rows(Tensor<T>& w_dec) {
    for (int i = 0; i < w_dec.rows; ++i) {
        T* r = w_dec.row(i);
        double n2 = 0.0;
        for (int j = 0; j < w_dec.cols; ++j) n2 += double(r[j]) * double(r[j]);
        const double n = std::sqrt(n2);
        if (n == 0.0) throw NonFiniteValue("sae: zero decoder row");
        for (int j = 0; j < w_dec.cols; ++j) r[j] = T(double(r[j]) / n);
    }
}

}  // namespace saedetail

template <typename T = float>
inline SAEModelT<T> init_sae(int d_in, int d_latent, T lambda, int layer,
                             std::uint64_t seed) {
    if (d_in < 1 || d_latent < 1)
        throw std::invalid_argument("sae: d_in and d_latent must be >= 1");
    SAEModelT<T> m;
    m.d_in = d_in;
    m.d_latent = d_latent;
    m.layer = layer;
    m.lambda = lambda;
    m.seed = seed;
    m.mu = Tensor<T>(1, d_in);
    Rng rng(seed);
    m.params.add("W_enc", d_in, d_latent);
    m.params.add("W_dec", d_latent, d_in);
    m.params.add("b_enc", 1, d_latent);
    m.params.add("b_dec", 1, d_in);
    const double scale = 1.0 / std::sqrt(double(d_in));
    for (auto& v : m.W_enc().data) v = T(rng.normal() * scale);
    for (auto& v : m.W_dec().data) v = T(rng.normal() * scale);
    saedetail::renorm_decoder_rows(m.W_dec());
    return m;
}

// Batch encode: X is (rows × d_in), H becomes (rows × d_latent).
template <typename T>
inline void encode(const SAEModelT<T>& m, const Tensor<T>& X, Tensor<T>& H) {
    if (X.cols != m.d_in) throw ShapeMismatch("sae encode: input width");
    Tensor<T> xc(X.rows, X.cols);
    const auto& bd = m.b_dec();
    for (int i = 0; i < X.rows; ++i)
        for (int j = 0; j < X.cols; ++j)
            xc.at(i, j) = X.at(i, j) - m.mu.at(0, j) - bd.at(0, j);
    H = Tensor<T>(X.rows, m.d_latent);
    matmul(xc, m.W_enc(), H);
    add_bias(H, m.b_enc());
    for (auto& v : H.data) v = std::max(v, T(0));
}

inline std::vector<float> encode(const SAEModel& m, const std::vector<float>& x) {
    if (int(x.size()) != m.d_in) throw ShapeMismatch("sae encode: input width");
    Tensor2D X(1, m.d_in);
    X.data = x;
    Tensor2D H;
    encode(m, X, H);
    return H.data;
}

// Batch decode: H is (rows × d_latent), Xhat becomes (rows × d_in).
template <typename T>
inline void decode(const SAEModelT<T>& m, const Tensor<T>& H, Tensor<T>& Xhat) {
    if (H.cols != m.d_latent) throw ShapeMismatch("sae decode: latent width");
    Xhat = Tensor<T>(H.rows, m.d_in);
    matmul(H, m.W_dec(), Xhat);
    const auto& bd = m.b_dec();
    for (int i = 0; i < Xhat.rows; ++i)
        for (int j = 0; j < Xhat.cols; ++j)
            Xhat.at(i, j) += bd.at(0, j) + m.mu.at(0, j);
}

inline std::vector<float> decode(const SAEModel& m, const std::vector<float>& h) {
    if (int(h.size()) != m.d_latent) throw ShapeMismatch("sae decode: latent width");
    Tensor2D H(1, m.d_latent);
    H.data = h;
    Tensor2D X;
    decode(m, H, X);
    return X.data;
}

// Mean Eq.-1 loss over the rows of X; when grad is true, parameter gradients
// are accumulated into m.params.
template <typename T>
inline double sae_loss(SAEModelT<T>& m, const Tensor<T>& X, bool grad = false) {
    const int B = X.rows;
    if (B < 1) throw std::invalid_argument("sae_loss: empty batch");
    Tensor<T> H, Xhat;
    encode(m, X, H);
    decode(m, H, Xhat);
    double loss = 0.0;
    for (int i = 0; i < B; ++i) {
        double row = 0.0;
        for (int j = 0; j < m.d_in; ++j) {
            const double r = double(Xhat.at(i, j)) - double(X.at(i, j));
            row += r * r;
        }
        for (int j = 0; j < m.d_latent; ++j)
            row += double(m.lambda) * double(H.at(i, j));
        loss += row;
    }
    loss /= B;
    if (!grad) return loss;

    Tensor<T> dxhat(B, m.d_in);
    for (int i = 0; i < B; ++i)
        for (int j = 0; j < m.d_in; ++j)
            dxhat.at(i, j) = T(2) * (Xhat.at(i, j) - X.at(i, j)) / T(B);
    // decode backward
    matmul_tn(H, dxhat, m.params.grad("W_dec"), /*accumulate=*/true);
    add_bias_backward(dxhat, m.params.grad("b_dec"), /*accumulate=*/true);
    Tensor<T> dh(B, m.d_latent);
    matmul_nt(dxhat, m.W_dec(), dh);
    // L1 penalty and relu gate
    for (int i = 0; i < B; ++i)
        for (int j = 0; j < m.d_latent; ++j) {
            dh.at(i, j) += m.lambda / T(B);
            if (H.at(i, j) <= T(0)) dh.at(i, j) = T(0);
        }
    // encode backward
    Tensor<T> xc(B, m.d_in);
    const auto& bd = m.b_dec();
    for (int i = 0; i < B; ++i)
        for (int j = 0; j < m.d_in; ++j)
            xc.at(i, j) = X.at(i, j) - m.mu.at(0, j) - bd.at(0, j);
    matmul_tn(xc, dh, m.params.grad("W_enc"), /*accumulate=*/true);
    add_bias_backward(dh, m.params.grad("b_enc"), /*accumulate=*/true);
    Tensor<T> dxc(B, m.d_in);
    matmul_nt(dh, m.W_enc(), dxc);
    auto& dbd = m.params.grad("b_dec");
    for (int i = 0; i < B; ++i)
        for (int j = 0; j < m.d_in; ++j) dbd.at(0, j) -= dxc.at(i, j);
    return loss;
}

struct SAETrainHyper {
    double lr = 1e-3;
    int batch_size = 256;
    int steps = 2000;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

// Adam on Eq. 1 with per-step decoder renormalization. The centering vector
// mu is the column mean of the training activations and is stored in the
// model, so encode/decode close over it transparently.
inline SAEModel train_sae(const ActivationSet& acts, int d_latent, float lambda,
                          const SAETrainHyper& hyper, std::uint64_t seed) {
    const Tensor2D& X = acts.vectors;
    if (X.rows < 1) throw std::invalid_argument("train_sae: no activations");
    SAEModel m = init_sae<float>(X.cols, d_latent, lambda, acts.layer, seed);
    for (int i = 0; i < X.rows; ++i)
        for (int j = 0; j < X.cols; ++j) m.mu.at(0, j) += X.at(i, j);
    for (int j = 0; j < X.cols; ++j) m.mu.at(0, j) /= float(X.rows);

    std::uint64_t batch_seed = seed ^ 0x05ae5ae5ae5ae5aeULL;
    Rng rng(splitmix64(batch_seed));
    const int B = std::min(hyper.batch_size, X.rows);
    Tensor2D batch(B, X.cols);
    for (int step = 1; step <= hyper.steps; ++step) {
        for (int i = 0; i < B; ++i) {
            const std::uint64_t r = rng.below(std::uint64_t(X.rows));
            std::copy(X.row(int(r)), X.row(int(r)) + X.cols, batch.row(i));
        }
        m.params.zero_grad();
        sae_loss(m, batch, /*grad=*/true);
        adam_step(m.params, hyper.lr, hyper.beta1, hyper.beta2, hyper.adam_eps,
                  step);
        saedetail::renorm_decoder_rows(m.W_dec());
    }
    return m;
}

// encode() applied row-wise; alignment metadata travels with the input set.
inline Tensor2D feature_activations(const SAEModel& m, const ActivationSet& acts) {
    Tensor2D H;
    encode(m, acts.vectors, H);
    return H;
}

// Held-out reconstruction quality: mean squared error per row.
inline double reconstruction_mse(const SAEModel& m, const Tensor2D& X) {
    Tensor2D H, Xhat;
    encode(m, X, H);
    decode(m, H, Xhat);
    double mse = 0.0;
    for (std::size_t i = 0; i < X.data.size(); ++i) {
        const double r = double(Xhat.data[i]) - double(X.data[i]);
        mse += r * r;
    }
    return mse / X.rows;
}

// Mean fraction of latents with h > 0 (the paper's activity criterion).
inline double mean_l0_fraction(const SAEModel& m, const Tensor2D& X) {
    Tensor2D H;
    encode(m, X, H);
    std::size_t active = 0;
    for (float v : H.data) active += (v > 0.0f);
    return double(active) / double(H.rows) / double(H.cols);
}

// Metadata floats: layer, lambda, then the seed split into four 16-bit limbs
// (f32 holds 16-bit integers exactly).
inline void save_sae(const std::string& path, const SAEModel& m) {
    std::vector<CheckpointSection> extra;
    extra.push_back({"sae.meta",
                     {1, 6},
                     {float(m.layer), m.lambda, float(m.seed & 0xffff),
                      float((m.seed >> 16) & 0xffff), float((m.seed >> 32) & 0xffff),
                      float((m.seed >> 48) & 0xffff)}});
    extra.push_back({"sae.mu", {1, std::uint32_t(m.d_in)}, m.mu.data});
    save_param_store(path, m.params, extra);
}

inline SAEModel load_sae(const std::string& path) {
    auto sections = read_checkpoint_sections(path);
    const CheckpointSection* meta = nullptr;
    const CheckpointSection* mu = nullptr;
    for (const auto& s : sections) {
        if (s.name == "sae.meta") meta = &s;
        if (s.name == "sae.mu") mu = &s;
    }
    if (!meta || meta->data.size() != 6 || !mu)
        throw FormatError("sae checkpoint: missing metadata");
    SAEModel m;
    m.layer = int(meta->data[0]);
    m.lambda = meta->data[1];
    m.seed = std::uint64_t(meta->data[2]) | (std::uint64_t(meta->data[3]) << 16) |
             (std::uint64_t(meta->data[4]) << 32) |
             (std::uint64_t(meta->data[5]) << 48);
    m.d_in = int(mu->data.size());
    m.mu = Tensor2D(1, m.d_in);
    m.mu.data = mu->data;
    for (const auto& s : sections) {
        if (s.name == "sae.meta" || s.name == "sae.mu") continue;
        if (s.dims.size() != 2) throw FormatError("sae checkpoint: bad section dims");
        auto& p = m.params.add(s.name, int(s.dims[0]), int(s.dims[1]));
        p.data = s.data;
    }
    if (!m.params.has("W_enc") || !m.params.has("W_dec") ||
        !m.params.has("b_enc") || !m.params.has("b_dec"))
        throw FormatError("sae checkpoint: missing parameter section");
    m.d_latent = m.params.value("W_enc").cols;
    return m;
}

}  // namespace owml
