#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace owml {

struct ShapeMismatch : std::runtime_error {
    explicit ShapeMismatch(const std::string& what) : std::runtime_error(what) {}
};
struct NonFiniteValue : std::runtime_error {
    explicit NonFiniteValue(const std::string& what) : std::runtime_error(what) {}
};

// Row-major 2-D tensor. Parameters and activations are float; gradient
// checking instantiates the same kernels at double. Reductions always
// accumulate in double.
template <typename T>
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), data(std::size_t(r) * c, T(0)) {}

    T* row(int i) { return data.data() + std::size_t(i) * cols; }
    const T* row(int i) const { return data.data() + std::size_t(i) * cols; }
    T& at(int r, int c) { return data[std::size_t(r) * cols + c]; }
    T at(int r, int c) const { return data[std::size_t(r) * cols + c]; }
    std::size_t size() const { return data.size(); }
    void zero() { std::fill(data.begin(), data.end(), T(0)); }

    bool same_shape(const Tensor& o) const {
        return rows == o.rows && cols == o.cols;
    }
};

using Tensor2D = Tensor<float>;

template <typename T>
inline void require_shape(const Tensor<T>& t, int r, int c, const char* what) {
    if (t.rows != r || t.cols != c)
        throw ShapeMismatch(std::string(what) + ": expected " + std::to_string(r) +
                            "x" + std::to_string(c) + ", got " +
                            std::to_string(t.rows) + "x" + std::to_string(t.cols));
}

template <typename T>
inline void check_finite(const Tensor<T>& t, const char* what) {
    for (T v : t.data)
        if (!std::isfinite(double(v))) throw NonFiniteValue(what);
}

// ---------------------------------------------------------------------------
// Matrix products. Inner accumulation is double regardless of T; the k-order
// is fixed so results are bit-stable run to run.
// ---------------------------------------------------------------------------

namespace gemm {

// Tiled core: C(m x n) = A(m x k) B(k x n), optionally accumulating into C.
// Two output rows and a 32-wide column tile stay in double registers; the
// k-order is fixed so results are bit-stable.
template <typename T>
void nn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    constexpr int kTile = 32;
    int i = 0;
    for (; i + 1 < m; i += 2) {
        const T* a0 = a + std::size_t(i) * k;
        const T* a1 = a0 + k;
        T* c0 = c + std::size_t(i) * n;
        T* c1 = c0 + n;
        int j0 = 0;
        for (; j0 + kTile <= n; j0 += kTile) {
            double acc0[kTile] = {0}, acc1[kTile] = {0};
            for (int kk = 0; kk < k; ++kk) {
                const double av0 = double(a0[kk]);
                const double av1 = double(a1[kk]);
                const T* br = b + std::size_t(kk) * n + j0;
                for (int j = 0; j < kTile; ++j) {
                    const double bv = double(br[j]);
                    acc0[j] += av0 * bv;
                    acc1[j] += av1 * bv;
                }
            }
            for (int j = 0; j < kTile; ++j) {
                if (accumulate) {
                    c0[j0 + j] = T(double(c0[j0 + j]) + acc0[j]);
                    c1[j0 + j] = T(double(c1[j0 + j]) + acc1[j]);
                } else {
                    c0[j0 + j] = T(acc0[j]);
                    c1[j0 + j] = T(acc1[j]);
                }
            }
        }
        for (; j0 < n; ++j0) {
            double s0 = 0, s1 = 0;
            for (int kk = 0; kk < k; ++kk) {
                const double bv = double(b[std::size_t(kk) * n + j0]);
                s0 += double(a0[kk]) * bv;
                s1 += double(a1[kk]) * bv;
            }
            c0[j0] = accumulate ? T(double(c0[j0]) + s0) : T(s0);
            c1[j0] = accumulate ? T(double(c1[j0]) + s1) : T(s1);
        }
    }
    for (; i < m; ++i) {
        const T* a0 = a + std::size_t(i) * k;
        T* c0 = c + std::size_t(i) * n;
        for (int j0 = 0; j0 < n; ++j0) {
            double s = 0;
            for (int kk = 0; kk < k; ++kk)
                s += double(a0[kk]) * double(b[std::size_t(kk) * n + j0]);
            c0[j0] = accumulate ? T(double(c0[j0]) + s) : T(s);
        }
    }
}

template <typename T>
std::vector<T> transpose(const T* a, int rows, int cols) {
    std::vector<T> out(std::size_t(rows) * cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            out[std::size_t(j) * rows + i] = a[std::size_t(i) * cols + j];
    return out;
}

}  // namespace gemm

// C = A B (+C if accumulate)
template <typename T>
inline void matmul(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c,
                   bool accumulate = false) {
    if (a.cols != b.rows) throw ShapeMismatch("matmul: inner dims");
    require_shape(c, a.rows, b.cols, "matmul out");
    gemm::nn(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.cols,
             accumulate);
}

// C = A B^T (+C)
template <typename T>
inline void matmul_nt(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c,
                      bool accumulate = false) {
    if (a.cols != b.cols) throw ShapeMismatch("matmul_nt: inner dims");
    require_shape(c, a.rows, b.rows, "matmul_nt out");
    const auto bt = gemm::transpose(b.data.data(), b.rows, b.cols);
    gemm::nn(a.data.data(), bt.data(), c.data.data(), a.rows, a.cols, b.rows,
             accumulate);
}

// C = A^T B (+C)
template <typename T>
inline void matmul_tn(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c,
                      bool accumulate = false) {
    if (a.rows != b.rows) throw ShapeMismatch("matmul_tn: inner dims");
    require_shape(c, a.cols, b.cols, "matmul_tn out");
    const auto at = gemm::transpose(a.data.data(), a.rows, a.cols);
    gemm::nn(at.data(), b.data.data(), c.data.data(), a.cols, a.rows, b.cols,
             accumulate);
}

// ---------------------------------------------------------------------------
// Elementwise / rowwise ops, forward and backward
// ---------------------------------------------------------------------------

template <typename T>
inline void add_bias(Tensor<T>& x, const Tensor<T>& b) {
    require_shape(b, 1, x.cols, "add_bias");
    for (int i = 0; i < x.rows; ++i) {
        T* r = x.row(i);
        const T* br = b.row(0);
        for (int j = 0; j < x.cols; ++j) r[j] += br[j];
    }
}

template <typename T>
inline void add_bias_backward(const Tensor<T>& dy, Tensor<T>& db,
                              bool accumulate = true) {
    require_shape(db, 1, dy.cols, "add_bias_backward");
    std::vector<double> acc(dy.cols, 0.0);
    for (int i = 0; i < dy.rows; ++i) {
        const T* r = dy.row(i);
        for (int j = 0; j < dy.cols; ++j) acc[j] += double(r[j]);
    }
    for (int j = 0; j < dy.cols; ++j)
        db.at(0, j) = accumulate ? T(double(db.at(0, j)) + acc[j]) : T(acc[j]);
}

template <typename T>
inline void embedding_lookup(const Tensor<T>& table, std::span<const int> ids,
                             Tensor<T>& out) {
    require_shape(out, int(ids.size()), table.cols, "embedding_lookup out");
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table.rows)
            throw ShapeMismatch("embedding_lookup: id out of range");
        const T* src = table.row(ids[i]);
        std::copy(src, src + table.cols, out.row(int(i)));
    }
}

template <typename T>
inline void embedding_backward(const Tensor<T>& dy, std::span<const int> ids,
                               Tensor<T>& dtable) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const T* g = dy.row(int(i));
        T* dst = dtable.row(ids[i]);
        for (int j = 0; j < dy.cols; ++j) dst[j] += g[j];
    }
}

// Rowwise layer norm. Caches mean and reciprocal std per row for backward.
template <typename T>
struct LayerNormCache {
    std::vector<T> mean, rstd;
};

template <typename T>
inline void layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                       const Tensor<T>& beta, Tensor<T>& y,
                       LayerNormCache<T>& cache, double eps = 1e-5) {
    require_shape(gamma, 1, x.cols, "layer_norm gamma");
    require_shape(beta, 1, x.cols, "layer_norm beta");
    require_shape(y, x.rows, x.cols, "layer_norm out");
    cache.mean.resize(x.rows);
    cache.rstd.resize(x.rows);
    for (int i = 0; i < x.rows; ++i) {
        const T* r = x.row(i);
        double m = 0.0;
        for (int j = 0; j < x.cols; ++j) m += double(r[j]);
        m /= x.cols;
        double v = 0.0;
        for (int j = 0; j < x.cols; ++j) {
            const double d = double(r[j]) - m;
            v += d * d;
        }
        v /= x.cols;
        const double rstd = 1.0 / std::sqrt(v + eps);
        cache.mean[i] = T(m);
        cache.rstd[i] = T(rstd);
        T* yr = y.row(i);
        for (int j = 0; j < x.cols; ++j)
            yr[j] = T((double(r[j]) - m) * rstd * double(gamma.at(0, j)) +
                      double(beta.at(0, j)));
    }
}

template <typename T>
inline void layer_norm_backward(const Tensor<T>& dy, const Tensor<T>& x,
                                const Tensor<T>& gamma,
                                const LayerNormCache<T>& cache, Tensor<T>& dx,
                                Tensor<T>& dgamma, Tensor<T>& dbeta) {
    const int n = x.cols;
    for (int i = 0; i < x.rows; ++i) {
        const T* xr = x.row(i);
        const T* dyr = dy.row(i);
        T* dxr = dx.row(i);
        const double m = double(cache.mean[i]);
        const double rstd = double(cache.rstd[i]);
        // xhat = (x - m) * rstd ; dy_g = dy * gamma
        double sum_dg = 0.0, sum_dg_xhat = 0.0;
        for (int j = 0; j < n; ++j) {
            const double xhat = (double(xr[j]) - m) * rstd;
            const double dg = double(dyr[j]) * double(gamma.at(0, j));
            sum_dg += dg;
            sum_dg_xhat += dg * xhat;
        }
        for (int j = 0; j < n; ++j) {
            const double xhat = (double(xr[j]) - m) * rstd;
            const double dg = double(dyr[j]) * double(gamma.at(0, j));
            dxr[j] = T(rstd * (dg - sum_dg / n - xhat * sum_dg_xhat / n));
            dgamma.at(0, j) = T(double(dgamma.at(0, j)) + double(dyr[j]) * xhat);
            dbeta.at(0, j) = T(double(dbeta.at(0, j)) + double(dyr[j]));
        }
    }
}

namespace detail {

// Odd rational approximation of tanh on [-9, 9], saturating outside. The
// branch-free form auto-vectorizes, unlike libm's tanhf; max error is a few
// float ulps, which is well below the training noise floor.
inline float tanh_approx(float x) {
    const float v = std::clamp(x, -9.0f, 9.0f);
    const float x2 = v * v;
    float p = -2.76076847742355e-16f;
    p = p * x2 + 2.00018790482477e-13f;
    p = p * x2 + -8.60467152213735e-11f;
    p = p * x2 + 5.12229709037114e-08f;
    p = p * x2 + 1.48572235717979e-05f;
    p = p * x2 + 6.37261928875436e-04f;
    p = p * x2 + 4.89352455891786e-03f;
    p *= v;
    float q = 1.19825839466702e-06f;
    q = q * x2 + 1.18534705686654e-04f;
    q = q * x2 + 2.26843463243900e-03f;
    q = q * x2 + 4.89352518554385e-03f;
    return p / q;
}

template <typename T>
inline T fast_tanh(T x) {
    if constexpr (std::is_same_v<T, float>)
        return tanh_approx(x);
    else
        return std::tanh(x);
}

}  // namespace detail

// tanh-approximation GELU (GPT-2 convention)
template <typename T>
inline void gelu(const Tensor<T>& x, Tensor<T>& y) {
    require_shape(y, x.rows, x.cols, "gelu out");
    const T c = T(0.7978845608028654);  // sqrt(2/pi)
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T v = x.data[i];
        const T u = c * (v + T(0.044715) * v * v * v);
        y.data[i] = T(0.5) * v * (T(1) + detail::fast_tanh(u));
    }
}

template <typename T>
inline void gelu_backward(const Tensor<T>& dy, const Tensor<T>& x, Tensor<T>& dx,
                          bool accumulate = false) {
    const T c = T(0.7978845608028654);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T v = x.data[i];
        const T u = c * (v + T(0.044715) * v * v * v);
        const T t = detail::fast_tanh(u);
        const T du = c * (T(1) + T(3 * 0.044715) * v * v);
        const T g = T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * du;
        const T r = dy.data[i] * g;
        dx.data[i] = accumulate ? dx.data[i] + r : r;
    }
}

template <typename T>
inline void softmax_rows(const Tensor<T>& x, Tensor<T>& y) {
    require_shape(y, x.rows, x.cols, "softmax out");
    for (int i = 0; i < x.rows; ++i) {
        const T* r = x.row(i);
        T* yr = y.row(i);
        double mx = -1e300;
        for (int j = 0; j < x.cols; ++j) mx = std::max(mx, double(r[j]));
        double sum = 0.0;
        for (int j = 0; j < x.cols; ++j) {
            const double e = std::exp(double(r[j]) - mx);
            yr[j] = T(e);
            sum += e;
        }
        const double inv = 1.0 / sum;
        for (int j = 0; j < x.cols; ++j) yr[j] = T(double(yr[j]) * inv);
    }
}

// dx = y ∘ (dy − rowsum(dy ∘ y)), with y = softmax(x)
template <typename T>
inline void softmax_backward(const Tensor<T>& dy, const Tensor<T>& y,
                             Tensor<T>& dx) {
    for (int i = 0; i < y.rows; ++i) {
        const T* yr = y.row(i);
        const T* dyr = dy.row(i);
        T* dxr = dx.row(i);
        double dot = 0.0;
        for (int j = 0; j < y.cols; ++j) dot += double(dyr[j]) * double(yr[j]);
        for (int j = 0; j < y.cols; ++j)
            dxr[j] = T(double(yr[j]) * (double(dyr[j]) - dot));
    }
}

// ---------------------------------------------------------------------------
// Single-head causal attention over one sequence.
// q, k, v: (T x d_head). Caches the probability matrix for backward.
// ---------------------------------------------------------------------------

template <typename T>
struct AttentionCache {
    Tensor<T> probs;  // (T x T) lower-triangular row-softmax
};

template <typename T>
inline void causal_attention(const Tensor<T>& q, const Tensor<T>& k,
                             const Tensor<T>& v, Tensor<T>& out,
                             AttentionCache<T>& cache) {
    if (!q.same_shape(k) || !q.same_shape(v))
        throw ShapeMismatch("causal_attention: q/k/v shapes");
    require_shape(out, q.rows, q.cols, "causal_attention out");
    const int t_len = q.rows;
    const int hd = q.cols;
    const double scale = 1.0 / std::sqrt(double(hd));
    cache.probs = Tensor<T>(t_len, t_len);
    std::vector<double> s(t_len);
    std::vector<double> oacc(hd);
    for (int i = 0; i < t_len; ++i) {
        const T* qr = q.row(i);
        // scores over positions 0..i only
        double mx = -1e300;
        for (int j = 0; j <= i; ++j) {
            const T* kr = k.row(j);
            double acc = 0.0;
            for (int d = 0; d < hd; ++d) acc += double(qr[d]) * double(kr[d]);
            s[j] = acc * scale;
            mx = std::max(mx, s[j]);
        }
        double sum = 0.0;
        T* pr = cache.probs.row(i);
        for (int j = 0; j <= i; ++j) {
            const T e = std::exp(T(s[j] - mx));
            pr[j] = e;
            sum += double(e);
        }
        const T inv = T(1.0 / sum);
        for (int j = 0; j <= i; ++j) pr[j] *= inv;
        std::fill(oacc.begin(), oacc.end(), 0.0);
        for (int j = 0; j <= i; ++j) {
            const double p = double(pr[j]);
            const T* vr = v.row(j);
            for (int d = 0; d < hd; ++d) oacc[d] += p * double(vr[d]);
        }
        T* orow = out.row(i);
        for (int d = 0; d < hd; ++d) orow[d] = T(oacc[d]);
    }
}

template <typename T>
inline void causal_attention_backward(const Tensor<T>& dout, const Tensor<T>& q,
                                      const Tensor<T>& k, const Tensor<T>& v,
                                      const AttentionCache<T>& cache,
                                      Tensor<T>& dq, Tensor<T>& dk, Tensor<T>& dv) {
    const int t_len = q.rows;
    const int hd = q.cols;
    const double scale = 1.0 / std::sqrt(double(hd));
    dq.zero();
    dk.zero();
    dv.zero();
    std::vector<double> dp(t_len), ds(t_len);
    for (int i = 0; i < t_len; ++i) {
        const T* pr = cache.probs.row(i);
        const T* dor = dout.row(i);
        // dV += P^T dO ; dP = dO V^T
        double dot = 0.0;
        for (int j = 0; j <= i; ++j) {
            double acc = 0.0;
            const T* vr = v.row(j);
            T* dvr = dv.row(j);
            for (int d = 0; d < hd; ++d) {
                acc += double(dor[d]) * double(vr[d]);
                dvr[d] = T(double(dvr[d]) + double(pr[j]) * double(dor[d]));
            }
            dp[j] = acc;
            dot += acc * double(pr[j]);
        }
        // softmax backward within the row, then through the scaled dot
        const T* qr = q.row(i);
        T* dqr = dq.row(i);
        for (int j = 0; j <= i; ++j) {
            ds[j] = double(pr[j]) * (dp[j] - dot) * scale;
            const T* kr = k.row(j);
            T* dkr = dk.row(j);
            for (int d = 0; d < hd; ++d) {
                dqr[d] = T(double(dqr[d]) + ds[j] * double(kr[d]));
                dkr[d] = T(double(dkr[d]) + ds[j] * double(qr[d]));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Cross entropy over logits rows, with an optional mask. Returns mean NLL
// over unmasked rows; dlogits is (softmax − onehot)/n_unmasked.
// ---------------------------------------------------------------------------

struct AllMasked : std::runtime_error {
    AllMasked() : std::runtime_error("cross_entropy: every position is masked") {}
};

template <typename T>
inline double cross_entropy(const Tensor<T>& logits, std::span<const int> targets,
                            std::span<const std::uint8_t> mask, Tensor<T>* dlogits) {
    if (int(targets.size()) != logits.rows)
        throw ShapeMismatch("cross_entropy: target count");
    int n_active = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) n_active += mask[i] ? 1 : 0;
    if (n_active == 0) throw AllMasked();
    double loss = 0.0;
    if (dlogits) dlogits->zero();
    for (int i = 0; i < logits.rows; ++i) {
        if (!mask[i]) continue;
        const T* r = logits.row(i);
        double mx = -1e300;
        for (int j = 0; j < logits.cols; ++j) mx = std::max(mx, double(r[j]));
        double sum = 0.0;
        for (int j = 0; j < logits.cols; ++j) sum += std::exp(double(r[j]) - mx);
        const double lse = mx + std::log(sum);
        loss += lse - double(r[targets[i]]);
        if (dlogits) {
            T* dr = dlogits->row(i);
            for (int j = 0; j < logits.cols; ++j) {
                double p = std::exp(double(r[j]) - lse);
                if (j == targets[i]) p -= 1.0;
                dr[j] = T(p / n_active);
            }
        }
    }
    return loss / n_active;
}

// ---------------------------------------------------------------------------
// Parameter store with paired gradient and Adam moment buffers
// ---------------------------------------------------------------------------

template <typename T>
struct ParamT {
    std::string name;
    Tensor<T> value, grad, m, v;
};

template <typename T>
struct ParamStoreT {
    std::vector<ParamT<T>> params;
    std::unordered_map<std::string, int> index;

    Tensor<T>& add(const std::string& name, int rows, int cols) {
        if (index.count(name)) throw std::runtime_error("duplicate param " + name);
        index[name] = int(params.size());
        params.push_back({name, Tensor<T>(rows, cols), Tensor<T>(rows, cols),
                          Tensor<T>(rows, cols), Tensor<T>(rows, cols)});
        return params.back().value;
    }
    ParamT<T>& get(const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) throw std::runtime_error("unknown param " + name);
        return params[it->second];
    }
    const ParamT<T>& get(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) throw std::runtime_error("unknown param " + name);
        return params[it->second];
    }
    bool has(const std::string& name) const { return index.count(name) != 0; }
    Tensor<T>& value(const std::string& name) { return get(name).value; }
    const Tensor<T>& value(const std::string& name) const { return get(name).value; }
    Tensor<T>& grad(const std::string& name) { return get(name).grad; }
    void zero_grad() {
        for (auto& p : params) p.grad.zero();
    }
    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& p : params) n += p.value.size();
        return n;
    }
};

using ParamStore = ParamStoreT<float>;

// Bias-corrected Adam, in place; zeroes gradients afterwards.
template <typename T>
inline void adam_step(ParamStoreT<T>& store, double lr, double beta1,
                      double beta2, double eps, long step_index) {
    if (step_index < 1) throw std::invalid_argument("adam step_index starts at 1");
    const double bc1 = 1.0 - std::pow(beta1, double(step_index));
    const double bc2 = 1.0 - std::pow(beta2, double(step_index));
    for (auto& p : store.params) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = double(p.grad.data[i]);
            const double m = beta1 * double(p.m.data[i]) + (1.0 - beta1) * g;
            const double v = beta2 * double(p.v.data[i]) + (1.0 - beta2) * g * g;
            p.m.data[i] = T(m);
            p.v.data[i] = T(v);
            const double upd = lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
            const double nv = double(p.value.data[i]) - upd;
            if (!std::isfinite(nv)) throw NonFiniteValue("adam update: " + p.name);
            p.value.data[i] = T(nv);
        }
        p.grad.zero();
    }
}

// ---------------------------------------------------------------------------
// Central-difference gradient checker (runs at double precision)
// ---------------------------------------------------------------------------

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    bool within(double tol) const { return max_rel_error < tol; }
};

// loss_fn re-evaluates the scalar loss from the current contents of the
// checked tensors; analytic gradients are sampled before any perturbation.
inline GradCheckReport grad_check(
    const std::function<double()>& loss_fn,
    const std::vector<std::pair<std::string, std::pair<Tensor<double>*, Tensor<double>*>>>&
        checked,
    double epsilon) {
    if (epsilon <= 0) throw std::invalid_argument("grad_check: epsilon must be > 0");
    GradCheckReport report;
    for (const auto& [name, pg] : checked) {
        Tensor<double>* param = pg.first;
        Tensor<double>* analytic = pg.second;
        GradCheckEntry entry{name, 0.0};
        for (std::size_t i = 0; i < param->size(); ++i) {
            const double saved = param->data[i];
            param->data[i] = saved + epsilon;
            const double lp = loss_fn();
            param->data[i] = saved - epsilon;
            const double lm = loss_fn();
            param->data[i] = saved;
            const double numeric = (lp - lm) / (2.0 * epsilon);
            const double a = analytic->data[i];
            const double rel =
                std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
            entry.max_rel_error = std::max(entry.max_rel_error, rel);
        }
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace owml
