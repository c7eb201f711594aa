#pragma once

#include <vector>

#include "ticap/tensor.hpp"

namespace ticap {

// limit = sqrt(6 / (fan_in + fan_out)), the usual uniform fan-based range
template <class T>
Tensor<T> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    T limit = static_cast<T>(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
    return Tensor<T>::param_uniform(std::move(shape), -limit, limit, rng);
}

// ---------------------------------------------------------------- dense

template <class T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& W, const Tensor<T>& b) {
    return add(matmul(W, x), b);
}

// ---------------------------------------------------------------- GRU

/// Gated recurrent unit parameters. W_* map input to hidden, U_* map hidden
/// to hidden, biases live inside the gate activations (candidate included).
template <class T>
struct GruParams {
    Tensor<T> Wz, Wr, Wn;  // [H x D]
    Tensor<T> Uz, Ur, Un;  // [H x H]
    Tensor<T> bz, br, bh;  // [H]
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;

    GruParams() = default;
    GruParams(std::size_t in_dim, std::size_t h_dim, Rng& rng) : input_dim(in_dim), hidden_dim(h_dim) {
        Wz = glorot_uniform<T>({h_dim, in_dim}, in_dim, h_dim, rng);
        Wr = glorot_uniform<T>({h_dim, in_dim}, in_dim, h_dim, rng);
        Wn = glorot_uniform<T>({h_dim, in_dim}, in_dim, h_dim, rng);
        Uz = glorot_uniform<T>({h_dim, h_dim}, h_dim, h_dim, rng);
        Ur = glorot_uniform<T>({h_dim, h_dim}, h_dim, h_dim, rng);
        Un = glorot_uniform<T>({h_dim, h_dim}, h_dim, h_dim, rng);
        bz = Tensor<T>::param({h_dim}, std::vector<T>(h_dim, T(0)));
        br = Tensor<T>::param({h_dim}, std::vector<T>(h_dim, T(0)));
        bh = Tensor<T>::param({h_dim}, std::vector<T>(h_dim, T(0)));
    }

    std::vector<Tensor<T>> tensors() const { return {Wz, Wr, Wn, Uz, Ur, Un, bz, br, bh}; }
};

/// One GRU step:
///   z = sigmoid(Wz x + Uz h + bz)         update gate
///   r = sigmoid(Wr x + Ur h + br)         reset gate
///   n = tanh(Wn x + Un (r (.) h) + bh)    candidate
///   h' = (1 - z) (.) h + z (.) n
/// Each component of h' lies between h and the candidate since z is in (0,1).
template <class T>
Tensor<T> gru_cell(const Tensor<T>& x, const Tensor<T>& h_prev, const GruParams<T>& p) {
    if (x.rank() != 1 || x.numel() != p.input_dim)
        throw ShapeError("gru_cell: input shape " + shape_str(x.shape()) + " does not match input_dim " +
                         std::to_string(p.input_dim));
    if (h_prev.rank() != 1 || h_prev.numel() != p.hidden_dim)
        throw ShapeError("gru_cell: state shape " + shape_str(h_prev.shape()) + " does not match hidden_dim " +
                         std::to_string(p.hidden_dim));
    Tensor<T> z = sigmoid(add(add(matmul(p.Wz, x), matmul(p.Uz, h_prev)), p.bz));
    Tensor<T> r = sigmoid(add(add(matmul(p.Wr, x), matmul(p.Ur, h_prev)), p.br));
    Tensor<T> cand = tanh_op(add(add(matmul(p.Wn, x), matmul(p.Un, mul(r, h_prev))), p.bh));
    Tensor<T> keep = sub(Tensor<T>::ones({p.hidden_dim}), z);
    return add(mul(keep, h_prev), mul(z, cand));
}

/// Runs a forward GRU over the rows of X and a backward GRU over the reversed
/// rows; output row t is concat(h_fwd[t], h_bwd[t]), shape [n x 2H].
template <class T>
Tensor<T> bigru_sequence(const Tensor<T>& X, const GruParams<T>& fwd, const GruParams<T>& bwd) {
    if (X.rank() != 2) throw ShapeError("bigru_sequence: expected [n x D], got " + shape_str(X.shape()));
    const std::size_t n = X.shape()[0];
    if (n < 1) throw ShapeError("bigru_sequence: empty sequence");
    if (fwd.hidden_dim != bwd.hidden_dim)
        throw ShapeError("bigru_sequence: direction hidden dims differ");

    std::vector<Tensor<T>> hf(n), hb(n);
    Tensor<T> h = Tensor<T>::zeros({fwd.hidden_dim});
    for (std::size_t t = 0; t < n; ++t) {
        h = gru_cell(slice_row(X, t), h, fwd);
        hf[t] = h;
    }
    h = Tensor<T>::zeros({bwd.hidden_dim});
    for (std::size_t t = n; t-- > 0;) {
        h = gru_cell(slice_row(X, t), h, bwd);
        hb[t] = h;
    }
    std::vector<Tensor<T>> rows(n);
    for (std::size_t t = 0; t < n; ++t) rows[t] = concat_last<T>({hf[t], hb[t]});
    return stack_rows(rows);
}

// ---------------------------------------------------------------- LSTM

template <class T>
struct LstmParams {
    Tensor<T> Wf, Wi, Wo, Wg;  // [H x D]
    Tensor<T> Uf, Ui, Uo, Ug;  // [H x H]
    Tensor<T> bf, bi, bo, bg;  // [H]
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;

    LstmParams() = default;
    LstmParams(std::size_t in_dim, std::size_t h_dim, Rng& rng) : input_dim(in_dim), hidden_dim(h_dim) {
        auto W = [&] { return glorot_uniform<T>({h_dim, in_dim}, in_dim, h_dim, rng); };
        auto U = [&] { return glorot_uniform<T>({h_dim, h_dim}, h_dim, h_dim, rng); };
        auto b = [&] { return Tensor<T>::param({h_dim}, std::vector<T>(h_dim, T(0))); };
        Wf = W(); Wi = W(); Wo = W(); Wg = W();
        Uf = U(); Ui = U(); Uo = U(); Ug = U();
        bf = b(); bi = b(); bo = b(); bg = b();
    }

    std::vector<Tensor<T>> tensors() const {
        return {Wf, Wi, Wo, Wg, Uf, Ui, Uo, Ug, bf, bi, bo, bg};
    }
};

template <class T>
struct LstmState {
    Tensor<T> h;
    Tensor<T> c;
    static LstmState zeros(std::size_t hidden_dim) {
        return {Tensor<T>::zeros({hidden_dim}), Tensor<T>::zeros({hidden_dim})};
    }
};

/// Standard LSTM step with forget/input/output gates and tanh candidate.
template <class T>
LstmState<T> lstm_cell(const Tensor<T>& x, const LstmState<T>& s, const LstmParams<T>& p) {
    if (x.rank() != 1 || x.numel() != p.input_dim)
        throw ShapeError("lstm_cell: input shape " + shape_str(x.shape()) + " does not match input_dim " +
                         std::to_string(p.input_dim));
    auto gate = [&](const Tensor<T>& W, const Tensor<T>& U, const Tensor<T>& b) {
        return add(add(matmul(W, x), matmul(U, s.h)), b);
    };
    Tensor<T> f = sigmoid(gate(p.Wf, p.Uf, p.bf));
    Tensor<T> i = sigmoid(gate(p.Wi, p.Ui, p.bi));
    Tensor<T> o = sigmoid(gate(p.Wo, p.Uo, p.bo));
    Tensor<T> g = tanh_op(gate(p.Wg, p.Ug, p.bg));
    Tensor<T> c = add(mul(f, s.c), mul(i, g));
    return {mul(o, tanh_op(c)), c};
}

// ---------------------------------------------------------------- convolution

inline std::size_t conv_output_extent(std::size_t in, std::size_t k, std::size_t stride) {
    if (k > in) throw ShapeError("conv: kernel " + std::to_string(k) + " larger than input extent " +
                                 std::to_string(in) + " (KernelTooLarge)");
    if (stride < 1) throw ShapeError("conv: stride must be >= 1");
    return (in - k) / stride + 1;
}

/// Convolution parameters; weights are stored im2col-style as
/// [kh*kw*in_channels x filters] so the forward pass is a single GEMM.
template <class T>
struct ConvParams {
    std::size_t filters = 0;
    std::size_t kh = 0, kw = 0;
    std::size_t in_channels = 0;
    std::size_t stride = 1;
    Tensor<T> weights;  // [kh*kw*C x F]
    Tensor<T> bias;     // [F]

    ConvParams() = default;
    ConvParams(std::size_t f, std::size_t kernel_h, std::size_t kernel_w, std::size_t c, std::size_t s, Rng& rng)
        : filters(f), kh(kernel_h), kw(kernel_w), in_channels(c), stride(s) {
        const std::size_t fan_in = kh * kw * c;
        weights = glorot_uniform<T>({fan_in, f}, fan_in, f, rng);
        bias = Tensor<T>::param({f}, std::vector<T>(f, T(0)));
    }
    ConvParams(std::size_t f, std::size_t kernel, std::size_t c, std::size_t s, Rng& rng)
        : ConvParams(f, kernel, kernel, c, s, rng) {}

    std::vector<Tensor<T>> tensors() const { return {weights, bias}; }
};

namespace detail {

template <class T>
inline void im2col(const std::vector<T>& x, std::size_t H, std::size_t W, std::size_t C,
                   std::size_t kh, std::size_t kw, std::size_t stride,
                   std::size_t Ho, std::size_t Wo, std::vector<T>& col) {
    const std::size_t patch = kh * kw * C;
    col.resize(Ho * Wo * patch);
    std::size_t p = 0;
    for (std::size_t oy = 0; oy < Ho; ++oy) {
        for (std::size_t ox = 0; ox < Wo; ++ox, ++p) {
            T* dst = col.data() + p * patch;
            for (std::size_t dy = 0; dy < kh; ++dy) {
                const T* src = x.data() + ((oy * stride + dy) * W + ox * stride) * C;
                std::copy(src, src + kw * C, dst);
                dst += kw * C;
            }
        }
    }
}

template <class T>
inline void col2im_add(const std::vector<T>& col, std::size_t H, std::size_t W, std::size_t C,
                       std::size_t kh, std::size_t kw, std::size_t stride,
                       std::size_t Ho, std::size_t Wo, std::vector<T>& dx) {
    const std::size_t patch = kh * kw * C;
    std::size_t p = 0;
    for (std::size_t oy = 0; oy < Ho; ++oy) {
        for (std::size_t ox = 0; ox < Wo; ++ox, ++p) {
            const T* src = col.data() + p * patch;
            for (std::size_t dy = 0; dy < kh; ++dy) {
                T* dst = dx.data() + ((oy * stride + dy) * W + ox * stride) * C;
                for (std::size_t i = 0; i < kw * C; ++i) dst[i] += src[i];
                src += kw * C;
            }
        }
    }
}

}  // namespace detail

/// Valid (unpadded) 2-d convolution over an [H x W x C] input, output
/// [H' x W' x F] with H' = floor((H-kh)/stride)+1. Activation is the
/// caller's job. im2col is cached for the backward GEMMs; the input
/// gradient is skipped when the input is a plain constant.
template <class T>
Tensor<T> conv2d_valid(const Tensor<T>& x, const ConvParams<T>& p) {
    using namespace detail;
    if (x.rank() != 3)
        throw ShapeError("conv2d_valid: expected [H x W x C], got " + shape_str(x.shape()));
    const std::size_t H = x.shape()[0], W = x.shape()[1], C = x.shape()[2];
    if (C != p.in_channels)
        throw ShapeError("conv2d_valid: input has " + std::to_string(C) + " channels, params expect " +
                         std::to_string(p.in_channels));
    const std::size_t Ho = conv_output_extent(H, p.kh, p.stride);
    const std::size_t Wo = conv_output_extent(W, p.kw, p.stride);
    const std::size_t P = Ho * Wo;
    const std::size_t patch = p.kh * p.kw * C;

    auto col = std::make_shared<std::vector<T>>();
    im2col(x.value(), H, W, C, p.kh, p.kw, p.stride, Ho, Wo, *col);

    std::vector<T> out(P * p.filters);
    {
        CMapM<T> Col(col->data(), P, patch);
        CMapM<T> Wm(p.weights.value().data(), patch, p.filters);
        MapM<T> Out(out.data(), P, p.filters);
        Out.noalias() = Col * Wm;
        CMapV<T> B(p.bias.value().data(), p.filters);
        Out.rowwise() += B.transpose();
    }

    auto xn = x.node();
    auto wn = p.weights.node();
    auto bn = p.bias.node();
    const std::size_t kh = p.kh, kw = p.kw, stride = p.stride, F = p.filters;
    return make_result<T>({Ho, Wo, F}, std::move(out), "conv2d", {xn, wn, bn},
                          [=](typename Tensor<T>::Node& self) {
                              wn->ensure_grad();
                              bn->ensure_grad();
                              CMapM<T> G(self.grad.data(), P, F);
                              CMapM<T> Col(col->data(), P, patch);
                              MapM<T> dW(wn->grad.data(), patch, F);
                              dW.noalias() += Col.transpose() * G;
                              // bias reduction in fixed position order
                              for (std::size_t p = 0; p < P; ++p)
                                  for (std::size_t f = 0; f < F; ++f)
                                      bn->grad[f] += self.grad[p * F + f];
                              const bool x_needs = xn->requires_grad || static_cast<bool>(xn->pull);
                              if (x_needs) {
                                  xn->ensure_grad();
                                  std::vector<T> dcol(P * patch);
                                  MapM<T> Dcol(dcol.data(), P, patch);
                                  CMapM<T> Wm(wn->value.data(), patch, F);
                                  Dcol.noalias() = G * Wm.transpose();
                                  col2im_add(dcol, H, W, C, kh, kw, stride, Ho, Wo, xn->grad);
                              }
                          });
}

// ---------------------------------------------------------------- embedding

/// Gathers one embedding row per token id; gradients scatter-add back into
/// the table, so shared rows (padding, unknown) accumulate across positions.
template <class T>
Tensor<T> embedding_gather(const Tensor<T>& table, const std::vector<int>& ids) {
    using namespace detail;
    if (table.rank() != 2)
        throw ShapeError("embedding_gather: table must be [V x D], got " + shape_str(table.shape()));
    const std::size_t V = table.shape()[0], D = table.shape()[1];
    std::vector<T> out(ids.size() * D);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= V)
            throw ValueError("embedding_gather: token id " + std::to_string(ids[i]) +
                             " out of range for vocabulary of " + std::to_string(V) + " (IdOutOfRange)");
        const T* src = table.value().data() + static_cast<std::size_t>(ids[i]) * D;
        std::copy(src, src + D, out.begin() + i * D);
    }
    auto tn = table.node();
    return make_result<T>({ids.size(), D}, std::move(out), "embedding", {tn},
                          [tn, ids, D](typename Tensor<T>::Node& self) {
                              tn->ensure_grad();
                              for (std::size_t i = 0; i < ids.size(); ++i) {
                                  T* dst = tn->grad.data() + static_cast<std::size_t>(ids[i]) * D;
                                  const T* src = self.grad.data() + i * D;
                                  for (std::size_t d = 0; d < D; ++d) dst[d] += src[d];
                              }
                          });
}

// ---------------------------------------------------------------- pooling

/// Column-wise max over an [P x F] matrix -> [F]. Ties resolve to the first
/// row so the backward scatter is deterministic.
template <class T>
Tensor<T> colmax(const Tensor<T>& x) {
    using namespace detail;
    if (x.rank() != 2) throw ShapeError("colmax: expected matrix, got " + shape_str(x.shape()));
    const std::size_t P = x.shape()[0], F = x.shape()[1];
    if (P == 0) throw ShapeError("colmax: empty input");
    std::vector<T> out(F);
    auto arg = std::make_shared<std::vector<std::size_t>>(F, 0);
    const auto& v = x.value();
    for (std::size_t f = 0; f < F; ++f) {
        T best = v[f];
        std::size_t bi = 0;
        for (std::size_t p = 1; p < P; ++p) {
            if (v[p * F + f] > best) {
                best = v[p * F + f];
                bi = p;
            }
        }
        out[f] = best;
        (*arg)[f] = bi;
    }
    auto xn = x.node();
    return make_result<T>({F}, std::move(out), "colmax", {xn},
                          [xn, arg, F](typename Tensor<T>::Node& self) {
                              xn->ensure_grad();
                              for (std::size_t f = 0; f < F; ++f)
                                  xn->grad[(*arg)[f] * F + f] += self.grad[f];
                          });
}

// ---------------------------------------------------------------- loss

/// Binary cross-entropy on a scalar probability, clamped away from 0 and 1
/// so a saturated sigmoid cannot produce an infinite loss.
template <class T>
Tensor<T> bce_loss(const Tensor<T>& p, T target, T eps = T(1e-7)) {
    using namespace detail;
    if (p.numel() != 1) throw ShapeError("bce_loss: probability must be scalar");
    const T raw = p.value()[0];
    const T c = std::min(std::max(raw, eps), T(1) - eps);
    std::vector<T> out{-(target * std::log(c) + (T(1) - target) * std::log(T(1) - c))};
    auto pn = p.node();
    return make_result<T>({1}, std::move(out), "bce", {pn},
                          [pn, target, eps](typename Tensor<T>::Node& self) {
                              pn->ensure_grad();
                              const T raw = pn->value[0];
                              if (raw <= eps || raw >= T(1) - eps) return;  // clamped: flat
                              pn->grad[0] += self.grad[0] * (raw - target) / (raw * (T(1) - raw));
                          });
}

/// Inverted-dropout mask as a plain constant; multiply with the activations
/// during training, skip entirely at evaluation.
template <class T>
Tensor<T> dropout_mask(const Shape& shape, T rate, Rng& rng) {
    std::vector<T> m(shape_numel(shape));
    const T keep_scale = rate >= T(1) ? T(0) : T(1) / (T(1) - rate);
    for (T& v : m) v = rng.uniform() < static_cast<double>(rate) ? T(0) : keep_scale;
    return Tensor<T>::constant(shape, std::move(m));
}

}  // namespace ticap
