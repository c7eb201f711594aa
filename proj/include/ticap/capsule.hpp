#pragma once

#include <vector>

#include "ticap/layers.hpp"
#include "ticap/tensor.hpp"

namespace ticap {

// ---------------------------------------------------------------- squash

/// Norm-limiting nonlinearity applied per capsule vector:
///   v = (|s|^2 / (1 + |s|^2)) * s / |s|
/// Zero maps to zero by continuity; an epsilon in the norm denominator keeps
/// the division defined. Output norm grows monotonically with input norm and
/// stays inside the open unit ball; direction is preserved.
template <class T>
Tensor<T> squash_rows(const Tensor<T>& s, T eps = T(1e-9)) {
    using namespace detail;
    if (s.rank() != 1 && s.rank() != 2)
        throw ShapeError("squash: expected vector or [N x D] capsule rows, got " + shape_str(s.shape()));
    const std::size_t D = s.shape().back();
    const std::size_t N = s.numel() / D;
    std::vector<T> out(s.numel());
    const auto& v = s.value();
    for (std::size_t r = 0; r < N; ++r) {
        const T* row = v.data() + r * D;
        T u = T(0);
        for (std::size_t d = 0; d < D; ++d) u += row[d] * row[d];
        const T n = std::sqrt(u);
        const T f = u / ((T(1) + u) * (n + eps));
        for (std::size_t d = 0; d < D; ++d) out[r * D + d] = f * row[d];
    }
    auto sn = s.node();
    return make_result<T>(s.shape(), std::move(out), "squash", {sn},
                          [sn, N, D, eps](typename Tensor<T>::Node& self) {
                              sn->ensure_grad();
                              for (std::size_t r = 0; r < N; ++r) {
                                  const T* row = sn->value.data() + r * D;
                                  const T* g = self.grad.data() + r * D;
                                  T* out_g = sn->grad.data() + r * D;
                                  T u = T(0), gs = T(0);
                                  for (std::size_t d = 0; d < D; ++d) {
                                      u += row[d] * row[d];
                                      gs += g[d] * row[d];
                                  }
                                  const T n = std::sqrt(u);
                                  const T denom = (T(1) + u) * (n + eps);
                                  const T f = u / denom;
                                  for (std::size_t d = 0; d < D; ++d) out_g[d] += f * g[d];
                                  if (n > T(0)) {
                                      // d f / d u, with f = u / ((1+u)(sqrt(u)+eps))
                                      const T ddenom_du = (n + eps) + (T(1) + u) / (T(2) * n);
                                      const T df_du = (denom - u * ddenom_du) / (denom * denom);
                                      const T k = T(2) * gs * df_du;
                                      for (std::size_t d = 0; d < D; ++d) out_g[d] += k * row[d];
                                  }
                              }
                          });
}

// ---------------------------------------------------------------- prediction vectors

/// A capsule layer: num_in input capsules of dim_in vote for num_out output
/// capsules of dim_out through one learned matrix per (input, output) pair.
template <class T>
struct CapsuleLayerSpec {
    std::size_t num_in = 0;
    std::size_t dim_in = 0;
    std::size_t num_out = 0;
    std::size_t dim_out = 0;
    std::size_t routing_iters = 3;
    Tensor<T> W;  // [num_in x num_out x dim_out x dim_in]

    CapsuleLayerSpec() = default;
    CapsuleLayerSpec(std::size_t n_in, std::size_t d_in, std::size_t n_out, std::size_t d_out,
                     std::size_t iters, Rng& rng)
        : num_in(n_in), dim_in(d_in), num_out(n_out), dim_out(d_out), routing_iters(iters) {
        if (!n_in || !d_in || !n_out || !d_out) throw ShapeError("capsule layer: extents must be positive");
        if (iters < 1) throw ShapeError("capsule layer: routing_iters must be >= 1");
        W = glorot_uniform<T>({n_in, n_out, d_out, d_in}, d_in, d_out, rng);
    }
};

/// u_hat[i][j] = W[i][j] * h[i] for every (input, output) capsule pair.
/// The [num_out*dim_out x dim_in] block per input capsule is contiguous, so
/// each vote set is one small GEMV.
template <class T>
Tensor<T> predict_vectors(const Tensor<T>& h, const Tensor<T>& W) {
    using namespace detail;
    if (h.rank() != 2) throw ShapeError("predict_vectors: input capsules must be [num_in x dim_in]");
    if (W.rank() != 4) throw ShapeError("predict_vectors: weights must be [num_in x num_out x dim_out x dim_in]");
    const std::size_t I = h.shape()[0], din = h.shape()[1];
    const std::size_t J = W.shape()[1], dout = W.shape()[2];
    if (W.shape()[0] != I || W.shape()[3] != din)
        throw ShapeError("predict_vectors: weight shape " + shape_str(W.shape()) +
                         " does not match input capsules " + shape_str(h.shape()));
    const std::size_t block = J * dout;
    std::vector<T> out(I * block);
    {
        const T* wp = W.value().data();
        const T* hp = h.value().data();
        for (std::size_t i = 0; i < I; ++i)
            detail::gemm_nn<T>(wp + i * block * din, hp + i * din, out.data() + i * block, block, din, 1,
                               false);
    }
    auto hn = h.node();
    auto wn = W.node();
    return make_result<T>({I, J, dout}, std::move(out), "predict_vectors", {hn, wn},
                          [hn, wn, I, din, block](typename Tensor<T>::Node& self) {
                              hn->ensure_grad();
                              wn->ensure_grad();
                              for (std::size_t i = 0; i < I; ++i) {
                                  const T* gi = self.grad.data() + i * block;
                                  // dW_i += g_i h_i^T (outer), dh_i += W_i^T g_i
                                  detail::gemm_nt<T>(gi, hn->value.data() + i * din,
                                                     wn->grad.data() + i * block * din, block, 1, din);
                                  detail::gemm_tn<T>(wn->value.data() + i * block * din, gi,
                                                     hn->grad.data() + i * din, din, block, 1);
                              }
                          });
}

// ---------------------------------------------------------------- routing

/// S[j] = sum_i c[i][j] * u_hat[i][j]; each input capsule's coupling row must
/// be a distribution over output capsules.
template <class T>
Tensor<T> weighted_sum(const Tensor<T>& u_hat, const Tensor<T>& c) {
    using namespace detail;
    if (u_hat.rank() != 3) throw ShapeError("weighted_sum: votes must be [num_in x num_out x dim_out]");
    const std::size_t I = u_hat.shape()[0], J = u_hat.shape()[1], D = u_hat.shape()[2];
    if (c.rank() != 2 || c.shape()[0] != I || c.shape()[1] != J)
        throw ShapeError("weighted_sum: coupling shape " + shape_str(c.shape()) + " does not match votes " +
                         shape_str(u_hat.shape()));
    for (std::size_t i = 0; i < I; ++i) {
        T row = T(0);
        for (std::size_t j = 0; j < J; ++j) row += c.value()[i * J + j];
        if (std::abs(static_cast<double>(row) - 1.0) > 1e-4)
            throw ValueError("weighted_sum: coupling row " + std::to_string(i) + " sums to " +
                             std::to_string(static_cast<double>(row)) + ", expected 1");
    }
    std::vector<T> out(J * D, T(0));
    {
        const T* up = u_hat.value().data();
        const T* cp = c.value().data();
        for (std::size_t i = 0; i < I; ++i)
            for (std::size_t j = 0; j < J; ++j) {
                const T cij = cp[i * J + j];
                const T* u = up + (i * J + j) * D;
                T* s = out.data() + j * D;
                for (std::size_t d = 0; d < D; ++d) s[d] += cij * u[d];
            }
    }
    auto un = u_hat.node();
    auto cn = c.node();
    return make_result<T>({J, D}, std::move(out), "weighted_sum", {un, cn},
                          [un, cn, I, J, D](typename Tensor<T>::Node& self) {
                              un->ensure_grad();
                              cn->ensure_grad();
                              for (std::size_t i = 0; i < I; ++i)
                                  for (std::size_t j = 0; j < J; ++j) {
                                      const T cij = cn->value[i * J + j];
                                      const T* u = un->value.data() + (i * J + j) * D;
                                      const T* gs = self.grad.data() + j * D;
                                      T* gu = un->grad.data() + (i * J + j) * D;
                                      T acc = T(0);
                                      for (std::size_t d = 0; d < D; ++d) {
                                          acc += gs[d] * u[d];
                                          gu[d] += cij * gs[d];
                                      }
                                      cn->grad[i * J + j] += acc;
                                  }
                          });
}

/// Agreement between votes and output capsules: a[i][j] = u_hat[i][j] . v[j].
template <class T>
Tensor<T> routing_agreement(const Tensor<T>& u_hat, const Tensor<T>& v) {
    using namespace detail;
    if (u_hat.rank() != 3) throw ShapeError("routing_agreement: votes must be [num_in x num_out x dim_out]");
    const std::size_t I = u_hat.shape()[0], J = u_hat.shape()[1], D = u_hat.shape()[2];
    if (v.rank() != 2 || v.shape()[0] != J || v.shape()[1] != D)
        throw ShapeError("routing_agreement: output capsules " + shape_str(v.shape()) + " do not match votes " +
                         shape_str(u_hat.shape()));
    std::vector<T> out(I * J, T(0));
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j) {
            const T* u = u_hat.value().data() + (i * J + j) * D;
            const T* vj = v.value().data() + j * D;
            T acc = T(0);
            for (std::size_t d = 0; d < D; ++d) acc += u[d] * vj[d];
            out[i * J + j] = acc;
        }
    auto un = u_hat.node();
    auto vn = v.node();
    return make_result<T>({I, J}, std::move(out), "routing_agreement", {un, vn},
                          [un, vn, I, J, D](typename Tensor<T>::Node& self) {
                              un->ensure_grad();
                              vn->ensure_grad();
                              for (std::size_t i = 0; i < I; ++i)
                                  for (std::size_t j = 0; j < J; ++j) {
                                      const T g = self.grad[i * J + j];
                                      const T* u = un->value.data() + (i * J + j) * D;
                                      const T* vj = vn->value.data() + j * D;
                                      T* gu = un->grad.data() + (i * J + j) * D;
                                      T* gv = vn->grad.data() + j * D;
                                      for (std::size_t d = 0; d < D; ++d) {
                                          gu[d] += g * vj[d];
                                          gv[d] += g * u[d];
                                      }
                                  }
                          });
}

/// Coupling state of one routing pass: raw logits and their per-input-capsule
/// softmax. Every coefficient row sums to 1.
template <class T>
struct RoutingState {
    Tensor<T> logits;        // [num_in x num_out]
    Tensor<T> coefficients;  // softmax of logits over the output axis
};

/// Routing by agreement, unrolled so gradients flow through every iteration:
///   b := 0
///   repeat routing_iters times:
///     c := softmax(b) over output capsules
///     S[j] := sum_i c[i][j] u_hat[i][j]
///     v[j] := squash(S[j])
///     b[i][j] += u_hat[i][j] . v[j]     (skipped after the final round)
template <class T>
std::pair<Tensor<T>, RoutingState<T>> dynamic_routing(const Tensor<T>& u_hat, std::size_t routing_iters) {
    if (routing_iters < 1) throw ShapeError("dynamic_routing: routing_iters must be >= 1");
    if (u_hat.rank() != 3) throw ShapeError("dynamic_routing: votes must be [num_in x num_out x dim_out]");
    const std::size_t I = u_hat.shape()[0], J = u_hat.shape()[1];
    Tensor<T> b = Tensor<T>::zeros({I, J});
    Tensor<T> c, v;
    for (std::size_t r = 0; r < routing_iters; ++r) {
        c = softmax_axis(b, 1);
        Tensor<T> S = weighted_sum(u_hat, c);
        v = squash_rows(S);
        if (r + 1 < routing_iters) b = add(b, routing_agreement(u_hat, v));
    }
    return {v, RoutingState<T>{b, c}};
}

// ---------------------------------------------------------------- capsule layers

/// Primary capsule layer: a strided convolution whose channels are read as
/// `channels` capsule blocks of `caps_dim` values per grid cell, squashed
/// per capsule. Output is [grid_h*grid_w*channels x caps_dim].
template <class T>
struct PrimaryCapsParams {
    std::size_t channels = 0;
    std::size_t caps_dim = 0;
    ConvParams<T> conv;

    PrimaryCapsParams() = default;
    PrimaryCapsParams(std::size_t caps_channels, std::size_t dim, std::size_t kernel, std::size_t in_channels,
                      std::size_t stride, Rng& rng)
        : channels(caps_channels), caps_dim(dim),
          conv(caps_channels * dim, kernel, in_channels, stride, rng) {}
};

template <class T>
Tensor<T> primary_caps_forward(const Tensor<T>& features, const PrimaryCapsParams<T>& p) {
    Tensor<T> grid = conv2d_valid(features, p.conv);  // [H' x W' x channels*caps_dim]
    const std::size_t cells = grid.shape()[0] * grid.shape()[1];
    Tensor<T> caps = reshape(grid, {cells * p.channels, p.caps_dim});
    return squash_rows(caps);
}

/// Final capsule layer: votes, routing, then the flattened output capsules
/// as the branch's latent feature vector (length num_out * dim_out).
template <class T>
Tensor<T> final_caps_forward(const Tensor<T>& caps_in, const CapsuleLayerSpec<T>& spec) {
    Tensor<T> u_hat = predict_vectors(caps_in, spec.W);
    auto [v, state] = dynamic_routing(u_hat, spec.routing_iters);
    (void)state;
    return flatten(v);
}

/// Text capsule layer: every BiGRU timestep is one input capsule.
template <class T>
Tensor<T> text_caps_forward(const Tensor<T>& bigru_out, const CapsuleLayerSpec<T>& spec) {
    if (bigru_out.rank() != 2 || bigru_out.shape()[0] != spec.num_in || bigru_out.shape()[1] != spec.dim_in)
        throw ShapeError("text_caps_forward: encoder output " + shape_str(bigru_out.shape()) +
                         " does not match capsule layer [" + std::to_string(spec.num_in) + " x " +
                         std::to_string(spec.dim_in) + "]");
    return final_caps_forward(bigru_out, spec);
}

// ---------------------------------------------------------------- shape oracle

/// Static shape propagation for the two-conv capsule image branch; pure
/// arithmetic so profile geometry can be checked without running a forward.
struct CapsNetShapes {
    std::size_t conv1_h = 0, conv1_w = 0, conv1_filters = 0;
    std::size_t primary_grid_h = 0, primary_grid_w = 0;
    std::size_t primary_channels = 0, primary_caps_dim = 0;
    std::size_t primary_num_caps = 0;
    std::size_t final_num = 0, final_dim = 0;
    std::size_t latent_len = 0;
};

inline CapsNetShapes image_branch_shapes(std::size_t image_h, std::size_t image_w, std::size_t conv1_filters,
                                         std::size_t conv_kernel = 9, std::size_t primary_channels = 32,
                                         std::size_t primary_caps_dim = 8, std::size_t primary_stride = 2,
                                         std::size_t final_num = 10, std::size_t final_dim = 16) {
    CapsNetShapes s;
    s.conv1_h = conv_output_extent(image_h, conv_kernel, 1);
    s.conv1_w = conv_output_extent(image_w, conv_kernel, 1);
    s.conv1_filters = conv1_filters;
    s.primary_grid_h = conv_output_extent(s.conv1_h, conv_kernel, primary_stride);
    s.primary_grid_w = conv_output_extent(s.conv1_w, conv_kernel, primary_stride);
    s.primary_channels = primary_channels;
    s.primary_caps_dim = primary_caps_dim;
    s.primary_num_caps = s.primary_grid_h * s.primary_grid_w * primary_channels;
    s.final_num = final_num;
    s.final_dim = final_dim;
    s.latent_len = final_num * final_dim;
    return s;
}

}  // namespace ticap
