#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ticap/common.hpp"

namespace ticap {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out + "]";
}

template <class T>
class GradTape;

/// Dense n-dimensional array, row-major, with reverse-mode differentiation.
///
/// A Tensor is a cheap handle onto a shared node. Every operation links the
/// result node to its parents and stores a pull closure that routes the
/// result's gradient back to them; GradTape materializes the topological
/// order from a scalar loss and replays those closures in reverse.
///
/// All reductions run in a fixed order on one thread, so a given seed and op
/// sequence reproduces bit-identical values. Any op whose result contains a
/// NaN or Inf throws NumericError immediately instead of letting it propagate.
template <class T>
class Tensor {
public:
    struct Node {
        Shape shape;
        std::vector<T> value;
        std::vector<T> grad;  // allocated on first touch during backward; persistent on leaves
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> pull;  // adds d(loss)/d(this) into parents' grads
        const char* op = "leaf";

        void ensure_grad() {
            if (grad.size() != value.size()) grad.assign(value.size(), T(0));
        }
        std::size_t numel() const { return value.size(); }
    };

    Tensor() = default;

    // -------- constructors

    static Tensor constant(Shape shape, std::vector<T> data) {
        check_sized(shape, data.size());
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        return Tensor(std::move(n));
    }

    static Tensor full(Shape shape, T v) {
        std::vector<T> data(shape_numel(shape), v);
        return constant(std::move(shape), std::move(data));
    }

    static Tensor zeros(Shape shape) { return full(std::move(shape), T(0)); }
    static Tensor ones(Shape shape) { return full(std::move(shape), T(1)); }
    static Tensor scalar(T v) { return constant({1}, {v}); }

    /// Trainable leaf. Gradient buffer persists across backward passes and
    /// accumulates until explicitly zeroed, so minibatch gradients can be
    /// summed sample by sample in a fixed order.
    static Tensor param(Shape shape, std::vector<T> data) {
        Tensor t = constant(std::move(shape), std::move(data));
        t.n_->requires_grad = true;
        t.n_->ensure_grad();
        return t;
    }

    static Tensor param_uniform(Shape shape, T lo, T hi, Rng& rng) {
        std::vector<T> data(shape_numel(shape));
        for (T& v : data) v = static_cast<T>(rng.uniform(lo, hi));
        return param(std::move(shape), std::move(data));
    }

    // -------- access

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    std::size_t rank() const { return n_->shape.size(); }
    std::size_t numel() const { return n_->value.size(); }
    const std::vector<T>& value() const { return n_->value; }
    std::vector<T>& raw_value() { return n_->value; }  // in-place init only; invisible to any tape
    const std::vector<T>& grad() const { return n_->grad; }
    std::vector<T>& raw_grad() { return n_->grad; }
    bool requires_grad() const { return n_->requires_grad; }
    const char* op_name() const { return n_->op; }

    T item() const {
        if (numel() != 1) throw ValueError("item(): tensor is not scalar, shape " + shape_str(shape()));
        return n_->value[0];
    }

    T at(std::size_t i, std::size_t j) const {
        return n_->value[i * n_->shape.back() + j];
    }

    void zero_grad() {
        n_->ensure_grad();
        std::fill(n_->grad.begin(), n_->grad.end(), T(0));
    }

    std::shared_ptr<Node> node() const { return n_; }

    // -------- ops (free-function style entry points live below)

    explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

private:
    static void check_sized(const Shape& s, std::size_t len) {
        if (shape_numel(s) != len)
            throw ShapeError("tensor data length " + std::to_string(len) + " does not match shape " + shape_str(s));
    }

    std::shared_ptr<Node> n_;
};

namespace detail {

template <class T>
using NodePtr = std::shared_ptr<typename Tensor<T>::Node>;

template <class T>
inline void check_finite(const std::vector<T>& v, const char* op) {
    for (const T& x : v) {
        if (!std::isfinite(static_cast<double>(x)))
            throw NumericError(std::string(op) + " produced a non-finite value");
    }
}

template <class T>
inline Tensor<T> make_result(Shape shape, std::vector<T> value, const char* op,
                             std::vector<NodePtr<T>> parents,
                             std::function<void(typename Tensor<T>::Node&)> pull) {
    check_finite(value, op);
    auto n = std::make_shared<typename Tensor<T>::Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->op = op;
    bool any_tracked = false;
    for (auto& p : parents)
        if (p->requires_grad || p->pull || !p->parents.empty()) any_tracked = true;
    if (any_tracked) {
        n->parents = std::move(parents);
        n->pull = std::move(pull);
    }
    return Tensor<T>(std::move(n));
}

// Right-aligned broadcast in the usual sense: trailing axes must match or be 1.
inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
    Shape out(std::max(a.size(), b.size()));
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::size_t ea = i < out.size() - a.size() ? 1 : a[i - (out.size() - a.size())];
        std::size_t eb = i < out.size() - b.size() ? 1 : b[i - (out.size() - b.size())];
        if (ea != eb && ea != 1 && eb != 1)
            throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                             " are not broadcast-compatible");
        out[i] = std::max(ea, eb);
    }
    return out;
}

// Row-major strides with 0 on broadcast axes, aligned to `out` rank.
inline std::vector<std::size_t> broadcast_strides(const Shape& s, const Shape& out) {
    std::vector<std::size_t> strides(out.size(), 0);
    std::size_t acc = 1;
    for (std::size_t i = s.size(); i-- > 0;) {
        std::size_t oi = i + (out.size() - s.size());
        strides[oi] = (s[i] == 1 && out[oi] != 1) ? 0 : acc;
        acc *= s[i];
    }
    return strides;
}

// Iterates the flat output index together with the two broadcast source indices.
template <class F>
inline void broadcast_walk(const Shape& out, const std::vector<std::size_t>& sa,
                           const std::vector<std::size_t>& sb, F&& f) {
    const std::size_t n = shape_numel(out);
    const std::size_t rank = out.size();
    std::vector<std::size_t> idx(rank, 0);
    std::size_t ia = 0, ib = 0;
    for (std::size_t flat = 0; flat < n; ++flat) {
        f(flat, ia, ib);
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            ia += sa[d];
            ib += sb[d];
            if (idx[d] < out[d]) break;
            ia -= sa[d] * out[d];
            ib -= sb[d] * out[d];
            idx[d] = 0;
        }
    }
}

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using MapM = Eigen::Map<RowMat<T>>;
template <class T>
using CMapM = Eigen::Map<const RowMat<T>>;
template <class T>
using MapV = Eigen::Map<Vec<T>>;
template <class T>
using CMapV = Eigen::Map<const Vec<T>>;

// Reductions must not depend on buffer alignment, or reruns with different
// heap layouts stop being bit-identical. Eigen's packed GEMM accumulates in
// an order fixed by the panel sizes alone, so all matrix products are
// routed through it; products too small for the packed kernel take a scalar
// loop. Vector operands are mapped as one-column matrices so nothing ever
// dispatches to the alignment-sensitive GEMV path.
inline constexpr std::size_t kScalarGemmThreshold = 64;

/// c[m x n] (+)= a[m x k] * b[k x n], row-major
template <class T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (m * n * k <= kScalarGemmThreshold) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                T acc = accumulate ? c[i * n + j] : T(0);
                for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
                c[i * n + j] = acc;
            }
        return;
    }
    CMapM<T> A(a, m, k);
    CMapM<T> B(b, k, n);
    MapM<T> C(c, m, n);
    if (accumulate)
        C.noalias() += A * B;
    else
        C.noalias() = A * B;
}

/// c[m x k] += a[m x n] * b[k x n]^T
template <class T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
    if (m * n * k <= kScalarGemmThreshold) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                T acc = T(0);
                for (std::size_t p = 0; p < n; ++p) acc += a[i * n + p] * b[j * n + p];
                c[i * k + j] += acc;
            }
        return;
    }
    CMapM<T> A(a, m, n);
    CMapM<T> B(b, k, n);
    MapM<T> C(c, m, k);
    C.noalias() += A * B.transpose();
}

/// c[k x n] += a[m x k]^T * b[m x n]
template <class T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t k, std::size_t m, std::size_t n) {
    if (m * n * k <= kScalarGemmThreshold) {
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                T acc = T(0);
                for (std::size_t p = 0; p < m; ++p) acc += a[p * k + i] * b[p * n + j];
                c[i * n + j] += acc;
            }
        return;
    }
    CMapM<T> A(a, m, k);
    CMapM<T> B(b, m, n);
    MapM<T> C(c, k, n);
    C.noalias() += A.transpose() * B;
}

}  // namespace detail

// ---------------------------------------------------------------- binary elementwise

template <class T, class FwdF, class BwdF>
Tensor<T> binary_elementwise(const Tensor<T>& a, const Tensor<T>& b, const char* op, FwdF fwd, BwdF bwd) {
    using namespace detail;
    Shape out_shape = broadcast_shape(a.shape(), b.shape(), op);
    auto sa = broadcast_strides(a.shape(), out_shape);
    auto sb = broadcast_strides(b.shape(), out_shape);
    std::vector<T> out(shape_numel(out_shape));
    const auto& av = a.value();
    const auto& bv = b.value();
    if (a.shape() == b.shape()) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
    } else {
        broadcast_walk(out_shape, sa, sb, [&](std::size_t o, std::size_t ia, std::size_t ib) {
            out[o] = fwd(av[ia], bv[ib]);
        });
    }
    auto an = a.node();
    auto bn = b.node();
    return make_result<T>(
        out_shape, std::move(out), op, {an, bn},
        [an, bn, sa, sb, out_shape, bwd](typename Tensor<T>::Node& self) {
            an->ensure_grad();
            bn->ensure_grad();
            broadcast_walk(out_shape, sa, sb, [&](std::size_t o, std::size_t ia, std::size_t ib) {
                auto [da, db] = bwd(an->value[ia], bn->value[ib], self.value[o], self.grad[o]);
                an->grad[ia] += da;
                bn->grad[ib] += db;
            });
        });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_elementwise(
        a, b, "add", [](T x, T y) { return x + y; },
        [](T, T, T, T g) { return std::pair<T, T>(g, g); });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_elementwise(
        a, b, "sub", [](T x, T y) { return x - y; },
        [](T, T, T, T g) { return std::pair<T, T>(g, -g); });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_elementwise(
        a, b, "mul", [](T x, T y) { return x * y; },
        [](T x, T y, T, T g) { return std::pair<T, T>(g * y, g * x); });
}

// ---------------------------------------------------------------- unary elementwise

template <class T, class FwdF, class BwdF>
Tensor<T> unary_elementwise(const Tensor<T>& a, const char* op, FwdF fwd, BwdF bwd) {
    using namespace detail;
    std::vector<T> out(a.numel());
    const auto& av = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
    auto an = a.node();
    return make_result<T>(a.shape(), std::move(out), op, {an},
                          [an, bwd](typename Tensor<T>::Node& self) {
                              an->ensure_grad();
                              for (std::size_t i = 0; i < self.value.size(); ++i)
                                  an->grad[i] += bwd(an->value[i], self.value[i], self.grad[i]);
                          });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    return unary_elementwise(
        a, "sigmoid",
        [](T x) {
            // evaluate on the stable side of the exponential
            if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
            T e = std::exp(x);
            return e / (T(1) + e);
        },
        [](T, T y, T g) { return g * y * (T(1) - y); });
}

template <class T>
Tensor<T> tanh_op(const Tensor<T>& a) {
    return unary_elementwise(
        a, "tanh", [](T x) { return std::tanh(x); },
        [](T, T y, T g) { return g * (T(1) - y * y); });
}

template <class T>
Tensor<T> relu(const Tensor<T>& a) {
    return unary_elementwise(
        a, "relu", [](T x) { return x > T(0) ? x : T(0); },
        [](T x, T, T g) { return x > T(0) ? g : T(0); });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T k) {
    return unary_elementwise(
        a, "scale", [k](T x) { return k * x; },
        [k](T, T, T g) { return k * g; });
}

// ---------------------------------------------------------------- matmul

/// [m x k]·[k x n] -> [m x n], or [m x k]·[k] -> [m].
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    using namespace detail;
    if (a.rank() != 2 || (b.rank() != 2 && b.rank() != 1))
        throw ShapeError("matmul: expected [m x k]·[k x n] or [m x k]·[k], got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    const std::size_t m = a.shape()[0], k = a.shape()[1];
    const std::size_t kb = b.shape()[0];
    const std::size_t n = b.rank() == 2 ? b.shape()[1] : 1;
    if (k != kb)
        throw ShapeError("matmul: inner extents differ, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));

    std::vector<T> out(m * n);
    detail::gemm_nn<T>(a.value().data(), b.value().data(), out.data(), m, k, n, false);
    Shape out_shape = b.rank() == 2 ? Shape{m, n} : Shape{m};
    auto an = a.node();
    auto bn = b.node();
    return make_result<T>(out_shape, std::move(out), "matmul", {an, bn},
                          [an, bn, m, k, n](typename Tensor<T>::Node& self) {
                              an->ensure_grad();
                              bn->ensure_grad();
                              // dA += G * B^T, dB += A^T * G
                              detail::gemm_nt<T>(self.grad.data(), bn->value.data(), an->grad.data(), m, n, k);
                              detail::gemm_tn<T>(an->value.data(), self.grad.data(), bn->grad.data(), k, m, n);
                          });
}

// ---------------------------------------------------------------- shape ops

/// Same data, new extents; numel must be preserved.
template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape new_shape) {
    using namespace detail;
    if (shape_numel(new_shape) != a.numel())
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(new_shape));
    std::vector<T> out = a.value();
    auto an = a.node();
    return make_result<T>(std::move(new_shape), std::move(out), "reshape", {an},
                          [an](typename Tensor<T>::Node& self) {
                              an->ensure_grad();
                              for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
                          });
}

template <class T>
Tensor<T> flatten(const Tensor<T>& a) {
    return reshape(a, {a.numel()});
}

/// Row i of a matrix as a 1-d tensor.
template <class T>
Tensor<T> slice_row(const Tensor<T>& a, std::size_t i) {
    using namespace detail;
    if (a.rank() != 2) throw ShapeError("slice_row: expected matrix, got " + shape_str(a.shape()));
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    if (i >= rows) throw ShapeError("slice_row: row " + std::to_string(i) + " out of range");
    std::vector<T> out(a.value().begin() + i * cols, a.value().begin() + (i + 1) * cols);
    auto an = a.node();
    return make_result<T>({cols}, std::move(out), "slice_row", {an},
                          [an, i, cols](typename Tensor<T>::Node& self) {
                              an->ensure_grad();
                              for (std::size_t c = 0; c < cols; ++c) an->grad[i * cols + c] += self.grad[c];
                          });
}

/// Concatenate along the last axis; all other extents must agree.
template <class T>
Tensor<T> concat_last(const std::vector<Tensor<T>>& parts) {
    using namespace detail;
    if (parts.empty()) throw ShapeError("concat_last: no inputs");
    Shape lead = parts[0].shape();
    lead.pop_back();
    std::size_t total_last = 0;
    for (const auto& p : parts) {
        Shape pl = p.shape();
        std::size_t last = pl.back();
        pl.pop_back();
        if (pl != lead)
            throw ShapeError("concat_last: leading extents differ, " + shape_str(parts[0].shape()) + " vs " +
                             shape_str(p.shape()));
        total_last += last;
    }
    const std::size_t rows = shape_numel(lead);
    std::vector<T> out(rows * total_last);
    std::vector<std::size_t> lasts;
    for (const auto& p : parts) lasts.push_back(p.shape().back());
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < parts.size(); ++pi) {
            const auto& pv = parts[pi].value();
            std::copy(pv.begin() + r * lasts[pi], pv.begin() + (r + 1) * lasts[pi],
                      out.begin() + r * total_last + off);
            off += lasts[pi];
        }
    }
    Shape out_shape = lead;
    out_shape.push_back(total_last);
    std::vector<NodePtr<T>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    return make_result<T>(std::move(out_shape), std::move(out), "concat", nodes,
                          [nodes, lasts, rows, total_last](typename Tensor<T>::Node& self) {
                              for (auto& n : nodes) n->ensure_grad();
                              for (std::size_t r = 0; r < rows; ++r) {
                                  std::size_t off = 0;
                                  for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
                                      for (std::size_t c = 0; c < lasts[pi]; ++c)
                                          nodes[pi]->grad[r * lasts[pi] + c] +=
                                              self.grad[r * total_last + off + c];
                                      off += lasts[pi];
                                  }
                              }
                          });
}

/// Stack n equal-length vectors into an [n x d] matrix.
template <class T>
Tensor<T> stack_rows(const std::vector<Tensor<T>>& rows) {
    using namespace detail;
    if (rows.empty()) throw ShapeError("stack_rows: no inputs");
    const std::size_t d = rows[0].numel();
    std::vector<T> out;
    out.reserve(rows.size() * d);
    for (const auto& r : rows) {
        if (r.rank() != 1 || r.numel() != d)
            throw ShapeError("stack_rows: inputs must be equal-length vectors");
        out.insert(out.end(), r.value().begin(), r.value().end());
    }
    std::vector<NodePtr<T>> nodes;
    for (const auto& r : rows) nodes.push_back(r.node());
    return make_result<T>({rows.size(), d}, std::move(out), "stack_rows", nodes,
                          [nodes, d](typename Tensor<T>::Node& self) {
                              for (std::size_t r = 0; r < nodes.size(); ++r) {
                                  nodes[r]->ensure_grad();
                                  for (std::size_t c = 0; c < d; ++c)
                                      nodes[r]->grad[c] += self.grad[r * d + c];
                              }
                          });
}

// ---------------------------------------------------------------- softmax

/// Softmax along one axis, stabilized by max subtraction so large logits
/// cannot overflow. Outputs are positive and sum to 1 along the axis.
template <class T>
Tensor<T> softmax_axis(const Tensor<T>& a, std::size_t axis) {
    using namespace detail;
    if (axis >= a.rank())
        throw ShapeError("softmax_axis: axis " + std::to_string(axis) + " out of range for " + shape_str(a.shape()));
    const Shape& s = a.shape();
    const std::size_t extent = s[axis];
    std::size_t inner = 1, outer = 1;
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];

    std::vector<T> out(a.numel());
    const auto& av = a.value();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * extent * inner + in;
            T m = av[base];
            for (std::size_t e = 1; e < extent; ++e) m = std::max(m, av[base + e * inner]);
            T sum = T(0);
            for (std::size_t e = 0; e < extent; ++e) {
                T v = std::exp(av[base + e * inner] - m);
                out[base + e * inner] = v;
                sum += v;
            }
            for (std::size_t e = 0; e < extent; ++e) out[base + e * inner] /= sum;
        }
    }
    auto an = a.node();
    return make_result<T>(a.shape(), std::move(out), "softmax", {an},
                          [an, extent, inner, outer](typename Tensor<T>::Node& self) {
                              an->ensure_grad();
                              for (std::size_t o = 0; o < outer; ++o) {
                                  for (std::size_t in = 0; in < inner; ++in) {
                                      const std::size_t base = o * extent * inner + in;
                                      T dot = T(0);
                                      for (std::size_t e = 0; e < extent; ++e)
                                          dot += self.grad[base + e * inner] * self.value[base + e * inner];
                                      for (std::size_t e = 0; e < extent; ++e) {
                                          const std::size_t i = base + e * inner;
                                          an->grad[i] += self.value[i] * (self.grad[i] - dot);
                                      }
                                  }
                              }
                          });
}

// ---------------------------------------------------------------- backward

/// Materialized reverse pass. Construction walks the graph below `loss` and
/// records every reachable op in topological order; backward() seeds the
/// scalar loss with gradient 1 and replays the ops in reverse, so each node
/// is pulled exactly once and leaves off the path keep a zero gradient.
template <class T>
class GradTape {
public:
    explicit GradTape(const Tensor<T>& loss) : loss_(loss.node()) {
        if (loss.numel() != 1)
            throw ValueError("backward: loss is not scalar, shape " + shape_str(loss.shape()));
        // iterative post-order; parents before children in order_
        std::unordered_set<const void*> seen;
        std::vector<std::pair<detail::NodePtr<T>, std::size_t>> stack;
        stack.emplace_back(loss_, 0);
        seen.insert(loss_.get());
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->parents.size()) {
                auto child = node->parents[next++];
                if (seen.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
            } else {
                order_.push_back(node);
                stack.pop_back();
            }
        }
    }

    std::size_t size() const { return order_.size(); }

    /// Accumulates into leaf gradients; interior node gradients are scoped to
    /// this call. One tape per thread; leaves may be shared across tapes only
    /// if their backward() calls are serialized.
    void backward() {
        for (auto& n : order_)
            if (!n->requires_grad) {
                n->ensure_grad();
                std::fill(n->grad.begin(), n->grad.end(), T(0));
            }
        loss_->ensure_grad();
        loss_->grad[0] += T(1);
        for (std::size_t i = order_.size(); i-- > 0;) {
            auto& n = order_[i];
            if (n->pull) n->pull(*n);
        }
    }

private:
    detail::NodePtr<T> loss_;
    std::vector<detail::NodePtr<T>> order_;
};

/// Convenience: build a tape for `loss` and run it.
template <class T>
void backward(const Tensor<T>& loss) {
    GradTape<T>(loss).backward();
}

}  // namespace ticap
