#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "charlab/rng.hpp"

// Reverse-mode automatic differentiation over dense arrays. The primitive set
// is exactly what the model architectures need: matmul, bias add, elementwise
// add/mul, GeLU, masked softmax, layer norm, 1-d convolution, mean pooling,
// gather, scatter-add, dropout, cross-entropy from logits, concat, repeat,
// slice, and scalar reductions. Graphs are built per step and discarded after
// backward(); parameters are leaf nodes that outlive the graph.

namespace charlab::tensor {

using Shape = std::vector<int64_t>;

inline int64_t numel_of(const Shape& s) {
    int64_t n = 1;
    for (const int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

// Evaluation mode disables dropout globally (probes, grad checks, EMA evals).
inline bool& eval_mode() {
    static bool flag = false;
    return flag;
}

struct EvalModeGuard {
    explicit EvalModeGuard(bool on = true) : prev_(eval_mode()) { eval_mode() = on; }
    ~EvalModeGuard() { eval_mode() = prev_; }
    bool prev_;
};

// When on, every primitive verifies its outputs are finite and names itself
// on failure. grad_check turns this on.
inline bool& finite_checks() {
    static bool flag = false;
    return flag;
}

[[noreturn]] inline void fail(const std::string& op, const std::string& msg) {
    throw std::invalid_argument(op + ": " + msg);
}

template <typename Real>
struct Node {
    Shape shape;
    std::vector<Real> values;
    std::vector<Real> grad;  // allocated on demand, same extent as values
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), Real(0));
    }
};

template <typename Real>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        Tensor t;
        t.n_ = std::make_shared<Node<Real>>();
        t.n_->shape = std::move(shape);
        t.n_->values.assign(static_cast<size_t>(numel_of(t.n_->shape)), Real(0));
        t.n_->requires_grad = requires_grad;
        return t;
    }

    static Tensor full(Shape shape, Real value, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        std::fill(t.values().begin(), t.values().end(), value);
        return t;
    }

    static Tensor from(Shape shape, std::vector<Real> vals, bool requires_grad = false) {
        if (static_cast<int64_t>(vals.size()) != numel_of(shape))
            fail("tensor", "value count " + std::to_string(vals.size()) + " does not fill shape " + shape_str(shape));
        Tensor t;
        t.n_ = std::make_shared<Node<Real>>();
        t.n_->shape = std::move(shape);
        t.n_->values = std::move(vals);
        t.n_->requires_grad = requires_grad;
        return t;
    }

    static Tensor scalar(Real v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }

    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (auto& v : t.values()) v = static_cast<Real>(rng.normal(0.0, stddev));
        return t;
    }

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    int64_t dim(size_t i) const { return n_->shape[i]; }
    size_t rank() const { return n_->shape.size(); }
    int64_t numel() const { return static_cast<int64_t>(n_->values.size()); }

    std::vector<Real>& values() { return n_->values; }
    const std::vector<Real>& values() const { return n_->values; }
    std::vector<Real>& grad() {
        n_->ensure_grad();
        return n_->grad;
    }
    bool has_grad() const { return !n_->grad.empty(); }
    void zero_grad() {
        if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), Real(0));
    }

    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool b) { n_->requires_grad = b; }

    Real item() const {
        if (numel() != 1) fail("item", "tensor " + shape_str(shape()) + " is not a scalar");
        return n_->values[0];
    }

    std::shared_ptr<Node<Real>> node() const { return n_; }

    static Tensor wrap(std::shared_ptr<Node<Real>> n) {
        Tensor t;
        t.n_ = std::move(n);
        return t;
    }

private:
    std::shared_ptr<Node<Real>> n_;
};

namespace detail {

template <typename Real>
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MapM = Eigen::Map<Mat<Real>>;
template <typename Real>
using MapC = Eigen::Map<const Mat<Real>>;

template <typename Real>
std::shared_ptr<Node<Real>> make_node(const char* op, Shape shape, std::vector<std::shared_ptr<Node<Real>>> parents) {
    auto n = std::make_shared<Node<Real>>();
    n->op = op;
    n->shape = std::move(shape);
    n->values.assign(static_cast<size_t>(numel_of(n->shape)), Real(0));
    for (const auto& p : parents) {
        if (p->requires_grad) n->requires_grad = true;
    }
    n->parents = std::move(parents);
    return n;
}

template <typename Real>
void check_finite(const Node<Real>& n) {
    if (!finite_checks()) return;
    for (const Real v : n.values) {
        if (!std::isfinite(static_cast<double>(v)))
            throw std::runtime_error(std::string("non-finite value produced by primitive '") + n.op + "'");
    }
}

// Shapes equal, or one side scalar, or one side [r,1] against [r,c].
enum class Broadcast { none, left_scalar, right_scalar, left_col, right_col };

inline Broadcast broadcast_mode(const char* op, const Shape& a, const Shape& b) {
    if (a == b) return Broadcast::none;
    if (numel_of(a) == 1) return Broadcast::left_scalar;
    if (numel_of(b) == 1) return Broadcast::right_scalar;
    if (a.size() == 2 && b.size() == 2 && a[0] == b[0] && a[1] == 1 && b[1] > 1) return Broadcast::left_col;
    if (a.size() == 2 && b.size() == 2 && a[0] == b[0] && b[1] == 1 && a[1] > 1) return Broadcast::right_col;
    fail(op, "shapes " + shape_str(a) + " and " + shape_str(b) + " are not compatible");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise add / multiply (with scalar and column broadcast)
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
    using detail::Broadcast;
    const Broadcast mode = detail::broadcast_mode("add", a.shape(), b.shape());
    const Shape out_shape = (mode == Broadcast::left_scalar || mode == Broadcast::left_col) ? b.shape() : a.shape();
    auto n = detail::make_node<Real>("add", out_shape, {a.node(), b.node()});
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = n->values;
    const int64_t total = numel_of(out_shape);
    const int64_t cols = out_shape.size() == 2 ? out_shape[1] : 1;
    for (int64_t i = 0; i < total; ++i) {
        Real x, y;
        switch (mode) {
            case Broadcast::none: x = av[i]; y = bv[i]; break;
            case Broadcast::left_scalar: x = av[0]; y = bv[i]; break;
            case Broadcast::right_scalar: x = av[i]; y = bv[0]; break;
            case Broadcast::left_col: x = av[i / cols]; y = bv[i]; break;
            case Broadcast::right_col: x = av[i]; y = bv[i / cols]; break;
        }
        ov[i] = x + y;
    }
    detail::check_finite(*n);
    if (n->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        n->backward_fn = [an, bn, mode, cols, total](Node<Real>& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (int64_t i = 0; i < total; ++i) {
                    const int64_t j = (mode == Broadcast::left_scalar) ? 0 : (mode == Broadcast::left_col ? i / cols : i);
                    an->grad[j] += self.grad[i];
                }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int64_t i = 0; i < total; ++i) {
                    const int64_t j = (mode == Broadcast::right_scalar) ? 0 : (mode == Broadcast::right_col ? i / cols : i);
                    bn->grad[j] += self.grad[i];
                }
            }
        };
    }
    return Tensor<Real>::wrap(n);
}

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
    using detail::Broadcast;
    const Broadcast mode = detail::broadcast_mode("mul", a.shape(), b.shape());
    const Shape out_shape = (mode == Broadcast::left_scalar || mode == Broadcast::left_col) ? b.shape() : a.shape();
    auto n = detail::make_node<Real>("mul", out_shape, {a.node(), b.node()});
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = n->values;
    const int64_t total = numel_of(out_shape);
    const int64_t cols = out_shape.size() == 2 ? out_shape[1] : 1;
    auto idx_a = [&](int64_t i) { return (mode == Broadcast::left_scalar) ? 0 : (mode == Broadcast::left_col ? i / cols : i); };
    auto idx_b = [&](int64_t i) { return (mode == Broadcast::right_scalar) ? 0 : (mode == Broadcast::right_col ? i / cols : i); };
    for (int64_t i = 0; i < total; ++i) ov[i] = av[idx_a(i)] * bv[idx_b(i)];
    detail::check_finite(*n);
    if (n->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        n->backward_fn = [an, bn, idx_a, idx_b, total](Node<Real>& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (int64_t i = 0; i < total; ++i) an->grad[idx_a(i)] += self.grad[i] * bn->values[idx_b(i)];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int64_t i = 0; i < total; ++i) bn->grad[idx_b(i)] += self.grad[i] * an->values[idx_a(i)];
            }
        };
    }
    return Tensor<Real>::wrap(n);
}

// multiply by a plain constant (no graph node for the constant)
template <typename Real>
Tensor<Real> scale(const Tensor<Real>& x, double c) {
    auto n = detail::make_node<Real>("scale", x.shape(), {x.node()});
    const auto& xv = x.values();
    for (size_t i = 0; i < xv.size(); ++i) n->values[i] = static_cast<Real>(xv[i] * c);
    detail::check_finite(*n);
    if (n->requires_grad) {
        auto xn = x.node();
        n->backward_fn = [xn, c](Node<Real>& self) {
            xn->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += static_cast<Real>(self.grad[i] * c);
        };
    }
    return Tensor<Real>::wrap(n);
}

// ---------------------------------------------------------------------------
// matmul (with transpose flags) and bias add
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b, bool trans_a = false, bool trans_b = false) {
    if (a.rank() != 2 || b.rank() != 2)
        fail("matmul", "expects rank-2 inputs, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    const int64_t am = trans_a ? a.dim(1) : a.dim(0);
    const int64_t ak = trans_a ? a.dim(0) : a.dim(1);
    const int64_t bk = trans_b ? b.dim(1) : b.dim(0);
    const int64_t bn = trans_b ? b.dim(0) : b.dim(1);
    if (ak != bk)
        fail("matmul", "inner extents differ: " + shape_str(a.shape()) + (trans_a ? "^T" : "") + " x " +
                           shape_str(b.shape()) + (trans_b ? "^T" : ""));
    auto n = detail::make_node<Real>("matmul", Shape{am, bn}, {a.node(), b.node()});
    detail::MapC<Real> A(a.values().data(), a.dim(0), a.dim(1));
    detail::MapC<Real> B(b.values().data(), b.dim(0), b.dim(1));
    detail::MapM<Real> C(n->values.data(), am, bn);
    if (!trans_a && !trans_b) C.noalias() = A * B;
    else if (trans_a && !trans_b) C.noalias() = A.transpose() * B;
    else if (!trans_a && trans_b) C.noalias() = A * B.transpose();
    else C.noalias() = A.transpose() * B.transpose();
    detail::check_finite(*n);
    if (n->requires_grad) {
        auto an = a.node();
        auto bn_ = b.node();
        n->backward_fn = [an, bn_, trans_a, trans_b, am, bn](Node<Real>& self) {
            detail::MapC<Real> dC(self.grad.data(), am, bn);
            detail::MapC<Real> A(an->values.data(), an->shape[0], an->shape[1]);
            detail::MapC<Real> B(bn_->values.data(), bn_->shape[0], bn_->shape[1]);
            if (an->requires_grad) {
                an->ensure_grad();
                detail::MapM<Real> dA(an->grad.data(), an->shape[0], an->shape[1]);
                // dA' = dC * B'^T, undo the transpose on the way back
                if (!trans_b) {
                    if (!trans_a) dA.noalias() += dC * B.transpose();
                    else dA.noalias() += B * dC.transpose();
                } else {
                    if (!trans_a) dA.noalias() += dC * B;
                    else dA.noalias() += B.transpose() * dC.transpose();
                }
            }
            if (bn_->requires_grad) {
                bn_->ensure_grad();
                detail::MapM<Real> dB(bn_->grad.data(), bn_->shape[0], bn_->shape[1]);
                if (!trans_a) {
                    if (!trans_b) dB.noalias() += A.transpose() * dC;
                    else dB.noalias() += dC.transpose() * A;
                } else {
                    if (!trans_b) dB.noalias() += A * dC;
                    else dB.noalias() += dC.transpose() * A.transpose();
                }
            }
        };
    }
    return Tensor<Real>::wrap(n);
}

// x [.., d] + b [d], broadcast over leading extents
template <typename Real>
Tensor<Real> bias_add(const Tensor<Real>& x, const Tensor<Real>& b) {
    if (b.rank() != 1 || x.rank() < 1 || x.shape().back() != b.dim(0))
        fail("bias_add", "bias " + shape_str(b.shape()) + " does not match last extent of " + shape_str(x.shape()));
    auto n = detail::make_node<Real>("bias_add", x.shape(), {x.node(), b.node()});
    const int64_t d = b.dim(0);
    const int64_t rows = x.numel() / d;
    const auto& xv = x.values();
    const auto& bv = b.values();
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < d; ++j) n->values[r * d + j] = xv[r * d + j] + bv[j];
    detail::check_finite(*n);
    if (n->requires_grad) {
        auto xn = x.node();
        auto bn = b.node();
        n->backward_fn = [xn, bn, rows, d](Node<Real>& self) {
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t j = 0; j < d; ++j) bn->grad[j] += self.grad[r * d + j];
            }
        };
    }
    return Tensor<Real>::wrap(n);
}

// ---------------------------------------------------------------------------
// GeLU (exact, erf-based)
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> gelu(const Tensor<Real>& x) {
    auto n = detail::make_node<Real>("gelu", x.shape(), {x.node()});
    const auto& xv = x.values();
    for (size_t i = 0; i < xv.size(); ++i) {
        const double v = static_cast<double>(xv[i]);
        n->values[i] = static_cast<Real>(0.5 * v * (1.0 + std::erf(v * 0.7071067811865475)));
    }
    detail::check_finite(*n);
    if (n->requires_grad) {
        auto xn = x.node();
        n->backward_fn = [xn](Node<Real>& self) {
            xn->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) {
                const double v = static_cast<double>(xn->values[i]);
                const double cdf = 0.5 * (1.0 + std::erf(v * 0.7071067811865475));
                const double pdf = std::exp(-0.5 * v * v) * 0.3989422804014327;
                xn->grad[i] += static_cast<Real>(static_cast<double>(self.grad[i]) * (cdf + v * pdf));
            }
        };
    }
    return Tensor<Real>::wrap(n);
}

// ---------------------------------------------------------------------------
// softmax over a chosen axis with optional additive mask
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& x, int axis, const Tensor<Real>& mask = Tensor<Real>()) {
    if (axis < 0) axis += static_cast<int>(x.rank());
    if (axis < 0 || axis >= static_cast<int>(x.rank())) fail("softmax", "axis out of range for " + shape_str(x.shape()));
    if (mask.defined()) {
        if (mask.shape() != x.shape())
            fail("softmax", "mask shape " + shape_str(mask.shape()) + " differs from input " + shape_str(x.shape()));
        if (mask.requires_grad()) fail("softmax", "additive mask must not require gradients");
    }
    auto parents = std::vector<std::shared_ptr<Node<Real>>>{x.node()};
    auto n = detail::make_node<Real>("softmax", x.shape(), std::move(parents));
    const Shape& s = x.shape();
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
    const int64_t len = s[static_cast<size_t>(axis)];
    const auto& xv = x.values();
    const Real* mv = mask.defined() ? mask.values().data() : nullptr;
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * len * inner + in;
            double mx = -std::numeric_limits<double>::infinity();
            for (int64_t k = 0; k < len; ++k) {
                const int64_t idx = base + k * inner;
                const double v = static_cast<double>(xv[idx]) + (mv ? static_cast<double>(mv[idx]) : 0.0);
                mx = std::max(mx, v);
            }
            double denom = 0.0;
            for (int64_t k = 0; k < len; ++k) {
                const int64_t idx = base + k * inner;
                const double v = static_cast<double>(xv[idx]) + (mv ? static_cast<double>(mv[idx]) : 0.0);
                const double e = std::exp(v - mx);
                n->values[idx] = static_cast<Real>(e);
                denom += e;
            }
            for (int64_t k = 0; k < len; ++k) {
                const int64_t idx = base + k * inner;
                n->values[idx] = static_cast<Real>(static_cast<double>(n->values[idx]) / denom);
            }
        }
    }
    detail::check_finite(*n);
    if (n->requires_grad) {
        auto xn = x.node();
        n->backward_fn = [xn, outer, inner, len](Node<Real>& self) {
            xn->ensure_grad();
            for (int64_t o = 0; o < outer; ++o) {
                for (int64_t in = 0; in < inner; ++in) {
                    const int64_t base = o * len * inner + in;
                    double dot = 0.0;
                    for (int64_t k = 0; k < len; ++k) {
                        const int64_t idx = base + k * inner;
                        dot += static_cast<double>(self.grad[idx]) * static_cast<double>(self.values[idx]);
                    }
                    for (int64_t k = 0; k < len; ++k) {
                        const int64_t idx = base + k * inner;
                        xn->grad[idx] += static_cast<Real>(static_cast<double>(self.values[idx]) *
                                                           (static_cast<double>(self.grad[idx]) - dot));
                    }
                }
            }
        };
    }
    return Tensor<Real>::wrap(n);
}

// ---------------------------------------------------------------------------
// layer normalisation over the last axis, learnt gain and bias
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gain, const Tensor<Real>& bias,
                        double eps = 1e-5) {
    const int64_t d = x.shape().back();
    if (gain.rank() != 1 || gain.dim(0) != d || bias.rank() != 1 || bias.dim(0) != d)
        fail("layer_norm", "gain/bias must be [" + std::to_string(d) + "] for input " + shape_str(x.shape()));
    auto n = detail::make_node<Real>("layer_norm", x.shape(), {x.node(), gain.node(), bias.node()});
    const int64_t rows = x.numel() / d;
    const auto& xv = x.values();
    const auto& gv = gain.values();
    const auto& bv = bias.values();
    // keep per-row inverse stddev and normalised values for the backward pass
    auto xhat = std::make_shared<std::vector<Real>>(static_cast<size_t>(rows * d));
    auto inv_sigma = std::make_shared<std::vector<Real>>(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (int64_t j = 0; j < d; ++j) mean += static_cast<double>(xv[r * d + j]);
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t j = 0; j < d; ++j) {
            const double c = static_cast<double>(xv[r * d + j]) - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_sigma)[static_cast<size_t>(r)] = static_cast<Real>(is);
        for (int64_t j = 0; j < d; ++j) {
            const double xh = (static_cast<double>(xv[r * d + j]) - mean) * is;
            (*xhat)[static_cast<size_t>(r * d + j)] = static_cast<Real>(xh);
            n->values[r * d + j] = static_cast<Real>(xh * static_cast<double>(gv[j]) + static_cast<double>(bv[j]));
        }
    }
    detail::check_finite(*n);
    if (n->requires_grad) {
        auto xn = x.node();
        auto gn = gain.node();
        auto bn = bias.node();
        n->backward_fn = [xn, gn, bn, xhat, inv_sigma, rows, d](Node<Real>& self) {
            for (int64_t r = 0; r < rows; ++r) {
                const double is = static_cast<double>((*inv_sigma)[static_cast<size_t>(r)]);
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                for (int64_t j = 0; j < d; ++j) {
                    const size_t idx = static_cast<size_t>(r * d + j);
                    const double dxh = static_cast<double>(self.grad[idx]) * static_cast<double>(gn->values[static_cast<size_t>(j)]);
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * static_cast<double>((*xhat)[idx]);
                }
                mean_dxhat /= static_cast<double>(d);
                mean_dxhat_xhat /= static_cast<double>(d);
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    for (int64_t j = 0; j < d; ++j) {
                        const size_t idx = static_cast<size_t>(r * d + j);
                        const double dxh = static_cast<double>(self.grad[idx]) * static_cast<double>(gn->values[static_cast<size_t>(j)]);
                        xn->grad[idx] += static_cast<Real>(
                            is * (dxh - mean_dxhat - static_cast<double>((*xhat)[idx]) * mean_dxhat_xhat));
                    }
                }
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    for (int64_t j = 0; j < d; ++j) {
                        const size_t idx = static_cast<size_t>(r * d + j);
                        gn->grad[static_cast<size_t>(j)] += self.grad[idx] * (*xhat)[idx];
                    }
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    for (int64_t j = 0; j < d; ++j) bn->grad[static_cast<size_t>(j)] += self.grad[static_cast<size_t>(r * d + j)];
                }
            }
        };
    }
    return Tensor<Real>::wrap(n);
}

// ---------------------------------------------------------------------------
// 1-d convolution, zero same-padding (left-biased for even widths)
// x [N, c_in], w [width, c_in, c_out], b [c_out]; output [ceil(N/stride), c_out]
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> conv1d(const Tensor<Real>& x, const Tensor<Real>& w, const Tensor<Real>& b, int64_t stride) {
    if (x.rank() != 2 || w.rank() != 3) fail("conv1d", "expects x [N,c_in], w [width,c_in,c_out]");
    const int64_t n_in = x.dim(0), c_in = x.dim(1);
    const int64_t width = w.dim(0), c_out = w.dim(2);
    if (w.dim(1) != c_in) fail("conv1d", "kernel " + shape_str(w.shape()) + " does not match input " + shape_str(x.shape()));
    if (b.rank() != 1 || b.dim(0) != c_out) fail("conv1d", "bias must be [c_out]");
    if (stride < 1) fail("conv1d", "stride must be >= 1");
    const int64_t n_out = (n_in + stride - 1) / stride;
    const int64_t pad_left = width / 2;
    auto n = detail::make_node<Real>("conv1d", Shape{n_out, c_out}, {x.node(), w.node(), b.node()});
    detail::MapC<Real> X(x.values().data(), n_in, c_in);
    detail::MapM<Real> Out(n->values.data(), n_out, c_out);
    for (int64_t o = 0; o < n_out; ++o) Out.row(o) = detail::MapC<Real>(b.values().data(), 1, c_out);
    for (int64_t t = 0; t < width; ++t) {
        const int64_t shift = t - pad_left;
        // valid outputs: 0 <= o*stride + shift < n_in
        int64_t o0 = shift < 0 ? (-shift + stride - 1) / stride : 0;
        int64_t o1 = (n_in - 1 - shift) / stride;
        if (o1 > n_out - 1) o1 = n_out - 1;
        if (o0 > o1) continue;
        const int64_t rows = o1 - o0 + 1;
        detail::MapC<Real> Wt(w.values().data() + t * c_in * c_out, c_in, c_out);
        Eigen::Map<const detail::Mat<Real>, 0, Eigen::OuterStride<>> Xs(
            x.values().data() + (o0 * stride + shift) * c_in, rows, c_in, Eigen::OuterStride<>(stride * c_in));
        Out.middleRows(o0, rows).noalias() += Xs * Wt;
    }
    detail::check_finite(*n);
    if (n->requires_grad) {
        auto xn = x.node();
        auto wn = w.node();
        auto bn = b.node();
        n->backward_fn = [xn, wn, bn, n_in, c_in, width, c_out, stride, n_out, pad_left](Node<Real>& self) {
            detail::MapC<Real> dOut(self.grad.data(), n_out, c_out);
            if (bn->requires_grad) {
                bn->ensure_grad();
                detail::MapM<Real> dB(bn->grad.data(), 1, c_out);
                dB += dOut.colwise().sum();
            }
            for (int64_t t = 0; t < width; ++t) {
                const int64_t shift = t - pad_left;
                int64_t o0 = shift < 0 ? (-shift + stride - 1) / stride : 0;
                int64_t o1 = (n_in - 1 - shift) / stride;
                if (o1 > n_out - 1) o1 = n_out - 1;
                if (o0 > o1) continue;
                const int64_t rows = o1 - o0 + 1;
                Eigen::Map<const detail::Mat<Real>, 0, Eigen::OuterStride<>> Xs(
                    xn->values.data() + (o0 * stride + shift) * c_in, rows, c_in, Eigen::OuterStride<>(stride * c_in));
                if (wn->requires_grad) {
                    wn->ensure_grad();
                    detail::MapM<Real> dWt(wn->grad.data() + t * c_in * c_out, c_in, c_out);
                    dWt.noalias() += Xs.transpose() * dOut.middleRows(o0, rows);
                }
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    detail::MapC<Real> Wt(wn->values.data() + t * c_in * c_out, c_in, c_out);
                    Eigen::Map<detail::Mat<Real>, 0, Eigen::OuterStride<>> dXs(
                        xn->grad.data() + (o0 * stride + shift) * c_in, rows, c_in, Eigen::OuterStride<>(stride * c_in));
                    dXs.noalias() += dOut.middleRows(o0, rows) * Wt.transpose();
                }
            }
        };
    }
    return Tensor<Real>::wrap(n);
}

// ---------------------------------------------------------------------------
// mean pooling over windows [o*stride, o*stride+width), clipped at the end
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> mean_pool1d(const Tensor<Real>& x, int64_t width, int64_t stride) {
    if (x.rank() != 2) fail("mean_pool1d", "expects rank-2 input, got " + shape_str(x.shape()));
    if (width < 1 || stride < 1) fail("mean_pool1d", "width and stride must be >= 1");
    const int64_t n_in = x.dim(0), d = x.dim(1);
    const int64_t n_out = (n_in + stride - 1) / stride;
    auto n = detail::make_node<Real>("mean_pool1d", Shape{n_out, d}, {x.node()});
    const auto& xv = x.values();
    for (int64_t o = 0; o < n_out; ++o) {
        const int64_t lo = o * stride;
        const int64_t hi = std::min(lo + width, n_in);
        const double inv = 1.0 / static_cast<double>(hi - lo);
        for (int64_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (int64_t i = lo; i < hi; ++i) acc += static_cast<double>(xv[i * d + j]);
            n->values[o * d + j] = static_cast<Real>(acc * inv);
        }
    }
    detail::check_finite(*n);
    if (n->requires_grad) {
        auto xn = x.node();
        n->backward_fn = [xn, n_in, d, n_out, width, stride](Node<Real>& self) {
            xn->ensure_grad();
            for (int64_t o = 0; o < n_out; ++o) {
                const int64_t lo = o * stride;
                const int64_t hi = std::min(lo + width, n_in);
                const Real inv = static_cast<Real>(1.0 / static_cast<double>(hi - lo));
                for (int64_t j = 0; j < d; ++j) {
                    const Real g = self.grad[o * d + j] * inv;
                    for (int64_t i = lo; i < hi; ++i) xn->grad[i * d + j] += g;
                }
            }
        };
    }
    return Tensor<Real>::wrap(n);
}

// ---------------------------------------------------------------------------
// embedding gather and its adjoint scatter-add
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> gather_rows(const Tensor<Real>& table, const std::vector<int64_t>& indices) {
    if (table.rank() != 2) fail("gather", "table must be rank-2, got " + shape_str(table.shape()));
    const int64_t v = table.dim(0), d = table.dim(1);
    for (const int64_t idx : indices)
        if (idx < 0 || idx >= v) fail("gather", "index " + std::to_string(idx) + " out of range [0," + std::to_string(v) + ")");
    auto n = detail::make_node<Real>("gather", Shape{static_cast<int64_t>(indices.size()), d}, {table.node()});
    const auto& tv = table.values();
    for (size_t i = 0; i < indices.size(); ++i)
        std::copy_n(tv.data() + indices[i] * d, d, n->values.data() + static_cast<int64_t>(i) * d);
    if (n->requires_grad) {
        auto tn = table.node();
        auto idx = std::make_shared<std::vector<int64_t>>(indices);
        n->backward_fn = [tn, idx, d](Node<Real>& self) {
            tn->ensure_grad();
            for (size_t i = 0; i < idx->size(); ++i) {
                Real* dst = tn->grad.data() + (*idx)[i] * d;
                const Real* src = self.grad.data() + static_cast<int64_t>(i) * d;
                for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
            }
        };
    }
    return Tensor<Real>::wrap(n);
}

template <typename Real>
Tensor<Real> scatter_add_rows(const Tensor<Real>& src, const std::vector<int64_t>& indices, int64_t out_rows) {
    if (src.rank() != 2) fail("scatter_add", "src must be rank-2, got " + shape_str(src.shape()));
    if (src.dim(0) != static_cast<int64_t>(indices.size())) fail("scatter_add", "one index per src row required");
    const int64_t d = src.dim(1);
    for (const int64_t idx : indices)
        if (idx < 0 || idx >= out_rows) fail("scatter_add", "index " + std::to_string(idx) + " out of range");
    auto n = detail::make_node<Real>("scatter_add", Shape{out_rows, d}, {src.node()});
    const auto& sv = src.values();
    for (size_t i = 0; i < indices.size(); ++i) {
        Real* dst = n->values.data() + indices[i] * d;
        for (int64_t j = 0; j < d; ++j) dst[j] += sv[static_cast<int64_t>(i) * d + j];
    }
    detail::check_finite(*n);
    if (n->requires_grad) {
        auto sn = src.node();
        auto idx = std::make_shared<std::vector<int64_t>>(indices);
        n->backward_fn = [sn, idx, d](Node<Real>& self) {
            sn->ensure_grad();
            for (size_t i = 0; i < idx->size(); ++i) {
                const Real* src_g = self.grad.data() + (*idx)[i] * d;
                Real* dst = sn->grad.data() + static_cast<int64_t>(i) * d;
                for (int64_t j = 0; j < d; ++j) dst[j] += src_g[j];
            }
        };
    }
    return Tensor<Real>::wrap(n);
}

// ---------------------------------------------------------------------------
// dropout (inverted scaling); identity in evaluation mode
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> dropout(const Tensor<Real>& x, double keep_prob, Rng& rng) {
    if (keep_prob <= 0.0 || keep_prob > 1.0) fail("dropout", "keep probability must be in (0,1]");
    if (eval_mode() || keep_prob >= 1.0) return x;
    auto n = detail::make_node<Real>("dropout", x.shape(), {x.node()});
    auto mask = std::make_shared<std::vector<Real>>(x.values().size());
    const Real inv = static_cast<Real>(1.0 / keep_prob);
    const auto& xv = x.values();
    for (size_t i = 0; i < xv.size(); ++i) {
        const Real m = rng.bernoulli(keep_prob) ? inv : Real(0);
        (*mask)[i] = m;
        n->values[i] = xv[i] * m;
    }
    if (n->requires_grad) {
        auto xn = x.node();
        n->backward_fn = [xn, mask](Node<Real>& self) {
            xn->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i] * (*mask)[i];
        };
    }
    return Tensor<Real>::wrap(n);
}

// ---------------------------------------------------------------------------
// mean cross-entropy from logits [N, C] against integer targets
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> cross_entropy(const Tensor<Real>& logits, const std::vector<int64_t>& targets) {
    if (logits.rank() != 2) fail("cross_entropy", "logits must be rank-2, got " + shape_str(logits.shape()));
    const int64_t rows = logits.dim(0), c = logits.dim(1);
    if (rows != static_cast<int64_t>(targets.size())) fail("cross_entropy", "one target per logit row required");
    if (rows == 0) fail("cross_entropy", "no rows to score");
    for (const int64_t t : targets)
        if (t < 0 || t >= c) fail("cross_entropy", "target " + std::to_string(t) + " out of range");
    auto n = detail::make_node<Real>("cross_entropy", Shape{1}, {logits.node()});
    const auto& lv = logits.values();
    auto probs = std::make_shared<std::vector<Real>>(lv.size());
    double total = 0.0;
    for (int64_t r = 0; r < rows; ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int64_t j = 0; j < c; ++j) mx = std::max(mx, static_cast<double>(lv[r * c + j]));
        double denom = 0.0;
        for (int64_t j = 0; j < c; ++j) denom += std::exp(static_cast<double>(lv[r * c + j]) - mx);
        const double lse = mx + std::log(denom);
        for (int64_t j = 0; j < c; ++j)
            (*probs)[static_cast<size_t>(r * c + j)] = static_cast<Real>(std::exp(static_cast<double>(lv[r * c + j]) - lse));
        total += lse - static_cast<double>(lv[r * c + targets[static_cast<size_t>(r)]]);
    }
    n->values[0] = static_cast<Real>(total / static_cast<double>(rows));
    detail::check_finite(*n);
    if (n->requires_grad) {
        auto ln = logits.node();
        auto tgt = std::make_shared<std::vector<int64_t>>(targets);
        n->backward_fn = [ln, tgt, probs, rows, c](Node<Real>& self) {
            ln->ensure_grad();
            const Real g = self.grad[0] / static_cast<Real>(rows);
            for (int64_t r = 0; r < rows; ++r) {
                for (int64_t j = 0; j < c; ++j) {
                    const size_t idx = static_cast<size_t>(r * c + j);
                    Real p = (*probs)[idx];
                    if (j == (*tgt)[static_cast<size_t>(r)]) p -= Real(1);
                    ln->grad[idx] += g * p;
                }
            }
        };
    }
    return Tensor<Real>::wrap(n);
}

// ---------------------------------------------------------------------------
// concat / repeat / slice
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> concat(const std::vector<Tensor<Real>>& parts, int axis) {
    if (parts.empty()) fail("concat", "needs at least one input");
    const size_t rank = parts[0].rank();
    if (axis < 0) axis += static_cast<int>(rank);
    if (axis < 0 || axis >= static_cast<int>(rank)) fail("concat", "axis out of range");
    Shape out_shape = parts[0].shape();
    int64_t cat_total = 0;
    for (const auto& p : parts) {
        if (p.rank() != rank) fail("concat", "rank mismatch");
        for (size_t i = 0; i < rank; ++i)
            if (static_cast<int>(i) != axis && p.shape()[i] != out_shape[i])
                fail("concat", "shape " + shape_str(p.shape()) + " incompatible with " + shape_str(out_shape));
        cat_total += p.shape()[static_cast<size_t>(axis)];
    }
    out_shape[static_cast<size_t>(axis)] = cat_total;
    std::vector<std::shared_ptr<Node<Real>>> parents;
    for (const auto& p : parts) parents.push_back(p.node());
    auto n = detail::make_node<Real>("concat", out_shape, std::move(parents));
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= out_shape[static_cast<size_t>(i)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < rank; ++i) inner *= out_shape[i];
    int64_t offset = 0;
    for (const auto& p : parts) {
        const int64_t len = p.shape()[static_cast<size_t>(axis)];
        const auto& pv = p.values();
        for (int64_t o = 0; o < outer; ++o)
            std::copy_n(pv.data() + o * len * inner, len * inner,
                        n->values.data() + (o * cat_total + offset) * inner);
        offset += len;
    }
    if (n->requires_grad) {
        auto sizes = std::make_shared<std::vector<int64_t>>();
        for (const auto& p : parts) sizes->push_back(p.shape()[static_cast<size_t>(axis)]);
        n->backward_fn = [sizes, outer, inner, cat_total](Node<Real>& self) {
            int64_t offset = 0;
            for (size_t pi = 0; pi < self.parents.size(); ++pi) {
                auto& parent = *self.parents[pi];
                const int64_t len = (*sizes)[pi];
                if (parent.requires_grad) {
                    parent.ensure_grad();
                    for (int64_t o = 0; o < outer; ++o) {
                        const Real* src = self.grad.data() + (o * cat_total + offset) * inner;
                        Real* dst = parent.grad.data() + o * len * inner;
                        for (int64_t k = 0; k < len * inner; ++k) dst[k] += src[k];
                    }
                }
                offset += len;
            }
        };
    }
    return Tensor<Real>::wrap(n);
}

// repeat each index along `axis` `times` consecutive times ([a,b] -> [a,a,b,b])
template <typename Real>
Tensor<Real> repeat_interleave(const Tensor<Real>& x, int64_t times, int axis) {
    if (times < 1) fail("repeat", "times must be >= 1");
    if (axis < 0) axis += static_cast<int>(x.rank());
    if (axis < 0 || axis >= static_cast<int>(x.rank())) fail("repeat", "axis out of range");
    Shape out_shape = x.shape();
    const int64_t len = out_shape[static_cast<size_t>(axis)];
    out_shape[static_cast<size_t>(axis)] = len * times;
    auto n = detail::make_node<Real>("repeat", out_shape, {x.node()});
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.shape()[static_cast<size_t>(i)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < x.rank(); ++i) inner *= x.shape()[i];
    const auto& xv = x.values();
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t k = 0; k < len; ++k)
            for (int64_t t = 0; t < times; ++t)
                std::copy_n(xv.data() + (o * len + k) * inner, inner,
                            n->values.data() + ((o * len + k) * times + t) * inner);
    if (n->requires_grad) {
        auto xn = x.node();
        n->backward_fn = [xn, outer, inner, len, times](Node<Real>& self) {
            xn->ensure_grad();
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t k = 0; k < len; ++k)
                    for (int64_t t = 0; t < times; ++t) {
                        const Real* src = self.grad.data() + ((o * len + k) * times + t) * inner;
                        Real* dst = xn->grad.data() + (o * len + k) * inner;
                        for (int64_t j = 0; j < inner; ++j) dst[j] += src[j];
                    }
        };
    }
    return Tensor<Real>::wrap(n);
}

template <typename Real>
Tensor<Real> slice(const Tensor<Real>& x, int axis, int64_t start, int64_t len) {
    if (axis < 0) axis += static_cast<int>(x.rank());
    if (axis < 0 || axis >= static_cast<int>(x.rank())) fail("slice", "axis out of range");
    const int64_t extent = x.shape()[static_cast<size_t>(axis)];
    if (start < 0 || len < 0 || start + len > extent)
        fail("slice", "range [" + std::to_string(start) + "," + std::to_string(start + len) + ") exceeds extent " +
                          std::to_string(extent));
    Shape out_shape = x.shape();
    out_shape[static_cast<size_t>(axis)] = len;
    auto n = detail::make_node<Real>("slice", out_shape, {x.node()});
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.shape()[static_cast<size_t>(i)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < x.rank(); ++i) inner *= x.shape()[i];
    const auto& xv = x.values();
    for (int64_t o = 0; o < outer; ++o)
        std::copy_n(xv.data() + (o * extent + start) * inner, len * inner, n->values.data() + o * len * inner);
    if (n->requires_grad) {
        auto xn = x.node();
        n->backward_fn = [xn, outer, inner, extent, start, len](Node<Real>& self) {
            xn->ensure_grad();
            for (int64_t o = 0; o < outer; ++o) {
                const Real* src = self.grad.data() + o * len * inner;
                Real* dst = xn->grad.data() + (o * extent + start) * inner;
                for (int64_t k = 0; k < len * inner; ++k) dst[k] += src[k];
            }
        };
    }
    return Tensor<Real>::wrap(n);
}

// same values, different shape (row-major layout is unchanged)
template <typename Real>
Tensor<Real> reshape(const Tensor<Real>& x, Shape shape) {
    if (numel_of(shape) != x.numel())
        fail("reshape", "cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    auto n = detail::make_node<Real>("reshape", std::move(shape), {x.node()});
    n->values = x.values();
    if (n->requires_grad) {
        auto xn = x.node();
        n->backward_fn = [xn](Node<Real>& self) {
            xn->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
        };
    }
    return Tensor<Real>::wrap(n);
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& x) {
    auto n = detail::make_node<Real>("sum", Shape{1}, {x.node()});
    double acc = 0.0;
    for (const Real v : x.values()) acc += static_cast<double>(v);
    n->values[0] = static_cast<Real>(acc);
    detail::check_finite(*n);
    if (n->requires_grad) {
        auto xn = x.node();
        n->backward_fn = [xn](Node<Real>& self) {
            xn->ensure_grad();
            for (auto& g : xn->grad) g += self.grad[0];
        };
    }
    return Tensor<Real>::wrap(n);
}

template <typename Real>
Tensor<Real> mean(const Tensor<Real>& x) {
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

// ---------------------------------------------------------------------------
// backward pass
// ---------------------------------------------------------------------------

template <typename Real>
void backward(const Tensor<Real>& loss) {
    if (loss.numel() != 1) fail("backward", "loss must be a scalar, got " + shape_str(loss.shape()));
    if (!loss.requires_grad()) return;
    // iterative topological order over the requires-grad subgraph
    std::vector<Node<Real>*> order;
    std::unordered_set<Node<Real>*> visited;
    std::vector<std::pair<Node<Real>*, size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<Real>* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] = Real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<Real>* node = *it;
        if (node->backward_fn) {
            node->ensure_grad();
            node->backward_fn(*node);
        }
    }
}

// ---------------------------------------------------------------------------
// gradient checking against central finite differences
// ---------------------------------------------------------------------------

// Max over sampled coordinates of |analytic - numeric| / (|analytic| + |numeric| + 1e-8).
// The function must be deterministic; dropout is forced off for the duration.
template <typename Real>
double grad_check(const std::function<Tensor<Real>()>& f, const std::vector<Tensor<Real>>& params, double eps,
                  Rng& rng, int64_t max_coords_per_param = 24) {
    EvalModeGuard eval_guard(true);
    const bool prev_finite = finite_checks();
    finite_checks() = true;
    for (const auto& p : params) const_cast<Tensor<Real>&>(p).zero_grad();
    Tensor<Real> loss = f();
    if (loss.numel() != 1) fail("grad_check", "function must return a scalar");
    backward(loss);
    std::vector<std::vector<Real>> analytic;
    for (const auto& p : params) analytic.push_back(const_cast<Tensor<Real>&>(p).grad());

    double max_rel = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = const_cast<Tensor<Real>&>(params[pi]);
        const int64_t n = p.numel();
        std::vector<int64_t> coords;
        if (n <= max_coords_per_param) {
            coords.resize(static_cast<size_t>(n));
            std::iota(coords.begin(), coords.end(), 0);
        } else {
            std::unordered_set<int64_t> seen;
            while (static_cast<int64_t>(coords.size()) < max_coords_per_param) {
                const int64_t c = static_cast<int64_t>(rng.below(static_cast<uint64_t>(n)));
                if (seen.insert(c).second) coords.push_back(c);
            }
        }
        for (const int64_t c : coords) {
            const Real saved = p.values()[static_cast<size_t>(c)];
            p.values()[static_cast<size_t>(c)] = saved + static_cast<Real>(eps);
            const double f_plus = static_cast<double>(f().item());
            p.values()[static_cast<size_t>(c)] = saved - static_cast<Real>(eps);
            const double f_minus = static_cast<double>(f().item());
            p.values()[static_cast<size_t>(c)] = saved;
            const double numeric = (f_plus - f_minus) / (2.0 * eps);
            const double a = static_cast<double>(analytic[pi][static_cast<size_t>(c)]);
            const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-8);
            max_rel = std::max(max_rel, rel);
        }
    }
    finite_checks() = prev_finite;
    return max_rel;
}

}  // namespace charlab::tensor
