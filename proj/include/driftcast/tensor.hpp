#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "driftcast/errors.hpp"
#include "driftcast/rng.hpp"

namespace driftcast {

using Shape = std::vector<int>;

namespace detail {

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

struct TensorNode {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad; // sized lazily during backward
    bool backward_done = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backprop; // reads this->grad, accumulates into parents

    std::size_t numel() const { return values.size(); }

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
};

// C[n x m] += or = A[n x k] * B[k x m], row-major, accumulate flag.
inline void gemm_acc(const double* A, const double* B, double* C, int n, int k, int m, bool accumulate) {
    if (!accumulate) std::fill(C, C + static_cast<std::size_t>(n) * m, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* a = A + static_cast<std::size_t>(i) * k;
        double* c = C + static_cast<std::size_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            const double av = a[p];
            if (av == 0.0) continue;
            const double* b = B + static_cast<std::size_t>(p) * m;
            for (int j = 0; j < m; ++j) c[j] += av * b[j];
        }
    }
}

// C[n x k] += A[n x m] * B^T where B is [k x m].
inline void gemm_bt_acc(const double* A, const double* B, double* C, int n, int m, int k) {
    for (int i = 0; i < n; ++i) {
        const double* a = A + static_cast<std::size_t>(i) * m;
        double* c = C + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double* b = B + static_cast<std::size_t>(p) * m;
            double acc = 0.0;
            for (int j = 0; j < m; ++j) acc += a[j] * b[j];
            c[p] += acc;
        }
    }
}

// C[k x m] += A^T * B where A is [n x k], B is [n x m].
inline void gemm_at_acc(const double* A, const double* B, double* C, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* a = A + static_cast<std::size_t>(i) * k;
        const double* b = B + static_cast<std::size_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            const double av = a[p];
            if (av == 0.0) continue;
            double* c = C + static_cast<std::size_t>(p) * m;
            for (int j = 0; j < m; ++j) c[j] += av * b[j];
        }
    }
}

} // namespace detail

/// Dense n-dimensional f64 array participating in a recorded computation.
/// Ops build fresh nodes; backward() walks the record once and accumulates
/// gradients into every reachable node. Calling backward() twice through the
/// same node without zero_grad() in between raises AccumulationError.
class Tensor {
public:
    Tensor() = default;

    static Tensor from(Shape shape, std::vector<double> values) {
        if (values.size() != detail::shape_numel(shape))
            throw ShapeError("Tensor::from: value count " + std::to_string(values.size()) + " does not match shape " +
                             detail::shape_str(shape));
        Tensor t;
        t.node_ = std::make_shared<detail::TensorNode>();
        t.node_->shape = std::move(shape);
        t.node_->values = std::move(values);
        return t;
    }

    static Tensor zeros(Shape shape) {
        std::vector<double> v(detail::shape_numel(shape), 0.0);
        return from(std::move(shape), std::move(v));
    }

    static Tensor full(Shape shape, double value) {
        std::vector<double> v(detail::shape_numel(shape), value);
        return from(std::move(shape), std::move(v));
    }

    static Tensor scalar(double v) { return from(Shape{1}, {v}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->numel(); }
    const std::vector<double>& values() const { return node_->values; }

    /// Mutable access for optimizer updates; meaningful on leaves only.
    std::vector<double>& values_mut() { return node_->values; }

    bool has_grad() const { return node_ && node_->grad.size() == node_->values.size(); }
    const std::vector<double>& grad() const {
        if (!has_grad()) throw Error("Tensor::grad: no gradient present (run backward first)");
        return node_->grad;
    }

    /// Clears this node's gradient and re-arms it for another backward pass.
    void zero_grad() {
        node_->grad.clear();
        node_->backward_done = false;
    }

    detail::TensorNode* node() const { return node_.get(); }
    const std::shared_ptr<detail::TensorNode>& node_ptr() const { return node_; }

    friend void backward(const Tensor& loss);
    friend class OpBuilder;

private:
    std::shared_ptr<detail::TensorNode> node_;
};

namespace detail {

inline Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                      std::function<void(TensorNode&)> backprop) {
    Tensor t = Tensor::from(std::move(shape), std::move(values));
    auto* n = t.node();
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node_ptr());
    n->backprop = std::move(backprop);
    return t;
}

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Core op set
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("add", a, b);
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] + b.values()[i];
    return detail::make_op(a.shape(), std::move(v), {a, b}, [](detail::TensorNode& n) {
        for (auto& p : n.parents) {
            p->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i];
        }
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("sub", a, b);
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] - b.values()[i];
    return detail::make_op(a.shape(), std::move(v), {a, b}, [](detail::TensorNode& n) {
        n.parents[0]->ensure_grad();
        n.parents[1]->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            n.parents[0]->grad[i] += n.grad[i];
            n.parents[1]->grad[i] -= n.grad[i];
        }
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("mul", a, b);
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * b.values()[i];
    return detail::make_op(a.shape(), std::move(v), {a, b}, [](detail::TensorNode& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        pa.ensure_grad();
        pb.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            pa.grad[i] += n.grad[i] * pb.values[i];
            pb.grad[i] += n.grad[i] * pa.values[i];
        }
    });
}

inline Tensor scale(const Tensor& a, double s) {
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * s;
    return detail::make_op(a.shape(), std::move(v), {a}, [s](detail::TensorNode& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * s;
    });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw ShapeError("matmul: shapes " + detail::shape_str(a.shape()) + " vs " + detail::shape_str(b.shape()));
    const int n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
    std::vector<double> v(static_cast<std::size_t>(n) * m);
    detail::gemm_acc(a.values().data(), b.values().data(), v.data(), n, k, m, false);
    return detail::make_op(Shape{n, m}, std::move(v), {a, b}, [n, k, m](detail::TensorNode& node) {
        auto& pa = *node.parents[0];
        auto& pb = *node.parents[1];
        pa.ensure_grad();
        pb.ensure_grad();
        // dA += dC * B^T, dB += A^T * dC
        detail::gemm_bt_acc(node.grad.data(), pb.values.data(), pa.grad.data(), n, m, k);
        detail::gemm_at_acc(pa.values.data(), node.grad.data(), pb.grad.data(), n, k, m);
    });
}

/// Multi-channel 2-D convolution, stride 1, zero same-padding (odd kernels).
/// x: [B, C, H, W], kernel: [O, C, kh, kw], bias: [O].
inline Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    const Shape& xs = x.shape();
    const Shape& ks = kernel.shape();
    if (xs.size() != 4 || ks.size() != 4 || bias.shape().size() != 1)
        throw ShapeError("conv2d: expected x[B,C,H,W], kernel[O,C,kh,kw], bias[O]; got " + detail::shape_str(xs) + ", " +
                         detail::shape_str(ks) + ", " + detail::shape_str(bias.shape()));
    if (ks[1] != xs[1] || bias.shape()[0] != ks[0])
        throw ShapeError("conv2d: channel mismatch between " + detail::shape_str(xs) + " and " + detail::shape_str(ks));
    if (ks[2] % 2 == 0 || ks[3] % 2 == 0) throw ShapeError("conv2d: kernel sizes must be odd for same padding");

    const int B = xs[0], C = xs[1], H = xs[2], W = xs[3];
    const int O = ks[0], kh = ks[2], kw = ks[3];
    const int ph = kh / 2, pw = kw / 2;
    const std::size_t plane = static_cast<std::size_t>(H) * W;

    std::vector<double> out(static_cast<std::size_t>(B) * O * plane);
    for (int b = 0; b < B; ++b)
        for (int o = 0; o < O; ++o) {
            double* op = out.data() + (static_cast<std::size_t>(b) * O + o) * plane;
            std::fill(op, op + plane, bias.values()[o]);
            for (int c = 0; c < C; ++c) {
                const double* ip = x.values().data() + (static_cast<std::size_t>(b) * C + c) * plane;
                const double* kp = kernel.values().data() + (static_cast<std::size_t>(o) * C + c) * kh * kw;
                for (int ki = 0; ki < kh; ++ki)
                    for (int kj = 0; kj < kw; ++kj) {
                        const double wv = kp[ki * kw + kj];
                        if (wv == 0.0) continue;
                        const int di = ki - ph, dj = kj - pw;
                        const int i_lo = std::max(0, -di), i_hi = std::min(H, H - di);
                        const int j_lo = std::max(0, -dj), j_hi = std::min(W, W - dj);
                        for (int i = i_lo; i < i_hi; ++i) {
                            double* orow = op + static_cast<std::size_t>(i) * W;
                            const double* irow = ip + static_cast<std::size_t>(i + di) * W + dj;
                            for (int j = j_lo; j < j_hi; ++j) orow[j] += wv * irow[j];
                        }
                    }
            }
        }

    return detail::make_op(Shape{B, O, H, W}, std::move(out), {x, kernel, bias},
                           [B, C, O, H, W, kh, kw, ph, pw, plane](detail::TensorNode& node) {
        auto& px = *node.parents[0];
        auto& pk = *node.parents[1];
        auto& pb = *node.parents[2];
        px.ensure_grad();
        pk.ensure_grad();
        pb.ensure_grad();
        for (int b = 0; b < B; ++b)
            for (int o = 0; o < O; ++o) {
                const double* gp = node.grad.data() + (static_cast<std::size_t>(b) * O + o) * plane;
                double& bg = pb.grad[o];
                for (std::size_t i = 0; i < plane; ++i) bg += gp[i];
                for (int c = 0; c < C; ++c) {
                    const double* ip = px.values.data() + (static_cast<std::size_t>(b) * C + c) * plane;
                    double* igp = px.grad.data() + (static_cast<std::size_t>(b) * C + c) * plane;
                    const double* kp = pk.values.data() + (static_cast<std::size_t>(o) * C + c) * kh * kw;
                    double* kgp = pk.grad.data() + (static_cast<std::size_t>(o) * C + c) * kh * kw;
                    for (int ki = 0; ki < kh; ++ki)
                        for (int kj = 0; kj < kw; ++kj) {
                            const int di = ki - ph, dj = kj - pw;
                            const int i_lo = std::max(0, -di), i_hi = std::min(H, H - di);
                            const int j_lo = std::max(0, -dj), j_hi = std::min(W, W - dj);
                            const double wv = kp[ki * kw + kj];
                            double kg = 0.0;
                            for (int i = i_lo; i < i_hi; ++i) {
                                const double* grow = gp + static_cast<std::size_t>(i) * W;
                                const double* irow = ip + static_cast<std::size_t>(i + di) * W + dj;
                                double* igrow = igp + static_cast<std::size_t>(i + di) * W + dj;
                                for (int j = j_lo; j < j_hi; ++j) {
                                    kg += grow[j] * irow[j];
                                    igrow[j] += wv * grow[j];
                                }
                            }
                            kgp[ki * kw + kj] += kg;
                        }
                }
            }
    });
}

inline Tensor relu(const Tensor& a) {
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
    return detail::make_op(a.shape(), std::move(v), {a}, [](detail::TensorNode& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            if (p.values[i] > 0.0) p.grad[i] += n.grad[i];
    });
}

/// Numerically stable softmax over the last axis.
inline Tensor softmax(const Tensor& a) {
    if (a.shape().empty()) throw ShapeError("softmax: scalar input " + detail::shape_str(a.shape()));
    const int n = a.shape().back();
    const std::size_t rows = a.numel() / n;
    std::vector<double> v(a.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = a.values().data() + r * n;
        double* out = v.data() + r * n;
        double mx = in[0];
        for (int i = 1; i < n; ++i) mx = std::max(mx, in[i]);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            out[i] = std::exp(in[i] - mx);
            sum += out[i];
        }
        for (int i = 0; i < n; ++i) out[i] /= sum;
    }
    return detail::make_op(a.shape(), std::move(v), {a}, [n, rows](detail::TensorNode& node) {
        auto& p = *node.parents[0];
        p.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* s = node.values.data() + r * n;
            const double* g = node.grad.data() + r * n;
            double dot = 0.0;
            for (int i = 0; i < n; ++i) dot += g[i] * s[i];
            double* pg = p.grad.data() + r * n;
            for (int i = 0; i < n; ++i) pg[i] += s[i] * (g[i] - dot);
        }
    });
}

/// Mean over every element, producing a scalar of shape [1].
inline Tensor mean(const Tensor& a) {
    const double n = static_cast<double>(a.numel());
    double sum = 0.0;
    for (double x : a.values()) sum += x;
    return detail::make_op(Shape{1}, {sum / n}, {a}, [n](detail::TensorNode& node) {
        auto& p = *node.parents[0];
        p.ensure_grad();
        const double g = node.grad[0] / n;
        for (double& x : p.grad) x += g;
    });
}

/// Swaps the last two axes.
inline Tensor transpose(const Tensor& a) {
    if (a.shape().size() < 2) throw ShapeError("transpose: need rank >= 2, got " + detail::shape_str(a.shape()));
    Shape out_shape = a.shape();
    const int rows = out_shape[out_shape.size() - 2];
    const int cols = out_shape[out_shape.size() - 1];
    std::swap(out_shape[out_shape.size() - 2], out_shape[out_shape.size() - 1]);
    const std::size_t mats = a.numel() / (static_cast<std::size_t>(rows) * cols);
    std::vector<double> v(a.numel());
    for (std::size_t m = 0; m < mats; ++m) {
        const double* in = a.values().data() + m * rows * cols;
        double* out = v.data() + m * rows * cols;
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) out[static_cast<std::size_t>(j) * rows + i] = in[static_cast<std::size_t>(i) * cols + j];
    }
    return detail::make_op(std::move(out_shape), std::move(v), {a}, [rows, cols, mats](detail::TensorNode& node) {
        auto& p = *node.parents[0];
        p.ensure_grad();
        for (std::size_t m = 0; m < mats; ++m) {
            const double* g = node.grad.data() + m * rows * cols;
            double* pg = p.grad.data() + m * rows * cols;
            for (int j = 0; j < cols; ++j)
                for (int i = 0; i < rows; ++i) pg[static_cast<std::size_t>(i) * cols + j] += g[static_cast<std::size_t>(j) * rows + i];
        }
    });
}

inline Tensor reshape(const Tensor& a, Shape shape) {
    if (detail::shape_numel(shape) != a.numel())
        throw ShapeError("reshape: cannot view " + detail::shape_str(a.shape()) + " as " + detail::shape_str(shape));
    std::vector<double> v = a.values();
    return detail::make_op(std::move(shape), std::move(v), {a}, [](detail::TensorNode& node) {
        auto& p = *node.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < node.grad.size(); ++i) p.grad[i] += node.grad[i];
    });
}

/// Concatenation along the last axis.
inline Tensor concat(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    Shape lead = parts[0].shape();
    lead.pop_back();
    int total_last = 0;
    for (const Tensor& t : parts) {
        Shape l = t.shape();
        int last = l.back();
        l.pop_back();
        if (l != lead)
            throw ShapeError("concat: shapes " + detail::shape_str(parts[0].shape()) + " vs " + detail::shape_str(t.shape()));
        total_last += last;
    }
    const std::size_t rows = detail::shape_numel(lead);
    Shape out_shape = lead;
    out_shape.push_back(total_last);

    std::vector<double> v(rows * total_last);
    std::vector<int> lasts;
    std::vector<Tensor> parents;
    for (const Tensor& t : parts) {
        lasts.push_back(t.shape().back());
        parents.push_back(t);
    }
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const int last = lasts[pi];
        for (std::size_t r = 0; r < rows; ++r)
            std::copy(parts[pi].values().data() + r * last, parts[pi].values().data() + (r + 1) * last,
                      v.data() + r * total_last + off);
        off += static_cast<std::size_t>(last);
    }
    return detail::make_op(std::move(out_shape), std::move(v), std::move(parents),
                           [rows, total_last, lasts](detail::TensorNode& node) {
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < node.parents.size(); ++pi) {
            auto& p = *node.parents[pi];
            p.ensure_grad();
            const int last = lasts[pi];
            for (std::size_t r = 0; r < rows; ++r) {
                const double* g = node.grad.data() + r * total_last + off;
                double* pg = p.grad.data() + r * last;
                for (int i = 0; i < last; ++i) pg[i] += g[i];
            }
            off += static_cast<std::size_t>(last);
        }
    });
}

inline Tensor concat(const Tensor& a, const Tensor& b) {
    const Tensor parts[2] = {a, b};
    return concat(std::span<const Tensor>(parts, 2));
}

/// Circular shift along `axis`: out[..., t, ...] = in[..., (t - shift) mod n, ...].
inline Tensor roll(const Tensor& a, int shift, int axis) {
    const Shape& s = a.shape();
    if (axis < 0 || axis >= static_cast<int>(s.size()))
        throw ShapeError("roll: axis " + std::to_string(axis) + " out of range for " + detail::shape_str(s));
    const int n = s[axis];
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= static_cast<std::size_t>(s[i]);
    const std::size_t outer = a.numel() / (inner * n);
    const int sh = ((shift % n) + n) % n;

    std::vector<double> v(a.numel());
    for (std::size_t o = 0; o < outer; ++o)
        for (int t = 0; t < n; ++t) {
            const int src = (t - sh + n) % n;
            std::copy(a.values().data() + (o * n + src) * inner, a.values().data() + (o * n + src + 1) * inner,
                      v.data() + (o * n + t) * inner);
        }
    return detail::make_op(a.shape(), std::move(v), {a}, [n, inner, outer, sh](detail::TensorNode& node) {
        auto& p = *node.parents[0];
        p.ensure_grad();
        for (std::size_t o = 0; o < outer; ++o)
            for (int t = 0; t < n; ++t) {
                const int src = (t - sh + n) % n;
                const double* g = node.grad.data() + (o * n + t) * inner;
                double* pg = p.grad.data() + (o * n + src) * inner;
                for (std::size_t i = 0; i < inner; ++i) pg[i] += g[i];
            }
    });
}

/// Select the given indices along the last axis.
inline Tensor gather(const Tensor& a, const std::vector<int>& indices) {
    const int n = a.shape().back();
    for (int idx : indices)
        if (idx < 0 || idx >= n)
            throw ShapeError("gather: index " + std::to_string(idx) + " out of range for " + detail::shape_str(a.shape()));
    const std::size_t rows = a.numel() / n;
    const int m = static_cast<int>(indices.size());
    Shape out_shape = a.shape();
    out_shape.back() = m;

    std::vector<double> v(rows * m);
    for (std::size_t r = 0; r < rows; ++r)
        for (int i = 0; i < m; ++i) v[r * m + i] = a.values()[r * n + indices[i]];
    return detail::make_op(std::move(out_shape), std::move(v), {a}, [n, m, rows, indices](detail::TensorNode& node) {
        auto& p = *node.parents[0];
        p.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
            for (int i = 0; i < m; ++i) p.grad[r * n + indices[i]] += node.grad[r * m + i];
    });
}

// ---------------------------------------------------------------------------
// Backward traversal
// ---------------------------------------------------------------------------

inline void backward(const Tensor& loss) {
    if (!loss.defined()) throw Error("backward: undefined tensor");
    if (loss.numel() != 1)
        throw ShapeError("backward: loss must be scalar, got " + detail::shape_str(loss.shape()));

    // Iterative post-order DFS for the topological order.
    std::vector<detail::TensorNode*> order;
    std::unordered_set<detail::TensorNode*> seen;
    std::vector<std::pair<detail::TensorNode*, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    seen.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::TensorNode* p = node->parents[next++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (detail::TensorNode* n : order)
        if (n->backward_done)
            throw AccumulationError("backward: gradients already populated; call zero_grad before re-running");

    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::TensorNode* n = *it;
        n->backward_done = true;
        if (n->backprop) {
            n->ensure_grad(); // nodes with no incoming gradient contribute zeros
            n->backprop(*n);
        } else {
            n->ensure_grad();
        }
    }
}

/// Clears gradients and re-arms backward for every node reachable from root.
inline void zero_grad_graph(const Tensor& root) {
    std::vector<detail::TensorNode*> stack{root.node()};
    std::unordered_set<detail::TensorNode*> seen{root.node()};
    while (!stack.empty()) {
        detail::TensorNode* n = stack.back();
        stack.pop_back();
        n->grad.clear();
        n->backward_done = false;
        for (auto& p : n->parents)
            if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// Max over coordinates of |analytic - central difference| /
/// max(1e-8, |analytic| + |numeric|) for a scalar-valued tensor program.
/// Leaves no gradient state behind on tensors the program closes over.
inline double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps = 1e-5) {
    Tensor probe = Tensor::from(x.shape(), x.values());
    Tensor y = f(probe);
    if (y.numel() != 1) throw ShapeError("grad_check: program must be scalar-valued");
    backward(y);
    const std::vector<double> analytic = probe.grad();
    zero_grad_graph(y);

    std::vector<double> base = x.values();
    double worst = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) {
        const double saved = base[i];
        base[i] = saved + eps;
        const double up = f(Tensor::from(x.shape(), base)).values()[0];
        base[i] = saved - eps;
        const double dn = f(Tensor::from(x.shape(), base)).values()[0];
        base[i] = saved;
        const double numeric = (up - dn) / (2.0 * eps);
        const double denom = std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Composite helpers built from core ops
// ---------------------------------------------------------------------------

/// Affine map along the last axis: x[..., F] * w[F, G] (+ bias[1, G]).
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias = nullptr) {
    if (w.shape().size() != 2)
        throw ShapeError("linear: weight must be rank 2, got " + detail::shape_str(w.shape()));
    const int F = w.shape()[0], G = w.shape()[1];
    if (x.shape().back() != F)
        throw ShapeError("linear: input " + detail::shape_str(x.shape()) + " does not match weight " +
                         detail::shape_str(w.shape()));
    const int rows = static_cast<int>(x.numel()) / F;
    Tensor flat = reshape(x, Shape{rows, F});
    Tensor out = matmul(flat, w);
    if (bias) {
        if (bias->shape() != Shape{1, G})
            throw ShapeError("linear: bias must be [1," + std::to_string(G) + "], got " + detail::shape_str(bias->shape()));
        out = add(out, matmul(Tensor::full(Shape{rows, 1}, 1.0), *bias));
    }
    Shape out_shape = x.shape();
    out_shape.back() = G;
    return reshape(out, std::move(out_shape));
}

/// Mean squared error over all entries of two same-shaped tensors.
inline Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    detail::check_same_shape("mse_loss", pred, target);
    Tensor diff = sub(pred, target);
    return mean(mul(diff, diff));
}

} // namespace driftcast
