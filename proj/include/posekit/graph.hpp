#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "posekit/conv_kernels.hpp"
#include "posekit/tensor.hpp"

namespace posekit {

// Reverse-mode tape. Ops evaluate eagerly at record time; backward() walks
// the tape in reverse. One Graph instance per thread.
template <typename T>
class Graph {
public:
    enum class Op {
        Input,
        Parameter,
        Conv2d,
        BiasAdd,
        Linear,
        Relu,
        Sigmoid,
        Add,
        Affine,  // a*x + b, scalars
        ConcatChannels,
        Upsample2x,
        StopGradient,
        Reshape,
        MseLoss,
        BceLoss,
        MaskedMse,
        MaskedBce,
    };

    struct Node {
        Op op;
        std::vector<int> inputs;
        Tensor<T> value;
        Tensor<T> grad;  // allocated lazily in backward()
        bool requires_grad = false;
        int stride = 1;
        T a = 1, b = 0;      // Affine coefficients
        T denom = 1;         // masked-loss normalizer, frozen at forward time
        std::string name;    // parameters only
    };

    int input(Tensor<T> v) { return push({Op::Input, {}, std::move(v)}); }

    int parameter(std::string name, Tensor<T> v) {
        Node n{Op::Parameter, {}, std::move(v)};
        n.requires_grad = true;
        n.name = std::move(name);
        return push(std::move(n));
    }

    int conv2d(int x, int w, int stride = 1) {
        Node n{Op::Conv2d, {x, w},
               kernels::conv2d_forward_fast(val(x), val(w), stride)};
        n.stride = stride;
        return push_prop(std::move(n));
    }

    // b broadcast over N, H, W; b shape [C]
    int bias_add(int x, int b) {
        const Tensor<T>& xv = val(x);
        const Tensor<T>& bv = val(b);
        if (xv.rank() != 4 || bv.rank() != 1 || bv.dim(0) != xv.dim(1))
            throw std::invalid_argument("bias_add: shape mismatch");
        Tensor<T> y = xv;
        const int N = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                T* p = y.data() + (static_cast<int64_t>(n) * C + c) * HW;
                for (int i = 0; i < HW; ++i) p[i] += bv[c];
            }
        return push_prop({Op::BiasAdd, {x, b}, std::move(y)});
    }

    // x [N,D] * w [O,D]^T + b [O] -> [N,O]
    int linear(int x, int w, int b) {
        const Tensor<T>& xv = val(x);
        const Tensor<T>& wv = val(w);
        const Tensor<T>& bv = val(b);
        if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(1) ||
            bv.rank() != 1 || bv.dim(0) != wv.dim(0))
            throw std::invalid_argument("linear: shape mismatch");
        const int N = xv.dim(0), D = xv.dim(1), O = wv.dim(0);
        Tensor<T> y({N, O});
        for (int n = 0; n < N; ++n)
            for (int o = 0; o < O; ++o) {
                T acc = bv[o];
                const T* xr = xv.data() + static_cast<int64_t>(n) * D;
                const T* wr = wv.data() + static_cast<int64_t>(o) * D;
                for (int d = 0; d < D; ++d) acc += xr[d] * wr[d];
                y.at(n, o) = acc;
            }
        return push_prop({Op::Linear, {x, w, b}, std::move(y)});
    }

    int relu(int x) {
        Tensor<T> y = val(x);
        for (int64_t i = 0; i < y.size(); ++i) y[i] = y[i] > T(0) ? y[i] : T(0);
        return push_prop({Op::Relu, {x}, std::move(y)});
    }

    int sigmoid(int x) {
        Tensor<T> y = val(x);
        for (int64_t i = 0; i < y.size(); ++i) y[i] = stable_sigmoid(y[i]);
        return push_prop({Op::Sigmoid, {x}, std::move(y)});
    }

    int add(int a, int b) {
        const Tensor<T>& av = val(a);
        const Tensor<T>& bv = val(b);
        if (!av.same_shape(bv)) throw std::invalid_argument("add: shape mismatch");
        Tensor<T> y = av;
        for (int64_t i = 0; i < y.size(); ++i) y[i] += bv[i];
        return push_prop({Op::Add, {a, b}, std::move(y)});
    }

    // elementwise a*x + b
    int affine(int x, T a, T b) {
        Tensor<T> y = val(x);
        for (int64_t i = 0; i < y.size(); ++i) y[i] = a * y[i] + b;
        Node n{Op::Affine, {x}, std::move(y)};
        n.a = a;
        n.b = b;
        return push_prop(std::move(n));
    }

    int scale(int x, T a) { return affine(x, a, T(0)); }

    int concat_channels(const std::vector<int>& xs) {
        if (xs.empty()) throw std::invalid_argument("concat: no inputs");
        const Tensor<T>& first = val(xs[0]);
        const int N = first.dim(0), H = first.dim(2), W = first.dim(3);
        int C = 0;
        for (int id : xs) {
            const Tensor<T>& v = val(id);
            if (v.rank() != 4 || v.dim(0) != N || v.dim(2) != H || v.dim(3) != W)
                throw std::invalid_argument("concat: incompatible shapes");
            C += v.dim(1);
        }
        Tensor<T> y({N, C, H, W});
        for (int n = 0; n < N; ++n) {
            int coff = 0;
            for (int id : xs) {
                const Tensor<T>& v = val(id);
                const int vc = v.dim(1);
                std::copy(v.data() + static_cast<int64_t>(n) * vc * H * W,
                          v.data() + static_cast<int64_t>(n + 1) * vc * H * W,
                          y.data() + (static_cast<int64_t>(n) * C + coff) * H * W);
                coff += vc;
            }
        }
        return push_prop({Op::ConcatChannels, xs, std::move(y)});
    }

    int upsample2x(int x) {
        const Tensor<T>& xv = val(x);
        if (xv.rank() != 4) throw std::invalid_argument("upsample2x: expected 4-d");
        const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
        Tensor<T> y({N, C, 2 * H, 2 * W});
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w) {
                        const T v = xv.at(n, c, h, w);
                        y.at(n, c, 2 * h, 2 * w) = v;
                        y.at(n, c, 2 * h, 2 * w + 1) = v;
                        y.at(n, c, 2 * h + 1, 2 * w) = v;
                        y.at(n, c, 2 * h + 1, 2 * w + 1) = v;
                    }
        return push_prop({Op::Upsample2x, {x}, std::move(y)});
    }

    // Forward identity, backward blocks all gradient flow.
    int stop_gradient(int x) {
        Node n{Op::StopGradient, {x}, val(x)};
        n.requires_grad = false;
        return push(std::move(n));
    }

    int reshape(int x, std::vector<int> shape) {
        const Tensor<T>& xv = val(x);
        Tensor<T> y(std::move(shape));
        if (y.size() != xv.size()) throw std::invalid_argument("reshape: element count mismatch");
        std::copy(xv.data(), xv.data() + xv.size(), y.data());
        return push_prop({Op::Reshape, {x}, std::move(y)});
    }

    int mse_loss(int pred, int target) {
        const Tensor<T>& p = val(pred);
        const Tensor<T>& t = val(target);
        if (!p.same_shape(t)) throw std::invalid_argument("mse_loss: shape mismatch");
        T acc = 0;
        for (int64_t i = 0; i < p.size(); ++i) {
            const T d = p[i] - t[i];
            acc += d * d;
        }
        Node n{Op::MseLoss, {pred, target}, Tensor<T>::scalar(acc / T(p.size()))};
        n.denom = T(p.size());
        return push_prop(std::move(n));
    }

    // mean of mask*(pred-target)^2 over sum(mask); zero loss when the mask is empty
    int masked_mse_loss(int pred, int target, int mask) {
        const Tensor<T>& p = val(pred);
        const Tensor<T>& t = val(target);
        const Tensor<T>& m = val(mask);
        if (!p.same_shape(t) || !p.same_shape(m))
            throw std::invalid_argument("masked_mse_loss: shape mismatch");
        T acc = 0, msum = 0;
        for (int64_t i = 0; i < p.size(); ++i) {
            const T d = p[i] - t[i];
            acc += m[i] * d * d;
            msum += m[i];
        }
        Node n{Op::MaskedMse, {pred, target, mask},
               Tensor<T>::scalar(msum > T(0) ? acc / msum : T(0))};
        n.denom = msum > T(0) ? msum : T(1);
        return push_prop(std::move(n));
    }

    // binary cross entropy on logits, log-sum-exp stable
    int bce_loss(int logits, int labels) {
        const Tensor<T>& z = val(logits);
        const Tensor<T>& y = val(labels);
        if (!z.same_shape(y)) throw std::invalid_argument("bce_loss: shape mismatch");
        T acc = 0;
        for (int64_t i = 0; i < z.size(); ++i) acc += bce_elem(z[i], y[i]);
        Node n{Op::BceLoss, {logits, labels}, Tensor<T>::scalar(acc / T(z.size()))};
        n.denom = T(z.size());
        return push_prop(std::move(n));
    }

    int masked_bce_loss(int logits, int labels, int mask) {
        const Tensor<T>& z = val(logits);
        const Tensor<T>& y = val(labels);
        const Tensor<T>& m = val(mask);
        if (!z.same_shape(y) || !z.same_shape(m))
            throw std::invalid_argument("masked_bce_loss: shape mismatch");
        T acc = 0, msum = 0;
        for (int64_t i = 0; i < z.size(); ++i) {
            acc += m[i] * bce_elem(z[i], y[i]);
            msum += m[i];
        }
        Node n{Op::MaskedBce, {logits, labels, mask},
               Tensor<T>::scalar(msum > T(0) ? acc / msum : T(0))};
        n.denom = msum > T(0) ? msum : T(1);
        return push_prop(std::move(n));
    }

    const Tensor<T>& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
    const Tensor<T>& grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }
    const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
    int num_nodes() const { return static_cast<int>(nodes_.size()); }

    // Smallest |pre-activation| feeding any relu; used by the gradient checker
    // to reject seeds sitting on a kink.
    T min_abs_relu_input() const {
        T best = std::numeric_limits<T>::infinity();
        for (const Node& n : nodes_)
            if (n.op == Op::Relu) {
                const Tensor<T>& x = nodes_[static_cast<size_t>(n.inputs[0])].value;
                for (int64_t i = 0; i < x.size(); ++i)
                    best = std::min(best, std::abs(x[i]));
            }
        return best;
    }

    void backward(int loss) {
        Node& ln = nodes_[static_cast<size_t>(loss)];
        if (ln.value.size() != 1)
            throw std::invalid_argument("backward: loss must be scalar");
        for (Node& n : nodes_) {
            if (n.requires_grad) {
                n.grad = Tensor<T>(n.value.shape());
            } else {
                n.grad = Tensor<T>();
            }
        }
        if (!ln.requires_grad) return;  // loss disconnected from parameters
        ln.grad[0] = T(1);
        for (int id = loss; id >= 0; --id) {
            Node& n = nodes_[static_cast<size_t>(id)];
            if (!n.requires_grad || n.grad.empty()) continue;
            backprop_node(id);
        }
    }

private:
    static T stable_sigmoid(T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
    }

    // max(z,0) - z*y + log(1+exp(-|z|))
    static T bce_elem(T z, T y) {
        return std::max(z, T(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
    }

    int push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size() - 1);
    }

    int push_prop(Node n) {
        for (int in : n.inputs)
            if (nodes_[static_cast<size_t>(in)].requires_grad) n.requires_grad = true;
        return push(std::move(n));
    }

    Tensor<T>* grad_slot(int id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        return n.requires_grad ? &n.grad : nullptr;
    }

    const Tensor<T>& val(int id) const {
        if (id < 0 || id >= num_nodes()) throw std::out_of_range("graph: bad node id");
        return nodes_[static_cast<size_t>(id)].value;
    }

    void backprop_node(int id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        const Tensor<T>& g = n.grad;
        switch (n.op) {
            case Op::Input:
            case Op::Parameter:
            case Op::StopGradient:
                break;
            case Op::Conv2d: {
                Node& xn = nodes_[static_cast<size_t>(n.inputs[0])];
                Node& wn = nodes_[static_cast<size_t>(n.inputs[1])];
                Tensor<T> gx_local, gw_local;
                Tensor<T>* gx = grad_slot(n.inputs[0]);
                Tensor<T>* gw = grad_slot(n.inputs[1]);
                if (!gx) {
                    gx_local = Tensor<T>(xn.value.shape());
                    gx = &gx_local;
                }
                if (!gw) {
                    gw_local = Tensor<T>(wn.value.shape());
                    gw = &gw_local;
                }
                kernels::conv2d_backward_fast(xn.value, wn.value, n.stride, g, *gx, *gw);
                break;
            }
            case Op::BiasAdd: {
                if (Tensor<T>* gx = grad_slot(n.inputs[0]))
                    for (int64_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
                if (Tensor<T>* gb = grad_slot(n.inputs[1])) {
                    const int N = g.dim(0), C = g.dim(1), HW = g.dim(2) * g.dim(3);
                    for (int nn = 0; nn < N; ++nn)
                        for (int c = 0; c < C; ++c) {
                            const T* p = g.data() + (static_cast<int64_t>(nn) * C + c) * HW;
                            T acc = 0;
                            for (int i = 0; i < HW; ++i) acc += p[i];
                            (*gb)[c] += acc;
                        }
                }
                break;
            }
            case Op::Linear: {
                const Tensor<T>& x = val(n.inputs[0]);
                const Tensor<T>& w = val(n.inputs[1]);
                const int N = x.dim(0), D = x.dim(1), O = w.dim(0);
                if (Tensor<T>* gx = grad_slot(n.inputs[0]))
                    for (int nn = 0; nn < N; ++nn)
                        for (int o = 0; o < O; ++o) {
                            const T gv = g.at(nn, o);
                            const T* wr = w.data() + static_cast<int64_t>(o) * D;
                            T* gr = gx->data() + static_cast<int64_t>(nn) * D;
                            for (int d = 0; d < D; ++d) gr[d] += gv * wr[d];
                        }
                if (Tensor<T>* gw = grad_slot(n.inputs[1]))
                    for (int nn = 0; nn < N; ++nn)
                        for (int o = 0; o < O; ++o) {
                            const T gv = g.at(nn, o);
                            const T* xr = x.data() + static_cast<int64_t>(nn) * D;
                            T* gr = gw->data() + static_cast<int64_t>(o) * D;
                            for (int d = 0; d < D; ++d) gr[d] += gv * xr[d];
                        }
                if (Tensor<T>* gb = grad_slot(n.inputs[2]))
                    for (int nn = 0; nn < N; ++nn)
                        for (int o = 0; o < O; ++o) (*gb)[o] += g.at(nn, o);
                break;
            }
            case Op::Relu: {
                if (Tensor<T>* gx = grad_slot(n.inputs[0])) {
                    const Tensor<T>& x = val(n.inputs[0]);
                    for (int64_t i = 0; i < g.size(); ++i)
                        if (x[i] > T(0)) (*gx)[i] += g[i];
                }
                break;
            }
            case Op::Sigmoid: {
                if (Tensor<T>* gx = grad_slot(n.inputs[0]))
                    for (int64_t i = 0; i < g.size(); ++i) {
                        const T s = n.value[i];
                        (*gx)[i] += g[i] * s * (T(1) - s);
                    }
                break;
            }
            case Op::Add: {
                for (int k = 0; k < 2; ++k)
                    if (Tensor<T>* gi = grad_slot(n.inputs[static_cast<size_t>(k)]))
                        for (int64_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i];
                break;
            }
            case Op::Affine: {
                if (Tensor<T>* gx = grad_slot(n.inputs[0]))
                    for (int64_t i = 0; i < g.size(); ++i) (*gx)[i] += n.a * g[i];
                break;
            }
            case Op::ConcatChannels: {
                const int N = g.dim(0), C = g.dim(1), HW = g.dim(2) * g.dim(3);
                int coff = 0;
                for (int in : n.inputs) {
                    const int vc = val(in).dim(1);
                    if (Tensor<T>* gi = grad_slot(in))
                        for (int nn = 0; nn < N; ++nn) {
                            const T* src = g.data() + (static_cast<int64_t>(nn) * C + coff) * HW;
                            T* dst = gi->data() + static_cast<int64_t>(nn) * vc * HW;
                            for (int64_t i = 0; i < static_cast<int64_t>(vc) * HW; ++i)
                                dst[i] += src[i];
                        }
                    coff += vc;
                }
                break;
            }
            case Op::Upsample2x: {
                if (Tensor<T>* gx = grad_slot(n.inputs[0])) {
                    const int N = gx->dim(0), C = gx->dim(1), H = gx->dim(2), W = gx->dim(3);
                    for (int nn = 0; nn < N; ++nn)
                        for (int c = 0; c < C; ++c)
                            for (int h = 0; h < H; ++h)
                                for (int w = 0; w < W; ++w)
                                    gx->at(nn, c, h, w) +=
                                        g.at(nn, c, 2 * h, 2 * w) + g.at(nn, c, 2 * h, 2 * w + 1) +
                                        g.at(nn, c, 2 * h + 1, 2 * w) +
                                        g.at(nn, c, 2 * h + 1, 2 * w + 1);
                }
                break;
            }
            case Op::Reshape: {
                if (Tensor<T>* gx = grad_slot(n.inputs[0]))
                    for (int64_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
                break;
            }
            case Op::MseLoss:
            case Op::MaskedMse: {
                const Tensor<T>& p = val(n.inputs[0]);
                const Tensor<T>& t = val(n.inputs[1]);
                const Tensor<T>* m = n.op == Op::MaskedMse ? &val(n.inputs[2]) : nullptr;
                const T gs = g[0];
                if (Tensor<T>* gp = grad_slot(n.inputs[0]))
                    for (int64_t i = 0; i < p.size(); ++i) {
                        const T mi = m ? (*m)[i] : T(1);
                        (*gp)[i] += gs * T(2) * mi * (p[i] - t[i]) / n.denom;
                    }
                if (Tensor<T>* gt = grad_slot(n.inputs[1]))
                    for (int64_t i = 0; i < p.size(); ++i) {
                        const T mi = m ? (*m)[i] : T(1);
                        (*gt)[i] -= gs * T(2) * mi * (p[i] - t[i]) / n.denom;
                    }
                break;
            }
            case Op::BceLoss:
            case Op::MaskedBce: {
                const Tensor<T>& z = val(n.inputs[0]);
                const Tensor<T>& y = val(n.inputs[1]);
                const Tensor<T>* m = n.op == Op::MaskedBce ? &val(n.inputs[2]) : nullptr;
                const T gs = g[0];
                if (Tensor<T>* gz = grad_slot(n.inputs[0]))
                    for (int64_t i = 0; i < z.size(); ++i) {
                        const T mi = m ? (*m)[i] : T(1);
                        (*gz)[i] += gs * mi * (stable_sigmoid(z[i]) - y[i]) / n.denom;
                    }
                // labels treated as constants; d/dy = -z would only matter for
                // soft-label learning, which nothing here does
                break;
            }
        }
    }

    std::vector<Node> nodes_;
};

}  // namespace posekit
