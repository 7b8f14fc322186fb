#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "xmodal/error.hpp"
#include "xmodal/rng.hpp"
#include "xmodal/tensor.hpp"

namespace xmodal {

// Convolution geometry shared by conv2d and conv_transpose2d.
struct Conv2dSpec {
    int kernel_h = 1, kernel_w = 1;
    int stride_h = 1, stride_w = 1;
    int pad_h = 0, pad_w = 0;
    int in_channels = 1, out_channels = 1;

    int out_h(int h) const { return (h + 2 * pad_h - kernel_h) / stride_h + 1; }
    int out_w(int w) const { return (w + 2 * pad_w - kernel_w) / stride_w + 1; }
    // transposed direction
    int tout_h(int h) const { return (h - 1) * stride_h - 2 * pad_h + kernel_h; }
    int tout_w(int w) const { return (w - 1) * stride_w - 2 * pad_w + kernel_w; }

    void check_forward(int h, int w) const {
        if (h + 2 * pad_h < kernel_h)
            throw ShapeError("conv2d: input height " + std::to_string(h) + " too small for kernel_h " +
                             std::to_string(kernel_h) + " with pad_h " + std::to_string(pad_h));
        if (w + 2 * pad_w < kernel_w)
            throw ShapeError("conv2d: input width " + std::to_string(w) + " too small for kernel_w " +
                             std::to_string(kernel_w) + " with pad_w " + std::to_string(pad_w));
        if (out_h(h) < 1 || out_w(w) < 1)
            throw ShapeError("conv2d: empty output for input " + std::to_string(h) + "x" + std::to_string(w));
    }
};

// Reverse-mode graph over the fixed layer vocabulary. Nodes are created in
// topological order; backward walks them in reverse. Templated on the scalar
// so training runs in float and gradient checks in double.
template <typename T>
class Graph {
public:
    using Var = int;

    // ---- leaves -------------------------------------------------------

    Var input(Tensor<T> t) {
        Node n;
        n.value = std::move(t);
        n.needs = false;
        return push(std::move(n));
    }

    // Parameter leaf. Gradients accumulate into p->grad during backward.
    Var param(Tensor<T>* p) {
        if (!p) throw ValueError("null parameter");
        Node n;
        n.value = *p;
        n.needs = true;
        n.bound = p;
        return push(std::move(n));
    }

    const Tensor<T>& val(Var v) const { return nodes_[static_cast<size_t>(v)].value; }
    const std::vector<T>& grad(Var v) const { return nodes_[static_cast<size_t>(v)].grad; }

    // ---- convolution --------------------------------------------------

    // x: [N,C,H,W] or [C,H,W]; w: [out_channels, in_channels, kh, kw]; b: [out_channels]
    Var conv2d(Var x, const Conv2dSpec& spec, Var w, Var b) {
        auto [n_batch, c, h, wd, batched] = as_nchw(val(x).shape, "conv2d input");
        const auto& ws = val(w).shape;
        if (ws != std::vector<int>{spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w})
            throw ShapeError("conv2d: weight shape " + shape_str(ws) + " does not match spec " +
                             shape_str({spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w}));
        if (c != spec.in_channels)
            throw ShapeError("conv2d: input channels " + std::to_string(c) + " != spec.in_channels " +
                             std::to_string(spec.in_channels));
        if (val(b).shape != std::vector<int>{spec.out_channels})
            throw ShapeError("conv2d: bias shape " + shape_str(val(b).shape) + " != out_channels");
        spec.check_forward(h, wd);
        const int oh = spec.out_h(h), ow = spec.out_w(wd);
        const int K = c * spec.kernel_h * spec.kernel_w, P = oh * ow;

        Node n;
        n.value = Tensor<T>(batched ? std::vector<int>{n_batch, spec.out_channels, oh, ow}
                                    : std::vector<int>{spec.out_channels, oh, ow});
        std::vector<T> col(static_cast<size_t>(K) * P);
        const T* xd = val(x).data.data();
        const T* wdta = val(w).data.data();
        const T* bd = val(b).data.data();
        T* yd = n.value.data.data();
        const size_t xs = static_cast<size_t>(c) * h * wd, ys = static_cast<size_t>(spec.out_channels) * P;
        for (int nb = 0; nb < n_batch; ++nb) {
            im2col(xd + nb * xs, c, h, wd, spec, col.data());
            T* y = yd + nb * ys;
            for (int oc = 0; oc < spec.out_channels; ++oc) {
                T* yr = y + static_cast<size_t>(oc) * P;
                for (int p = 0; p < P; ++p) yr[p] = bd[oc];
                const T* wr = wdta + static_cast<size_t>(oc) * K;
                for (int k = 0; k < K; ++k) {
                    const T wv = wr[k];
                    if (wv == T(0)) continue;
                    const T* cr = col.data() + static_cast<size_t>(k) * P;
                    for (int p = 0; p < P; ++p) yr[p] += wv * cr[p];
                }
            }
        }
        n.needs = needs(x) || needs(w) || needs(b);
        Var out = push(std::move(n));
        if (nodes_.back().needs) {
            Conv2dSpec sp = spec;
            int nb_ = n_batch, c_ = c, h_ = h, w_ = wd;
            nodes_.back().back = [=](Graph& g) {
                g.conv2d_backward(out, x, w, b, sp, nb_, c_, h_, w_);
            };
        }
        return out;
    }

    // Transposed convolution, the exact adjoint of conv2d under shared
    // weights: x: [N, out_channels, h', w'] -> y: [N, in_channels, H, W].
    Var conv_transpose2d(Var x, const Conv2dSpec& spec, Var w, Var b) {
        auto [n_batch, c, h, wd, batched] = as_nchw(val(x).shape, "conv_transpose2d input");
        const auto& ws = val(w).shape;
        if (ws != std::vector<int>{spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w})
            throw ShapeError("conv_transpose2d: weight shape " + shape_str(ws) + " does not match spec");
        if (c != spec.out_channels)
            throw ShapeError("conv_transpose2d: input channels " + std::to_string(c) +
                             " != spec.out_channels " + std::to_string(spec.out_channels));
        if (val(b).shape != std::vector<int>{spec.in_channels})
            throw ShapeError("conv_transpose2d: bias shape " + shape_str(val(b).shape) + " != in_channels");
        const int th = spec.tout_h(h), tw = spec.tout_w(wd);
        if (th < 1 || tw < 1)
            throw ShapeError("conv_transpose2d: empty output " + std::to_string(th) + "x" + std::to_string(tw));
        const int K = spec.in_channels * spec.kernel_h * spec.kernel_w, P = h * wd;

        Node n;
        n.value = Tensor<T>(batched ? std::vector<int>{n_batch, spec.in_channels, th, tw}
                                    : std::vector<int>{spec.in_channels, th, tw});
        std::vector<T> col(static_cast<size_t>(K) * P);
        const T* xd = val(x).data.data();
        const T* wdta = val(w).data.data();
        const T* bd = val(b).data.data();
        T* yd = n.value.data.data();
        const size_t xs = static_cast<size_t>(c) * P, ys = static_cast<size_t>(spec.in_channels) * th * tw;
        for (int nb = 0; nb < n_batch; ++nb) {
            // col = W^T * x, then scatter back to the image grid
            const T* xb = xd + nb * xs;
            std::fill(col.begin(), col.end(), T(0));
            for (int oc = 0; oc < c; ++oc) {
                const T* wr = wdta + static_cast<size_t>(oc) * K;
                const T* xr = xb + static_cast<size_t>(oc) * P;
                for (int k = 0; k < K; ++k) {
                    const T wv = wr[k];
                    if (wv == T(0)) continue;
                    T* cr = col.data() + static_cast<size_t>(k) * P;
                    for (int p = 0; p < P; ++p) cr[p] += wv * xr[p];
                }
            }
            T* yb = yd + nb * ys;
            for (int ch = 0; ch < spec.in_channels; ++ch) {
                T* yr = yb + static_cast<size_t>(ch) * th * tw;
                for (int p = 0; p < th * tw; ++p) yr[p] = bd[ch];
            }
            col2im(col.data(), spec.in_channels, th, tw, spec, h, wd, yb);
        }
        n.needs = needs(x) || needs(w) || needs(b);
        Var out = push(std::move(n));
        if (nodes_.back().needs) {
            Conv2dSpec sp = spec;
            int nb_ = n_batch, c_ = c, h_ = h, w_ = wd, th_ = th, tw_ = tw;
            nodes_.back().back = [=](Graph& g) {
                g.convt_backward(out, x, w, b, sp, nb_, c_, h_, w_, th_, tw_);
            };
        }
        return out;
    }

    // ---- dense / pooling / shaping ------------------------------------

    // x: [N,F] or [F]; w: [M,F]; b: [M]
    Var fully_connected(Var x, Var w, Var b) {
        const auto& xs = val(x).shape;
        const auto& ws = val(w).shape;
        if (ws.size() != 2) throw ShapeError("fully_connected: weight must be rank 2, got " + shape_str(ws));
        const int M = ws[0], F = ws[1];
        bool batched = xs.size() == 2;
        int n_batch = batched ? xs[0] : 1;
        int f_in = batched ? xs[1] : (xs.size() == 1 ? xs[0] : -1);
        if (f_in != F)
            throw ShapeError("fully_connected: input feature dim " + std::to_string(f_in) +
                             " != weight column count " + std::to_string(F));
        if (val(b).shape != std::vector<int>{M})
            throw ShapeError("fully_connected: bias shape " + shape_str(val(b).shape) + " != " + std::to_string(M));

        Node n;
        n.value = Tensor<T>(batched ? std::vector<int>{n_batch, M} : std::vector<int>{M});
        const T* xd = val(x).data.data();
        const T* wd = val(w).data.data();
        const T* bd = val(b).data.data();
        T* yd = n.value.data.data();
        for (int nb = 0; nb < n_batch; ++nb) {
            const T* xr = xd + static_cast<size_t>(nb) * F;
            T* yr = yd + static_cast<size_t>(nb) * M;
            for (int m = 0; m < M; ++m) {
                const T* wr = wd + static_cast<size_t>(m) * F;
                T acc = bd[m];
                for (int f = 0; f < F; ++f) acc += wr[f] * xr[f];
                yr[m] = acc;
            }
        }
        n.needs = needs(x) || needs(w) || needs(b);
        Var out = push(std::move(n));
        if (nodes_.back().needs) {
            nodes_.back().back = [out, x, w, b, n_batch, M, F](Graph& g) {
                const T* dy = g.grad(out).data();
                const T* xd2 = g.val(x).data.data();
                const T* wd2 = g.val(w).data.data();
                for (int nb = 0; nb < n_batch; ++nb) {
                    const T* dyr = dy + static_cast<size_t>(nb) * M;
                    const T* xr = xd2 + static_cast<size_t>(nb) * F;
                    if (g.needs(w)) {
                        T* dw = g.gbuf(w);
                        for (int m = 0; m < M; ++m) {
                            T* dwr = dw + static_cast<size_t>(m) * F;
                            const T d = dyr[m];
                            for (int f = 0; f < F; ++f) dwr[f] += d * xr[f];
                        }
                    }
                    if (g.needs(b)) {
                        T* db = g.gbuf(b);
                        for (int m = 0; m < M; ++m) db[m] += dyr[m];
                    }
                    if (g.needs(x)) {
                        T* dx = g.gbuf(x) + static_cast<size_t>(nb) * F;
                        for (int m = 0; m < M; ++m) {
                            const T d = dyr[m];
                            const T* wr = wd2 + static_cast<size_t>(m) * F;
                            for (int f = 0; f < F; ++f) dx[f] += d * wr[f];
                        }
                    }
                }
            };
        }
        return out;
    }

    // 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
    Var max_pool2(Var x) {
        auto [n_batch, c, h, w, batched] = as_nchw(val(x).shape, "max_pool2 input");
        const int oh = h / 2, ow = w / 2;
        if (oh < 1 || ow < 1) throw ShapeError("max_pool2: input " + std::to_string(h) + "x" + std::to_string(w) + " too small");
        Node n;
        n.value = Tensor<T>(batched ? std::vector<int>{n_batch, c, oh, ow} : std::vector<int>{c, oh, ow});
        auto argmax = std::make_shared<std::vector<int>>(n.value.numel());
        const T* xd = val(x).data.data();
        T* yd = n.value.data.data();
        size_t q = 0;
        for (int nb = 0; nb < n_batch; ++nb)
            for (int ch = 0; ch < c; ++ch) {
                const T* plane = xd + (static_cast<size_t>(nb) * c + ch) * h * w;
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox, ++q) {
                        int base = oy * 2 * w + ox * 2;
                        int best = base;
                        T bv = plane[base];
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                int idx = base + dy * w + dx;
                                if (plane[idx] > bv) { bv = plane[idx]; best = idx; }
                            }
                        yd[q] = bv;
                        (*argmax)[q] = static_cast<int>((static_cast<size_t>(nb) * c + ch) * h * w) + best;
                    }
            }
        n.needs = needs(x);
        Var out = push(std::move(n));
        if (nodes_.back().needs) {
            nodes_.back().back = [out, x, argmax](Graph& g) {
                const T* dy = g.grad(out).data();
                T* dx = g.gbuf(x);
                for (size_t i = 0; i < argmax->size(); ++i) dx[(*argmax)[i]] += dy[i];
            };
        }
        return out;
    }

    Var reshape(Var x, std::vector<int> new_shape) {
        if (Tensor<T>::numel_of(new_shape) != val(x).numel())
            throw ShapeError("reshape: element count mismatch " + shape_str(val(x).shape) + " -> " + shape_str(new_shape));
        Node n;
        n.value = Tensor<T>(new_shape, val(x).data);
        n.needs = needs(x);
        Var out = push(std::move(n));
        if (nodes_.back().needs) {
            nodes_.back().back = [out, x](Graph& g) {
                const T* dy = g.grad(out).data();
                T* dx = g.gbuf(x);
                for (size_t i = 0; i < g.val(x).numel(); ++i) dx[i] += dy[i];
            };
        }
        return out;
    }

    // Concatenate along dim 1 ([N,F] features or [N,C,H,W] channels);
    // rank-1/rank-3 inputs concatenate along dim 0.
    Var concat(Var a, Var b) {
        const auto& sa = val(a).shape;
        const auto& sb = val(b).shape;
        if (sa.size() != sb.size()) throw ShapeError("concat: rank mismatch");
        int dim = (sa.size() == 2 || sa.size() == 4) ? 1 : 0;
        for (size_t i = 0; i < sa.size(); ++i)
            if (static_cast<int>(i) != dim && sa[i] != sb[i])
                throw ShapeError("concat: shapes " + shape_str(sa) + " and " + shape_str(sb) + " disagree off-axis");
        std::vector<int> os = sa;
        os[static_cast<size_t>(dim)] += sb[static_cast<size_t>(dim)];
        size_t outer = 1;
        for (int i = 0; i < dim; ++i) outer *= static_cast<size_t>(sa[static_cast<size_t>(i)]);
        size_t inner_a = val(a).numel() / outer, inner_b = val(b).numel() / outer;
        Node n;
        n.value = Tensor<T>(os);
        const T* ad = val(a).data.data();
        const T* bd = val(b).data.data();
        T* yd = n.value.data.data();
        for (size_t o = 0; o < outer; ++o) {
            std::copy(ad + o * inner_a, ad + (o + 1) * inner_a, yd + o * (inner_a + inner_b));
            std::copy(bd + o * inner_b, bd + (o + 1) * inner_b, yd + o * (inner_a + inner_b) + inner_a);
        }
        n.needs = needs(a) || needs(b);
        Var out = push(std::move(n));
        if (nodes_.back().needs) {
            nodes_.back().back = [out, a, b, outer, inner_a, inner_b](Graph& g) {
                const T* dy = g.grad(out).data();
                for (size_t o = 0; o < outer; ++o) {
                    if (g.needs(a)) {
                        T* da = g.gbuf(a);
                        for (size_t i = 0; i < inner_a; ++i) da[o * inner_a + i] += dy[o * (inner_a + inner_b) + i];
                    }
                    if (g.needs(b)) {
                        T* db = g.gbuf(b);
                        for (size_t i = 0; i < inner_b; ++i) db[o * inner_b + i] += dy[o * (inner_a + inner_b) + inner_a + i];
                    }
                }
            };
        }
        return out;
    }

    // v: [N,F] -> [N,F,H,W], each feature broadcast over the spatial grid.
    Var replicate_spatial(Var v, int h, int w) {
        const auto& s = val(v).shape;
        if (s.size() != 2) throw ShapeError("replicate_spatial: expected [N,F], got " + shape_str(s));
        const int n_batch = s[0], f = s[1];
        Node n;
        n.value = Tensor<T>({n_batch, f, h, w});
        const T* vd = val(v).data.data();
        T* yd = n.value.data.data();
        for (int nb = 0; nb < n_batch; ++nb)
            for (int ff = 0; ff < f; ++ff) {
                T x = vd[static_cast<size_t>(nb) * f + ff];
                T* yr = yd + (static_cast<size_t>(nb) * f + ff) * h * w;
                for (int p = 0; p < h * w; ++p) yr[p] = x;
            }
        n.needs = needs(v);
        Var out = push(std::move(n));
        if (nodes_.back().needs) {
            nodes_.back().back = [out, v, n_batch, f, h, w](Graph& g) {
                const T* dy = g.grad(out).data();
                T* dv = g.gbuf(v);
                for (int nb = 0; nb < n_batch; ++nb)
                    for (int ff = 0; ff < f; ++ff) {
                        const T* dyr = dy + (static_cast<size_t>(nb) * f + ff) * h * w;
                        T acc = T(0);
                        for (int p = 0; p < h * w; ++p) acc += dyr[p];
                        dv[static_cast<size_t>(nb) * f + ff] += acc;
                    }
            };
        }
        return out;
    }

    // ---- activations --------------------------------------------------

    Var relu(Var x) { return leaky_relu(x, T(0)); }

    Var leaky_relu(Var x, T slope) {
        return elementwise(x, [slope](T v) { return v > T(0) ? v : slope * v; },
                           [slope](T v, T) { return v > T(0) ? T(1) : slope; });
    }

    Var sigmoid(Var x) {
        return elementwise(x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
                           [](T, T y) { return y * (T(1) - y); });
    }

    Var tanh_(Var x) {
        return elementwise(x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
    }

    // Inverted dropout: training zeroes with prob (1 - keep_prob) and scales
    // survivors by 1/keep_prob; inference is identity.
    Var dropout(Var x, double keep_prob, Rng& rng, bool training) {
        if (keep_prob <= 0.0 || keep_prob > 1.0)
            throw ValueError("dropout: keep_prob must be in (0,1], got " + std::to_string(keep_prob));
        if (!training || keep_prob == 1.0) {
            return elementwise(x, [](T v) { return v; }, [](T, T) { return T(1); });
        }
        auto mask = std::make_shared<std::vector<T>>(val(x).numel());
        const T scale = static_cast<T>(1.0 / keep_prob);
        for (auto& m : *mask) m = rng.uniform() < keep_prob ? scale : T(0);
        Node n;
        n.value = val(x);
        for (size_t i = 0; i < n.value.numel(); ++i) n.value.data[i] *= (*mask)[i];
        n.needs = needs(x);
        Var out = push(std::move(n));
        if (nodes_.back().needs) {
            nodes_.back().back = [out, x, mask](Graph& g) {
                const T* dy = g.grad(out).data();
                T* dx = g.gbuf(x);
                for (size_t i = 0; i < mask->size(); ++i) dx[i] += dy[i] * (*mask)[i];
            };
        }
        return out;
    }

    // Per-channel batch normalization over [N,C,H,W] (or [N,F] with F as
    // channels). Training mode uses batch statistics and updates the running
    // buffers; inference mode normalizes with the running buffers.
    Var batch_norm(Var x, Var gamma, Var beta, Tensor<T>* run_mean, Tensor<T>* run_var,
                   bool training, T momentum = T(0.1), T eps = T(1e-5)) {
        const auto& s = val(x).shape;
        int n_batch, c, sp;
        if (s.size() == 4) { n_batch = s[0]; c = s[1]; sp = s[2] * s[3]; }
        else if (s.size() == 2) { n_batch = s[0]; c = s[1]; sp = 1; }
        else throw ShapeError("batch_norm: expected [N,C,H,W] or [N,F], got " + shape_str(s));
        if (val(gamma).shape != std::vector<int>{c} || val(beta).shape != std::vector<int>{c})
            throw ShapeError("batch_norm: gamma/beta must have shape [" + std::to_string(c) + "]");
        const int m = n_batch * sp;

        auto mean = std::make_shared<std::vector<T>>(c);
        auto istd = std::make_shared<std::vector<T>>(c);
        auto xhat = std::make_shared<std::vector<T>>(val(x).numel());
        const T* xd = val(x).data.data();
        for (int ch = 0; ch < c; ++ch) {
            T mu, var;
            if (training) {
                T acc = T(0);
                for (int nb = 0; nb < n_batch; ++nb) {
                    const T* p = xd + (static_cast<size_t>(nb) * c + ch) * sp;
                    for (int i = 0; i < sp; ++i) acc += p[i];
                }
                mu = acc / static_cast<T>(m);
                T vacc = T(0);
                for (int nb = 0; nb < n_batch; ++nb) {
                    const T* p = xd + (static_cast<size_t>(nb) * c + ch) * sp;
                    for (int i = 0; i < sp; ++i) { T d = p[i] - mu; vacc += d * d; }
                }
                var = vacc / static_cast<T>(m);
                if (run_mean && run_var) {
                    run_mean->data[ch] = (T(1) - momentum) * run_mean->data[ch] + momentum * mu;
                    run_var->data[ch] = (T(1) - momentum) * run_var->data[ch] + momentum * var;
                }
            } else {
                if (!run_mean || !run_var) throw ValueError("batch_norm: inference requires running stats");
                mu = run_mean->data[ch];
                var = run_var->data[ch];
            }
            (*mean)[ch] = mu;
            (*istd)[ch] = T(1) / std::sqrt(var + eps);
        }
        Node n;
        n.value = Tensor<T>(s);
        const T* gd = val(gamma).data.data();
        const T* bd = val(beta).data.data();
        T* yd = n.value.data.data();
        for (int nb = 0; nb < n_batch; ++nb)
            for (int ch = 0; ch < c; ++ch) {
                const T* p = xd + (static_cast<size_t>(nb) * c + ch) * sp;
                T* xh = xhat->data() + (static_cast<size_t>(nb) * c + ch) * sp;
                T* y = yd + (static_cast<size_t>(nb) * c + ch) * sp;
                for (int i = 0; i < sp; ++i) {
                    xh[i] = (p[i] - (*mean)[ch]) * (*istd)[ch];
                    y[i] = gd[ch] * xh[i] + bd[ch];
                }
            }
        n.needs = needs(x) || needs(gamma) || needs(beta);
        Var out = push(std::move(n));
        if (nodes_.back().needs) {
            bool train_mode = training;
            nodes_.back().back = [out, x, gamma, beta, n_batch, c, sp, m, istd, xhat, train_mode](Graph& g) {
                const T* dy = g.grad(out).data();
                const T* gd2 = g.val(gamma).data.data();
                for (int ch = 0; ch < c; ++ch) {
                    T sum_dy = T(0), sum_dy_xhat = T(0);
                    for (int nb = 0; nb < n_batch; ++nb) {
                        const T* dyr = dy + (static_cast<size_t>(nb) * c + ch) * sp;
                        const T* xh = xhat->data() + (static_cast<size_t>(nb) * c + ch) * sp;
                        for (int i = 0; i < sp; ++i) { sum_dy += dyr[i]; sum_dy_xhat += dyr[i] * xh[i]; }
                    }
                    if (g.needs(gamma)) g.gbuf(gamma)[ch] += sum_dy_xhat;
                    if (g.needs(beta)) g.gbuf(beta)[ch] += sum_dy;
                    if (g.needs(x)) {
                        T* dx = g.gbuf(x);
                        const T k = gd2[ch] * (*istd)[ch];
                        const T mdy = sum_dy / static_cast<T>(m), mdyx = sum_dy_xhat / static_cast<T>(m);
                        for (int nb = 0; nb < n_batch; ++nb) {
                            const T* dyr = dy + (static_cast<size_t>(nb) * c + ch) * sp;
                            const T* xh = xhat->data() + (static_cast<size_t>(nb) * c + ch) * sp;
                            T* dxr = dx + (static_cast<size_t>(nb) * c + ch) * sp;
                            if (train_mode)
                                for (int i = 0; i < sp; ++i) dxr[i] += k * (dyr[i] - mdy - xh[i] * mdyx);
                            else
                                for (int i = 0; i < sp; ++i) dxr[i] += k * dyr[i];
                        }
                    }
                }
            };
        }
        return out;
    }

    // ---- losses and reductions ----------------------------------------

    Var mse(Var pred, Var target) {
        if (val(pred).shape != val(target).shape)
            throw ShapeError("mse: shape mismatch " + shape_str(val(pred).shape) + " vs " + shape_str(val(target).shape));
        const size_t n = val(pred).numel();
        Node nd;
        nd.value = Tensor<T>({1});
        T acc = T(0);
        for (size_t i = 0; i < n; ++i) {
            T d = val(pred).data[i] - val(target).data[i];
            acc += d * d;
        }
        nd.value.data[0] = acc / static_cast<T>(n);
        nd.needs = needs(pred) || needs(target);
        Var out = push(std::move(nd));
        if (nodes_.back().needs) {
            nodes_.back().back = [out, pred, target, n](Graph& g) {
                const T d0 = g.grad(out)[0];
                const T k = d0 * T(2) / static_cast<T>(n);
                for (size_t i = 0; i < n; ++i) {
                    T d = g.val(pred).data[i] - g.val(target).data[i];
                    if (g.needs(pred)) g.gbuf(pred)[i] += k * d;
                    if (g.needs(target)) g.gbuf(target)[i] -= k * d;
                }
            };
        }
        return out;
    }

    // Binary cross entropy against a constant target (0 or 1), mean over
    // elements. Inputs must already be sigmoid outputs in (0,1).
    Var bce_const(Var p, T target) {
        const size_t n = val(p).numel();
        for (size_t i = 0; i < n; ++i) {
            T v = val(p).data[i];
            if (!(v > T(0) && v < T(1)))
                throw ValueError("bce: input " + std::to_string(static_cast<double>(v)) +
                                 " outside (0,1); apply sigmoid first");
        }
        Node nd;
        nd.value = Tensor<T>({1});
        T acc = T(0);
        for (size_t i = 0; i < n; ++i) {
            T v = val(p).data[i];
            acc += -(target * std::log(v) + (T(1) - target) * std::log(T(1) - v));
        }
        nd.value.data[0] = acc / static_cast<T>(n);
        nd.needs = needs(p);
        Var out = push(std::move(nd));
        if (nodes_.back().needs) {
            nodes_.back().back = [out, p, target, n](Graph& g) {
                const T k = g.grad(out)[0] / static_cast<T>(n);
                T* dp = g.gbuf(p);
                for (size_t i = 0; i < n; ++i) {
                    T v = g.val(p).data[i];
                    dp[i] += k * (-(target / v) + (T(1) - target) / (T(1) - v));
                }
            };
        }
        return out;
    }

    Var bce(Var p, Var target) {
        if (val(p).shape != val(target).shape) throw ShapeError("bce: shape mismatch");
        const size_t n = val(p).numel();
        for (size_t i = 0; i < n; ++i) {
            T v = val(p).data[i];
            if (!(v > T(0) && v < T(1)))
                throw ValueError("bce: input outside (0,1); apply sigmoid first");
        }
        Node nd;
        nd.value = Tensor<T>({1});
        T acc = T(0);
        for (size_t i = 0; i < n; ++i) {
            T v = val(p).data[i], t = val(target).data[i];
            acc += -(t * std::log(v) + (T(1) - t) * std::log(T(1) - v));
        }
        nd.value.data[0] = acc / static_cast<T>(n);
        nd.needs = needs(p);
        Var out = push(std::move(nd));
        if (nodes_.back().needs) {
            nodes_.back().back = [out, p, target, n](Graph& g) {
                const T k = g.grad(out)[0] / static_cast<T>(n);
                T* dp = g.gbuf(p);
                for (size_t i = 0; i < n; ++i) {
                    T v = g.val(p).data[i], t = g.val(target).data[i];
                    dp[i] += k * (-(t / v) + (T(1) - t) / (T(1) - v));
                }
            };
        }
        return out;
    }

    // logits: [N,C] (or [C] for a single sample), labels in [0,C)
    Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
        const auto& s = val(logits).shape;
        bool batched = s.size() == 2;
        const int n_batch = batched ? s[0] : 1;
        const int c = batched ? s[1] : s[0];
        if (static_cast<int>(labels.size()) != n_batch)
            throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                             std::to_string(n_batch));
        for (int l : labels)
            if (l < 0 || l >= c) throw ValueError("softmax_cross_entropy: label " + std::to_string(l) + " out of range");
        auto probs = std::make_shared<std::vector<T>>(val(logits).numel());
        const T* xd = val(logits).data.data();
        T acc = T(0);
        for (int nb = 0; nb < n_batch; ++nb) {
            const T* xr = xd + static_cast<size_t>(nb) * c;
            T mx = xr[0];
            for (int i = 1; i < c; ++i) mx = std::max(mx, xr[i]);
            T z = T(0);
            for (int i = 0; i < c; ++i) z += std::exp(xr[i] - mx);
            T lse = mx + std::log(z);
            for (int i = 0; i < c; ++i) (*probs)[static_cast<size_t>(nb) * c + i] = std::exp(xr[i] - lse);
            acc += lse - xr[labels[static_cast<size_t>(nb)]];
        }
        Node nd;
        nd.value = Tensor<T>({1});
        nd.value.data[0] = acc / static_cast<T>(n_batch);
        nd.needs = needs(logits);
        Var out = push(std::move(nd));
        if (nodes_.back().needs) {
            auto labs = std::make_shared<std::vector<int>>(labels);
            nodes_.back().back = [out, logits, probs, labs, n_batch, c](Graph& g) {
                const T k = g.grad(out)[0] / static_cast<T>(n_batch);
                T* dx = g.gbuf(logits);
                for (int nb = 0; nb < n_batch; ++nb)
                    for (int i = 0; i < c; ++i) {
                        T p = (*probs)[static_cast<size_t>(nb) * c + i];
                        dx[static_cast<size_t>(nb) * c + i] += k * (p - (i == (*labs)[static_cast<size_t>(nb)] ? T(1) : T(0)));
                    }
            };
        }
        return out;
    }

    Var sum(Var x) {
        Node nd;
        nd.value = Tensor<T>({1});
        T acc = T(0);
        for (T v : val(x).data) acc += v;
        nd.value.data[0] = acc;
        nd.needs = needs(x);
        Var out = push(std::move(nd));
        if (nodes_.back().needs) {
            nodes_.back().back = [out, x](Graph& g) {
                const T d = g.grad(out)[0];
                T* dx = g.gbuf(x);
                for (size_t i = 0; i < g.val(x).numel(); ++i) dx[i] += d;
            };
        }
        return out;
    }

    Var mean_all(Var x) { return scale(sum(x), T(1) / static_cast<T>(val(x).numel())); }

    Var add(Var a, Var b) {
        if (val(a).shape != val(b).shape) throw ShapeError("add: shape mismatch");
        Node nd;
        nd.value = val(a);
        for (size_t i = 0; i < nd.value.numel(); ++i) nd.value.data[i] += val(b).data[i];
        nd.needs = needs(a) || needs(b);
        Var out = push(std::move(nd));
        if (nodes_.back().needs) {
            nodes_.back().back = [out, a, b](Graph& g) {
                const T* dy = g.grad(out).data();
                size_t n = g.val(a).numel();
                if (g.needs(a)) { T* da = g.gbuf(a); for (size_t i = 0; i < n; ++i) da[i] += dy[i]; }
                if (g.needs(b)) { T* db = g.gbuf(b); for (size_t i = 0; i < n; ++i) db[i] += dy[i]; }
            };
        }
        return out;
    }

    Var scale(Var x, T c) {
        Node nd;
        nd.value = val(x);
        for (auto& v : nd.value.data) v *= c;
        nd.needs = needs(x);
        Var out = push(std::move(nd));
        if (nodes_.back().needs) {
            nodes_.back().back = [out, x, c](Graph& g) {
                const T* dy = g.grad(out).data();
                T* dx = g.gbuf(x);
                for (size_t i = 0; i < g.val(x).numel(); ++i) dx[i] += c * dy[i];
            };
        }
        return out;
    }

    // Sum of squares; used for the L2 penalty on fully connected weights.
    Var l2sum(Var x) {
        Node nd;
        nd.value = Tensor<T>({1});
        T acc = T(0);
        for (T v : val(x).data) acc += v * v;
        nd.value.data[0] = acc;
        nd.needs = needs(x);
        Var out = push(std::move(nd));
        if (nodes_.back().needs) {
            nodes_.back().back = [out, x](Graph& g) {
                const T d = g.grad(out)[0];
                T* dx = g.gbuf(x);
                for (size_t i = 0; i < g.val(x).numel(); ++i) dx[i] += d * T(2) * g.val(x).data[i];
            };
        }
        return out;
    }

    // ---- backward -----------------------------------------------------

    // Seeds d(loss)/d(loss) = 1 and walks the tape in reverse. Parameter
    // leaves accumulate into their bound Tensor::grad. Repeated calls without
    // zeroing accumulate.
    void backward(Var loss) {
        if (val(loss).numel() != 1)
            throw ShapeError("backward: loss must be scalar, got " + shape_str(val(loss).shape));
        for (auto& n : nodes_)
            if (n.needs) n.grad.assign(n.value.numel(), T(0));
        auto& ln = nodes_[static_cast<size_t>(loss)];
        if (ln.grad.empty()) ln.grad.assign(1, T(0));
        ln.grad[0] = T(1);
        for (int i = loss; i >= 0; --i) {
            auto& n = nodes_[static_cast<size_t>(i)];
            if (n.back && n.needs) n.back(*this);
        }
        for (auto& n : nodes_) {
            if (n.bound) {
                n.bound->ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) n.bound->grad[i] += n.grad[i];
                n.grad.assign(n.grad.size(), T(0));
            }
        }
    }

    bool needs(Var v) const { return nodes_[static_cast<size_t>(v)].needs; }

    T* gbuf(Var v) {
        auto& n = nodes_[static_cast<size_t>(v)];
        if (n.grad.size() != n.value.numel()) n.grad.assign(n.value.numel(), T(0));
        return n.grad.data();
    }

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        std::vector<T> grad;
        bool needs = false;
        std::function<void(Graph&)> back;
        Tensor<T>* bound = nullptr;
    };

    std::vector<Node> nodes_;

    Var push(Node&& n) {
        nodes_.push_back(std::move(n));
        return static_cast<Var>(nodes_.size() - 1);
    }

    struct NchwInfo { int n, c, h, w; bool batched; };

    static NchwInfo as_nchw(const std::vector<int>& s, const char* what) {
        if (s.size() == 4) return {s[0], s[1], s[2], s[3], true};
        if (s.size() == 3) return {1, s[0], s[1], s[2], false};
        throw ShapeError(std::string(what) + ": expected rank 3 or 4, got " + shape_str(s));
    }

    template <typename Fwd, typename Bwd>
    Var elementwise(Var x, Fwd f, Bwd df) {
        Node n;
        n.value = val(x);
        for (auto& v : n.value.data) v = f(v);
        n.needs = needs(x);
        auto out_vals = std::make_shared<std::vector<T>>(n.value.data);
        Var out = push(std::move(n));
        if (nodes_.back().needs) {
            nodes_.back().back = [out, x, df, out_vals](Graph& g) {
                const T* dy = g.grad(out).data();
                T* dx = g.gbuf(x);
                const auto& xv = g.val(x).data;
                for (size_t i = 0; i < xv.size(); ++i) dx[i] += dy[i] * df(xv[i], (*out_vals)[i]);
            };
        }
        return out;
    }

    static void im2col(const T* x, int c, int h, int w, const Conv2dSpec& sp, T* col) {
        const int oh = sp.out_h(h), ow = sp.out_w(w), P = oh * ow;
        size_t k = 0;
        for (int ch = 0; ch < c; ++ch)
            for (int ky = 0; ky < sp.kernel_h; ++ky)
                for (int kx = 0; kx < sp.kernel_w; ++kx, ++k) {
                    T* cr = col + k * P;
                    const T* plane = x + static_cast<size_t>(ch) * h * w;
                    for (int oy = 0; oy < oh; ++oy) {
                        int iy = oy * sp.stride_h - sp.pad_h + ky;
                        T* crow = cr + static_cast<size_t>(oy) * ow;
                        if (iy < 0 || iy >= h) {
                            for (int ox = 0; ox < ow; ++ox) crow[ox] = T(0);
                            continue;
                        }
                        const T* xrow = plane + static_cast<size_t>(iy) * w;
                        for (int ox = 0; ox < ow; ++ox) {
                            int ix = ox * sp.stride_w - sp.pad_w + kx;
                            crow[ox] = (ix >= 0 && ix < w) ? xrow[ix] : T(0);
                        }
                    }
                }
    }

    // Scatter-add of a column matrix back onto the [c,h,w] grid; (ph, pw) is
    // the conv-orientation output size the columns were laid out for.
    static void col2im(const T* col, int c, int h, int w, const Conv2dSpec& sp, int oh, int ow, T* x) {
        const int P = oh * ow;
        size_t k = 0;
        for (int ch = 0; ch < c; ++ch)
            for (int ky = 0; ky < sp.kernel_h; ++ky)
                for (int kx = 0; kx < sp.kernel_w; ++kx, ++k) {
                    const T* cr = col + k * P;
                    T* plane = x + static_cast<size_t>(ch) * h * w;
                    for (int oy = 0; oy < oh; ++oy) {
                        int iy = oy * sp.stride_h - sp.pad_h + ky;
                        if (iy < 0 || iy >= h) continue;
                        const T* crow = cr + static_cast<size_t>(oy) * ow;
                        T* xrow = plane + static_cast<size_t>(iy) * w;
                        for (int ox = 0; ox < ow; ++ox) {
                            int ix = ox * sp.stride_w - sp.pad_w + kx;
                            if (ix >= 0 && ix < w) xrow[ix] += crow[ox];
                        }
                    }
                }
    }

    void conv2d_backward(Var out, Var x, Var w, Var b, const Conv2dSpec& sp, int n_batch, int c, int h, int wd) {
        const int oh = sp.out_h(h), ow = sp.out_w(wd);
        const int K = c * sp.kernel_h * sp.kernel_w, P = oh * ow;
        const T* dy = grad(out).data();
        const T* xd = val(x).data.data();
        const T* wdta = val(w).data.data();
        std::vector<T> col(static_cast<size_t>(K) * P), dcol(static_cast<size_t>(K) * P);
        const size_t xs = static_cast<size_t>(c) * h * wd, ys = static_cast<size_t>(sp.out_channels) * P;
        for (int nb = 0; nb < n_batch; ++nb) {
            const T* dyb = dy + nb * ys;
            if (needs(w) || needs(b)) {
                im2col(xd + nb * xs, c, h, wd, sp, col.data());
                if (needs(w)) {
                    T* dw = gbuf(w);
                    for (int oc = 0; oc < sp.out_channels; ++oc) {
                        const T* dyr = dyb + static_cast<size_t>(oc) * P;
                        T* dwr = dw + static_cast<size_t>(oc) * K;
                        for (int k = 0; k < K; ++k) {
                            const T* cr = col.data() + static_cast<size_t>(k) * P;
                            T acc = T(0);
                            for (int p = 0; p < P; ++p) acc += dyr[p] * cr[p];
                            dwr[k] += acc;
                        }
                    }
                }
                if (needs(b)) {
                    T* db = gbuf(b);
                    for (int oc = 0; oc < sp.out_channels; ++oc) {
                        const T* dyr = dyb + static_cast<size_t>(oc) * P;
                        T acc = T(0);
                        for (int p = 0; p < P; ++p) acc += dyr[p];
                        db[oc] += acc;
                    }
                }
            }
            if (needs(x)) {
                std::fill(dcol.begin(), dcol.end(), T(0));
                for (int oc = 0; oc < sp.out_channels; ++oc) {
                    const T* wr = wdta + static_cast<size_t>(oc) * K;
                    const T* dyr = dyb + static_cast<size_t>(oc) * P;
                    for (int k = 0; k < K; ++k) {
                        const T wv = wr[k];
                        if (wv == T(0)) continue;
                        T* dcr = dcol.data() + static_cast<size_t>(k) * P;
                        for (int p = 0; p < P; ++p) dcr[p] += wv * dyr[p];
                    }
                }
                col2im(dcol.data(), c, h, wd, sp, oh, ow, gbuf(x) + nb * xs);
            }
        }
    }

    void convt_backward(Var out, Var x, Var w, Var b, const Conv2dSpec& sp, int n_batch, int c, int h, int wd,
                        int th, int tw) {
        const int K = sp.in_channels * sp.kernel_h * sp.kernel_w, P = h * wd;
        const T* dy = grad(out).data();
        const T* xd = val(x).data.data();
        const T* wdta = val(w).data.data();
        std::vector<T> col(static_cast<size_t>(K) * P);
        const size_t xs = static_cast<size_t>(c) * P, ys = static_cast<size_t>(sp.in_channels) * th * tw;
        for (int nb = 0; nb < n_batch; ++nb) {
            const T* dyb = dy + nb * ys;
            // col of the upstream gradient, laid out for the conv orientation
            im2col(dyb, sp.in_channels, th, tw, sp, col.data());
            if (needs(x)) {
                T* dx = gbuf(x) + nb * xs;
                for (int oc = 0; oc < c; ++oc) {
                    const T* wr = wdta + static_cast<size_t>(oc) * K;
                    T* dxr = dx + static_cast<size_t>(oc) * P;
                    for (int k = 0; k < K; ++k) {
                        const T wv = wr[k];
                        if (wv == T(0)) continue;
                        const T* cr = col.data() + static_cast<size_t>(k) * P;
                        for (int p = 0; p < P; ++p) dxr[p] += wv * cr[p];
                    }
                }
            }
            if (needs(w)) {
                T* dw = gbuf(w);
                const T* xb = xd + nb * xs;
                for (int oc = 0; oc < c; ++oc) {
                    const T* xr = xb + static_cast<size_t>(oc) * P;
                    T* dwr = dw + static_cast<size_t>(oc) * K;
                    for (int k = 0; k < K; ++k) {
                        const T* cr = col.data() + static_cast<size_t>(k) * P;
                        T acc = T(0);
                        for (int p = 0; p < P; ++p) acc += xr[p] * cr[p];
                        dwr[k] += acc;
                    }
                }
            }
            if (needs(b)) {
                T* db = gbuf(b);
                for (int ch = 0; ch < sp.in_channels; ++ch) {
                    const T* dyr = dyb + static_cast<size_t>(ch) * th * tw;
                    T acc = T(0);
                    for (int p = 0; p < th * tw; ++p) acc += dyr[p];
                    db[ch] += acc;
                }
            }
        }
    }
};

}  // namespace xmodal
