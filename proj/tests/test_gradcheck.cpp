#include <cmath>
#include <functional>

#include "doctest.h"
#include "xmodal/graph.hpp"
#include "xmodal/rng.hpp"

using namespace xmodal;

namespace {

// Central-difference oracle: checks d(loss)/d(param) for every element of
// every parameter against (f(x+h) - f(x-h)) / 2h.
void gradcheck(std::vector<Tensor<double>*> params,
               const std::function<double(bool)>& eval_and_maybe_backward,
               double h = 1e-5, double tol = 1e-4) {
    for (auto* p : params) {
        p->requires_grad = true;
        p->zero_grad();
    }
    eval_and_maybe_backward(true);
    for (auto* p : params) {
        REQUIRE(p->grad.size() == p->data.size());
        for (size_t i = 0; i < p->data.size(); ++i) {
            const double orig = p->data[i];
            p->data[i] = orig + h;
            const double fp = eval_and_maybe_backward(false);
            p->data[i] = orig - h;
            const double fm = eval_and_maybe_backward(false);
            p->data[i] = orig;
            const double num = (fp - fm) / (2.0 * h);
            const double ana = p->grad[i];
            const double denom = std::max({std::abs(num), std::abs(ana), 1e-8});
            CHECK_MESSAGE(std::abs(num - ana) / denom < tol,
                          "elem " << i << ": analytic " << ana << " vs numeric " << num);
        }
    }
}

Tensor<double> randt(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("gradcheck: fully connected layer") {
    Rng rng(100);
    Tensor<double> w = randt({5, 8}, rng), b = randt({5}, rng), x = randt({3, 8}, rng);
    Tensor<double> tgt = randt({3, 5}, rng);
    gradcheck({&w, &b, &x}, [&](bool bw) {
        Graph<double> g;
        auto y = g.fully_connected(g.param(&x), g.param(&w), g.param(&b));
        auto l = g.mse(y, g.input(tgt));
        if (bw) g.backward(l);
        return g.val(l).data[0];
    });
}

TEST_CASE("gradcheck: conv2d") {
    Rng rng(101);
    Conv2dSpec sp;
    sp.kernel_h = sp.kernel_w = 3;
    sp.stride_h = 2;
    sp.stride_w = 1;
    sp.pad_h = sp.pad_w = 1;
    sp.in_channels = 2;
    sp.out_channels = 3;
    Tensor<double> w = randt({3, 2, 3, 3}, rng), b = randt({3}, rng), x = randt({2, 2, 7, 6}, rng);
    gradcheck({&w, &b, &x}, [&](bool bw) {
        Graph<double> g;
        auto y = g.conv2d(g.param(&x), sp, g.param(&w), g.param(&b));
        auto l = g.mse(g.tanh_(y), g.input(Tensor<double>::zeros(g.val(y).shape)));
        if (bw) g.backward(l);
        return g.val(l).data[0];
    });
}

TEST_CASE("gradcheck: conv_transpose2d") {
    Rng rng(102);
    Conv2dSpec sp;
    sp.kernel_h = sp.kernel_w = 4;
    sp.stride_h = 2;
    sp.stride_w = 1;
    sp.pad_h = sp.pad_w = 1;
    sp.in_channels = 2;
    sp.out_channels = 3;
    Tensor<double> w = randt({3, 2, 4, 4}, rng), b = randt({2}, rng), x = randt({2, 3, 5, 6}, rng);
    gradcheck({&w, &b, &x}, [&](bool bw) {
        Graph<double> g;
        auto y = g.conv_transpose2d(g.param(&x), sp, g.param(&w), g.param(&b));
        auto l = g.mse(g.sigmoid(y), g.input(Tensor<double>::full(
                                         {2, 2, sp.tout_h(5), sp.tout_w(6)}, 0.3)));
        if (bw) g.backward(l);
        return g.val(l).data[0];
    });
}

TEST_CASE("gradcheck: activations (tanh, sigmoid, leaky relu)") {
    Rng rng(103);
    Tensor<double> x = randt({40}, rng, -2.0, 2.0);
    // keep leaky relu inputs away from the kink where the subgradient jumps
    for (auto& v : x.data)
        if (std::abs(v) < 1e-2) v = 0.5;
    gradcheck({&x}, [&](bool bw) {
        Graph<double> g;
        auto y = g.tanh_(g.param(&x));
        auto l = g.sum(y);
        if (bw) g.backward(l);
        return g.val(l).data[0];
    }, 1e-5, 1e-5);
    gradcheck({&x}, [&](bool bw) {
        Graph<double> g;
        auto y = g.sigmoid(g.leaky_relu(g.param(&x), 0.2));
        auto l = g.sum(y);
        if (bw) g.backward(l);
        return g.val(l).data[0];
    });
}

TEST_CASE("gradcheck: max pooling") {
    Rng rng(104);
    Tensor<double> x = randt({1, 2, 6, 7}, rng);
    gradcheck({&x}, [&](bool bw) {
        Graph<double> g;
        auto y = g.max_pool2(g.param(&x));
        auto l = g.mse(y, g.input(Tensor<double>::zeros(g.val(y).shape)));
        if (bw) g.backward(l);
        return g.val(l).data[0];
    });
}

TEST_CASE("gradcheck: batch norm (training and inference modes)") {
    Rng rng(105);
    Tensor<double> x = randt({4, 3, 2, 2}, rng), gamma = randt({3}, rng, 0.5, 1.5), beta = randt({3}, rng);
    Tensor<double> rm = Tensor<double>::zeros({3}), rv = Tensor<double>::ones({3});
    gradcheck({&x, &gamma, &beta}, [&](bool bw) {
        Graph<double> g;
        Tensor<double> m = rm, v = rv;  // keep running stats frozen across evals
        auto y = g.batch_norm(g.param(&x), g.param(&gamma), g.param(&beta), &m, &v, true);
        auto l = g.mse(g.tanh_(y), g.input(Tensor<double>::zeros(x.shape)));
        if (bw) g.backward(l);
        return g.val(l).data[0];
    });
    gradcheck({&x, &gamma, &beta}, [&](bool bw) {
        Graph<double> g;
        auto y = g.batch_norm(g.param(&x), g.param(&gamma), g.param(&beta), &rm, &rv, false);
        auto l = g.mse(y, g.input(Tensor<double>::zeros(x.shape)));
        if (bw) g.backward(l);
        return g.val(l).data[0];
    });
}

TEST_CASE("gradcheck: dropout with a fixed mask") {
    Rng rng(106);
    Tensor<double> x = randt({30}, rng);
    gradcheck({&x}, [&](bool bw) {
        Graph<double> g;
        Rng mask_rng(7);  // same mask on every evaluation
        auto y = g.dropout(g.param(&x), 0.7, mask_rng, true);
        auto l = g.sum(y);
        if (bw) g.backward(l);
        return g.val(l).data[0];
    });
}

TEST_CASE("gradcheck: losses") {
    Rng rng(107);
    Tensor<double> logits = randt({4, 6}, rng);
    std::vector<int> labels = {1, 0, 5, 3};
    gradcheck({&logits}, [&](bool bw) {
        Graph<double> g;
        auto l = g.softmax_cross_entropy(g.param(&logits), labels);
        if (bw) g.backward(l);
        return g.val(l).data[0];
    });

    Tensor<double> p = randt({12}, rng, -2.0, 2.0);
    gradcheck({&p}, [&](bool bw) {
        Graph<double> g;
        auto l = g.bce_const(g.sigmoid(g.param(&p)), 1.0);
        if (bw) g.backward(l);
        return g.val(l).data[0];
    });

    Tensor<double> a = randt({10}, rng), tb = randt({10}, rng);
    gradcheck({&a, &tb}, [&](bool bw) {
        Graph<double> g;
        auto l = g.mse(g.param(&a), g.param(&tb));
        if (bw) g.backward(l);
        return g.val(l).data[0];
    });
}

TEST_CASE("gradcheck: concat, replicate, reshape, l2sum composite") {
    Rng rng(108);
    Tensor<double> a = randt({2, 3}, rng), b = randt({2, 4}, rng), w = randt({2, 7}, rng);
    gradcheck({&a, &b, &w}, [&](bool bw) {
        Graph<double> g;
        auto cat = g.concat(g.param(&a), g.param(&b));
        auto y = g.fully_connected(cat, g.param(&w), g.input(Tensor<double>::zeros({2})));
        auto rep = g.replicate_spatial(y, 3, 3);
        auto flat = g.reshape(rep, {2 * 2 * 3 * 3});
        auto l = g.add(g.mse(flat, g.input(Tensor<double>::zeros({36}))), g.scale(g.l2sum(g.param(&w)), 0.015));
        if (bw) g.backward(l);
        return g.val(l).data[0];
    });
}
