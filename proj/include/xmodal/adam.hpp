#pragma once

#include <cmath>
#include <vector>

#include "xmodal/error.hpp"
#include "xmodal/tensor.hpp"

namespace xmodal {

// Bias-corrected Adam over a fixed list of parameters. Call step() after the
// gradients for one batch have been accumulated into each Tensor::grad.
template <typename T>
class Adam {
public:
    struct Config {
        T learning_rate = T(2e-4);
        T beta1 = T(0.5);
        T beta2 = T(0.999);
        T epsilon = T(1e-8);
    };

    Adam() = default;
    explicit Adam(Config cfg) : cfg_(cfg) {}

    void attach(std::vector<Tensor<T>*> params) {
        params_ = std::move(params);
        m_.clear();
        v_.clear();
        for (auto* p : params_) {
            m_.emplace_back(p->data.size(), T(0));
            v_.emplace_back(p->data.size(), T(0));
        }
        step_count_ = 0;
    }

    void step() {
        ++step_count_;
        const T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(step_count_));
        const T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(step_count_));
        for (size_t i = 0; i < params_.size(); ++i) {
            Tensor<T>& p = *params_[i];
            if (p.grad.size() != p.data.size())
                throw ShapeError("adam: parameter " + std::to_string(i) + " has no gradient");
            auto& m = m_[i];
            auto& v = v_[i];
            for (size_t j = 0; j < p.data.size(); ++j) {
                const T g = p.grad[j];
                m[j] = cfg_.beta1 * m[j] + (T(1) - cfg_.beta1) * g;
                v[j] = cfg_.beta2 * v[j] + (T(1) - cfg_.beta2) * g * g;
                const T mh = m[j] / bc1;
                const T vh = v[j] / bc2;
                p.data[j] -= cfg_.learning_rate * mh / (std::sqrt(vh) + cfg_.epsilon);
            }
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    long step_count() const { return step_count_; }
    const Config& config() const { return cfg_; }

private:
    Config cfg_;
    std::vector<Tensor<T>*> params_;
    std::vector<std::vector<T>> m_, v_;
    long step_count_ = 0;
};

}  // namespace xmodal
