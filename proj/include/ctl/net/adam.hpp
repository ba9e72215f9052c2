#pragma once

#include "ctl/common.hpp"

#include <span>
#include <vector>

namespace ctl::net {

struct AdamConfig {
    double lr = 0.048;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second moment buffers for every learnable tensor of a head, in
/// for_each_tensor order.
struct AdamState {
    std::vector<std::vector<double>> m, v;
    std::uint64_t step = 0;
};

template <class Head>
AdamState make_adam_state(const Head& head) {
    AdamState s;
    head.for_each_tensor([&](const char*, const auto& t) {
        s.m.emplace_back(static_cast<std::size_t>(t.size()), 0.0);
        s.v.emplace_back(static_cast<std::size_t>(t.size()), 0.0);
    });
    return s;
}

/// One bias-corrected Adam update. A non-finite gradient leaves params and
/// state untouched and throws.
template <class Head>
void adam_step(Head& params, const Head& grads, AdamState& state, const AdamConfig& cfg) {
    require(cfg.lr > 0, ErrorCode::InvalidArgument, "learning rate must be positive");
    std::size_t k = 0;
    grads.for_each_tensor([&](const char* name, const auto& g) {
        require(k < state.m.size() && state.m[k].size() == static_cast<std::size_t>(g.size()),
                ErrorCode::DimensionMismatch, std::string("optimizer state shape differs at ") + name);
        for (Eigen::Index i = 0; i < g.size(); ++i)
            if (!std::isfinite(static_cast<double>(g.data()[i])))
                throw Error(ErrorCode::NonFinite, std::string("non-finite gradient in ") + name + "[" +
                                                      std::to_string(i) + "]");
        ++k;
    });
    require(k == state.m.size(), ErrorCode::DimensionMismatch, "optimizer state tensor count differs");

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);

    std::vector<const void*> grad_ptrs;
    grads.for_each_tensor([&](const char*, const auto& g) { grad_ptrs.push_back(&g); });
    k = 0;
    params.for_each_tensor([&](const char*, auto& p) {
        using Tensor = std::decay_t<decltype(p)>;
        const auto& g = *static_cast<const Tensor*>(grad_ptrs[k]);
        auto& m = state.m[k];
        auto& v = state.v[k];
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            const double gi = static_cast<double>(g.data()[i]);
            const auto idx = static_cast<std::size_t>(i);
            m[idx] = cfg.beta1 * m[idx] + (1.0 - cfg.beta1) * gi;
            v[idx] = cfg.beta2 * v[idx] + (1.0 - cfg.beta2) * gi * gi;
            const double step = cfg.lr * (m[idx] / c1) / (std::sqrt(v[idx] / c2) + cfg.eps);
            p.data()[i] -= static_cast<typename Tensor::Scalar>(step);
        }
        ++k;
    });
}

/// Adam restricted to selected rows of a matrix (lazy/sparse variant). Rows
/// that receive no gradient keep their moments and values.
class RowAdam {
public:
    RowAdam(Eigen::Index rows, Eigen::Index cols)
        : m_(rows, cols), v_(rows, cols), steps_(static_cast<std::size_t>(rows), 0) {
        m_.setZero();
        v_.setZero();
    }

    template <class T>
    void step(MatrixT<T>& params, std::span<const Eigen::Index> rows, const MatrixT<T>& grads,
              const AdamConfig& cfg) {
        for (Eigen::Index i = 0; i < grads.size(); ++i)
            if (!std::isfinite(static_cast<double>(grads.data()[i])))
                throw Error(ErrorCode::NonFinite, "non-finite proxy gradient");
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const auto r = rows[k];
            const double t = static_cast<double>(++steps_[static_cast<std::size_t>(r)]);
            const double c1 = 1.0 - std::pow(cfg.beta1, t);
            const double c2 = 1.0 - std::pow(cfg.beta2, t);
            for (Eigen::Index c = 0; c < params.cols(); ++c) {
                const double g = static_cast<double>(grads(static_cast<Eigen::Index>(k), c));
                m_(r, c) = cfg.beta1 * m_(r, c) + (1.0 - cfg.beta1) * g;
                v_(r, c) = cfg.beta2 * v_(r, c) + (1.0 - cfg.beta2) * g * g;
                params(r, c) -= static_cast<T>(cfg.lr * (m_(r, c) / c1) / (std::sqrt(v_(r, c) / c2) + cfg.eps));
            }
        }
    }

private:
    MatrixT<double> m_, v_;
    std::vector<std::uint64_t> steps_;
};

}  // namespace ctl::net
