#pragma once

#include "ctl/common.hpp"

#include <span>

namespace ctl::net {

template <class T>
struct PairLoss {
    T loss;
    VectorT<T> grad_i, grad_j;
};

template <class T>
struct TripletLoss {
    T loss;
    VectorT<T> grad_a, grad_p, grad_n;
};

/// y * D^2 + (1 - y) * max(0, margin - D)^2 with D the Euclidean distance.
template <class T>
PairLoss<T> contrastive_loss(const VectorT<T>& ei, const VectorT<T>& ej, bool same, T margin) {
    require(ei.size() == ej.size(), ErrorCode::DimensionMismatch, "embedding dims differ");
    const VectorT<T> diff = ei - ej;
    if (same) return {diff.squaredNorm(), T(2) * diff, T(-2) * diff};
    const T d = diff.norm();
    const T slack = margin - d;
    if (slack <= T(0) || d == T(0)) {
        // hinge inactive; at d == 0 the direction is undefined and the zero subgradient is used
        const T loss = slack > T(0) ? slack * slack : T(0);
        return {loss, VectorT<T>::Zero(ei.size()), VectorT<T>::Zero(ei.size())};
    }
    const VectorT<T> g = (T(-2) * slack / d) * diff;
    return {slack * slack, g, -g};
}

/// max(0, D_ap^2 - D_an^2 + margin).
template <class T>
TripletLoss<T> triplet_loss(const VectorT<T>& a, const VectorT<T>& p, const VectorT<T>& n, T margin) {
    require(a.size() == p.size() && a.size() == n.size(), ErrorCode::DimensionMismatch, "embedding dims differ");
    const T value = (a - p).squaredNorm() - (a - n).squaredNorm() + margin;
    const auto dim = a.size();
    if (value <= T(0)) return {T(0), VectorT<T>::Zero(dim), VectorT<T>::Zero(dim), VectorT<T>::Zero(dim)};
    return {value, T(2) * (n - p), T(-2) * (a - p), T(2) * (a - n)};
}

template <class T>
struct ProxyLoss {
    T loss;
    VectorT<T> grad_e;
    MatrixT<T> grad_proxies;  // one row per sampled proxy
};

/// Softmax cross-entropy of e against a sampled subset of proxies, with
/// logits proxy_k . e / temperature. `proxies` holds the sampled rows and
/// `target` is the row of the true instance within that sample.
template <class T>
ProxyLoss<T> proxy_softmax_loss(const VectorT<T>& e, const MatrixT<T>& proxies, Eigen::Index target,
                                T temperature = T(1)) {
    require(proxies.cols() == e.size(), ErrorCode::DimensionMismatch, "proxy dim differs from embedding dim");
    require(target >= 0 && target < proxies.rows(), ErrorCode::InvalidArgument,
            "true instance missing from the sampled proxy set");
    require(temperature > T(0), ErrorCode::InvalidArgument, "temperature must be positive");
    const VectorT<T> logits = proxies * e / temperature;
    const T mx = logits.maxCoeff();
    VectorT<T> prob = (logits.array() - mx).exp().matrix();
    const T z = prob.sum();
    prob /= z;
    const T loss = -(logits[target] - mx - std::log(z));
    VectorT<T> coeff = prob;
    coeff[target] -= T(1);
    coeff /= temperature;
    return {loss, proxies.transpose() * coeff, coeff * e.transpose()};
}

}  // namespace ctl::net
