#pragma once

#include "ctl/common.hpp"

#include <span>
#include <string>
#include <utility>

namespace ctl::net {

struct ModelConfig {
    std::size_t input_dim = 64;
    std::size_t n_categories = 13;
    std::size_t category_hidden = 256;
    std::size_t style_hidden = 256;
    std::size_t embedding_dim = 128;
    double bn_momentum = 0.9;
    double bn_eps = 1e-5;
};

/// Fully connected layer, y = x W^T + b with W stored (out x in).
template <class T>
struct Dense {
    MatrixT<T> w;
    VectorT<T> b;

    Dense() = default;
    Dense(std::size_t in, std::size_t out)
        : w(MatrixT<T>::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in))),
          b(VectorT<T>::Zero(static_cast<Eigen::Index>(out))) {}

    MatrixT<T> apply(const MatrixT<T>& x) const { return (x * w.transpose()).rowwise() + b.transpose(); }
};

/// FC(D -> H1) -> ReLU -> FC(H1 -> |vocab|).
template <class T>
struct CategoryHead {
    Dense<T> fc1, fc2;

    template <class F>
    void for_each_tensor(F&& f) {
        f("category.fc1.w", fc1.w);
        f("category.fc1.b", fc1.b);
        f("category.fc2.w", fc2.w);
        f("category.fc2.b", fc2.b);
    }
    template <class F>
    void for_each_tensor(F&& f) const {
        const_cast<CategoryHead*>(this)->for_each_tensor(
            [&](const char* name, auto& t) { f(name, std::as_const(t)); });
    }
};

/// FC(D -> H2) -> BatchNorm -> ReLU -> Dropout -> FC(H2 -> E) -> L2 normalize.
template <class T>
struct StyleHead {
    Dense<T> fc1;
    VectorT<T> gamma, beta;
    Dense<T> fc2;
    // Batch-norm running statistics: state, not learnable.
    VectorT<T> running_mean, running_var;

    template <class F>
    void for_each_tensor(F&& f) {
        f("style.fc1.w", fc1.w);
        f("style.fc1.b", fc1.b);
        f("style.bn.gamma", gamma);
        f("style.bn.beta", beta);
        f("style.fc2.w", fc2.w);
        f("style.fc2.b", fc2.b);
    }
    template <class F>
    void for_each_tensor(F&& f) const {
        const_cast<StyleHead*>(this)->for_each_tensor(
            [&](const char* name, auto& t) { f(name, std::as_const(t)); });
    }
    template <class F>
    void for_each_state(F&& f) {
        f("style.bn.running_mean", running_mean);
        f("style.bn.running_var", running_var);
    }
};

template <class T>
struct ModelParams {
    ModelConfig config;
    CategoryHead<T> category;
    StyleHead<T> style;
};

/// Number of scalars across a head's learnable tensors.
template <class Head>
std::size_t parameter_count(const Head& head) {
    std::size_t n = 0;
    head.for_each_tensor([&](const char*, const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
}

template <class T, class Head>
VectorT<T> flatten(const Head& head) {
    VectorT<T> v(static_cast<Eigen::Index>(parameter_count(head)));
    Eigen::Index off = 0;
    head.for_each_tensor([&](const char*, const auto& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) v[off + i] = static_cast<T>(t.data()[i]);
        off += t.size();
    });
    return v;
}

template <class Head, class V>
void unflatten(Head& head, const V& v) {
    Eigen::Index off = 0;
    head.for_each_tensor([&](const char*, auto& t) {
        using S = typename std::decay_t<decltype(t)>::Scalar;
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<S>(v[off + i]);
        off += t.size();
    });
}

/// Gradient container shaped like the head, zero-filled.
template <class Head>
Head zeros_like(const Head& head) {
    Head g = head;
    g.for_each_tensor([](const char*, auto& t) { t.setZero(); });
    return g;
}

template <class U, class T>
ModelParams<U> cast_params(const ModelParams<T>& p) {
    ModelParams<U> out;
    out.config = p.config;
    auto cast_dense = [](const Dense<T>& d) {
        Dense<U> r;
        r.w = d.w.template cast<U>();
        r.b = d.b.template cast<U>();
        return r;
    };
    out.category.fc1 = cast_dense(p.category.fc1);
    out.category.fc2 = cast_dense(p.category.fc2);
    out.style.fc1 = cast_dense(p.style.fc1);
    out.style.fc2 = cast_dense(p.style.fc2);
    out.style.gamma = p.style.gamma.template cast<U>();
    out.style.beta = p.style.beta.template cast<U>();
    out.style.running_mean = p.style.running_mean.template cast<U>();
    out.style.running_var = p.style.running_var.template cast<U>();
    return out;
}

template <class T>
void init_dense(Dense<T>& d, Rng& rng) {
    // He-uniform for ReLU stacks.
    const double limit = std::sqrt(6.0 / static_cast<double>(d.w.cols()));
    for (Eigen::Index i = 0; i < d.w.size(); ++i)
        d.w.data()[i] = static_cast<T>((2.0 * uniform01(rng) - 1.0) * limit);
    d.b.setZero();
}

template <class T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
    require(cfg.input_dim > 0 && cfg.n_categories > 0 && cfg.embedding_dim > 0, ErrorCode::InvalidArgument,
            "model dimensions must be positive");
    ModelParams<T> p;
    p.config = cfg;
    Rng rng(mix64(seed));
    p.category.fc1 = Dense<T>(cfg.input_dim, cfg.category_hidden);
    p.category.fc2 = Dense<T>(cfg.category_hidden, cfg.n_categories);
    p.style.fc1 = Dense<T>(cfg.input_dim, cfg.style_hidden);
    p.style.fc2 = Dense<T>(cfg.style_hidden, cfg.embedding_dim);
    init_dense(p.category.fc1, rng);
    init_dense(p.category.fc2, rng);
    init_dense(p.style.fc1, rng);
    init_dense(p.style.fc2, rng);
    const auto h = static_cast<Eigen::Index>(cfg.style_hidden);
    p.style.gamma = VectorT<T>::Ones(h);
    p.style.beta = VectorT<T>::Zero(h);
    p.style.running_mean = VectorT<T>::Zero(h);
    p.style.running_var = VectorT<T>::Ones(h);
    return p;
}

// ---------------------------------------------------------------------------
// Category head

template <class T>
struct CategoryCache {
    MatrixT<T> x, pre, hidden;
};

template <class T>
MatrixT<T> forward_category(const CategoryHead<T>& head, const MatrixT<T>& x, CategoryCache<T>* cache = nullptr) {
    require(x.cols() == head.fc1.w.cols(), ErrorCode::DimensionMismatch,
            "category head expects dim " + std::to_string(head.fc1.w.cols()) + ", got " +
                std::to_string(x.cols()));
    MatrixT<T> pre = head.fc1.apply(x);
    MatrixT<T> hidden = pre.cwiseMax(T(0));
    MatrixT<T> logits = head.fc2.apply(hidden);
    if (cache) *cache = {x, std::move(pre), std::move(hidden)};
    return logits;
}

template <class T>
CategoryHead<T> backward_category(const CategoryHead<T>& head, const CategoryCache<T>& cache,
                                  const MatrixT<T>& dlogits, MatrixT<T>* dx = nullptr) {
    CategoryHead<T> g;
    g.fc2.w = dlogits.transpose() * cache.hidden;
    g.fc2.b = dlogits.colwise().sum().transpose();
    MatrixT<T> dhidden = dlogits * head.fc2.w;
    dhidden.array() *= (cache.pre.array() > T(0)).template cast<T>();
    g.fc1.w = dhidden.transpose() * cache.x;
    g.fc1.b = dhidden.colwise().sum().transpose();
    if (dx) *dx = dhidden * head.fc1.w;
    return g;
}

/// Mean softmax cross-entropy over the batch; writes d(loss)/d(logits).
template <class T>
T softmax_cross_entropy(const MatrixT<T>& logits, std::span<const int> labels, MatrixT<T>* dlogits) {
    const auto n = logits.rows();
    require(static_cast<std::size_t>(n) == labels.size(), ErrorCode::DimensionMismatch, "label count");
    T loss = 0;
    if (dlogits) dlogits->resize(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < n; ++r) {
        const T mx = logits.row(r).maxCoeff();
        VectorT<T> p = (logits.row(r).array() - mx).exp().matrix().transpose();
        const T z = p.sum();
        p /= z;
        const auto y = labels[static_cast<std::size_t>(r)];
        loss += -(logits(r, y) - mx - std::log(z));
        if (dlogits) {
            dlogits->row(r) = p.transpose() / T(n);
            (*dlogits)(r, y) -= T(1) / T(n);
        }
    }
    return loss / T(n);
}

// ---------------------------------------------------------------------------
// Style head

enum class Mode { Train, Eval };

template <class T>
struct StyleCache {
    MatrixT<T> x, pre, xhat, act, mask, dropped, out_raw, out;
    VectorT<T> mean, var, inv_std;
};

/// Inverted-dropout keep mask scaled by 1/(1-rate).
template <class T>
MatrixT<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    MatrixT<T> m(rows, cols);
    const T scale = rate > 0 ? T(1.0 / (1.0 - rate)) : T(1);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform01(rng) >= rate ? scale : T(0);
    return m;
}

template <class T>
MatrixT<T> l2_normalize_rows(const MatrixT<T>& z) {
    MatrixT<T> out = z;
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const T n = std::max(z.row(r).norm(), T(1e-12));
        out.row(r) /= n;
    }
    return out;
}

/// Train-mode forward: batch statistics, dropout drawn from `rng`.
/// Running statistics are left untouched (see update_running_stats).
template <class T>
MatrixT<T> forward_style_train(const StyleHead<T>& head, const MatrixT<T>& x, double dropout, double bn_eps,
                               Rng& rng, StyleCache<T>* cache = nullptr) {
    require(x.cols() == head.fc1.w.cols(), ErrorCode::DimensionMismatch,
            "style head expects dim " + std::to_string(head.fc1.w.cols()) + ", got " + std::to_string(x.cols()));
    require(x.rows() >= 2, ErrorCode::InvalidArgument, "train-mode batch norm needs a batch of at least 2");
    require(dropout >= 0.0 && dropout < 1.0, ErrorCode::InvalidArgument, "dropout must lie in [0,1)");
    StyleCache<T> c;
    c.x = x;
    c.pre = head.fc1.apply(x);
    const T n = T(x.rows());
    c.mean = c.pre.colwise().mean().transpose();
    MatrixT<T> centered = c.pre.rowwise() - c.mean.transpose();
    c.var = centered.array().square().colwise().sum().transpose() / n;
    c.inv_std = (c.var.array() + T(bn_eps)).rsqrt().matrix();
    c.xhat = centered.array().rowwise() * c.inv_std.transpose().array();
    MatrixT<T> bn = (c.xhat.array().rowwise() * head.gamma.transpose().array()).rowwise() +
                    head.beta.transpose().array();
    c.act = bn.cwiseMax(T(0));
    c.mask = dropout_mask<T>(c.act.rows(), c.act.cols(), dropout, rng);
    c.dropped = c.act.cwiseProduct(c.mask);
    c.out_raw = head.fc2.apply(c.dropped);
    c.out = l2_normalize_rows(c.out_raw);
    MatrixT<T> out = c.out;
    if (cache) *cache = std::move(c);
    return out;
}

/// Eval-mode forward: running statistics, no dropout. Pure.
template <class T>
MatrixT<T> forward_style_eval(const StyleHead<T>& head, const MatrixT<T>& x, double bn_eps) {
    require(x.cols() == head.fc1.w.cols(), ErrorCode::DimensionMismatch,
            "style head expects dim " + std::to_string(head.fc1.w.cols()) + ", got " + std::to_string(x.cols()));
    MatrixT<T> pre = head.fc1.apply(x);
    const VectorT<T> scale = (head.running_var.array() + T(bn_eps)).rsqrt().matrix().cwiseProduct(head.gamma);
    const VectorT<T> shift = head.beta - head.running_mean.cwiseProduct(scale);
    MatrixT<T> act = ((pre.array().rowwise() * scale.transpose().array()).rowwise() + shift.transpose().array())
                         .cwiseMax(T(0));
    return l2_normalize_rows<T>(head.fc2.apply(act));
}

template <class T>
void update_running_stats(StyleHead<T>& head, const StyleCache<T>& cache, double momentum) {
    const T m = T(momentum);
    const T n = T(cache.x.rows());
    head.running_mean = m * head.running_mean + (T(1) - m) * cache.mean;
    head.running_var = m * head.running_var + (T(1) - m) * cache.var * (n / (n - T(1)));
}

/// Backpropagates d(loss)/d(embeddings) through the train-mode forward.
template <class T>
StyleHead<T> backward_style(const StyleHead<T>& head, const StyleCache<T>& c, const MatrixT<T>& dout,
                            MatrixT<T>* dx = nullptr) {
    // through y = z / |z|
    MatrixT<T> dz(dout.rows(), dout.cols());
    for (Eigen::Index r = 0; r < dout.rows(); ++r) {
        const T norm = std::max(c.out_raw.row(r).norm(), T(1e-12));
        const T proj = c.out.row(r).dot(dout.row(r));
        dz.row(r) = (dout.row(r) - proj * c.out.row(r)) / norm;
    }
    StyleHead<T> g;
    g.fc2.w = dz.transpose() * c.dropped;
    g.fc2.b = dz.colwise().sum().transpose();
    MatrixT<T> dact = (dz * head.fc2.w).cwiseProduct(c.mask);
    MatrixT<T> dbn = dact.cwiseProduct((c.act.array() > T(0)).template cast<T>().matrix());
    g.gamma = dbn.cwiseProduct(c.xhat).colwise().sum().transpose();
    g.beta = dbn.colwise().sum().transpose();
    const T n = T(c.x.rows());
    MatrixT<T> dxhat = dbn.array().rowwise() * head.gamma.transpose().array();
    const VectorT<T> sum_dxhat = dxhat.colwise().sum().transpose();
    const VectorT<T> sum_dxhat_xhat = dxhat.cwiseProduct(c.xhat).colwise().sum().transpose();
    MatrixT<T> dpre = ((n * dxhat.array()).rowwise() - sum_dxhat.transpose().array() -
                       c.xhat.array().rowwise() * sum_dxhat_xhat.transpose().array())
                          .rowwise() *
                      (c.inv_std.transpose().array() / n);
    g.fc1.w = dpre.transpose() * c.x;
    g.fc1.b = dpre.colwise().sum().transpose();
    g.running_mean = VectorT<T>::Zero(head.running_mean.size());
    g.running_var = VectorT<T>::Zero(head.running_var.size());
    if (dx) *dx = dpre * head.fc1.w;
    return g;
}

// ---------------------------------------------------------------------------
// Single-item convenience wrappers (eval mode)

template <class T>
VectorT<T> embed(const ModelParams<T>& p, std::span<const float> features) {
    require(features.size() == p.config.input_dim, ErrorCode::DimensionMismatch,
            "feature dim " + std::to_string(features.size()) + " != model dim " +
                std::to_string(p.config.input_dim));
    MatrixT<T> x(1, static_cast<Eigen::Index>(features.size()));
    for (std::size_t i = 0; i < features.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = T(features[i]);
    return forward_style_eval(p.style, x, p.config.bn_eps).row(0).transpose();
}

template <class T>
VectorT<T> category_logits(const ModelParams<T>& p, std::span<const float> features) {
    require(features.size() == p.config.input_dim, ErrorCode::DimensionMismatch,
            "feature dim " + std::to_string(features.size()) + " != model dim " +
                std::to_string(p.config.input_dim));
    MatrixT<T> x(1, static_cast<Eigen::Index>(features.size()));
    for (std::size_t i = 0; i < features.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = T(features[i]);
    return forward_category(p.category, x).row(0).transpose();
}

template <class T>
int predict_category(const ModelParams<T>& p, std::span<const float> features) {
    const auto logits = category_logits(p, features);
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < logits.size(); ++i)
        if (logits[i] > logits[best]) best = i;
    return static_cast<int>(best);
}

}  // namespace ctl::net
