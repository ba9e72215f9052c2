#pragma once

#include "ctl/net/gradient_check.hpp"
#include "ctl/net/losses.hpp"
#include "ctl/net/model.hpp"

#include <functional>

namespace gradcases {

using ctl::MatrixT;
using ctl::Rng;
using ctl::VectorT;
using Vec = VectorT<double>;
using Mat = MatrixT<double>;

struct Summary {
    double max_relative_error = 0;
    std::size_t points = 0;
    std::size_t resampled = 0;  // draws rejected for lying too close to a kink
};

constexpr double kStep = 3e-5;
constexpr double kKinkGap = 1e-3;

inline Vec gaussian(Rng& rng, Eigen::Index n, double scale = 1.0) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * ctl::standard_normal(rng);
    return v;
}

inline void record(Summary& s, const ctl::net::GradientCheckResult& r) {
    s.max_relative_error = std::max(s.max_relative_error, r.max_relative_error);
    ++s.points;
}

inline Summary contrastive(std::size_t points, std::uint64_t seed, Eigen::Index dim = 8) {
    Rng rng(seed);
    Summary s;
    while (s.points < points) {
        const double margin = 0.2 + 1.5 * ctl::uniform01(rng);
        const bool same = ctl::uniform01(rng) < 0.5;
        Vec x = gaussian(rng, 2 * dim, 0.4);
        const double d = (x.head(dim) - x.tail(dim)).norm();
        if (!same && std::abs(margin - d) < kKinkGap) {
            ++s.resampled;
            continue;
        }
        auto f = [&](const Vec& p) {
            return ctl::net::contrastive_loss<double>(p.head(dim), p.tail(dim), same, margin).loss;
        };
        const auto l = ctl::net::contrastive_loss<double>(x.head(dim), x.tail(dim), same, margin);
        Vec g(2 * dim);
        g << l.grad_i, l.grad_j;
        record(s, ctl::net::gradient_check(f, x, g, kStep));
    }
    return s;
}

inline Summary triplet(std::size_t points, std::uint64_t seed, Eigen::Index dim = 8) {
    Rng rng(seed);
    Summary s;
    while (s.points < points) {
        const double margin = 0.2;
        Vec x = gaussian(rng, 3 * dim, 0.3);
        auto parts = [&](const Vec& p) {
            return std::make_tuple(Vec(p.segment(0, dim)), Vec(p.segment(dim, dim)), Vec(p.segment(2 * dim, dim)));
        };
        const auto [a, pp, n] = parts(x);
        const double value = (a - pp).squaredNorm() - (a - n).squaredNorm() + margin;
        // inactive hinge has an identically zero gradient; only the active side is informative
        if (value <= kKinkGap) {
            ++s.resampled;
            continue;
        }
        auto f = [&](const Vec& p) {
            const auto [a2, p2, n2] = parts(p);
            return ctl::net::triplet_loss<double>(a2, p2, n2, margin).loss;
        };
        const auto l = ctl::net::triplet_loss<double>(a, pp, n, margin);
        Vec g(3 * dim);
        g << l.grad_a, l.grad_p, l.grad_n;
        record(s, ctl::net::gradient_check(f, x, g, kStep));
    }
    return s;
}

inline Summary proxy(std::size_t points, std::uint64_t seed, Eigen::Index dim = 8, Eigen::Index n_proxies = 6) {
    Rng rng(seed);
    Summary s;
    while (s.points < points) {
        const double temperature = 0.5 + ctl::uniform01(rng);
        const auto target = static_cast<Eigen::Index>(ctl::uniform_index(rng, static_cast<std::uint64_t>(n_proxies)));
        Vec x = gaussian(rng, dim + n_proxies * dim, 0.7);
        auto unpack = [&](const Vec& p) {
            Mat m(n_proxies, dim);
            for (Eigen::Index r = 0; r < n_proxies; ++r) m.row(r) = p.segment(dim + r * dim, dim).transpose();
            return std::make_pair(Vec(p.head(dim)), m);
        };
        auto f = [&](const Vec& p) {
            const auto [e, m] = unpack(p);
            return ctl::net::proxy_softmax_loss<double>(e, m, target, temperature).loss;
        };
        const auto [e, m] = unpack(x);
        const auto l = ctl::net::proxy_softmax_loss<double>(e, m, target, temperature);
        Vec g(x.size());
        g.head(dim) = l.grad_e;
        for (Eigen::Index r = 0; r < n_proxies; ++r) g.segment(dim + r * dim, dim) = l.grad_proxies.row(r).transpose();
        record(s, ctl::net::gradient_check(f, x, g, kStep));
    }
    return s;
}

inline ctl::net::ModelConfig small_config() {
    ctl::net::ModelConfig c;
    c.input_dim = 6;
    c.n_categories = 5;
    c.category_hidden = 8;
    c.style_hidden = 8;
    c.embedding_dim = 4;
    return c;
}

/// Category head: mean cross-entropy over a batch, gradient w.r.t. every
/// weight and every input feature.
inline Summary category_head(std::size_t points, std::uint64_t seed, Eigen::Index batch = 4) {
    using namespace ctl::net;
    Rng rng(seed);
    Summary s;
    const auto cfg = small_config();
    while (s.points < points) {
        auto params = init_params<double>(cfg, ctl::mix64(seed + s.points + s.resampled));
        auto& head = params.category;
        head.fc1.b = gaussian(rng, head.fc1.b.size(), 0.1);
        Mat x(batch, static_cast<Eigen::Index>(cfg.input_dim));
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = ctl::standard_normal(rng);
        std::vector<int> labels(static_cast<std::size_t>(batch));
        for (auto& y : labels) y = static_cast<int>(ctl::uniform_index(rng, cfg.n_categories));

        CategoryCache<double> cache;
        const Mat logits = forward_category(head, x, &cache);
        if (cache.pre.cwiseAbs().minCoeff() < kKinkGap) {
            ++s.resampled;
            continue;
        }
        Mat dlogits;
        softmax_cross_entropy<double>(logits, labels, &dlogits);
        Mat dx;
        const auto g = backward_category(head, cache, dlogits, &dx);

        const Vec theta = flatten<double>(head);
        const auto np = theta.size();
        Vec point(np + x.size()), analytic(np + x.size());
        point << theta, Eigen::Map<const Vec>(x.data(), x.size());
        analytic << flatten<double>(g), Eigen::Map<const Vec>(dx.data(), dx.size());
        auto f = [&](const Vec& p) {
            auto h = head;
            unflatten(h, p.head(np));
            const Mat xi = Eigen::Map<const Mat>(p.tail(x.size()).data(), x.rows(), x.cols());
            return softmax_cross_entropy<double>(forward_category(h, xi), labels, nullptr);
        };
        record(s, gradient_check(f, point, analytic, kStep));
    }
    return s;
}

/// Style head in train mode (batch norm on batch statistics, a fixed dropout
/// mask, ReLU, L2 normalisation). The scalar objective is a random linear
/// read-out of the embeddings. Draws where a row's pre-normalisation vector
/// is near zero are resampled along with ReLU kinks.
inline Summary style_head(std::size_t points, std::uint64_t seed, Eigen::Index batch = 5, double dropout = 0.3) {
    using namespace ctl::net;
    Rng rng(seed);
    Summary s;
    const auto cfg = small_config();
    while (s.points < points) {
        auto params = init_params<double>(cfg, ctl::mix64(seed + 7 * (s.points + s.resampled)));
        auto& head = params.style;
        head.gamma = (gaussian(rng, head.gamma.size(), 0.2).array() + 1.0).matrix();
        head.beta = gaussian(rng, head.beta.size(), 0.3);
        Mat x(batch, static_cast<Eigen::Index>(cfg.input_dim));
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = ctl::standard_normal(rng);
        Mat readout(batch, static_cast<Eigen::Index>(cfg.embedding_dim));
        for (Eigen::Index i = 0; i < readout.size(); ++i) readout.data()[i] = ctl::standard_normal(rng);
        const std::uint64_t mask_seed = ctl::mix64(seed ^ (s.points + 1));

        StyleCache<double> cache;
        Rng mrng(mask_seed);
        forward_style_train(head, x, dropout, cfg.bn_eps, mrng, &cache);
        const Mat bn = (cache.xhat.array().rowwise() * head.gamma.transpose().array()).rowwise() +
                       head.beta.transpose().array();
        const bool degenerate_row = (cache.out_raw.rowwise().norm().array() < kKinkGap).any();
        if (bn.cwiseAbs().minCoeff() < kKinkGap || degenerate_row) {
            ++s.resampled;
            continue;
        }
        Mat dx;
        const auto g = backward_style(head, cache, readout, &dx);

        const Vec theta = flatten<double>(head);
        const auto np = theta.size();
        Vec point(np + x.size()), analytic(np + x.size());
        point << theta, Eigen::Map<const Vec>(x.data(), x.size());
        analytic << flatten<double>(g), Eigen::Map<const Vec>(dx.data(), dx.size());
        auto f = [&](const Vec& p) {
            auto h = head;
            unflatten(h, p.head(np));
            const Mat xi = Eigen::Map<const Mat>(p.tail(x.size()).data(), x.rows(), x.cols());
            Rng r(mask_seed);
            return forward_style_train(h, xi, dropout, cfg.bn_eps, r).cwiseProduct(readout).sum();
        };
        record(s, gradient_check(f, point, analytic, kStep));
    }
    return s;
}

}  // namespace gradcases
