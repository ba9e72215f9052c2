#pragma once

#include "ctl/data/types.hpp"
#include "ctl/net/adam.hpp"
#include "ctl/net/checkpoint.hpp"
#include "ctl/net/losses.hpp"
#include "ctl/net/model.hpp"
#include "ctl/net/sampling.hpp"

#include <chrono>
#include <functional>
#include <numeric>
#include <ostream>

namespace ctl::net {

enum class Method { Proxy, Contrastive, Triplet };

inline const char* to_string(Method m) {
    switch (m) {
    case Method::Proxy: return "proxy";
    case Method::Contrastive: return "contrastive";
    case Method::Triplet: return "triplet";
    }
    return "unknown";
}

inline Method parse_method(std::string_view s) {
    if (s == "proxy") return Method::Proxy;
    if (s == "contrastive") return Method::Contrastive;
    if (s == "triplet") return Method::Triplet;
    throw Error(ErrorCode::InvalidArgument, "unknown method: " + std::string(s));
}

inline NegativeMode parse_negative_mode(std::string_view s) {
    if (s == "random") return NegativeMode::Random;
    if (s == "same_category" || s == "cat") return NegativeMode::SameCategory;
    throw Error(ErrorCode::InvalidArgument, "unknown negative mode: " + std::string(s));
}

struct TrainConfig {
    Method method = Method::Triplet;
    AdamConfig adam{};
    std::size_t batch_size = 64;
    std::size_t epochs = 10;
    double dropout = 0.5;
    std::uint64_t seed = 1;
    int negative_ratio = 1;  // contrastive: negatives per positive, 1 or 16
    NegativeMode triplet_negatives = NegativeMode::SameCategory;
    double margin = 0.2;
    std::size_t proxy_samples = 2048;
    double proxy_temperature = 1.0;
    // The category head is fit separately over the same frozen features.
    std::size_t category_epochs = 3;
    double category_lr = 1e-3;
    std::size_t hidden = 256;
    std::size_t embedding_dim = 128;

    void validate() const {
        require(adam.lr > 0 && category_lr > 0, ErrorCode::InvalidArgument, "learning rate must be positive");
        require(dropout >= 0 && dropout < 1, ErrorCode::InvalidArgument, "dropout must lie in [0,1)");
        require(batch_size >= 2, ErrorCode::InvalidArgument, "batch size must be at least 2");
        require(margin > 0, ErrorCode::InvalidArgument, "margin must be positive");
        require(negative_ratio == 1 || negative_ratio == 16, ErrorCode::InvalidArgument,
                "negative ratio must be 1 or 16");
        require(proxy_samples >= 1 && proxy_temperature > 0, ErrorCode::InvalidArgument, "bad proxy settings");
    }

    nlohmann::json to_json() const {
        return {{"method", to_string(method)},
                {"lr", adam.lr},
                {"beta1", adam.beta1},
                {"beta2", adam.beta2},
                {"adam_eps", adam.eps},
                {"batch_size", batch_size},
                {"epochs", epochs},
                {"dropout", dropout},
                {"seed", seed},
                {"negative_ratio", negative_ratio},
                {"triplet_negatives", to_string(triplet_negatives)},
                {"margin", margin},
                {"proxy_samples", proxy_samples},
                {"proxy_temperature", proxy_temperature},
                {"category_epochs", category_epochs},
                {"category_lr", category_lr},
                {"hidden", hidden},
                {"embedding_dim", embedding_dim}};
    }
};

struct EpochLog {
    std::size_t epoch;
    double loss;
    double category_loss;
    double wall_seconds;
};

inline void write_loss_curve_csv(std::ostream& os, const std::vector<EpochLog>& curve) {
    os << "epoch,loss,wall_seconds\n";
    for (const auto& e : curve) os << e.epoch << ',' << e.loss << ',' << e.wall_seconds << '\n';
}

struct TrainResult {
    ModelParams<float> params;
    std::vector<EpochLog> curve;
    std::size_t skipped_triplets = 0;
};

class TrainingDiverged : public Error {
public:
    TrainingDiverged(const std::string& what, ModelParams<float> last_good)
        : Error(ErrorCode::NonFinite, what), last_good_(std::move(last_good)) {}
    const ModelParams<float>& last_good() const { return last_good_; }

private:
    ModelParams<float> last_good_;
};

struct TrainOptions {
    std::string checkpoint_path;  // written after every epoch when set
    std::function<void(const EpochLog&)> on_epoch;
};

inline nlohmann::json checkpoint_metadata(const TrainConfig& cfg, const data::CategoryVocab& vocab,
                                          std::size_t input_dim) {
    return {{"method", to_string(cfg.method)},
            {"config", cfg.to_json()},
            {"vocab_hash", to_hex(vocab.hash())},
            {"vocab", vocab.names()},
            {"input_dim", input_dim}};
}

namespace detail {

inline Matrix gather_rows(const Matrix& src, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), src.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
        out.row(static_cast<Eigen::Index>(r)) = src.row(static_cast<Eigen::Index>(rows[r]));
    return out;
}

inline double train_category_epoch(CategoryHead<float>& head, AdamState& state, const TrainingCorpus& c,
                                    const TrainConfig& cfg, std::uint64_t epoch_seed) {
    std::vector<std::size_t> order(c.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(epoch_seed);
    shuffle_range(order.begin(), order.end(), rng);
    AdamConfig adam = cfg.adam;
    adam.lr = cfg.category_lr;
    double total = 0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
        const auto rows = std::span(order).subspan(b, std::min(cfg.batch_size, order.size() - b));
        Matrix x = gather_rows(c.features, rows);
        std::vector<int> labels;
        for (auto r : rows) labels.push_back(c.category_of[r]);
        CategoryCache<float> cache;
        Matrix logits = forward_category(head, x, &cache);
        Matrix dlogits;
        const float loss = softmax_cross_entropy<float>(logits, labels, &dlogits);
        if (!std::isfinite(loss)) throw Error(ErrorCode::NonFinite, "category loss is not finite");
        adam_step(head, backward_category(head, cache, dlogits), state, adam);
        total += loss;
        ++batches;
    }
    return batches ? total / static_cast<double>(batches) : 0.0;
}

/// Runs one train-mode step of the style head over `x` given a loss callback
/// that maps embeddings to (loss, d loss / d embeddings).
template <class LossFn>
double style_step(StyleHead<float>& head, AdamState& state, const Matrix& x, const TrainConfig& cfg,
                  const ModelConfig& mc, Rng& rng, LossFn&& loss_fn) {
    StyleCache<float> cache;
    Matrix emb = forward_style_train(head, x, cfg.dropout, mc.bn_eps, rng, &cache);
    Matrix demb = Matrix::Zero(emb.rows(), emb.cols());
    const double loss = loss_fn(emb, demb);
    if (!std::isfinite(loss)) throw Error(ErrorCode::NonFinite, "style loss is not finite");
    adam_step(head, backward_style(head, cache, demb), state, cfg.adam);
    update_running_stats(head, cache, mc.bn_momentum);
    return loss;
}

}  // namespace detail

/// Trains both heads over frozen features. Deterministic given cfg.seed.
inline TrainResult train(const std::vector<data::Outfit>& outfits, const data::FeatureStore& store,
                         const data::CategoryVocab& vocab, const TrainConfig& cfg, const TrainOptions& opts = {}) {
    cfg.validate();
    require(!outfits.empty(), ErrorCode::InsufficientData, "training set is empty");
    const auto corpus = TrainingCorpus::build(outfits, store, vocab.size());

    ModelConfig mc;
    mc.input_dim = store.dim();
    mc.n_categories = vocab.size();
    mc.category_hidden = mc.style_hidden = cfg.hidden;
    mc.embedding_dim = cfg.embedding_dim;

    TrainResult result;
    result.params = init_params<float>(mc, derive_seed(cfg.seed, "init"));
    auto& params = result.params;
    AdamState style_state = make_adam_state(params.style);
    AdamState cat_state = make_adam_state(params.category);

    // proxy bank: one unit vector per training outfit
    Matrix proxies;
    std::optional<RowAdam> proxy_adam;
    if (cfg.method == Method::Proxy) {
        Rng prng(derive_seed(cfg.seed, "proxies"));
        proxies.resize(static_cast<Eigen::Index>(corpus.outfit_count()), static_cast<Eigen::Index>(mc.embedding_dim));
        for (Eigen::Index i = 0; i < proxies.size(); ++i) proxies.data()[i] = static_cast<float>(standard_normal(prng));
        proxies = l2_normalize_rows<float>(proxies);
        proxy_adam.emplace(proxies.rows(), proxies.cols());
    }

    const float margin = static_cast<float>(cfg.margin);
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const ModelParams<float> last_good = params;
        const auto epoch_seed = derive_seed(cfg.seed, "epoch" + std::to_string(epoch));
        Rng rng(derive_seed(epoch_seed, "dropout"));
        double total = 0;
        std::size_t batches = 0;
        try {
            if (cfg.method == Method::Triplet) {
                auto ep = sample_triplets(corpus, cfg.triplet_negatives, epoch_seed);
                result.skipped_triplets += ep.skipped;
                const auto& ts = ep.triplets;
                for (std::size_t b = 0; b < ts.size(); b += cfg.batch_size) {
                    const std::size_t n = std::min(cfg.batch_size, ts.size() - b);
                    std::vector<std::size_t> rows(3 * n);
                    for (std::size_t k = 0; k < n; ++k) {
                        rows[k] = ts[b + k].anchor;
                        rows[n + k] = ts[b + k].positive;
                        rows[2 * n + k] = ts[b + k].negative;
                    }
                    const auto ni = static_cast<Eigen::Index>(n);
                    total += detail::style_step(
                        params.style, style_state, detail::gather_rows(corpus.features, rows), cfg, mc, rng,
                        [&](const Matrix& e, Matrix& de) {
                            double loss = 0;
                            for (Eigen::Index k = 0; k < ni; ++k) {
                                auto r = triplet_loss<float>(e.row(k).transpose(), e.row(ni + k).transpose(),
                                                             e.row(2 * ni + k).transpose(), margin);
                                loss += r.loss;
                                de.row(k) = r.grad_a.transpose() / float(n);
                                de.row(ni + k) = r.grad_p.transpose() / float(n);
                                de.row(2 * ni + k) = r.grad_n.transpose() / float(n);
                            }
                            return loss / static_cast<double>(n);
                        });
                    ++batches;
                }
            } else if (cfg.method == Method::Contrastive) {
                const auto pairs = sample_pairs(corpus, cfg.negative_ratio, epoch_seed);
                for (std::size_t b = 0; b < pairs.size(); b += cfg.batch_size) {
                    const std::size_t n = std::min(cfg.batch_size, pairs.size() - b);
                    std::vector<std::size_t> rows(2 * n);
                    for (std::size_t k = 0; k < n; ++k) {
                        rows[k] = pairs[b + k].i;
                        rows[n + k] = pairs[b + k].j;
                    }
                    const auto ni = static_cast<Eigen::Index>(n);
                    total += detail::style_step(
                        params.style, style_state, detail::gather_rows(corpus.features, rows), cfg, mc, rng,
                        [&](const Matrix& e, Matrix& de) {
                            double loss = 0;
                            for (Eigen::Index k = 0; k < ni; ++k) {
                                auto r = contrastive_loss<float>(e.row(k).transpose(), e.row(ni + k).transpose(),
                                                                 pairs[b + static_cast<std::size_t>(k)].positive,
                                                                 margin);
                                loss += r.loss;
                                de.row(k) = r.grad_i.transpose() / float(n);
                                de.row(ni + k) = r.grad_j.transpose() / float(n);
                            }
                            return loss / static_cast<double>(n);
                        });
                    ++batches;
                }
            } else {
                std::vector<std::size_t> order(corpus.size());
                std::iota(order.begin(), order.end(), std::size_t{0});
                Rng orng(derive_seed(epoch_seed, "order"));
                shuffle_range(order.begin(), order.end(), orng);
                const std::size_t n_inst = corpus.outfit_count();
                const std::size_t sample = std::min(cfg.proxy_samples, n_inst);
                for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
                    const std::size_t n = std::min(cfg.batch_size, order.size() - b);
                    if (n < 2) break;
                    const auto rows = std::span(order).subspan(b, n);
                    // sampled proxy set: every true instance of the batch, topped up at random
                    std::vector<Eigen::Index> set;
                    std::unordered_map<std::size_t, Eigen::Index> slot;
                    for (auto r : rows) {
                        const auto inst = corpus.outfit_of[r];
                        if (slot.emplace(inst, static_cast<Eigen::Index>(set.size())).second)
                            set.push_back(static_cast<Eigen::Index>(inst));
                    }
                    const std::size_t want = std::max(sample, set.size());
                    while (set.size() < want) {
                        const auto inst = uniform_index(orng, n_inst);
                        if (slot.emplace(inst, static_cast<Eigen::Index>(set.size())).second)
                            set.push_back(static_cast<Eigen::Index>(inst));
                    }
                    Matrix sampled(static_cast<Eigen::Index>(set.size()), proxies.cols());
                    for (std::size_t k = 0; k < set.size(); ++k) sampled.row(static_cast<Eigen::Index>(k)) = proxies.row(set[k]);
                    Matrix dproxies = Matrix::Zero(sampled.rows(), sampled.cols());
                    total += detail::style_step(
                        params.style, style_state, detail::gather_rows(corpus.features, rows), cfg, mc, rng,
                        [&](const Matrix& e, Matrix& de) {
                            double loss = 0;
                            for (std::size_t k = 0; k < n; ++k) {
                                const auto ki = static_cast<Eigen::Index>(k);
                                auto r = proxy_softmax_loss<float>(e.row(ki).transpose(), sampled,
                                                                   slot.at(corpus.outfit_of[rows[k]]),
                                                                   static_cast<float>(cfg.proxy_temperature));
                                loss += r.loss;
                                de.row(ki) = r.grad_e.transpose() / float(n);
                                dproxies += r.grad_proxies / float(n);
                            }
                            return loss / static_cast<double>(n);
                        });
                    proxy_adam->step(proxies, std::span<const Eigen::Index>(set), dproxies, cfg.adam);
                    for (auto r : set) proxies.row(r).normalize();
                    ++batches;
                }
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NonFinite) throw;
            if (!opts.checkpoint_path.empty())
                save_checkpoint(opts.checkpoint_path,
                                {checkpoint_metadata(cfg, vocab, store.dim()), last_good});
            throw TrainingDiverged(std::string("training diverged in epoch ") + std::to_string(epoch) + ": " +
                                       e.what(),
                                   last_good);
        }

        double cat_loss = 0;
        if (epoch <= cfg.category_epochs)
            cat_loss = detail::train_category_epoch(params.category, cat_state, corpus, cfg,
                                                    derive_seed(epoch_seed, "category"));

        EpochLog log{epoch, batches ? total / static_cast<double>(batches) : 0.0, cat_loss,
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
        result.curve.push_back(log);
        if (opts.on_epoch) opts.on_epoch(log);
        if (!opts.checkpoint_path.empty())
            save_checkpoint(opts.checkpoint_path, {checkpoint_metadata(cfg, vocab, store.dim()), params});
    }
    // category head still owes epochs when it was configured longer than the style run
    for (std::size_t epoch = cfg.epochs + 1; cfg.epochs > 0 && epoch <= cfg.category_epochs; ++epoch)
        detail::train_category_epoch(params.category, cat_state, corpus, cfg,
                                     derive_seed(derive_seed(cfg.seed, "epoch" + std::to_string(epoch)), "category"));
    if (!opts.checkpoint_path.empty() && cfg.epochs == 0)
        save_checkpoint(opts.checkpoint_path, {checkpoint_metadata(cfg, vocab, store.dim()), params});
    return result;
}

}  // namespace ctl::net
