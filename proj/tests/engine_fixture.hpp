#pragma once

#include "ctl/data/synthetic.hpp"
#include "ctl/retrieval/engine.hpp"

namespace fixtures {

/// Hand-set weights for synthetic features laid out as
/// [one-hot category | style block | distractors]. The category head reads the
/// one-hot block, so predictions equal the generating category. The style head
/// splits the style block into positive and negative ReLU halves and recombines
/// them, so the embedding is the style block scaled to unit length.
inline ctl::net::ModelParams<float> analytic_params(std::size_t n_categories, std::size_t style_dim,
                                                    std::size_t feature_dim) {
    using namespace ctl::net;
    ModelConfig cfg;
    cfg.input_dim = feature_dim;
    cfg.n_categories = n_categories;
    cfg.category_hidden = n_categories;
    cfg.style_hidden = 2 * style_dim;
    cfg.embedding_dim = style_dim;
    auto p = init_params<float>(cfg, 1);
    const auto nc = static_cast<Eigen::Index>(n_categories);
    const auto sd = static_cast<Eigen::Index>(style_dim);
    p.category.fc1.w.setZero();
    p.category.fc1.w.leftCols(nc).setIdentity();
    p.category.fc1.b.setZero();
    p.category.fc2.w = ctl::Matrix::Identity(nc, nc) * 10.f;
    p.category.fc2.b.setZero();

    p.style.fc1.w.setZero();
    p.style.fc1.w.block(0, nc, sd, sd).setIdentity();
    p.style.fc1.w.block(sd, nc, sd, sd) = -ctl::Matrix::Identity(sd, sd);
    p.style.fc1.b.setZero();
    p.style.fc2.w.resize(sd, 2 * sd);
    p.style.fc2.w << ctl::Matrix::Identity(sd, sd), -ctl::Matrix::Identity(sd, sd);
    p.style.fc2.b.setZero();
    return p;
}

struct EngineFixture {
    ctl::data::CategoryVocab vocab = ctl::data::CategoryVocab::defaults();
    ctl::data::SyntheticDataset data;
    ctl::retrieval::Engine engine;
};

/// Synthetic outfits served through analytic weights. Every item is in the
/// catalog as a product shot.
inline EngineFixture make_engine(std::size_t n_outfits, std::uint64_t seed, double noise = 0.1,
                                 std::size_t style_dim = 8, const ctl::retrieval::IndexBuildOptions& iopt = {}) {
    EngineFixture fx;
    ctl::data::SyntheticConfig sc;
    sc.n_outfits = n_outfits;
    sc.style_dim = style_dim;
    sc.feature_dim = fx.vocab.size() + style_dim + 2;
    sc.noise = noise;
    sc.seed = seed;
    fx.data = ctl::data::generate_synthetic_dataset(sc, fx.vocab);

    auto params = std::make_shared<const ctl::net::ModelParams<float>>(
        analytic_params(fx.vocab.size(), style_dim, sc.feature_dim));
    auto store = std::make_shared<const ctl::data::FeatureStore>(fx.data.features);
    auto catalog = std::make_shared<const ctl::retrieval::Catalog>(ctl::retrieval::catalog_from_outfits(fx.data.outfits));
    auto index = std::make_shared<const ctl::retrieval::InvertedIndex>(
        ctl::retrieval::InvertedIndex::build(*catalog, *store, *params, fx.vocab, iopt));
    fx.engine = {fx.vocab, params, store, catalog, index, ctl::retrieval::ComplementaryMap::defaults(fx.vocab), {}, "fixture"};
    return fx;
}

}  // namespace fixtures
