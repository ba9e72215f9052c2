#pragma once

#include "ctl/data/feature_store.hpp"
#include "ctl/data/types.hpp"

#include <cstdio>

namespace ctl::data {

struct SyntheticConfig {
    std::size_t n_outfits = 1000;
    std::size_t feature_dim = 64;
    std::size_t style_dim = 16;
    double noise = 0.1;
    int color_bins = 12;
    std::uint64_t seed = 1;
    std::string id_prefix = "o";
};

struct SyntheticDataset {
    std::vector<Outfit> outfits;
    FeatureStore features;
};

// Relative frequency of outfit sizes 3..8 in the full cleaned corpus.
inline constexpr std::array<double, 6> kOutfitSizeWeights = {223240, 421815, 251835, 72916, 10767, 938};

/// Planted-structure fixture generator. Every outfit draws a latent style
/// vector z ~ N(0, I); an item's feature is
///   [ one-hot category | z + noise * N(0, I) | N(0, I) distractors ].
/// Boxes are laid out on a 3x3 grid so emitted outfits pass every cleanup rule.
inline SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& cfg, const CategoryVocab& vocab) {
    const std::size_t n_cat = vocab.size();
    require(n_cat >= 3, ErrorCode::InvalidArgument, "synthetic data needs at least 3 categories");
    require(cfg.style_dim > 0 && n_cat + cfg.style_dim <= cfg.feature_dim, ErrorCode::InvalidArgument,
            "feature_dim must hold the category block and the style block");
    require(cfg.noise >= 0.0 && cfg.color_bins >= 2, ErrorCode::InvalidArgument, "bad noise or color bins");

    SyntheticDataset out{{}, FeatureStore(cfg.feature_dim)};
    out.outfits.reserve(cfg.n_outfits);
    Rng rng(mix64(cfg.seed));

    double total_w = 0;
    for (double w : kOutfitSizeWeights) total_w += w;

    std::vector<float> feat(cfg.feature_dim);
    std::vector<double> style(cfg.style_dim);
    char buf[64];
    for (std::size_t n = 0; n < cfg.n_outfits; ++n) {
        std::snprintf(buf, sizeof buf, "%s%07zu", cfg.id_prefix.c_str(), n);
        Outfit o;
        o.outfit_id = buf;
        o.style_scores = StyleScores::polyvore_only();

        double u = uniform01(rng) * total_w;
        std::size_t size = 3;
        for (std::size_t k = 0; k < kOutfitSizeWeights.size(); ++k) {
            if (u < kOutfitSizeWeights[k]) {
                size = 3 + k;
                break;
            }
            u -= kOutfitSizeWeights[k];
            size = 3 + k;
        }

        // first three categories distinct, the rest free
        auto cats = sample_without_replacement(n_cat, 3, rng);
        while (cats.size() < size) cats.push_back(uniform_index(rng, n_cat));

        auto cells = sample_without_replacement(9, size, rng);
        for (auto& s : style) s = standard_normal(rng);

        std::vector<int> bins(size);
        for (auto& b : bins) b = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.color_bins)));
        if (std::all_of(bins.begin(), bins.end(), [&](int b) { return b == bins[0]; }))
            bins.back() = (bins[0] + 1) % cfg.color_bins;

        for (std::size_t k = 0; k < size; ++k) {
            FashionItem item;
            item.outfit_id = o.outfit_id;
            item.item_id = o.outfit_id + "-" + std::to_string(k);
            item.feature_ref = item.item_id;
            item.category = static_cast<CategoryId>(cats[k]);
            item.detector_score = 0.5 + 0.5 * uniform01(rng);
            item.dominant_color_bin = bins[k];
            const double cx = static_cast<double>(cells[k] % 3) / 3.0;
            const double cy = static_cast<double>(cells[k] / 3) / 3.0;
            const double w = 0.25 + 0.08 * uniform01(rng);
            const double h = 0.25 + 0.08 * uniform01(rng);
            item.box = {cx + (1.0 / 3.0 - w) * uniform01(rng), cy + (1.0 / 3.0 - h) * uniform01(rng), w, h};

            std::fill(feat.begin(), feat.end(), 0.0f);
            feat[cats[k]] = 1.0f;
            for (std::size_t d = 0; d < cfg.style_dim; ++d)
                feat[n_cat + d] = static_cast<float>(style[d] + cfg.noise * standard_normal(rng));
            for (std::size_t d = n_cat + cfg.style_dim; d < cfg.feature_dim; ++d)
                feat[d] = static_cast<float>(standard_normal(rng));
            out.features.add(item.feature_ref, feat);
            o.items.push_back(std::move(item));
        }
        out.outfits.push_back(std::move(o));
    }
    return out;
}

}  // namespace ctl::data
