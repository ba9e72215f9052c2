#pragma once

#include "ctl/retrieval/complementary_map.hpp"
#include "ctl/retrieval/index.hpp"

#include <memory>
#include <set>

namespace ctl::retrieval {

struct QueryContext {
    std::vector<float> features;
    data::CategoryId category = 0;
    std::vector<data::CategoryId> complementary;
    std::vector<float> embedding;
    bool fallback_map = false;  // category had no map entry; all other categories used
};

/// Predicts the query's category and style embedding, then looks up its
/// complementary categories. A category absent from the map falls back to
/// every other vocabulary category.
inline QueryContext understand_query(std::span<const float> features, const net::ModelParams<float>& params,
                                     const ComplementaryMap& map) {
    QueryContext ctx;
    ctx.features.assign(features.begin(), features.end());
    ctx.category = net::predict_category(params, features);
    const Vector e = net::embed(params, features);
    ctx.embedding.assign(e.data(), e.data() + e.size());
    if (const auto* row = map.find(ctx.category)) {
        ctx.complementary = *row;
    } else {
        ctx.fallback_map = true;
        for (std::size_t c = 0; c < params.config.n_categories; ++c)
            if (static_cast<data::CategoryId>(c) != ctx.category)
                ctx.complementary.push_back(static_cast<data::CategoryId>(c));
    }
    return ctx;
}

struct CategoryResults {
    data::CategoryId category = 0;
    std::vector<SearchHit> hits;

    bool operator==(const CategoryResults&) const = default;
};

struct BlendedHit {
    std::string item_id;
    data::CategoryId category = 0;
    double distance = 0;

    bool operator==(const BlendedHit&) const = default;
};

/// Round-robin merge. Categories take turns in order of their best distance
/// (ties by category id); repeated item ids are dropped; at most `k_final`
/// entries are returned.
inline std::vector<BlendedHit> blend(const std::vector<CategoryResults>& lists, std::size_t k_final) {
    std::vector<const CategoryResults*> order;
    for (const auto& l : lists)
        if (!l.hits.empty()) order.push_back(&l);
    std::stable_sort(order.begin(), order.end(), [](const CategoryResults* a, const CategoryResults* b) {
        if (a->hits.front().distance != b->hits.front().distance)
            return a->hits.front().distance < b->hits.front().distance;
        return a->category < b->category;
    });
    std::vector<BlendedHit> out;
    std::set<std::string> seen;
    for (std::size_t round = 0; out.size() < k_final; ++round) {
        bool any = false;
        for (const auto* l : order) {
            if (round >= l->hits.size()) continue;
            any = true;
            const auto& h = l->hits[round];
            if (!seen.insert(h.item_id).second) continue;
            out.push_back({h.item_id, l->category, h.distance});
            if (out.size() == k_final) break;
        }
        if (!any) break;
    }
    return out;
}

struct EngineConfig {
    std::size_t k_per_category = 10;
    std::size_t k_final = 30;
    std::size_t probes = 0;  // 0 = per-partition default
    double product_shot_threshold = 0.9;
};

/// Everything needed to serve one snapshot. Shared, never mutated.
struct Engine {
    data::CategoryVocab vocab;
    std::shared_ptr<const net::ModelParams<float>> params;
    std::shared_ptr<const data::FeatureStore> store;
    std::shared_ptr<const Catalog> catalog;
    std::shared_ptr<const InvertedIndex> index;
    ComplementaryMap map;
    EngineConfig config;
    std::string checkpoint_hash;
};

struct RecommendationSet {
    std::string query_item;
    data::CategoryId query_category = 0;
    std::vector<CategoryResults> per_category;
    std::vector<BlendedHit> blended;
    std::vector<std::string> diagnostics;

    bool operator==(const RecommendationSet&) const = default;
};

struct CompleteRequest {
    std::string item_id;
    std::optional<std::size_t> k;  // per category; engine default when absent
    std::optional<std::vector<data::CategoryId>> categories;  // must be a subset of the complementary list
};

inline RecommendationSet complete_the_look(const Engine& engine, const CompleteRequest& req) {
    require(engine.params && engine.store && engine.catalog && engine.index, ErrorCode::InvalidArgument,
            "engine not fully loaded");
    const auto* item = engine.catalog->find(req.item_id);
    require(item != nullptr, ErrorCode::NotFound, "unknown item: " + req.item_id);
    require(filter_product_shot(item->style_scores, engine.config.product_shot_threshold), ErrorCode::NotProductShot,
            "item " + req.item_id + " has ProductShot score " +
                std::to_string(item->style_scores[data::StyleLabel::ProductShot]) + " below threshold " +
                std::to_string(engine.config.product_shot_threshold));
    require(engine.store->contains(item->feature_ref), ErrorCode::UnknownQueryFeatures,
            "no features for " + item->feature_ref);
    const std::size_t k = req.k.value_or(engine.config.k_per_category);
    require(k >= 1, ErrorCode::InvalidArgument, "k must be at least 1");

    const auto ctx = understand_query(engine.store->get(item->feature_ref), *engine.params, engine.map);
    RecommendationSet out;
    out.query_item = req.item_id;
    out.query_category = ctx.category;
    if (ctx.fallback_map)
        out.diagnostics.push_back("no complementary entry for " + engine.vocab.name(ctx.category) +
                                  "; using all other categories");
    require(!ctx.complementary.empty(), ErrorCode::EmptyComplementarySet,
            "no complementary categories for " + engine.vocab.name(ctx.category));

    std::vector<data::CategoryId> cats = ctx.complementary;
    if (req.categories) {
        for (auto c : *req.categories)
            require(std::find(ctx.complementary.begin(), ctx.complementary.end(), c) != ctx.complementary.end(),
                    ErrorCode::InvalidArgument,
                    "category " + engine.vocab.name(c) + " is not complementary to " +
                        engine.vocab.name(ctx.category));
        cats.erase(std::remove_if(cats.begin(), cats.end(),
                                  [&](data::CategoryId c) {
                                      return std::find(req.categories->begin(), req.categories->end(), c) ==
                                             req.categories->end();
                                  }),
                   cats.end());
    }

    for (auto c : cats) {
        if (engine.index->category_size(c) == 0) {
            out.diagnostics.push_back("category " + engine.vocab.name(c) + " has no indexed items");
            continue;
        }
        auto hits = engine.index->search(c, ctx.embedding, k + 1, engine.config.probes);
        hits.erase(std::remove_if(hits.begin(), hits.end(),
                                  [&](const SearchHit& h) { return h.item_id == req.item_id; }),
                   hits.end());
        if (hits.size() > k) hits.resize(k);
        out.per_category.push_back({c, std::move(hits)});
    }
    if (out.per_category.empty()) out.diagnostics.push_back("no complementary category is indexed");
    out.blended = blend(out.per_category, engine.config.k_final);
    return out;
}

inline nlohmann::json recommendation_to_json(const RecommendationSet& r, const data::CategoryVocab& vocab) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& c : r.per_category) {
        nlohmann::json hits = nlohmann::json::array();
        for (const auto& h : c.hits) hits.push_back({{"item_id", h.item_id}, {"distance", h.distance}});
        per.push_back({{"category", vocab.name(c.category)}, {"items", std::move(hits)}});
    }
    nlohmann::json blended = nlohmann::json::array();
    for (const auto& b : r.blended)
        blended.push_back({{"item_id", b.item_id}, {"category", vocab.name(b.category)}, {"distance", b.distance}});
    return {{"query_item", r.query_item},
            {"query_category", vocab.name(r.query_category)},
            {"per_category", std::move(per)},
            {"blended", std::move(blended)},
            {"diagnostics", r.diagnostics}};
}

}  // namespace ctl::retrieval
