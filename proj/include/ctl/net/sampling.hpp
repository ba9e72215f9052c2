#pragma once

#include "ctl/data/feature_store.hpp"
#include "ctl/data/types.hpp"

#include <optional>

namespace ctl::net {

/// Training outfits flattened to item rows, with the lookups samplers need.
struct TrainingCorpus {
    Matrix features;                             // one row per item
    std::vector<std::string> item_ids;
    std::vector<std::size_t> outfit_of;          // item -> outfit index
    std::vector<int> category_of;                // item -> labeled category
    std::vector<std::vector<std::size_t>> outfit_items;
    std::vector<std::vector<std::size_t>> category_items;

    std::size_t size() const { return item_ids.size(); }
    std::size_t outfit_count() const { return outfit_items.size(); }

    static TrainingCorpus build(const std::vector<data::Outfit>& outfits, const data::FeatureStore& store,
                                std::size_t n_categories) {
        TrainingCorpus c;
        std::size_t n_items = 0;
        for (const auto& o : outfits) n_items += o.items.size();
        c.features.resize(static_cast<Eigen::Index>(n_items), static_cast<Eigen::Index>(store.dim()));
        c.outfit_items.resize(outfits.size());
        c.category_items.resize(n_categories);
        std::size_t row = 0;
        for (std::size_t oi = 0; oi < outfits.size(); ++oi) {
            for (const auto& item : outfits[oi].items) {
                require(item.category >= 0 && static_cast<std::size_t>(item.category) < n_categories,
                        ErrorCode::InvalidArgument, "item category outside vocabulary: " + item.item_id);
                const auto f = store.get(item.feature_ref);
                std::copy(f.begin(), f.end(), c.features.row(static_cast<Eigen::Index>(row)).data());
                c.item_ids.push_back(item.item_id);
                c.outfit_of.push_back(oi);
                c.category_of.push_back(item.category);
                c.outfit_items[oi].push_back(row);
                c.category_items[static_cast<std::size_t>(item.category)].push_back(row);
                ++row;
            }
        }
        return c;
    }
};

struct PairExample {
    std::size_t i, j;
    bool positive;
};

struct TripletExample {
    std::size_t anchor, positive, negative;
};

enum class NegativeMode { Random, SameCategory };

inline const char* to_string(NegativeMode m) { return m == NegativeMode::Random ? "random" : "same_category"; }

/// One epoch of pairs. Every item anchors one positive drawn from its outfit
/// among items of a different category (a heterogeneous dyad) and
/// `negative_ratio` negatives drawn from other outfits regardless of category.
inline std::vector<PairExample> sample_pairs(const TrainingCorpus& c, int negative_ratio, std::uint64_t seed) {
    require(negative_ratio == 1 || negative_ratio == 16, ErrorCode::InvalidArgument,
            "negative ratio must be 1 or 16");
    require(c.outfit_count() >= 2, ErrorCode::InsufficientData, "negatives need at least two outfits");
    Rng rng(derive_seed(seed, "pairs"));
    std::vector<PairExample> out;
    out.reserve(c.size() * static_cast<std::size_t>(1 + negative_ratio));
    std::vector<std::size_t> mates;
    for (std::size_t a = 0; a < c.size(); ++a) {
        mates.clear();
        for (auto m : c.outfit_items[c.outfit_of[a]])
            if (c.category_of[m] != c.category_of[a]) mates.push_back(m);
        if (mates.empty()) continue;  // all-same-category outfit; cleanup rules this out
        out.push_back({a, mates[uniform_index(rng, mates.size())], true});
        for (int k = 0; k < negative_ratio; ++k) {
            std::size_t n;
            do {
                n = uniform_index(rng, c.size());
            } while (c.outfit_of[n] == c.outfit_of[a]);
            out.push_back({a, n, false});
        }
    }
    shuffle_range(out.begin(), out.end(), rng);
    return out;
}

struct TripletEpoch {
    std::vector<TripletExample> triplets;
    std::size_t skipped = 0;  // anchors with no admissible negative
};

/// One epoch of triplets: each item anchors once with a random outfit-mate as
/// positive. Negatives come from other outfits, optionally restricted to the
/// positive's category.
inline TripletEpoch sample_triplets(const TrainingCorpus& c, NegativeMode mode, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "triplets"));
    TripletEpoch out;
    out.triplets.reserve(c.size());
    for (std::size_t a = 0; a < c.size(); ++a) {
        const auto& own = c.outfit_items[c.outfit_of[a]];
        if (own.size() < 2) {
            ++out.skipped;
            continue;
        }
        std::size_t p;
        do {
            p = own[uniform_index(rng, own.size())];
        } while (p == a);

        const std::vector<std::size_t>* pool =
            mode == NegativeMode::SameCategory ? &c.category_items[static_cast<std::size_t>(c.category_of[p])]
                                               : nullptr;
        const std::size_t pool_size = pool ? pool->size() : c.size();
        auto at = [&](std::size_t k) { return pool ? (*pool)[k] : k; };
        auto draw = [&] { return at(uniform_index(rng, pool_size)); };
        std::optional<std::size_t> neg;
        for (int tries = 0; tries < 64 && !neg; ++tries) {
            const auto n = draw();
            if (c.outfit_of[n] != c.outfit_of[a]) neg = n;
        }
        if (!neg) {
            // rejection sampling failed; fall back to an exhaustive candidate list
            std::vector<std::size_t> cands;
            for (std::size_t k = 0; k < pool_size; ++k) {
                const auto n = at(k);
                if (c.outfit_of[n] != c.outfit_of[a]) cands.push_back(n);
            }
            if (cands.empty()) {
                ++out.skipped;
                continue;
            }
            neg = cands[uniform_index(rng, cands.size())];
        }
        out.triplets.push_back({a, p, *neg});
    }
    shuffle_range(out.triplets.begin(), out.triplets.end(), rng);
    return out;
}

}  // namespace ctl::net
