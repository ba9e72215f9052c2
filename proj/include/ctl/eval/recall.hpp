#pragma once

#include "ctl/eval/embeddings.hpp"

#include <map>
#include <optional>
#include <set>

namespace ctl::eval {

enum class CorpusMode { AllCategories, PerCategory };

inline const char* to_string(CorpusMode m) { return m == CorpusMode::AllCategories ? "all_categories" : "per_category"; }

inline CorpusMode parse_corpus_mode(std::string_view s) {
    if (s == "all_categories") return CorpusMode::AllCategories;
    if (s == "per_category") return CorpusMode::PerCategory;
    throw Error(ErrorCode::InvalidArgument, "unknown corpus mode: " + std::string(s));
}

struct EvalConfig {
    std::vector<std::size_t> ks{1, 5, 10};
    std::size_t corpus_size = 200;
    CorpusMode mode = CorpusMode::PerCategory;
    std::size_t outfit_size = 5;
    std::uint64_t seed = 1;

    void validate() const {
        require(!ks.empty() && std::is_sorted(ks.begin(), ks.end()) && ks.front() >= 1, ErrorCode::InvalidArgument,
                "K values must be ascending and positive");
        require(corpus_size > ks.back(), ErrorCode::InvalidArgument, "corpus size must exceed the largest K");
        require(outfit_size >= 2, ErrorCode::InvalidArgument, "outfit size filter must be at least 2");
    }
};

struct RecallCorpus {
    std::string query;
    std::vector<std::string> positives;
    std::vector<std::string> negatives;

    std::size_t size() const { return positives.size() + negatives.size(); }
};

/// Flattened view of the test outfits used to draw corpora.
struct TestPool {
    struct Item {
        std::string id;
        std::size_t outfit;
        data::CategoryId category;
    };
    const std::vector<data::Outfit>* outfits = nullptr;
    std::vector<Item> items;
    std::map<data::CategoryId, std::vector<std::size_t>> by_category;

    explicit TestPool(const std::vector<data::Outfit>& o) : outfits(&o) {
        for (std::size_t oi = 0; oi < o.size(); ++oi)
            for (const auto& it : o[oi].items) {
                by_category[it.category].push_back(items.size());
                items.push_back({it.item_id, oi, it.category});
            }
    }
};

/// Query plus outfit-mate positives and sampled negatives, N items total.
/// With a target category the positives and negatives are restricted to it.
inline RecallCorpus build_recall_corpus(const TestPool& pool, std::size_t outfit, std::size_t query_index,
                                        std::optional<data::CategoryId> target, std::size_t corpus_size,
                                        std::uint64_t seed) {
    const auto& o = (*pool.outfits)[outfit];
    require(query_index < o.items.size(), ErrorCode::InvalidArgument, "query index out of range");
    RecallCorpus c;
    c.query = o.items[query_index].item_id;
    for (std::size_t k = 0; k < o.items.size(); ++k)
        if (k != query_index && (!target || o.items[k].category == *target)) c.positives.push_back(o.items[k].item_id);
    require(!c.positives.empty(), ErrorCode::InvalidArgument, "no positives for query " + c.query);
    require(c.positives.size() < corpus_size, ErrorCode::InvalidArgument, "corpus size too small for positives");

    std::vector<std::size_t> candidates;
    auto consider = [&](std::size_t idx) {
        if (pool.items[idx].outfit != outfit) candidates.push_back(idx);
    };
    if (target) {
        const auto it = pool.by_category.find(*target);
        if (it != pool.by_category.end())
            for (auto idx : it->second) consider(idx);
    } else {
        for (std::size_t idx = 0; idx < pool.items.size(); ++idx) consider(idx);
    }
    const std::size_t need = corpus_size - c.positives.size();
    if (candidates.size() < need)
        throw Error(ErrorCode::InsufficientData, "corpus for " + c.query + " needs " + std::to_string(need) +
                                                     " negatives, only " + std::to_string(candidates.size()) +
                                                     " available");
    Rng rng(seed);
    for (auto k : sample_without_replacement(candidates.size(), need, rng))
        c.negatives.push_back(pool.items[candidates[k]].id);
    return c;
}

/// Corpus items ranked by ascending distance to the query (ties: item id).
inline std::vector<std::pair<double, std::string>> rank_corpus(const EmbeddingTable& table, const RecallCorpus& c) {
    const auto q = table.get(c.query);
    std::vector<std::pair<double, std::string>> ranked;
    ranked.reserve(c.size());
    for (const auto* list : {&c.positives, &c.negatives})
        for (const auto& id : *list) ranked.emplace_back(squared_distance(q, table.get(id)), id);
    std::sort(ranked.begin(), ranked.end());
    return ranked;
}

/// (#positives in top K) / min(#positives, K).
inline double recall_at_k(const EmbeddingTable& table, const RecallCorpus& c, std::size_t k) {
    const auto ranked = rank_corpus(table, c);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r)
        if (std::find(c.positives.begin(), c.positives.end(), ranked[r].second) != c.positives.end()) ++hits;
    return static_cast<double>(hits) / static_cast<double>(std::min(c.positives.size(), k));
}

struct RecallResult {
    std::map<std::size_t, double> recall;  // K -> mean R@K in [0,1]
    std::size_t corpora = 0;
    std::size_t eligible_outfits = 0;
    std::size_t skipped = 0;  // (query, category) cells without enough negatives
};

inline std::uint64_t corpus_seed(std::uint64_t seed, const std::string& query, std::optional<data::CategoryId> cat) {
    return seeded_hash(query + "|" + (cat ? std::to_string(*cat) : std::string("*")), seed);
}

/// Mean R@K over every item of every outfit with exactly cfg.outfit_size
/// items; in per-category mode also over each category among the outfit-mates.
inline RecallResult evaluate_recall(const EmbeddingTable& table, const std::vector<data::Outfit>& test,
                                    const EvalConfig& cfg) {
    cfg.validate();
    TestPool pool(test);
    RecallResult res;
    std::map<std::size_t, double> sums;
    for (auto k : cfg.ks) sums[k] = 0;
    for (std::size_t oi = 0; oi < test.size(); ++oi) {
        const auto& o = test[oi];
        if (o.items.size() != cfg.outfit_size) continue;
        ++res.eligible_outfits;
        for (std::size_t qi = 0; qi < o.items.size(); ++qi) {
            std::vector<std::optional<data::CategoryId>> targets;
            if (cfg.mode == CorpusMode::AllCategories) {
                targets.push_back(std::nullopt);
            } else {
                std::set<data::CategoryId> cats;
                for (std::size_t k = 0; k < o.items.size(); ++k)
                    if (k != qi) cats.insert(o.items[k].category);
                for (auto c : cats) targets.push_back(c);
            }
            for (const auto& t : targets) {
                RecallCorpus corpus;
                try {
                    corpus = build_recall_corpus(pool, oi, qi, t, cfg.corpus_size,
                                                 corpus_seed(cfg.seed, o.items[qi].item_id, t));
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::InsufficientData) throw;
                    ++res.skipped;
                    continue;
                }
                const auto ranked = rank_corpus(table, corpus);
                for (auto k : cfg.ks) {
                    std::size_t hits = 0;
                    for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r)
                        if (std::find(corpus.positives.begin(), corpus.positives.end(), ranked[r].second) !=
                            corpus.positives.end())
                            ++hits;
                    sums[k] += static_cast<double>(hits) / static_cast<double>(std::min(corpus.positives.size(), k));
                }
                ++res.corpora;
            }
        }
    }
    require(res.eligible_outfits > 0, ErrorCode::InsufficientData,
            "no test outfit has exactly " + std::to_string(cfg.outfit_size) + " items");
    require(res.corpora > 0, ErrorCode::InsufficientData,
            "no recall corpus of size " + std::to_string(cfg.corpus_size) + " could be built from " +
                std::to_string(test.size()) + " test outfits");
    for (auto k : cfg.ks) res.recall[k] = sums[k] / static_cast<double>(res.corpora);
    return res;
}

}  // namespace ctl::eval
