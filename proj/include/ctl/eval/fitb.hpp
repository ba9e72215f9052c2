#pragma once

#include "ctl/eval/recall.hpp"

namespace ctl::eval {

struct FITBQuestion {
    std::string outfit_id;
    std::vector<std::string> query;       // the outfit minus the removed item
    std::vector<std::string> candidates;  // 1 positive + 3 same-category distractors
    std::size_t answer = 0;
    data::CategoryId category = 0;
};

/// Removes a seeded item from outfit `outfit` and draws three distractors of
/// the same category from other test outfits. Returns nullopt when fewer than
/// three such distractors exist.
inline std::optional<FITBQuestion> build_fitb_question(const TestPool& pool, std::size_t outfit, std::uint64_t seed) {
    const auto& o = (*pool.outfits)[outfit];
    require(o.items.size() >= 2, ErrorCode::InvalidArgument, "FITB needs at least two items");
    Rng rng(seeded_hash(o.outfit_id, seed));
    const auto removed = uniform_index(rng, o.items.size());
    const auto& target = o.items[removed];

    std::vector<std::size_t> cands;
    if (const auto it = pool.by_category.find(target.category); it != pool.by_category.end())
        for (auto idx : it->second)
            if (pool.items[idx].outfit != outfit) cands.push_back(idx);
    if (cands.size() < 3) return std::nullopt;

    FITBQuestion q;
    q.outfit_id = o.outfit_id;
    q.category = target.category;
    for (std::size_t k = 0; k < o.items.size(); ++k)
        if (k != removed) q.query.push_back(o.items[k].item_id);
    q.candidates.push_back(target.item_id);
    for (auto k : sample_without_replacement(cands.size(), 3, rng)) q.candidates.push_back(pool.items[cands[k]].id);
    shuffle_range(q.candidates.begin(), q.candidates.end(), rng);
    q.answer = static_cast<std::size_t>(
        std::find(q.candidates.begin(), q.candidates.end(), target.item_id) - q.candidates.begin());
    return q;
}

/// Picks the candidate with the smallest mean distance to the query items;
/// ties go to the lowest item id.
inline std::size_t answer_fitb(const EmbeddingTable& table, const FITBQuestion& q) {
    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < q.candidates.size(); ++c) {
        const auto cv = table.get(q.candidates[c]);
        double sum = 0;
        for (const auto& id : q.query) sum += distance(cv, table.get(id));
        const double score = sum / static_cast<double>(q.query.size());
        if (score < best_score || (score == best_score && q.candidates[c] < q.candidates[best])) {
            best = c;
            best_score = score;
        }
    }
    return best;
}

struct FITBResult {
    double accuracy = 0;  // in [0,1]
    std::size_t asked = 0;
    std::size_t correct = 0;
    std::size_t skipped = 0;
};

/// One question per test outfit.
inline FITBResult evaluate_fitb(const EmbeddingTable& table, const std::vector<data::Outfit>& test, std::uint64_t seed) {
    TestPool pool(test);
    FITBResult r;
    for (std::size_t oi = 0; oi < test.size(); ++oi) {
        if (test[oi].items.size() < 2) {
            ++r.skipped;
            continue;
        }
        const auto q = build_fitb_question(pool, oi, seed);
        if (!q) {
            ++r.skipped;
            continue;
        }
        ++r.asked;
        if (answer_fitb(table, *q) == q->answer) ++r.correct;
    }
    r.accuracy = r.asked ? static_cast<double>(r.correct) / static_cast<double>(r.asked) : 0.0;
    return r;
}

}  // namespace ctl::eval
