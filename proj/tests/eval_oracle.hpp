#pragma once

#include "ctl/eval/fitb.hpp"
#include "ctl/eval/recall.hpp"

#include <set>

namespace oracle {

using ctl::data::Outfit;
using ctl::eval::EmbeddingTable;

/// Fifty outfits: forty with five items, ten with three, four or six, so the
/// size filter has work to do. Embeddings are small integers, which makes every
/// squared distance exact and produces genuine ties.
struct EvalFixture {
    std::vector<Outfit> outfits;
    EmbeddingTable table{4};
};

inline EvalFixture eval_fixture(std::uint64_t seed, std::size_t n_categories = 13) {
    ctl::Rng rng(seed);
    EvalFixture fx;
    for (std::size_t o = 0; o < 50; ++o) {
        constexpr std::size_t other_sizes[] = {3, 4, 6};
        const std::size_t size = o < 40 ? 5 : other_sizes[o % 3];
        Outfit out;
        out.outfit_id = "of" + std::to_string(o);
        std::vector<int> centre(4);
        for (auto& c : centre) c = static_cast<int>(ctl::uniform_index(rng, 7)) - 3;
        const auto cats = ctl::sample_without_replacement(n_categories, size, rng);
        for (std::size_t i = 0; i < size; ++i) {
            ctl::data::FashionItem it;
            it.item_id = out.outfit_id + "_" + std::to_string(i);
            it.feature_ref = it.item_id;
            it.outfit_id = out.outfit_id;
            it.category = static_cast<int>(cats[i]);
            std::vector<float> v(4);
            for (std::size_t d = 0; d < 4; ++d)
                v[d] = static_cast<float>(centre[d] + static_cast<int>(ctl::uniform_index(rng, 5)) - 2);
            fx.table.add(it.item_id, v);
            out.items.push_back(std::move(it));
        }
        fx.outfits.push_back(std::move(out));
    }
    return fx;
}

inline double exact_sq(const EmbeddingTable& t, const std::string& a, const std::string& b) {
    const auto x = t.get(a), y = t.get(b);
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (double(x[i]) - double(y[i])) * (double(x[i]) - double(y[i]));
    return s;
}

/// Checks a drawn corpus against the definition: the query's outfit-mates
/// (of the target category, if any) are exactly the positives, and the
/// negatives are distinct items from other outfits (of that category).
inline bool corpus_is_valid(const std::vector<Outfit>& outfits, std::size_t oi, std::size_t qi,
                            std::optional<int> target, const ctl::eval::RecallCorpus& c, std::size_t n) {
    std::set<std::string> want_pos;
    for (std::size_t k = 0; k < outfits[oi].items.size(); ++k)
        if (k != qi && (!target || outfits[oi].items[k].category == *target))
            want_pos.insert(outfits[oi].items[k].item_id);
    if (std::set<std::string>(c.positives.begin(), c.positives.end()) != want_pos) return false;
    if (c.query != outfits[oi].items[qi].item_id || c.size() != n) return false;
    std::set<std::string> allowed;
    for (std::size_t o = 0; o < outfits.size(); ++o)
        if (o != oi)
            for (const auto& it : outfits[o].items)
                if (!target || it.category == *target) allowed.insert(it.item_id);
    std::set<std::string> negs(c.negatives.begin(), c.negatives.end());
    if (negs.size() != c.negatives.size()) return false;
    for (const auto& id : negs)
        if (!allowed.count(id)) return false;
    return true;
}

struct RecallOracle {
    std::map<std::size_t, double> recall;
    std::size_t corpora = 0;
    std::size_t skipped = 0;
    bool corpora_valid = true;
};

/// R@K by pairwise rank counting: a positive is retrieved at K when fewer than
/// K corpus items precede it under (squared distance, item id).
inline RecallOracle brute_force_recall(const EmbeddingTable& table, const std::vector<Outfit>& outfits,
                                       const ctl::eval::EvalConfig& cfg) {
    const ctl::eval::TestPool pool(outfits);
    RecallOracle r;
    for (auto k : cfg.ks) r.recall[k] = 0;
    for (std::size_t oi = 0; oi < outfits.size(); ++oi) {
        const auto& o = outfits[oi];
        if (o.items.size() != cfg.outfit_size) continue;
        for (std::size_t qi = 0; qi < o.items.size(); ++qi) {
            std::vector<std::optional<int>> targets;
            if (cfg.mode == ctl::eval::CorpusMode::AllCategories) {
                targets.push_back(std::nullopt);
            } else {
                std::set<int> cats;
                for (std::size_t k = 0; k < o.items.size(); ++k)
                    if (k != qi) cats.insert(o.items[k].category);
                targets.assign(cats.begin(), cats.end());
            }
            for (auto t : targets) {
                std::size_t available = 0;
                for (std::size_t o2 = 0; o2 < outfits.size(); ++o2)
                    if (o2 != oi)
                        for (const auto& it : outfits[o2].items)
                            if (!t || it.category == *t) ++available;
                std::size_t n_pos = 0;
                for (std::size_t k = 0; k < o.items.size(); ++k)
                    if (k != qi && (!t || o.items[k].category == *t)) ++n_pos;
                if (available < cfg.corpus_size - n_pos) {
                    ++r.skipped;
                    continue;
                }
                const auto c = ctl::eval::build_recall_corpus(
                    pool, oi, qi, t, cfg.corpus_size, ctl::eval::corpus_seed(cfg.seed, o.items[qi].item_id, t));
                r.corpora_valid = r.corpora_valid && corpus_is_valid(outfits, oi, qi, t, c, cfg.corpus_size);
                std::vector<std::string> all = c.positives;
                all.insert(all.end(), c.negatives.begin(), c.negatives.end());
                for (auto k : cfg.ks) {
                    std::size_t hits = 0;
                    for (const auto& p : c.positives) {
                        const double dp = exact_sq(table, c.query, p);
                        std::size_t ahead = 0;
                        for (const auto& other : all) {
                            const double d = exact_sq(table, c.query, other);
                            if (d < dp || (d == dp && other < p)) ++ahead;
                        }
                        if (ahead < k) ++hits;
                    }
                    r.recall[k] += static_cast<double>(hits) / static_cast<double>(std::min(c.positives.size(), k));
                }
                ++r.corpora;
            }
        }
    }
    for (auto& [k, v] : r.recall) v /= static_cast<double>(r.corpora);
    return r;
}

struct FitbOracle {
    std::size_t asked = 0, correct = 0, skipped = 0;
    bool questions_valid = true;
};

/// Answers every question by scoring all four candidates from scratch.
inline FitbOracle brute_force_fitb(const EmbeddingTable& table, const std::vector<Outfit>& outfits,
                                   std::uint64_t seed) {
    const ctl::eval::TestPool pool(outfits);
    FitbOracle r;
    for (std::size_t oi = 0; oi < outfits.size(); ++oi) {
        const auto q = ctl::eval::build_fitb_question(pool, oi, seed);
        if (!q) {
            ++r.skipped;
            continue;
        }
        ++r.asked;
        const auto& o = outfits[oi];
        const auto& truth = q->candidates[q->answer];
        std::set<std::string> members;
        for (const auto& it : o.items) members.insert(it.item_id);
        bool ok = q->candidates.size() == 4 && members.count(truth) && q->query.size() + 1 == o.items.size() &&
                  std::set<std::string>(q->candidates.begin(), q->candidates.end()).size() == 4;
        for (const auto& id : q->query) ok = ok && members.count(id) && id != truth;
        for (const auto& cand : q->candidates) {
            if (cand == truth) continue;
            ok = ok && !members.count(cand);
            for (const auto& o2 : outfits)
                for (const auto& it : o2.items)
                    if (it.item_id == cand) ok = ok && it.category == q->category;
        }
        r.questions_valid = r.questions_valid && ok;

        std::vector<std::pair<double, std::string>> scored;
        for (const auto& cand : q->candidates) {
            double s = 0;
            for (const auto& id : q->query) s += std::sqrt(exact_sq(table, cand, id));
            scored.emplace_back(s / static_cast<double>(q->query.size()), cand);
        }
        if (std::min_element(scored.begin(), scored.end())->second == truth) ++r.correct;
    }
    return r;
}

}  // namespace oracle
