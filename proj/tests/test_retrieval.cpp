#include "engine_fixture.hpp"
#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace ctl;
using namespace ctl::retrieval;

namespace {

Matrix random_matrix(std::size_t n, std::size_t dim, std::uint64_t seed, bool integer = false) {
    Rng rng(seed);
    Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = integer ? static_cast<float>(static_cast<int>(uniform_index(rng, 9)) - 4)
                              : static_cast<float>(standard_normal(rng));
    return m;
}

std::vector<std::string> make_ids(std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("v" + std::to_string((i * 7919) % 100003));
    return ids;
}

std::vector<float> row_of(const Matrix& m, Eigen::Index r) { return {m.row(r).data(), m.row(r).data() + m.cols()}; }

}  // namespace

// ---------------------------------------------------------------------------
// ANN

TEST(Ann, AllProbesEqualsExactSearch) {
    for (std::size_t n : {1u, 2u, 17u, 500u, 3000u, 10000u}) {
        const auto x = random_matrix(n, 12, n);
        const auto idx = AnnIndex::build(make_ids(n), x, {.seed = n});
        const auto q = random_matrix(8, 12, 1000 + n);
        for (Eigen::Index r = 0; r < q.rows(); ++r)
            for (std::size_t k : {1u, 10u, 50u}) {
                const auto qv = row_of(q, r);
                EXPECT_EQ(idx.search(qv, k, idx.partitions()), idx.exact_search(qv, k)) << "n=" << n << " k=" << k;
            }
    }
}

TEST(Ann, ExactSearchMatchesIndependentSort) {
    const std::size_t n = 1000;
    const auto x = random_matrix(n, 6, 3, true);  // integer coordinates: exact distances and real ties
    const auto ids = make_ids(n);
    const auto idx = AnnIndex::build(ids, x);
    const auto q = random_matrix(20, 6, 4, true);
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
        std::vector<std::pair<long, std::string>> all;
        for (std::size_t i = 0; i < n; ++i) {
            long d = 0;
            for (Eigen::Index c = 0; c < 6; ++c) {
                const long diff = static_cast<long>(x(static_cast<Eigen::Index>(i), c)) - static_cast<long>(q(r, c));
                d += diff * diff;
            }
            all.emplace_back(d, ids[i]);
        }
        std::sort(all.begin(), all.end());
        const auto got = idx.exact_search(row_of(q, r), 25);
        ASSERT_EQ(got.size(), 25u);
        for (std::size_t i = 0; i < 25; ++i) {
            EXPECT_EQ(got[i].item_id, all[i].second);
            EXPECT_DOUBLE_EQ(got[i].distance, std::sqrt(static_cast<double>(all[i].first)));
        }
    }
}

TEST(Ann, EveryVectorSitsInItsNearestPartition) {
    const auto x = random_matrix(4000, 10, 5);
    const auto idx = AnnIndex::build(make_ids(4000), x);
    EXPECT_EQ(idx.partitions(), 63u);
    EXPECT_EQ(idx.default_probes(), 7u);
    const auto& cent = idx.centroids();
    for (std::size_t s = 0; s < idx.size(); ++s) {
        const auto v = idx.vector_at(s);
        const auto own = idx.partition_of_slot(s);
        const float d_own = l2_squared(v.data(), cent.row(static_cast<Eigen::Index>(own)).data(), 10);
        float d_best = std::numeric_limits<float>::infinity();
        for (Eigen::Index c = 0; c < cent.rows(); ++c) d_best = std::min(d_best, l2_squared(v.data(), cent.row(c).data(), 10));
        EXPECT_LE(d_own, d_best * (1 + 1e-4f) + 1e-5f) << "slot " << s;
    }
}

TEST(Ann, SmallAndDegenerateInputs) {
    const auto one = AnnIndex::build({"only"}, random_matrix(1, 4, 1));
    EXPECT_EQ(one.partitions(), 1u);
    EXPECT_EQ(one.search(std::vector<float>(4, 0.f), 5).size(), 1u);

    const auto x = random_matrix(50, 4, 2);
    const auto c1 = AnnIndex::build(make_ids(50), x, {.partitions = 1});
    EXPECT_EQ(c1.partitions(), 1u);
    const auto q = std::vector<float>(4, 0.5f);
    EXPECT_EQ(c1.search(q, 10), c1.exact_search(q, 10));
    EXPECT_EQ(c1.search(q, 100).size(), 50u);

    const auto empty = AnnIndex::build({}, Matrix(0, 4));
    EXPECT_TRUE(empty.search(q, 3).empty());
    EXPECT_THROW(c1.search(q, 0), Error);
    try {
        c1.search(std::vector<float>(3, 0.f), 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
    }
    EXPECT_THROW(AnnIndex::build({"a"}, x), Error);
}

TEST(Ann, BuildIsDeterministicAndRoundTrips) {
    const auto x = random_matrix(2000, 8, 7);
    const auto a = AnnIndex::build(make_ids(2000), x, {.seed = 3});
    const auto b = AnnIndex::build(make_ids(2000), x, {.seed = 3});
    EXPECT_EQ(a.centroids(), b.centroids());
    EXPECT_EQ(a.ids(), b.ids());
    std::stringstream ss;
    a.write(ss);
    const auto c = AnnIndex::read(ss);
    EXPECT_EQ(c.ids(), a.ids());
    EXPECT_EQ(c.partitions(), a.partitions());
    const auto q = random_matrix(5, 8, 8);
    for (Eigen::Index r = 0; r < 5; ++r) EXPECT_EQ(c.search(row_of(q, r), 10), a.search(row_of(q, r), 10));
}

TEST(Ann, DefaultProbesRecallIsReasonableOnClusteredData) {
    Rng rng(9);
    const std::size_t n = 20000, dim = 16, clusters = 200;
    const auto centres = random_matrix(clusters, dim, 10);
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<Eigen::Index>(uniform_index(rng, clusters));
        for (std::size_t d = 0; d < dim; ++d)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
                centres(c, static_cast<Eigen::Index>(d)) * 4.f + static_cast<float>(0.3 * standard_normal(rng));
    }
    const auto idx = AnnIndex::build(make_ids(n), x);
    double hits = 0;
    for (int qi = 0; qi < 50; ++qi) {
        const auto q = row_of(x, static_cast<Eigen::Index>(uniform_index(rng, n)));
        const auto approx = idx.search(q, 10);
        const auto exact = idx.exact_search(q, 10);
        std::set<std::string> truth;
        for (const auto& h : exact) truth.insert(h.item_id);
        for (const auto& h : approx) hits += truth.count(h.item_id);
    }
    EXPECT_GE(hits / 500.0, 0.9);
}

// ---------------------------------------------------------------------------
// Blending

TEST(Blend, RoundRobinByBestHead) {
    const std::vector<CategoryResults> lists{{1, {{"a1", 0.5}, {"a2", 0.9}}},
                                             {2, {{"b1", 0.1}, {"b2", 0.2}, {"b3", 0.3}}},
                                             {3, {}},
                                             {4, {{"c1", 0.5}}}};
    const auto out = blend(lists, 30);
    std::vector<std::string> ids;
    for (const auto& h : out) ids.push_back(h.item_id);
    EXPECT_EQ(ids, (std::vector<std::string>{"b1", "a1", "c1", "b2", "a2", "b3"}));
    EXPECT_EQ(out[0].category, 2);
    EXPECT_EQ(blend(lists, 2).size(), 2u);
    EXPECT_TRUE(blend({}, 5).empty());
}

TEST(Blend, DropsRepeatedItems) {
    const std::vector<CategoryResults> lists{{0, {{"x", 0.1}, {"y", 0.2}}}, {1, {{"x", 0.3}, {"z", 0.4}}}};
    const auto out = blend(lists, 10);
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[0].item_id, "x");
    EXPECT_EQ(out[0].category, 0);
    EXPECT_EQ(out[1].item_id, "y");
    EXPECT_EQ(out[2].item_id, "z");
}

TEST(Blend, RandomListsKeepInvariants) {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<CategoryResults> lists;
        const auto nl = uniform_index(rng, 6);
        for (std::size_t l = 0; l < nl; ++l) {
            CategoryResults cr{static_cast<int>(l), {}};
            const auto len = uniform_index(rng, 8);
            double d = 0;
            for (std::size_t i = 0; i < len; ++i) {
                d += uniform01(rng);
                cr.hits.push_back({"i" + std::to_string(uniform_index(rng, 20)), d});
            }
            lists.push_back(cr);
        }
        const std::size_t k = 1 + uniform_index(rng, 12);
        const auto out = blend(lists, k);
        std::set<std::string> distinct, available;
        for (const auto& l : lists)
            for (const auto& h : l.hits) available.insert(h.item_id);
        for (const auto& h : out) distinct.insert(h.item_id);
        EXPECT_EQ(distinct.size(), out.size());
        EXPECT_EQ(out.size(), std::min(k, available.size()));
        // within one category the blended order follows the category's own ranking
        for (const auto& l : lists) {
            std::vector<std::string> seq;
            for (const auto& h : out)
                if (h.category == l.category) seq.push_back(h.item_id);
            std::size_t pos = 0;
            for (const auto& id : seq) {
                while (pos < l.hits.size() && l.hits[pos].item_id != id) ++pos;
                EXPECT_LT(pos, l.hits.size());
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Complementary map

TEST(ComplementaryMapTest, ParseOverridesDefaults) {
    const auto vocab = data::CategoryVocab::defaults();
    std::istringstream in("# comment\n\nShoes: Handbags, pants , Handbags\nshirts & tops: Shoes\n");
    const auto m = ComplementaryMap::parse(in, vocab, ComplementaryMap::defaults(vocab));
    const auto shoes = *vocab.find("Shoes");
    EXPECT_EQ(*m.find(shoes), (std::vector<data::CategoryId>{*vocab.find("Handbags"), *vocab.find("Pants")}));
    EXPECT_EQ(m.find(*vocab.find("Watches"))->size(), vocab.size() - 1);
    std::istringstream back(m.to_text(vocab));
    const auto again = ComplementaryMap::parse(back, vocab);
    EXPECT_EQ(*again.find(shoes), *m.find(shoes));
}

TEST(ComplementaryMapTest, ErrorsNameTheLine) {
    const auto vocab = data::CategoryVocab::defaults();
    auto fails_with = [&](const std::string& text, const std::string& needle) {
        std::istringstream in(text);
        try {
            ComplementaryMap::parse(in, vocab);
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::ParseError);
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
            return;
        }
        ADD_FAILURE() << "no error for " << text;
    };
    fails_with("Shoes: Handbags\nBoots: Shoes\n", "line 2");
    fails_with("Shoes Handbags\n", "missing ':'");
    fails_with("Shoes: Shoes\n", "itself");
    ComplementaryMap m;
    EXPECT_THROW(m.set(1, {1}), Error);
}

TEST(ComplementaryMapTest, ShippedConfigLoads) {
    const auto vocab = data::CategoryVocab::defaults();
    const auto m = ComplementaryMap::load(std::string(CTL_SOURCE_DIR) + "/config/complementary.map", vocab);
    EXPECT_EQ(m.find(*vocab.find("Shirts & Tops"))->size(), 4u);
}

// ---------------------------------------------------------------------------
// Inverted index

TEST(Index, KeysItemsByPredictedCategory) {
    auto fx = fixtures::make_engine(300, 1);
    Catalog cat;
    for (const auto& it : fx.engine.catalog->items()) {
        auto copy = it;
        copy.labeled_category = (*it.labeled_category + 1) % 13;  // metadata is wrong for every item
        cat.add(copy);
    }
    const auto idx = InvertedIndex::build(cat, *fx.engine.store, *fx.engine.params, fx.vocab);
    for (const auto& o : fx.data.outfits)
        for (const auto& it : o.items) EXPECT_EQ(idx.category_of(it.item_id), it.category);
    std::size_t total = 0;
    for (const auto& [c, ann] : idx.partitions()) total += ann.size();
    EXPECT_EQ(total, cat.size());
    EXPECT_EQ(idx.size(), cat.size());
}

TEST(Index, SkipsNonProductShotsAndMissingFeatures) {
    auto fx = fixtures::make_engine(50, 2);
    Catalog cat;
    for (const auto& it : fx.engine.catalog->items()) cat.add(it);
    data::StyleScores low;
    low[data::StyleLabel::ProductShot] = 0.89;
    cat.add({"lifestyle", cat.items().front().feature_ref, 0, low});
    data::StyleScores ok;
    ok[data::StyleLabel::ProductShot] = 0.9;
    cat.add({"ghost", "no-such-feature", 0, ok});
    IndexBuildOptions opt;
    opt.created_at = 123;
    opt.checkpoint_hash = "abc";
    const auto idx = InvertedIndex::build(cat, *fx.engine.store, *fx.engine.params, fx.vocab, opt);
    EXPECT_EQ(idx.metadata().skipped_not_product_shot, 1u);
    EXPECT_EQ(idx.metadata().skipped_missing_features, 1u);
    EXPECT_EQ(idx.size(), cat.size() - 2);
    EXPECT_FALSE(idx.category_of("lifestyle").has_value());
    EXPECT_EQ(idx.metadata().created_at, 123);
}

TEST(Index, RoundTripPreservesSearchAndMetadata) {
    fixtures::TempDir dir;
    IndexBuildOptions opt;
    opt.exact_below = 50;  // force the partitioned path for larger categories
    opt.created_at = 7;
    auto fx = fixtures::make_engine(400, 3, 0.1, 8, opt);
    const auto& idx = *fx.engine.index;
    idx.save(dir.file("i.ctli"));
    const auto back = InvertedIndex::load(dir.file("i.ctli"));
    EXPECT_EQ(back.metadata(), idx.metadata());
    EXPECT_EQ(back.size(), idx.size());
    const auto q = fx.engine.store->get(fx.data.outfits[0].items[0].feature_ref);
    const auto e = net::embed(*fx.engine.params, q);
    const std::vector<float> ev(e.data(), e.data() + e.size());
    for (const auto& [c, _] : idx.partitions()) EXPECT_EQ(back.search(c, ev, 10), idx.search(c, ev, 10));

    std::string bytes;
    {
        std::ifstream in(dir.file("i.ctli"), std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    std::string bad = bytes;
    bad[0] = 'Z';
    std::istringstream bad_in(bad);
    EXPECT_THROW(InvertedIndex::read(bad_in), Error);
    std::istringstream cut(bytes.substr(0, bytes.size() / 2));
    try {
        InvertedIndex::read(cut);
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), ErrorCode::TruncatedRecord);
    }
}

TEST(Index, SmallCategoriesUseExactSearch) {
    auto fx = fixtures::make_engine(200, 4);
    const auto& idx = *fx.engine.index;
    const auto q = std::vector<float>(8, 0.3f);
    for (const auto& [c, ann] : idx.partitions()) EXPECT_EQ(idx.search(c, q, 5, 1), ann.exact_search(q, 5));
    EXPECT_TRUE(idx.search(99, q, 5).empty());
}

// ---------------------------------------------------------------------------
// Complete the look

TEST(Complete, ReturnsOnlyComplementaryIndexedItems) {
    auto fx = fixtures::make_engine(500, 5);
    const auto& e = fx.engine;
    const auto& item = fx.data.outfits[3].items[0];
    const auto r = complete_the_look(e, {item.item_id, 5, std::nullopt});
    EXPECT_EQ(r.query_category, item.category);
    EXPECT_EQ(r.per_category.size(), fx.vocab.size() - 1);
    for (const auto& cr : r.per_category) {
        EXPECT_NE(cr.category, item.category);
        EXPECT_LE(cr.hits.size(), 5u);
        for (std::size_t i = 0; i < cr.hits.size(); ++i) {
            EXPECT_NE(cr.hits[i].item_id, item.item_id);
            EXPECT_EQ(e.index->category_of(cr.hits[i].item_id), cr.category);
            if (i) {
                EXPECT_LE(cr.hits[i - 1].distance, cr.hits[i].distance);
            }
        }
    }
    EXPECT_LE(r.blended.size(), e.config.k_final);
    const auto j = recommendation_to_json(r, fx.vocab);
    EXPECT_EQ(j.at("query_category"), fx.vocab.name(item.category));
    EXPECT_EQ(j.at("per_category").size(), r.per_category.size());
}

TEST(Complete, PlantedOutfitMatesRankFirst) {
    auto fx = fixtures::make_engine(2000, 6, 0.05);
    std::size_t checked = 0, top1 = 0;
    for (std::size_t oi = 0; oi < 200; ++oi) {
        const auto& o = fx.data.outfits[oi];
        const auto& q = o.items[0];
        const auto r = complete_the_look(fx.engine, {q.item_id, 1, std::nullopt});
        for (const auto& cr : r.per_category) {
            const bool has_mate = std::any_of(o.items.begin() + 1, o.items.end(),
                                              [&](const auto& it) { return it.category == cr.category; });
            if (!has_mate || cr.hits.empty()) continue;
            ++checked;
            const auto& hit = cr.hits[0].item_id;
            top1 += hit.substr(0, hit.find('-')) == o.outfit_id;
        }
    }
    ASSERT_GT(checked, 300u);
    EXPECT_GE(static_cast<double>(top1) / static_cast<double>(checked), 0.95);
}

TEST(Complete, InvariantUnderStyleSpacePermutation) {
    auto fx = fixtures::make_engine(600, 7);
    const auto before = complete_the_look(fx.engine, {fx.data.outfits[1].items[1].item_id, 10, std::nullopt});

    // permute and reflect the style block of every feature; distances agree up to summation order
    data::FeatureStore moved(fx.engine.store->dim());
    for (std::size_t i = 0; i < fx.engine.store->size(); ++i) {
        const auto v = fx.engine.store->row(i);
        std::vector<float> w(v.begin(), v.end());
        std::swap(w[13], w[20]);
        w[15] = -w[15];
        moved.add(fx.engine.store->id(i), w);
    }
    auto engine = fx.engine;
    engine.store = std::make_shared<const data::FeatureStore>(std::move(moved));
    engine.index = std::make_shared<const InvertedIndex>(
        InvertedIndex::build(*engine.catalog, *engine.store, *engine.params, fx.vocab));
    const auto after = complete_the_look(engine, {fx.data.outfits[1].items[1].item_id, 10, std::nullopt});
    ASSERT_EQ(before.per_category.size(), after.per_category.size());
    for (std::size_t c = 0; c < before.per_category.size(); ++c) {
        const auto& b = before.per_category[c].hits;
        const auto& a = after.per_category[c].hits;
        ASSERT_EQ(b.size(), a.size());
        for (std::size_t i = 0; i < b.size(); ++i) {
            EXPECT_EQ(b[i].item_id, a[i].item_id);
            EXPECT_NEAR(b[i].distance, a[i].distance, 1e-5);
        }
    }
    ASSERT_EQ(before.blended.size(), after.blended.size());
    for (std::size_t i = 0; i < before.blended.size(); ++i) EXPECT_EQ(before.blended[i].item_id, after.blended[i].item_id);
}

TEST(Complete, CategoryNarrowing) {
    auto fx = fixtures::make_engine(300, 8);
    const auto& item = fx.data.outfits[0].items[0];
    std::vector<data::CategoryId> want;
    for (data::CategoryId c = 0; c < 13 && want.size() < 2; ++c)
        if (c != item.category) want.push_back(c);
    const auto r = complete_the_look(fx.engine, {item.item_id, 3, want});
    ASSERT_EQ(r.per_category.size(), 2u);
    EXPECT_EQ(r.per_category[0].category, want[0]);
    EXPECT_EQ(r.per_category[1].category, want[1]);
    try {
        complete_the_look(fx.engine, {item.item_id, 3, std::vector<data::CategoryId>{item.category}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
    }
}

TEST(Complete, ErrorCodes) {
    auto fx = fixtures::make_engine(100, 9);
    auto engine = fx.engine;
    Catalog cat;
    for (const auto& it : engine.catalog->items()) cat.add(it);
    data::StyleScores lifestyle;
    lifestyle[data::StyleLabel::ProductShot] = 0.2;
    cat.add({"lifestyle", cat.items().front().feature_ref, 0, lifestyle});
    data::StyleScores shot;
    shot[data::StyleLabel::ProductShot] = 1.0;
    cat.add({"nofeat", "missing-ref", 0, shot});
    engine.catalog = std::make_shared<const Catalog>(std::move(cat));

    auto code = [&](const Engine& e, const CompleteRequest& r) -> std::optional<ErrorCode> {
        try {
            complete_the_look(e, r);
        } catch (const Error& err) {
            return err.code();
        }
        return std::nullopt;
    };
    const auto& good = fx.data.outfits[0].items[0].item_id;
    EXPECT_EQ(code(engine, {"nope", {}, {}}), ErrorCode::NotFound);
    EXPECT_EQ(code(engine, {"lifestyle", {}, {}}), ErrorCode::NotProductShot);
    EXPECT_EQ(code(engine, {"nofeat", {}, {}}), ErrorCode::UnknownQueryFeatures);
    EXPECT_EQ(code(engine, {good, 0, {}}), ErrorCode::InvalidArgument);
    EXPECT_EQ(code(engine, {good, 1, {}}), std::nullopt);

    auto empty_map = engine;
    const auto qcat = fx.data.outfits[0].items[0].category;
    empty_map.map.set(qcat, {});
    EXPECT_EQ(code(empty_map, {good, {}, {}}), ErrorCode::EmptyComplementarySet);
}

TEST(Complete, MapFallbackAndUnindexedCategoriesAreDiagnosed) {
    auto fx = fixtures::make_engine(150, 10);
    auto engine = fx.engine;
    const auto& item = fx.data.outfits[0].items[0];
    engine.map = ComplementaryMap{};
    const auto r = complete_the_look(engine, {item.item_id, 2, std::nullopt});
    ASSERT_FALSE(r.diagnostics.empty());
    EXPECT_NE(r.diagnostics[0].find("using all other categories"), std::string::npos);
    EXPECT_EQ(r.per_category.size(), fx.vocab.size() - 1);

    // an index with only the query's own category leaves every complementary category empty
    Catalog only;
    for (const auto& it : fx.engine.catalog->items())
        if (it.labeled_category == item.category) only.add(it);
    engine.index = std::make_shared<const InvertedIndex>(
        InvertedIndex::build(only, *engine.store, *engine.params, fx.vocab));
    engine.catalog = std::make_shared<const Catalog>(only);
    const auto r2 = complete_the_look(engine, {item.item_id, 2, std::nullopt});
    EXPECT_TRUE(r2.per_category.empty());
    EXPECT_TRUE(r2.blended.empty());
    EXPECT_EQ(r2.diagnostics.back(), "no complementary category is indexed");
}

TEST(Complete, DeterministicAcrossCalls) {
    auto fx = fixtures::make_engine(300, 11);
    const auto& id = fx.data.outfits[5].items[2].item_id;
    EXPECT_EQ(complete_the_look(fx.engine, {id, 7, std::nullopt}), complete_the_look(fx.engine, {id, 7, std::nullopt}));
}
