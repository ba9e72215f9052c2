#pragma once

#include "ctl/data/corpus_io.hpp"
#include "ctl/data/feature_store.hpp"
#include "ctl/net/model.hpp"
#include "ctl/retrieval/ann.hpp"

#include <chrono>
#include <unordered_map>

namespace ctl::retrieval {

/// One servable corpus item. `labeled_category` is retailer metadata and may
/// be wrong; the index keys items by the model's prediction instead.
struct CatalogItem {
    std::string item_id;
    std::string feature_ref;
    std::optional<data::CategoryId> labeled_category;
    data::StyleScores style_scores;

    bool operator==(const CatalogItem&) const = default;
};

class Catalog {
public:
    void add(CatalogItem item) {
        require(!item.item_id.empty(), ErrorCode::InvalidArgument, "empty item_id");
        require(!index_.count(item.item_id), ErrorCode::InvalidArgument, "duplicate item_id: " + item.item_id);
        index_.emplace(item.item_id, items_.size());
        items_.push_back(std::move(item));
    }

    const CatalogItem* find(const std::string& id) const {
        const auto it = index_.find(id);
        return it == index_.end() ? nullptr : &items_[it->second];
    }

    std::size_t size() const { return items_.size(); }
    const std::vector<CatalogItem>& items() const { return items_; }

    void write_jsonl(std::ostream& os, const data::CategoryVocab& vocab) const {
        for (const auto& it : items_) {
            nlohmann::json j = {{"item_id", it.item_id},
                                {"feature_ref", it.feature_ref},
                                {"style_scores", data::style_scores_to_json(it.style_scores)}};
            if (it.labeled_category) j["category"] = vocab.name(*it.labeled_category);
            os << j.dump() << '\n';
        }
    }

    static Catalog read_jsonl(std::istream& is, const data::CategoryVocab& vocab) {
        Catalog c;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                const auto j = nlohmann::json::parse(line);
                CatalogItem it;
                it.item_id = j.at("item_id").get<std::string>();
                it.feature_ref = j.value("feature_ref", it.item_id);
                if (j.contains("category") && !j.at("category").is_null())
                    it.labeled_category = vocab.find(j.at("category").get<std::string>());
                it.style_scores = data::style_scores_from_json(j.at("style_scores"));
                require(it.style_scores.valid(), ErrorCode::ParseError, "style scores outside [0,1]");
                c.add(std::move(it));
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::ParseError, "catalog line " + std::to_string(lineno) + ": " + e.what());
            } catch (const Error& e) {
                throw Error(ErrorCode::ParseError, "catalog line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        return c;
    }

    void save(const std::string& path, const data::CategoryVocab& vocab) const {
        std::ofstream os(path, std::ios::trunc);
        require(bool(os), ErrorCode::Io, "cannot open " + path);
        write_jsonl(os, vocab);
    }

    static Catalog load(const std::string& path, const data::CategoryVocab& vocab) {
        std::ifstream is(path);
        require(bool(is), ErrorCode::Io, "cannot open " + path);
        return read_jsonl(is, vocab);
    }

private:
    std::vector<CatalogItem> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Every outfit item as a catalog entry scored as a clean product shot.
inline Catalog catalog_from_outfits(const std::vector<data::Outfit>& outfits) {
    Catalog c;
    for (const auto& o : outfits)
        for (const auto& i : o.items) {
            data::StyleScores s;
            s[data::StyleLabel::ProductShot] = 1.0;
            c.add({i.item_id, i.feature_ref, i.category, s});
        }
    return c;
}

inline bool filter_product_shot(const data::StyleScores& scores, double threshold = 0.9) {
    return scores[data::StyleLabel::ProductShot] >= threshold;
}

struct IndexBuildOptions {
    std::uint64_t seed = 1;
    std::size_t exact_below = 10000;  // categories smaller than this are searched exhaustively
    std::size_t partitions = 0;       // 0 = per-category default
    double product_shot_threshold = 0.9;
    std::string checkpoint_hash;
    std::int64_t created_at = -1;  // unix seconds; negative = now
    std::size_t batch = 1024;
};

struct IndexMetadata {
    std::string checkpoint_hash;
    std::int64_t created_at = 0;
    std::size_t embedding_dim = 0;
    std::vector<std::string> vocab;
    std::size_t exact_below = 10000;
    std::size_t skipped_missing_features = 0;
    std::size_t skipped_not_product_shot = 0;

    bool operator==(const IndexMetadata&) const = default;
};

/// Per-category search structures keyed by predicted category. Immutable
/// after build; safe for concurrent readers.
class InvertedIndex {
public:
    static constexpr char kMagic[] = "CTLI";
    static constexpr std::uint32_t kVersion = 1;

    const IndexMetadata& metadata() const { return meta_; }
    const std::map<data::CategoryId, AnnIndex>& partitions() const { return parts_; }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& [_, a] : parts_) n += a.size();
        return n;
    }

    std::size_t category_size(data::CategoryId c) const {
        const auto it = parts_.find(c);
        return it == parts_.end() ? 0 : it->second.size();
    }

    std::optional<data::CategoryId> category_of(const std::string& item_id) const {
        const auto it = item_category_.find(item_id);
        if (it == item_category_.end()) return std::nullopt;
        return it->second;
    }

    /// Ranked hits within category `c`: exhaustive below the size threshold,
    /// probed partitions above it.
    std::vector<SearchHit> search(data::CategoryId c, std::span<const float> query, std::size_t k,
                                  std::size_t probes = 0) const {
        const auto it = parts_.find(c);
        if (it == parts_.end()) return {};
        const auto& ann = it->second;
        if (ann.size() < meta_.exact_below) return ann.exact_search(query, k);
        return ann.search(query, k, probes);
    }

    static InvertedIndex build(const Catalog& catalog, const data::FeatureStore& store,
                               const net::ModelParams<float>& params, const data::CategoryVocab& vocab,
                               const IndexBuildOptions& opt = {}) {
        require(store.dim() == params.config.input_dim || catalog.size() == 0, ErrorCode::DimensionMismatch,
                "feature store dim " + std::to_string(store.dim()) + " != model dim " +
                    std::to_string(params.config.input_dim));
        InvertedIndex idx;
        idx.meta_.checkpoint_hash = opt.checkpoint_hash;
        idx.meta_.created_at =
            opt.created_at >= 0 ? opt.created_at
                                : std::chrono::duration_cast<std::chrono::seconds>(
                                      std::chrono::system_clock::now().time_since_epoch())
                                      .count();
        idx.meta_.embedding_dim = params.config.embedding_dim;
        idx.meta_.vocab = vocab.names();
        idx.meta_.exact_below = opt.exact_below;

        std::vector<const CatalogItem*> usable;
        for (const auto& it : catalog.items()) {
            if (!filter_product_shot(it.style_scores, opt.product_shot_threshold)) {
                ++idx.meta_.skipped_not_product_shot;
            } else if (!store.contains(it.feature_ref)) {
                ++idx.meta_.skipped_missing_features;
            } else {
                usable.push_back(&it);
            }
        }

        std::map<data::CategoryId, std::vector<std::string>> ids;
        std::map<data::CategoryId, std::vector<std::vector<float>>> vecs;
        const auto edim = params.config.embedding_dim;
        for (std::size_t b = 0; b < usable.size(); b += opt.batch) {
            const auto end = std::min(usable.size(), b + opt.batch);
            std::vector<std::string> refs;
            for (auto i = b; i < end; ++i) refs.push_back(usable[i]->feature_ref);
            const Matrix x = store.gather(refs);
            const Matrix logits = net::forward_category(params.category, x);
            const Matrix emb = net::forward_style_eval(params.style, x, params.config.bn_eps);
            for (auto i = b; i < end; ++i) {
                const auto r = static_cast<Eigen::Index>(i - b);
                Eigen::Index best = 0;
                for (Eigen::Index c = 1; c < logits.cols(); ++c)
                    if (logits(r, c) > logits(r, best)) best = c;
                const auto cat = static_cast<data::CategoryId>(best);
                ids[cat].push_back(usable[i]->item_id);
                vecs[cat].emplace_back(emb.row(r).data(), emb.row(r).data() + edim);
                idx.item_category_[usable[i]->item_id] = cat;
            }
        }
        for (auto& [cat, list] : ids) {
            const auto& rows = vecs[cat];
            Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(edim));
            for (std::size_t r = 0; r < rows.size(); ++r)
                std::copy(rows[r].begin(), rows[r].end(), m.row(static_cast<Eigen::Index>(r)).data());
            AnnBuildOptions ao;
            ao.seed = derive_seed(opt.seed, "category:" + std::to_string(cat));
            ao.partitions = opt.partitions;
            idx.parts_.emplace(cat, AnnIndex::build(std::move(list), m, ao));
        }
        return idx;
    }

    void write(std::ostream& os) const {
        const nlohmann::json meta = {{"checkpoint_hash", meta_.checkpoint_hash},
                                     {"created_at", meta_.created_at},
                                     {"embedding_dim", meta_.embedding_dim},
                                     {"vocab", meta_.vocab},
                                     {"exact_below", meta_.exact_below},
                                     {"skipped_missing_features", meta_.skipped_missing_features},
                                     {"skipped_not_product_shot", meta_.skipped_not_product_shot}};
        const auto text = meta.dump();
        binio::put_bytes(os, {kMagic, 4});
        binio::put<std::uint32_t>(os, kVersion);
        binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
        binio::put_bytes(os, text);
        binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(parts_.size()));
        for (const auto& [cat, ann] : parts_) {
            binio::put<std::int32_t>(os, cat);
            ann.write(os);
        }
    }

    static InvertedIndex read(std::istream& is) {
        binio::expect_magic(is, {kMagic, 4});
        const auto version = binio::get<std::uint32_t>(is, "version");
        require(version == kVersion, ErrorCode::VersionMismatch, "index version " + std::to_string(version));
        const auto len = binio::get<std::uint32_t>(is, "metadata length");
        const auto text = binio::get_bytes(is, len, "metadata");
        InvertedIndex idx;
        try {
            const auto j = nlohmann::json::parse(text);
            idx.meta_.checkpoint_hash = j.at("checkpoint_hash").get<std::string>();
            idx.meta_.created_at = j.at("created_at").get<std::int64_t>();
            idx.meta_.embedding_dim = j.at("embedding_dim").get<std::size_t>();
            idx.meta_.vocab = j.at("vocab").get<std::vector<std::string>>();
            idx.meta_.exact_below = j.at("exact_below").get<std::size_t>();
            idx.meta_.skipped_missing_features = j.value("skipped_missing_features", std::size_t{0});
            idx.meta_.skipped_not_product_shot = j.value("skipped_not_product_shot", std::size_t{0});
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError, std::string("index metadata: ") + e.what());
        }
        const auto n = binio::get<std::uint32_t>(is, "category count");
        for (std::uint32_t i = 0; i < n; ++i) {
            const auto cat = binio::get<std::int32_t>(is, "category id");
            require(cat >= 0 && static_cast<std::size_t>(cat) < idx.meta_.vocab.size(), ErrorCode::ParseError,
                    "index category id out of range");
            auto ann = AnnIndex::read(is);
            require(ann.empty() || ann.dim() == idx.meta_.embedding_dim, ErrorCode::DimensionMismatch,
                    "index partition dim differs from metadata");
            for (const auto& id : ann.ids()) idx.item_category_[id] = cat;
            idx.parts_.emplace(cat, std::move(ann));
        }
        return idx;
    }

    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        require(bool(os), ErrorCode::Io, "cannot open " + path);
        write(os);
        require(bool(os), ErrorCode::Io, "write failed: " + path);
    }

    static InvertedIndex load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        require(bool(is), ErrorCode::Io, "cannot open " + path);
        return read(is);
    }

private:
    IndexMetadata meta_;
    std::map<data::CategoryId, AnnIndex> parts_;
    std::unordered_map<std::string, data::CategoryId> item_category_;
};

}  // namespace ctl::retrieval
