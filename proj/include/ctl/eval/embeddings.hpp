#pragma once

#include "ctl/data/feature_store.hpp"
#include "ctl/data/types.hpp"
#include "ctl/net/model.hpp"

#include <unordered_map>

namespace ctl::eval {

/// Item id -> embedding row. Evaluators read it; they never run the model.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

    void add(const std::string& id, std::span<const float> v) {
        require(v.size() == dim_, ErrorCode::DimensionMismatch, "embedding dim mismatch for " + id);
        require(index_.emplace(id, ids_.size()).second, ErrorCode::InvalidArgument, "duplicate embedding id " + id);
        ids_.push_back(id);
        values_.insert(values_.end(), v.begin(), v.end());
    }

    std::span<const float> get(const std::string& id) const {
        const auto it = index_.find(id);
        require(it != index_.end(), ErrorCode::NotFound, "no embedding for " + id);
        return {values_.data() + it->second * dim_, dim_};
    }

    bool contains(const std::string& id) const { return index_.count(id) != 0; }
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }

    /// Applies `f` to every stored vector in place (used for isometry checks).
    template <class F>
    void transform(F&& f) {
        for (std::size_t i = 0; i < ids_.size(); ++i) f(std::span<float>(values_.data() + i * dim_, dim_));
    }

private:
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<float> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline double squared_distance(std::span<const float> a, std::span<const float> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return s;
}

inline double distance(std::span<const float> a, std::span<const float> b) { return std::sqrt(squared_distance(a, b)); }

/// Eval-mode style embeddings for every item of `outfits`.
inline EmbeddingTable embed_outfits(const net::ModelParams<float>& params, const std::vector<data::Outfit>& outfits,
                                    const data::FeatureStore& store, std::size_t batch = 512) {
    EmbeddingTable table(params.config.embedding_dim);
    std::vector<std::string> ids, refs;
    for (const auto& o : outfits)
        for (const auto& i : o.items) {
            ids.push_back(i.item_id);
            refs.push_back(i.feature_ref);
        }
    for (std::size_t b = 0; b < refs.size(); b += batch) {
        const auto end = std::min(refs.size(), b + batch);
        std::vector<std::string> chunk(refs.begin() + static_cast<std::ptrdiff_t>(b),
                                       refs.begin() + static_cast<std::ptrdiff_t>(end));
        const Matrix emb = net::forward_style_eval(params.style, store.gather(chunk), params.config.bn_eps);
        for (std::size_t k = b; k < end; ++k)
            table.add(ids[k], {emb.row(static_cast<Eigen::Index>(k - b)).data(), table.dim()});
    }
    return table;
}

/// Raw features used directly as embeddings.
inline EmbeddingTable identity_embeddings(const std::vector<data::Outfit>& outfits, const data::FeatureStore& store) {
    EmbeddingTable table(store.dim());
    for (const auto& o : outfits)
        for (const auto& i : o.items) table.add(i.item_id, store.get(i.feature_ref));
    return table;
}

/// Independent Gaussian embeddings; the chance-level baseline.
inline EmbeddingTable random_embeddings(const std::vector<data::Outfit>& outfits, std::size_t dim,
                                        std::uint64_t seed) {
    EmbeddingTable table(dim);
    Rng rng(derive_seed(seed, "random-embeddings"));
    std::vector<float> v(dim);
    for (const auto& o : outfits)
        for (const auto& i : o.items) {
            for (auto& x : v) x = static_cast<float>(standard_normal(rng));
            table.add(i.item_id, v);
        }
    return table;
}

}  // namespace ctl::eval
