#pragma once

#include "ctl/common.hpp"
#include "ctl/tensor_io.hpp"

#include <queue>
#include <span>

namespace ctl::retrieval {

struct SearchHit {
    std::string item_id;
    double distance = 0;

    bool operator==(const SearchHit&) const = default;
};

inline float l2_squared(const float* a, const float* b, std::size_t dim) {
    using Map = Eigen::Map<const Eigen::VectorXf>;
    const auto n = static_cast<Eigen::Index>(dim);
    return (Map(a, n) - Map(b, n)).squaredNorm();
}

namespace detail {

/// Bounded max-heap keeping the k best (distance, id) pairs.
class TopK {
public:
    explicit TopK(std::size_t k) : k_(k) {}

    void push(float d, std::uint32_t row, const std::vector<std::string>& ids) {
        if (heap_.size() < k_) {
            heap_.push_back({d, row});
            std::push_heap(heap_.begin(), heap_.end(), Cmp{&ids});
        } else if (Cmp{&ids}({d, row}, heap_.front())) {
            std::pop_heap(heap_.begin(), heap_.end(), Cmp{&ids});
            heap_.back() = {d, row};
            std::push_heap(heap_.begin(), heap_.end(), Cmp{&ids});
        }
    }

    std::vector<SearchHit> finish(const std::vector<std::string>& ids) {
        std::sort_heap(heap_.begin(), heap_.end(), Cmp{&ids});
        std::vector<SearchHit> out;
        out.reserve(heap_.size());
        for (const auto& e : heap_) out.push_back({ids[e.row], std::sqrt(static_cast<double>(e.d))});
        return out;
    }

private:
    struct Entry {
        float d;
        std::uint32_t row;
    };
    struct Cmp {
        const std::vector<std::string>* ids;
        bool operator()(const Entry& a, const Entry& b) const {
            if (a.d != b.d) return a.d < b.d;
            return (*ids)[a.row] < (*ids)[b.row];
        }
    };
    std::size_t k_;
    std::vector<Entry> heap_;
};

}  // namespace detail

struct AnnBuildOptions {
    std::size_t partitions = 0;        // 0 = max(1, round(sqrt(n)))
    std::size_t max_iterations = 25;
    std::size_t train_per_partition = 64;  // k-means trains on at most this many points per centroid
    std::uint64_t seed = 1;
};

/// Coarse-partitioned (inverted-file) index: k-means centroids, and the
/// vectors grouped by nearest centroid. Searching probes the closest
/// partitions only. Immutable after build.
class AnnIndex {
public:
    AnnIndex() = default;

    static AnnIndex build(std::vector<std::string> ids, const Matrix& vectors, const AnnBuildOptions& opt = {}) {
        require(static_cast<std::size_t>(vectors.rows()) == ids.size(), ErrorCode::DimensionMismatch,
                "id count differs from vector count");
        AnnIndex idx;
        idx.dim_ = static_cast<std::size_t>(vectors.cols());
        const std::size_t n = ids.size();
        if (n == 0) return idx;
        std::size_t c = opt.partitions ? opt.partitions
                                       : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(double(n)))));
        c = std::min(c, n);
        idx.centroids_ = train_centroids(vectors, c, opt);
        const auto assign = nearest_centroid(vectors, idx.centroids_);

        idx.offsets_.assign(c + 1, 0);
        for (auto a : assign) ++idx.offsets_[a + 1];
        for (std::size_t p = 0; p < c; ++p) idx.offsets_[p + 1] += idx.offsets_[p];
        std::vector<std::size_t> cursor(idx.offsets_.begin(), idx.offsets_.end() - 1);
        idx.vectors_.resize(static_cast<Eigen::Index>(n), vectors.cols());
        idx.ids_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto slot = cursor[assign[i]]++;
            idx.vectors_.row(static_cast<Eigen::Index>(slot)) = vectors.row(static_cast<Eigen::Index>(i));
            idx.ids_[slot] = std::move(ids[i]);
        }
        return idx;
    }

    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    std::size_t dim() const { return dim_; }
    std::size_t partitions() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t default_probes() const { return std::max<std::size_t>(1, partitions() / 8); }
    const Matrix& centroids() const { return centroids_; }
    const std::vector<std::string>& ids() const { return ids_; }

    /// Partition holding row `slot` of the partition-ordered storage.
    std::size_t partition_of_slot(std::size_t slot) const {
        return static_cast<std::size_t>(std::upper_bound(offsets_.begin(), offsets_.end(), slot) - offsets_.begin()) - 1;
    }
    std::span<const float> vector_at(std::size_t slot) const {
        return {vectors_.row(static_cast<Eigen::Index>(slot)).data(), dim_};
    }

    /// Scans the `probes` partitions whose centroids are nearest the query and
    /// returns up to k hits by ascending distance, ties by item id.
    std::vector<SearchHit> search(std::span<const float> query, std::size_t k, std::size_t probes = 0) const {
        require(k >= 1, ErrorCode::InvalidArgument, "k must be at least 1");
        if (empty()) return {};
        require(query.size() == dim_, ErrorCode::DimensionMismatch, "query dim differs from index dim");
        if (probes == 0) probes = default_probes();
        probes = std::min(probes, partitions());
        std::vector<std::pair<float, std::size_t>> cd(partitions());
        for (std::size_t p = 0; p < cd.size(); ++p)
            cd[p] = {l2_squared(query.data(), centroids_.row(static_cast<Eigen::Index>(p)).data(), dim_), p};
        std::partial_sort(cd.begin(), cd.begin() + static_cast<std::ptrdiff_t>(probes), cd.end());
        detail::TopK top(k);
        for (std::size_t i = 0; i < probes; ++i) {
            const auto p = cd[i].second;
            for (std::size_t s = offsets_[p]; s < offsets_[p + 1]; ++s)
                top.push(l2_squared(query.data(), vectors_.row(static_cast<Eigen::Index>(s)).data(), dim_),
                         static_cast<std::uint32_t>(s), ids_);
        }
        return top.finish(ids_);
    }

    /// Full scan with the same ordering contract as search().
    std::vector<SearchHit> exact_search(std::span<const float> query, std::size_t k) const {
        require(k >= 1, ErrorCode::InvalidArgument, "k must be at least 1");
        if (empty()) return {};
        require(query.size() == dim_, ErrorCode::DimensionMismatch, "query dim differs from index dim");
        detail::TopK top(k);
        for (std::size_t s = 0; s < ids_.size(); ++s)
            top.push(l2_squared(query.data(), vectors_.row(static_cast<Eigen::Index>(s)).data(), dim_),
                     static_cast<std::uint32_t>(s), ids_);
        return top.finish(ids_);
    }

    void write(std::ostream& os) const {
        binio::put<std::uint64_t>(os, dim_);
        binio::put<std::uint64_t>(os, ids_.size());
        for (const auto& id : ids_) {
            binio::put<std::uint16_t>(os, static_cast<std::uint16_t>(id.size()));
            binio::put_bytes(os, id);
        }
        binio::put<std::uint64_t>(os, offsets_.size());
        for (auto o : offsets_) binio::put<std::uint64_t>(os, o);
        write_tensor(os, "centroids", to_tensor(centroids_));
        write_tensor(os, "vectors", to_tensor(vectors_));
    }

    static AnnIndex read(std::istream& is) {
        AnnIndex idx;
        idx.dim_ = binio::get<std::uint64_t>(is, "ann dim");
        const auto n = binio::get<std::uint64_t>(is, "ann size");
        idx.ids_.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            const auto len = binio::get<std::uint16_t>(is, "id length");
            idx.ids_.push_back(binio::get_bytes(is, len, "id"));
        }
        const auto no = binio::get<std::uint64_t>(is, "offset count");
        for (std::uint64_t i = 0; i < no; ++i) idx.offsets_.push_back(binio::get<std::uint64_t>(is, "offset"));
        auto [cname, ct] = read_tensor(is);
        auto [vname, vt] = read_tensor(is);
        require(cname == "centroids" && vname == "vectors", ErrorCode::ParseError, "ann tensors out of order");
        if (n > 0) {
            from_tensor(ct, idx.centroids_, cname);
            from_tensor(vt, idx.vectors_, vname);
        }
        require(static_cast<std::uint64_t>(idx.vectors_.rows()) == n &&
                    (no == 0 || idx.offsets_.back() == n),
                ErrorCode::ParseError, "ann index tables disagree");
        return idx;
    }

private:
    static Matrix train_centroids(const Matrix& x, std::size_t c, const AnnBuildOptions& opt) {
        const std::size_t n = static_cast<std::size_t>(x.rows());
        Rng rng(derive_seed(opt.seed, "kmeans"));
        const std::size_t train_n = std::min(n, std::max(c, c * opt.train_per_partition));
        Matrix train(static_cast<Eigen::Index>(train_n), x.cols());
        {
            const auto pick = sample_without_replacement(n, train_n, rng);
            for (std::size_t i = 0; i < train_n; ++i)
                train.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(pick[i]));
        }
        Matrix cent(static_cast<Eigen::Index>(c), x.cols());
        const auto init = sample_without_replacement(train_n, c, rng);
        for (std::size_t i = 0; i < c; ++i)
            cent.row(static_cast<Eigen::Index>(i)) = train.row(static_cast<Eigen::Index>(init[i]));
        if (c == 1) {
            cent.row(0) = x.colwise().mean();
            return cent;
        }
        std::vector<std::size_t> assign(train_n, 0);
        for (std::size_t it = 0; it < opt.max_iterations; ++it) {
            const auto next = nearest_centroid(train, cent);
            const bool moved = next != assign;
            assign = next;
            Matrix sums = Matrix::Zero(cent.rows(), cent.cols());
            std::vector<std::size_t> counts(c, 0);
            for (std::size_t i = 0; i < train_n; ++i) {
                sums.row(static_cast<Eigen::Index>(assign[i])) += train.row(static_cast<Eigen::Index>(i));
                ++counts[assign[i]];
            }
            for (std::size_t k = 0; k < c; ++k) {
                const auto kr = static_cast<Eigen::Index>(k);
                if (counts[k]) {
                    cent.row(kr) = sums.row(kr) / static_cast<float>(counts[k]);
                } else {
                    // empty cluster: reseed on a random training point
                    cent.row(kr) = train.row(static_cast<Eigen::Index>(uniform_index(rng, train_n)));
                }
            }
            if (!moved && it > 0) break;
        }
        return cent;
    }

    static std::vector<std::size_t> nearest_centroid(const Matrix& x, const Matrix& cent) {
        const std::size_t n = static_cast<std::size_t>(x.rows());
        std::vector<std::size_t> out(n, 0);
        const Eigen::VectorXf cn = cent.rowwise().squaredNorm();
        constexpr Eigen::Index block = 1024;
        for (Eigen::Index b = 0; b < x.rows(); b += block) {
            const auto rows = std::min(block, x.rows() - b);
            // ||x||^2 is constant per row and does not change the argmin
            const Matrix scores = (-2.0f * (x.middleRows(b, rows) * cent.transpose())).rowwise() + cn.transpose();
            for (Eigen::Index r = 0; r < rows; ++r) {
                Eigen::Index best = 0;
                scores.row(r).minCoeff(&best);
                out[static_cast<std::size_t>(b + r)] = static_cast<std::size_t>(best);
            }
        }
        return out;
    }

    std::size_t dim_ = 0;
    Matrix centroids_;
    Matrix vectors_;                    // partition-ordered
    std::vector<std::string> ids_;      // partition-ordered
    std::vector<std::size_t> offsets_;  // partition p occupies [offsets_[p], offsets_[p+1])
};

}  // namespace ctl::retrieval
