#pragma once

#include "ctl/common.hpp"

#include <fstream>
#include <limits>
#include <span>
#include <unordered_map>

namespace ctl::data {

/// Fixed-dimension feature vectors keyed by feature_ref. Immutable once built;
/// concurrent reads are safe.
class FeatureStore {
public:
    static constexpr char kMagic[] = "CTLF";
    static constexpr std::uint32_t kVersion = 1;

    FeatureStore() = default;
    explicit FeatureStore(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }

    void add(std::string id, std::span<const float> values) {
        require(values.size() == dim_, ErrorCode::DimensionMismatch,
                "feature '" + id + "' has dim " + std::to_string(values.size()) + ", store dim " +
                    std::to_string(dim_));
        require(id.size() <= std::numeric_limits<std::uint16_t>::max(), ErrorCode::InvalidArgument,
                "feature id too long");
        require(!index_.count(id), ErrorCode::InvalidArgument, "duplicate feature id: " + id);
        index_.emplace(id, ids_.size());
        ids_.push_back(std::move(id));
        data_.insert(data_.end(), values.begin(), values.end());
    }

    bool contains(const std::string& id) const { return index_.count(id) != 0; }

    std::span<const float> get(const std::string& id) const {
        const auto it = index_.find(id);
        require(it != index_.end(), ErrorCode::NotFound, "feature not found: " + id);
        return row(it->second);
    }

    std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    const std::string& id(std::size_t i) const { return ids_[i]; }
    const std::vector<std::string>& ids() const { return ids_; }

    /// Copies the rows for `refs` into a (refs.size() x dim) matrix.
    Matrix gather(const std::vector<std::string>& refs) const {
        Matrix m(static_cast<Eigen::Index>(refs.size()), static_cast<Eigen::Index>(dim_));
        for (std::size_t r = 0; r < refs.size(); ++r) {
            const auto v = get(refs[r]);
            std::copy(v.begin(), v.end(), m.row(static_cast<Eigen::Index>(r)).data());
        }
        return m;
    }

    void write(std::ostream& os) const {
        binio::put_bytes(os, {kMagic, 4});
        binio::put<std::uint32_t>(os, kVersion);
        binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(dim_));
        binio::put<std::uint64_t>(os, ids_.size());
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            binio::put<std::uint16_t>(os, static_cast<std::uint16_t>(ids_[i].size()));
            binio::put_bytes(os, ids_[i]);
            binio::put_floats(os, data_.data() + i * dim_, dim_);
        }
    }

    static FeatureStore read(std::istream& is) {
        binio::expect_magic(is, {kMagic, 4});
        const auto version = binio::get<std::uint32_t>(is, "version");
        require(version == kVersion, ErrorCode::VersionMismatch,
                "feature store version " + std::to_string(version));
        FeatureStore fs(binio::get<std::uint32_t>(is, "dim"));
        const auto count = binio::get<std::uint64_t>(is, "count");
        std::vector<float> buf(fs.dim_);
        for (std::uint64_t i = 0; i < count; ++i) {
            const auto len = binio::get<std::uint16_t>(is, "id length");
            auto id = binio::get_bytes(is, len, "id");
            binio::get_floats(is, buf.data(), buf.size(), "feature values");
            fs.add(std::move(id), buf);
        }
        return fs;
    }

    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        require(bool(os), ErrorCode::Io, "cannot open " + path);
        write(os);
        require(bool(os), ErrorCode::Io, "write failed: " + path);
    }

    static FeatureStore load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        require(bool(is), ErrorCode::Io, "cannot open " + path);
        return read(is);
    }

private:
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<float> data_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace ctl::data
