#pragma once

#include "ctl/common.hpp"

#include <map>

namespace ctl {

/// A named float tensor in row-major order.
struct Tensor {
    std::vector<std::uint64_t> shape;
    std::vector<float> values;

    std::uint64_t numel() const {
        std::uint64_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
};

using TensorMap = std::map<std::string, Tensor>;

template <class Derived>
Tensor to_tensor(const Eigen::MatrixBase<Derived>& m) {
    Tensor t;
    if (m.cols() == 1) {
        t.shape = {static_cast<std::uint64_t>(m.rows())};
    } else {
        t.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    }
    t.values.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) t.values.push_back(static_cast<float>(m(r, c)));
    return t;
}

template <class Derived>
void from_tensor(const Tensor& t, Eigen::PlainObjectBase<Derived>& m, const std::string& name) {
    const auto rows = static_cast<Eigen::Index>(t.shape.empty() ? 0 : t.shape[0]);
    const auto cols = static_cast<Eigen::Index>(t.shape.size() > 1 ? t.shape[1] : 1);
    require(t.shape.size() <= 2, ErrorCode::DimensionMismatch, "tensor " + name + " has rank > 2");
    if (Derived::ColsAtCompileTime == 1) {
        require(cols == 1, ErrorCode::DimensionMismatch, "tensor " + name + " is not a vector");
    }
    m.resize(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = static_cast<typename Derived::Scalar>(t.values[k++]);
}

/// u16 name length, name bytes, u32 rank, u64 dims, then little-endian f32 values.
inline void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
    require(name.size() <= 0xffff, ErrorCode::InvalidArgument, "tensor name too long");
    require(t.numel() == t.values.size(), ErrorCode::DimensionMismatch, "tensor " + name + " shape/size mismatch");
    binio::put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    binio::put_bytes(os, name);
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) binio::put<std::uint64_t>(os, d);
    binio::put_floats(os, t.values.data(), t.values.size());
}

inline std::pair<std::string, Tensor> read_tensor(std::istream& is) {
    const auto len = binio::get<std::uint16_t>(is, "tensor name length");
    auto name = binio::get_bytes(is, len, "tensor name");
    const auto rank = binio::get<std::uint32_t>(is, "tensor rank");
    require(rank <= 8, ErrorCode::ParseError, "implausible tensor rank in " + name);
    Tensor t;
    for (std::uint32_t i = 0; i < rank; ++i) t.shape.push_back(binio::get<std::uint64_t>(is, "tensor dim"));
    const auto n = t.numel();
    require(n < (std::uint64_t{1} << 34), ErrorCode::ParseError, "implausible tensor size in " + name);
    t.values.resize(static_cast<std::size_t>(n));
    binio::get_floats(is, t.values.data(), t.values.size(), "tensor values");
    return {std::move(name), std::move(t)};
}

inline void write_tensors(std::ostream& os, const TensorMap& tensors) {
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) write_tensor(os, name, t);
}

inline TensorMap read_tensors(std::istream& is) {
    TensorMap out;
    const auto count = binio::get<std::uint32_t>(is, "tensor count");
    for (std::uint32_t i = 0; i < count; ++i) {
        auto [name, t] = read_tensor(is);
        out.emplace(std::move(name), std::move(t));
    }
    return out;
}

inline std::uint64_t file_digest(std::istream& is) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (is) {
        is.read(buf, sizeof buf);
        h = fnv1a64({buf, static_cast<std::size_t>(is.gcount())}, h);
    }
    return h;
}

}  // namespace ctl
