#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ctl {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    ParseError,
    BadMagic,
    VersionMismatch,
    TruncatedRecord,
    NotFound,
    NonFinite,
    InsufficientData,
    Io,
    NotProductShot,
    UnknownQueryFeatures,
    EmptyComplementarySet,
    Conflict,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::TruncatedRecord: return "TruncatedRecord";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::Io: return "Io";
    case ErrorCode::NotProductShot: return "NotProductShot";
    case ErrorCode::UnknownQueryFeatures: return "UnknownQueryFeatures";
    case ErrorCode::EmptyComplementarySet: return "EmptyComplementarySet";
    case ErrorCode::Conflict: return "Conflict";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) throw Error(code, what);
}

template <class T>
using MatrixT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using VectorT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Matrix = MatrixT<float>;
using Vector = VectorT<float>;

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t seeded_hash(std::string_view key, std::uint64_t seed) noexcept {
    return mix64(fnv1a64(key) ^ mix64(seed));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept {
    return seeded_hash(tag, seed);
}

inline std::string to_hex(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

/// Uniform integer in [0, n) without relying on std::uniform_int_distribution,
/// whose output sequence differs between standard library implementations.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % n;
}

inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller; portable across standard libraries.
inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <class It>
void shuffle_range(It first, It last, Rng& rng) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
        const auto j = uniform_index(rng, i);
        std::iter_swap(first + static_cast<std::ptrdiff_t>(i - 1),
                       first + static_cast<std::ptrdiff_t>(j));
    }
}

/// Draws `k` distinct indices from [0, n) (partial Fisher-Yates).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
    require(k <= n, ErrorCode::InsufficientData,
            "cannot sample " + std::to_string(k) + " of " + std::to_string(n));
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + uniform_index(rng, n - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

namespace binio {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (is.gcount() != static_cast<std::streamsize>(sizeof(T)))
        throw Error(ErrorCode::TruncatedRecord, std::string("short read: ") + what);
    return v;
}

inline void put_bytes(std::ostream& os, std::string_view s) {
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_bytes(std::istream& is, std::size_t n, const char* what) {
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (is.gcount() != static_cast<std::streamsize>(n))
        throw Error(ErrorCode::TruncatedRecord, std::string("short read: ") + what);
    return s;
}

inline void put_floats(std::ostream& os, const float* data, std::size_t n) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
}

inline void get_floats(std::istream& is, float* data, std::size_t n, const char* what) {
    const auto bytes = static_cast<std::streamsize>(n * sizeof(float));
    is.read(reinterpret_cast<char*>(data), bytes);
    if (is.gcount() != bytes)
        throw Error(ErrorCode::TruncatedRecord, std::string("short read: ") + what);
}

inline void expect_magic(std::istream& is, std::string_view magic) {
    std::string got(magic.size(), '\0');
    is.read(got.data(), static_cast<std::streamsize>(magic.size()));
    if (is.gcount() != static_cast<std::streamsize>(magic.size()) || got != magic)
        throw Error(ErrorCode::BadMagic, "expected magic '" + std::string(magic) + "'");
}

}  // namespace binio

}  // namespace ctl
