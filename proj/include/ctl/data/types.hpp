#pragma once

#include "ctl/common.hpp"

#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ctl::data {

using CategoryId = int;

/// Category names with dense integer ids. Lookups are case-insensitive and
/// ignore surrounding whitespace, so "shirts & tops" resolves like "Shirts & Tops".
class CategoryVocab {
public:
    CategoryVocab() = default;

    explicit CategoryVocab(std::vector<std::string> names) {
        for (auto& n : names) add(std::move(n));
    }

    /// The 13 most frequent categories of the released outfit dataset.
    static CategoryVocab defaults() {
        return CategoryVocab({"Shoes", "Handbags", "Shirts & Tops", "Pants", "Coats & Jackets",
                              "Dresses", "Jewelry", "Hats", "Skirts", "Sunglasses", "Shorts",
                              "Scarves & Shawls", "Watches"});
    }

    CategoryId add(std::string name) {
        const auto key = normalize(name);
        require(!key.empty(), ErrorCode::InvalidArgument, "empty category name");
        require(!index_.count(key), ErrorCode::InvalidArgument, "duplicate category: " + name);
        const auto id = static_cast<CategoryId>(names_.size());
        index_.emplace(key, id);
        names_.push_back(std::move(name));
        return id;
    }

    std::optional<CategoryId> find(std::string_view name) const {
        const auto it = index_.find(normalize(name));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    CategoryId at(std::string_view name) const {
        if (auto id = find(name)) return *id;
        throw Error(ErrorCode::NotFound, "unknown category: " + std::string(name));
    }

    const std::string& name(CategoryId id) const {
        require(contains(id), ErrorCode::NotFound, "category id out of range: " + std::to_string(id));
        return names_[static_cast<std::size_t>(id)];
    }

    bool contains(CategoryId id) const {
        return id >= 0 && static_cast<std::size_t>(id) < names_.size();
    }

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

    std::uint64_t hash() const {
        std::uint64_t h = fnv1a64("vocab");
        for (const auto& n : names_) h = fnv1a64(n + '\n', h);
        return h;
    }

    static std::string normalize(std::string_view name) {
        auto b = name.find_first_not_of(" \t\r\n");
        auto e = name.find_last_not_of(" \t\r\n");
        if (b == std::string_view::npos) return {};
        std::string out;
        out.reserve(e - b + 1);
        for (auto i = b; i <= e; ++i)
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(name[i]))));
        return out;
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, CategoryId> index_;
};

/// Axis-aligned box in image-fraction coordinates.
struct BoundingBox {
    double x = 0, y = 0, w = 0, h = 0;

    double area() const { return w * h; }

    bool valid() const {
        constexpr double tol = 1e-9;
        return x >= 0 && y >= 0 && w > 0 && h > 0 && x + w <= 1 + tol && y + h <= 1 + tol;
    }

    bool operator==(const BoundingBox&) const = default;
};

enum class StyleLabel { Polyvore = 0, ProductShot, StockPhoto, FullOutfit, CroppedOutfit };
inline constexpr std::size_t kStyleLabelCount = 5;
inline constexpr std::array<const char*, kStyleLabelCount> kStyleLabelNames = {
    "Polyvore", "ProductShot", "StockPhoto", "FullOutfit", "CroppedOutfit"};

struct StyleScores {
    std::array<double, kStyleLabelCount> scores{};

    double& operator[](StyleLabel l) { return scores[static_cast<std::size_t>(l)]; }
    double operator[](StyleLabel l) const { return scores[static_cast<std::size_t>(l)]; }

    bool valid() const {
        for (double s : scores)
            if (!(s >= 0.0 && s <= 1.0)) return false;
        return true;
    }

    static StyleScores polyvore_only() {
        StyleScores s;
        s[StyleLabel::Polyvore] = 1.0;
        return s;
    }

    bool operator==(const StyleScores&) const = default;
};

struct DetectedObject {
    std::string item_id;
    BoundingBox box;
    CategoryId category = 0;
    double detector_score = 0;
    int dominant_color_bin = 0;
    std::string feature_ref;

    bool operator==(const DetectedObject&) const = default;
};

struct RawOutfitImage {
    std::string image_id;
    StyleScores style_scores;
    std::vector<DetectedObject> objects;

    bool operator==(const RawOutfitImage&) const = default;
};

struct FashionItem : DetectedObject {
    std::string outfit_id;

    bool operator==(const FashionItem&) const = default;
};

struct Outfit {
    std::string outfit_id;
    StyleScores style_scores;
    std::vector<FashionItem> items;

    bool operator==(const Outfit&) const = default;
};

struct CleanupConfig {
    double polyvore_threshold = 0.9;
    double nms_iou = 0.1;
    double min_area_frac = 0.05;
    std::size_t min_items = 3;
    std::size_t max_items = 8;
    std::size_t min_distinct_categories = 3;
    bool monochrome_filter = true;

    void validate() const {
        auto ratio = [](double v) { return v > 0.0 && v < 1.0; };
        require(ratio(polyvore_threshold) && ratio(nms_iou) && ratio(min_area_frac),
                ErrorCode::InvalidArgument, "cleanup ratios must lie in (0,1)");
        require(min_items <= max_items, ErrorCode::InvalidArgument, "min_items > max_items");
    }
};

struct DatasetStats {
    std::map<std::string, std::size_t> items_per_category;
    std::map<std::size_t, std::size_t> outfits_by_size;
    std::size_t total_outfits = 0;
    std::size_t total_items = 0;

    bool operator==(const DatasetStats&) const = default;
};

}  // namespace ctl::data
