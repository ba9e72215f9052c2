#pragma once

#include "ctl/data/types.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>

namespace ctl::data {

using json = nlohmann::json;

inline json style_scores_to_json(const StyleScores& s) {
    json j = json::object();
    for (std::size_t i = 0; i < kStyleLabelCount; ++i) j[kStyleLabelNames[i]] = s.scores[i];
    return j;
}

inline StyleScores style_scores_from_json(const json& j) {
    StyleScores s;
    for (std::size_t i = 0; i < kStyleLabelCount; ++i) {
        const auto it = j.find(kStyleLabelNames[i]);
        require(it != j.end(), ErrorCode::ParseError,
                std::string("style_scores missing ") + kStyleLabelNames[i]);
        s.scores[i] = it->get<double>();
    }
    return s;
}

inline json object_to_json(const DetectedObject& o, const CategoryVocab& vocab) {
    return json{{"item_id", o.item_id},
                {"bbox", {o.box.x, o.box.y, o.box.w, o.box.h}},
                {"category", vocab.name(o.category)},
                {"detector_score", o.detector_score},
                {"dominant_color_bin", o.dominant_color_bin},
                {"feature_ref", o.feature_ref}};
}

inline DetectedObject object_from_json(const json& j, const CategoryVocab& vocab) {
    DetectedObject o;
    o.item_id = j.at("item_id").get<std::string>();
    const auto& b = j.at("bbox");
    require(b.is_array() && b.size() == 4, ErrorCode::ParseError, "bbox must be [x,y,w,h]");
    o.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    o.category = vocab.at(j.at("category").get<std::string>());
    o.detector_score = j.value("detector_score", 1.0);
    o.dominant_color_bin = j.value("dominant_color_bin", 0);
    o.feature_ref = j.value("feature_ref", o.item_id);
    return o;
}

inline json outfit_to_json(const Outfit& o, const CategoryVocab& vocab) {
    json items = json::array();
    for (const auto& i : o.items) items.push_back(object_to_json(i, vocab));
    return json{{"image_id", o.outfit_id},
                {"style_scores", style_scores_to_json(o.style_scores)},
                {"items", std::move(items)}};
}

/// Raw records use the outfit schema; "objects" is accepted as an alias of "items".
inline RawOutfitImage raw_from_json(const json& j, const CategoryVocab& vocab) {
    RawOutfitImage img;
    img.image_id = j.at("image_id").get<std::string>();
    img.style_scores = j.contains("style_scores") ? style_scores_from_json(j.at("style_scores"))
                                                  : StyleScores::polyvore_only();
    const json* items = j.contains("items") ? &j.at("items") : j.contains("objects") ? &j.at("objects") : nullptr;
    if (items)
        for (const auto& o : *items) img.objects.push_back(object_from_json(o, vocab));
    return img;
}

inline json raw_to_json(const RawOutfitImage& img, const CategoryVocab& vocab) {
    json items = json::array();
    for (const auto& o : img.objects) items.push_back(object_to_json(o, vocab));
    return json{{"image_id", img.image_id},
                {"style_scores", style_scores_to_json(img.style_scores)},
                {"items", std::move(items)}};
}

inline Outfit outfit_from_json(const json& j, const CategoryVocab& vocab) {
    auto raw = raw_from_json(j, vocab);
    Outfit o;
    o.outfit_id = raw.image_id;
    o.style_scores = raw.style_scores;
    for (auto& obj : raw.objects) o.items.push_back(FashionItem{std::move(obj), raw.image_id});
    return o;
}

struct JsonlReadResult {
    std::vector<RawOutfitImage> images;
    std::vector<std::pair<std::size_t, std::string>> malformed;  // (line, problem)
};

/// Reads raw records one per line. Lines that fail to parse are reported, not fatal.
inline JsonlReadResult read_raw_jsonl(std::istream& is, const CategoryVocab& vocab) {
    JsonlReadResult out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.images.push_back(raw_from_json(json::parse(line), vocab));
        } catch (const std::exception& e) {
            out.malformed.emplace_back(lineno, e.what());
        }
    }
    return out;
}

inline void write_raw_jsonl(std::ostream& os, const std::vector<RawOutfitImage>& images,
                            const CategoryVocab& vocab) {
    for (const auto& img : images) os << raw_to_json(img, vocab).dump() << '\n';
}

inline void write_outfits_jsonl(std::ostream& os, const std::vector<Outfit>& outfits,
                                const CategoryVocab& vocab) {
    for (const auto& o : outfits) os << outfit_to_json(o, vocab).dump() << '\n';
}

inline std::vector<Outfit> read_outfits_jsonl(std::istream& is, const CategoryVocab& vocab) {
    std::vector<Outfit> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(outfit_from_json(json::parse(line), vocab));
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline void save_outfits(const std::string& path, const std::vector<Outfit>& outfits,
                         const CategoryVocab& vocab) {
    std::ofstream os(path, std::ios::trunc);
    require(bool(os), ErrorCode::Io, "cannot open " + path);
    write_outfits_jsonl(os, outfits, vocab);
}

inline std::vector<Outfit> load_outfits(const std::string& path, const CategoryVocab& vocab) {
    std::ifstream is(path);
    require(bool(is), ErrorCode::Io, "cannot open " + path);
    return read_outfits_jsonl(is, vocab);
}

struct ReleasedDataset {
    std::vector<RawOutfitImage> images;
    std::map<std::string, std::size_t> unknown_categories;  // name -> row count
};

/// Reads the public tabular release: one row per item with columns
/// image id, x, y, w, h, category label (tab- or comma-separated, optional
/// header row). Rows are grouped by image id in first-seen order. The release
/// is pre-filtered, so style scores default to Polyvore = 1.
inline ReleasedDataset read_released_dataset(std::istream& is, const CategoryVocab& vocab) {
    ReleasedDataset out;
    std::map<std::string, std::size_t> slot;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, delim);) cols.push_back(c);
        if (lineno == 1 && cols.size() >= 2) {
            // header row: second column is not numeric
            char* end = nullptr;
            std::strtod(cols[1].c_str(), &end);
            if (end == cols[1].c_str()) continue;
        }
        if (cols.size() < 6)
            throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": expected 6 columns");
        BoundingBox box;
        try {
            box = {std::stod(cols[1]), std::stod(cols[2]), std::stod(cols[3]), std::stod(cols[4])};
        } catch (const std::exception&) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": bad bounding box");
        }
        const auto cat = vocab.find(cols[5]);
        if (!cat) {
            ++out.unknown_categories[CategoryVocab::normalize(cols[5])];
            continue;
        }
        const auto& image_id = cols[0];
        auto [it, fresh] = slot.emplace(image_id, out.images.size());
        if (fresh) {
            out.images.push_back({image_id, StyleScores::polyvore_only(), {}});
        }
        auto& img = out.images[it->second];
        DetectedObject o;
        o.item_id = image_id + "#" + std::to_string(img.objects.size());
        o.box = box;
        o.category = *cat;
        o.detector_score = 1.0;
        o.dominant_color_bin = 0;
        o.feature_ref = o.item_id;
        img.objects.push_back(std::move(o));
    }
    return out;
}

}  // namespace ctl::data
