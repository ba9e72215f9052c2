#pragma once

#include "ctl/data/types.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <thread>
#include <variant>

namespace ctl::data {

inline double iou(const BoundingBox& a, const BoundingBox& b) {
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

/// Greedy non-maximum suppression over all categories jointly. Objects are
/// visited by descending detector score (ties: ascending item_id) and kept when
/// their IOU with every kept box is at most `iou_threshold`.
inline std::vector<DetectedObject> nms(std::vector<DetectedObject> objects, double iou_threshold) {
    require(iou_threshold > 0.0 && iou_threshold < 1.0, ErrorCode::InvalidArgument,
            "nms threshold must lie in (0,1)");
    std::sort(objects.begin(), objects.end(), [](const DetectedObject& a, const DetectedObject& b) {
        if (a.detector_score != b.detector_score) return a.detector_score > b.detector_score;
        return a.item_id < b.item_id;
    });
    std::vector<DetectedObject> kept;
    kept.reserve(objects.size());
    for (auto& obj : objects) {
        const bool clear = std::all_of(kept.begin(), kept.end(), [&](const DetectedObject& k) {
            return iou(k.box, obj.box) <= iou_threshold;
        });
        if (clear) kept.push_back(std::move(obj));
    }
    return kept;
}

enum class RejectReason {
    LowStyleScore,
    TooFewItems,
    TooManyItems,
    LowCategoryDiversity,
    Monochrome,
    Malformed,
};

inline const char* to_string(RejectReason r) {
    switch (r) {
    case RejectReason::LowStyleScore: return "LowStyleScore";
    case RejectReason::TooFewItems: return "TooFewItems";
    case RejectReason::TooManyItems: return "TooManyItems";
    case RejectReason::LowCategoryDiversity: return "LowCategoryDiversity";
    case RejectReason::Monochrome: return "Monochrome";
    case RejectReason::Malformed: return "Malformed";
    }
    return "Unknown";
}

struct Rejection {
    RejectReason reason;
    std::string detail;
};

using CleanResult = std::variant<Outfit, Rejection>;

/// Structural checks on a raw record; returns a description of the first
/// violation, or nullopt when the record is well formed.
inline std::optional<std::string> check_well_formed(const RawOutfitImage& img,
                                                    const CategoryVocab& vocab) {
    if (img.image_id.empty()) return "empty image_id";
    if (!img.style_scores.valid()) return "style score outside [0,1]";
    std::set<std::string> ids;
    for (const auto& o : img.objects) {
        if (o.item_id.empty()) return "empty item_id";
        if (!ids.insert(o.item_id).second) return "duplicate item_id " + o.item_id;
        if (!o.box.valid()) return "invalid bounding box on " + o.item_id;
        if (!vocab.contains(o.category)) return "category out of vocabulary on " + o.item_id;
        if (!(o.detector_score >= 0.0 && o.detector_score <= 1.0))
            return "detector score outside [0,1] on " + o.item_id;
        if (o.dominant_color_bin < 0) return "negative color bin on " + o.item_id;
    }
    return std::nullopt;
}

inline std::size_t distinct_categories(const std::vector<FashionItem>& items) {
    std::set<CategoryId> cats;
    for (const auto& i : items) cats.insert(i.category);
    return cats.size();
}

/// Applies the cleanup rules in order and names the first one that fails.
inline CleanResult clean_outfit(const RawOutfitImage& img, const CleanupConfig& cfg) {
    cfg.validate();
    if (img.style_scores[StyleLabel::Polyvore] < cfg.polyvore_threshold)
        return Rejection{RejectReason::LowStyleScore, "polyvore score below threshold"};

    auto kept = nms(img.objects, cfg.nms_iou);
    std::erase_if(kept, [&](const DetectedObject& o) { return o.box.area() < cfg.min_area_frac; });

    if (kept.size() < cfg.min_items)
        return Rejection{RejectReason::TooFewItems, std::to_string(kept.size()) + " items survive"};
    if (kept.size() > cfg.max_items)
        return Rejection{RejectReason::TooManyItems, std::to_string(kept.size()) + " items survive"};

    Outfit out;
    out.outfit_id = img.image_id;
    out.style_scores = img.style_scores;
    out.items.reserve(kept.size());
    for (auto& o : kept) {
        FashionItem item{std::move(o), img.image_id};
        out.items.push_back(std::move(item));
    }

    if (distinct_categories(out.items) < cfg.min_distinct_categories)
        return Rejection{RejectReason::LowCategoryDiversity, "too few distinct categories"};

    if (cfg.monochrome_filter) {
        const int bin = out.items.front().dominant_color_bin;
        const bool mono = std::all_of(out.items.begin(), out.items.end(),
                                      [&](const FashionItem& i) { return i.dominant_color_bin == bin; });
        if (mono) return Rejection{RejectReason::Monochrome, "all items share color bin " + std::to_string(bin)};
    }
    return out;
}

inline RawOutfitImage to_raw(const Outfit& o) {
    RawOutfitImage img;
    img.image_id = o.outfit_id;
    img.style_scores = o.style_scores;
    for (const auto& i : o.items) img.objects.push_back(static_cast<const DetectedObject&>(i));
    return img;
}

/// True when an emitted outfit satisfies every cleanup rule on its own.
inline bool satisfies_rules(const Outfit& o, const CleanupConfig& cfg) {
    if (o.style_scores[StyleLabel::Polyvore] < cfg.polyvore_threshold) return false;
    if (o.items.size() < cfg.min_items || o.items.size() > cfg.max_items) return false;
    if (distinct_categories(o.items) < cfg.min_distinct_categories) return false;
    for (std::size_t i = 0; i < o.items.size(); ++i) {
        if (o.items[i].box.area() < cfg.min_area_frac) return false;
        if (o.items[i].outfit_id != o.outfit_id) return false;
        for (std::size_t j = i + 1; j < o.items.size(); ++j)
            if (iou(o.items[i].box, o.items[j].box) > cfg.nms_iou) return false;
    }
    if (cfg.monochrome_filter) {
        std::set<int> bins;
        for (const auto& i : o.items) bins.insert(i.dominant_color_bin);
        if (bins.size() < 2) return false;
    }
    return true;
}

struct PipelineResult {
    std::vector<Outfit> outfits;
    std::map<RejectReason, std::size_t> rejects;  // includes the Malformed bucket
    std::vector<std::pair<std::string, std::string>> malformed;  // (image_id, problem)
};

/// Cleans every image. Work is split across `threads` workers; the output is
/// sorted by image_id so the result does not depend on scheduling.
inline PipelineResult run_pipeline(const std::vector<RawOutfitImage>& images, const CleanupConfig& cfg,
                                   const CategoryVocab& vocab, unsigned threads = 1) {
    cfg.validate();
    std::vector<std::optional<CleanResult>> results(images.size());
    std::vector<std::optional<std::string>> problems(images.size());

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            problems[i] = check_well_formed(images[i], vocab);
            if (!problems[i]) results[i] = clean_outfit(images[i], cfg);
        }
    };
    threads = std::max(1u, threads);
    if (threads == 1 || images.size() < 2) {
        work(0, images.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (images.size() + threads - 1) / threads;
        for (std::size_t b = 0; b < images.size(); b += chunk)
            pool.emplace_back(work, b, std::min(images.size(), b + chunk));
        for (auto& t : pool) t.join();
    }

    PipelineResult out;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (problems[i]) {
            ++out.rejects[RejectReason::Malformed];
            out.malformed.emplace_back(images[i].image_id, *problems[i]);
            continue;
        }
        if (auto* o = std::get_if<Outfit>(&*results[i])) {
            out.outfits.push_back(std::move(*o));
        } else {
            ++out.rejects[std::get<Rejection>(*results[i]).reason];
        }
    }
    std::sort(out.outfits.begin(), out.outfits.end(),
              [](const Outfit& a, const Outfit& b) { return a.outfit_id < b.outfit_id; });
    std::sort(out.malformed.begin(), out.malformed.end());
    return out;
}

struct Split {
    std::vector<Outfit> train;
    std::vector<Outfit> test;
};

/// Assigns each outfit to the holdout set by a seeded hash of its id, so an
/// outfit's side never changes when the corpus grows or is reordered.
inline Split split_dataset(const std::vector<Outfit>& outfits, double holdout_fraction, std::uint64_t seed) {
    require(holdout_fraction > 0.0 && holdout_fraction < 1.0, ErrorCode::InvalidArgument,
            "holdout fraction must lie in (0,1)");
    Split s;
    for (const auto& o : outfits) {
        const double u = static_cast<double>(seeded_hash(o.outfit_id, seed) >> 11) * 0x1.0p-53;
        (u < holdout_fraction ? s.test : s.train).push_back(o);
    }
    auto by_id = [](const Outfit& a, const Outfit& b) { return a.outfit_id < b.outfit_id; };
    std::sort(s.train.begin(), s.train.end(), by_id);
    std::sort(s.test.begin(), s.test.end(), by_id);
    return s;
}

inline DatasetStats dataset_stats(const std::vector<Outfit>& outfits, const CategoryVocab& vocab) {
    DatasetStats st;
    for (const auto& o : outfits) {
        ++st.total_outfits;
        ++st.outfits_by_size[o.items.size()];
        for (const auto& i : o.items) {
            ++st.total_items;
            ++st.items_per_category[vocab.name(i.category)];
        }
    }
    return st;
}

}  // namespace ctl::data
