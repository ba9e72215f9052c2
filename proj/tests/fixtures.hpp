#pragma once

#include "ctl/data/synthetic.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace fixtures {

/// Scratch directory removed when the object goes out of scope.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("ctl-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline ctl::data::BoundingBox random_box(ctl::Rng& rng, double min_side = 0.02, double max_side = 0.6) {
    const double w = min_side + (max_side - min_side) * ctl::uniform01(rng);
    const double h = min_side + (max_side - min_side) * ctl::uniform01(rng);
    return {(1.0 - w) * ctl::uniform01(rng), (1.0 - h) * ctl::uniform01(rng), w, h};
}

inline std::vector<ctl::data::DetectedObject> random_objects(ctl::Rng& rng, std::size_t n, std::size_t n_categories,
                                                             const std::string& prefix, int color_bins = 4) {
    std::vector<ctl::data::DetectedObject> out;
    for (std::size_t i = 0; i < n; ++i) {
        ctl::data::DetectedObject o;
        o.item_id = prefix + "#" + std::to_string(i);
        o.box = random_box(rng);
        o.category = static_cast<int>(ctl::uniform_index(rng, n_categories));
        // coarse scores so ties occur
        o.detector_score = static_cast<double>(ctl::uniform_index(rng, 11)) / 10.0;
        o.dominant_color_bin = static_cast<int>(ctl::uniform_index(rng, static_cast<std::uint64_t>(color_bins)));
        o.feature_ref = o.item_id;
        out.push_back(o);
    }
    return out;
}

/// Raw images spread over every accept/reject path of the cleanup rules.
inline std::vector<ctl::data::RawOutfitImage> random_raw_images(std::size_t n, std::uint64_t seed,
                                                                std::size_t n_categories = 13) {
    ctl::Rng rng(seed);
    std::vector<ctl::data::RawOutfitImage> out;
    for (std::size_t i = 0; i < n; ++i) {
        ctl::data::RawOutfitImage img;
        img.image_id = "img" + std::to_string(100000 + ctl::uniform_index(rng, 900000)) + "-" + std::to_string(i);
        for (auto& s : img.style_scores.scores) s = ctl::uniform01(rng) * 0.3;
        img.style_scores[ctl::data::StyleLabel::Polyvore] = ctl::uniform01(rng) < 0.8 ? 0.85 + 0.15 * ctl::uniform01(rng)
                                                                                     : ctl::uniform01(rng);
        const std::size_t cats = 1 + ctl::uniform_index(rng, n_categories);
        const int bins = 1 + static_cast<int>(ctl::uniform_index(rng, 3));
        img.objects = random_objects(rng, ctl::uniform_index(rng, 14), cats, img.image_id, bins);
        for (auto& o : img.objects) o.box = random_box(rng, 0.1, 0.45);
        out.push_back(std::move(img));
    }
    return out;
}

}  // namespace fixtures
