#pragma once

#include "ctl/eval/report.hpp"
#include "ctl/net/trainer.hpp"

namespace ctl::eval {

struct AblationMethod {
    std::string name;
    net::TrainConfig train;
};

struct FeatureSet {
    std::string name;
    const data::FeatureStore* store = nullptr;
};

struct AblationSpec {
    std::vector<AblationMethod> methods;
    std::vector<FeatureSet> feature_sets;
    std::vector<std::size_t> dataset_sizes;  // 0 = whole training set
    std::vector<data::Outfit> train;         // ordered; size n uses the first n outfits
    std::vector<data::Outfit> test;
    EvalConfig eval;
};

struct AblationCell {
    std::string method;
    std::string feature_set;
    std::size_t outfits = 0;
    std::size_t objects = 0;
    std::optional<EvalReport> report;
    std::string error;
    double train_seconds = 0;
    nlohmann::json train_config;
};

/// Trains and evaluates every (method, feature set, dataset size) cell.
/// A failing cell records its error and the sweep continues.
inline std::vector<AblationCell> run_ablation(const AblationSpec& spec, const data::CategoryVocab& vocab,
                                              const std::function<void(const AblationCell&)>& on_cell = {}) {
    std::vector<AblationCell> cells;
    for (const auto& fs : spec.feature_sets) {
        for (const auto& m : spec.methods) {
            for (auto size : spec.dataset_sizes) {
                AblationCell cell;
                cell.method = m.name;
                cell.feature_set = fs.name;
                cell.train_config = m.train.to_json();
                try {
                    require(fs.store != nullptr, ErrorCode::NotFound, "feature set " + fs.name + " not loaded");
                    const std::size_t n = size == 0 ? spec.train.size() : size;
                    require(n <= spec.train.size(), ErrorCode::InsufficientData,
                            "dataset size " + std::to_string(n) + " exceeds training set of " +
                                std::to_string(spec.train.size()));
                    std::vector<data::Outfit> subset(spec.train.begin(),
                                                     spec.train.begin() + static_cast<std::ptrdiff_t>(n));
                    cell.outfits = n;
                    for (const auto& o : subset) cell.objects += o.items.size();
                    const auto t0 = std::chrono::steady_clock::now();
                    const auto trained = net::train(subset, *fs.store, vocab, m.train);
                    cell.train_seconds =
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                    const auto table = embed_outfits(trained.params, spec.test, *fs.store);
                    cell.report = evaluate(m.name, table, spec.test, spec.eval);
                } catch (const std::exception& e) {
                    cell.error = e.what();
                }
                if (on_cell) on_cell(cell);
                cells.push_back(std::move(cell));
            }
        }
    }
    return cells;
}

inline nlohmann::json ablation_to_json(const std::vector<AblationCell>& cells) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& c : cells) {
        nlohmann::json row = {{"method", c.method},
                              {"feature_set", c.feature_set},
                              {"outfits", c.outfits},
                              {"objects", c.objects},
                              {"train_seconds", c.train_seconds},
                              {"train_config", c.train_config}};
        if (c.report) row["report"] = report_to_json(*c.report);
        if (!c.error.empty()) row["error"] = c.error;
        rows.push_back(std::move(row));
    }
    return {{"cells", rows}};
}

inline std::string format_ablation(const std::vector<AblationCell>& cells) {
    std::vector<EvalReport> reps;
    std::ostringstream errors;
    for (const auto& c : cells) {
        const std::string label = c.method + " [" + c.feature_set + ", " + std::to_string(c.outfits) + " outfits]";
        if (c.report) {
            auto r = *c.report;
            r.method = label;
            reps.push_back(std::move(r));
        } else {
            errors << label << ": FAILED " << c.error << '\n';
        }
    }
    return format_table(reps) + errors.str();
}

}  // namespace ctl::eval
