#pragma once

#include "ctl/eval/fitb.hpp"
#include "ctl/eval/recall.hpp"

#include "json.hpp"

#include <cstdio>
#include <sstream>

namespace ctl::eval {

struct EvalReport {
    std::string method;
    std::map<std::size_t, double> recall_percent;  // K -> R@K * 100
    double fitb_percent = 0;
    std::size_t recall_corpora = 0;
    std::size_t fitb_questions = 0;
    std::uint64_t seed = 0;
    nlohmann::json config = nlohmann::json::object();
};

inline nlohmann::json eval_config_to_json(const EvalConfig& c) {
    return {{"ks", c.ks}, {"corpus_size", c.corpus_size}, {"mode", to_string(c.mode)},
            {"outfit_size", c.outfit_size}, {"seed", c.seed}};
}

/// R@K and FITB for one embedding table.
inline EvalReport evaluate(const std::string& method, const EmbeddingTable& table, const std::vector<data::Outfit>& test,
                           const EvalConfig& cfg) {
    const auto r = evaluate_recall(table, test, cfg);
    const auto f = evaluate_fitb(table, test, cfg.seed);
    EvalReport rep;
    rep.method = method;
    for (const auto& [k, v] : r.recall) rep.recall_percent[k] = 100.0 * v;
    rep.fitb_percent = 100.0 * f.accuracy;
    rep.recall_corpora = r.corpora;
    rep.fitb_questions = f.asked;
    rep.seed = cfg.seed;
    rep.config = eval_config_to_json(cfg);
    return rep;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json rec = nlohmann::json::object();
    for (const auto& [k, v] : r.recall_percent) rec["R@" + std::to_string(k)] = v;
    return {{"method", r.method},
            {"recall", rec},
            {"fitb", r.fitb_percent},
            {"recall_corpora", r.recall_corpora},
            {"fitb_questions", r.fitb_questions},
            {"seed", r.seed},
            {"config", r.config}};
}

/// Aligned text table: Method | R@1 | R@5 | R@10 | FITB.
inline std::string format_table(const std::vector<EvalReport>& reports) {
    std::size_t width = 6;
    for (const auto& r : reports) width = std::max(width, r.method.size());
    std::vector<std::size_t> ks;
    if (!reports.empty())
        for (const auto& [k, _] : reports.front().recall_percent) ks.push_back(k);
    std::ostringstream os;
    char buf[64];
    os << "Method" << std::string(width - 6, ' ');
    for (auto k : ks) {
        std::snprintf(buf, sizeof buf, " | %6s", ("R@" + std::to_string(k)).c_str());
        os << buf;
    }
    os << " |   FITB\n";
    for (const auto& r : reports) {
        os << r.method << std::string(width - r.method.size(), ' ');
        for (auto k : ks) {
            const auto it = r.recall_percent.find(k);
            std::snprintf(buf, sizeof buf, " | %6.1f", it == r.recall_percent.end() ? 0.0 : it->second);
            os << buf;
        }
        std::snprintf(buf, sizeof buf, " | %6.1f\n", r.fitb_percent);
        os << buf;
    }
    return os.str();
}

}  // namespace ctl::eval
