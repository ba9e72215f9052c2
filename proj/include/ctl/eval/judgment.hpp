#pragma once

#include "ctl/common.hpp"

#include "json.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>

namespace ctl::eval {

struct JudgmentTask {
    std::string task_id;
    std::string method_tag;  // blinded
    std::string query_item;
    std::string candidate_item;
    std::string category;

    bool operator==(const JudgmentTask&) const = default;
};

enum class Verdict { Compatible, Incompatible, Skip };
enum class FailureMode { Color, Print, Season, Other };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::Compatible: return "compatible";
    case Verdict::Incompatible: return "incompatible";
    case Verdict::Skip: return "skip";
    }
    return "unknown";
}

inline const char* to_string(FailureMode f) {
    switch (f) {
    case FailureMode::Color: return "color";
    case FailureMode::Print: return "print";
    case FailureMode::Season: return "season";
    case FailureMode::Other: return "other";
    }
    return "unknown";
}

inline Verdict parse_verdict(std::string_view s) {
    if (s == "compatible") return Verdict::Compatible;
    if (s == "incompatible") return Verdict::Incompatible;
    if (s == "skip") return Verdict::Skip;
    throw Error(ErrorCode::InvalidArgument, "invalid verdict: " + std::string(s));
}

inline FailureMode parse_failure_mode(std::string_view s) {
    if (s == "color") return FailureMode::Color;
    if (s == "print") return FailureMode::Print;
    if (s == "season") return FailureMode::Season;
    if (s == "other") return FailureMode::Other;
    throw Error(ErrorCode::InvalidArgument, "invalid failure_mode: " + std::string(s));
}

struct JudgmentRecord {
    std::string task_id;
    Verdict verdict = Verdict::Skip;
    std::optional<FailureMode> failure_mode;
    std::string rater;
    std::int64_t timestamp = 0;  // unix seconds

    bool operator==(const JudgmentRecord&) const = default;
};

inline nlohmann::json task_to_json(const JudgmentTask& t) {
    return {{"task_id", t.task_id},
            {"method_tag", t.method_tag},
            {"query_item", t.query_item},
            {"candidate_item", t.candidate_item},
            {"category", t.category}};
}

inline JudgmentTask task_from_json(const nlohmann::json& j) {
    return {j.at("task_id").get<std::string>(), j.at("method_tag").get<std::string>(),
            j.at("query_item").get<std::string>(), j.at("candidate_item").get<std::string>(),
            j.value("category", std::string{})};
}

inline nlohmann::json record_to_json(const JudgmentRecord& r) {
    nlohmann::json j = {{"task_id", r.task_id},
                        {"verdict", to_string(r.verdict)},
                        {"rater", r.rater},
                        {"timestamp", r.timestamp}};
    if (r.failure_mode) j["failure_mode"] = to_string(*r.failure_mode);
    return j;
}

/// Parses and validates a record: failure modes only accompany "incompatible".
inline JudgmentRecord record_from_json(const nlohmann::json& j) {
    JudgmentRecord r;
    try {
        r.task_id = j.at("task_id").get<std::string>();
        r.verdict = parse_verdict(j.at("verdict").get<std::string>());
        r.rater = j.at("rater").get<std::string>();
        r.timestamp = j.value("timestamp", std::int64_t{0});
        if (j.contains("failure_mode") && !j.at("failure_mode").is_null())
            r.failure_mode = parse_failure_mode(j.at("failure_mode").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("malformed judgment: ") + e.what());
    }
    require(!r.task_id.empty() && !r.rater.empty(), ErrorCode::InvalidArgument, "task_id and rater are required");
    require(!r.failure_mode || r.verdict == Verdict::Incompatible, ErrorCode::InvalidArgument,
            "failure_mode is only allowed with an incompatible verdict");
    return r;
}

struct Recommendation {
    std::string item_id;
    std::string category;
};

using Recommender = std::function<std::vector<Recommendation>(const std::string& method, const std::string& query)>;

struct JudgmentExport {
    std::vector<JudgmentTask> tasks;
    std::map<std::string, std::string> key;  // blinded tag -> method name
    std::vector<std::pair<std::string, std::string>> failures;  // (query, error)
};

inline std::string blind_tag(const std::string& method, std::uint64_t key_seed) {
    return "m" + to_hex(seeded_hash("method:" + method, key_seed)).substr(0, 10);
}

/// One task per (query, candidate, method). Method names are replaced by
/// keyed hashes and the task order is shuffled so neither the payload nor the
/// position reveals the method.
inline JudgmentExport export_judgment_tasks(const Recommender& recommend, const std::vector<std::string>& queries,
                                            const std::vector<std::string>& methods, std::uint64_t key_seed) {
    JudgmentExport out;
    for (const auto& m : methods) out.key[blind_tag(m, key_seed)] = m;
    require(out.key.size() == methods.size(), ErrorCode::InvalidArgument, "duplicate method names");
    std::set<std::string> seen;
    for (const auto& q : queries) {
        for (const auto& m : methods) {
            std::vector<Recommendation> recs;
            try {
                recs = recommend(m, q);
            } catch (const std::exception& e) {
                out.failures.emplace_back(q, e.what());
                continue;
            }
            const auto tag = blind_tag(m, key_seed);
            for (const auto& r : recs) {
                JudgmentTask t{"t" + to_hex(seeded_hash(tag + "|" + q + "|" + r.item_id, key_seed)), tag, q,
                               r.item_id, r.category};
                if (seen.insert(t.task_id).second) out.tasks.push_back(std::move(t));
            }
        }
    }
    Rng rng(derive_seed(key_seed, "task-order"));
    shuffle_range(out.tasks.begin(), out.tasks.end(), rng);
    return out;
}

struct MethodPrecision {
    std::size_t compatible = 0;
    std::size_t incompatible = 0;
    std::size_t skipped = 0;
    std::optional<double> precision_percent;  // absent when nothing was judged
    std::map<std::string, std::size_t> failure_modes;
};

/// compatible / (compatible + incompatible) per method; skips excluded.
/// Methods are reported under their names when `key` is given, else by tag.
inline std::map<std::string, MethodPrecision> compute_precision(const std::vector<JudgmentRecord>& records,
                                                                const std::vector<JudgmentTask>& tasks,
                                                                const std::map<std::string, std::string>* key = nullptr) {
    std::map<std::string, const JudgmentTask*> by_id;
    for (const auto& t : tasks) by_id[t.task_id] = &t;
    std::map<std::string, MethodPrecision> out;
    auto label = [&](const std::string& tag) {
        if (key) {
            const auto it = key->find(tag);
            if (it != key->end()) return it->second;
        }
        return tag;
    };
    for (const auto& t : tasks) out[label(t.method_tag)];
    for (const auto& r : records) {
        const auto it = by_id.find(r.task_id);
        require(it != by_id.end(), ErrorCode::NotFound, "judgment references unknown task " + r.task_id);
        auto& mp = out[label(it->second->method_tag)];
        switch (r.verdict) {
        case Verdict::Compatible: ++mp.compatible; break;
        case Verdict::Incompatible:
            ++mp.incompatible;
            if (r.failure_mode) ++mp.failure_modes[to_string(*r.failure_mode)];
            break;
        case Verdict::Skip: ++mp.skipped; break;
        }
    }
    for (auto& [_, mp] : out) {
        const auto judged = mp.compatible + mp.incompatible;
        if (judged) mp.precision_percent = 100.0 * static_cast<double>(mp.compatible) / static_cast<double>(judged);
    }
    return out;
}

inline nlohmann::json precision_to_json(const std::map<std::string, MethodPrecision>& p) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [name, mp] : p) {
        nlohmann::json j = {{"compatible", mp.compatible},
                            {"incompatible", mp.incompatible},
                            {"skipped", mp.skipped},
                            {"failure_modes", mp.failure_modes}};
        j["precision"] = mp.precision_percent ? nlohmann::json(*mp.precision_percent) : nlohmann::json(nullptr);
        out[name] = std::move(j);
    }
    return out;
}

inline std::vector<JudgmentTask> read_tasks_jsonl(std::istream& is) {
    std::vector<JudgmentTask> out;
    std::string line;
    while (std::getline(is, line))
        if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(task_from_json(nlohmann::json::parse(line)));
    return out;
}

inline void write_tasks_jsonl(std::ostream& os, const std::vector<JudgmentTask>& tasks) {
    for (const auto& t : tasks) os << task_to_json(t).dump() << '\n';
}

}  // namespace ctl::eval
