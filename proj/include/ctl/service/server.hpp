#pragma once

#include "ctl/net/checkpoint.hpp"
#include "ctl/retrieval/engine.hpp"
#include "ctl/service/config.hpp"
#include "ctl/service/judgment_store.hpp"

#include "httplib.h"

#include <atomic>
#include <thread>

namespace ctl::service {

/// Everything a request may read. Replaced whole on reload.
struct Snapshot {
    retrieval::Engine engine;
    std::vector<eval::JudgmentTask> tasks;
    std::map<std::string, std::string> key;  // blinded tag -> method
    std::int64_t loaded_at = 0;
};

inline data::CategoryVocab vocab_from_checkpoint(const net::Checkpoint& ck) {
    if (ck.metadata.contains("vocab")) return data::CategoryVocab(ck.metadata.at("vocab").get<std::vector<std::string>>());
    return data::CategoryVocab::defaults();
}

inline std::shared_ptr<const Snapshot> load_snapshot(const ServiceConfig& cfg) {
    cfg.validate();
    auto snap = std::make_shared<Snapshot>();
    auto& e = snap->engine;
    auto ck = net::load_checkpoint(cfg.checkpoint);
    e.vocab = vocab_from_checkpoint(ck);
    e.checkpoint_hash = net::checkpoint_digest(cfg.checkpoint);
    e.params = std::make_shared<const net::ModelParams<float>>(std::move(ck.params));
    e.store = std::make_shared<const data::FeatureStore>(data::FeatureStore::load(cfg.features));
    e.catalog = std::make_shared<const retrieval::Catalog>(retrieval::Catalog::load(cfg.catalog, e.vocab));
    e.index = std::make_shared<const retrieval::InvertedIndex>(retrieval::InvertedIndex::load(cfg.index));
    require(e.index->metadata().vocab == e.vocab.names(), ErrorCode::InvalidArgument,
            "index vocabulary differs from checkpoint vocabulary");
    require(e.index->size() == 0 || e.index->metadata().embedding_dim == e.params->config.embedding_dim,
            ErrorCode::DimensionMismatch, "index embedding dim differs from checkpoint");
    e.map = cfg.complementary_map.empty() ? retrieval::ComplementaryMap::defaults(e.vocab)
                                          : retrieval::ComplementaryMap::load(cfg.complementary_map, e.vocab);
    e.config = {cfg.k_per_category, cfg.k_final, cfg.probes, cfg.product_shot_threshold};
    if (!cfg.tasks.empty()) {
        std::ifstream is(cfg.tasks);
        require(bool(is), ErrorCode::Io, "cannot open " + cfg.tasks);
        snap->tasks = eval::read_tasks_jsonl(is);
    }
    if (!cfg.tasks_key.empty()) {
        std::ifstream is(cfg.tasks_key);
        require(bool(is), ErrorCode::Io, "cannot open " + cfg.tasks_key);
        snap->key = nlohmann::json::parse(is).get<std::map<std::string, std::string>>();
    }
    snap->loaded_at =
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
    return snap;
}

inline int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::NotProductShot:
    case ErrorCode::UnknownQueryFeatures:
    case ErrorCode::EmptyComplementarySet: return 422;
    case ErrorCode::Conflict: return 409;
    case ErrorCode::InvalidArgument:
    case ErrorCode::ParseError:
    case ErrorCode::DimensionMismatch: return 400;
    default: return 500;
    }
}

inline nlohmann::json error_body(ErrorCode code, const std::string& message) {
    return {{"error", to_string(code)}, {"message", message}};
}

/// Task payload shown to raters: the method tag is withheld.
inline nlohmann::json rater_task_json(const eval::JudgmentTask& t) {
    return {{"task_id", t.task_id},
            {"query_item", t.query_item},
            {"candidate_item", t.candidate_item},
            {"category", t.category}};
}

/// Unjudged tasks for `rater` in an order fixed per rater.
inline std::vector<const eval::JudgmentTask*> pending_tasks(const std::vector<eval::JudgmentTask>& tasks,
                                                            const JudgmentStore& store, const std::string& rater) {
    std::vector<std::pair<std::uint64_t, const eval::JudgmentTask*>> keyed;
    for (const auto& t : tasks)
        if (!store.contains(t.task_id, rater)) keyed.emplace_back(seeded_hash(t.task_id, fnv1a64(rater)), &t);
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : a.second->task_id < b.second->task_id;
    });
    std::vector<const eval::JudgmentTask*> out;
    for (const auto& [_, t] : keyed) out.push_back(t);
    return out;
}

inline std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');)
        if (!data::CategoryVocab::normalize(tok).empty()) out.push_back(tok);
    return out;
}

/// Parses /v1/complete query parameters. Throws InvalidArgument on bad input.
inline retrieval::CompleteRequest parse_complete_params(const httplib::Request& req, const data::CategoryVocab& vocab) {
    retrieval::CompleteRequest r;
    require(req.has_param("item_id") && !req.get_param_value("item_id").empty(), ErrorCode::InvalidArgument,
            "item_id is required");
    r.item_id = req.get_param_value("item_id");
    if (req.has_param("k")) {
        const auto text = req.get_param_value("k");
        std::size_t used = 0;
        long long k = 0;
        try {
            k = std::stoll(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        require(used == text.size() && k >= 1 && k <= 1000, ErrorCode::InvalidArgument,
                "k must be an integer in [1, 1000]");
        r.k = static_cast<std::size_t>(k);
    }
    if (req.has_param("categories")) {
        std::vector<data::CategoryId> cats;
        for (const auto& name : split_csv(req.get_param_value("categories"))) {
            const auto c = vocab.find(name);
            require(c.has_value(), ErrorCode::InvalidArgument, "unknown category: " + name);
            cats.push_back(*c);
        }
        require(!cats.empty(), ErrorCode::InvalidArgument, "categories is empty");
        r.categories = std::move(cats);
    }
    return r;
}

inline nlohmann::json health_json(const Snapshot& s) {
    const auto& idx = *s.engine.index;
    nlohmann::json cats = nlohmann::json::object();
    for (const auto& [c, ann] : idx.partitions()) cats[s.engine.vocab.name(c)] = ann.size();
    return {{"status", "ok"},
            {"checkpoint_hash", s.engine.checkpoint_hash},
            {"loaded_at", s.loaded_at},
            {"index",
             {{"checkpoint_hash", idx.metadata().checkpoint_hash},
              {"created_at", idx.metadata().created_at},
              {"items", idx.size()},
              {"categories", cats}}},
            {"catalog_size", s.engine.catalog->size()},
            {"feature_store_size", s.engine.store->size()},
            {"tasks", s.tasks.size()}};
}

/// HTTP JSON front end. Requests run against whichever snapshot was current
/// when they started; reload swaps in a fresh one.
class Service {
public:
    explicit Service(ServiceConfig cfg) : cfg_(std::move(cfg)), store_(cfg_.judgment_store) {
        server_.new_task_queue = [n = cfg_.threads] { return new httplib::ThreadPool(n); };
        server_.set_tcp_nodelay(true);
        routes();
    }

    ~Service() { stop(); }

    /// Loads a snapshot from the configured paths; keeps the old one on failure.
    void reload() {
        auto fresh = load_snapshot(cfg_);
        std::lock_guard lock(snap_mu_);
        snap_ = std::move(fresh);
        ++reloads_;
    }

    void set_snapshot(std::shared_ptr<const Snapshot> s) {
        std::lock_guard lock(snap_mu_);
        snap_ = std::move(s);
    }

    std::shared_ptr<const Snapshot> snapshot() const {
        std::lock_guard lock(snap_mu_);
        return snap_;
    }

    /// Binds (port 0 picks a free port) and serves on a background thread.
    int start(const std::string& host, int port) {
        const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        require(bound > 0, ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return bound;
    }

    /// Serves on the calling thread until stop().
    void run(const std::string& host, int port) {
        require(server_.listen(host, port), ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    JudgmentStore& judgments() { return store_; }
    httplib::Server& http() { return server_; }

private:
    template <class F>
    void guarded(httplib::Response& res, F&& body) {
        try {
            body();
        } catch (const Error& e) {
            ++errors_;
            res.status = http_status(e.code());
            res.set_content(error_body(e.code(), e.what()).dump(), "application/json");
        } catch (const nlohmann::json::exception& e) {
            ++errors_;
            res.status = 400;
            res.set_content(error_body(ErrorCode::InvalidArgument, e.what()).dump(), "application/json");
        } catch (const std::exception& e) {
            ++errors_;
            res.status = 500;
            res.set_content(nlohmann::json{{"error", "Internal"}, {"message", e.what()}}.dump(), "application/json");
        }
    }

    std::shared_ptr<const Snapshot> require_snapshot(httplib::Response& res) {
        auto s = snapshot();
        if (!s) {
            res.status = 503;
            res.set_content(nlohmann::json{{"status", "loading"}}.dump(), "application/json");
        }
        return s;
    }

    bool is_reviewer(const httplib::Request& req) const {
        return !cfg_.reviewer_token.empty() && req.get_header_value("X-CTL-Reviewer") == cfg_.reviewer_token;
    }

    void routes() {
        server_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
            auto s = require_snapshot(res);
            if (!s) return;
            res.set_content(health_json(*s).dump(), "application/json");
        });

        server_.Get("/v1/complete", [this](const httplib::Request& req, httplib::Response& res) {
            ++complete_requests_;
            auto s = require_snapshot(res);
            if (!s) return;
            guarded(res, [&] {
                const auto r = parse_complete_params(req, s->engine.vocab);
                const auto rec = retrieval::complete_the_look(s->engine, r);
                res.set_content(retrieval::recommendation_to_json(rec, s->engine.vocab).dump(), "application/json");
            });
        });

        server_.Get("/v1/judgment-tasks", [this](const httplib::Request& req, httplib::Response& res) {
            auto s = require_snapshot(res);
            if (!s) return;
            guarded(res, [&] {
                require(req.has_param("rater") && !req.get_param_value("rater").empty(), ErrorCode::InvalidArgument,
                        "rater is required");
                std::size_t limit = 20;
                if (req.has_param("limit")) {
                    const auto text = req.get_param_value("limit");
                    require(!text.empty() && text.find_first_not_of("0123456789") == std::string::npos &&
                                text.size() < 7,
                            ErrorCode::InvalidArgument, "limit must be a non-negative integer");
                    limit = std::stoul(text);
                }
                const auto pending = pending_tasks(s->tasks, store_, req.get_param_value("rater"));
                nlohmann::json tasks = nlohmann::json::array();
                for (std::size_t i = 0; i < pending.size() && i < limit; ++i) tasks.push_back(rater_task_json(*pending[i]));
                res.set_content(nlohmann::json{{"tasks", tasks}, {"remaining", pending.size()}}.dump(),
                                "application/json");
            });
        });

        server_.Post("/v1/judgments", [this](const httplib::Request& req, httplib::Response& res) {
            auto s = require_snapshot(res);
            if (!s) return;
            guarded(res, [&] {
                auto j = nlohmann::json::parse(req.body);
                require(j.is_object(), ErrorCode::InvalidArgument, "judgment must be a JSON object");
                if (!j.contains("timestamp"))
                    j["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                                         std::chrono::system_clock::now().time_since_epoch())
                                         .count();
                const auto rec = eval::record_from_json(j);
                const bool known = std::any_of(s->tasks.begin(), s->tasks.end(),
                                               [&](const eval::JudgmentTask& t) { return t.task_id == rec.task_id; });
                require(known, ErrorCode::NotFound, "unknown task " + rec.task_id);
                store_.append(rec);
                ++judgments_;
                res.status = 201;
                res.set_content(eval::record_to_json(rec).dump(), "application/json");
            });
        });

        server_.Get("/v1/precision", [this](const httplib::Request& req, httplib::Response& res) {
            auto s = require_snapshot(res);
            if (!s) return;
            guarded(res, [&] {
                const bool unblind = is_reviewer(req);
                const auto p = eval::compute_precision(store_.records(), s->tasks, unblind ? &s->key : nullptr);
                res.set_content(nlohmann::json{{"methods", eval::precision_to_json(p)}, {"unblinded", unblind}}.dump(),
                                "application/json");
            });
        });

        server_.Post("/admin/reload", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] {
                reload();
                res.set_content(health_json(*snapshot()).dump(), "application/json");
            });
        });

        server_.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
            std::ostringstream os;
            os << "ctl_complete_requests_total " << complete_requests_.load() << '\n'
               << "ctl_judgments_total " << judgments_.load() << '\n'
               << "ctl_errors_total " << errors_.load() << '\n'
               << "ctl_reloads_total " << reloads_.load() << '\n'
               << "ctl_snapshot_loaded " << (snapshot() ? 1 : 0) << '\n'
               << "ctl_judgment_records " << store_.size() << '\n';
            res.set_content(os.str(), "text/plain; version=0.0.4");
        });

        if (!cfg_.static_dir.empty()) server_.set_mount_point("/", cfg_.static_dir);
    }

    ServiceConfig cfg_;
    JudgmentStore store_;
    httplib::Server server_;
    std::thread thread_;
    mutable std::mutex snap_mu_;
    std::shared_ptr<const Snapshot> snap_;
    std::atomic<std::uint64_t> complete_requests_{0}, judgments_{0}, errors_{0}, reloads_{0};
};

}  // namespace ctl::service
