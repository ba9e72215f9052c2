#pragma once

#include "ctl/common.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace ctl::service {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string checkpoint;
    std::string index;
    std::string features;
    std::string catalog;
    std::string complementary_map;  // empty = every other category
    std::string judgment_store = "judgments.jsonl";
    std::string tasks;      // exported judgment tasks (JSONL); optional
    std::string tasks_key;  // blinding key (JSON tag -> method); optional
    std::string static_dir;
    std::string reviewer_token;
    std::size_t k_per_category = 10;
    std::size_t k_final = 30;
    std::size_t probes = 0;
    double product_shot_threshold = 0.9;
    std::size_t threads = 8;

    static const std::vector<std::string>& keys() {
        static const std::vector<std::string> k = {
            "host", "port", "checkpoint", "index", "features", "catalog", "complementary_map", "judgment_store",
            "tasks", "tasks_key", "static_dir", "reviewer_token", "k_per_category", "k_final", "probes",
            "product_shot_threshold", "threads"};
        return k;
    }

    void set(const std::string& key, const std::string& value) {
        auto to_size = [&](std::size_t& out) {
            try {
                std::size_t used = 0;
                const auto v = std::stoll(value, &used);
                require(used == value.size() && v >= 0, ErrorCode::InvalidArgument, "");
                out = static_cast<std::size_t>(v);
            } catch (const std::exception&) {
                throw Error(ErrorCode::InvalidArgument, "config " + key + ": expected a non-negative integer, got '" +
                                                            value + "'");
            }
        };
        if (key == "host") host = value;
        else if (key == "port") {
            std::size_t p = 0;
            to_size(p);
            require(p <= 65535, ErrorCode::InvalidArgument, "config port out of range");
            port = static_cast<int>(p);
        } else if (key == "checkpoint") checkpoint = value;
        else if (key == "index") index = value;
        else if (key == "features") features = value;
        else if (key == "catalog") catalog = value;
        else if (key == "complementary_map") complementary_map = value;
        else if (key == "judgment_store") judgment_store = value;
        else if (key == "tasks") tasks = value;
        else if (key == "tasks_key") tasks_key = value;
        else if (key == "static_dir") static_dir = value;
        else if (key == "reviewer_token") reviewer_token = value;
        else if (key == "k_per_category") to_size(k_per_category);
        else if (key == "k_final") to_size(k_final);
        else if (key == "probes") to_size(probes);
        else if (key == "threads") to_size(threads);
        else if (key == "product_shot_threshold") {
            try {
                std::size_t used = 0;
                product_shot_threshold = std::stod(value, &used);
                require(used == value.size(), ErrorCode::InvalidArgument, "");
            } catch (const std::exception&) {
                throw Error(ErrorCode::InvalidArgument, "config product_shot_threshold: bad number '" + value + "'");
            }
        } else {
            throw Error(ErrorCode::InvalidArgument, "unknown config key: " + key);
        }
    }

    /// "key = value" lines; '#' starts a comment line.
    static ServiceConfig parse(std::istream& is) { return parse(is, ServiceConfig{}); }

    static ServiceConfig parse(std::istream& is, ServiceConfig base) {
        std::string line;
        std::size_t lineno = 0;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string{};
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        while (std::getline(is, line)) {
            ++lineno;
            line = trim(line);
            if (line.empty() || line[0] == '#') continue;
            const auto eq = line.find('=');
            require(eq != std::string::npos, ErrorCode::ParseError,
                    "config line " + std::to_string(lineno) + ": expected key = value");
            base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        return base;
    }

    static ServiceConfig load(const std::string& path) {
        std::ifstream is(path);
        require(bool(is), ErrorCode::Io, "cannot open " + path);
        return parse(is);
    }

    /// CTL_<KEY> environment variables override file values.
    void apply_env(const std::map<std::string, std::string>* env = nullptr) {
        for (const auto& k : keys()) {
            std::string name = "CTL_";
            for (char c : k) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
            if (env) {
                const auto it = env->find(name);
                if (it != env->end()) set(k, it->second);
            } else if (const char* v = std::getenv(name.c_str())) {
                set(k, v);
            }
        }
    }

    void validate() const {
        require(k_per_category >= 1 && k_final >= 1, ErrorCode::InvalidArgument, "k defaults must be at least 1");
        require(product_shot_threshold >= 0 && product_shot_threshold <= 1, ErrorCode::InvalidArgument,
                "product_shot_threshold must lie in [0,1]");
        require(threads >= 1, ErrorCode::InvalidArgument, "threads must be at least 1");
        auto must_exist = [](const char* what, const std::string& p, bool required) {
            if (p.empty()) {
                require(!required, ErrorCode::InvalidArgument, std::string("config ") + what + " is required");
                return;
            }
            require(std::filesystem::exists(p), ErrorCode::NotFound, std::string("config ") + what + ": " + p +
                                                                         " does not exist");
        };
        must_exist("checkpoint", checkpoint, true);
        must_exist("index", index, true);
        must_exist("features", features, true);
        must_exist("catalog", catalog, true);
        must_exist("complementary_map", complementary_map, false);
        must_exist("tasks", tasks, false);
        must_exist("tasks_key", tasks_key, false);
        must_exist("static_dir", static_dir, false);
        const auto parent = std::filesystem::path(judgment_store).parent_path();
        require(parent.empty() || std::filesystem::is_directory(parent), ErrorCode::NotFound,
                "config judgment_store directory does not exist: " + parent.string());
    }
};

}  // namespace ctl::service
