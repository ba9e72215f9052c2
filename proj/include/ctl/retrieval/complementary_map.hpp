#pragma once

#include "ctl/data/types.hpp"

#include <fstream>
#include <sstream>

namespace ctl::retrieval {

/// Category -> ordered complementary categories. A category never maps to itself.
class ComplementaryMap {
public:
    /// Every category maps to all others, in vocabulary order.
    static ComplementaryMap defaults(const data::CategoryVocab& vocab) {
        ComplementaryMap m;
        for (std::size_t a = 0; a < vocab.size(); ++a) {
            auto& row = m.rows_[static_cast<data::CategoryId>(a)];
            for (std::size_t b = 0; b < vocab.size(); ++b)
                if (a != b) row.push_back(static_cast<data::CategoryId>(b));
        }
        return m;
    }

    /// Applies "category: c1, c2, ..." lines over `base`. Blank lines and
    /// lines starting with '#' are ignored.
    static ComplementaryMap parse(std::istream& is, const data::CategoryVocab& vocab, ComplementaryMap base = {}) {
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#') continue;
            const auto colon = line.find(':');
            require(colon != std::string::npos, ErrorCode::ParseError,
                    "complementary map line " + std::to_string(lineno) + ": missing ':'");
            const auto key = lookup(vocab, line.substr(0, colon), lineno);
            std::vector<data::CategoryId> row;
            std::stringstream ss(line.substr(colon + 1));
            for (std::string tok; std::getline(ss, tok, ',');) {
                if (data::CategoryVocab::normalize(tok).empty()) continue;
                const auto c = lookup(vocab, tok, lineno);
                require(c != key, ErrorCode::ParseError,
                        "complementary map line " + std::to_string(lineno) + ": category maps to itself");
                if (std::find(row.begin(), row.end(), c) == row.end()) row.push_back(c);
            }
            base.rows_[key] = std::move(row);
        }
        return base;
    }

    static ComplementaryMap load(const std::string& path, const data::CategoryVocab& vocab) {
        std::ifstream is(path);
        require(bool(is), ErrorCode::Io, "cannot open " + path);
        return parse(is, vocab, defaults(vocab));
    }

    /// Complementary categories of `c`, or nullptr when `c` has no entry.
    const std::vector<data::CategoryId>* find(data::CategoryId c) const {
        const auto it = rows_.find(c);
        return it == rows_.end() ? nullptr : &it->second;
    }

    void set(data::CategoryId key, std::vector<data::CategoryId> row) {
        require(std::find(row.begin(), row.end(), key) == row.end(), ErrorCode::InvalidArgument,
                "category maps to itself");
        rows_[key] = std::move(row);
    }

    std::string to_text(const data::CategoryVocab& vocab) const {
        std::ostringstream os;
        for (const auto& [k, row] : rows_) {
            os << vocab.name(k) << ':';
            for (std::size_t i = 0; i < row.size(); ++i) os << (i ? ", " : " ") << vocab.name(row[i]);
            os << '\n';
        }
        return os.str();
    }

private:
    static data::CategoryId lookup(const data::CategoryVocab& vocab, const std::string& name, std::size_t lineno) {
        const auto c = vocab.find(name);
        require(c.has_value(), ErrorCode::ParseError,
                "complementary map line " + std::to_string(lineno) + ": unknown category '" + name + "'");
        return *c;
    }

    std::map<data::CategoryId, std::vector<data::CategoryId>> rows_;
};

}  // namespace ctl::retrieval
