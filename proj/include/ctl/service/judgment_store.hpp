#pragma once

#include "ctl/eval/judgment.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fstream>
#include <mutex>
#include <set>

namespace ctl::service {

struct JudgmentScan {
    std::vector<eval::JudgmentRecord> records;
    std::uint64_t good_bytes = 0;  // length of the prefix made of complete lines
    std::size_t corrupt = 0;
};

/// Reads complete lines of a judgment file; an unterminated final line is
/// ignored. A missing file scans as empty.
inline JudgmentScan scan_judgments(const std::string& path) {
    JudgmentScan out;
    std::ifstream is(path, std::ios::binary);
    std::string line;
    std::uint64_t offset = 0;
    while (std::getline(is, line)) {
        if (is.eof()) break;
        offset += line.size() + 1;
        out.good_bytes = offset;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.records.push_back(eval::record_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception&) {
            ++out.corrupt;
        }
    }
    return out;
}

/// Append-only JSONL file of judgment records. Each append is written with a
/// single write() and fsync'd before returning. A torn final line left by a
/// crash is ignored on open and overwritten by the next append.
class JudgmentStore {
public:
    explicit JudgmentStore(std::string path) : path_(std::move(path)) {
        auto scan = scan_judgments(path_);
        corrupt_ = scan.corrupt;
        records_ = std::move(scan.records);
        for (const auto& r : records_) keys_.emplace(r.task_id, r.rater);
        const auto good_bytes = scan.good_bytes;
        fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT, 0644);
        require(fd_ >= 0, ErrorCode::Io, "cannot open judgment store " + path_);
        require(::ftruncate(fd_, static_cast<off_t>(good_bytes)) == 0 &&
                    ::lseek(fd_, static_cast<off_t>(good_bytes), SEEK_SET) >= 0,
                ErrorCode::Io, "cannot position judgment store " + path_);
    }

    JudgmentStore(const JudgmentStore&) = delete;
    JudgmentStore& operator=(const JudgmentStore&) = delete;

    ~JudgmentStore() {
        if (fd_ >= 0) ::close(fd_);
    }

    /// Throws Conflict when (task_id, rater) already has a record.
    void append(const eval::JudgmentRecord& r) {
        std::lock_guard lock(mu_);
        require(!keys_.count({r.task_id, r.rater}), ErrorCode::Conflict,
                "task " + r.task_id + " already judged by " + r.rater);
        const auto line = eval::record_to_json(r).dump() + "\n";
        std::size_t done = 0;
        while (done < line.size()) {
            const auto n = ::write(fd_, line.data() + done, line.size() - done);
            require(n > 0, ErrorCode::Io, "write to judgment store failed");
            done += static_cast<std::size_t>(n);
        }
        require(::fsync(fd_) == 0, ErrorCode::Io, "fsync of judgment store failed");
        keys_.emplace(r.task_id, r.rater);
        records_.push_back(r);
    }

    bool contains(const std::string& task_id, const std::string& rater) const {
        std::lock_guard lock(mu_);
        return keys_.count({task_id, rater}) != 0;
    }

    std::vector<eval::JudgmentRecord> records() const {
        std::lock_guard lock(mu_);
        return records_;
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return records_.size();
    }

    std::size_t corrupt_lines() const { return corrupt_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    int fd_ = -1;
    mutable std::mutex mu_;
    std::vector<eval::JudgmentRecord> records_;
    std::set<std::pair<std::string, std::string>> keys_;
    std::size_t corrupt_ = 0;
};

}  // namespace ctl::service
