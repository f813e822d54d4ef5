#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "lvfuse/sweep.hpp"

namespace lvfuse::eval {

// One (answer, reference) pair to be scored by the external judge.
struct JudgeItem {
    std::size_t config_id = 0;
    std::string question_id;
    std::size_t reference_index = 0;
    std::string question;
    std::string answer;
    std::string reference;
};

// Score slot per item: a value in [0, 1], or empty with a reason.
struct JudgeScore {
    enum class Status { ok, missing, invalid };

    std::optional<double> value;
    Status status = Status::ok;
    std::string error;
};

class Judge {
public:
    virtual ~Judge() = default;
    virtual std::vector<JudgeScore> score(const std::vector<JudgeItem>& batch) = 0;
};

// Scores read from JSON lines {"question_id": "...", "reference_index": 0,
// "score": 0.7} with an optional "config_id" restricting the entry to one
// configuration. Config-specific entries win over general ones.
class OfflineJudge : public Judge {
public:
    explicit OfflineJudge(const std::filesystem::path& scores_file);

    std::vector<JudgeScore> score(const std::vector<JudgeItem>& batch) override;

private:
    using Key = std::tuple<std::optional<std::size_t>, std::string, std::size_t>;
    std::map<Key, double> scores_;
};

struct HttpJudgeOptions {
    std::chrono::milliseconds timeout{10000};
    std::size_t max_retries = 3;
    std::chrono::milliseconds backoff{200};  // doubled after every failed attempt
    std::size_t batch_size = 32;
};

// POSTs {"records": [{"id", "question", "answer", "reference"}, ...]} to the
// endpoint and expects {"scores": [...]} in the same order. Throws
// NetworkError once every retry of a batch has failed.
class HttpJudge : public Judge {
public:
    explicit HttpJudge(std::string url, HttpJudgeOptions options = {});

    std::vector<JudgeScore> score(const std::vector<JudgeItem>& batch) override;

    std::size_t batch_size() const noexcept { return options_.batch_size; }

private:
    std::string host_;
    std::string path_;
    HttpJudgeOptions options_;
};

struct ScoreReport {
    std::size_t scored = 0;       // reference slots that received a score
    std::size_t missing = 0;      // slots the judge had no score for
    std::size_t invalid = 0;      // slots with a malformed or out-of-range score
    std::size_t unreachable = 0;  // slots left unscored after network failure
};

// Attaches judge scores to every reference slot of `records`, batching
// requests. On a network failure the remaining slots stay unscored and are
// counted as unreachable; scores already attached are kept.
ScoreReport score_records(std::vector<EvalRecord>& records, Judge& judge, std::size_t batch_size = 32);

}  // namespace lvfuse::eval
