#include "lvfuse/judge.hpp"

#include <cmath>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "lvfuse/error.hpp"

namespace lvfuse::eval {

using nlohmann::json;

namespace {

JudgeScore checked(const json& v) {
    using Status = JudgeScore::Status;
    if (!v.is_number()) return {std::nullopt, Status::invalid, "score is not a number"};
    const double s = v.get<double>();
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) return {std::nullopt, Status::invalid, "score " + v.dump() + " outside [0, 1]"};
    return {s, Status::ok, ""};
}

}  // namespace

OfflineJudge::OfflineJudge(const std::filesystem::path& scores_file) {
    std::ifstream in(scores_file);
    if (!in) throw FormatError("path", "cannot open scores file: " + scores_file.string());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            std::optional<std::size_t> config;
            if (j.contains("config_id")) config = j.at("config_id").get<std::size_t>();
            const auto ref = j.at("reference_index").get<std::size_t>();
            if (ref >= kReferencesPerQuestion) throw FormatError("reference_index", "must be 0 or 1", n);
            const JudgeScore s = checked(j.at("score"));
            if (!s.value) throw FormatError("score", s.error, n);
            scores_[Key{config, j.at("question_id").get<std::string>(), ref}] = *s.value;
        } catch (const json::exception& e) {
            throw FormatError("", e.what(), n);
        }
    }
}

std::vector<JudgeScore> OfflineJudge::score(const std::vector<JudgeItem>& batch) {
    std::vector<JudgeScore> out;
    out.reserve(batch.size());
    for (const auto& item : batch) {
        auto it = scores_.find(Key{item.config_id, item.question_id, item.reference_index});
        if (it == scores_.end()) it = scores_.find(Key{std::nullopt, item.question_id, item.reference_index});
        if (it == scores_.end()) {
            out.push_back({std::nullopt, JudgeScore::Status::missing, "no score for question " + item.question_id});
        } else {
            out.push_back({it->second, JudgeScore::Status::ok, ""});
        }
    }
    return out;
}

HttpJudge::HttpJudge(std::string url, HttpJudgeOptions options) : options_(options) {
    const std::string scheme = "http://";
    if (url.rfind(scheme, 0) != 0) throw ValidationError("judge endpoint must be an http:// URL: " + url);
    const auto slash = url.find('/', scheme.size());
    host_ = url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
    if (options_.batch_size == 0) options_.batch_size = 1;
}

std::vector<JudgeScore> HttpJudge::score(const std::vector<JudgeItem>& batch) {
    json body;
    body["records"] = json::array();
    for (const auto& item : batch) {
        body["records"].push_back({{"id", std::to_string(item.config_id) + "/" + item.question_id + "/" +
                                              std::to_string(item.reference_index)},
                                   {"question", item.question},
                                   {"answer", item.answer},
                                   {"reference", item.reference}});
    }
    const std::string payload = body.dump();

    httplib::Client client(host_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());

    std::string last_error;
    auto wait = options_.backoff;
    for (std::size_t attempt = 0; attempt <= options_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(wait);
            wait *= 2;
        }
        auto res = client.Post(path_, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) throw NetworkError("judge endpoint answered HTTP " + std::to_string(res->status));

        json reply;
        try {
            reply = json::parse(res->body);
        } catch (const json::parse_error& e) {
            throw NetworkError(std::string("judge reply is not JSON: ") + e.what());
        }
        if (!reply.contains("scores") || !reply["scores"].is_array() || reply["scores"].size() != batch.size()) {
            throw NetworkError("judge reply must carry one score per record");
        }
        std::vector<JudgeScore> out;
        for (const auto& v : reply["scores"]) out.push_back(checked(v));
        return out;
    }
    throw NetworkError("judge endpoint " + host_ + path_ + " unreachable after " +
                       std::to_string(options_.max_retries + 1) + " attempts: " + last_error);
}

ScoreReport score_records(std::vector<EvalRecord>& records, Judge& judge, std::size_t batch_size) {
    struct Slot {
        std::size_t record;
        std::size_t ref;
    };
    std::vector<JudgeItem> items;
    std::vector<Slot> slots;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        for (std::size_t k = 0; k < kReferencesPerQuestion; ++k) {
            items.push_back(JudgeItem{r.config_id, r.question_id, k, r.question, r.answer, r.references[k]});
            slots.push_back({i, k});
        }
    }

    ScoreReport report;
    if (batch_size == 0) batch_size = 1;
    for (std::size_t begin = 0; begin < items.size(); begin += batch_size) {
        const std::size_t end = std::min(items.size(), begin + batch_size);
        const std::vector<JudgeItem> batch(items.begin() + static_cast<std::ptrdiff_t>(begin),
                                           items.begin() + static_cast<std::ptrdiff_t>(end));
        std::vector<JudgeScore> scores;
        try {
            scores = judge.score(batch);
        } catch (const NetworkError&) {
            report.unreachable += items.size() - begin;
            break;
        }
        for (std::size_t k = 0; k < scores.size(); ++k) {
            const Slot& s = slots[begin + k];
            auto& target = records[s.record].judge_scores[s.ref];
            if (scores[k].value) {
                target = scores[k].value;
                ++report.scored;
            } else {
                target.reset();
                if (scores[k].status == JudgeScore::Status::missing) {
                    ++report.missing;
                } else {
                    ++report.invalid;
                }
            }
        }
    }
    return report;
}

}  // namespace lvfuse::eval
