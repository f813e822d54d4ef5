#include "lvfuse/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "lvfuse/error.hpp"
#include "lvfuse/rouge.hpp"
#include "lvfuse/tokenizer.hpp"
#include "number_format.hpp"

namespace lvfuse::eval {

using nlohmann::json;

namespace {

const std::vector<WeightPair> kStandardWeightPairs = {
    {0.1f, 0.9f}, {0.3f, 0.7f}, {0.5f, 0.5f}, {0.7f, 0.3f}, {0.9f, 0.1f}};

std::vector<int> layer_range_to_final(int first, int last, std::uint32_t num_layers) {
    // `first..last` are 1-based indices of a 28-block stack; `last` is the final block.
    const int shift = static_cast<int>(num_layers) - last;
    std::vector<int> out;
    for (int l = first; l < last; ++l) {
        if (l + shift >= 1) out.push_back(l + shift);
    }
    out.push_back(-1);
    return out;
}

WeightPair pair_from_json(const json& j, const char* key) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw FormatError(key, "each entry must be a two-element numeric array");
    }
    return WeightPair{j[0].get<float>(), j[1].get<float>()};
}

json config_json(const FusionConfig& c) { return json::parse(dump_fusion_config(c)); }

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("path", "cannot open: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

SweepGrid SweepGrid::standard(std::uint32_t num_layers) {
    if (num_layers == 0) throw PreconditionError("standard grid needs a stack with at least one layer");
    SweepGrid g;
    g.head_weight_pairs = kStandardWeightPairs;
    g.feature_weight_pairs = kStandardWeightPairs;
    g.merge_layer_sets = {{-1}, layer_range_to_final(20, 28, num_layers), layer_range_to_final(25, 28, num_layers)};
    return g;
}

std::size_t SweepGrid::size() const noexcept {
    return head_weight_pairs.size() * feature_weight_pairs.size() * merge_layer_sets.size() * isolate_options.size() *
           sum_all_options.size();
}

SweepGrid parse_sweep_grid(const std::string& text, std::uint32_t num_layers) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError("", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("", "sweep grid must be a JSON object");
    static const std::vector<std::string> known = {"preset",       "head_weights", "feature_weights", "merge_layer_sets",
                                                   "isolate_lvlm", "sum_all",      "merge_mode",      "max_new_tokens",
                                                   "seed"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) throw FormatError(key, "unknown sweep grid key");
    }

    SweepGrid g;
    try {
        if (j.contains("preset")) {
            if (j["preset"] != "standard") throw FormatError("preset", "only the 'standard' preset exists");
            g = SweepGrid::standard(num_layers);
        }
        if (j.contains("head_weights")) {
            g.head_weight_pairs.clear();
            for (const auto& p : j["head_weights"]) g.head_weight_pairs.push_back(pair_from_json(p, "head_weights"));
        }
        if (j.contains("feature_weights")) {
            g.feature_weight_pairs.clear();
            for (const auto& p : j["feature_weights"]) {
                g.feature_weight_pairs.push_back(pair_from_json(p, "feature_weights"));
            }
        }
        if (j.contains("merge_layer_sets")) g.merge_layer_sets = j["merge_layer_sets"].get<std::vector<std::vector<int>>>();
        if (j.contains("isolate_lvlm")) g.isolate_options = j["isolate_lvlm"].get<std::vector<bool>>();
        if (j.contains("sum_all")) g.sum_all_options = j["sum_all"].get<std::vector<bool>>();
        if (j.contains("merge_mode")) g.merge_mode = merge_mode_from_string(j["merge_mode"].get<std::string>());
        if (j.contains("max_new_tokens")) g.max_new_tokens = j["max_new_tokens"].get<std::size_t>();
        if (j.contains("seed")) g.seed = j["seed"].get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw FormatError("", std::string("wrong value type: ") + e.what());
    } catch (const ValidationError& e) {
        throw FormatError("merge_mode", e.what());
    }
    return g;
}

SweepGrid load_sweep_grid(const std::filesystem::path& path, std::uint32_t num_layers) {
    return parse_sweep_grid(slurp(path), num_layers);
}

std::vector<ConfigEntry> enumerate_configs(const SweepGrid& grid) {
    if (grid.size() == 0) throw PreconditionError("sweep grid has an empty axis");
    std::vector<ConfigEntry> out;
    out.reserve(grid.size());
    for (const auto& head : grid.head_weight_pairs) {
        for (const auto& feature : grid.feature_weight_pairs) {
            for (const auto& layers : grid.merge_layer_sets) {
                for (bool isolate : grid.isolate_options) {
                    for (bool sum_all : grid.sum_all_options) {
                        FusionConfig c;
                        c.head_weights = head;
                        c.feature_weights = feature;
                        c.merge_layers = layers;
                        c.isolate_lvlm = isolate;
                        c.sum_all = sum_all;
                        c.merge_mode = grid.merge_mode;
                        c.max_new_tokens = grid.max_new_tokens;
                        c.seed = grid.seed;
                        validate(c);
                        out.push_back(ConfigEntry{out.size(), std::move(c)});
                    }
                }
            }
        }
    }
    return out;
}

std::vector<Question> read_questions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("path", "cannot open questions file: " + path.string());
    std::vector<Question> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            Question q;
            q.id = j.at("id").get<std::string>();
            q.text = j.at("question").get<std::string>();
            const auto refs = j.at("references").get<std::vector<std::string>>();
            if (refs.size() != kReferencesPerQuestion) {
                throw FormatError("references", "exactly two reference answers are required", n);
            }
            std::copy(refs.begin(), refs.end(), q.references.begin());
            if (q.id.empty() || q.text.empty()) throw FormatError("id", "empty question id or text", n);
            for (const auto& prev : out) {
                if (prev.id == q.id) throw FormatError("id", "duplicate question id '" + q.id + "'", n);
            }
            out.push_back(std::move(q));
        } catch (const json::exception& e) {
            throw FormatError("", e.what(), n);
        }
    }
    return out;
}

std::vector<Question> select_subset(const std::vector<Question>& questions, std::size_t n, std::uint64_t seed) {
    if (n >= questions.size()) return questions;
    std::vector<std::size_t> idx(questions.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    // Fisher-Yates with a plain modulo draw; std::shuffle's distribution is
    // implementation-defined and would make samples differ across toolchains.
    std::mt19937_64 gen(seed);
    for (std::size_t i = idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[gen() % (i + 1)]);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    std::vector<Question> out;
    for (std::size_t i : idx) out.push_back(questions[i]);
    return out;
}

std::optional<double> EvalRecord::judge_max() const {
    std::optional<double> best;
    for (const auto& s : judge_scores) {
        if (s && (!best || *s > *best)) best = s;
    }
    return best;
}

JudgeSummary judge_aggregate(const std::vector<EvalRecord>& records) {
    JudgeSummary s;
    double total = 0.0;
    for (const auto& r : records) {
        const auto m = r.judge_max();
        if (!m) {
            ++s.skipped;
            continue;
        }
        total += *m;
        ++s.scored;
    }
    s.mean = s.scored ? total / static_cast<double>(s.scored) : 0.0;
    return s;
}

std::vector<SweepResult> aggregate(const std::vector<EvalRecord>& records) {
    std::map<std::size_t, std::vector<const EvalRecord*>> by_config;
    for (const auto& r : records) by_config[r.config_id].push_back(&r);
    std::vector<SweepResult> out;
    for (const auto& [id, rs] : by_config) {
        SweepResult res;
        res.config_id = id;
        res.config = rs.front()->config;
        res.sample_count = rs.size();
        double rouge = 0.0;
        std::vector<EvalRecord> copy;
        for (const auto* r : rs) {
            rouge += r->rouge;
            if (!r->error.empty()) ++res.failed_count;
            copy.push_back(*r);
        }
        res.mean_rouge = rouge / static_cast<double>(rs.size());
        const auto judge = judge_aggregate(copy);
        res.scored_count = judge.scored;
        if (judge.scored) res.lingo_mean = judge.mean;
        out.push_back(std::move(res));
    }
    return out;
}

std::string record_to_json(const EvalRecord& r) {
    json j;
    j["config_id"] = r.config_id;
    j["config"] = config_json(r.config);
    j["question_id"] = r.question_id;
    j["question"] = r.question;
    j["answer"] = r.answer;
    j["references"] = r.references;
    j["rouge"] = r.rouge;
    json scores = json::array();
    for (const auto& s : r.judge_scores) scores.push_back(s ? json(*s) : json(nullptr));
    j["judge_scores"] = scores;
    j["error"] = r.error;
    return j.dump();
}

namespace {

EvalRecord record_from_object(const json& j, std::size_t line_no) {
    try {
        EvalRecord r;
        r.config_id = j.at("config_id").get<std::size_t>();
        r.config = parse_fusion_config(j.at("config").dump());
        r.question_id = j.at("question_id").get<std::string>();
        r.question = j.at("question").get<std::string>();
        r.answer = j.at("answer").get<std::string>();
        const auto refs = j.at("references").get<std::vector<std::string>>();
        if (refs.size() != kReferencesPerQuestion) throw FormatError("references", "expected two references", line_no);
        std::copy(refs.begin(), refs.end(), r.references.begin());
        r.rouge = j.at("rouge").get<double>();
        const auto& scores = j.at("judge_scores");
        if (!scores.is_array() || scores.size() != kReferencesPerQuestion) {
            throw FormatError("judge_scores", "expected two entries (number or null)", line_no);
        }
        for (std::size_t i = 0; i < kReferencesPerQuestion; ++i) {
            if (!scores[i].is_null()) r.judge_scores[i] = scores[i].get<double>();
        }
        r.error = j.value("error", "");
        return r;
    } catch (const json::exception& e) {
        throw FormatError("", std::string("malformed record: ") + e.what(), line_no);
    }
}

}  // namespace

EvalRecord record_from_json(const std::string& line, std::size_t line_no) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw FormatError("", std::string("invalid JSON: ") + e.what(), line_no);
    }
    return record_from_object(j, line_no);
}

void write_records(const std::vector<EvalRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("path", "cannot open for writing: " + path.string());
    for (const auto& r : records) out << record_to_json(r) << '\n';
}

std::vector<EvalRecord> read_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("path", "cannot open records file: " + path.string());
    std::vector<EvalRecord> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(record_from_json(line, n));
    }
    return out;
}

EvalRecord evaluate_cell(const ConfigEntry& entry, const Question& question, const SweepInputs& inputs) {
    EvalRecord r;
    r.config_id = entry.id;
    r.config = entry.config;
    r.question_id = question.id;
    r.question = question.text;
    r.references = question.references;
    try {
        const ByteTokenizer llm_tok(inputs.llm->vocab_size());
        const ByteTokenizer lvlm_tok(inputs.lvlm->vocab_size());
        const ByteTokenizer shared_tok(align_vocab(inputs.llm->vocab_size(), inputs.lvlm->vocab_size()).shared_size);
        auto it = inputs.llm_prompts.find(question.id);
        const std::string& llm_text = it != inputs.llm_prompts.end() ? it->second : question.text;
        const auto result = fused_decode(*inputs.llm, *inputs.lvlm, llm_tok.encode(llm_text),
                                         lvlm_tok.encode(question.text), entry.config, shared_tok.end_token());
        r.answer = shared_tok.decode(result.tokens);
        r.rouge = rouge_l(r.answer, {question.references.begin(), question.references.end()});
    } catch (const Error& e) {
        r.error = e.what();
        r.answer.clear();
        r.rouge = 0.0;
    }
    return r;
}

namespace {

// Journal line: {"config_id": k, "records": [...]}. A torn final line from an
// interrupted write is ignored.
std::map<std::size_t, std::vector<EvalRecord>> read_journal(const std::filesystem::path& path) {
    std::map<std::size_t, std::vector<EvalRecord>> done;
    std::ifstream in(path);
    if (!in) return done;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            continue;
        }
        std::vector<EvalRecord> records;
        for (const auto& r : j.at("records")) records.push_back(record_from_object(r, n));
        done[j.at("config_id").get<std::size_t>()] = std::move(records);
    }
    return done;
}

}  // namespace

SweepOutcome run_sweep(const std::vector<ConfigEntry>& configs, const SweepInputs& inputs, const SweepOptions& options) {
    if (!inputs.llm || !inputs.lvlm) throw PreconditionError("run_sweep needs both stacks");
    if (inputs.questions.empty()) throw PreconditionError("run_sweep needs at least one question");
    require_compatible(*inputs.llm, *inputs.lvlm);

    std::vector<std::optional<std::vector<EvalRecord>>> slots(configs.size());
    SweepOutcome outcome;
    if (options.checkpoint) {
        auto done = read_journal(*options.checkpoint);
        for (std::size_t i = 0; i < configs.size(); ++i) {
            auto it = done.find(configs[i].id);
            if (it == done.end()) continue;
            for (const auto& r : it->second) {
                if (!(r.config == configs[i].config)) {
                    throw ValidationError("checkpoint config " + std::to_string(configs[i].id) +
                                          " does not match the current grid");
                }
            }
            slots[i] = std::move(it->second);
            ++outcome.resumed_configs;
        }
    }

    std::ofstream journal;
    if (options.checkpoint) {
        journal.open(*options.checkpoint, std::ios::app);
        if (!journal) throw FormatError("path", "cannot open checkpoint: " + options.checkpoint->string());
    }
    std::mutex journal_mutex;

    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (!slots[i]) pending.push_back(i);
    }
    const std::size_t budget = std::min(pending.size(), options.stop_after.value_or(pending.size()));
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= budget) return;
            const std::size_t i = pending[k];
            std::vector<EvalRecord> records;
            records.reserve(inputs.questions.size());
            for (const auto& q : inputs.questions) records.push_back(evaluate_cell(configs[i], q, inputs));
            if (journal.is_open()) {
                json line;
                line["config_id"] = configs[i].id;
                line["records"] = json::array();
                for (const auto& r : records) line["records"].push_back(json::parse(record_to_json(r)));
                std::lock_guard lock(journal_mutex);
                journal << line.dump() << '\n';
                journal.flush();
            }
            slots[i] = std::move(records);
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, budget));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    outcome.complete = true;
    for (auto& s : slots) {
        if (!s) {
            outcome.complete = false;
            continue;
        }
        for (auto& r : *s) outcome.records.push_back(std::move(r));
    }
    std::stable_sort(outcome.records.begin(), outcome.records.end(),
                     [](const EvalRecord& a, const EvalRecord& b) { return a.config_id < b.config_id; });
    outcome.results = aggregate(outcome.records);
    return outcome;
}

}  // namespace lvfuse::eval
