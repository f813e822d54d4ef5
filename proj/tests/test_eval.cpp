#include <algorithm>
#include <random>
#include <set>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include "lvfuse/error.hpp"
#include "lvfuse/judge.hpp"
#include "lvfuse/report.hpp"
#include "lvfuse/rouge.hpp"
#include "lvfuse/sweep.hpp"
#include "test_support.hpp"

using namespace lvfuse;
using namespace lvfuse::eval;
using lvfuse::testing::temp_dir;
using lvfuse::testing::write_file;

namespace {

// Longest common subsequence by enumerating every subsequence of the shorter
// sequence and testing whether it embeds in the longer one.
std::size_t brute_force_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const auto& s = a.size() <= b.size() ? a : b;
    const auto& t = a.size() <= b.size() ? b : a;
    std::size_t best = 0;
    for (std::uint32_t mask = 0; mask < (1u << s.size()); ++mask) {
        const auto bits = static_cast<std::size_t>(__builtin_popcount(mask));
        if (bits <= best) continue;
        std::size_t j = 0;
        bool ok = true;
        for (std::size_t i = 0; i < s.size() && ok; ++i) {
            if (!(mask & (1u << i))) continue;
            while (j < t.size() && t[j] != s[i]) ++j;
            if (j == t.size()) ok = false;
            else ++j;
        }
        if (ok) best = bits;
    }
    return best;
}

double oracle_f(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    const double l = static_cast<double>(brute_force_lcs(cand, ref));
    if (l == 0) return 0.0;
    const double p = l / cand.size(), r = l / ref.size(), b2 = 1.2 * 1.2;
    return (1 + b2) * p * r / (r + b2 * p);
}

std::vector<std::string> random_words(std::mt19937_64& gen, std::size_t max_len) {
    static const std::vector<std::string> vocab{"the", "car", "stops", "light", "is", "red", "green", "a", "pedestrian"};
    std::vector<std::string> out(1 + gen() % max_len);
    for (auto& w : out) w = vocab[gen() % vocab.size()];
    return out;
}

std::string join(const std::vector<std::string>& words) {
    std::string s;
    for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
    return s;
}

EvalRecord scored_record(std::size_t config_id, std::optional<double> a, std::optional<double> b) {
    EvalRecord r;
    r.config_id = config_id;
    r.question_id = "q" + std::to_string(config_id);
    r.judge_scores = {a, b};
    return r;
}

std::vector<Question> synthetic_questions(std::size_t n) {
    std::vector<Question> qs;
    for (std::size_t i = 0; i < n; ++i) {
        qs.push_back({"q" + std::to_string(i), "Question number " + std::to_string(i) + "?",
                      {"answer " + std::to_string(i), "the reply is " + std::to_string(i * 7)}});
    }
    return qs;
}

SweepGrid small_grid() {
    SweepGrid g;
    g.head_weight_pairs = {{0.5f, 0.5f}, {0.9f, 0.1f}};
    g.feature_weight_pairs = {{0.1f, 0.9f}, {0.5f, 0.5f}, {0.9f, 0.1f}};
    g.merge_layer_sets = {{-1}};
    g.isolate_options = {false};
    g.sum_all_options = {false};
    g.max_new_tokens = 4;
    return g;
}

}  // namespace

TEST(Rouge, Tokens) {
    EXPECT_EQ(rouge_tokens("The car, STOPPED!  at\tthe light."),
              (std::vector<std::string>{"the", "car", "stopped", "at", "the", "light"}));
    EXPECT_TRUE(rouge_tokens(" ... ").empty());
}

TEST(Rouge, MatchesBruteForceOracle) {
    std::mt19937_64 gen(6);
    for (int i = 0; i < 50; ++i) {
        const auto a = random_words(gen, 10), b = random_words(gen, 12);
        EXPECT_EQ(lcs_length(a, b), brute_force_lcs(a, b));
        EXPECT_NEAR(rouge_l_tokens(a, b), oracle_f(a, b), 1e-9);
        EXPECT_NEAR(rouge_l(join(a), {join(b)}), oracle_f(a, b), 1e-9);
    }
}

TEST(Rouge, ExactMatchScoresOne) {
    std::mt19937_64 gen(7);
    for (int i = 0; i < 10; ++i) {
        const auto a = join(random_words(gen, 15));
        EXPECT_EQ(rouge_l(a, {a}), 1.0);
    }
}

TEST(Rouge, EdgeCases) {
    EXPECT_EQ(rouge_l("", {"a b"}), 0.0);
    EXPECT_EQ(rouge_l("a b", {""}), 0.0);
    EXPECT_EQ(rouge_l("x y", {"a b"}), 0.0);
    EXPECT_EQ(rouge_l("a b", {"c", "a b"}), 1.0);
    // LCS 2, P = 2/3, R = 1: F = 2.44 * (2/3) / (1 + 1.44 * 2/3).
    EXPECT_NEAR(rouge_l("a b c", {"a c"}), 2.44 * (2.0 / 3.0) / (1 + 1.44 * 2.0 / 3.0), 1e-12);
}

TEST(JudgeAggregate, MaxOfTwoThenMean) {
    const std::vector<std::pair<double, double>> scores = {{0.2, 0.9}, {0.5, 0.5}, {1.0, 0.0}, {0.0, 0.0}, {0.3, 0.4},
                                                           {0.75, 0.25}, {0.6, 0.61}, {0.1, 0.05}, {0.8, 0.9}, {0.45, 0.15}};
    std::vector<EvalRecord> records;
    for (std::size_t i = 0; i < scores.size(); ++i) records.push_back(scored_record(i, scores[i].first, scores[i].second));
    const double expected = (0.9 + 0.5 + 1.0 + 0.0 + 0.4 + 0.75 + 0.61 + 0.1 + 0.9 + 0.45) / 10.0;
    const auto s = judge_aggregate(records);
    EXPECT_EQ(s.mean, expected);
    EXPECT_EQ(s.scored, 10u);
    EXPECT_EQ(s.skipped, 0u);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        EXPECT_EQ(*records[i].judge_max(), std::max(scores[i].first, scores[i].second));
    }
}

TEST(JudgeAggregate, UnscoredRecordsAreSkipped) {
    const auto s = judge_aggregate({scored_record(0, 0.4, std::nullopt), scored_record(1, std::nullopt, std::nullopt),
                                    scored_record(2, std::nullopt, 0.8)});
    EXPECT_DOUBLE_EQ(s.mean, 0.6);
    EXPECT_EQ(s.scored, 2u);
    EXPECT_EQ(s.skipped, 1u);
    EXPECT_EQ(judge_aggregate({}).scored, 0u);
}

TEST(Grid, StandardGridHas300UniqueConfigs) {
    const auto configs = enumerate_configs(SweepGrid::standard());
    ASSERT_EQ(configs.size(), 300u);
    std::set<std::string> seen;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        EXPECT_EQ(configs[i].id, i);
        seen.insert(dump_fusion_config(configs[i].config));
    }
    EXPECT_EQ(seen.size(), 300u);

    const auto last4 = std::vector<int>{25, 26, 27, -1};
    auto count = [&](WeightPair h, WeightPair f, const std::vector<int>& layers, bool iso, bool sum) {
        return std::count_if(configs.begin(), configs.end(), [&](const ConfigEntry& e) {
            const auto& c = e.config;
            return c.head_weights == h && c.feature_weights == f && c.merge_layers == layers && c.isolate_lvlm == iso &&
                   c.sum_all == sum;
        });
    };
    EXPECT_EQ(count({0.5f, 0.5f}, {0.9f, 0.1f}, last4, false, true), 1);
    EXPECT_EQ(count({0.9f, 0.1f}, {0.9f, 0.1f}, last4, true, true), 1);
    EXPECT_EQ(count({0.1f, 0.9f}, {0.3f, 0.7f}, last4, true, false), 1);
    EXPECT_EQ(count({0.1f, 0.9f}, {0.3f, 0.7f}, {20, 21, 22, 23, 24, 25, 26, 27, -1}, true, false), 1);
    EXPECT_EQ(count({0.1f, 0.9f}, {0.3f, 0.7f}, {-1}, true, false), 1);
}

TEST(Grid, EnumerationIsDeterministicAndOrdered) {
    const auto a = enumerate_configs(SweepGrid::standard());
    const auto b = enumerate_configs(SweepGrid::standard());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].config, b[i].config);
    // Last axis varies fastest.
    EXPECT_FALSE(a[0].config.sum_all);
    EXPECT_TRUE(a[1].config.sum_all);
    EXPECT_TRUE(a[2].config.isolate_lvlm);
}

TEST(Grid, SingletonAndEmptyAxes) {
    SweepGrid g = small_grid();
    g.head_weight_pairs = {{1, 0}};
    g.feature_weight_pairs = {{1, 0}};
    EXPECT_EQ(enumerate_configs(g).size(), 1u);
    g.merge_layer_sets = {};
    EXPECT_THROW(enumerate_configs(g), PreconditionError);
}

TEST(Grid, ShallowStacksShiftLayerSets) {
    const auto g = SweepGrid::standard(12);
    ASSERT_EQ(g.merge_layer_sets.size(), 3u);
    EXPECT_EQ(g.merge_layer_sets[0], (std::vector<int>{-1}));
    EXPECT_EQ(g.merge_layer_sets[1], (std::vector<int>{4, 5, 6, 7, 8, 9, 10, 11, -1}));
    EXPECT_EQ(g.merge_layer_sets[2], (std::vector<int>{9, 10, 11, -1}));
    EXPECT_EQ(SweepGrid::standard(4).merge_layer_sets[1], (std::vector<int>{1, 2, 3, -1}));
}

TEST(Grid, FileParsing) {
    const auto g = parse_sweep_grid(R"({"preset": "standard", "max_new_tokens": 8})", 28);
    EXPECT_EQ(g.size(), 300u);
    EXPECT_EQ(g.max_new_tokens, 8u);
    const auto h = parse_sweep_grid(R"({"head_weights": [[1, 0]], "feature_weights": [[0.5, 0.5]],
        "merge_layer_sets": [[-1], []], "isolate_lvlm": [false], "sum_all": [false, true]})", 4);
    EXPECT_EQ(h.size(), 4u);
    EXPECT_THROW(parse_sweep_grid(R"({"heads": []})", 4), FormatError);
    EXPECT_THROW(parse_sweep_grid(R"({"preset": "other"})", 4), FormatError);
}

TEST(Questions, SubsetIsSeededAndOrdered) {
    const auto qs = synthetic_questions(1000);
    const auto a = select_subset(qs, 200, 42);
    const auto b = select_subset(qs, 200, 42);
    ASSERT_EQ(a.size(), 200u);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, b[i].id);
    for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LT(std::stoi(a[i - 1].id.substr(1)), std::stoi(a[i].id.substr(1)));
    const auto c = select_subset(qs, 200, 43);
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i) same += a[i].id == c[i].id;
    EXPECT_LT(same, 200u);
    EXPECT_EQ(select_subset(qs, 5000, 1).size(), 1000u);
}

TEST(Questions, FileErrors) {
    const auto dir = temp_dir("questions");
    write_file(dir / "q.jsonl", R"({"id": "a", "question": "Q?", "references": ["x", "y"]})"
                                "\n"
                                R"({"id": "b", "question": "Q?", "references": ["x"]})"
                                "\n");
    try {
        read_questions(dir / "q.jsonl");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Sweep, SixCellsGiveSixRecords) {
    const auto llm = seed_init(lvfuse::testing::toy_dims(2, 16, 258), 1);
    const auto lvlm = seed_init(lvfuse::testing::toy_dims(2, 16, 258), 2);
    SweepInputs in{&llm, &lvlm, synthetic_questions(1), {}};
    const auto out = run_sweep(enumerate_configs(small_grid()), in);
    EXPECT_TRUE(out.complete);
    ASSERT_EQ(out.records.size(), 6u);
    ASSERT_EQ(out.results.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(out.records[i].config_id, i);
        EXPECT_TRUE(out.records[i].error.empty());
        EXPECT_EQ(out.records[i].rouge, rouge_l(out.records[i].answer, {out.records[i].references.begin(),
                                                                         out.records[i].references.end()}));
    }
}

TEST(Sweep, ResumeAndWorkersAreBitIdentical) {
    const auto llm = seed_init(lvfuse::testing::toy_dims(2, 16, 258), 1);
    const auto lvlm = seed_init(lvfuse::testing::toy_dims(2, 16, 258), 2);
    SweepInputs in{&llm, &lvlm, synthetic_questions(3), {{"q1", "Scene: a red light ahead."}}};
    const auto configs = enumerate_configs(small_grid());
    const auto reference = run_sweep(configs, in);
    const std::string csv = results_csv(reference.results);

    const auto dir = temp_dir("sweep_resume");
    SweepOptions opts;
    opts.checkpoint = dir / "journal.jsonl";
    opts.stop_after = 2;
    const auto partial = run_sweep(configs, in, opts);
    EXPECT_FALSE(partial.complete);
    {
        std::ofstream torn(*opts.checkpoint, std::ios::app);
        torn << "{\"config_id\": 5, \"records\": [{\"conf";
    }
    opts.stop_after.reset();
    opts.workers = 3;
    const auto resumed = run_sweep(configs, in, opts);
    EXPECT_TRUE(resumed.complete);
    EXPECT_EQ(resumed.resumed_configs, 2u);
    EXPECT_EQ(results_csv(resumed.results), csv);
    ASSERT_EQ(resumed.records.size(), reference.records.size());
    for (std::size_t i = 0; i < resumed.records.size(); ++i) {
        EXPECT_EQ(record_to_json(resumed.records[i]), record_to_json(reference.records[i]));
    }
}

TEST(Sweep, JournalFromDifferentGridIsRejected) {
    const auto llm = seed_init(lvfuse::testing::toy_dims(2, 16, 258), 1);
    SweepInputs in{&llm, &llm, synthetic_questions(1), {}};
    const auto dir = temp_dir("sweep_mismatch");
    SweepOptions opts;
    opts.checkpoint = dir / "journal.jsonl";
    run_sweep(enumerate_configs(small_grid()), in, opts);
    auto other = small_grid();
    other.head_weight_pairs = {{0.3f, 0.7f}};
    EXPECT_THROW(run_sweep(enumerate_configs(other), in, opts), ValidationError);
}

TEST(Sweep, DecodeFailuresAreRecorded) {
    const auto llm = seed_init(lvfuse::testing::toy_dims(2, 16, 258), 1);
    const auto small = seed_init(lvfuse::testing::toy_dims(2, 16, 64), 1);
    SweepInputs in{&llm, &small, synthetic_questions(2), {}};
    const auto out = run_sweep(enumerate_configs(small_grid()), in);
    for (const auto& r : out.records) EXPECT_FALSE(r.error.empty());
    EXPECT_EQ(out.results[0].failed_count, 2u);
    EXPECT_EQ(out.results[0].mean_rouge, 0.0);
}

TEST(Records, JsonRoundTrip) {
    EvalRecord r = scored_record(4, 0.25, std::nullopt);
    r.config.merge_layers = {2, -1};
    r.answer = "tab\there \"quoted\"";
    r.references = {"x", "y"};
    r.rouge = 0.123456789012345;
    const auto back = record_from_json(record_to_json(r));
    EXPECT_EQ(record_to_json(back), record_to_json(r));
    EXPECT_EQ(back.rouge, r.rouge);
    EXPECT_EQ(back.judge_scores[0], 0.25);
    EXPECT_FALSE(back.judge_scores[1]);
}

TEST(Report, MarginalsMatchHandComputation) {
    auto make = [](std::size_t id, WeightPair head, bool sum, double rouge, std::optional<double> judge) {
        EvalRecord r = scored_record(id, judge, std::nullopt);
        r.config.head_weights = head;
        r.config.sum_all = sum;
        r.rouge = rouge;
        return r;
    };
    // Four configs, two records each.
    const std::vector<EvalRecord> records = {
        make(0, {0.5f, 0.5f}, false, 0.2, 0.5), make(0, {0.5f, 0.5f}, false, 0.4, std::nullopt),
        make(1, {0.5f, 0.5f}, true, 0.6, 1.0),  make(1, {0.5f, 0.5f}, true, 0.0, 0.0),
        make(2, {0.9f, 0.1f}, false, 1.0, 0.25), make(2, {0.9f, 0.1f}, false, 0.5, 0.75),
        make(3, {0.9f, 0.1f}, true, 0.3, std::nullopt), make(3, {0.9f, 0.1f}, true, 0.1, std::nullopt),
    };
    const auto tables = compute_marginals(records);
    ASSERT_EQ(tables.size(), 5u);
    const auto& head = tables[0];
    EXPECT_EQ(head.parameter, "head_weights");
    ASSERT_EQ(head.rows.size(), 2u);
    EXPECT_EQ(head.rows[0].value, "[0.5, 0.5]");
    EXPECT_EQ(head.rows[0].configs, 2u);
    EXPECT_EQ(head.rows[0].records, 4u);
    EXPECT_DOUBLE_EQ(head.rows[0].mean_rouge, (0.2 + 0.4 + 0.6 + 0.0) / 4);
    EXPECT_EQ(head.rows[0].scored, 3u);
    EXPECT_DOUBLE_EQ(*head.rows[0].mean_lingo, 0.5);
    EXPECT_DOUBLE_EQ(head.rows[1].mean_rouge, (1.0 + 0.5 + 0.3 + 0.1) / 4);
    EXPECT_DOUBLE_EQ(*head.rows[1].mean_lingo, 0.5);

    const auto& sum = tables[4];
    EXPECT_EQ(sum.parameter, "sum_all");
    EXPECT_EQ(sum.rows[0].value, "false");
    EXPECT_DOUBLE_EQ(sum.rows[0].mean_rouge, (0.2 + 0.4 + 1.0 + 0.5) / 4);
    EXPECT_DOUBLE_EQ(*sum.rows[0].mean_lingo, (0.5 + 0.25 + 0.75) / 3);
    EXPECT_DOUBLE_EQ(sum.rows[1].mean_rouge, (0.6 + 0.0 + 0.3 + 0.1) / 4);

    // Each marginal is the record-weighted mean of per-config means.
    const auto results = aggregate(records);
    for (const auto& t : tables) {
        for (const auto& row : t.rows) {
            double weighted = 0;
            std::size_t n = 0;
            for (const auto& res : results) {
                const auto& c = res.config;
                const std::string v = t.parameter == "head_weights"      ? format_pair(c.head_weights)
                                      : t.parameter == "feature_weights" ? format_pair(c.feature_weights)
                                      : t.parameter == "merge_layers"    ? format_layers(c.merge_layers)
                                      : t.parameter == "isolate_lvlm"    ? (c.isolate_lvlm ? "true" : "false")
                                                                         : (c.sum_all ? "true" : "false");
                if (v != row.value) continue;
                weighted += res.mean_rouge * res.sample_count;
                n += res.sample_count;
            }
            EXPECT_NEAR(row.mean_rouge, weighted / n, 1e-12) << t.parameter << " " << row.value;
        }
    }
}

TEST(Report, CsvShape) {
    EvalRecord r = scored_record(0, 0.5, 0.25);
    r.rouge = 1.0 / 3.0;
    r.config.merge_layers = {25, 26, 27, -1};
    r.config.head_weights = {0.9f, 0.1f};
    const auto csv = results_csv(aggregate({r}));
    EXPECT_EQ(csv,
              "config_id,head_weights,feature_weights,merge_layers,isolate_lvlm,sum_all,merge_mode,samples,failed,"
              "rouge_l_f_beta1.2,lingo_mean,scored\n"
              "0,\"[0.9, 0.1]\",\"[0.5, 0.5]\",\"[25, 26, 27, -1]\",false,false,pairwise,1,0,0.333333,0.500000,1\n");
    const auto dir = temp_dir("report");
    EXPECT_EQ(write_report({r}, dir).size(), 6u);
    EXPECT_TRUE(std::filesystem::exists(dir / "marginal_merge_layers.csv"));
}

TEST(OfflineJudge, ConstantScores) {
    const auto dir = temp_dir("offline_judge");
    std::vector<EvalRecord> records;
    std::string lines;
    for (int i = 0; i < 4; ++i) {
        records.push_back(scored_record(static_cast<std::size_t>(i), std::nullopt, std::nullopt));
        for (int k = 0; k < 2; ++k) {
            lines += R"({"question_id": "q)" + std::to_string(i) + R"(", "reference_index": )" + std::to_string(k) +
                     R"(, "score": 0.5})" "\n";
        }
    }
    lines += R"({"question_id": "q1", "reference_index": 1, "score": 0.9, "config_id": 1})" "\n";
    write_file(dir / "s.jsonl", lines);
    OfflineJudge judge(dir / "s.jsonl");
    const auto rep = score_records(records, judge, 3);
    EXPECT_EQ(rep.scored, 8u);
    EXPECT_EQ(*records[0].judge_max(), 0.5);
    EXPECT_EQ(*records[1].judge_max(), 0.9);
    EXPECT_DOUBLE_EQ(judge_aggregate(records).mean, (0.5 * 3 + 0.9) / 4);
}

TEST(OfflineJudge, MissingKeysAndBadFiles) {
    const auto dir = temp_dir("offline_judge_missing");
    write_file(dir / "s.jsonl", R"({"question_id": "q0", "reference_index": 0, "score": 0.25})" "\n");
    std::vector<EvalRecord> records{scored_record(0, std::nullopt, std::nullopt)};
    OfflineJudge judge(dir / "s.jsonl");
    const auto rep = score_records(records, judge);
    EXPECT_EQ(rep.scored, 1u);
    EXPECT_EQ(rep.missing, 1u);
    EXPECT_EQ(records[0].judge_max(), 0.25);

    write_file(dir / "bad.jsonl", R"({"question_id": "q0", "reference_index": 0, "score": 1.5})" "\n");
    EXPECT_THROW(OfflineJudge(dir / "bad.jsonl"), FormatError);
    EXPECT_THROW(OfflineJudge(dir / "absent.jsonl"), FormatError);
}

TEST(HttpJudge, ScoresFromLocalEndpoint) {
    httplib::Server server;
    std::size_t calls = 0;
    server.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
        ++calls;
        const auto body = nlohmann::json::parse(req.body);
        nlohmann::json scores = nlohmann::json::array();
        for (const auto& rec : body["records"]) {
            const std::string ref = rec["reference"];
            if (ref == "bad") scores.push_back(1.3);
            else if (ref == "none") scores.push_back(nullptr);
            else scores.push_back(0.75);
        }
        res.set_content(nlohmann::json{{"scores", scores}}.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    std::vector<EvalRecord> records{scored_record(0, std::nullopt, std::nullopt),
                                    scored_record(1, std::nullopt, std::nullopt)};
    records[0].references = {"ok", "bad"};
    records[1].references = {"none", "ok"};
    HttpJudge judge("http://127.0.0.1:" + std::to_string(port) + "/score");
    const auto rep = score_records(records, judge, 3);
    server.stop();
    th.join();

    EXPECT_EQ(calls, 2u);
    EXPECT_EQ(rep.scored, 2u);
    EXPECT_EQ(rep.invalid, 2u);
    EXPECT_EQ(records[0].judge_scores[0], 0.75);
    EXPECT_FALSE(records[0].judge_scores[1]);
    EXPECT_EQ(records[1].judge_max(), 0.75);
}

TEST(HttpJudge, UnreachableEndpointIsCounted) {
    // Bind and release a port so nothing is listening on it.
    int port;
    {
        httplib::Server s;
        port = s.bind_to_any_port("127.0.0.1");
    }
    HttpJudgeOptions opts;
    opts.max_retries = 1;
    opts.backoff = std::chrono::milliseconds(1);
    opts.timeout = std::chrono::milliseconds(500);
    HttpJudge judge("http://127.0.0.1:" + std::to_string(port) + "/score", opts);
    std::vector<EvalRecord> records{scored_record(0, std::nullopt, std::nullopt),
                                    scored_record(1, std::nullopt, std::nullopt)};
    const auto rep = score_records(records, judge, 2);
    EXPECT_EQ(rep.unreachable, 4u);
    EXPECT_EQ(rep.scored, 0u);
    EXPECT_THROW(HttpJudge("https://example.org"), ValidationError);
}
