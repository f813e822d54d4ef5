#include <sys/wait.h>

#include <cstdio>
#include <fstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "lvfuse/decoder.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using lvfuse::testing::read_file;
using lvfuse::testing::temp_dir;
using lvfuse::testing::write_file;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

RunResult run(const std::string& args, const fs::path& scratch) {
    const auto err_path = scratch / "stderr.txt";
    const std::string cmd = std::string(LVFUSE_CLI) + " " + args + " 2>" + err_path.string();
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = read_file(err_path);
    return r;
}

const fs::path kScenes = fs::path(LVFUSE_FIXTURE_DIR) / "scenes";

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = temp_dir(std::string("cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    }
    RunResult lvfuse(const std::string& args) { return run(args, dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, IdentityCollapseMatchesSingleDecode) {
    ASSERT_EQ(lvfuse("init-stack --out " + path("w.bin") + " --seed 42").code, 0);
    write_file(dir_ / "prompt.txt", "Is the light green?");
    write_file(dir_ / "cfg.json", R"({"max_new_tokens": 16})");
    const auto fused = lvfuse("fuse-decode --llm-weights " + path("w.bin") + " --lvlm-weights " + path("w.bin") +
                              " --fusion-config " + path("cfg.json") + " --llm-prompt " + path("prompt.txt") +
                              " --lvlm-prompt " + path("prompt.txt"));
    const auto single = lvfuse("single-decode --weights " + path("w.bin") + " --prompt " + path("prompt.txt") +
                               " --max-new-tokens 16");
    ASSERT_EQ(fused.code, 0) << fused.err;
    ASSERT_EQ(single.code, 0) << single.err;
    EXPECT_EQ(fused.out, single.out);
    EXPECT_NE(fused.err.find("\"command\""), std::string::npos) << "manifest goes to stderr";

    const auto other_seed = lvfuse("fuse-decode --llm-weights " + path("w.bin") + " --lvlm-weights " + path("w.bin") +
                                   " --fusion-config " + path("cfg.json") + " --llm-prompt " + path("prompt.txt") +
                                   " --lvlm-prompt " + path("prompt.txt") + " --seed 7");
    EXPECT_EQ(other_seed.out, fused.out);
}

TEST_F(Cli, OutputFileGetsManifest) {
    ASSERT_EQ(lvfuse("init-stack --out " + path("w.bin") + " --layers 2 --dim 16").code, 0);
    write_file(dir_ / "prompt.txt", "hello");
    const auto r = lvfuse("single-decode --weights " + path("w.bin") + " --prompt " + path("prompt.txt") +
                          " --max-new-tokens 4 --out " + path("answer.txt"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto manifest = nlohmann::json::parse(read_file(dir_ / "answer.txt.manifest.json"));
    EXPECT_EQ(manifest["command"], "single-decode");
    EXPECT_EQ(manifest["tool_version"], "0.1.0");
    ASSERT_EQ(manifest["inputs"].size(), 2u);
    EXPECT_EQ(manifest["inputs"][1]["sha256"],
              "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824");  // sha256("hello")
    EXPECT_EQ(manifest["config"]["max_new_tokens"], 4);
}

TEST_F(Cli, InputErrorsExitWithTwo) {
    auto r = lvfuse("single-decode --weights " + path("missing.bin") + " --prompt " + path("p.txt"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("missing.bin"), std::string::npos) << r.err;
    EXPECT_EQ(lvfuse("no-such-command").code, 2);
    EXPECT_EQ(lvfuse("init-stack").code, 2);

    ASSERT_EQ(lvfuse("init-stack --out " + path("w.bin") + " --layers 2 --dim 16").code, 0);
    write_file(dir_ / "p.txt", "hi");
    write_file(dir_ / "cfg.json", R"({"head_weight": [1, 0]})");
    r = lvfuse("fuse-decode --llm-weights " + path("w.bin") + " --lvlm-weights " + path("w.bin") +
               " --fusion-config " + path("cfg.json") + " --llm-prompt " + path("p.txt") + " --lvlm-prompt " +
               path("p.txt"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("head_weight"), std::string::npos) << r.err;
}

TEST_F(Cli, IncompatibleStacksExitWithThree) {
    ASSERT_EQ(lvfuse("init-stack --out " + path("a.bin") + " --layers 2 --dim 16").code, 0);
    ASSERT_EQ(lvfuse("init-stack --out " + path("b.bin") + " --layers 3 --dim 16").code, 0);
    write_file(dir_ / "p.txt", "hi");
    write_file(dir_ / "cfg.json", "{}");
    const auto r = lvfuse("fuse-decode --llm-weights " + path("a.bin") + " --lvlm-weights " + path("b.bin") +
                          " --fusion-config " + path("cfg.json") + " --llm-prompt " + path("p.txt") +
                          " --lvlm-prompt " + path("p.txt"));
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("depth"), std::string::npos) << r.err;
}

TEST_F(Cli, BuildPromptsMatchesGoldens) {
    for (const std::string scene : {"empty", "car_green_light", "multi_sign"}) {
        const auto s = kScenes / scene;
        const auto r = lvfuse("build-prompts --detections " + (s / "detections.jsonl").string() + " --depths " +
                              (s / "depth").string() + " --signs-db " + (kScenes / "signs.bin").string() +
                              " --lights " + (s / "lights.jsonl").string() + " --questions " +
                              (s / "questions.jsonl").string() + " --out-dir " + path("prompts") + " --scene-id " +
                              scene);
        ASSERT_EQ(r.code, 0) << r.err;
    }
    for (const auto& [file, golden] : {std::pair{"empty__q_empty.txt", "empty.txt"},
                                       std::pair{"car_green_light__q_light.txt", "car_green_light.txt"},
                                       std::pair{"multi_sign__q_multi.txt", "multi_sign.txt"}}) {
        EXPECT_EQ(read_file(dir_ / "prompts" / file), read_file(fs::path(LVFUSE_GOLDEN_DIR) / golden)) << file;
    }
    EXPECT_TRUE(fs::exists(dir_ / "prompts" / "manifest.json"));
}

TEST_F(Cli, DuplicateTrackInFrameIsRejected) {
    const auto s = kScenes / "car_green_light";
    std::string dets = read_file(s / "detections.jsonl");
    dets += R"({"frame_id":1,"source":"grounded","track_id":1,"class":"car","bbox":[0,0,4,4]})" "\n";
    write_file(dir_ / "dets.jsonl", dets);
    const auto r = lvfuse("build-prompts --detections " + path("dets.jsonl") + " --depths " + (s / "depth").string() +
                          " --questions " + (s / "questions.jsonl").string() + " --out-dir " + path("out"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("track 1"), std::string::npos) << r.err;
}

TEST_F(Cli, SubsetIsReproducible) {
    std::string lines;
    for (int i = 0; i < 1000; ++i) {
        lines += R"({"id": "q)" + std::to_string(i) + R"(", "question": "Q?", "references": ["a", "b"]})" "\n";
    }
    write_file(dir_ / "q.jsonl", lines);
    const auto a = lvfuse("subset --questions " + path("q.jsonl") + " --subset 200 --subset-seed 42");
    const auto b = lvfuse("subset --questions " + path("q.jsonl") + " --subset 200 --subset-seed 42");
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(std::count(a.out.begin(), a.out.end(), '\n'), 200);
}

TEST_F(Cli, SweepScoreReport) {
    ASSERT_EQ(lvfuse("init-stack --out " + path("a.bin") + " --layers 2 --dim 16 --vocab 258 --seed 1").code, 0);
    ASSERT_EQ(lvfuse("init-stack --out " + path("b.bin") + " --layers 2 --dim 16 --vocab 258 --seed 2").code, 0);
    write_file(dir_ / "q.jsonl", R"({"id": "q0", "question": "What now?", "references": ["stop", "wait"]})" "\n"
                                 R"({"id": "q1", "question": "Why?", "references": ["red light", "signal"]})" "\n");
    write_file(dir_ / "grid.json", R"({"head_weights": [[0.5, 0.5], [0.9, 0.1]], "feature_weights": [[0.5, 0.5]],
        "merge_layer_sets": [[-1], [1, -1]], "isolate_lvlm": [false], "sum_all": [false], "max_new_tokens": 4})");
    const std::string sweep = "sweep --llm-weights " + path("a.bin") + " --lvlm-weights " + path("b.bin") +
                              " --questions " + path("q.jsonl") + " --grid " + path("grid.json") + " --out-dir ";
    auto r = lvfuse(sweep + path("run1"));
    ASSERT_EQ(r.code, 0) << r.err;
    ASSERT_EQ(lvfuse(sweep + path("run2") + " --stop-after 1").code, 0);
    ASSERT_EQ(lvfuse(sweep + path("run2") + " --workers 2").code, 0);
    EXPECT_EQ(read_file(dir_ / "run1" / "results.csv"), read_file(dir_ / "run2" / "results.csv"));
    EXPECT_EQ(read_file(dir_ / "run1" / "records.jsonl"), read_file(dir_ / "run2" / "records.jsonl"));

    const auto csv = read_file(dir_ / "run1" / "results.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    for (const char* m : {"head_weights", "feature_weights", "merge_layers", "isolate_lvlm", "sum_all"}) {
        EXPECT_TRUE(fs::exists(dir_ / "run1" / (std::string("marginal_") + m + ".csv"))) << m;
    }

    std::string scores;
    for (const char* q : {"q0", "q1"}) {
        for (int k = 0; k < 2; ++k) {
            scores += std::string(R"({"question_id": ")") + q + R"(", "reference_index": )" + std::to_string(k) +
                      R"(, "score": 0.5})" "\n";
        }
    }
    write_file(dir_ / "scores.jsonl", scores);
    r = lvfuse("score --records " + path("run1/records.jsonl") + " --out " + path("scored.jsonl") +
               " --scores-file " + path("scores.jsonl"));
    ASSERT_EQ(r.code, 0) << r.err;
    r = lvfuse("report --records " + path("scored.jsonl") + " --out-dir " + path("report"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = read_file(dir_ / "report" / "results.csv");
    EXPECT_NE(report.find(",0.500000,2\n"), std::string::npos) << report;
}

TEST_F(Cli, UnreachableJudgeExitsWithFive) {
    write_file(dir_ / "r.jsonl", "");
    ASSERT_EQ(lvfuse("init-stack --out " + path("a.bin") + " --layers 2 --dim 16 --vocab 258").code, 0);
    write_file(dir_ / "q.jsonl", R"({"id": "q0", "question": "What now?", "references": ["stop", "wait"]})" "\n");
    write_file(dir_ / "grid.json", R"({"head_weights": [[0.5, 0.5]], "feature_weights": [[0.5, 0.5]],
        "merge_layer_sets": [[-1]], "isolate_lvlm": [false], "sum_all": [false], "max_new_tokens": 2})");
    ASSERT_EQ(lvfuse("sweep --llm-weights " + path("a.bin") + " --lvlm-weights " + path("a.bin") + " --questions " +
                     path("q.jsonl") + " --grid " + path("grid.json") + " --out-dir " + path("run"))
                  .code,
              0);
    const auto r = lvfuse("score --records " + path("run/records.jsonl") + " --out " + path("scored.jsonl") +
                          " --judge-url http://127.0.0.1:9/score --retries 0 --timeout-ms 300");
    EXPECT_EQ(r.code, 5) << r.err;
    EXPECT_TRUE(fs::exists(dir_ / "scored.jsonl"));
}
