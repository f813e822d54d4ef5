// lvfuse: command line entry point for fused decoding, scene prompt
// building, ablation sweeps, judge scoring and reporting.
//
// Exit codes: 0 ok, 2 input/format, 3 stack compatibility, 4 decode
// failure, 5 judge endpoint unreachable.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lvfuse/decoder.hpp"
#include "lvfuse/error.hpp"
#include "lvfuse/fusion.hpp"
#include "lvfuse/judge.hpp"
#include "lvfuse/manifest.hpp"
#include "lvfuse/report.hpp"
#include "lvfuse/scene.hpp"
#include "lvfuse/scene_io.hpp"
#include "lvfuse/sweep.hpp"
#include "lvfuse/tokenizer.hpp"

namespace fs = std::filesystem;
using namespace lvfuse;

namespace {

enum ExitCode { kOk = 0, kInput = 2, kCompatibility = 3, kDecode = 4, kNetwork = 5 };

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("path", "cannot open: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("path", "cannot open for writing: " + path.string());
    out << text;
}

// Decoded text goes to --out when given (manifest beside it), otherwise to
// stdout with the manifest on stderr.
void emit_output(const std::string& text, const std::string& out, RunManifest manifest) {
    manifest.timestamp = utc_timestamp();
    if (out.empty()) {
        std::cout << text << std::endl;
        std::cerr << manifest.to_json();
        return;
    }
    write_text(out, text + "\n");
    manifest.write(out + ".manifest.json");
}

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

struct InitStackArgs {
    std::string out;
    StackDims dims;
    std::uint64_t seed = 42;
};

int run_init_stack(const InitStackArgs& a) {
    const DecoderStack stack = seed_init(a.dims, a.seed);
    save_stack(stack, a.out);
    RunManifest m;
    m.command = "init-stack";
    nlohmann::json cfg = {{"num_layers", a.dims.num_layers}, {"model_dim", a.dims.model_dim},
                          {"vocab_size", a.dims.vocab_size}, {"num_heads", a.dims.num_heads}, {"seed", a.seed}};
    m.resolved_config = cfg.dump();
    m.timestamp = utc_timestamp();
    m.write(a.out + ".manifest.json");
    return kOk;
}

struct SingleDecodeArgs {
    std::string weights, prompt, out;
    std::size_t max_new_tokens = 64;
    std::uint64_t seed = 42;
};

int run_single_decode(const SingleDecodeArgs& a) {
    const DecoderStack stack = load_stack(a.weights);
    const ByteTokenizer tok(stack.vocab_size());
    const auto generated = greedy_decode(stack, tok.encode(read_text(a.prompt)), a.max_new_tokens, tok.end_token(), a.seed);
    RunManifest m;
    m.command = "single-decode";
    m.resolved_config = nlohmann::json{{"max_new_tokens", a.max_new_tokens}, {"seed", a.seed}}.dump();
    m.add_input(a.weights);
    m.add_input(a.prompt);
    emit_output(tok.decode(generated), a.out, std::move(m));
    return kOk;
}

struct FuseDecodeArgs {
    std::string llm_weights, lvlm_weights, fusion_config, llm_prompt, lvlm_prompt, out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> max_new_tokens;
};

int run_fuse_decode(const FuseDecodeArgs& a) {
    const DecoderStack llm = load_stack(a.llm_weights);
    const DecoderStack lvlm = load_stack(a.lvlm_weights);
    FusionConfig config = load_fusion_config(a.fusion_config);
    if (a.seed) config.seed = *a.seed;
    if (a.max_new_tokens) config.max_new_tokens = *a.max_new_tokens;
    require_compatible(llm, lvlm);

    const ByteTokenizer llm_tok(llm.vocab_size());
    const ByteTokenizer lvlm_tok(lvlm.vocab_size());
    const ByteTokenizer shared(align_vocab(llm.vocab_size(), lvlm.vocab_size()).shared_size);
    const auto llm_prompt = llm_tok.encode(read_text(a.llm_prompt));
    const auto lvlm_prompt = lvlm_tok.encode(read_text(a.lvlm_prompt));
    FusedDecodeResult result;
    try {
        result = fused_decode(llm, lvlm, llm_prompt, lvlm_prompt, config, shared.end_token());
    } catch (const CompatibilityError&) {
        throw;
    } catch (const Error& e) {
        throw DecodeError(e.what());
    }

    RunManifest m;
    m.command = "fuse-decode";
    m.resolved_config = dump_fusion_config(config);
    for (const auto& p : {a.llm_weights, a.lvlm_weights, a.fusion_config, a.llm_prompt, a.lvlm_prompt}) m.add_input(p);
    emit_output(shared.decode(result.tokens), a.out, std::move(m));
    return kOk;
}

struct BuildPromptsArgs {
    std::string detections, depths, signs_db, signs_table, lights, questions, out_dir, scene_id, preamble;
    double iou_threshold = scene::kDefaultIouThreshold;
    double sign_threshold = scene::kDefaultSignThreshold;
};

int run_build_prompts(const BuildPromptsArgs& a) {
    const auto detections = scene::read_detections(a.detections);
    const auto depths = scene::read_depth_dir(a.depths);
    std::optional<scene::SignDatabase> signs;
    if (!a.signs_db.empty()) {
        const std::string table = a.signs_table.empty() ? a.signs_db + ".tsv" : a.signs_table;
        signs = scene::load_sign_database(a.signs_db, table, a.sign_threshold);
    }
    const auto lights = a.lights.empty() ? std::vector<scene::LightStateRecord>{} : scene::read_light_states(a.lights);
    const auto questions = eval::read_questions(a.questions);
    const std::string preamble = a.preamble.empty() ? scene::kDefaultTaskPreamble : read_text(a.preamble);

    const auto tracks = scene::assemble_scene(detections, depths, signs ? &*signs : nullptr, lights, a.iou_threshold);
    const std::string scene_id = a.scene_id.empty() ? fs::path(a.detections).stem().string() : a.scene_id;

    fs::create_directories(a.out_dir);
    for (const auto& q : questions) {
        write_text(fs::path(a.out_dir) / (scene_id + "__" + q.id + ".txt"), scene::build_prompt(tracks, q.text, preamble));
    }

    RunManifest m;
    m.command = "build-prompts";
    m.resolved_config = nlohmann::json{{"scene_id", scene_id},
                                       {"iou_threshold", a.iou_threshold},
                                       {"sign_threshold", a.sign_threshold}}.dump();
    m.add_input(a.detections);
    m.add_input(a.depths);
    if (!a.signs_db.empty()) m.add_input(a.signs_db);
    if (!a.lights.empty()) m.add_input(a.lights);
    m.add_input(a.questions);
    m.timestamp = utc_timestamp();
    m.write(fs::path(a.out_dir) / "manifest.json");
    return kOk;
}

struct BuildSignsArgs {
    std::string input, out, table;
};

// Input: JSON lines {"category": ..., "description": ..., "embeddings": [[512], [512], [512]]}.
int run_build_signs_db(const BuildSignsArgs& a) {
    std::ifstream in(a.input);
    if (!in) throw FormatError("path", "cannot open: " + a.input);
    std::vector<scene::SignEntry> entries;
    std::vector<float> rows;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            entries.push_back({j.at("category").get<std::string>(), j.at("description").get<std::string>()});
            const auto views = j.at("embeddings").get<std::vector<std::vector<float>>>();
            if (views.size() != scene::kViewsPerSign) throw FormatError("embeddings", "expected 3 views per sign", n);
            for (const auto& v : views) {
                if (v.size() != scene::kSignEmbeddingDim) throw FormatError("embeddings", "expected 512 values per view", n);
                rows.insert(rows.end(), v.begin(), v.end());
            }
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("", e.what(), n);
        }
    }
    const std::size_t count = entries.size() * scene::kViewsPerSign;
    const auto db = scene::SignDatabase::from_raw(std::move(entries), Tensor2D(count, scene::kSignEmbeddingDim, std::move(rows)));
    const std::string table = a.table.empty() ? a.out + ".tsv" : a.table;
    scene::save_sign_database(db, a.out, table);

    RunManifest m;
    m.command = "build-signs-db";
    m.add_input(a.input);
    m.timestamp = utc_timestamp();
    m.write(a.out + ".manifest.json");
    return kOk;
}

struct SubsetArgs {
    std::string questions;
    std::size_t subset = 0;
    std::uint64_t subset_seed = 42;
};

std::vector<eval::Question> apply_subset(const std::string& path, std::size_t n, std::uint64_t seed) {
    auto questions = eval::read_questions(path);
    return n > 0 ? eval::select_subset(questions, n, seed) : questions;
}

int run_subset(const SubsetArgs& a) {
    for (const auto& q : apply_subset(a.questions, a.subset, a.subset_seed)) std::cout << q.id << "\n";
    return kOk;
}

struct SweepArgs {
    std::string llm_weights, lvlm_weights, questions, grid = "standard", out_dir, prompts_dir;
    std::size_t subset = 0;
    std::uint64_t subset_seed = 42;
    std::size_t workers = 0;
    std::optional<std::size_t> stop_after;
};

int run_sweep_cmd(const SweepArgs& a) {
    const DecoderStack llm = load_stack(a.llm_weights);
    const DecoderStack lvlm = load_stack(a.lvlm_weights);
    require_compatible(llm, lvlm);

    const eval::SweepGrid grid = a.grid == "standard" ? eval::SweepGrid::standard(llm.num_layers())
                                                   : eval::load_sweep_grid(a.grid, llm.num_layers());
    const auto configs = eval::enumerate_configs(grid);

    eval::SweepInputs inputs;
    inputs.llm = &llm;
    inputs.lvlm = &lvlm;
    inputs.questions = apply_subset(a.questions, a.subset, a.subset_seed);
    if (!a.prompts_dir.empty()) {
        for (const auto& e : fs::directory_iterator(a.prompts_dir)) {
            if (!e.is_regular_file() || e.path().extension() != ".txt") continue;
            // build-prompts names files <scene>__<question id>.txt
            const std::string stem = e.path().stem().string();
            const auto sep = stem.rfind("__");
            const std::string qid = sep == std::string::npos ? stem : stem.substr(sep + 2);
            if (!inputs.llm_prompts.emplace(qid, read_text(e.path())).second) {
                throw FormatError("prompts_dir", "two prompt files for question '" + qid + "'");
            }
        }
    }

    fs::create_directories(a.out_dir);
    eval::SweepOptions options;
    options.workers = a.workers ? a.workers : std::stoul(env_or("LVFUSE_WORKERS", "1"));
    options.checkpoint = fs::path(a.out_dir) / "checkpoint.jsonl";
    options.stop_after = a.stop_after;
    const auto outcome = eval::run_sweep(configs, inputs, options);

    std::string ids;
    for (const auto& q : inputs.questions) ids += q.id + "\n";
    write_text(fs::path(a.out_dir) / "questions.txt", ids);

    RunManifest m;
    m.command = "sweep";
    nlohmann::json cfg = {{"grid", a.grid}, {"configs", configs.size()}, {"questions", inputs.questions.size()},
                          {"subset", a.subset}, {"subset_seed", a.subset_seed}, {"seed", grid.seed},
                          {"max_new_tokens", grid.max_new_tokens}, {"merge_mode", to_string(grid.merge_mode)}};
    m.resolved_config = cfg.dump();
    m.add_input(a.llm_weights);
    m.add_input(a.lvlm_weights);
    m.add_input(a.questions);
    if (a.grid != "standard") m.add_input(a.grid);
    if (!a.prompts_dir.empty()) m.add_input(a.prompts_dir);
    m.timestamp = utc_timestamp();
    m.write(fs::path(a.out_dir) / "manifest.json");

    if (!outcome.complete) {
        std::cerr << "sweep interrupted: " << outcome.results.size() << " of " << configs.size()
                  << " configs finished; rerun to resume\n";
        return kOk;
    }
    eval::write_records(outcome.records, fs::path(a.out_dir) / "records.jsonl");
    eval::write_report(outcome.records, a.out_dir);
    std::size_t failed = 0;
    for (const auto& r : outcome.records) failed += r.error.empty() ? 0 : 1;
    std::cerr << "sweep finished: " << configs.size() << " configs x " << inputs.questions.size() << " questions ("
              << outcome.resumed_configs << " resumed, " << failed << " failed cells)\n";
    return kOk;
}

struct ScoreArgs {
    std::string records, out, judge_url, scores_file;
    int timeout_ms = 10000;
    std::size_t retries = 3;
    std::size_t batch_size = 32;
};

int run_score(const ScoreArgs& a) {
    auto records = eval::read_records(a.records);
    const std::string url = a.judge_url.empty() ? env_or("LVFUSE_JUDGE_URL", "") : a.judge_url;
    std::unique_ptr<eval::Judge> judge;
    if (!a.scores_file.empty()) {
        judge = std::make_unique<eval::OfflineJudge>(a.scores_file);
    } else if (!url.empty()) {
        eval::HttpJudgeOptions opt;
        opt.timeout = std::chrono::milliseconds(a.timeout_ms);
        opt.max_retries = a.retries;
        opt.batch_size = a.batch_size;
        judge = std::make_unique<eval::HttpJudge>(url, opt);
    } else {
        throw FormatError("judge", "give --scores-file, --judge-url or LVFUSE_JUDGE_URL");
    }

    const auto report = eval::score_records(records, *judge, a.batch_size);
    eval::write_records(records, a.out);
    const auto summary = eval::judge_aggregate(records);

    RunManifest m;
    m.command = "score";
    m.resolved_config = nlohmann::json{{"mode", a.scores_file.empty() ? "http" : "offline"},
                                       {"endpoint", url},
                                       {"retries", a.retries},
                                       {"timeout_ms", a.timeout_ms}}.dump();
    m.add_input(a.records);
    if (!a.scores_file.empty()) m.add_input(a.scores_file);
    m.timestamp = utc_timestamp();
    m.write(a.out + ".manifest.json");

    std::cerr << "scored " << report.scored << " reference slots, " << report.missing << " missing, "
              << report.invalid << " invalid, " << report.unreachable << " unreachable; " << summary.skipped
              << " records without a score\n";
    std::cout << "lingo_mean " << summary.mean << " over " << summary.scored << " records\n";
    if (report.unreachable > 0) {
        std::cerr << "judge endpoint unreachable; partial scores written to " << a.out << "\n";
        return kNetwork;
    }
    return kOk;
}

struct ReportArgs {
    std::string records, out_dir;
};

int run_report(const ReportArgs& a) {
    const auto records = eval::read_records(a.records);
    const auto written = eval::write_report(records, a.out_dir);
    RunManifest m;
    m.command = "report";
    m.add_input(a.records);
    m.timestamp = utc_timestamp();
    m.write(fs::path(a.out_dir) / "report.manifest.json");
    for (const auto& p : written) std::cout << p.string() << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lvfuse: fused LLM + LVLM decoding and evaluation"};
    app.require_subcommand(1);

    InitStackArgs init;
    auto* init_cmd = app.add_subcommand("init-stack", "Write a seeded random toy stack");
    init_cmd->add_option("--out", init.out, "Weight file to write")->required();
    init_cmd->add_option("--layers", init.dims.num_layers, "Decoder blocks");
    init_cmd->add_option("--dim", init.dims.model_dim, "Model width");
    init_cmd->add_option("--vocab", init.dims.vocab_size, "Vocabulary size");
    init_cmd->add_option("--heads", init.dims.num_heads, "Attention heads");
    init_cmd->add_option("--seed", init.seed, "RNG seed");

    SingleDecodeArgs single;
    auto* single_cmd = app.add_subcommand("single-decode", "Greedy decode with one stack");
    single_cmd->add_option("--weights", single.weights)->required();
    single_cmd->add_option("--prompt", single.prompt, "Prompt text file")->required();
    single_cmd->add_option("--max-new-tokens", single.max_new_tokens);
    single_cmd->add_option("--seed", single.seed);
    single_cmd->add_option("--out", single.out, "Write text here instead of stdout");

    FuseDecodeArgs fuse;
    auto* fuse_cmd = app.add_subcommand("fuse-decode", "Lockstep fused decode of an LLM and an LVLM stack");
    fuse_cmd->add_option("--llm-weights", fuse.llm_weights)->required();
    fuse_cmd->add_option("--lvlm-weights", fuse.lvlm_weights)->required();
    fuse_cmd->add_option("--fusion-config", fuse.fusion_config)->required();
    fuse_cmd->add_option("--llm-prompt", fuse.llm_prompt, "LLM prompt text file")->required();
    fuse_cmd->add_option("--lvlm-prompt", fuse.lvlm_prompt, "LVLM prompt text file")->required();
    fuse_cmd->add_option("--seed", fuse.seed, "Override the config seed");
    fuse_cmd->add_option("--max-new-tokens", fuse.max_new_tokens, "Override the config token cap");
    fuse_cmd->add_option("--out", fuse.out, "Write text here instead of stdout");

    BuildPromptsArgs prompts;
    auto* prompts_cmd = app.add_subcommand("build-prompts", "Turn scene detections into three-block LLM prompts");
    prompts_cmd->add_option("--detections", prompts.detections)->required();
    prompts_cmd->add_option("--depths", prompts.depths, "Directory of .depth frames")->required();
    prompts_cmd->add_option("--signs-db", prompts.signs_db, "Sign embedding matrix");
    prompts_cmd->add_option("--signs-table", prompts.signs_table, "Sign description table (default <signs-db>.tsv)");
    prompts_cmd->add_option("--lights", prompts.lights, "Traffic light states");
    prompts_cmd->add_option("--questions", prompts.questions)->required();
    prompts_cmd->add_option("--out-dir", prompts.out_dir)->required();
    prompts_cmd->add_option("--scene-id", prompts.scene_id, "Defaults to the detections file stem");
    prompts_cmd->add_option("--preamble", prompts.preamble, "Task description text file");
    prompts_cmd->add_option("--iou-threshold", prompts.iou_threshold);
    prompts_cmd->add_option("--sign-threshold", prompts.sign_threshold);

    BuildSignsArgs signs;
    auto* signs_cmd = app.add_subcommand("build-signs-db", "Assemble the 3N x 512 sign embedding database");
    signs_cmd->add_option("--input", signs.input, "JSON lines with category, description, embeddings")->required();
    signs_cmd->add_option("--out", signs.out, "Matrix file")->required();
    signs_cmd->add_option("--table", signs.table, "Description table (default <out>.tsv)");

    SubsetArgs subset;
    auto* subset_cmd = app.add_subcommand("subset", "Print the question ids of a seeded subset");
    subset_cmd->add_option("--questions", subset.questions)->required();
    subset_cmd->add_option("--subset", subset.subset)->required();
    subset_cmd->add_option("--subset-seed", subset.subset_seed);

    SweepArgs sweep;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run the fusion parameter grid over a question set");
    sweep_cmd->add_option("--llm-weights", sweep.llm_weights)->required();
    sweep_cmd->add_option("--lvlm-weights", sweep.lvlm_weights)->required();
    sweep_cmd->add_option("--questions", sweep.questions)->required();
    sweep_cmd->add_option("--grid", sweep.grid, "Grid file, or 'standard' for the built-in 300-config grid");
    sweep_cmd->add_option("--out-dir", sweep.out_dir)->required();
    sweep_cmd->add_option("--prompts-dir", sweep.prompts_dir, "LLM prompts from build-prompts");
    sweep_cmd->add_option("--subset", sweep.subset, "Evaluate a seeded sample of N questions");
    sweep_cmd->add_option("--subset-seed", sweep.subset_seed);
    sweep_cmd->add_option("--workers", sweep.workers, "Worker threads (default LVFUSE_WORKERS or 1)");
    sweep_cmd->add_option("--stop-after", sweep.stop_after, "Stop after N configs (resume later)");

    ScoreArgs score;
    auto* score_cmd = app.add_subcommand("score", "Attach judge scores to sweep records");
    score_cmd->add_option("--records", score.records)->required();
    score_cmd->add_option("--out", score.out, "Scored records file")->required();
    score_cmd->add_option("--judge-url", score.judge_url, "HTTP endpoint (default LVFUSE_JUDGE_URL)");
    score_cmd->add_option("--scores-file", score.scores_file, "Offline scores instead of an endpoint");
    score_cmd->add_option("--timeout-ms", score.timeout_ms);
    score_cmd->add_option("--retries", score.retries);
    score_cmd->add_option("--batch-size", score.batch_size);

    ReportArgs report;
    auto* report_cmd = app.add_subcommand("report", "Write the results table and per-parameter marginals");
    report_cmd->add_option("--records", report.records)->required();
    report_cmd->add_option("--out-dir", report.out_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInput;
    }

    try {
        if (*init_cmd) return run_init_stack(init);
        if (*single_cmd) return run_single_decode(single);
        if (*fuse_cmd) return run_fuse_decode(fuse);
        if (*prompts_cmd) return run_build_prompts(prompts);
        if (*signs_cmd) return run_build_signs_db(signs);
        if (*subset_cmd) return run_subset(subset);
        if (*sweep_cmd) return run_sweep_cmd(sweep);
        if (*score_cmd) return run_score(score);
        if (*report_cmd) return run_report(report);
    } catch (const CompatibilityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kCompatibility;
    } catch (const NetworkError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNetwork;
    } catch (const DecodeError& e) {
        std::cerr << "error: decode failed: " << e.what() << "\n";
        return kDecode;
    } catch (const NumericError& e) {
        std::cerr << "error: decode failed: " << e.what() << "\n";
        return kDecode;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInput;
    }
    return kInput;
}
