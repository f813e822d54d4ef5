#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lvfuse/fusion.hpp"

namespace lvfuse::eval {

// Axes of the ablation grid. The cartesian product is enumerated in the
// order head, feature, layers, isolate, sum_all (last axis fastest).
struct SweepGrid {
    std::vector<WeightPair> head_weight_pairs;
    std::vector<WeightPair> feature_weight_pairs;
    std::vector<std::vector<int>> merge_layer_sets;
    std::vector<bool> isolate_options{false, true};
    std::vector<bool> sum_all_options{false, true};
    MergeMode merge_mode = MergeMode::pairwise;
    std::size_t max_new_tokens = 64;
    std::uint64_t seed = 42;

    // The 5 x 5 x 3 x 2 x 2 ablation grid for a 28-block stack: layer sets
    // {28}, {20..28} and {25..28}, written with -1 for the final block. For
    // shallower stacks the sets are shifted to end at the final block and
    // indices below 1 are dropped.
    static SweepGrid standard(std::uint32_t num_layers = 28);

    std::size_t size() const noexcept;
};

// Grid file: JSON object with keys head_weights, feature_weights (arrays of
// pairs), merge_layer_sets (array of int arrays), isolate_lvlm, sum_all
// (arrays of bools), and optional merge_mode, max_new_tokens, seed.
// {"preset": "standard"} (plus the optional keys) selects SweepGrid::standard.
SweepGrid parse_sweep_grid(const std::string& text, std::uint32_t num_layers);
SweepGrid load_sweep_grid(const std::filesystem::path& path, std::uint32_t num_layers);

struct ConfigEntry {
    std::size_t id = 0;
    FusionConfig config;
};

// Throws PreconditionError when any axis is empty.
std::vector<ConfigEntry> enumerate_configs(const SweepGrid& grid);

inline constexpr std::size_t kReferencesPerQuestion = 2;

struct Question {
    std::string id;
    std::string text;
    std::array<std::string, kReferencesPerQuestion> references;
};

// JSON lines: {"id": "...", "question": "...", "references": ["...", "..."]}.
std::vector<Question> read_questions(const std::filesystem::path& path);

// Deterministic seeded sample of `n` questions, returned in file order.
std::vector<Question> select_subset(const std::vector<Question>& questions, std::size_t n, std::uint64_t seed);

struct EvalRecord {
    std::size_t config_id = 0;
    FusionConfig config;
    std::string question_id;
    std::string question;
    std::string answer;
    std::array<std::string, kReferencesPerQuestion> references;
    double rouge = 0.0;
    // One slot per reference; empty until a judge scores it.
    std::array<std::optional<double>, kReferencesPerQuestion> judge_scores;
    // Non-empty when decoding this cell failed.
    std::string error;

    std::optional<double> judge_max() const;
};

struct JudgeSummary {
    double mean = 0.0;
    std::size_t scored = 0;
    std::size_t skipped = 0;  // records without any judge score
};

// Per record the max over reference scores, then the mean over records.
JudgeSummary judge_aggregate(const std::vector<EvalRecord>& records);

struct SweepResult {
    std::size_t config_id = 0;
    FusionConfig config;
    double mean_rouge = 0.0;
    std::optional<double> lingo_mean;
    std::size_t sample_count = 0;
    std::size_t scored_count = 0;
    std::size_t failed_count = 0;
};

// Groups records by config id (ascending).
std::vector<SweepResult> aggregate(const std::vector<EvalRecord>& records);

struct SweepInputs {
    const DecoderStack* llm = nullptr;
    const DecoderStack* lvlm = nullptr;
    std::vector<Question> questions;
    // LLM prompt text per question id; the question text is used when absent.
    std::map<std::string, std::string> llm_prompts;
};

struct SweepOptions {
    std::size_t workers = 1;
    // Append-only journal of finished configs; resumed from when present.
    std::optional<std::filesystem::path> checkpoint;
    // Stop after this many configs finish in this run (simulated interrupt).
    std::optional<std::size_t> stop_after;
};

struct SweepOutcome {
    std::vector<EvalRecord> records;  // ordered by config id, then question order
    std::vector<SweepResult> results;
    std::size_t resumed_configs = 0;
    bool complete = false;
};

SweepOutcome run_sweep(const std::vector<ConfigEntry>& configs, const SweepInputs& inputs,
                       const SweepOptions& options = {});

// Decodes one (config, question) cell.
EvalRecord evaluate_cell(const ConfigEntry& entry, const Question& question, const SweepInputs& inputs);

void write_records(const std::vector<EvalRecord>& records, const std::filesystem::path& path);
std::vector<EvalRecord> read_records(const std::filesystem::path& path);

std::string record_to_json(const EvalRecord& record);
EvalRecord record_from_json(const std::string& line, std::size_t line_no = 0);

}  // namespace lvfuse::eval
