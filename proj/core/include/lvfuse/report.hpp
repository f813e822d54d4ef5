#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lvfuse/sweep.hpp"

namespace lvfuse::eval {

// Column names of the per-config results table, in order.
extern const std::vector<std::string> kResultColumns;

std::string results_csv(const std::vector<SweepResult>& results);

struct MarginalRow {
    std::string value;
    std::size_t configs = 0;
    std::size_t records = 0;
    double mean_rouge = 0.0;
    std::size_t scored = 0;
    std::optional<double> mean_lingo;
};

// Mean metrics per value of one swept parameter, pooled over every record
// that used that value (all other parameters aggregated).
struct MarginalTable {
    std::string parameter;
    std::vector<MarginalRow> rows;
};

// One table per parameter: head_weights, feature_weights, merge_layers,
// isolate_lvlm, sum_all. Rows follow first appearance in config-id order.
std::vector<MarginalTable> compute_marginals(const std::vector<EvalRecord>& records);

std::string marginal_csv(const MarginalTable& table);

// Writes results.csv and marginal_<parameter>.csv into `out_dir`; returns
// the written paths.
std::vector<std::filesystem::path> write_report(const std::vector<EvalRecord>& records,
                                                const std::filesystem::path& out_dir);

std::string format_pair(const WeightPair& p);
std::string format_layers(const std::vector<int>& layers);

}  // namespace lvfuse::eval
