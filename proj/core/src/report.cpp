#include "lvfuse/report.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>

#include "lvfuse/error.hpp"
#include "lvfuse/rouge.hpp"
#include "number_format.hpp"

namespace lvfuse::eval {

namespace {

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

std::string flag(bool b) { return b ? "true" : "false"; }

std::string rouge_column() { return "rouge_l_f_beta" + detail::shortest(kRougeBeta); }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("path", "cannot open for writing: " + path.string());
    out << text;
}

}  // namespace

const std::vector<std::string> kResultColumns = {
    "config_id", "head_weights", "feature_weights", "merge_layers", "isolate_lvlm", "sum_all",
    "merge_mode", "samples", "failed", rouge_column(), "lingo_mean", "scored"};

std::string format_pair(const WeightPair& p) {
    return "[" + detail::shortest(p.llm) + ", " + detail::shortest(p.lvlm) + "]";
}

std::string format_layers(const std::vector<int>& layers) {
    std::string s = "[";
    for (std::size_t i = 0; i < layers.size(); ++i) s += (i ? ", " : "") + std::to_string(layers[i]);
    return s + "]";
}

std::string results_csv(const std::vector<SweepResult>& results) {
    std::string out;
    for (std::size_t i = 0; i < kResultColumns.size(); ++i) out += (i ? "," : "") + kResultColumns[i];
    out += "\n";
    for (const auto& r : results) {
        const auto& c = r.config;
        out += std::to_string(r.config_id) + "," + quoted(format_pair(c.head_weights)) + "," +
               quoted(format_pair(c.feature_weights)) + "," + quoted(format_layers(c.merge_layers)) + "," +
               flag(c.isolate_lvlm) + "," + flag(c.sum_all) + "," + to_string(c.merge_mode) + "," +
               std::to_string(r.sample_count) + "," + std::to_string(r.failed_count) + "," + fixed(r.mean_rouge) +
               "," + (r.lingo_mean ? fixed(*r.lingo_mean) : "") + "," + std::to_string(r.scored_count) + "\n";
    }
    return out;
}

std::vector<MarginalTable> compute_marginals(const std::vector<EvalRecord>& records) {
    using Key = std::function<std::string(const FusionConfig&)>;
    const std::vector<std::pair<std::string, Key>> params = {
        {"head_weights", [](const FusionConfig& c) { return format_pair(c.head_weights); }},
        {"feature_weights", [](const FusionConfig& c) { return format_pair(c.feature_weights); }},
        {"merge_layers", [](const FusionConfig& c) { return format_layers(c.merge_layers); }},
        {"isolate_lvlm", [](const FusionConfig& c) { return flag(c.isolate_lvlm); }},
        {"sum_all", [](const FusionConfig& c) { return flag(c.sum_all); }},
    };

    std::vector<const EvalRecord*> ordered;
    for (const auto& r : records) ordered.push_back(&r);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const EvalRecord* a, const EvalRecord* b) { return a->config_id < b->config_id; });

    std::vector<MarginalTable> tables;
    for (const auto& [name, key] : params) {
        struct Acc {
            std::vector<std::size_t> configs;
            std::size_t records = 0;
            double rouge = 0.0;
            std::size_t scored = 0;
            double lingo = 0.0;
        };
        std::vector<std::string> order;
        std::map<std::string, Acc> acc;
        for (const auto* r : ordered) {
            const std::string v = key(r->config);
            auto [it, inserted] = acc.try_emplace(v);
            if (inserted) order.push_back(v);
            Acc& a = it->second;
            if (a.configs.empty() || a.configs.back() != r->config_id) a.configs.push_back(r->config_id);
            ++a.records;
            a.rouge += r->rouge;
            if (const auto m = r->judge_max()) {
                ++a.scored;
                a.lingo += *m;
            }
        }
        MarginalTable t{name, {}};
        for (const auto& v : order) {
            const Acc& a = acc.at(v);
            MarginalRow row;
            row.value = v;
            row.configs = a.configs.size();
            row.records = a.records;
            row.mean_rouge = a.rouge / static_cast<double>(a.records);
            row.scored = a.scored;
            if (a.scored) row.mean_lingo = a.lingo / static_cast<double>(a.scored);
            t.rows.push_back(std::move(row));
        }
        tables.push_back(std::move(t));
    }
    return tables;
}

std::string marginal_csv(const MarginalTable& table) {
    std::string out = table.parameter + ",configs,records," + rouge_column() + ",lingo_mean,scored\n";
    for (const auto& r : table.rows) {
        out += quoted(r.value) + "," + std::to_string(r.configs) + "," + std::to_string(r.records) + "," +
               fixed(r.mean_rouge) + "," + (r.mean_lingo ? fixed(*r.mean_lingo) : "") + "," +
               std::to_string(r.scored) + "\n";
    }
    return out;
}

std::vector<std::filesystem::path> write_report(const std::vector<EvalRecord>& records,
                                                const std::filesystem::path& out_dir) {
    if (records.empty()) throw PreconditionError("report needs at least one record");
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    const auto results_path = out_dir / "results.csv";
    write_text(results_path, results_csv(aggregate(records)));
    written.push_back(results_path);
    for (const auto& t : compute_marginals(records)) {
        const auto p = out_dir / ("marginal_" + t.parameter + ".csv");
        write_text(p, marginal_csv(t));
        written.push_back(p);
    }
    return written;
}

}  // namespace lvfuse::eval
