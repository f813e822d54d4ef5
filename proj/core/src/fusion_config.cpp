#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lvfuse/error.hpp"
#include "lvfuse/fusion.hpp"
#include "number_format.hpp"

namespace lvfuse {

namespace {

using nlohmann::json;

WeightPair read_pair(const json& j, const char* key) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw FormatError(key, "expected a two-element numeric array [llm, lvlm]");
    }
    return WeightPair{j[0].get<float>(), j[1].get<float>()};
}

}  // namespace

FusionConfig parse_fusion_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError("", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("", "fusion config must be a JSON object");

    static const std::set<std::string> known = {"head_weights", "feature_weights", "merge_layers", "isolate_lvlm",
                                                "sum_all",      "merge_mode",      "max_new_tokens", "seed"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw FormatError(key, "unknown fusion config key");
    }

    FusionConfig c;
    try {
        if (j.contains("head_weights")) c.head_weights = read_pair(j["head_weights"], "head_weights");
        if (j.contains("feature_weights")) c.feature_weights = read_pair(j["feature_weights"], "feature_weights");
        if (j.contains("merge_layers")) {
            if (!j["merge_layers"].is_array()) throw FormatError("merge_layers", "expected an array of integers");
            c.merge_layers.clear();
            for (const auto& v : j["merge_layers"]) {
                if (!v.is_number_integer()) throw FormatError("merge_layers", "expected an array of integers");
                c.merge_layers.push_back(v.get<int>());
            }
        }
        if (j.contains("isolate_lvlm")) c.isolate_lvlm = j["isolate_lvlm"].get<bool>();
        if (j.contains("sum_all")) c.sum_all = j["sum_all"].get<bool>();
        if (j.contains("merge_mode")) c.merge_mode = merge_mode_from_string(j["merge_mode"].get<std::string>());
        if (j.contains("max_new_tokens")) c.max_new_tokens = j["max_new_tokens"].get<std::size_t>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    } catch (const json::type_error& e) {
        throw FormatError("", std::string("wrong value type: ") + e.what());
    } catch (const ValidationError& e) {
        throw FormatError("merge_mode", e.what());
    }
    try {
        validate(c);
    } catch (const ValidationError& e) {
        throw FormatError("", e.what());
    }
    return c;
}

FusionConfig load_fusion_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("path", "cannot open fusion config: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_fusion_config(ss.str());
}

std::string dump_fusion_config(const FusionConfig& c) {
    json j;
    j["head_weights"] = {detail::as_decimal(c.head_weights.llm), detail::as_decimal(c.head_weights.lvlm)};
    j["feature_weights"] = {detail::as_decimal(c.feature_weights.llm), detail::as_decimal(c.feature_weights.lvlm)};
    j["merge_layers"] = c.merge_layers;
    j["isolate_lvlm"] = c.isolate_lvlm;
    j["sum_all"] = c.sum_all;
    j["merge_mode"] = to_string(c.merge_mode);
    j["max_new_tokens"] = c.max_new_tokens;
    j["seed"] = c.seed;
    return j.dump(2);
}

}  // namespace lvfuse
