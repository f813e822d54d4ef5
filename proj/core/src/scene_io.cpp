#include "lvfuse/scene_io.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "lvfuse/error.hpp"

namespace lvfuse::scene {

namespace {

using nlohmann::json;

json parse_line(const std::string& line, std::size_t line_no) {
    try {
        json j = json::parse(line);
        if (!j.is_object()) throw FormatError("", "record must be a JSON object", line_no);
        return j;
    } catch (const json::parse_error& e) {
        throw FormatError("", std::string("invalid JSON: ") + e.what(), line_no);
    }
}

template <typename T>
T field(const json& j, const char* key, std::size_t line_no) {
    if (!j.contains(key)) throw FormatError(key, "missing field", line_no);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(key, std::string("wrong type: ") + e.what(), line_no);
    }
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw FormatError("path", "cannot open: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        fn(line, line_no);
    }
}

}  // namespace

Detection2D parse_detection(const std::string& line, std::size_t line_no) {
    const json j = parse_line(line, line_no);
    static const char* known[] = {"frame_id", "source", "track_id", "class", "bbox", "confidence", "mask_rle", "embedding"};
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known)) {
            throw FormatError(key, "unknown detection field", line_no);
        }
    }

    Detection2D d;
    d.frame_id = field<std::uint32_t>(j, "frame_id", line_no);
    const auto source = field<std::string>(j, "source", line_no);
    if (source == "grounded") {
        d.source = DetectionSource::grounded;
    } else if (source == "detector") {
        d.source = DetectionSource::detector;
    } else {
        throw FormatError("source", "expected grounded or detector, got '" + source + "'", line_no);
    }
    d.track_id = j.contains("track_id") ? field<std::int64_t>(j, "track_id", line_no) : kUntracked;
    if (d.source == DetectionSource::grounded && d.track_id < 0) {
        throw FormatError("track_id", "grounded detections need a non-negative track id", line_no);
    }
    d.class_label = field<std::string>(j, "class", line_no);
    if (d.class_label.empty()) throw FormatError("class", "empty class label", line_no);
    const auto box = field<std::vector<double>>(j, "bbox", line_no);
    if (box.size() != 4) throw FormatError("bbox", "expected [x_min, y_min, x_max, y_max]", line_no);
    d.bbox = BBox{box[0], box[1], box[2], box[3]};
    if (!d.bbox.valid()) throw FormatError("bbox", "degenerate box", line_no);
    d.confidence = j.contains("confidence") ? field<double>(j, "confidence", line_no) : 1.0;
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) throw FormatError("confidence", "outside [0, 1]", line_no);
    if (j.contains("mask_rle")) {
        const auto runs = field<std::vector<std::vector<std::uint32_t>>>(j, "mask_rle", line_no);
        std::vector<PixelRun> mask;
        for (const auto& r : runs) {
            if (r.size() != 2) throw FormatError("mask_rle", "each run is [start, length]", line_no);
            mask.push_back(PixelRun{r[0], r[1]});
        }
        d.mask = std::move(mask);
    }
    if (j.contains("embedding")) d.embedding = field<std::vector<float>>(j, "embedding", line_no);
    return d;
}

std::vector<Detection2D> read_detections(const std::filesystem::path& path) {
    std::vector<Detection2D> out;
    for_each_line(path, [&](const std::string& line, std::size_t n) { out.push_back(parse_detection(line, n)); });
    return out;
}

DepthFrame read_depth_frame(const std::filesystem::path& path) {
    auto in = detail::ByteReader::from_file(path);
    DepthFrame f;
    f.frame_id = in.u32("frame_id");
    f.width = in.u32("width");
    f.height = in.u32("height");
    f.reference_a = Pixel{in.u32("reference_a.x"), in.u32("reference_a.y")};
    f.reference_b = Pixel{in.u32("reference_b.x"), in.u32("reference_b.y")};
    if (f.width == 0 || f.height == 0 || f.width > 16384 || f.height > 16384) {
        throw FormatError("width", "implausible frame size " + std::to_string(f.width) + "x" + std::to_string(f.height));
    }
    f.depth.resize(static_cast<std::size_t>(f.width) * f.height);
    in.f32s(f.depth, "depth");
    in.expect_end();
    try {
        f.validate();
    } catch (const PreconditionError& e) {
        throw FormatError("depth", e.what());
    }
    return f;
}

void write_depth_frame(const DepthFrame& frame, const std::filesystem::path& path) {
    detail::ByteWriter out;
    out.u32(frame.frame_id);
    out.u32(frame.width);
    out.u32(frame.height);
    out.u32(frame.reference_a.x);
    out.u32(frame.reference_a.y);
    out.u32(frame.reference_b.x);
    out.u32(frame.reference_b.y);
    out.f32s(frame.depth);
    out.write_to(path);
}

std::map<std::uint32_t, DepthFrame> read_depth_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw FormatError("path", "not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".depth") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::map<std::uint32_t, DepthFrame> out;
    for (const auto& p : files) {
        DepthFrame f = read_depth_frame(p);
        const auto id = f.frame_id;
        if (!out.emplace(id, std::move(f)).second) {
            throw FormatError("frame_id", "frame " + std::to_string(id) + " appears in two depth files");
        }
    }
    return out;
}

SignDatabase load_sign_database(const std::filesystem::path& matrix_path, const std::filesystem::path& table_path,
                                double threshold) {
    auto in = detail::ByteReader::from_file(matrix_path);
    const std::uint32_t n = in.u32("N");
    const std::uint32_t dim = in.u32("dim");
    if (dim != kSignEmbeddingDim) throw FormatError("dim", "expected 512, got " + std::to_string(dim));
    if (in.remaining() != static_cast<std::size_t>(n) * kViewsPerSign * dim * 4) {
        throw FormatError("N", "header declares " + std::to_string(n) + " signs but matrix holds " +
                                   std::to_string(in.remaining()) + " bytes");
    }
    Tensor2D rows(static_cast<std::size_t>(n) * kViewsPerSign, dim);
    in.f32s(rows.data(), "embeddings");

    std::vector<SignEntry> entries;
    for_each_line(table_path, [&](const std::string& raw, std::size_t line_no) {
        std::string line = raw;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw FormatError("", "expected category<TAB>description", line_no);
        entries.push_back(SignEntry{line.substr(0, tab), line.substr(tab + 1)});
    });
    if (entries.size() != n) {
        throw FormatError("N", "matrix declares " + std::to_string(n) + " signs but table lists " +
                                   std::to_string(entries.size()));
    }
    try {
        return SignDatabase(std::move(entries), std::move(rows), threshold);
    } catch (const ValidationError& e) {
        throw FormatError("embeddings", e.what());
    }
}

void save_sign_database(const SignDatabase& db, const std::filesystem::path& matrix_path,
                        const std::filesystem::path& table_path) {
    detail::ByteWriter out;
    out.u32(static_cast<std::uint32_t>(db.entries().size()));
    out.u32(static_cast<std::uint32_t>(kSignEmbeddingDim));
    out.f32s(db.embeddings().data());
    out.write_to(matrix_path);

    std::ofstream table(table_path, std::ios::trunc);
    if (!table) throw FormatError("path", "cannot open for writing: " + table_path.string());
    for (const auto& e : db.entries()) {
        if (e.category.find_first_of("\t\n") != std::string::npos ||
            e.description.find_first_of("\t\n") != std::string::npos) {
            throw ValidationError("sign fields may not contain tabs or newlines");
        }
        table << e.category << '\t' << e.description << '\n';
    }
}

std::vector<LightStateRecord> read_light_states(const std::filesystem::path& path) {
    std::vector<LightStateRecord> out;
    for_each_line(path, [&](const std::string& line, std::size_t n) {
        const json j = parse_line(line, n);
        out.push_back(LightStateRecord{field<std::uint32_t>(j, "frame_id", n), field<std::int64_t>(j, "track_id", n),
                                       field<std::string>(j, "state", n)});
    });
    return out;
}

std::vector<TrackedObject> assemble_scene(const std::vector<Detection2D>& detections,
                                          const std::map<std::uint32_t, DepthFrame>& depths, const SignDatabase* signs,
                                          const std::vector<LightStateRecord>& lights, double iou_threshold) {
    std::map<std::uint32_t, std::pair<std::vector<Detection2D>, std::vector<Detection2D>>> per_frame;
    for (const auto& d : detections) {
        auto& slot = per_frame[d.frame_id];
        (d.source == DetectionSource::grounded ? slot.first : slot.second).push_back(d);
    }
    std::vector<std::vector<Detection2D>> merged;
    for (const auto& [frame, lists] : per_frame) {
        merged.push_back(merge_detections(lists.first, lists.second, iou_threshold));
    }
    auto tracks = build_tracks(merged, depths, signs);
    apply_light_states(tracks, lights);
    return tracks;
}

}  // namespace lvfuse::scene
