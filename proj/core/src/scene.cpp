#include "lvfuse/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "lvfuse/error.hpp"

namespace lvfuse::scene {

const std::string kDefaultTaskPreamble =
    "You are the reasoning module of an autonomous vehicle. Answer the question about the driving scene. "
    "The scene is described by the objects detected across the video frames below.\n"
    "Each object line reads: Frame <n>: <class> (id <track id>) at relative depth <d>, optionally followed by "
    "the traffic light state or the traffic sign meaning.\n"
    "Track ids stay the same for one object across frames; id -1 marks an object seen without tracking. "
    "Depths are relative units normalized to a fixed reference on the ego-vehicle hood, not meters.";

void DepthFrame::validate() const {
    if (width == 0 || height == 0) throw PreconditionError("depth frame " + std::to_string(frame_id) + " is empty");
    if (depth.size() != static_cast<std::size_t>(width) * height) {
        throw PreconditionError("depth frame " + std::to_string(frame_id) + " holds " + std::to_string(depth.size()) +
                                " values for " + std::to_string(width) + "x" + std::to_string(height));
    }
    for (const Pixel& p : {reference_a, reference_b}) {
        if (p.x >= width || p.y >= height) {
            throw PreconditionError("reference pixel (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                                    ") outside depth frame " + std::to_string(frame_id));
        }
    }
    for (float d : depth) {
        if (!std::isfinite(d) || d <= 0.0f) {
            throw PreconditionError("depth frame " + std::to_string(frame_id) + " has a non-positive or non-finite value");
        }
    }
}

SignDatabase::SignDatabase(std::vector<SignEntry> entries, Tensor2D embeddings, double threshold)
    : entries_(std::move(entries)), embeddings_(std::move(embeddings)), threshold_(threshold) {
    if (embeddings_.cols() != kSignEmbeddingDim) {
        throw ShapeError("sign embeddings must have " + std::to_string(kSignEmbeddingDim) + " columns, got " +
                         std::to_string(embeddings_.cols()));
    }
    if (embeddings_.rows() != entries_.size() * kViewsPerSign) {
        throw ShapeError("sign database holds " + std::to_string(embeddings_.rows()) + " rows for " +
                         std::to_string(entries_.size()) + " signs (expected 3 per sign)");
    }
    for (std::size_t r = 0; r < embeddings_.rows(); ++r) {
        double sq = 0;
        for (float v : embeddings_.row(r)) sq += static_cast<double>(v) * v;
        if (std::abs(std::sqrt(sq) - 1.0) > 1e-5) {
            throw ValidationError("sign embedding row " + std::to_string(r) + " is not unit length");
        }
    }
}

SignDatabase SignDatabase::from_raw(std::vector<SignEntry> entries, Tensor2D raw, double threshold) {
    for (std::size_t r = 0; r < raw.rows(); ++r) {
        double sq = 0;
        for (float v : raw.row(r)) sq += static_cast<double>(v) * v;
        if (sq == 0.0) throw PreconditionError("sign embedding row " + std::to_string(r) + " has zero norm");
        const double inv = 1.0 / std::sqrt(sq);
        for (float& v : raw.row(r)) v = static_cast<float>(v * inv);
    }
    return SignDatabase(std::move(entries), std::move(raw), threshold);
}

double iou(const BBox& a, const BBox& b) {
    if (!a.valid() || !b.valid()) throw PreconditionError("iou of a degenerate box");
    const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (w <= 0 || h <= 0) return 0.0;
    const double inter = w * h;
    return inter / (a.area() + b.area() - inter);
}

std::vector<Detection2D> merge_detections(const std::vector<Detection2D>& grounded,
                                          const std::vector<Detection2D>& detector, double threshold) {
    std::optional<std::uint32_t> frame;
    for (const auto* list : {&grounded, &detector}) {
        for (const auto& d : *list) {
            if (frame && *frame != d.frame_id) throw PreconditionError("merge_detections across different frames");
            frame = d.frame_id;
        }
    }

    struct Candidate {
        double score;
        std::size_t g, d;
    };
    std::vector<Candidate> candidates;
    for (std::size_t g = 0; g < grounded.size(); ++g) {
        for (std::size_t d = 0; d < detector.size(); ++d) {
            const double s = iou(grounded[g].bbox, detector[d].bbox);
            if (s > threshold) candidates.push_back({s, g, d});
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });

    std::vector<Detection2D> out = grounded;
    std::vector<bool> g_used(grounded.size(), false), d_used(detector.size(), false);
    for (const auto& c : candidates) {
        if (g_used[c.g] || d_used[c.d]) continue;
        g_used[c.g] = d_used[c.d] = true;
        out[c.g].class_label = detector[c.d].class_label;
    }
    for (std::size_t d = 0; d < detector.size(); ++d) {
        if (d_used[d]) continue;
        Detection2D extra = detector[d];
        extra.source = DetectionSource::detector;
        extra.track_id = kUntracked;
        out.push_back(std::move(extra));
    }
    return out;
}

double normalize_depth(const DepthFrame& frame) {
    frame.validate();
    const double a = frame.at(frame.reference_a.x, frame.reference_a.y);
    const double b = frame.at(frame.reference_b.x, frame.reference_b.y);
    const double gap = std::abs(a - b);
    if (gap == 0.0) {
        throw PreconditionError("degenerate hood reference in frame " + std::to_string(frame.frame_id) +
                                ": both reference depths are equal");
    }
    return kCanonicalReferenceDepth / gap;
}

double object_depth(const Detection2D& det, const DepthFrame& frame, double scale) {
    const std::size_t pixels = static_cast<std::size_t>(frame.width) * frame.height;
    if (frame.depth.size() != pixels) throw PreconditionError("depth frame size mismatch");
    if (det.mask) {
        double sum = 0;
        std::size_t count = 0;
        for (const auto& run : *det.mask) {
            if (static_cast<std::size_t>(run.start) + run.length > pixels) {
                throw PreconditionError("mask run exceeds depth frame " + std::to_string(frame.frame_id));
            }
            for (std::uint32_t i = 0; i < run.length; ++i) sum += frame.depth[run.start + i];
            count += run.length;
        }
        if (count > 0) return scale * (sum / static_cast<double>(count));
    }
    const double cx = std::floor((det.bbox.x_min + det.bbox.x_max) / 2.0);
    const double cy = std::floor((det.bbox.y_min + det.bbox.y_max) / 2.0);
    if (cx < 0 || cy < 0 || cx >= frame.width || cy >= frame.height) {
        throw PreconditionError("detection center outside depth frame " + std::to_string(frame.frame_id));
    }
    return scale * static_cast<double>(frame.at(static_cast<std::uint32_t>(cx), static_cast<std::uint32_t>(cy)));
}

std::optional<SignMatch> classify_sign(std::span<const float> crop_embedding, const SignDatabase& db) {
    if (crop_embedding.size() != kSignEmbeddingDim) {
        throw ShapeError("sign crop embedding has " + std::to_string(crop_embedding.size()) + " values, expected " +
                         std::to_string(kSignEmbeddingDim));
    }
    double sq = 0;
    for (float v : crop_embedding) sq += static_cast<double>(v) * v;
    if (sq == 0.0 || !std::isfinite(sq)) throw PreconditionError("sign crop embedding has zero norm");
    const double inv = 1.0 / std::sqrt(sq);

    const Tensor2D& rows = db.embeddings();
    std::optional<std::size_t> best;
    double best_score = -2.0;
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        double dot = 0;
        const auto row = rows.row(r);
        for (std::size_t i = 0; i < row.size(); ++i) dot += static_cast<double>(row[i]) * crop_embedding[i];
        const double score = std::clamp(dot * inv, -1.0, 1.0);
        if (score > best_score) {
            best_score = score;
            best = r;
        }
    }
    if (!best || !(best_score > db.threshold())) return std::nullopt;
    const std::size_t sign = *best / kViewsPerSign;
    const auto& e = db.entries()[sign];
    return SignMatch{sign, e.category, e.description, best_score};
}

std::vector<TrackedObject> build_tracks(const std::vector<std::vector<Detection2D>>& frames,
                                        const std::map<std::uint32_t, DepthFrame>& depths, const SignDatabase* signs) {
    std::map<std::uint32_t, double> scales;
    auto scale_for = [&](std::uint32_t frame_id) -> const std::pair<const DepthFrame*, double> {
        auto it = depths.find(frame_id);
        if (it == depths.end()) throw ValidationError("no depth frame for frame " + std::to_string(frame_id));
        auto [s, inserted] = scales.try_emplace(frame_id, 0.0);
        if (inserted) s->second = normalize_depth(it->second);
        return {&it->second, s->second};
    };

    struct Pending {
        TrackedObject obj;
        std::vector<std::string> labels;  // per sample, for the majority vote
    };
    std::map<std::int64_t, Pending> tracked;
    std::vector<std::pair<Detection2D, TrackedObject>> singles;

    for (const auto& frame : frames) {
        for (const auto& det : frame) {
            const auto [depth_frame, scale] = scale_for(det.frame_id);
            FrameSample sample{det.frame_id, object_depth(det, *depth_frame, scale), std::nullopt};

            std::optional<SignMatch> sign;
            if (signs && det.class_label == kTrafficSign && det.embedding) sign = classify_sign(*det.embedding, *signs);

            if (det.track_id < 0) {
                TrackedObject obj{kUntracked, det.class_label, {sample}, sign};
                singles.emplace_back(det, std::move(obj));
                continue;
            }
            auto& p = tracked[det.track_id];
            p.obj.track_id = det.track_id;
            for (const auto& s : p.obj.samples) {
                if (s.frame_id == det.frame_id) {
                    throw ValidationError("duplicate detection for track " + std::to_string(det.track_id) +
                                          " in frame " + std::to_string(det.frame_id));
                }
            }
            p.obj.samples.push_back(sample);
            p.labels.push_back(det.class_label);
            if (sign && (!p.obj.sign || sign->score > p.obj.sign->score)) p.obj.sign = sign;
        }
    }

    std::vector<TrackedObject> out;
    for (auto& [id, p] : tracked) {
        // Order samples by frame; keep labels aligned for the vote.
        std::vector<std::size_t> order(p.obj.samples.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return p.obj.samples[a].frame_id < p.obj.samples[b].frame_id; });
        std::vector<FrameSample> samples;
        std::vector<std::string> labels;
        for (std::size_t i : order) {
            samples.push_back(p.obj.samples[i]);
            labels.push_back(p.labels[i]);
        }
        p.obj.samples = std::move(samples);

        // Most frequent label; ties go to the one seen first.
        std::string best;
        std::size_t best_count = 0;
        for (const auto& l : labels) {
            const auto n = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
            if (n > best_count) {
                best = l;
                best_count = n;
            }
        }
        p.obj.class_label = best;
        out.push_back(std::move(p.obj));
    }

    std::stable_sort(singles.begin(), singles.end(), [](const auto& a, const auto& b) {
        const auto& x = a.first;
        const auto& y = b.first;
        return std::tie(x.frame_id, x.class_label, x.bbox.x_min, x.bbox.y_min, x.bbox.x_max, x.bbox.y_max) <
               std::tie(y.frame_id, y.class_label, y.bbox.x_min, y.bbox.y_min, y.bbox.x_max, y.bbox.y_max);
    });
    for (auto& s : singles) out.push_back(std::move(s.second));
    return out;
}

TrackedObject annotate_traffic_light(TrackedObject obj, const std::string& state, std::optional<std::uint32_t> frame_id) {
    if (obj.class_label != kTrafficLight) {
        throw ValidationError("traffic light state given for track " + std::to_string(obj.track_id) + " of class '" +
                              obj.class_label + "'");
    }
    bool hit = false;
    for (auto& s : obj.samples) {
        if (!frame_id || s.frame_id == *frame_id) {
            s.light_state = state;
            hit = true;
        }
    }
    if (!hit) {
        throw ValidationError("track " + std::to_string(obj.track_id) + " has no sample in frame " +
                              std::to_string(frame_id.value_or(0)));
    }
    return obj;
}

void apply_light_states(std::vector<TrackedObject>& tracks, const std::vector<LightStateRecord>& records) {
    for (const auto& rec : records) {
        TrackedObject* target = nullptr;
        for (auto& t : tracks) {
            if (t.track_id != rec.track_id) continue;
            const bool in_frame = std::any_of(t.samples.begin(), t.samples.end(),
                                              [&](const FrameSample& s) { return s.frame_id == rec.frame_id; });
            if (!in_frame) continue;
            if (target) {
                throw ValidationError("light state for track " + std::to_string(rec.track_id) + " in frame " +
                                      std::to_string(rec.frame_id) + " is ambiguous");
            }
            target = &t;
        }
        if (!target) {
            throw ValidationError("light state for unknown track " + std::to_string(rec.track_id) + " in frame " +
                                  std::to_string(rec.frame_id));
        }
        *target = annotate_traffic_light(std::move(*target), rec.state, rec.frame_id);
    }
}

std::string build_prompt(const std::vector<TrackedObject>& scene, const std::string& question,
                         const std::string& task_preamble) {
    if (question.empty()) throw PreconditionError("prompt question is empty");

    struct Line {
        std::uint32_t frame;
        std::int64_t track;
        std::string text;
    };
    std::vector<Line> lines;
    for (const auto& obj : scene) {
        for (const auto& s : obj.samples) {
            char depth[64];
            std::snprintf(depth, sizeof(depth), "%.2f", s.depth);
            std::string text = "Frame " + std::to_string(s.frame_id) + ": " + obj.class_label + " (id " +
                               std::to_string(obj.track_id) + ") at relative depth " + depth;
            if (obj.class_label == kTrafficLight) text += ", state " + s.light_state.value_or("unknown");
            if (obj.sign) text += ", sign " + obj.sign->category + ": " + obj.sign->description;
            lines.push_back({s.frame_id, obj.track_id, std::move(text)});
        }
    }
    std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
        return std::tie(a.frame, a.track, a.text) < std::tie(b.frame, b.track, b.text);
    });

    std::string out = task_preamble;
    out += "\n\nQuestion: " + question + "\n\nObjects across frames:\n";
    if (lines.empty()) out += "No objects detected.\n";
    for (const auto& l : lines) out += l.text + "\n";
    return out;
}

}  // namespace lvfuse::scene
