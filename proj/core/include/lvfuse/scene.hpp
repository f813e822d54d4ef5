#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lvfuse/tensor.hpp"

namespace lvfuse::scene {

inline constexpr double kDefaultIouThreshold = 0.35;
inline constexpr double kDefaultSignThreshold = 0.6;
inline constexpr std::size_t kSignEmbeddingDim = 512;
inline constexpr std::size_t kViewsPerSign = 3;
inline constexpr double kCanonicalReferenceDepth = 1.0;
inline constexpr std::int64_t kUntracked = -1;

inline const std::string kTrafficLight = "traffic light";
inline const std::string kTrafficSign = "traffic sign";

struct BBox {
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    bool valid() const noexcept { return x_min < x_max && y_min < y_max; }
    double area() const noexcept { return (x_max - x_min) * (y_max - y_min); }
    bool operator==(const BBox&) const = default;
};

enum class DetectionSource { grounded, detector };

// Run of consecutive pixels in row-major order.
struct PixelRun {
    std::uint32_t start = 0;
    std::uint32_t length = 0;
    bool operator==(const PixelRun&) const = default;
};

struct Detection2D {
    std::uint32_t frame_id = 0;
    BBox bbox;
    std::string class_label;
    DetectionSource source = DetectionSource::grounded;
    std::int64_t track_id = kUntracked;
    std::optional<std::vector<PixelRun>> mask;
    double confidence = 1.0;
    // Crop embedding for sign classification, produced upstream.
    std::optional<std::vector<float>> embedding;

    bool operator==(const Detection2D&) const = default;
};

struct Pixel {
    std::uint32_t x = 0, y = 0;
    bool operator==(const Pixel&) const = default;
};

// Monocular relative depth map with two ego-hood reference pixels.
struct DepthFrame {
    std::uint32_t frame_id = 0;
    std::uint32_t width = 0, height = 0;
    std::vector<float> depth;  // row-major
    Pixel reference_a, reference_b;

    float at(std::uint32_t x, std::uint32_t y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
    // Checks sizes, positivity and reference placement.
    void validate() const;
};

struct FrameSample {
    std::uint32_t frame_id = 0;
    double depth = 0;
    std::optional<std::string> light_state;
    bool operator==(const FrameSample&) const = default;
};

struct SignMatch {
    std::size_t sign_index = 0;
    std::string category;
    std::string description;
    double score = 0;
    bool operator==(const SignMatch&) const = default;
};

struct TrackedObject {
    std::int64_t track_id = kUntracked;
    std::string class_label;
    std::vector<FrameSample> samples;  // strictly increasing frame ids
    std::optional<SignMatch> sign;
    bool operator==(const TrackedObject&) const = default;
};

struct SignEntry {
    std::string category;
    std::string description;
    bool operator==(const SignEntry&) const = default;
};

// N signs, each with three consecutive unit-norm embedding rows (the sign
// and two perspective views).
class SignDatabase {
public:
    SignDatabase(std::vector<SignEntry> entries, Tensor2D embeddings, double threshold = kDefaultSignThreshold);

    // Normalizes raw rows to unit length before constructing.
    static SignDatabase from_raw(std::vector<SignEntry> entries, Tensor2D raw_embeddings,
                                 double threshold = kDefaultSignThreshold);

    const std::vector<SignEntry>& entries() const noexcept { return entries_; }
    const Tensor2D& embeddings() const noexcept { return embeddings_; }
    double threshold() const noexcept { return threshold_; }
    void set_threshold(double t) noexcept { threshold_ = t; }

private:
    std::vector<SignEntry> entries_;
    Tensor2D embeddings_;
    double threshold_;
};

double iou(const BBox& a, const BBox& b);

// Greedy highest-IoU matching between the two sources of one frame.
// Matched grounded detections adopt the detector class when IoU is strictly
// above `threshold`; unmatched detector boxes are appended untracked.
std::vector<Detection2D> merge_detections(const std::vector<Detection2D>& grounded,
                                          const std::vector<Detection2D>& detector,
                                          double threshold = kDefaultIouThreshold);

// Scale that maps the hood reference depth gap to a constant across frames.
double normalize_depth(const DepthFrame& frame);

// Mean depth under the mask, or the bbox-center pixel without (or with an
// empty) mask, times `scale`.
double object_depth(const Detection2D& det, const DepthFrame& frame, double scale);

// Cosine retrieval against every database row. Returns the best row's sign
// when its score is strictly above the database threshold.
std::optional<SignMatch> classify_sign(std::span<const float> crop_embedding, const SignDatabase& db);

// Groups merged detections by track id and attaches normalized depths.
// Untracked detections become single-frame objects. When `signs` is given,
// traffic-sign detections carrying an embedding are classified and each
// track keeps its best-scoring match.
std::vector<TrackedObject> build_tracks(const std::vector<std::vector<Detection2D>>& frames,
                                        const std::map<std::uint32_t, DepthFrame>& depths,
                                        const SignDatabase* signs = nullptr);

// Stores a state reported for a traffic light, for one frame or, with no
// frame, for every sample of the track.
TrackedObject annotate_traffic_light(TrackedObject obj, const std::string& state,
                                     std::optional<std::uint32_t> frame_id = std::nullopt);

struct LightStateRecord {
    std::uint32_t frame_id = 0;
    std::int64_t track_id = kUntracked;
    std::string state;
};

void apply_light_states(std::vector<TrackedObject>& tracks, const std::vector<LightStateRecord>& records);

extern const std::string kDefaultTaskPreamble;

// Three blocks separated by blank lines: task preamble, question, and one
// line per object per frame ordered by frame then track id.
std::string build_prompt(const std::vector<TrackedObject>& scene, const std::string& question,
                         const std::string& task_preamble = kDefaultTaskPreamble);

}  // namespace lvfuse::scene
