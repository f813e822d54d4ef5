#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lvfuse/scene.hpp"

// File formats for the scene pipeline.
//
// Detections: JSON lines, one record per detection:
//   {"frame_id":1,"source":"grounded","track_id":3,"class":"car",
//    "bbox":[x_min,y_min,x_max,y_max],"confidence":0.9,
//    "mask_rle":[[start,length],...],"embedding":[...512 floats...]}
// mask_rle and embedding are optional. Blank lines are ignored.
//
// Depth frame: little-endian u32 frame_id, width, height, ref_a.x, ref_a.y,
// ref_b.x, ref_b.y, then width*height f32 values, row-major.
//
// Sign database: little-endian u32 N, u32 dim (512), then 3N rows of dim
// f32 values; sidecar text file with N lines "category<TAB>description".
//
// Traffic light states: JSON lines {"frame_id":1,"track_id":7,"state":"green"}.
namespace lvfuse::scene {

Detection2D parse_detection(const std::string& line, std::size_t line_no = 0);
std::vector<Detection2D> read_detections(const std::filesystem::path& path);

DepthFrame read_depth_frame(const std::filesystem::path& path);
void write_depth_frame(const DepthFrame& frame, const std::filesystem::path& path);
// Every *.depth file in a directory, keyed by frame id.
std::map<std::uint32_t, DepthFrame> read_depth_dir(const std::filesystem::path& dir);

SignDatabase load_sign_database(const std::filesystem::path& matrix_path, const std::filesystem::path& table_path,
                                double threshold = kDefaultSignThreshold);
void save_sign_database(const SignDatabase& db, const std::filesystem::path& matrix_path,
                        const std::filesystem::path& table_path);

std::vector<LightStateRecord> read_light_states(const std::filesystem::path& path);

// Splits detections per frame and source, merges them, builds tracks and
// applies light states.
std::vector<TrackedObject> assemble_scene(const std::vector<Detection2D>& detections,
                                          const std::map<std::uint32_t, DepthFrame>& depths, const SignDatabase* signs,
                                          const std::vector<LightStateRecord>& lights,
                                          double iou_threshold = kDefaultIouThreshold);

}  // namespace lvfuse::scene
