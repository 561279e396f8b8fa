#pragma once

// JSON-lines evaluation report: one object per video followed by one
// aggregate object whose "video" field is "__aggregate__".
//
// Per-video keys: video, frames, J, F, JF, J_frames, F_frames and one
// "MCS@<tau>" entry (0 or 1) per threshold. The aggregate carries videos,
// mean J/F/JF, MCS@<tau> over all videos and, when requested, P@0.5 ... P@0.9,
// oIoU, mIoU and mAP computed with every frame as one sample.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "htr/metrics.hpp"

namespace htr::report {

inline constexpr const char* kAggregateId = "__aggregate__";

struct VideoRecord {
  std::string video_id;
  metrics::VideoScores scores;
  std::vector<double> intersections;
  std::vector<double> unions;
};

struct MetricsReport {
  std::vector<VideoRecord> videos;
  std::vector<double> mcs_thresholds;
  bool a2d = false;
};

/// "MCS@0.5" style key; the threshold uses the shortest round-trip form.
std::string mcs_key(double tau);

VideoRecord evaluate_video(const metrics::MaskSequence& pred, const metrics::MaskSequence& gt,
                           std::optional<double> radius = {});

nlohmann::json video_json(const VideoRecord& record, const std::vector<double>& thresholds);
nlohmann::json aggregate_json(const MetricsReport& report);

/// Every line of the report, newline-terminated.
std::string to_json_lines(const MetricsReport& report);

}  // namespace htr::report
