#include "htr/report.hpp"

namespace htr::report {

std::string mcs_key(double tau) { return "MCS@" + nlohmann::json(tau).dump(); }

VideoRecord evaluate_video(const metrics::MaskSequence& pred, const metrics::MaskSequence& gt,
                           std::optional<double> radius) {
  VideoRecord record;
  record.video_id = gt.video_id;
  record.scores = metrics::video_metrics(pred, gt, radius);
  for (std::size_t t = 0; t < gt.masks.size(); ++t) {
    const auto p = pred.masks[t].array() > 0.5f;
    const auto g = gt.masks[t].array() > 0.5f;
    record.intersections.push_back(static_cast<double>((p && g).count()));
    record.unions.push_back(static_cast<double>((p || g).count()));
  }
  return record;
}

nlohmann::json video_json(const VideoRecord& record, const std::vector<double>& thresholds) {
  nlohmann::json j;
  j["video"] = record.video_id;
  j["frames"] = record.scores.frame_j.size();
  j["J"] = record.scores.j;
  j["F"] = record.scores.f;
  j["JF"] = record.scores.jf;
  for (double tau : thresholds) {
    j[mcs_key(tau)] = metrics::mcs({record.scores.frame_j}, tau);
  }
  j["J_frames"] = record.scores.frame_j;
  j["F_frames"] = record.scores.frame_f;
  return j;
}

nlohmann::json aggregate_json(const MetricsReport& report) {
  require(!report.videos.empty(), ErrorCode::EmptyInput, "report has no videos");
  nlohmann::json j;
  j["video"] = kAggregateId;
  j["videos"] = report.videos.size();
  double j_sum = 0.0;
  double f_sum = 0.0;
  metrics::JTable table;
  std::vector<double> ious, inters, unions;
  for (const VideoRecord& v : report.videos) {
    j_sum += v.scores.j;
    f_sum += v.scores.f;
    table.push_back(v.scores.frame_j);
    ious.insert(ious.end(), v.scores.frame_j.begin(), v.scores.frame_j.end());
    inters.insert(inters.end(), v.intersections.begin(), v.intersections.end());
    unions.insert(unions.end(), v.unions.begin(), v.unions.end());
  }
  const auto n = static_cast<double>(report.videos.size());
  j["J"] = j_sum / n;
  j["F"] = f_sum / n;
  j["JF"] = (j_sum / n + f_sum / n) / 2.0;
  for (double tau : report.mcs_thresholds) j[mcs_key(tau)] = metrics::mcs(table, tau);
  if (report.a2d) {
    const metrics::A2DScores a = metrics::a2d_metrics(ious, inters, unions);
    for (std::size_t k = 0; k < metrics::kPrecisionThresholds.size(); ++k) {
      j["P@" + nlohmann::json(metrics::kPrecisionThresholds[k]).dump()] = a.precision[k];
    }
    j["oIoU"] = a.overall_iou;
    j["mIoU"] = a.mean_iou;
    j["mAP"] = a.map;
  }
  return j;
}

std::string to_json_lines(const MetricsReport& report) {
  std::string out;
  for (const VideoRecord& v : report.videos) {
    out += video_json(v, report.mcs_thresholds).dump() + "\n";
  }
  out += aggregate_json(report).dump() + "\n";
  return out;
}

}  // namespace htr::report
