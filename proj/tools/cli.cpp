#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>

#include "htr/config.hpp"
#include "htr/io.hpp"
#include "htr/losses.hpp"
#include "htr/metrics.hpp"
#include "htr/oracle.hpp"
#include "htr/parallel.hpp"
#include "htr/report.hpp"
#include "htr/selection.hpp"
#include "htr/synth.hpp"

namespace htr::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch:
    case ErrorCode::FrameMismatch:
    case ErrorCode::EmptyAxis:
    case ErrorCode::EmptyInput:
    case ErrorCode::EmptyReferenceSet:
    case ErrorCode::GlobalTokenUndefined:
    case ErrorCode::MissingReferenceMask:
      return kExitMismatch;
    default:
      return kExitIo;
  }
}

std::vector<double> read_scores(const fs::path& path) {
  const io::TensorFile t = io::read_tensor(path);
  require(t.dims.size() == 1 || (t.dims.size() == 2 && t.dims[0] == 1), ErrorCode::ShapeMismatch,
          path.string() + ": scores must be a rank-1 tensor");
  return {t.data.begin(), t.data.end()};
}

oracle::Rows to_rows(const Tensor& m) {
  oracle::Rows rows(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) rows[r].push_back(m(r, c));
  }
  return rows;
}

std::vector<fs::path> subdirectories(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct EvaluateArgs {
  std::string pred_dir;
  std::string gt_dir;
  std::vector<double> thresholds{metrics::kDefaultMcsThresholds.begin(),
                                 metrics::kDefaultMcsThresholds.end()};
  bool a2d = false;
  std::optional<double> tolerance;
  std::size_t jobs = 1;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  cfg.mcs_thresholds = a.thresholds;
  cfg.boundary_radius = a.tolerance;
  cfg.jobs = a.jobs;
  cfg.validate();
  require(fs::is_directory(a.gt_dir), ErrorCode::IoError, a.gt_dir + " is not a directory");
  require(fs::is_directory(a.pred_dir), ErrorCode::IoError, a.pred_dir + " is not a directory");

  std::vector<std::pair<fs::path, fs::path>> videos;
  const auto gt_videos = subdirectories(a.gt_dir);
  if (gt_videos.empty()) {
    videos.emplace_back(a.pred_dir, a.gt_dir);
  } else {
    for (const fs::path& g : gt_videos) {
      const fs::path p = fs::path(a.pred_dir) / g.filename();
      require(fs::is_directory(p), ErrorCode::IoError,
              "no prediction directory for video '" + g.filename().string() + "'");
      videos.emplace_back(p, g);
    }
  }

  report::MetricsReport rep;
  rep.mcs_thresholds = cfg.mcs_thresholds;
  rep.a2d = a.a2d;
  rep.videos.resize(videos.size());
  parallel_for(videos.size(), cfg.jobs, [&](std::size_t i) {
    metrics::MaskSequence pred = io::read_mask_dir(videos[i].first);
    metrics::MaskSequence gt = io::read_mask_dir(videos[i].second);
    pred.video_id = gt.video_id;
    rep.videos[i] = report::evaluate_video(pred, gt, cfg.boundary_radius);
  });
  out << report::to_json_lines(rep);
  err << "evaluated " << videos.size() << " video(s)\n";
  return kExitOk;
}

struct PropagateArgs {
  std::string features;
  std::string ref_masks;
  std::string scores;
  double ratio = selection::kDefaultRatio;
  std::string out_dir;
  std::string weights_dir;
  std::uint64_t seed = 0;
  int mask_channels = memory::kDefaultMaskChannels;
  std::size_t clip_length = 0;
  std::string mode = "hybrid";
  std::size_t jobs = 1;
  std::string video_id;
};

int cmd_propagate(const PropagateArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  cfg.ratio = a.ratio;
  cfg.seed = a.seed;
  cfg.jobs = a.jobs;
  if (a.clip_length > 0) cfg.clip_length = a.clip_length;
  cfg.validate();

  selection::VideoBundle video;
  video.id = a.video_id.empty() ? fs::path(a.features).stem().string() : a.video_id;
  video.frames = io::to_feature_maps(io::read_tensor(a.features));
  const std::vector<double> scores = read_scores(a.scores);
  require(scores.size() == video.frames.size(), ErrorCode::FrameMismatch,
          std::to_string(scores.size()) + " scores for " + std::to_string(video.frames.size()) +
              " frames");

  std::map<int, Tensor> masks;
  require(fs::is_directory(a.ref_masks), ErrorCode::IoError, a.ref_masks + " is not a directory");
  for (const auto& entry : fs::directory_iterator(a.ref_masks)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".pgm") continue;
    masks[io::frame_index_from_name(entry.path())] = io::read_mask(entry.path());
  }
  for (std::size_t t = 0; t < video.frames.size(); ++t) {
    selection::ScoredFrame sf;
    sf.index = static_cast<int>(t);
    sf.score = scores[t];
    if (auto it = masks.find(sf.index); it != masks.end()) sf.reference_mask = it->second;
    video.scored.push_back(std::move(sf));
  }

  const Eigen::Index channels = video.frames.front().channels();
  const memory::MemoryWeights weights =
      a.weights_dir.empty() ? memory::MemoryWeights::random(static_cast<int>(channels),
                                                            a.mask_channels, cfg.seed)
                            : io::read_memory_weights(a.weights_dir);

  selection::CollaborationOptions opts;
  opts.ratio = cfg.ratio;
  opts.clip_length = cfg.clip_length;
  opts.jobs = cfg.jobs;
  opts.mode = a.mode == "local"  ? selection::PropagationMode::LocalOnly
              : a.mode == "none" ? selection::PropagationMode::NoMemory
                                 : selection::PropagationMode::Hybrid;
  const selection::CollaborationResult result = selection::collaborate(video, weights, opts);

  const fs::path out_dir(a.out_dir);
  for (std::size_t t = 0; t < video.frames.size(); ++t) {
    const std::string name = io::frame_file_name(video.scored[t].index);
    io::write_mask(out_dir / "mask" / name, result.masks.masks[t]);
    io::write_mask(out_dir / "soft" / name, result.soft[t]);
  }
  json summary;
  summary["video"] = video.id;
  summary["frames"] = video.frames.size();
  summary["references"] = result.reference_frames;
  out << summary.dump() << "\n";
  err << "propagated " << video.frames.size() - result.reference_frames.size()
      << " target frame(s) from " << result.reference_frames.size() << " reference(s)\n";
  return kExitOk;
}

int cmd_select(const std::string& scores_path, double ratio, std::ostream& out) {
  const std::vector<double> scores = read_scores(scores_path);
  out << json(selection::select_reference_frames(scores, ratio)).dump() << "\n";
  return kExitOk;
}

int cmd_mcs(const std::string& jtable, double tau, std::ostream& out) {
  out << json(metrics::mcs(io::read_jtable(jtable), tau)).dump() << "\n";
  return kExitOk;
}

int cmd_synth(const synth::SynthConfig& cfg, int mask_channels, const std::string& out_dir,
              std::ostream& err) {
  const synth::Scenario scenario = synth::synth_scenario(cfg);
  synth::write_scenario(out_dir, scenario);
  io::write_memory_weights(fs::path(out_dir) / "weights",
                           memory::MemoryWeights::random(cfg.channels, mask_channels, cfg.seed));
  err << "wrote " << cfg.frames << " frame(s) of " << cfg.height << "x" << cfg.width << "x"
      << cfg.channels << " features to " << out_dir << "\n";
  return kExitOk;
}

int cmd_oracle(const std::string& op, const std::vector<std::string>& in, double tau,
               std::optional<double> radius, std::ostream& out) {
  auto need = [&](std::size_t n) {
    require(in.size() == n, ErrorCode::InvalidArgument,
            "oracle --op " + op + " takes " + std::to_string(n) + " --in file(s)");
  };
  json result;
  if (op == "readout") {
    need(3);
    const auto r = oracle::readout(to_rows(io::to_matrix(io::read_tensor(in[0]))),
                                   to_rows(io::to_matrix(io::read_tensor(in[1]))),
                                   to_rows(io::to_matrix(io::read_tensor(in[2]))));
    result["affinity"] = r.affinity;
    result["values"] = r.values;
  } else if (op == "aggregate") {
    need(2);
    const io::TensorFile probs = io::read_tensor(in[1]);
    const auto t = oracle::aggregate(to_rows(io::to_matrix(io::read_tensor(in[0]))),
                                     {probs.data.begin(), probs.data.end()}, tau);
    result["defined"] = t.defined;
    result["token"] = t.value;
  } else if (op == "hungarian") {
    need(1);
    const auto a = oracle::brute_force_assignment(to_rows(io::to_matrix(io::read_tensor(in[0]))));
    result["assignment"] = a.row_to_col;
    result["cost"] = a.cost;
  } else if (op == "giou") {
    need(1);
    const Tensor boxes = io::to_matrix(io::read_tensor(in[0]));
    require(boxes.rows() == 2 && boxes.cols() == 4, ErrorCode::ShapeMismatch,
            "giou oracle expects a 2x4 tensor of boxes");
    const BoxXYXY a{boxes(0, 0), boxes(0, 1), boxes(0, 2), boxes(0, 3)};
    const BoxXYXY b{boxes(1, 0), boxes(1, 1), boxes(1, 2), boxes(1, 3)};
    result["iou"] = oracle::iou(a, b);
    result["giou"] = oracle::giou(a, b);
    result["giou_loss"] = 1.0 - oracle::giou(a, b);
  } else if (op == "jaccard" || op == "boundary") {
    need(2);
    const Tensor p = io::read_mask(in[0]);
    const Tensor g = io::read_mask(in[1]);
    require(p.rows() == g.rows() && p.cols() == g.cols(), ErrorCode::ShapeMismatch,
            "masks differ in size");
    if (op == "jaccard") {
      result = oracle::jaccard(to_rows(p), to_rows(g));
    } else {
      const double r = radius.value_or(metrics::boundary_radius(g.rows(), g.cols()));
      result = oracle::boundary_f(to_rows(p), to_rows(g), r);
    }
  } else if (op == "mcs") {
    need(1);
    result = oracle::mcs(io::read_jtable(in[0]), tau);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown oracle op '" + op + "'");
  }
  out << result.dump() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid-memory propagation, reference selection and segmentation metrics"};
  app.name("htr");
  app.require_subcommand(1);

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score predicted masks against ground truth");
  evaluate->add_option("--pred-dir", ev.pred_dir, "Predicted masks")->required();
  evaluate->add_option("--gt-dir", ev.gt_dir, "Ground-truth masks")->required();
  evaluate->add_option("--mcs-thresholds", ev.thresholds, "Comma-separated MCS thresholds")
      ->delimiter(',');
  evaluate->add_flag("--a2d", ev.a2d, "Also report P@K, oIoU, mIoU and mAP");
  evaluate->add_option("--tolerance", ev.tolerance, "Boundary match radius in pixels");
  evaluate->add_option("--jobs", ev.jobs, "Videos evaluated concurrently")->envname("HTR_JOBS");

  PropagateArgs pr;
  auto* propagate = app.add_subcommand("propagate", "Segment target frames from reference masks");
  propagate->add_option("--features", pr.features, "T x H x W x C feature tensor")->required();
  propagate->add_option("--ref-masks", pr.ref_masks, "Directory of reference PGM masks")->required();
  propagate->add_option("--scores", pr.scores, "Per-frame scores tensor")->required();
  propagate->add_option("--ratio", pr.ratio, "Fraction of frames memorized");
  propagate->add_option("--out", pr.out_dir, "Output directory")->required();
  propagate->add_option("--weights", pr.weights_dir, "Directory with memory weights");
  propagate->add_option("--seed", pr.seed, "Seed for generated weights")->envname("HTR_SEED");
  propagate->add_option("--mask-channels", pr.mask_channels, "Mask feature channels");
  propagate->add_option("--clip-length", pr.clip_length, "Frames per independent clip");
  propagate->add_option("--mode", pr.mode, "hybrid, local or none")
      ->check(CLI::IsMember({"hybrid", "local", "none"}));
  propagate->add_option("--jobs", pr.jobs, "Target frames propagated concurrently")
      ->envname("HTR_JOBS");
  propagate->add_option("--video-id", pr.video_id, "Identifier reported on stdout");

  std::string select_scores;
  double select_ratio = selection::kDefaultRatio;
  auto* select = app.add_subcommand("select", "Print the selected reference frame indices");
  select->add_option("--scores", select_scores, "Per-frame scores tensor")->required();
  select->add_option("--ratio", select_ratio, "Fraction of frames memorized");

  std::string jtable;
  double tau = 0.5;
  auto* mcs = app.add_subcommand("mcs", "Mask consistency score of a Jaccard table");
  mcs->add_option("--jtable", jtable, "CSV, one video per row")->required();
  mcs->add_option("--tau", tau, "Threshold");

  synth::SynthConfig sc;
  int synth_mask_channels = memory::kDefaultMaskChannels;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic separable scenario");
  synth_cmd->add_option("--seed", sc.seed, "Scenario seed")->envname("HTR_SEED");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--frames", sc.frames, "Frame count");
  synth_cmd->add_option("--height", sc.height, "Feature rows");
  synth_cmd->add_option("--width", sc.width, "Feature columns");
  synth_cmd->add_option("--channels", sc.channels, "Feature channels");
  synth_cmd->add_option("--separation", sc.separation, "Cluster separation");
  synth_cmd->add_option("--noise", sc.noise, "Feature noise scale");
  synth_cmd->add_option("--mask-channels", synth_mask_channels, "Mask channels of written weights");

  std::string op;
  std::vector<std::string> inputs;
  double oracle_tau = 0.5;
  std::optional<double> radius;
  auto* oracle_cmd = app.add_subcommand("oracle", "Brute-force reference output");
  oracle_cmd->add_option("--op", op, "readout, aggregate, hungarian, giou, jaccard, boundary, mcs")
      ->required();
  oracle_cmd->add_option("--in", inputs, "Input file(s)")->required();
  oracle_cmd->add_option("--tau", oracle_tau, "Threshold for aggregate and mcs");
  oracle_cmd->add_option("--radius", radius, "Boundary match radius");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitIo;
  }

  try {
    if (*evaluate) return cmd_evaluate(ev, out, err);
    if (*propagate) return cmd_propagate(pr, out, err);
    if (*select) return cmd_select(select_scores, select_ratio, out);
    if (*mcs) return cmd_mcs(jtable, tau, out);
    if (*synth_cmd) return cmd_synth(sc, synth_mask_channels, synth_out, err);
    if (*oracle_cmd) return cmd_oracle(op, inputs, oracle_tau, radius, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitIo;
}

}  // namespace htr::cli
