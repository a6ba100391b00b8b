// Copyright 2026 The laneval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "laneval/bev_raster.hpp"
#include "laneval/losses.hpp"
#include "laneval/metrics.hpp"
#include "laneval/scene_io.hpp"
#include "laneval/synthetic.hpp"
#include "laneval/types.hpp"

namespace laneval::cli {

// Exit codes: 0 success, 1 internal error, 2 validation / input failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitValidation = 2;

namespace detail {

namespace fs = std::filesystem;

inline std::vector<Frame> flatten_scenes(std::vector<SceneArchive> scenes) {
  std::vector<Frame> frames;
  for (SceneArchive& scene : scenes)
    for (Frame& frame : scene.frames) frames.push_back(std::move(frame));
  return frames;
}

inline void check_scene_alignment(const std::vector<SceneArchive>& gt,
                                  const std::vector<SceneArchive>& pred) {
  if (gt.size() != pred.size()) {
    std::ostringstream os;
    os << "scene count mismatch: " << gt.size() << " ground-truth vs "
       << pred.size() << " prediction scenes";
    throw io_error(io_error::Kind::kValidation, os.str());
  }
  for (std::size_t s = 0; s < gt.size(); ++s) {
    if (gt[s].scene_id != pred[s].scene_id) {
      std::ostringstream os;
      os << "scene id mismatch at position " << s << ": '" << gt[s].scene_id
         << "' vs '" << pred[s].scene_id << "'";
      throw io_error(io_error::Kind::kValidation, os.str());
    }
  }
}

inline void add_metric_flags(CLI::App* cmd, MetricConfig* cfg) {
  cmd->add_option("--thresholds-frechet", cfg->frechet_thresholds,
                  "Frechet match thresholds in meters (comma list)")
      ->delimiter(',');
  cmd->add_option("--thresholds-chamfer", cfg->chamfer_thresholds,
                  "Chamfer match thresholds in meters (comma list)")
      ->delimiter(',');
  cmd->add_option("--thresholds-iou", cfg->iou_thresholds,
                  "IoU match thresholds (comma list)")
      ->delimiter(',');
  cmd->add_option("--workers", cfg->workers, "Worker threads for frame-parallel work");
  cmd->add_flag("--planar", cfg->planar_distances,
                "Project all distances onto the BEV plane");
}

inline void add_grid_flags(CLI::App* cmd, BevGridSpec* grid) {
  cmd->add_option("--bev-rows", grid->rows, "BEV raster rows (x axis)");
  cmd->add_option("--bev-cols", grid->cols, "BEV raster cols (y axis)");
}

// --config is expanded before CLI11 sees the arguments; this stub only
// documents the flag in --help.
inline void add_config_flag(CLI::App* cmd) {
  cmd->add_option("--config")
      ->description("Flat key=value file mirroring the long flag names")
      ->expected(1);
}

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// Expands "--config FILE" into --key=value tokens for every key the command
// line does not set explicitly; command-line flags always win.
inline std::vector<std::string> apply_config_file(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i),
                 args.begin() + static_cast<long>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<long>(i));
      break;
    }
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw io_error(io_error::Kind::kIo, "cannot open config file: " + path);
  std::string line;
  std::vector<std::string> extra;
  while (std::getline(in, line)) {
    const std::string entry = trim(line);
    if (entry.empty() || entry[0] == '#') continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw io_error(io_error::Kind::kParse,
                     path + ": expected key=value, got '" + entry + "'");
    const std::string key = trim(entry.substr(0, eq));
    const std::string value = trim(entry.substr(eq + 1));
    if (key.empty())
      throw io_error(io_error::Kind::kParse, path + ": empty key in '" + entry + "'");
    const std::string flag = "--" + key;
    bool present = false;
    for (const std::string& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) present = true;
    if (!present) extra.push_back(flag + "=" + value);
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

inline std::string scene_file_name(const std::string& dir, int index) {
  std::ostringstream os;
  os << dir << "/scene_" << std::setw(4) << std::setfill('0') << index
     << ".json";
  return os.str();
}

struct LossTotals {
  CompositeLossReport sum;
  std::size_t frames = 0;

  void add(const CompositeLossReport& r) {
    sum.lane.cls += r.lane.cls;
    sum.lane.reg += r.lane.reg;
    sum.lane.type += r.lane.type;
    sum.lane.mask += r.lane.mask;
    sum.lane.dice += r.lane.dice;
    sum.area.cls += r.area.cls;
    sum.area.reg += r.area.reg;
    sum.area.dir += r.area.dir;
    sum.area.seg += r.area.seg;
    sum.traffic.cls += r.traffic.cls;
    sum.traffic.reg += r.traffic.reg;
    sum.traffic.iou += r.traffic.iou;
    sum.topo_ll_focal += r.topo_ll_focal;
    sum.topo_lt_focal += r.topo_lt_focal;
    sum.l_ls += r.l_ls;
    sum.l_a += r.l_a;
    sum.l_te += r.l_te;
    sum.l_ll += r.l_ll;
    sum.l_lt += r.l_lt;
    sum.total += r.total;
    ++frames;
  }

  CompositeLossReport mean() const {
    CompositeLossReport m = sum;
    if (frames == 0) return m;
    const double n = static_cast<double>(frames);
    for (double* v :
         {&m.lane.cls, &m.lane.reg, &m.lane.type, &m.lane.mask, &m.lane.dice,
          &m.area.cls, &m.area.reg, &m.area.dir, &m.area.seg, &m.traffic.cls,
          &m.traffic.reg, &m.traffic.iou, &m.topo_ll_focal, &m.topo_lt_focal,
          &m.l_ls, &m.l_a, &m.l_te, &m.l_ll, &m.l_lt, &m.total})
      *v /= n;
    return m;
  }
};

inline std::string loss_table(const CompositeLossReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  os << "term            value\n";
  os << "----            --------\n";
  os << "lane.cls        " << r.lane.cls << "\n";
  os << "lane.reg        " << r.lane.reg << "\n";
  os << "lane.type       " << r.lane.type << "\n";
  os << "lane.mask       " << r.lane.mask << "\n";
  os << "lane.dice       " << r.lane.dice << "\n";
  os << "area.cls        " << r.area.cls << "\n";
  os << "area.reg        " << r.area.reg << "\n";
  os << "area.dir        " << r.area.dir << "\n";
  os << "area.seg        " << r.area.seg << "\n";
  os << "traffic.cls     " << r.traffic.cls << "\n";
  os << "traffic.reg     " << r.traffic.reg << "\n";
  os << "traffic.iou     " << r.traffic.iou << "\n";
  os << "L_ls            " << r.l_ls << "\n";
  os << "L_a             " << r.l_a << "\n";
  os << "L_te            " << r.l_te << "\n";
  os << "L_ll            " << r.l_ll << "\n";
  os << "L_lt            " << r.l_lt << "\n";
  os << "total           " << r.total << "\n";
  return os.str();
}

inline nlohmann::json loss_to_json(const CompositeLossReport& r) {
  nlohmann::json out;
  out["lane"] = {{"cls", r.lane.cls}, {"reg", r.lane.reg}, {"type", r.lane.type},
                 {"mask", r.lane.mask}, {"dice", r.lane.dice}};
  out["area"] = {{"cls", r.area.cls}, {"reg", r.area.reg}, {"dir", r.area.dir},
                 {"seg", r.area.seg}};
  out["traffic"] = {{"cls", r.traffic.cls}, {"reg", r.traffic.reg},
                    {"iou", r.traffic.iou}};
  out["weighted"] = {{"l_ls", r.l_ls}, {"l_a", r.l_a}, {"l_te", r.l_te},
                     {"l_ll", r.l_ll}, {"l_lt", r.l_lt}, {"total", r.total}};
  return out;
}

inline nlohmann::json expected_to_json(const ExpectedOutcome& e) {
  nlohmann::json out;
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) out[key] = *v;
  };
  put("det_l", e.det_l);
  put("det_a", e.det_a);
  put("det_t", e.det_t);
  put("top_ll", e.top_ll);
  put("top_lt", e.top_lt);
  put("frechet_ap_family", e.frechet_ap_family);
  put("chamfer_ap_family", e.chamfer_ap_family);
  put("olus", e.olus);
  out["notes"] = e.notes;
  return out;
}

}  // namespace detail

namespace detail {

inline int execute(int argc, const char* const* argv) {
  CLI::App app{"Batch evaluation and geometry toolkit for mapless driving perception"};
  app.name("laneval");
  app.require_subcommand(1);

  std::function<int()> action;

  // ---- eval ----------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "eval", "Score predictions against ground truth and write a report");
    auto gt_path = std::make_shared<std::string>();
    auto pred_path = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>("report.json");
    auto format = std::make_shared<std::string>("json");
    auto cfg = std::make_shared<MetricConfig>();
    auto grid = std::make_shared<BevGridSpec>();
    auto verbose = std::make_shared<bool>(false);
    cmd->add_option("--gt", *gt_path, "Ground-truth scene file or directory")
        ->required();
    cmd->add_option("--pred", *pred_path, "Prediction scene file or directory")
        ->required();
    cmd->add_option("--out", *out_path, "Report output path");
    cmd->add_option("--format", *format, "Report format")
        ->check(CLI::IsMember({"json", "table"}));
    cmd->add_flag("-v,--verbose", *verbose, "Print per-stage progress lines");
    detail::add_metric_flags(cmd, cfg.get());
    detail::add_grid_flags(cmd, grid.get());
    detail::add_config_flag(cmd);
    cmd->callback([=, &action] {
      action = [=] {
        cfg->require_valid();
        const auto gt_scenes = load_dataset(*gt_path, {.ground_truth = true});
        const auto pred_scenes = load_dataset(*pred_path, {.ground_truth = false});
        detail::check_scene_alignment(gt_scenes, pred_scenes);
        const std::vector<Frame> gt_frames = detail::flatten_scenes(gt_scenes);
        const std::vector<Frame> pred_frames = detail::flatten_scenes(pred_scenes);
        if (*verbose)
          std::cout << "loaded " << gt_scenes.size() << " scene(s), "
                    << gt_frames.size() << " frame(s)\n";
        const MetricsReport report = evaluate_dataset(pred_frames, gt_frames, *cfg);
        if (*verbose) std::cout << "evaluated " << gt_frames.size() << " frame(s)\n";
        write_report(report, *cfg, *out_path,
                     *format == "json" ? ReportFormat::kJson : ReportFormat::kTable);
        std::cout << report_to_table(report);
        std::cout << "report written to " << *out_path << "\n";
        return kExitOk;
      };
    });
  }

  // ---- rasterize -----------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "rasterize", "Render SD-map / lane / area masks as PGM and CSV");
    auto in_path = std::make_shared<std::string>();
    auto out_prefix = std::make_shared<std::string>();
    auto target = std::make_shared<std::string>("all");
    auto frame_index = std::make_shared<int>(0);
    auto grid = std::make_shared<BevGridSpec>();
    cmd->add_option("--in", *in_path, "Scene file")->required();
    cmd->add_option("--out", *out_prefix, "Output path prefix")->required();
    cmd->add_option("--target", *target, "Mask to render")
        ->check(CLI::IsMember({"sdmap", "lanes", "areas", "all"}));
    cmd->add_option("--frame", *frame_index, "Frame index within the scene");
    detail::add_grid_flags(cmd, grid.get());
    detail::add_config_flag(cmd);
    cmd->callback([=, &action] {
      action = [=] {
        grid->require_valid();
        const SceneArchive scene = load_scene(*in_path);
        if (*frame_index < 0 ||
            static_cast<std::size_t>(*frame_index) >= scene.frames.size())
          throw io_error(io_error::Kind::kValidation,
                         "frame index out of range: " + std::to_string(*frame_index));
        const Frame& frame = scene.frames[static_cast<std::size_t>(*frame_index)];

        auto emit = [&](const std::string& name, const BevMask& mask) {
          write_mask_pgm(mask, *out_prefix + "_" + name + ".pgm");
          write_mask_csv(mask, *out_prefix + "_" + name + ".csv");
          std::cout << name << ": " << mask.count_marked() << " cells\n";
        };
        if (*target == "sdmap" || *target == "all") {
          const auto& sd =
              scene.sd_maps[static_cast<std::size_t>(*frame_index)];
          if (!sd && *target == "sdmap")
            throw io_error(io_error::Kind::kValidation,
                           "scene frame has no sd_map");
          if (sd) emit("sdmap", rasterize_sdmap(*sd, *grid));
        }
        if (*target == "lanes" || *target == "all") {
          BevMask acc(*grid);
          for (const LaneSegment& ls : frame.lane_segments) {
            const BevMask m = lane_segment_mask(ls, *grid);
            for (std::size_t i = 0; i < acc.cells.size(); ++i)
              acc.cells[i] |= m.cells[i];
          }
          emit("lanes", acc);
        }
        if (*target == "areas" || *target == "all") {
          BevMask acc(*grid);
          for (const AreaInstance& a : frame.areas) {
            const BevMask m = area_boundary_mask(a, *grid);
            for (std::size_t i = 0; i < acc.cells.size(); ++i)
              acc.cells[i] |= m.cells[i];
          }
          emit("areas", acc);
        }
        return kExitOk;
      };
    });
  }

  // ---- synth ---------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "synth", "Generate deterministic synthetic scenes and perturbed predictions");
    auto out_path = std::make_shared<std::string>();
    auto pred_out = std::make_shared<std::string>();
    auto expected_out = std::make_shared<std::string>();
    auto scenes = std::make_shared<int>(1);
    auto layout = std::make_shared<std::string>("straight");
    auto scene_spec = std::make_shared<SceneSpec>();
    auto perturbation = std::make_shared<PerturbationSpec>();
    auto jitter_mode = std::make_shared<std::string>("rigid");
    auto cfg = std::make_shared<MetricConfig>();
    cmd->add_option("--out", *out_path, "Scene file, or directory when --scenes > 1")
        ->required();
    cmd->add_option("--scenes", *scenes, "Number of scene files");
    cmd->add_option("--frames", scene_spec->frames, "Frames per scene");
    cmd->add_option("--lanes", scene_spec->lanes, "Lane segments per frame");
    cmd->add_option("--areas", scene_spec->areas, "Areas per frame");
    cmd->add_option("--tes", scene_spec->traffic_elements,
                    "Traffic elements per frame");
    cmd->add_option("--layout", *layout, "Lane layout")
        ->check(CLI::IsMember({"straight", "arc"}));
    cmd->add_option("--seed", scene_spec->seed, "Base seed");
    cmd->add_option("--pred-out", *pred_out,
                    "Write perturbed predictions to this file/directory");
    cmd->add_option("--expected-out", *expected_out,
                    "Write the analytic expected-outcome summary (JSON)");
    cmd->add_option("--jitter-sigma", perturbation->point_jitter_sigma,
                    "Jitter magnitude in meters");
    cmd->add_option("--jitter-mode", *jitter_mode, "Jitter mode")
        ->check(CLI::IsMember({"rigid", "rigid-centerline", "noisy"}));
    cmd->add_option("--drop-rate", perturbation->drop_rate,
                    "Fraction of instances dropped per family");
    cmd->add_option("--fp-count", perturbation->false_positive_count,
                    "False-positive lanes injected per frame");
    cmd->add_option("--confidence-noise", perturbation->confidence_noise,
                    "Confidence noise amplitude");
    cmd->add_option("--topo-flip-rate", perturbation->topology_flip_rate,
                    "Fraction of true topology edges zeroed");
    detail::add_config_flag(cmd);
    cmd->callback([=, &action] {
      action = [=] {
        if (*scenes < 1)
          throw io_error(io_error::Kind::kValidation, "--scenes must be >= 1");
        scene_spec->layout =
            *layout == "arc" ? LaneLayout::kArc : LaneLayout::kStraight;
        perturbation->jitter_mode =
            *jitter_mode == "noisy"
                ? JitterMode::kPerPoint
                : (*jitter_mode == "rigid-centerline" ? JitterMode::kRigidCenterline
                                                      : JitterMode::kRigidInstance);
        const bool multi = *scenes > 1;
        if (multi) {
          std::filesystem::create_directories(*out_path);
          if (!pred_out->empty()) std::filesystem::create_directories(*pred_out);
        }
        nlohmann::json expected_all = nlohmann::json::array();
        for (int s = 0; s < *scenes; ++s) {
          SceneSpec spec = *scene_spec;
          spec.seed = scene_spec->seed + static_cast<std::uint64_t>(s);
          const SceneArchive gt = generate_scene(spec);
          write_scene(gt, multi ? detail::scene_file_name(*out_path, s) : *out_path);
          if (!pred_out->empty() || !expected_out->empty()) {
            PerturbationSpec p = *perturbation;
            p.seed = perturbation->seed + spec.seed;
            const PerturbResult result = perturb(gt, p, *cfg);
            if (!pred_out->empty())
              write_scene(result.predictions,
                          multi ? detail::scene_file_name(*pred_out, s) : *pred_out);
            expected_all.push_back(detail::expected_to_json(result.expected));
          }
        }
        if (!expected_out->empty()) {
          std::ofstream out(*expected_out, std::ios::binary);
          if (!out)
            throw io_error(io_error::Kind::kIo,
                           "cannot open for writing: " + *expected_out);
          out << (expected_all.size() == 1 ? expected_all[0] : expected_all).dump(2)
              << '\n';
        }
        std::cout << "wrote " << *scenes << " scene(s) to " << *out_path << "\n";
        return kExitOk;
      };
    });
  }

  // ---- loss-check ------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "loss-check", "Evaluate every training loss term on a frame pair set");
    auto gt_path = std::make_shared<std::string>();
    auto pred_path = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    auto weights = std::make_shared<LossWeights>();
    cmd->add_option("--gt", *gt_path, "Ground-truth scene file or directory")
        ->required();
    cmd->add_option("--pred", *pred_path, "Prediction scene file or directory")
        ->required();
    cmd->add_option("--out", *out_path, "Component table output (JSON)");
    auto verbose = std::make_shared<bool>(false);
    cmd->add_flag("-v,--verbose", *verbose, "Print per-stage progress lines");
    detail::add_config_flag(cmd);
    cmd->callback([=, &action] {
      action = [=] {
        const auto gt_scenes = load_dataset(*gt_path, {.ground_truth = true});
        const auto pred_scenes = load_dataset(*pred_path, {.ground_truth = false});
        detail::check_scene_alignment(gt_scenes, pred_scenes);
        const std::vector<Frame> gt_frames = detail::flatten_scenes(gt_scenes);
        const std::vector<Frame> pred_frames = detail::flatten_scenes(pred_scenes);
        if (gt_frames.size() != pred_frames.size())
          throw io_error(io_error::Kind::kValidation, "frame count mismatch");

        detail::LossTotals totals;
        for (std::size_t f = 0; f < gt_frames.size(); ++f) {
          const FrameAssignment assignment =
              match_for_losses(pred_frames[f], gt_frames[f]);
          totals.add(composite_losses(pred_frames[f], gt_frames[f], *weights,
                                      assignment));
          if (*verbose && (f + 1) % 50 == 0)
            std::cout << "frames processed: " << (f + 1) << "\n";
        }
        const CompositeLossReport mean = totals.mean();
        std::cout << detail::loss_table(mean);
        if (!out_path->empty()) {
          nlohmann::json doc;
          doc["schema_version"] = kSchemaVersion;
          doc["frames"] = totals.frames;
          doc["mean"] = detail::loss_to_json(mean);
          std::ofstream out(*out_path, std::ios::binary);
          if (!out)
            throw io_error(io_error::Kind::kIo, "cannot open for writing: " + *out_path);
          out << doc.dump(2) << '\n';
        }
        return kExitOk;
      };
    });
  }

  // ---- validate --------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "validate", "Audit scene files against the schema and type invariants");
    auto in_path = std::make_shared<std::string>();
    auto as_gt = std::make_shared<bool>(false);
    cmd->add_option("--in", *in_path, "Scene file or directory")->required();
    cmd->add_flag("--gt", *as_gt,
                  "Enforce ground-truth strictness (binary topology, confidence 1)");
    detail::add_config_flag(cmd);
    cmd->callback([=, &action] {
      action = [=] {
        const auto scenes = load_dataset(*in_path, {.ground_truth = *as_gt});
        std::size_t frames = 0;
        for (const SceneArchive& s : scenes) frames += s.frames.size();
        std::cout << "OK: " << scenes.size() << " scene(s), " << frames
                  << " frame(s)\n";
        return kExitOk;
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    return action ? action() : kExitInternal;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace detail

/// Runs the command line. Returns the process exit code (0 success,
/// 1 internal error, 2 validation failure).
inline int run(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.push_back("laneval");
  try {
    const std::vector<std::string> expanded = detail::apply_config_file(args);
    full.insert(full.end(), expanded.begin(), expanded.end());
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const std::string& s : full) argv.push_back(s.c_str());
  return detail::execute(static_cast<int>(argv.size()), argv.data());
}

inline int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  args.reserve(argc > 0 ? static_cast<std::size_t>(argc - 1) : 0);
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace laneval::cli
