// SPDX-License-Identifier: Apache-2.0
//
// exogs: batch pipeline driver. Replays exoskeleton demonstrations through
// forward kinematics, composes them with 3D Gaussian assets, and renders
// augmented visuomotor datasets.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "exogs/augment.hpp"
#include "exogs/demo.hpp"
#include "exogs/gscene.hpp"
#include "exogs/pipeline.hpp"
#include "exogs/poseproc.hpp"
#include "exogs/semantics.hpp"

namespace {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3 };

LogLevel g_log_level = LogLevel::Info;

void log_at(LogLevel level, const std::string& message) {
  if (level < g_log_level) return;
  static const char* names[] = {"debug", "info", "warn", "error"};
  std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << "\n";
}

LogLevel parse_log_level(const std::string& name) {
  if (name == "debug") return LogLevel::Debug;
  if (name == "info") return LogLevel::Info;
  if (name == "warn") return LogLevel::Warn;
  if (name == "error") return LogLevel::Error;
  throw CLI::ValidationError("--log-level must be one of debug|info|warn|error");
}

struct CommonFlags {
  std::string robot;
  std::vector<std::string> manifests;
  std::string assets;
  std::string plan;
  std::string out;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  bool materialize_masks = false;
  bool write_transmittance = false;
  std::string log_level = "info";
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool needs_assets, bool needs_plan) {
  cmd->add_option("--robot", flags.robot, "robot description (URDF subset)");
  cmd->add_option("--manifest", flags.manifests, "demo manifest or ingested demo file (repeatable)")->required();
  auto* assets = cmd->add_option("--assets", flags.assets, "asset library manifest");
  if (needs_assets) assets->required();
  auto* plan = cmd->add_option("--plan", flags.plan, "augmentation plan file");
  if (needs_plan) plan->required();
  cmd->add_option("--out", flags.out, "output dataset root")->required();
  cmd->add_option("--seed", flags.seed, "seed overriding the plan seed");
  cmd->add_option("--workers", flags.workers, "worker threads (affects wall time only, never bytes)");
  cmd->add_flag("--materialize-masks", flags.materialize_masks, "write per-frame attention-mask matrices");
  cmd->add_flag("--write-transmittance", flags.write_transmittance, "write per-frame residual transmittance maps");
  cmd->add_option("--log-level", flags.log_level, "debug|info|warn|error");
}

exogs::PipelineConfig to_pipeline_config(const CommonFlags& flags) {
  exogs::PipelineConfig config;
  if (!flags.robot.empty()) config.robot_path = flags.robot;
  for (const auto& m : flags.manifests) config.demo_paths.emplace_back(m);
  config.assets_path = flags.assets;
  if (!flags.plan.empty()) config.plan_path = flags.plan;
  config.out_dir = flags.out;
  config.seed = flags.seed;
  config.workers = flags.workers;
  config.materialize_masks = flags.materialize_masks;
  config.write_transmittance = flags.write_transmittance;
  return config;
}

int run_ingest(const std::string& manifest, const std::string& out) {
  const auto raw = exogs::load_demo(manifest);
  const auto demo = exogs::build_demonstration(raw, std::filesystem::path(manifest).stem().string());
  exogs::save_demonstration(out, demo);
  log_at(LogLevel::Info, "ingested " + std::to_string(demo.steps()) + " steps, " +
                             std::to_string(demo.object_tracks.size()) + " object track(s), " +
                             std::to_string(demo.cameras.size()) + " camera(s) -> " + out);
  return 0;
}

int run_replay_or_export(const CommonFlags& flags) {
  const auto entries = exogs::cmd_replay(to_pipeline_config(flags));
  log_at(LogLevel::Info, "wrote " + std::to_string(entries.size()) + " episode(s) under " + flags.out);
  return 0;
}

int run_augment(const CommonFlags& flags) {
  const auto entries = exogs::cmd_augment(to_pipeline_config(flags));
  log_at(LogLevel::Info, "wrote " + std::to_string(entries.size()) + " episode(s) under " + flags.out);
  return 0;
}

struct PoseprocFlags {
  std::string demo;
  std::string out;
  std::string fix_object_id;
  std::vector<std::string> substitutions;
  std::string assets;
  bool perturb = false;
  double max_translation = 0.05;
  double max_rotation = 15.0 * M_PI / 180.0;
  std::pair<double, double> scale_range{1.0, 1.0};
  std::uint64_t seed = 0;
  double close_threshold = exogs::kDefaultCloseThreshold;
  double open_threshold = exogs::kDefaultOpenThreshold;
  std::string robot;
};

int run_poseproc(const PoseprocFlags& flags) {
  exogs::Demonstration demo = exogs::load_demonstration(flags.demo);
  const exogs::RobotModel model = exogs::load_robot(!flags.robot.empty() ? flags.robot : demo.robot_path);
  const auto link_rows = exogs::replay_link_poses(model, demo.trajectory);
  const int ee = model.end_effector_index();
  exogs::require(ee >= 0, exogs::Errc::ParseError, "robot model has no end-effector link");
  std::vector<exogs::RigidTransform> ee_poses;
  ee_poses.reserve(link_rows.size());
  for (const auto& row : link_rows) ee_poses.push_back(row[static_cast<std::size_t>(ee)]);

  if (!flags.fix_object_id.empty()) {
    demo = exogs::apply_fix(demo, flags.fix_object_id, ee_poses, flags.close_threshold, flags.open_threshold);
    const auto& w = demo.grasp_windows.at(flags.fix_object_id);
    log_at(LogLevel::Info, "fixed '" + flags.fix_object_id + "' over steps [" + std::to_string(w.start_step) + ", " +
                               std::to_string(w.end_step) + "]");
  }
  if (!flags.substitutions.empty()) {
    exogs::require(!flags.assets.empty(), exogs::Errc::MissingFile, "--substitute needs --assets");
    const auto lib = exogs::load_asset_library(flags.assets);
    for (const auto& sub : flags.substitutions) {
      const auto eq = sub.find('=');
      exogs::require(eq != std::string::npos, exogs::Errc::SchemaError,
                     "--substitute expects <object_id>=<asset_id>, got '" + sub + "'");
      demo = exogs::substitute_object(demo, sub.substr(0, eq), sub.substr(eq + 1), lib.ids());
      log_at(LogLevel::Info, "substituted " + sub);
    }
  }
  if (flags.perturb) {
    if (const auto warning = exogs::perturbation_plausibility_warning(flags.max_translation, flags.max_rotation)) {
      log_at(LogLevel::Warn, *warning);
    }
    for (const auto& [object_id, track] : exogs::Demonstration(demo).object_tracks) {
      demo = exogs::perturb_poses(demo, object_id, flags.seed, flags.max_translation, flags.max_rotation,
                                  {flags.scale_range.first, flags.scale_range.second});
    }
    log_at(LogLevel::Info, "perturbed object poses (seed " + std::to_string(flags.seed) + ")");
  }
  exogs::save_demonstration(flags.out, demo);
  return 0;
}

struct MaskFlags {
  std::string episode;
  std::string out;
  bool materialize = false;
  std::vector<std::size_t> frames;
};

int run_mask(const MaskFlags& flags) {
  const auto episode = exogs::load_episode(flags.episode);
  std::vector<std::size_t> frames = flags.frames;
  if (frames.empty()) {
    for (std::size_t f = 0; f < episode.frames.size(); ++f) frames.push_back(f);
  }
  const std::filesystem::path out_dir = flags.out.empty() ? episode.directory / "masks" : flags.out;
  if (flags.materialize) std::filesystem::create_directories(out_dir);
  for (const std::size_t f : frames) {
    exogs::require(f < episode.frames.size(), exogs::Errc::OutOfRange,
                   "frame " + std::to_string(f) + " outside episode");
    const auto& grid = episode.frames[f].patches;
    const auto mask = exogs::build_attention_mask(grid.labels, episode.relation_set);
    if (flags.materialize) {
      exogs::Json rows = exogs::Json::array();
      for (std::size_t i = 0; i < mask.size; ++i) {
        exogs::Json row = exogs::Json::array();
        for (std::size_t j = 0; j < mask.size; ++j) row.push_back(mask.at(i, j));
        rows.push_back(row);
      }
      char name[32];
      std::snprintf(name, sizeof(name), "%06zu.attn.json", f);
      exogs::write_json_file(out_dir / name, exogs::Json{{"size", mask.size}, {"mask", rows}});
    }
    std::size_t blocked = 0;
    for (const float v : mask.values) blocked += v != 0.0f;
    std::cout << "frame " << f << ": " << mask.size << "x" << mask.size << " mask, " << blocked
              << " blocked entries\n";
  }
  return 0;
}

int run_validate(const std::string& root, const std::string& report_path) {
  const auto report = exogs::cmd_validate(root);
  for (const auto& issue : report.errors) std::cout << "[fail] " << issue.path << ": " << issue.message << "\n";
  std::cout << (report.ok() ? "[pass] " : "[fail] ") << report.episodes_checked << " episode(s), "
            << report.frames_checked << " frame(s), " << report.errors.size() << " error(s)\n";
  if (!report_path.empty()) exogs::write_json_file(report_path, report.to_json_report());
  return report.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exogs: demonstration replay, augmentation and dataset export over 3D Gaussian scenes"};
  app.require_subcommand(1);

  // ingest
  std::string ingest_manifest, ingest_out, ingest_log = "info";
  auto* ingest = app.add_subcommand("ingest", "parse raw logs into a fused, time-aligned demonstration");
  ingest->add_option("--manifest", ingest_manifest, "demonstration manifest (JSON)")->required();
  ingest->add_option("--out", ingest_out, "output demonstration file")->required();
  ingest->add_option("--log-level", ingest_log, "debug|info|warn|error");

  // replay / export
  CommonFlags replay_flags;
  auto* replay = app.add_subcommand("replay", "render one un-augmented episode per demonstration");
  add_common(replay, replay_flags, /*needs_assets=*/true, /*needs_plan=*/false);
  CommonFlags export_flags;
  auto* export_cmd = app.add_subcommand("export", "render and export episodes (same as replay)");
  add_common(export_cmd, export_flags, /*needs_assets=*/true, /*needs_plan=*/false);

  // augment
  CommonFlags augment_flags;
  auto* augment = app.add_subcommand("augment", "run an augmentation plan into a multiplied dataset");
  add_common(augment, augment_flags, /*needs_assets=*/true, /*needs_plan=*/true);

  // poseproc
  PoseprocFlags pose_flags;
  auto* poseproc = app.add_subcommand("poseproc", "fix, substitute and perturb object pose sequences");
  poseproc->add_option("--demo", pose_flags.demo, "ingested demonstration file")->required();
  poseproc->add_option("--out", pose_flags.out, "output demonstration file")->required();
  poseproc->add_option("--robot", pose_flags.robot, "robot description override");
  poseproc->add_option("--fix", pose_flags.fix_object_id, "object id to rigidly attach over its grasp window");
  poseproc->add_option("--substitute", pose_flags.substitutions, "<object_id>=<asset_id> (repeatable)");
  poseproc->add_option("--assets", pose_flags.assets, "asset library manifest (for --substitute)");
  poseproc->add_flag("--perturb", pose_flags.perturb, "apply a seeded pose perturbation to every object");
  poseproc->add_option("--max-translation", pose_flags.max_translation, "perturbation translation bound, meters");
  poseproc->add_option("--max-rotation", pose_flags.max_rotation, "perturbation rotation bound, radians");
  poseproc->add_option("--scale-range", pose_flags.scale_range, "asset scale range lo hi");
  poseproc->add_option("--seed", pose_flags.seed, "perturbation seed");
  poseproc->add_option("--close-threshold", pose_flags.close_threshold, "gripper close threshold");
  poseproc->add_option("--open-threshold", pose_flags.open_threshold, "gripper open threshold");

  // mask
  MaskFlags mask_flags;
  auto* mask = app.add_subcommand("mask", "build attention masks from exported patch labels");
  mask->add_option("--episode", mask_flags.episode, "episode directory")->required();
  mask->add_option("--out", mask_flags.out, "output directory (default <episode>/masks)");
  mask->add_flag("--materialize", mask_flags.materialize, "write the full (TN)x(TN) matrices");
  mask->add_option("--frames", mask_flags.frames, "frame indices (default all)");

  // validate
  std::string validate_root, validate_report;
  auto* validate = app.add_subcommand("validate", "re-check invariants of a generated dataset tree");
  validate->add_option("--out", validate_root, "dataset root to validate")->required();
  validate->add_option("--report", validate_report, "write a machine-readable JSON report here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      g_log_level = parse_log_level(ingest_log);
      return run_ingest(ingest_manifest, ingest_out);
    }
    if (*replay) {
      g_log_level = parse_log_level(replay_flags.log_level);
      return run_replay_or_export(replay_flags);
    }
    if (*export_cmd) {
      g_log_level = parse_log_level(export_flags.log_level);
      return run_replay_or_export(export_flags);
    }
    if (*augment) {
      g_log_level = parse_log_level(augment_flags.log_level);
      return run_augment(augment_flags);
    }
    if (*poseproc) return run_poseproc(pose_flags);
    if (*mask) return run_mask(mask_flags);
    if (*validate) return run_validate(validate_root, validate_report);
  } catch (const exogs::Error& e) {
    log_at(LogLevel::Error, e.what());
    return 1;
  } catch (const std::exception& e) {
    log_at(LogLevel::Error, std::string("unexpected: ") + e.what());
    return 1;
  }
  return 0;
}
