// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "exogs/augment.hpp"
#include "exogs/demo.hpp"
#include "exogs/error.hpp"
#include "exogs/gscene.hpp"
#include "exogs/kinematics.hpp"
#include "exogs/render.hpp"
#include "exogs/semantics.hpp"
#include "exogs/serde.hpp"

namespace exogs {

/// Resolved inputs for one pipeline run; all paths are checked at startup.
struct PipelineConfig {
  std::filesystem::path robot_path;               // optional; demo files carry their own
  std::vector<std::filesystem::path> demo_paths;  // ingest manifests or ingested demo files
  std::filesystem::path assets_path;
  std::filesystem::path plan_path;                // cmd_augment only
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;              // overrides the plan seed when set
  int workers = 1;
  bool materialize_masks = false;
  bool write_transmittance = false;
  bool resume = true;
  int patch_size = kDefaultPatchSize;
  RenderConfig render;
};

/// Accepts either an ingest manifest (with a "joints" key) or an already
/// ingested demonstration file (with a "trajectory" key).
inline Demonstration load_demo_any(const std::filesystem::path& path) {
  const Json j = load_json_file(path);
  if (j.contains("trajectory")) {
    Demonstration demo = demonstration_from_json(j);
    if (demo.source_id.empty() || demo.source_id == "demo") demo.source_id = path.stem().string();
    return demo;
  }
  require(j.contains("joints"), Errc::SchemaError,
          path.string() + ": neither a demonstration file nor an ingest manifest");
  return build_demonstration(load_demo(path), path.stem().string());
}

/// Smallest class count covering every label in the library (at least 3:
/// background, arm, one object class).
inline int class_count_for(const AssetLibrary& lib) {
  int max_label = 2;
  for (const auto& [id, rec] : lib.records()) max_label = std::max(max_label, static_cast<int>(rec.asset->instance_label));
  return max_label + 1;
}

struct DatasetManifestEntry {
  std::string episode_id;
  std::string directory;  // relative to the dataset root
  std::string strategy;
  std::uint32_t episode_index = 0;
  std::string source_demo_id;
};

inline void write_dataset_manifest(const std::filesystem::path& out_dir, const std::string& hash, std::uint64_t seed,
                                   const std::vector<DatasetManifestEntry>& entries) {
  Json episodes = Json::array();
  for (const auto& entry : entries) {
    episodes.push_back(Json{{"id", entry.episode_id},
                            {"dir", entry.directory},
                            {"strategy", entry.strategy},
                            {"episode_index", entry.episode_index},
                            {"source_demo_id", entry.source_demo_id}});
  }
  write_json_file(out_dir / "dataset_manifest.json", Json{{"plan_hash", hash}, {"seed", seed}, {"episodes", episodes}});
}

namespace pipeline_detail {

inline RobotModel resolve_robot(const PipelineConfig& config, const Demonstration& demo) {
  if (!config.robot_path.empty()) return load_robot(config.robot_path);
  require(!demo.robot_path.empty(), Errc::MissingFile, "no robot description given and the demo names none");
  return load_robot(demo.robot_path);
}

inline std::vector<DatasetManifestEntry> run_for_demos(const PipelineConfig& config, const AugmentPlan& plan) {
  require(!config.demo_paths.empty(), Errc::MissingFile, "no demonstrations given");
  const AssetLibrary lib = load_asset_library(config.assets_path);

  RunPlanOptions options;
  options.render = config.render;
  options.render.workers = config.workers;
  options.relations = RelationSet::default_for(class_count_for(lib));
  options.patch_size = config.patch_size;
  options.materialize_masks = config.materialize_masks;
  options.write_transmittance = config.write_transmittance;
  options.resume = config.resume;

  std::vector<DatasetManifestEntry> entries;
  for (const auto& demo_path : config.demo_paths) {
    const Demonstration demo = load_demo_any(demo_path);
    const RobotModel model = resolve_robot(config, demo);
    options.out_dir = config.out_dir / demo.source_id;
    const auto episodes = run_plan(demo, model, lib, plan, options);
    for (const auto& episode : episodes) {
      DatasetManifestEntry entry;
      entry.episode_id = episode.episode_id;
      entry.directory = demo.source_id + "/" + episode.episode_id;
      entry.strategy = episode.provenance.strategy;
      entry.episode_index = episode.provenance.episode_index;
      entry.source_demo_id = episode.provenance.source_demo_id;
      entries.push_back(entry);
    }
  }
  write_dataset_manifest(config.out_dir, plan_hash(plan), plan.seed, entries);
  return entries;
}

}  // namespace pipeline_detail

/// One plain (un-augmented) episode per demonstration.
inline std::vector<DatasetManifestEntry> cmd_replay(const PipelineConfig& config) {
  AugmentPlan plan;
  plan.seed = config.seed.value_or(0);
  plan.multiplier = 1;
  return pipeline_detail::run_for_demos(config, plan);
}

/// Multiplied dataset driven by the plan file; re-runs resume idempotently.
inline std::vector<DatasetManifestEntry> cmd_augment(const PipelineConfig& config) {
  AugmentPlan plan = load_plan(config.plan_path);
  if (config.seed) plan.seed = *config.seed;
  return pipeline_detail::run_for_demos(config, plan);
}

struct ValidationIssue {
  std::string path;
  std::string message;
};

struct ValidationReport {
  std::size_t episodes_checked = 0;
  std::size_t frames_checked = 0;
  std::vector<ValidationIssue> errors;

  bool ok() const { return errors.empty(); }

  Json to_json_report() const {
    Json errs = Json::array();
    for (const auto& e : errors) errs.push_back(Json{{"path", e.path}, {"message", e.message}});
    return Json{{"ok", ok()}, {"episodes_checked", episodes_checked}, {"frames_checked", frames_checked},
                {"errors", errs}};
  }
};

/// Re-checks every invariant reachable from the files of a generated dataset
/// tree: schema and alignment, label ranges, patch grids against the stored
/// instance maps, provenance hashes, and (where transmittance was
/// materialized) consistency between residual transmittance and the
/// instance-mask alpha floor.
inline ValidationReport cmd_validate(const std::filesystem::path& dataset_root) {
  ValidationReport report;
  const auto fail = [&](const std::filesystem::path& path, const std::string& message) {
    report.errors.push_back(ValidationIssue{path.string(), message});
  };

  Json manifest;
  try {
    manifest = load_json_file(dataset_root / "dataset_manifest.json");
  } catch (const Error& e) {
    fail(dataset_root / "dataset_manifest.json", e.what());
    return report;
  }

  std::set<std::string> listed_dirs;
  std::string expected_hash;
  try {
    expected_hash = manifest.at("plan_hash").get<std::string>();
    for (const auto& entry : manifest.at("episodes")) {
      listed_dirs.insert(entry.at("dir").get<std::string>());
    }
  } catch (const Json::exception& e) {
    fail(dataset_root / "dataset_manifest.json", e.what());
    return report;
  }

  // Every episode directory on disk must be reachable from the manifest.
  for (const auto& source_dir : std::filesystem::directory_iterator(dataset_root)) {
    if (!source_dir.is_directory()) continue;
    for (const auto& episode_dir : std::filesystem::directory_iterator(source_dir)) {
      if (!episode_dir.is_directory()) continue;
      const auto rel = std::filesystem::relative(episode_dir, dataset_root).generic_string();
      if (listed_dirs.count(rel) == 0) fail(episode_dir, "episode directory not listed in dataset_manifest.json");
    }
  }

  for (const auto& rel : listed_dirs) {
    const auto episode_dir = dataset_root / rel;
    EpisodeDataset episode;
    try {
      episode = load_episode(episode_dir);
    } catch (const Error& e) {
      fail(episode_dir, e.what());
      continue;
    }
    ++report.episodes_checked;
    if (episode.provenance.plan_hash != expected_hash) {
      fail(episode_dir / "meta.json", "provenance plan hash does not match the dataset manifest");
    }
    for (std::size_t f = 0; f < episode.frames.size(); ++f) {
      const auto& files = episode.frames[f];
      ++report.frames_checked;
      ImageU8 instance;
      try {
        instance = load_png(episode_dir / files.instance_path);
        const ImageU8 rgb = load_png(episode_dir / files.rgb_path);
        const ImageU16 depth = load_png16(episode_dir / files.depth_path);
        if (rgb.channels != 3 || rgb.width != instance.width || rgb.height != instance.height ||
            depth.width != instance.width || depth.height != instance.height) {
          fail(episode_dir / files.rgb_path, "frame channel dimensions disagree");
          continue;
        }
      } catch (const Error& e) {
        fail(episode_dir / files.instance_path, e.what());
        continue;
      }
      bool labels_ok = true;
      for (const std::uint8_t v : instance.data) {
        if (v != kNoInstance && v >= episode.class_count) {
          fail(episode_dir / files.instance_path,
               "pixel label " + std::to_string(v) + " outside [0, " + std::to_string(episode.class_count) + ")");
          labels_ok = false;
          break;
        }
      }
      if (!labels_ok) continue;
      try {
        const PatchLabelGrid recomputed = aggregate_patch_labels(instance, episode.patch_size, episode.class_count);
        if (recomputed.labels != episode.frames[f].patches.labels) {
          fail(episode_dir / files.instance_path, "stored patch labels disagree with the instance image");
        }
      } catch (const Error& e) {
        fail(episode_dir / files.instance_path, e.what());
      }
      const auto transmittance_path =
          episode_dir / ("frames/" + episode_detail::frame_stem(f) + ".transmittance.png");
      if (std::filesystem::exists(transmittance_path)) {
        const ImageU16 t16 = load_png16(transmittance_path);
        // Quantization of the stored T plus the compositing conservation
        // tolerance; alpha >= 0.5 must imply T <= 0.5 and vice versa.
        const double slack = 1.0 / 65535.0 + 1e-6;
        for (int y = 0; y < instance.height; ++y) {
          for (int x = 0; x < instance.width; ++x) {
            const double t = t16.at(x, y) / 65535.0;
            const bool masked = instance.at(x, y) != kNoInstance;
            if (masked && t > 0.5 + slack) {
              fail(transmittance_path, "instance-labeled pixel with transmittance above the alpha floor");
              y = instance.height;
              break;
            }
            if (!masked && t < 0.5 - slack) {
              fail(transmittance_path, "unlabeled pixel with accumulated alpha above the floor");
              y = instance.height;
              break;
            }
          }
        }
      }
    }
  }
  return report;
}

}  // namespace exogs
