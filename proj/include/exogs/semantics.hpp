// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "exogs/error.hpp"
#include "exogs/geometry.hpp"
#include "exogs/image.hpp"
#include "exogs/kinematics.hpp"
#include "exogs/serde.hpp"

namespace exogs {

constexpr int kDefaultPatchSize = 16;
constexpr float kAttentionBlocked = -1e9f;  // serialized stand-in for -infinity

/// Patch-level class labels for one frame.
struct PatchLabelGrid {
  int patch_size = kDefaultPatchSize;
  int rows = 0;
  int cols = 0;
  int class_count = 0;
  std::vector<std::uint8_t> labels;  // rows*cols, row-major

  std::uint8_t at(int row, int col) const { return labels[static_cast<std::size_t>(row) * cols + col]; }
};

/// Pixel-majority aggregation. Rendered instance maps are hard labels, so the
/// mean-softmax argmax over a patch reduces to a majority vote; unlabeled
/// pixels (255) count toward background (class 0) and ties resolve to the
/// smallest class id.
inline PatchLabelGrid aggregate_patch_labels(const ImageU8& instance, int patch_size, int class_count) {
  require(patch_size >= 1, Errc::OutOfRange, "patch size must be >= 1");
  require(class_count >= 1 && class_count <= 255, Errc::OutOfRange, "class count must be in [1, 255]");
  require(instance.channels == 1, Errc::SchemaError, "instance image must be single-channel");
  require(instance.width % patch_size == 0 && instance.height % patch_size == 0, Errc::IndivisibleDimensions,
          std::to_string(instance.width) + "x" + std::to_string(instance.height) +
              " image is not divisible by patch size " + std::to_string(patch_size));

  PatchLabelGrid grid;
  grid.patch_size = patch_size;
  grid.rows = instance.height / patch_size;
  grid.cols = instance.width / patch_size;
  grid.class_count = class_count;
  grid.labels.resize(static_cast<std::size_t>(grid.rows) * grid.cols);

  std::vector<int> counts(static_cast<std::size_t>(class_count));
  for (int row = 0; row < grid.rows; ++row) {
    for (int col = 0; col < grid.cols; ++col) {
      std::fill(counts.begin(), counts.end(), 0);
      for (int y = row * patch_size; y < (row + 1) * patch_size; ++y) {
        for (int x = col * patch_size; x < (col + 1) * patch_size; ++x) {
          const std::uint8_t v = instance.at(x, y);
          if (v == 255) {
            ++counts[0];
          } else {
            require(v < class_count, Errc::LabelOutOfRange,
                    "pixel label " + std::to_string(v) + " >= class count " + std::to_string(class_count));
            ++counts[v];
          }
        }
      }
      int best = 0;
      for (int c = 1; c < class_count; ++c) {
        if (counts[c] > counts[best]) best = c;  // ties keep the smaller id
      }
      grid.labels[static_cast<std::size_t>(row) * grid.cols + col] = static_cast<std::uint8_t>(best);
    }
  }
  return grid;
}

/// The label relation set R: ordered pairs of class ids allowed to attend to
/// each other. No implicit diagonal; self-pairs must be listed explicitly.
struct RelationSet {
  int class_count = 0;
  std::set<std::pair<int, int>> allowed;

  bool contains(int i, int j) const { return allowed.count({i, j}) > 0; }

  void validate() const {
    for (const auto& [i, j] : allowed) {
      require(i >= 0 && i < class_count && j >= 0 && j < class_count, Errc::LabelOutOfRange,
              "relation pair (" + std::to_string(i) + "," + std::to_string(j) + ") outside [0, " +
                  std::to_string(class_count) + ")");
    }
  }

  /// Self-pairs plus arm<->object communication; background stays isolated.
  static RelationSet default_for(int class_count = 3) {
    RelationSet r;
    r.class_count = class_count;
    for (int c = 0; c < class_count; ++c) r.allowed.insert({c, c});
    for (int a = 1; a < class_count; ++a) {
      for (int b = 1; b < class_count; ++b) r.allowed.insert({a, b});
    }
    return r;
  }
};

inline Json to_json(const RelationSet& r) {
  Json pairs = Json::array();
  for (const auto& [i, j] : r.allowed) pairs.push_back(Json::array({i, j}));
  return Json{{"C", r.class_count}, {"allowed", pairs}};
}

inline RelationSet relation_set_from_json(const Json& j) {
  RelationSet r;
  try {
    r.class_count = j.at("C").get<int>();
    for (const auto& pair : j.at("allowed")) {
      require(pair.size() == 2, Errc::SchemaError, "relation pairs must have two entries");
      r.allowed.insert({pair[0].get<int>(), pair[1].get<int>()});
    }
  } catch (const Json::exception& e) {
    raise(Errc::SchemaError, std::string("relation set: ") + e.what());
  }
  r.validate();
  return r;
}

/// Additive attention mask over T*N flattened patch labels:
/// entry (i, j) is 0 when (l_i, l_j) is allowed and -1e9 otherwise.
struct AttentionMask {
  std::size_t size = 0;
  std::vector<float> values;  // size*size, row-major

  float at(std::size_t i, std::size_t j) const { return values[i * size + j]; }
};

inline AttentionMask build_attention_mask(const std::vector<std::uint8_t>& labels, const RelationSet& relations) {
  relations.validate();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < relations.class_count, Errc::LabelOutOfRange,
            "label " + std::to_string(labels[i]) + " at token " + std::to_string(i) + " >= C = " +
                std::to_string(relations.class_count));
  }
  AttentionMask mask;
  mask.size = labels.size();
  mask.values.resize(mask.size * mask.size);
  for (std::size_t i = 0; i < mask.size; ++i) {
    for (std::size_t j = 0; j < mask.size; ++j) {
      mask.values[i * mask.size + j] = relations.contains(labels[i], labels[j]) ? 0.0f : kAttentionBlocked;
    }
  }
  return mask;
}

struct FrameFiles {
  std::string rgb_path;
  std::string instance_path;
  std::string depth_path;
  PatchLabelGrid patches;
};

struct EpisodeProvenance {
  std::string plan_hash;
  std::uint64_t seed = 0;
  std::uint32_t episode_index = 0;
  std::string strategy;  // "none", "viewpoint", "color", "background", "object"
  std::string source_demo_id;
};

/// One exported episode: rendered channels, patch labels, the action
/// sequence, the camera, and the relation set used for attention masks.
struct EpisodeDataset {
  std::string episode_id;
  std::filesystem::path directory;
  std::vector<FrameFiles> frames;
  std::vector<JointState> actions;
  CameraModel camera;
  RelationSet relation_set;
  EpisodeProvenance provenance;
  int patch_size = kDefaultPatchSize;
  int class_count = 0;
};

inline Json to_json(const PatchLabelGrid& grid) {
  Json rows = Json::array();
  for (int r = 0; r < grid.rows; ++r) {
    Json row = Json::array();
    for (int c = 0; c < grid.cols; ++c) row.push_back(static_cast<int>(grid.at(r, c)));
    rows.push_back(row);
  }
  return Json{{"patch_size", grid.patch_size}, {"C", grid.class_count}, {"labels", rows}};
}

inline PatchLabelGrid patch_grid_from_json(const Json& j) {
  PatchLabelGrid grid;
  try {
    grid.patch_size = j.at("patch_size").get<int>();
    grid.class_count = j.at("C").get<int>();
    const auto& rows = j.at("labels");
    grid.rows = static_cast<int>(rows.size());
    grid.cols = grid.rows > 0 ? static_cast<int>(rows[0].size()) : 0;
    for (const auto& row : rows) {
      require(static_cast<int>(row.size()) == grid.cols, Errc::SchemaError, "ragged patch label grid");
      for (const auto& v : row) {
        const int label = v.get<int>();
        require(label >= 0 && label < grid.class_count, Errc::LabelOutOfRange,
                "patch label " + std::to_string(label) + " outside [0, C)");
        grid.labels.push_back(static_cast<std::uint8_t>(label));
      }
    }
  } catch (const Json::exception& e) {
    raise(Errc::SchemaError, std::string("patch grid: ") + e.what());
  }
  return grid;
}

namespace episode_detail {

inline std::string frame_stem(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf;
}

}  // namespace episode_detail

/// Writes the episode directory layout:
///   <dir>/frames/%06d.{rgb,instance,depth}.png + %06d.patches.json
///   <dir>/actions.jsonl
///   <dir>/meta.json
/// Attention masks are stored as the relation set plus per-frame labels;
/// materialize_masks additionally writes the full matrices (test-scale only).
inline EpisodeDataset export_episode(const std::filesystem::path& out_dir, const std::string& episode_id,
                                     const std::vector<ImageF>& rgb_frames, const std::vector<ImageU8>& instance_frames,
                                     const std::vector<ImageF>& depth_frames, const std::vector<JointState>& actions,
                                     const CameraModel& camera, const RelationSet& relations, int patch_size,
                                     const EpisodeProvenance& provenance, bool materialize_masks = false,
                                     const std::vector<ImageF>* transmittance_frames = nullptr) {
  require(rgb_frames.size() == instance_frames.size() && rgb_frames.size() == depth_frames.size(),
          Errc::LengthMismatch, "frame channel counts differ");
  require(rgb_frames.size() == actions.size(), Errc::LengthMismatch,
          "frame count " + std::to_string(rgb_frames.size()) + " != action count " + std::to_string(actions.size()));
  if (transmittance_frames) {
    require(transmittance_frames->size() == rgb_frames.size(), Errc::LengthMismatch,
            "transmittance frame count differs");
  }
  relations.validate();

  const auto episode_dir = out_dir / episode_id;
  const auto frames_dir = episode_dir / "frames";
  std::error_code ec;
  std::filesystem::create_directories(frames_dir, ec);
  require(!ec, Errc::IoError, "cannot create " + frames_dir.string());

  EpisodeDataset episode;
  episode.episode_id = episode_id;
  episode.directory = episode_dir;
  episode.actions = actions;
  episode.camera = camera;
  episode.relation_set = relations;
  episode.provenance = provenance;
  episode.patch_size = patch_size;
  episode.class_count = relations.class_count;

  for (std::size_t f = 0; f < rgb_frames.size(); ++f) {
    const std::string stem = episode_detail::frame_stem(f);
    FrameFiles files;
    files.rgb_path = "frames/" + stem + ".rgb.png";
    files.instance_path = "frames/" + stem + ".instance.png";
    files.depth_path = "frames/" + stem + ".depth.png";
    save_png(episode_dir / files.rgb_path, to_u8_image(rgb_frames[f]));
    save_png(episode_dir / files.instance_path, instance_frames[f]);
    save_png16(episode_dir / files.depth_path, depth_to_u16_mm(depth_frames[f]));
    if (transmittance_frames) {
      ImageU16 t16((*transmittance_frames)[f].width, (*transmittance_frames)[f].height, 1);
      for (std::size_t i = 0; i < t16.data.size(); ++i) {
        t16.data[i] = static_cast<std::uint16_t>(
            std::lround(std::clamp((*transmittance_frames)[f].data[i], 0.0f, 1.0f) * 65535.0f));
      }
      save_png16(episode_dir / ("frames/" + stem + ".transmittance.png"), t16);
    }
    files.patches = aggregate_patch_labels(instance_frames[f], patch_size, relations.class_count);
    write_json_file(episode_dir / ("frames/" + stem + ".patches.json"), to_json(files.patches));
    if (materialize_masks) {
      const AttentionMask mask = build_attention_mask(files.patches.labels, relations);
      Json rows = Json::array();
      for (std::size_t i = 0; i < mask.size; ++i) {
        Json row = Json::array();
        for (std::size_t j = 0; j < mask.size; ++j) row.push_back(mask.at(i, j));
        rows.push_back(row);
      }
      write_json_file(episode_dir / ("frames/" + stem + ".attn.json"), Json{{"size", mask.size}, {"mask", rows}});
    }
    episode.frames.push_back(std::move(files));
  }

  {
    std::ofstream actions_out(episode_dir / "actions.jsonl");
    require(actions_out.good(), Errc::IoError, "cannot write actions.jsonl");
    for (const auto& s : actions) {
      Json q = Json::array();
      for (Eigen::Index i = 0; i < s.q.size(); ++i) q.push_back(s.q(i));
      actions_out << Json{{"t", s.t}, {"q", q}, {"g", s.g}}.dump() << "\n";
    }
    require(actions_out.good(), Errc::IoError, "short write to actions.jsonl");
  }

  const Json meta{{"episode_id", episode_id},
                  {"camera", to_json(camera)},
                  {"relation_set", to_json(relations)},
                  {"patch_size", patch_size},
                  {"C", relations.class_count},
                  {"frame_count", rgb_frames.size()},
                  {"provenance",
                   Json{{"plan_hash", provenance.plan_hash},
                        {"seed", provenance.seed},
                        {"episode_index", provenance.episode_index},
                        {"strategy", provenance.strategy},
                        {"source_demo_id", provenance.source_demo_id}}}};
  write_json_file(episode_dir / "meta.json", meta);
  return episode;
}

inline EpisodeDataset load_episode(const std::filesystem::path& episode_dir) {
  const Json meta = load_json_file(episode_dir / "meta.json");
  EpisodeDataset episode;
  std::size_t frame_count = 0;
  try {
    episode.episode_id = meta.at("episode_id").get<std::string>();
    episode.directory = episode_dir;
    episode.camera = camera_from_json(meta.at("camera"));
    episode.relation_set = relation_set_from_json(meta.at("relation_set"));
    episode.patch_size = meta.at("patch_size").get<int>();
    episode.class_count = meta.at("C").get<int>();
    frame_count = meta.at("frame_count").get<std::size_t>();
    const auto& prov = meta.at("provenance");
    episode.provenance.plan_hash = prov.at("plan_hash").get<std::string>();
    episode.provenance.seed = prov.at("seed").get<std::uint64_t>();
    episode.provenance.episode_index = prov.at("episode_index").get<std::uint32_t>();
    episode.provenance.strategy = prov.at("strategy").get<std::string>();
    episode.provenance.source_demo_id = prov.at("source_demo_id").get<std::string>();
  } catch (const Json::exception& e) {
    raise(Errc::SchemaError, episode_dir.string() + "/meta.json: " + e.what());
  }

  std::ifstream actions_in(episode_dir / "actions.jsonl");
  require(actions_in.good(), Errc::MissingFile, "missing " + (episode_dir / "actions.jsonl").string());
  std::string line;
  while (std::getline(actions_in, line)) {
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      JointState s;
      s.t = j.at("t").get<double>();
      s.g = j.at("g").get<double>();
      const auto& q = j.at("q");
      s.q.resize(static_cast<Eigen::Index>(q.size()));
      for (std::size_t i = 0; i < q.size(); ++i) s.q(static_cast<Eigen::Index>(i)) = q[i].get<double>();
      episode.actions.push_back(std::move(s));
    } catch (const Json::exception& e) {
      raise(Errc::SchemaError, "actions.jsonl: " + std::string(e.what()));
    }
  }
  require(episode.actions.size() == frame_count, Errc::LengthMismatch,
          episode_dir.string() + ": action count != frame count");

  for (std::size_t f = 0; f < frame_count; ++f) {
    const std::string stem = episode_detail::frame_stem(f);
    FrameFiles files;
    files.rgb_path = "frames/" + stem + ".rgb.png";
    files.instance_path = "frames/" + stem + ".instance.png";
    files.depth_path = "frames/" + stem + ".depth.png";
    for (const auto& rel : {files.rgb_path, files.instance_path, files.depth_path}) {
      require(std::filesystem::exists(episode_dir / rel), Errc::MissingFile, (episode_dir / rel).string());
    }
    files.patches = patch_grid_from_json(load_json_file(episode_dir / ("frames/" + stem + ".patches.json")));
    episode.frames.push_back(std::move(files));
  }
  return episode;
}

}  // namespace exogs
