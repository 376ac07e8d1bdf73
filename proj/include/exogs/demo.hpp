// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "exogs/error.hpp"
#include "exogs/geometry.hpp"
#include "exogs/kinematics.hpp"
#include "exogs/serde.hpp"

namespace exogs {

struct TrackSample {
  double t = 0.0;
  RigidTransform pose;  // object in camera frame
  bool valid = true;
};

/// One object's pose stream as seen by one camera.
struct PoseTrack {
  std::string object_id;
  std::string camera_id;
  std::vector<TrackSample> samples;

  void validate() const {
    for (std::size_t i = 1; i < samples.size(); ++i) {
      require(samples[i - 1].t < samples[i].t, Errc::NonMonotonicTimestamps,
              "track " + object_id + "/" + camera_id + " out of order at sample " + std::to_string(i));
    }
  }
};

/// A pose stream resampled onto the trajectory timestamps. Entries where the
/// source track had no bracketing valid samples are marked invalid.
struct AlignedTrack {
  std::string object_id;
  std::string camera_id;
  std::vector<RigidTransform> poses;
  std::vector<std::uint8_t> valid;
};

/// Timestep interval during which an object is rigidly attached to the
/// end-effector; written by poseproc and consumed by augmentation.
/// Steps are 0-based and the interval is inclusive on both ends.
struct GraspWindow {
  std::size_t start_step = 0;
  std::size_t end_step = 0;
  RigidTransform relative_pose;  // object in end-effector frame
};

struct Demonstration {
  std::string source_id;
  std::string robot_path;
  Trajectory trajectory;
  std::map<std::string, std::vector<RigidTransform>> object_tracks;  // base frame, H entries each
  std::map<std::string, CameraModel> cameras;
  std::string primary_camera;
  std::map<std::string, std::string> object_assets;   // object_id -> asset_id
  std::map<std::string, double> object_scales;        // object_id -> asset scale factor
  std::map<std::string, GraspWindow> grasp_windows;   // object_id -> recorded grasp window

  std::size_t steps() const { return trajectory.size(); }

  void validate() const {
    trajectory.validate();
    require(cameras.count(primary_camera) > 0, Errc::SchemaError,
            "primary camera '" + primary_camera + "' not in camera set");
    for (const auto& [obj, track] : object_tracks) {
      require(track.size() == trajectory.size(), Errc::LengthMismatch,
              "object '" + obj + "' track length " + std::to_string(track.size()) + " != H = " +
                  std::to_string(trajectory.size()));
    }
  }
};

/// Raw per-file streams referenced by a demonstration manifest.
struct RawDemo {
  std::string robot_path;
  Trajectory trajectory;
  std::vector<PoseTrack> tracks;
  std::map<std::string, CameraModel> cameras;
  std::string primary_camera;
};

namespace demo_detail {

inline Trajectory parse_joints_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), Errc::MissingFile, "cannot open joint log " + path.string());
  Trajectory traj;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (lineno == 1) {
      // Optional header row.
      try {
        std::stod(cells.at(0));
      } catch (...) {
        continue;
      }
    }
    require(cells.size() >= 3, Errc::SchemaError,
            path.string() + ":" + std::to_string(lineno) + ": need at least t, q_1, g columns");
    JointState s;
    try {
      s.t = std::stod(cells.front());
      s.g = std::stod(cells.back());
      s.q.resize(static_cast<Eigen::Index>(cells.size()) - 2);
      for (std::size_t i = 1; i + 1 < cells.size(); ++i) s.q(static_cast<Eigen::Index>(i - 1)) = std::stod(cells[i]);
    } catch (const std::exception&) {
      raise(Errc::SchemaError, path.string() + ":" + std::to_string(lineno) + ": non-numeric value");
    }
    traj.states.push_back(std::move(s));
  }
  return traj;
}

inline Trajectory parse_joints_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), Errc::MissingFile, "cannot open joint log " + path.string());
  Trajectory traj;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
      JointState s;
      s.t = j.at("t").get<double>();
      s.g = j.at("g").get<double>();
      const auto& q = j.at("q");
      s.q.resize(static_cast<Eigen::Index>(q.size()));
      for (std::size_t i = 0; i < q.size(); ++i) s.q(static_cast<Eigen::Index>(i)) = q[i].get<double>();
      traj.states.push_back(std::move(s));
    } catch (const Json::exception& e) {
      raise(Errc::SchemaError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return traj;
}

inline std::vector<PoseTrack> parse_tracks_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), Errc::MissingFile, "cannot open track file " + path.string());
  std::map<std::pair<std::string, std::string>, PoseTrack> grouped;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      const auto object_id = j.at("object_id").get<std::string>();
      const auto camera_id = j.at("camera_id").get<std::string>();
      TrackSample sample;
      sample.t = j.at("t").get<double>();
      sample.valid = j.value("valid", true);
      if (sample.valid) {
        const auto& w = j.at("quat_wxyz");
        const auto& x = j.at("translation");
        sample.pose = RigidTransform(
            Quat(w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(), w.at(3).get<double>()),
            Vec3(x.at(0).get<double>(), x.at(1).get<double>(), x.at(2).get<double>()));
      }
      auto& track = grouped[{object_id, camera_id}];
      track.object_id = object_id;
      track.camera_id = camera_id;
      track.samples.push_back(sample);
    } catch (const Json::exception& e) {
      raise(Errc::SchemaError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  std::vector<PoseTrack> tracks;
  tracks.reserve(grouped.size());
  for (auto& [key, track] : grouped) {
    track.validate();
    tracks.push_back(std::move(track));
  }
  return tracks;
}

}  // namespace demo_detail

/// Parses the manifest plus every stream it references; paths are resolved
/// relative to the manifest file.
inline RawDemo load_demo(const std::filesystem::path& manifest_path) {
  const Json manifest = load_json_file(manifest_path);
  const auto dir = manifest_path.parent_path();
  const auto resolve = [&](const std::string& rel) {
    const std::filesystem::path p(rel);
    return p.is_absolute() ? p : dir / p;
  };

  RawDemo raw;
  try {
    raw.robot_path = resolve(manifest.at("robot").get<std::string>()).string();

    const auto joints_path = resolve(manifest.at("joints").get<std::string>());
    raw.trajectory = joints_path.extension() == ".csv" ? demo_detail::parse_joints_csv(joints_path)
                                                       : demo_detail::parse_joints_jsonl(joints_path);

    std::vector<std::filesystem::path> track_files;
    const auto& tracks_node = manifest.at("tracks");
    if (tracks_node.is_string()) {
      track_files.push_back(resolve(tracks_node.get<std::string>()));
    } else {
      for (const auto& item : tracks_node) track_files.push_back(resolve(item.get<std::string>()));
    }
    for (const auto& file : track_files) {
      auto parsed = demo_detail::parse_tracks_jsonl(file);
      raw.tracks.insert(raw.tracks.end(), parsed.begin(), parsed.end());
    }

    const Json cameras = load_json_file(resolve(manifest.at("cameras").get<std::string>()));
    for (const auto& [cam_id, record] : cameras.items()) {
      raw.cameras[cam_id] = camera_from_json(record);
      if (record.value("primary", false)) {
        require(raw.primary_camera.empty(), Errc::SchemaError, "more than one camera marked primary");
        raw.primary_camera = cam_id;
      }
    }
  } catch (const Json::exception& e) {
    raise(Errc::SchemaError, manifest_path.string() + ": " + e.what());
  }
  require(!raw.cameras.empty(), Errc::SchemaError, "manifest lists no cameras");
  require(!raw.primary_camera.empty(), Errc::SchemaError, "no camera marked primary");
  require(std::filesystem::exists(raw.robot_path), Errc::MissingFile, "robot description " + raw.robot_path);
  raw.trajectory.validate();
  for (const auto& track : raw.tracks) {
    require(raw.cameras.count(track.camera_id) > 0, Errc::SchemaError,
            "track references unknown camera '" + track.camera_id + "'");
  }
  return raw;
}

/// Tolerance under which a target timestamp reuses a sample verbatim instead
/// of interpolating.
constexpr double kTimeAlignTolerance = 1e-4;

inline AlignedTrack align_time(const PoseTrack& track, const std::vector<double>& target_timestamps) {
  track.validate();
  AlignedTrack out;
  out.object_id = track.object_id;
  out.camera_id = track.camera_id;
  out.poses.resize(target_timestamps.size());
  out.valid.assign(target_timestamps.size(), 0);

  for (std::size_t i = 0; i < target_timestamps.size(); ++i) {
    const double t = target_timestamps[i];

    const TrackSample* exact = nullptr;
    const TrackSample* before = nullptr;
    const TrackSample* after = nullptr;
    for (const auto& s : track.samples) {
      if (!s.valid) continue;
      if (std::abs(s.t - t) <= kTimeAlignTolerance && (!exact || std::abs(s.t - t) < std::abs(exact->t - t))) {
        exact = &s;
      }
      if (s.t <= t && (!before || s.t > before->t)) before = &s;
      if (s.t >= t && (!after || s.t < after->t)) after = &s;
    }
    if (exact) {
      out.poses[i] = exact->pose;
      out.valid[i] = 1;
    } else if (before && after) {
      const double span = after->t - before->t;
      out.poses[i] = pose_interpolate(before->pose, after->pose, (t - before->t) / span);
      out.valid[i] = 1;
    }
    // else: target outside the track's valid range; stays invalid.
  }
  return out;
}

/// Multi-view fusion in the base frame: the rotation comes from the primary
/// camera (falling back to the lowest-index valid view) and the translation
/// is the arithmetic mean over all valid views.
inline std::vector<RigidTransform> fuse_views(const std::vector<AlignedTrack>& per_view,
                                              const std::string& primary_camera,
                                              const std::map<std::string, CameraModel>& cameras) {
  require(!per_view.empty(), Errc::NoValidView, "no views to fuse");
  const std::size_t steps = per_view.front().poses.size();
  for (const auto& view : per_view) {
    require(view.poses.size() == steps, Errc::LengthMismatch, "aligned views disagree on step count");
    require(cameras.count(view.camera_id) > 0, Errc::SchemaError, "unknown camera '" + view.camera_id + "'");
  }

  std::vector<RigidTransform> cam_to_base;
  cam_to_base.reserve(per_view.size());
  int primary_index = -1;
  for (std::size_t k = 0; k < per_view.size(); ++k) {
    cam_to_base.push_back(invert(cameras.at(per_view[k].camera_id).extrinsics));
    if (per_view[k].camera_id == primary_camera) primary_index = static_cast<int>(k);
  }

  std::vector<RigidTransform> fused(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Vec3 translation_sum = Vec3::Zero();
    std::size_t valid_count = 0;
    int rotation_view = -1;
    std::optional<RigidTransform> primary_base;
    std::optional<RigidTransform> fallback_base;
    for (std::size_t k = 0; k < per_view.size(); ++k) {
      if (!per_view[k].valid[t]) continue;
      const RigidTransform base_pose = compose(cam_to_base[k], per_view[k].poses[t]);
      translation_sum += base_pose.translation;
      ++valid_count;
      if (static_cast<int>(k) == primary_index) primary_base = base_pose;
      if (!fallback_base) {
        fallback_base = base_pose;
        rotation_view = static_cast<int>(k);
      }
    }
    if (valid_count == 0) {
      raise(Errc::NoValidView, "object '" + per_view.front().object_id + "' has no valid view at step " +
                                   std::to_string(t));
    }
    (void)rotation_view;
    const RigidTransform& rotation_source = primary_base ? *primary_base : *fallback_base;
    fused[t].rotation = rotation_source.rotation;
    fused[t].translation = translation_sum / static_cast<double>(valid_count);
  }
  return fused;
}

/// load -> align -> fuse; the result satisfies every Demonstration invariant.
inline Demonstration build_demonstration(const RawDemo& raw, const std::string& source_id = "demo") {
  raw.trajectory.validate();
  require(!raw.trajectory.states.empty(), Errc::SchemaError, "joint log is empty");

  std::vector<double> target_ts;
  target_ts.reserve(raw.trajectory.states.size());
  for (const auto& s : raw.trajectory.states) target_ts.push_back(s.t);

  std::map<std::string, std::vector<const PoseTrack*>> by_object;
  for (const auto& track : raw.tracks) by_object[track.object_id].push_back(&track);

  Demonstration demo;
  demo.source_id = source_id;
  demo.robot_path = raw.robot_path;
  demo.trajectory = raw.trajectory;
  demo.cameras = raw.cameras;
  demo.primary_camera = raw.primary_camera;

  for (auto& [object_id, tracks] : by_object) {
    std::sort(tracks.begin(), tracks.end(),
              [](const PoseTrack* a, const PoseTrack* b) { return a->camera_id < b->camera_id; });
    std::vector<AlignedTrack> aligned;
    aligned.reserve(tracks.size());
    for (const PoseTrack* track : tracks) aligned.push_back(align_time(*track, target_ts));
    try {
      demo.object_tracks[object_id] = fuse_views(aligned, raw.primary_camera, raw.cameras);
    } catch (const Error& e) {
      raise(e.code(), std::string(e.what()) + " (while fusing object '" + object_id + "')");
    }
    demo.object_assets[object_id] = object_id;
    demo.object_scales[object_id] = 1.0;
  }
  demo.validate();
  return demo;
}

inline Json to_json(const Demonstration& demo) {
  Json traj = Json::array();
  for (const auto& s : demo.trajectory.states) {
    Json q = Json::array();
    for (Eigen::Index i = 0; i < s.q.size(); ++i) q.push_back(s.q(i));
    traj.push_back(Json{{"t", s.t}, {"q", q}, {"g", s.g}});
  }
  Json tracks = Json::object();
  for (const auto& [obj, poses] : demo.object_tracks) {
    Json arr = Json::array();
    for (const auto& p : poses) arr.push_back(to_json(p));
    tracks[obj] = arr;
  }
  Json cams = Json::object();
  for (const auto& [cam_id, cam] : demo.cameras) cams[cam_id] = to_json(cam);
  Json windows = Json::object();
  for (const auto& [obj, w] : demo.grasp_windows) {
    windows[obj] = Json{{"start_step", w.start_step}, {"end_step", w.end_step},
                        {"relative_pose", to_json(w.relative_pose)}};
  }
  return Json{{"source_id", demo.source_id},
              {"robot", demo.robot_path},
              {"trajectory", traj},
              {"object_tracks", tracks},
              {"cameras", cams},
              {"primary_camera", demo.primary_camera},
              {"object_assets", demo.object_assets},
              {"object_scales", demo.object_scales},
              {"grasp_windows", windows}};
}

inline Demonstration demonstration_from_json(const Json& j) {
  Demonstration demo;
  try {
    demo.source_id = j.value("source_id", "demo");
    demo.robot_path = j.value("robot", "");
    for (const auto& row : j.at("trajectory")) {
      JointState s;
      s.t = row.at("t").get<double>();
      s.g = row.at("g").get<double>();
      const auto& q = row.at("q");
      s.q.resize(static_cast<Eigen::Index>(q.size()));
      for (std::size_t i = 0; i < q.size(); ++i) s.q(static_cast<Eigen::Index>(i)) = q[i].get<double>();
      demo.trajectory.states.push_back(std::move(s));
    }
    for (const auto& [obj, arr] : j.at("object_tracks").items()) {
      std::vector<RigidTransform> poses;
      poses.reserve(arr.size());
      for (const auto& p : arr) poses.push_back(transform_from_json(p));
      demo.object_tracks[obj] = std::move(poses);
    }
    for (const auto& [cam_id, record] : j.at("cameras").items()) demo.cameras[cam_id] = camera_from_json(record);
    demo.primary_camera = j.at("primary_camera").get<std::string>();
    demo.object_assets = j.value("object_assets", std::map<std::string, std::string>{});
    demo.object_scales = j.value("object_scales", std::map<std::string, double>{});
    if (j.contains("grasp_windows")) {
      for (const auto& [obj, w] : j.at("grasp_windows").items()) {
        GraspWindow window;
        window.start_step = w.at("start_step").get<std::size_t>();
        window.end_step = w.at("end_step").get<std::size_t>();
        window.relative_pose = transform_from_json(w.at("relative_pose"));
        demo.grasp_windows[obj] = window;
      }
    }
  } catch (const Json::exception& e) {
    raise(Errc::SchemaError, std::string("demonstration file: ") + e.what());
  }
  demo.validate();
  return demo;
}

inline void save_demonstration(const std::filesystem::path& path, const Demonstration& demo) {
  write_json_file(path, to_json(demo));
}

inline Demonstration load_demonstration(const std::filesystem::path& path) {
  return demonstration_from_json(load_json_file(path));
}

}  // namespace exogs
