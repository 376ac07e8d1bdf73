// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "exogs/demo.hpp"
#include "exogs/error.hpp"
#include "exogs/geometry.hpp"
#include "exogs/rng.hpp"
#include "exogs/serde.hpp"

namespace exogs {

constexpr double kDefaultCloseThreshold = 0.3;
constexpr double kDefaultOpenThreshold = 0.7;

/// Finds the grasp interval from the gripper signal: it opens at the first
/// step with g below the close threshold and closes at the first later step
/// with g above the open threshold (or the last step). The relative pose is
/// frozen at the window start.
inline GraspWindow detect_grasp_window(const Demonstration& demo, const std::string& object_id,
                                       const std::vector<RigidTransform>& ee_poses,
                                       double close_threshold = kDefaultCloseThreshold,
                                       double open_threshold = kDefaultOpenThreshold) {
  require(open_threshold > close_threshold, Errc::OutOfRange, "open threshold must exceed close threshold");
  require(ee_poses.size() == demo.steps(), Errc::LengthMismatch, "end-effector pose count != H");
  const auto it = demo.object_tracks.find(object_id);
  require(it != demo.object_tracks.end(), Errc::SchemaError, "demonstration has no object '" + object_id + "'");

  const auto& states = demo.trajectory.states;
  std::optional<std::size_t> start;
  for (std::size_t t = 0; t < states.size(); ++t) {
    if (states[t].g < close_threshold) {
      start = t;
      break;
    }
  }
  if (!start) raise(Errc::NoGraspDetected, "gripper never closes below " + std::to_string(close_threshold));

  std::size_t end = states.size() - 1;
  for (std::size_t t = *start + 1; t < states.size(); ++t) {
    if (states[t].g > open_threshold) {
      end = t;
      break;
    }
  }

  GraspWindow window;
  window.start_step = *start;
  window.end_step = end;
  window.relative_pose = compose(invert(ee_poses[*start]), it->second[*start]);
  return window;
}

/// The *fix* operation: inside the window the object rigidly follows the
/// end-effector (T_obj = T_ee o relative_pose); outside it the tracked poses
/// are kept unchanged.
inline std::vector<RigidTransform> fix_object(const Demonstration& demo, const std::string& object_id,
                                              const GraspWindow& window,
                                              const std::vector<RigidTransform>& ee_poses) {
  const auto it = demo.object_tracks.find(object_id);
  require(it != demo.object_tracks.end(), Errc::SchemaError, "demonstration has no object '" + object_id + "'");
  require(ee_poses.size() == demo.steps(), Errc::LengthMismatch, "end-effector pose count != H");
  require(window.start_step <= window.end_step && window.end_step < demo.steps(), Errc::OutOfRange,
          "grasp window outside trajectory");

  std::vector<RigidTransform> poses = it->second;
  for (std::size_t t = window.start_step; t <= window.end_step; ++t) {
    poses[t] = compose(ee_poses[t], window.relative_pose);
  }
  return poses;
}

/// Convenience wrapper: detect, fix, and record the window on the demo.
inline Demonstration apply_fix(const Demonstration& demo, const std::string& object_id,
                               const std::vector<RigidTransform>& ee_poses,
                               double close_threshold = kDefaultCloseThreshold,
                               double open_threshold = kDefaultOpenThreshold) {
  Demonstration out = demo;
  const GraspWindow window = detect_grasp_window(demo, object_id, ee_poses, close_threshold, open_threshold);
  out.object_tracks[object_id] = fix_object(demo, object_id, window, ee_poses);
  out.grasp_windows[object_id] = window;
  return out;
}

inline bool is_identity(const RigidTransform& t) {
  return t.rotation.w() == 1.0 && t.rotation.x() == 0.0 && t.rotation.y() == 0.0 && t.rotation.z() == 0.0 &&
         t.translation.x() == 0.0 && t.translation.y() == 0.0 && t.translation.z() == 0.0;
}

/// Rebinds an object to a different Gaussian asset so the recorded pose
/// sequence is reused as-is. A non-identity grasp offset shifts every
/// in-window pose in the end-effector frame and therefore needs a recorded
/// grasp window.
inline Demonstration substitute_object(const Demonstration& demo, const std::string& object_id,
                                       const std::string& new_asset_id, const std::set<std::string>& known_assets,
                                       const RigidTransform& grasp_offset = RigidTransform::identity()) {
  require(demo.object_tracks.count(object_id) > 0, Errc::SchemaError,
          "demonstration has no object '" + object_id + "'");
  require(known_assets.count(new_asset_id) > 0, Errc::UnknownAsset,
          "asset '" + new_asset_id + "' is not registered in the scene library");

  Demonstration out = demo;
  out.object_assets[object_id] = new_asset_id;
  if (is_identity(grasp_offset)) return out;

  const auto wit = out.grasp_windows.find(object_id);
  require(wit != out.grasp_windows.end(), Errc::SchemaError,
          "grasp offset for '" + object_id + "' needs a recorded grasp window (run fix first)");
  auto& poses = out.object_tracks[object_id];
  for (std::size_t t = wit->second.start_step; t <= wit->second.end_step; ++t) {
    poses[t] = compose(poses[t], grasp_offset);
  }
  wit->second.relative_pose = compose(wit->second.relative_pose, grasp_offset);
  return out;
}

/// One rigid perturbation (uniform direction/axis, uniform magnitude within
/// the bounds) applied to the whole pre-grasp segment, rotating about the
/// object's initial position, plus a uniform asset scale factor. In-window
/// poses keep following the end-effector, so grasp geometry is preserved.
inline Demonstration perturb_poses_with(const Demonstration& demo, const std::string& object_id, PhiloxRng& rng,
                                        double max_translation, double max_rotation,
                                        std::array<double, 2> scale_range = {1.0, 1.0}) {
  require(max_translation >= 0.0 && max_rotation >= 0.0, Errc::OutOfRange, "perturbation bounds must be >= 0");
  require(scale_range[0] > 0.0 && scale_range[0] <= scale_range[1], Errc::OutOfRange,
          "scale range must satisfy 0 < lo <= hi");
  const auto it = demo.object_tracks.find(object_id);
  require(it != demo.object_tracks.end(), Errc::SchemaError, "demonstration has no object '" + object_id + "'");

  const Eigen::Quaterniond delta_rot = rng.rotation_within(max_rotation);
  const Vec3 delta_trans = rng.vector_in_ball(max_translation);
  const double scale = rng.uniform(scale_range[0], scale_range[1]);

  Demonstration out = demo;
  const std::size_t pre_grasp_end =  // first step NOT perturbed
      out.grasp_windows.count(object_id) ? out.grasp_windows.at(object_id).start_step : demo.steps();

  if (pre_grasp_end > 0 && (max_translation > 0.0 || max_rotation > 0.0)) {
    const Vec3 anchor = it->second.front().translation;
    const RigidTransform perturbation(delta_rot, delta_trans + anchor - delta_rot * anchor);
    auto& poses = out.object_tracks[object_id];
    for (std::size_t t = 0; t < pre_grasp_end; ++t) poses[t] = compose(perturbation, poses[t]);
  }
  out.object_scales[object_id] = out.object_scales.count(object_id) ? out.object_scales[object_id] * scale : scale;
  return out;
}

/// Deterministic per (seed, object_id).
inline Demonstration perturb_poses(const Demonstration& demo, const std::string& object_id, std::uint64_t seed,
                                   double max_translation, double max_rotation,
                                   std::array<double, 2> scale_range = {1.0, 1.0}) {
  PhiloxRng rng = make_rng(seed, 0, RngStream::PoseProcess, static_cast<std::uint32_t>(fnv1a_hash(object_id)));
  return perturb_poses_with(demo, object_id, rng, max_translation, max_rotation, scale_range);
}

/// The recorded trajectory is not re-solved for perturbed object poses;
/// beyond these bounds the replay stops being physically plausible.
inline std::optional<std::string> perturbation_plausibility_warning(double max_translation, double max_rotation) {
  constexpr double kMaxPlausibleTranslation = 0.10;  // meters
  constexpr double kMaxPlausibleRotation = 0.35;     // ~20 degrees
  if (max_translation > kMaxPlausibleTranslation || max_rotation > kMaxPlausibleRotation) {
    return "perturbation bounds (" + std::to_string(max_translation) + " m, " + std::to_string(max_rotation) +
           " rad) exceed the range where the recorded trajectory stays plausible";
  }
  return std::nullopt;
}

}  // namespace exogs
