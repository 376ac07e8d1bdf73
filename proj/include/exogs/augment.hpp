// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "exogs/demo.hpp"
#include "exogs/error.hpp"
#include "exogs/geometry.hpp"
#include "exogs/gscene.hpp"
#include "exogs/image.hpp"
#include "exogs/kinematics.hpp"
#include "exogs/poseproc.hpp"
#include "exogs/render.hpp"
#include "exogs/rng.hpp"
#include "exogs/semantics.hpp"
#include "exogs/serde.hpp"

namespace exogs {

struct ViewpointPlan {
  bool enabled = false;
  int count = 10;              // distinct camera draws; episodes cycle through them
  double max_rot_deg = 10.0;
  double max_trans_m = 0.10;
  std::optional<Vec3> look_at;  // re-aim target; absent keeps the original aim
};

struct LocalBrightnessPlan {
  int count = 0;
  double radius_m = 0.15;
  std::array<double, 2> strength_range{1.0, 1.0};
};

struct ColorPlan {
  bool enabled = false;
  std::array<double, 2> rgb_scale_range{0.6, 1.4};
  std::array<double, 2> global_brightness_range{0.7, 1.3};
  LocalBrightnessPlan local_brightness;
};

struct BackgroundPlan {
  bool enabled = false;
  std::string image_directory;
  int per_episode_count = 1;
};

struct ObjectPlan {
  bool enabled = false;
  double max_translation = 0.05;                  // meters
  double max_rotation = 15.0 * M_PI / 180.0;      // radians
  std::array<double, 2> scale_range{0.9, 1.1};
  std::vector<std::pair<std::string, std::string>> substitutions;  // object_id -> asset_id
};

/// Full augmentation recipe; everything random flows from `seed`.
struct AugmentPlan {
  std::uint64_t seed = 0;
  int multiplier = 1;
  ViewpointPlan viewpoint;
  ColorPlan color;
  BackgroundPlan background;
  ObjectPlan object;
  std::map<std::string, double> mix_weights;  // strategy name -> weight, default even

  void validate() const {
    require(multiplier >= 1, Errc::OutOfRange, "multiplier must be >= 1");
    const auto ordered = [](const std::array<double, 2>& r, const char* what) {
      require(r[0] <= r[1], Errc::OutOfRange, std::string(what) + " range must have lo <= hi");
    };
    ordered(color.rgb_scale_range, "rgb scale");
    ordered(color.global_brightness_range, "global brightness");
    ordered(color.local_brightness.strength_range, "local brightness");
    ordered(object.scale_range, "object scale");
    require(color.rgb_scale_range[0] >= 0.0 && color.rgb_scale_range[1] <= 4.0 &&
                color.global_brightness_range[0] >= 0.0 && color.global_brightness_range[1] <= 4.0 &&
                color.local_brightness.strength_range[0] >= 0.0 && color.local_brightness.strength_range[1] <= 4.0,
            Errc::OutOfRange, "color ranges must lie within [0, 4]");
    require(viewpoint.max_rot_deg >= 0.0 && viewpoint.max_trans_m >= 0.0, Errc::OutOfRange,
            "viewpoint bounds must be >= 0");
    require(viewpoint.count >= 1, Errc::OutOfRange, "viewpoint count must be >= 1");
    require(object.max_translation >= 0.0 && object.max_rotation >= 0.0, Errc::OutOfRange,
            "object bounds must be >= 0");
    require(object.scale_range[0] > 0.0, Errc::OutOfRange, "object scale range must be positive");
    require(background.per_episode_count >= 1, Errc::OutOfRange, "per_episode_count must be >= 1");
    for (const auto& [name, weight] : mix_weights) {
      require(weight >= 0.0, Errc::OutOfRange, "mix weight for '" + name + "' must be >= 0");
    }
  }

  std::vector<std::string> enabled_strategies() const {
    std::vector<std::string> out;
    if (viewpoint.enabled) out.push_back("viewpoint");
    if (color.enabled) out.push_back("color");
    if (background.enabled) out.push_back("background");
    if (object.enabled) out.push_back("object");
    return out;
  }
};

inline Json to_json(const AugmentPlan& plan) {
  Json j{{"seed", plan.seed}, {"multiplier", plan.multiplier}};
  if (plan.viewpoint.enabled) {
    Json v{{"count", plan.viewpoint.count},
           {"max_rot_deg", plan.viewpoint.max_rot_deg},
           {"max_trans_m", plan.viewpoint.max_trans_m}};
    if (plan.viewpoint.look_at) {
      v["look_at_point"] = {plan.viewpoint.look_at->x(), plan.viewpoint.look_at->y(), plan.viewpoint.look_at->z()};
    }
    j["viewpoint"] = v;
  }
  if (plan.color.enabled) {
    j["color"] = Json{{"rgb_scale_range", plan.color.rgb_scale_range},
                      {"global_brightness_range", plan.color.global_brightness_range},
                      {"local_brightness", Json{{"count", plan.color.local_brightness.count},
                                                {"radius_m", plan.color.local_brightness.radius_m},
                                                {"strength_range", plan.color.local_brightness.strength_range}}}};
  }
  if (plan.background.enabled) {
    j["background"] = Json{{"image_directory", plan.background.image_directory},
                           {"per_episode_count", plan.background.per_episode_count}};
  }
  if (plan.object.enabled) {
    Json subs = Json::array();
    for (const auto& [obj, asset] : plan.object.substitutions) subs.push_back(Json::array({obj, asset}));
    j["object"] = Json{{"max_translation", plan.object.max_translation},
                       {"max_rotation", plan.object.max_rotation},
                       {"scale_range", plan.object.scale_range},
                       {"substitutions", subs}};
  }
  if (!plan.mix_weights.empty()) j["mix_weights"] = plan.mix_weights;
  return j;
}

inline AugmentPlan plan_from_json(const Json& j) {
  AugmentPlan plan;
  try {
    plan.seed = j.value("seed", std::uint64_t{0});
    plan.multiplier = j.value("multiplier", 1);
    if (j.contains("viewpoint")) {
      const auto& v = j.at("viewpoint");
      plan.viewpoint.enabled = v.value("enabled", true);
      plan.viewpoint.count = v.value("count", plan.viewpoint.count);
      plan.viewpoint.max_rot_deg = v.value("max_rot_deg", plan.viewpoint.max_rot_deg);
      plan.viewpoint.max_trans_m = v.value("max_trans_m", plan.viewpoint.max_trans_m);
      if (v.contains("look_at_point")) {
        const auto& p = v.at("look_at_point");
        plan.viewpoint.look_at = Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
      }
    }
    if (j.contains("color")) {
      const auto& c = j.at("color");
      plan.color.enabled = c.value("enabled", true);
      plan.color.rgb_scale_range = c.value("rgb_scale_range", plan.color.rgb_scale_range);
      plan.color.global_brightness_range = c.value("global_brightness_range", plan.color.global_brightness_range);
      if (c.contains("local_brightness")) {
        const auto& l = c.at("local_brightness");
        plan.color.local_brightness.count = l.value("count", 0);
        plan.color.local_brightness.radius_m = l.value("radius_m", plan.color.local_brightness.radius_m);
        plan.color.local_brightness.strength_range =
            l.value("strength_range", plan.color.local_brightness.strength_range);
      }
    }
    if (j.contains("background")) {
      const auto& b = j.at("background");
      plan.background.enabled = b.value("enabled", true);
      plan.background.image_directory = b.value("image_directory", std::string{});
      plan.background.per_episode_count = b.value("per_episode_count", 1);
    }
    if (j.contains("object")) {
      const auto& o = j.at("object");
      plan.object.enabled = o.value("enabled", true);
      plan.object.max_translation = o.value("max_translation", plan.object.max_translation);
      plan.object.max_rotation = o.value("max_rotation", plan.object.max_rotation);
      plan.object.scale_range = o.value("scale_range", plan.object.scale_range);
      if (o.contains("substitutions")) {
        for (const auto& s : o.at("substitutions")) {
          plan.object.substitutions.emplace_back(s.at(0).get<std::string>(), s.at(1).get<std::string>());
        }
      }
    }
    plan.mix_weights = j.value("mix_weights", std::map<std::string, double>{});
  } catch (const Json::exception& e) {
    raise(Errc::SchemaError, std::string("augment plan: ") + e.what());
  }
  plan.validate();
  return plan;
}

inline AugmentPlan load_plan(const std::filesystem::path& path) { return plan_from_json(load_json_file(path)); }

inline std::string plan_hash(const AugmentPlan& plan) { return hash_hex(fnv1a_hash(to_json(plan).dump())); }

/// Perturbs the camera position within a ball, optionally re-aims at the
/// look-at point, then perturbs the orientation; intrinsics never change.
/// Zero bounds return the input camera verbatim.
inline CameraModel augment_viewpoint(const CameraModel& cam, const ViewpointPlan& plan, PhiloxRng rng) {
  cam.validate();
  if (plan.max_trans_m == 0.0 && plan.max_rot_deg == 0.0) return cam;

  const Vec3 center = cam.center() + rng.vector_in_ball(plan.max_trans_m);
  Mat3 cam_to_world = cam.extrinsics.rotation_matrix().transpose();

  if (plan.look_at) {
    const Vec3 forward = (*plan.look_at - center).normalized();
    const Vec3 prev_down = cam_to_world.col(1);  // camera +y (image down) in world
    Vec3 right = prev_down.cross(forward);
    if (right.norm() < 1e-9) right = forward.cross(cam_to_world.col(0));  // degenerate aim, keep roll from +x
    right.normalize();
    const Vec3 down = forward.cross(right);
    cam_to_world.col(0) = right;
    cam_to_world.col(1) = down;
    cam_to_world.col(2) = forward;
  }
  const Mat3 jitter = rng.rotation_within(plan.max_rot_deg * M_PI / 180.0).toRotationMatrix();
  cam_to_world = jitter * cam_to_world;

  CameraModel out = cam;
  const Mat3 world_to_cam = cam_to_world.transpose();
  out.extrinsics = RigidTransform(Quat(world_to_cam), -(world_to_cam * center));
  return out;
}

namespace augment_detail {

/// World positions of every gaussian of a placement (scale about the asset
/// centroid, then the rigid placement pose).
inline std::vector<Vec3> placement_world_positions(const Placement& placement) {
  const GaussianAsset& asset = *placement.asset;
  const Vec3 c = asset.centroid();
  std::vector<Vec3> out(asset.count);
  for (std::size_t n = 0; n < asset.count; ++n) {
    out[n] = placement.pose.apply(c + placement.scale * (asset.position(n) - c));
  }
  return out;
}

}  // namespace augment_detail

/// Color and illumination edits: per-asset RGB gains on decoded color, one
/// global brightness factor on the DC coefficients, and multiplicative local
/// brightness pools around world points sampled in the reference frame
/// (the episode's first composed frame).
inline AssetLibrary augment_color(const AssetLibrary& lib, const ColorPlan& plan, PhiloxRng rng,
                                  const FrameScene* reference_frame = nullptr) {
  AssetLibrary out = lib;
  const double global_brightness = rng.uniform(plan.global_brightness_range[0], plan.global_brightness_range[1]);

  for (const auto& [asset_id, rec] : lib.records()) {
    GaussianAsset edited = *rec.asset;
    edited.base_color_gain = Vec3(rng.uniform(plan.rgb_scale_range[0], plan.rgb_scale_range[1]),
                                  rng.uniform(plan.rgb_scale_range[0], plan.rgb_scale_range[1]),
                                  rng.uniform(plan.rgb_scale_range[0], plan.rgb_scale_range[1]));
    if (global_brightness != 1.0) {
      for (std::size_t n = 0; n < edited.count; ++n) {
        for (int c = 0; c < 3; ++c) edited.sh_channel(n, c)[0] *= global_brightness;
      }
    }
    out.replace_asset(asset_id, std::move(edited));
  }

  if (plan.local_brightness.count > 0 && reference_frame != nullptr) {
    // Scene bounding box and per-asset world positions at the reference frame.
    std::map<std::string, std::vector<Vec3>> world_positions;
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
    Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
    for (const auto& placement : reference_frame->placements) {
      auto positions = augment_detail::placement_world_positions(placement);
      for (const auto& p : positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
      world_positions[placement.asset_id] = std::move(positions);
    }
    if (!world_positions.empty()) {
      for (int draw = 0; draw < plan.local_brightness.count; ++draw) {
        const Vec3 point(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()), rng.uniform(lo.z(), hi.z()));
        const double strength =
            rng.uniform(plan.local_brightness.strength_range[0], plan.local_brightness.strength_range[1]);
        const double r2 = plan.local_brightness.radius_m * plan.local_brightness.radius_m;
        for (const auto& [asset_id, positions] : world_positions) {
          GaussianAsset edited = out.at(asset_id);
          bool touched = false;
          if (edited.local_gain.empty()) edited.local_gain.assign(edited.count, 1.0);
          for (std::size_t n = 0; n < positions.size() && n < edited.count; ++n) {
            if ((positions[n] - point).squaredNorm() <= r2) {
              edited.local_gain[n] *= strength;
              touched = true;
            }
          }
          if (touched) out.replace_asset(asset_id, std::move(edited));
        }
      }
    }
  }
  return out;
}

inline ImageF load_background(const std::filesystem::path& path, int width, int height) {
  try {
    return fit_image(load_image_rgb(path), width, height);
  } catch (const Error& e) {
    if (e.code() == Errc::ImageLoadError || e.code() == Errc::MissingFile) {
      raise(Errc::ImageLoadError, "background image " + path.string() + ": " + e.what());
    }
    throw;
  }
}

/// Residual-transmittance compositing: rgb += T * image. Instance, depth and
/// alpha channels are untouched.
inline RenderOutput augment_background(const RenderOutput& output, const ImageF& image) {
  require(image.width == output.rgb.width && image.height == output.rgb.height && image.channels == 3,
          Errc::LengthMismatch, "background image does not match the render resolution");
  RenderOutput out = output;
  for (int y = 0; y < out.rgb.height; ++y) {
    for (int x = 0; x < out.rgb.width; ++x) {
      const float t = out.transmittance.at(x, y);
      for (int c = 0; c < 3; ++c) out.rgb.at(x, y, c) += t * image.at(x, y, c);
    }
  }
  return out;
}

struct RunPlanOptions {
  std::filesystem::path out_dir;
  RenderConfig render;
  RelationSet relations = RelationSet::default_for(3);
  int patch_size = kDefaultPatchSize;
  bool materialize_masks = false;
  bool write_transmittance = false;
  bool resume = false;  // skip episodes whose provenance already matches on disk
};

namespace augment_detail {

/// Largest-remainder apportionment of `total` episodes over the enabled
/// strategies, then a deterministic round-robin interleave.
inline std::vector<std::string> assign_strategies(const AugmentPlan& plan) {
  const auto strategies = plan.enabled_strategies();
  const int total = plan.multiplier;
  if (strategies.empty()) return std::vector<std::string>(static_cast<std::size_t>(total), "none");

  std::vector<double> weights;
  double weight_sum = 0.0;
  for (const auto& name : strategies) {
    const auto it = plan.mix_weights.find(name);
    weights.push_back(it != plan.mix_weights.end() ? it->second : 1.0);
    weight_sum += weights.back();
  }
  require(weight_sum > 0.0, Errc::OutOfRange, "mix weights sum to zero");

  std::vector<int> counts(strategies.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t k = 0; k < strategies.size(); ++k) {
    const double exact = total * weights[k] / weight_sum;
    counts[k] = static_cast<int>(std::floor(exact));
    assigned += counts[k];
    remainders.push_back({exact - counts[k], k});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; i < total - assigned; ++i) counts[remainders[static_cast<std::size_t>(i)].second] += 1;

  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(total));
  while (static_cast<int>(out.size()) < total) {
    for (std::size_t k = 0; k < strategies.size() && static_cast<int>(out.size()) < total; ++k) {
      if (counts[k] > 0) {
        out.push_back(strategies[k]);
        --counts[k];
      }
    }
  }
  return out;
}

inline std::vector<std::filesystem::path> sorted_pngs(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), Errc::MissingFile, "background directory " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  require(!out.empty(), Errc::MissingFile, "no .png images in " + dir.string());
  return out;
}

}  // namespace augment_detail

/// Runs the plan over one demonstration: exactly `multiplier` episodes, each
/// produced by one strategy draw and reproducible from (seed, episode index).
/// Actions are copied bit-identically from the source demonstration.
inline std::vector<EpisodeDataset> run_plan(const Demonstration& demo, const RobotModel& model,
                                            const AssetLibrary& lib, const AugmentPlan& plan,
                                            const RunPlanOptions& options) {
  plan.validate();
  demo.validate();
  const std::string hash = plan_hash(plan);
  const auto assignment = augment_detail::assign_strategies(plan);
  const CameraModel base_camera = demo.cameras.at(demo.primary_camera);

  // Actions (and therefore link poses) are identical across episodes.
  const auto link_rows = replay_link_poses(model, demo.trajectory);
  const std::size_t steps = demo.steps();

  std::vector<std::filesystem::path> background_images;
  if (plan.background.enabled) {
    background_images = augment_detail::sorted_pngs(plan.background.image_directory);
  }

  std::map<std::string, int> strategy_position;
  std::vector<EpisodeDataset> episodes;
  episodes.reserve(assignment.size());

  for (std::uint32_t e = 0; e < assignment.size(); ++e) {
    const std::string& strategy = assignment[e];
    const int position = strategy_position[strategy]++;

    char id_buf[16];
    std::snprintf(id_buf, sizeof(id_buf), "ep%06u", e);
    const std::string episode_id = id_buf;

    EpisodeProvenance provenance;
    provenance.plan_hash = hash;
    provenance.seed = plan.seed;
    provenance.episode_index = e;
    provenance.strategy = strategy;
    provenance.source_demo_id = demo.source_id;

    if (options.resume && std::filesystem::exists(options.out_dir / episode_id / "meta.json")) {
      try {
        EpisodeDataset existing = load_episode(options.out_dir / episode_id);
        if (existing.provenance.plan_hash == provenance.plan_hash && existing.provenance.seed == provenance.seed &&
            existing.provenance.episode_index == provenance.episode_index &&
            existing.provenance.strategy == provenance.strategy) {
          episodes.push_back(std::move(existing));
          continue;
        }
      } catch (const Error&) {
        // Partial or corrupt episode: fall through and regenerate it.
      }
    }

    try {
      Demonstration episode_demo = demo;
      if (strategy == "object") {
        for (const auto& [object_id, asset_id] : plan.object.substitutions) {
          episode_demo = substitute_object(episode_demo, object_id, asset_id, lib.ids());
        }
        for (const auto& [object_id, track] : demo.object_tracks) {
          PhiloxRng rng = make_rng(plan.seed, e, RngStream::ObjectPose,
                                   static_cast<std::uint32_t>(fnv1a_hash(object_id)));
          episode_demo = perturb_poses_with(episode_demo, object_id, rng, plan.object.max_translation,
                                            plan.object.max_rotation, plan.object.scale_range);
        }
      }

      CameraModel camera = base_camera;
      if (strategy == "viewpoint") {
        // Episodes cycle through `count` distinct viewpoint draws.
        const std::uint32_t viewpoint_index = static_cast<std::uint32_t>(position % plan.viewpoint.count);
        camera = augment_viewpoint(base_camera, plan.viewpoint,
                                   make_rng(plan.seed, 0, RngStream::Viewpoint, viewpoint_index));
      }

      AssetLibrary episode_lib = lib;
      if (strategy == "color") {
        const FrameScene reference = compose_frame(lib, episode_demo, 0, link_rows[0], model, camera);
        episode_lib = augment_color(lib, plan.color, make_rng(plan.seed, e, RngStream::Color, 0), &reference);
      }

      std::vector<FrameScene> scenes;
      scenes.reserve(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        scenes.push_back(compose_frame(episode_lib, episode_demo, t, link_rows[t], model, camera));
      }
      std::vector<RenderOutput> outputs = render_sequence(scenes, options.render);

      if (strategy == "background") {
        PhiloxRng rng = make_rng(plan.seed, e, RngStream::Background, 0);
        std::vector<ImageF> drawn;
        for (int k = 0; k < plan.background.per_episode_count; ++k) {
          const auto index = std::min<std::size_t>(background_images.size() - 1,
                                                   static_cast<std::size_t>(rng.uniform() * background_images.size()));
          drawn.push_back(load_background(background_images[index], camera.width, camera.height));
        }
        for (std::size_t t = 0; t < outputs.size(); ++t) {
          const std::size_t which = t * drawn.size() / outputs.size();
          outputs[t] = augment_background(outputs[t], drawn[which]);
        }
      }

      std::vector<ImageF> rgb, depth, transmittance;
      std::vector<ImageU8> instance;
      for (auto& output : outputs) {
        rgb.push_back(std::move(output.rgb));
        instance.push_back(std::move(output.instance));
        depth.push_back(std::move(output.depth));
        transmittance.push_back(std::move(output.transmittance));
      }
      episodes.push_back(export_episode(options.out_dir, episode_id, rgb, instance, depth, demo.trajectory.states,
                                        camera, options.relations, options.patch_size, provenance,
                                        options.materialize_masks,
                                        options.write_transmittance ? &transmittance : nullptr));
    } catch (const Error& err) {
      raise(err.code(), std::string(err.what()) + " (episode " + std::to_string(e) + ")");
    }
  }
  return episodes;
}

}  // namespace exogs
