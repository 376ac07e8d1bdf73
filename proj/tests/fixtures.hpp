// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "exogs/demo.hpp"
#include "exogs/geometry.hpp"
#include "exogs/gscene.hpp"
#include "exogs/kinematics.hpp"

namespace fixtures {

/// Unique temp directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("exogs_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline exogs::RigidTransform random_transform(std::mt19937& gen, double translation_scale = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const exogs::Quat q(normal(gen), normal(gen), normal(gen), normal(gen));
  std::uniform_real_distribution<double> uniform(-translation_scale, translation_scale);
  return exogs::RigidTransform(q, exogs::Vec3(uniform(gen), uniform(gen), uniform(gen)));
}

/// Serial chain of `n` revolute joints with alternating axes, a fixed
/// end-effector offset, and two prismatic gripper fingers.
inline std::string chain_urdf(int n) {
  std::ostringstream out;
  out << "<robot name=\"chain" << n << "\">\n";
  out << "  <link name=\"base\"/>\n";
  for (int i = 1; i <= n; ++i) out << "  <link name=\"l" << i << "\"/>\n";
  out << "  <link name=\"ee\"/>\n  <link name=\"finger_l\"/>\n  <link name=\"finger_r\"/>\n";
  for (int i = 1; i <= n; ++i) {
    const std::string parent = i == 1 ? "base" : "l" + std::to_string(i - 1);
    const char* axis = i % 2 == 1 ? "0 0 1" : "0 1 0";
    out << "  <joint name=\"j" << i << "\" type=\"revolute\">\n";
    out << "    <parent link=\"" << parent << "\"/>\n";
    out << "    <child link=\"l" << i << "\"/>\n";
    out << "    <origin xyz=\"" << (i % 3 == 0 ? "0.1 0 0.2" : "0 0 0.25") << "\" rpy=\"0 0 0\"/>\n";
    out << "    <axis xyz=\"" << axis << "\"/>\n";
    out << "    <limit lower=\"-3.0\" upper=\"3.0\"/>\n";
    out << "  </joint>\n";
  }
  out << "  <joint name=\"ee_mount\" type=\"fixed\">\n"
         "    <parent link=\"l" << n << "\"/>\n"
         "    <child link=\"ee\"/>\n"
         "    <origin xyz=\"0 0 0.1\" rpy=\"0 0 0\"/>\n"
         "  </joint>\n";
  for (const char* side : {"l", "r"}) {
    out << "  <joint name=\"finger_" << side << "_joint\" type=\"prismatic\">\n"
        << "    <parent link=\"ee\"/>\n"
        << "    <child link=\"finger_" << side << "\"/>\n"
        << "    <origin xyz=\"0 0 0.03\" rpy=\"0 0 0\"/>\n"
        << "    <axis xyz=\"0 " << (side[0] == 'l' ? "1" : "-1") << " 0\"/>\n"
        << "    <limit lower=\"0\" upper=\"0.04\"/>\n"
        << "  </joint>\n";
  }
  out << "  <gripper min_open=\"0.0\" max_open=\"0.08\" joints=\"finger_l_joint finger_r_joint\"/>\n";
  out << "  <end_effector link=\"ee\"/>\n";
  out << "</robot>\n";
  return out.str();
}

/// Compact blob of gaussians around `center`; deterministic per seed.
inline exogs::GaussianAsset make_asset(const std::string& id, std::uint8_t label, std::size_t count,
                                       const exogs::Vec3& center, double spread, int sh_bands, unsigned seed,
                                       double opacity = 0.9) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> color(-0.6, 0.6);

  exogs::GaussianAsset asset;
  asset.asset_id = id;
  asset.instance_label = label;
  asset.count = count;
  asset.sh_bands = sh_bands;
  asset.positions.resize(count * 3);
  asset.log_scales.resize(count * 3);
  asset.rotations.resize(count * 4);
  asset.opacity_logits.resize(count);
  asset.sh.assign(count * 3 * static_cast<std::size_t>(sh_bands), 0.0);
  for (std::size_t n = 0; n < count; ++n) {
    for (int a = 0; a < 3; ++a) asset.positions[3 * n + a] = center(a) + spread * normal(gen);
    for (int a = 0; a < 3; ++a) asset.log_scales[3 * n + a] = std::log(spread * 0.5 * (0.5 + 0.08 * std::abs(normal(gen))));
    exogs::Quat q(normal(gen), normal(gen), normal(gen), normal(gen));
    q = exogs::RigidTransform::canonicalized(q);
    asset.rotations[4 * n] = q.w();
    asset.rotations[4 * n + 1] = q.x();
    asset.rotations[4 * n + 2] = q.y();
    asset.rotations[4 * n + 3] = q.z();
    asset.opacity_logits[n] = exogs::logit(opacity);
    for (int c = 0; c < 3; ++c) {
      asset.sh_channel(n, c)[0] = color(gen) / exogs::kShC0;
      for (int k = 1; k < sh_bands; ++k) asset.sh_channel(n, c)[k] = 0.15 * color(gen);
    }
  }
  return asset;
}

/// One gaussian with an exact decoded base color (at gain 1, degree 0).
inline exogs::GaussianAsset make_single_gaussian(const std::string& id, std::uint8_t label, const exogs::Vec3& pos,
                                                 double scale, double opacity, const exogs::Vec3& rgb) {
  exogs::GaussianAsset asset;
  asset.asset_id = id;
  asset.instance_label = label;
  asset.count = 1;
  asset.sh_bands = 1;
  asset.positions = {pos.x(), pos.y(), pos.z()};
  asset.log_scales = {std::log(scale), std::log(scale), std::log(scale)};
  asset.rotations = {1.0, 0.0, 0.0, 0.0};
  asset.opacity_logits = {exogs::logit(opacity)};
  asset.sh = {(rgb.x() - 0.5) / exogs::kShC0, (rgb.y() - 0.5) / exogs::kShC0, (rgb.z() - 0.5) / exogs::kShC0};
  return asset;
}

/// Camera at `center` looking at `target` (+z forward, +y image-down).
inline exogs::CameraModel look_at_camera(const exogs::Vec3& center, const exogs::Vec3& target, double fx, int width,
                                         int height) {
  exogs::CameraModel cam;
  cam.fx = fx;
  cam.fy = fx;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.width = width;
  cam.height = height;
  const exogs::Vec3 forward = (target - center).normalized();
  exogs::Vec3 down(0.0, 0.0, -1.0);  // world -z as image-down reference
  exogs::Vec3 right = down.cross(forward);
  if (right.norm() < 1e-9) right = exogs::Vec3(1.0, 0.0, 0.0);
  right.normalize();
  down = forward.cross(right);
  exogs::Mat3 cam_to_world;
  cam_to_world.col(0) = right;
  cam_to_world.col(1) = down;
  cam_to_world.col(2) = forward;
  const exogs::Mat3 world_to_cam = cam_to_world.transpose();
  cam.extrinsics = exogs::RigidTransform(exogs::Quat(world_to_cam), -(world_to_cam * center));
  return cam;
}

struct DemoFixtureFiles {
  std::filesystem::path manifest;
  std::filesystem::path robot;
  std::filesystem::path joints;
  std::filesystem::path tracks;
  std::filesystem::path cameras;
};

/// Writes a complete ingest fixture: a chain robot, a joint log whose gripper
/// closes mid-episode, a moving object tracked by `camera_count` cameras, and
/// the camera calibration file.
inline DemoFixtureFiles write_demo_fixture(const std::filesystem::path& dir, int steps = 5, int camera_count = 1,
                                           int arm_joints = 7) {
  DemoFixtureFiles files;
  files.manifest = dir / "demo.json";
  files.robot = dir / "robot.urdf";
  files.joints = dir / "joints.csv";
  files.tracks = dir / "tracks.jsonl";
  files.cameras = dir / "cameras.json";

  {
    std::ofstream out(files.robot);
    out << chain_urdf(arm_joints);
  }
  {
    std::ofstream out(files.joints);
    out << "t";
    for (int i = 1; i <= arm_joints; ++i) out << ",q" << i;
    out << ",g\n";
    for (int t = 0; t < steps; ++t) {
      out << 0.1 * t;
      for (int i = 0; i < arm_joints; ++i) out << "," << 0.05 * (i + 1) * std::sin(0.3 * t + i);
      const double g = t < steps / 2 ? 1.0 : 0.1;  // closes halfway through
      out << "," << g << "\n";
    }
  }

  std::vector<exogs::CameraModel> cams;
  for (int k = 0; k < camera_count; ++k) {
    cams.push_back(look_at_camera(exogs::Vec3(0.8 + 0.1 * k, -0.6 + 0.25 * k, 0.9), exogs::Vec3(0.2, 0.0, 0.3),
                                  180.0, 64, 48));
  }
  {
    exogs::Json j = exogs::Json::object();
    for (int k = 0; k < camera_count; ++k) {
      exogs::Json cam = exogs::to_json(cams[static_cast<std::size_t>(k)]);
      cam["primary"] = k == 0;
      j["cam" + std::to_string(k)] = cam;
    }
    std::ofstream out(files.cameras);
    out << j.dump(2) << "\n";
  }
  {
    std::ofstream out(files.tracks);
    for (int t = 0; t < steps; ++t) {
      const exogs::RigidTransform world_pose(
          exogs::Quat(Eigen::AngleAxisd(0.1 * t, exogs::Vec3::UnitZ())),
          exogs::Vec3(0.25 + 0.01 * t, 0.02 * t, 0.05));
      for (int k = 0; k < camera_count; ++k) {
        const exogs::RigidTransform cam_pose = compose(cams[static_cast<std::size_t>(k)].extrinsics, world_pose);
        exogs::Json row{{"t", 0.1 * t},
                        {"object_id", "cube"},
                        {"camera_id", "cam" + std::to_string(k)},
                        {"quat_wxyz", {cam_pose.rotation.w(), cam_pose.rotation.x(), cam_pose.rotation.y(),
                                       cam_pose.rotation.z()}},
                        {"translation", {cam_pose.translation.x(), cam_pose.translation.y(),
                                         cam_pose.translation.z()}},
                        {"valid", true}};
        out << row.dump() << "\n";
      }
    }
  }
  {
    exogs::Json manifest{{"robot", "robot.urdf"}, {"joints", "joints.csv"}, {"tracks", "tracks.jsonl"},
                         {"cameras", "cameras.json"}};
    std::ofstream out(files.manifest);
    out << manifest.dump(2) << "\n";
  }
  return files;
}

/// Asset manifest with an environment slab, one asset per robot link, and a
/// cube object; returns the manifest path.
inline std::filesystem::path write_asset_fixture(const std::filesystem::path& dir, const exogs::RobotModel& model,
                                                 std::size_t env_count = 60, std::size_t link_count = 12,
                                                 std::size_t object_count = 20) {
  exogs::Json manifest = exogs::Json::object();
  unsigned seed = 101;

  const auto env = make_asset("env", 0, env_count, exogs::Vec3(0.2, 0.0, -0.05), 0.35, 4, seed++, 0.95);
  exogs::save_splat(dir / "env.ply", env);
  manifest["env"] = exogs::Json{{"path", "env.ply"}, {"instance_label", 0}, {"binding", "environment"}};

  for (const auto& link : model.links) {
    if (link.name == "base") continue;
    const auto asset = make_asset("asset_" + link.name, 1, link_count, exogs::Vec3(0.0, 0.0, 0.05), 0.04, 1, seed++);
    exogs::save_splat(dir / ("asset_" + link.name + ".ply"), asset);
    manifest["asset_" + link.name] =
        exogs::Json{{"path", "asset_" + link.name + ".ply"}, {"instance_label", 1}, {"binding", link.name}};
  }

  const auto cube = make_asset("cube", 2, object_count, exogs::Vec3(0.0, 0.0, 0.0), 0.03, 4, seed++, 0.97);
  exogs::save_splat(dir / "cube.ply", cube);
  manifest["cube"] = exogs::Json{{"path", "cube.ply"}, {"instance_label", 2}, {"binding", "cube"}};

  const auto ball = make_asset("ball", 2, object_count, exogs::Vec3(0.0, 0.0, 0.0), 0.03, 1, seed++, 0.97);
  exogs::save_splat(dir / "ball.ply", ball);
  manifest["ball"] = exogs::Json{{"path", "ball.ply"}, {"instance_label", 2}, {"binding", "ball"}};

  const auto path = dir / "assets.json";
  std::ofstream out(path);
  out << manifest.dump(2) << "\n";
  return path;
}

/// Relative path -> file bytes for every regular file under root.
inline std::map<std::string, std::vector<char>> snapshot_tree(const std::filesystem::path& root) {
  std::map<std::string, std::vector<char>> out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    out[std::filesystem::relative(entry.path(), root).generic_string()] =
        std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return out;
}

/// Ready-to-render in-memory pipeline fixture.
struct PipelineFixture {
  exogs::RobotModel model;
  exogs::Demonstration demo;
  exogs::AssetLibrary lib;
  std::filesystem::path asset_manifest;
  std::filesystem::path demo_manifest;
};

inline PipelineFixture make_pipeline_fixture(const std::filesystem::path& dir, int steps = 4, int cameras = 1,
                                             int arm_joints = 3, std::size_t env_count = 40,
                                             std::size_t link_count = 8, std::size_t object_count = 15) {
  const auto files = write_demo_fixture(dir, steps, cameras, arm_joints);
  PipelineFixture fix;
  fix.demo_manifest = files.manifest;
  fix.model = exogs::load_robot(files.robot);
  fix.demo = exogs::build_demonstration(exogs::load_demo(files.manifest), "fixture");
  fix.asset_manifest = write_asset_fixture(dir, fix.model, env_count, link_count, object_count);
  fix.lib = exogs::load_asset_library(fix.asset_manifest);
  return fix;
}

}  // namespace fixtures
