// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <random>

#include "exogs/gscene.hpp"
#include "exogs/sh.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace exogs;

namespace {

Mat3 covariance_oracle(const GaussianAsset& asset, std::size_t n) {
  // Own quaternion-to-matrix conversion, then R S S^T R^T.
  double r[9];
  oracle::detail::quat_to_mat3(asset.rotations[4 * n], asset.rotations[4 * n + 1], asset.rotations[4 * n + 2],
                               asset.rotations[4 * n + 3], r);
  Mat3 rm;
  rm << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
  Vec3 s(std::exp(asset.log_scales[3 * n]), std::exp(asset.log_scales[3 * n + 1]),
         std::exp(asset.log_scales[3 * n + 2]));
  return rm * s.cwiseProduct(s).asDiagonal() * rm.transpose();
}

}  // namespace

TEST_CASE("splat file round trip echoes a single gaussian") {
  fixtures::TempDir dir("splat_echo");
  const GaussianAsset asset = fixtures::make_single_gaussian("one", 2, Vec3(0.25, -0.125, 0.5), 0.03125, 0.75,
                                                             Vec3(1.0, 0.25, 0.5));
  save_splat(dir.path() / "one.ply", asset);
  const GaussianAsset loaded = load_splat(dir.path() / "one.ply", "one", 2);
  CHECK(loaded.count == 1);
  CHECK(loaded.sh_bands == 1);
  CHECK(loaded.instance_label == 2);
  CHECK(loaded.position(0).isApprox(asset.position(0), 1e-7));
  CHECK(loaded.opacity(0) == Catch::Approx(0.75).margin(1e-6));
  CHECK(loaded.activated_scale(0).x() == Catch::Approx(0.03125).margin(1e-7));
  CHECK(loaded.rotation(0).w() == Catch::Approx(1.0));
}

TEST_CASE("load_splat rejects NaN positions with the row index") {
  fixtures::TempDir dir("splat_nan");
  GaussianAsset asset = fixtures::make_asset("bad", 0, 3, Vec3::Zero(), 0.1, 1, 5);
  asset.positions[3] = std::numeric_limits<double>::quiet_NaN();
  save_splat(dir.path() / "bad.ply", asset);
  try {
    load_splat(dir.path() / "bad.ply", "bad", 0);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ParseError);
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
}

TEST_CASE("SH degree is inferred from the f_rest field count") {
  fixtures::TempDir dir("splat_degree");
  for (const int bands : {1, 4, 9, 16}) {
    const auto asset = fixtures::make_asset("deg", 1, 2, Vec3::Zero(), 0.05, bands, 7);
    const auto path = dir.path() / ("deg" + std::to_string(bands) + ".ply");
    save_splat(path, asset);
    // Field-count arithmetic: 3 + 45 rest coefficients means degree 3.
    const GaussianAsset loaded = load_splat(path, "deg", 1);
    CHECK(loaded.sh_bands == bands);
    CHECK(loaded.sh_degree() == static_cast<int>(std::sqrt(bands)) - 1);
  }
}

TEST_CASE("load_splat rejects unsupported layouts") {
  fixtures::TempDir dir("splat_layout");
  SECTION("ascii PLY") {
    std::ofstream out(dir.path() / "ascii.ply");
    out << "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n0\n";
    out.close();
    try {
      load_splat(dir.path() / "ascii.ply", "a", 0);
      FAIL("expected UnsupportedLayout");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UnsupportedLayout);
    }
  }
  SECTION("missing required field") {
    std::ofstream out(dir.path() / "short.ply", std::ios::binary);
    out << "ply\nformat binary_little_endian 1.0\nelement vertex 1\n"
           "property float x\nproperty float y\nproperty float z\nend_header\n";
    const float row[3] = {0, 0, 0};
    out.write(reinterpret_cast<const char*>(row), sizeof(row));
    out.close();
    try {
      load_splat(dir.path() / "short.ply", "s", 0);
      FAIL("expected UnsupportedLayout");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UnsupportedLayout);
    }
  }
}

TEST_CASE("out-of-range scales are clamped and counted") {
  fixtures::TempDir dir("splat_clamp");
  GaussianAsset asset = fixtures::make_asset("clamp", 0, 2, Vec3::Zero(), 0.1, 1, 9);
  asset.log_scales[0] = std::log(50.0);   // above the 10 m cap
  asset.log_scales[4] = std::log(1e-9);   // below the 1e-7 m floor
  save_splat(dir.path() / "clamp.ply", asset);
  SplatLoadStats stats;
  const GaussianAsset loaded = load_splat(dir.path() / "clamp.ply", "clamp", 0, &stats);
  CHECK(stats.clamped_scales == 2);
  CHECK(loaded.activated_scale(0).x() == Catch::Approx(10.0));
  CHECK(loaded.activated_scale(1).y() == Catch::Approx(1e-7));
}

TEST_CASE("transform_asset") {
  std::mt19937 gen(91);
  const GaussianAsset asset = fixtures::make_asset("t", 2, 8, Vec3(0.1, 0.2, 0.3), 0.05, 9, 11);

  SECTION("identity transform at scale 1 is bit-identical") {
    const GaussianAsset out = transform_asset(asset, RigidTransform::identity(), 1.0);
    CHECK(out.positions == asset.positions);
    CHECK(out.log_scales == asset.log_scales);
    CHECK(out.rotations == asset.rotations);
    CHECK(out.opacity_logits == asset.opacity_logits);
    CHECK(out.sh == asset.sh);
    CHECK(out.instance_label == asset.instance_label);
  }
  SECTION("pure translation shifts positions and keeps covariances") {
    const RigidTransform t(Quat::Identity(), Vec3(1, -2, 3));
    const GaussianAsset out = transform_asset(asset, t, 1.0);
    for (std::size_t n = 0; n < asset.count; ++n) {
      CHECK(out.position(n).isApprox(asset.position(n) + Vec3(1, -2, 3), 1e-12));
      CHECK(gaussian_covariance(out, n).isApprox(gaussian_covariance(asset, n), 1e-12));
    }
    CHECK(out.sh == asset.sh);  // identity rotation keeps all SH bands
  }
  SECTION("rotation maps world covariance as R Sigma R^T") {
    const RigidTransform t(Quat(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ())), Vec3::Zero());
    const GaussianAsset out = transform_asset(asset, t, 1.0);
    const Mat3 r = t.rotation_matrix();
    for (std::size_t n = 0; n < asset.count; ++n) {
      const Mat3 expected = r * covariance_oracle(asset, n) * r.transpose();
      CHECK(gaussian_covariance(out, n).isApprox(expected, 1e-9));
    }
  }
  SECTION("chained transforms equal the composed transform within 1e-6") {
    for (int trial = 0; trial < 10; ++trial) {
      const RigidTransform t1 = fixtures::random_transform(gen);
      const RigidTransform t2 = fixtures::random_transform(gen);
      const double s1 = 0.8, s2 = 1.3;
      const GaussianAsset chained = transform_asset(transform_asset(asset, t1, s1), t2, s2);
      const GaussianAsset direct = transform_asset(asset, compose(t2, t1), s2 * s1);
      for (std::size_t n = 0; n < asset.count; ++n) {
        CHECK((chained.position(n) - direct.position(n)).norm() < 1e-6);
        CHECK((chained.activated_scale(n) - direct.activated_scale(n)).norm() < 1e-6);
        CHECK(std::abs(chained.opacity(n) - direct.opacity(n)) < 1e-12);
        const Quat qa = chained.rotation(n), qb = direct.rotation(n);
        CHECK(std::min((qa.coeffs() - qb.coeffs()).norm(), (qa.coeffs() + qb.coeffs()).norm()) < 1e-6);
      }
      CHECK(chained.instance_label == asset.instance_label);
    }
  }
  SECTION("world covariance stays PSD through transform chains") {
    GaussianAsset current = asset;
    for (int trial = 0; trial < 8; ++trial) {
      current = transform_asset(current, fixtures::random_transform(gen), trial % 2 == 0 ? 1.4 : 0.7);
      for (std::size_t n = 0; n < current.count; ++n) {
        Eigen::SelfAdjointEigenSolver<Mat3> eig(gaussian_covariance(current, n));
        CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
      }
    }
  }
  SECTION("scale recenters about the centroid") {
    const GaussianAsset out = transform_asset(asset, RigidTransform::identity(), 2.0);
    const Vec3 c = asset.centroid();
    CHECK(out.centroid().isApprox(c, 1e-9));
    for (std::size_t n = 0; n < asset.count; ++n) {
      CHECK(out.position(n).isApprox(c + 2.0 * (asset.position(n) - c), 1e-12));
    }
  }
}

TEST_CASE("SH handling under rotation") {
  std::mt19937 gen(97);
  const GaussianAsset asset = fixtures::make_asset("sh", 1, 4, Vec3::Zero(), 0.05, 16, 13);
  const RigidTransform rot(Quat(Eigen::AngleAxisd(1.1, Vec3(0.3, -0.5, 0.8).normalized())), Vec3::Zero());

  SECTION("default truncation zeroes higher bands") {
    const GaussianAsset out = transform_asset(asset, rot, 1.0, ShHandling::Truncate);
    for (std::size_t n = 0; n < out.count; ++n) {
      for (int c = 0; c < 3; ++c) {
        CHECK(out.sh_channel(n, c)[0] == asset.sh_channel(n, c)[0]);
        for (int k = 1; k < out.sh_bands; ++k) CHECK(out.sh_channel(n, c)[k] == 0.0);
      }
    }
  }
  SECTION("band rotation preserves view-dependent color") {
    // Rotating the coefficients then evaluating along the rotated direction
    // must match evaluating the originals along the original direction.
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
      const Quat q = fixtures::random_transform(gen).rotation;
      const Mat3 r = q.toRotationMatrix();
      const ShRotationMatrices sh_rot(r, 3);
      std::vector<double> coeffs(16);
      for (auto& v : coeffs) v = normal(gen);
      std::vector<double> rotated = coeffs;
      sh_rot.apply(rotated.data(), 16);

      const Vec3 dir = Vec3(normal(gen), normal(gen), normal(gen)).normalized();
      double basis_orig[16], basis_rot[16];
      sh_basis(dir, 16, basis_orig);
      sh_basis(r * dir, 16, basis_rot);
      const double original = sh_decode(coeffs.data(), basis_orig, 16);
      const double transformed = sh_decode(rotated.data(), basis_rot, 16);
      CHECK(transformed == Catch::Approx(original).margin(1e-9));
    }
  }
  SECTION("transform_asset with Rotate keeps appearance consistent") {
    const GaussianAsset out = transform_asset(asset, rot, 1.0, ShHandling::Rotate);
    const Mat3 r = rot.rotation_matrix();
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
      const Vec3 dir = Vec3(normal(gen), normal(gen), normal(gen)).normalized();
      double basis_orig[16], basis_rot[16];
      sh_basis(dir, 16, basis_orig);
      sh_basis(r * dir, 16, basis_rot);
      for (std::size_t n = 0; n < asset.count; ++n) {
        for (int c = 0; c < 3; ++c) {
          const double before = sh_decode(asset.sh_channel(n, c), basis_orig, 16);
          const double after = sh_decode(out.sh_channel(n, c), basis_rot, 16);
          CHECK(after == Catch::Approx(before).margin(1e-9));
        }
      }
    }
  }
}

TEST_CASE("asset library manifest and frame composition") {
  fixtures::TempDir dir("lib");
  const RobotModel model = parse_robot(fixtures::chain_urdf(3));
  const auto manifest = fixtures::write_asset_fixture(dir.path(), model, 20, 6, 10);
  const AssetLibrary lib = load_asset_library(manifest);
  CHECK(lib.has("env"));
  CHECK(lib.has("cube"));
  CHECK(lib.binding("env") == "environment");
  CHECK(lib.at("cube").instance_label == 2);

  Demonstration demo;
  demo.source_id = "scene";
  CameraModel cam = fixtures::look_at_camera(Vec3(1, 0, 1), Vec3(0, 0, 0.2), 100.0, 64, 48);
  demo.cameras["cam0"] = cam;
  demo.primary_camera = "cam0";
  JointState s;
  s.q = Eigen::VectorXd::Zero(3);
  s.g = 1.0;
  s.t = 0.0;
  demo.trajectory.states.push_back(s);
  demo.object_tracks["cube"] = {RigidTransform(Quat::Identity(), Vec3(0.3, 0.0, 0.1))};
  demo.object_assets["cube"] = "cube";
  demo.object_scales["cube"] = 1.0;

  const auto link_poses = forward_kinematics(model, s.q, LimitPolicy::Error, s.g);

  SECTION("placements match FK link poses and the fused object pose") {
    const FrameScene scene = compose_frame(lib, demo, 0, link_poses, model, cam);
    // env + one asset per non-base link + cube ("ball" is an unplaced substitute).
    CHECK(scene.placements.size() == 2 + (model.links.size() - 1));
    for (const auto& p : scene.placements) {
      if (p.asset_id == "env") {
        CHECK(p.pose.translation == Vec3::Zero());
      } else if (p.asset_id == "cube") {
        CHECK(p.pose.translation == demo.object_tracks.at("cube")[0].translation);
        CHECK(p.scale == 1.0);
      } else {
        const std::string link = p.asset_id.substr(std::string("asset_").size());
        const int li = model.link_index(link);
        REQUIRE(li >= 0);
        CHECK(p.pose.translation == link_poses[static_cast<std::size_t>(li)].translation);
      }
    }
  }
  SECTION("binding to an unloaded asset raises MissingBinding") {
    demo.object_assets["cube"] = "ghost";
    try {
      compose_frame(lib, demo, 0, link_poses, model, cam);
      FAIL("expected MissingBinding");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::MissingBinding);
    }
  }
  SECTION("environment-only library yields a single placement") {
    AssetLibrary env_only;
    env_only.insert(fixtures::make_asset("env", 0, 5, Vec3::Zero(), 0.2, 1, 3), "environment");
    Demonstration bare = demo;
    bare.object_tracks.clear();
    bare.object_assets.clear();
    const FrameScene scene = compose_frame(env_only, bare, 0, link_poses, model, cam);
    CHECK(scene.placements.size() == 1);
    CHECK(scene.placements[0].asset_id == "env");
  }
  SECTION("step outside the trajectory") {
    CHECK_THROWS_AS(compose_frame(lib, demo, 5, link_poses, model, cam), Error);
  }
}

TEST_CASE("EXOGS_CACHE round trip") {
  fixtures::TempDir dir("cache");
  fixtures::TempDir cache_dir("cache_store");
  const RobotModel model = parse_robot(fixtures::chain_urdf(2));
  const auto manifest = fixtures::write_asset_fixture(dir.path(), model, 10, 4, 6);

  const AssetLibrary cold = load_asset_library(manifest);
  ::setenv("EXOGS_CACHE", cache_dir.path().c_str(), 1);
  const AssetLibrary warm_write = load_asset_library(manifest);   // populates the cache
  const AssetLibrary warm_read = load_asset_library(manifest);    // reads it back
  ::unsetenv("EXOGS_CACHE");

  bool wrote_cache = false;
  for (const auto& entry : std::filesystem::directory_iterator(cache_dir.path())) {
    wrote_cache |= entry.path().extension() == ".splat";
  }
  CHECK(wrote_cache);
  for (const auto& id : cold.ids()) {
    CHECK(warm_read.at(id).positions == cold.at(id).positions);
    CHECK(warm_read.at(id).sh == cold.at(id).sh);
    CHECK(warm_read.at(id).instance_label == cold.at(id).instance_label);
    CHECK(warm_write.at(id).rotations == cold.at(id).rotations);
  }
}
