// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "exogs/poseproc.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace exogs;

namespace {

/// Demo with a hand-set gripper signal and one tracked object.
Demonstration make_demo(const std::vector<double>& gripper, std::mt19937& gen) {
  Demonstration demo;
  demo.source_id = "poseproc";
  CameraModel cam;
  cam.fx = cam.fy = 100.0;
  cam.cx = cam.cy = 32.0;
  cam.width = cam.height = 64;
  demo.cameras["cam0"] = cam;
  demo.primary_camera = "cam0";
  std::vector<RigidTransform> track;
  for (std::size_t t = 0; t < gripper.size(); ++t) {
    JointState s;
    s.q = Eigen::VectorXd::Zero(2);
    s.q(0) = 0.1 * static_cast<double>(t);
    s.g = gripper[t];
    s.t = 0.1 * static_cast<double>(t);
    demo.trajectory.states.push_back(s);
    track.push_back(fixtures::random_transform(gen));
  }
  demo.object_tracks["cube"] = track;
  demo.object_assets["cube"] = "cube";
  demo.object_scales["cube"] = 1.0;
  return demo;
}

std::vector<RigidTransform> random_ee_poses(std::size_t n, std::mt19937& gen) {
  std::vector<RigidTransform> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(fixtures::random_transform(gen));
  return out;
}

}  // namespace

TEST_CASE("detect_grasp_window") {
  std::mt19937 gen(71);

  SECTION("gripper that never closes") {
    const auto demo = make_demo({1.0, 1.0, 1.0}, gen);
    const auto ee = random_ee_poses(3, gen);
    try {
      detect_grasp_window(demo, "cube", ee);
      FAIL("expected NoGraspDetected");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NoGraspDetected);
    }
  }
  SECTION("threshold crossing fixes the window") {
    // g = [1, 1, 0.1, 0.1, 1], thresholds (0.3, 0.7): steps 3..5 one-based.
    const auto demo = make_demo({1.0, 1.0, 0.1, 0.1, 1.0}, gen);
    const auto ee = random_ee_poses(5, gen);
    const GraspWindow w = detect_grasp_window(demo, "cube", ee, 0.3, 0.7);
    CHECK(w.start_step == 2);
    CHECK(w.end_step == 4);
  }
  SECTION("window runs to the last step when the gripper never re-opens") {
    const auto demo = make_demo({1.0, 0.1, 0.1}, gen);
    const auto ee = random_ee_poses(3, gen);
    const GraspWindow w = detect_grasp_window(demo, "cube", ee);
    CHECK(w.start_step == 1);
    CHECK(w.end_step == 2);
  }
  SECTION("relative pose equals invert(ee) o obj at the window start") {
    const auto demo = make_demo({1.0, 0.1, 0.1, 1.0}, gen);
    const auto ee = random_ee_poses(4, gen);
    const GraspWindow w = detect_grasp_window(demo, "cube", ee);
    REQUIRE(w.start_step == 1);
    const oracle::M4 ee_m = oracle::m4_from_transform(ee[1]);
    // Rigid inverse written out against the homogeneous oracle.
    const Quat qi = ee[1].rotation.conjugate();
    const Vec3 ti = -(qi * ee[1].translation);
    const oracle::M4 inv = oracle::m4_from_quat_trans(qi.w(), qi.x(), qi.y(), qi.z(), ti.x(), ti.y(), ti.z());
    const oracle::M4 expected = oracle::m4_mul(inv, oracle::m4_from_transform(demo.object_tracks.at("cube")[1]));
    CHECK(oracle::m4_translation_gap(oracle::m4_from_transform(w.relative_pose), expected) < 1e-12);
    CHECK(oracle::m4_rotation_gap(oracle::m4_from_transform(w.relative_pose), expected) < 1e-12);
    (void)ee_m;
  }
  SECTION("open threshold must exceed close threshold") {
    const auto demo = make_demo({1.0, 0.1}, gen);
    const auto ee = random_ee_poses(2, gen);
    CHECK_THROWS_AS(detect_grasp_window(demo, "cube", ee, 0.7, 0.3), Error);
  }
}

TEST_CASE("fix_object") {
  std::mt19937 gen(73);

  SECTION("identity relative pose pins the object to the end-effector") {
    auto demo = make_demo({1.0, 0.1, 0.1, 1.0}, gen);
    const auto ee = random_ee_poses(4, gen);
    GraspWindow w;
    w.start_step = 1;
    w.end_step = 3;
    const auto fixed = fix_object(demo, "cube", w, ee);
    for (std::size_t t = 1; t <= 3; ++t) {
      CHECK(translation_distance(fixed[t], ee[t]) < 1e-12);
      CHECK(rotation_distance(fixed[t], ee[t]) < 1e-12);
    }
    CHECK(fixed[0].translation == demo.object_tracks.at("cube")[0].translation);  // untouched outside
  }
  SECTION("static end-effector means a static attached object") {
    auto demo = make_demo({1.0, 0.1, 0.1, 0.1}, gen);
    std::vector<RigidTransform> ee(4, fixtures::random_transform(gen));
    GraspWindow w = detect_grasp_window(demo, "cube", ee);
    const auto fixed = fix_object(demo, "cube", w, ee);
    for (std::size_t t = w.start_step + 1; t <= w.end_step; ++t) {
      CHECK(translation_distance(fixed[t], fixed[w.start_step]) < 1e-12);
      CHECK(rotation_distance(fixed[t], fixed[w.start_step]) < 1e-12);
    }
  }
  SECTION("moving fixture matches the per-step compose oracle") {
    auto demo = make_demo({1.0, 0.1, 0.1, 0.1, 1.0}, gen);
    const auto ee = random_ee_poses(5, gen);
    const GraspWindow w = detect_grasp_window(demo, "cube", ee);
    const auto fixed = fix_object(demo, "cube", w, ee);
    for (std::size_t t = w.start_step; t <= w.end_step; ++t) {
      const oracle::M4 expected =
          oracle::m4_mul(oracle::m4_from_transform(ee[t]), oracle::m4_from_transform(w.relative_pose));
      CHECK(oracle::m4_translation_gap(oracle::m4_from_transform(fixed[t]), expected) < 1e-12);
      CHECK(oracle::m4_rotation_gap(oracle::m4_from_transform(fixed[t]), expected) < 1e-12);
    }
  }
  SECTION("after fix, invert(ee) o obj equals the relative pose on every in-window step") {
    for (int trial = 0; trial < 20; ++trial) {
      auto demo = make_demo({1.0, 1.0, 0.1, 0.1, 0.1, 1.0}, gen);
      const auto ee = random_ee_poses(6, gen);
      const auto fixed_demo = apply_fix(demo, "cube", ee);
      const auto& w = fixed_demo.grasp_windows.at("cube");
      for (std::size_t t = w.start_step; t <= w.end_step; ++t) {
        const RigidTransform rel = compose(invert(ee[t]), fixed_demo.object_tracks.at("cube")[t]);
        CHECK(rotation_distance(rel, w.relative_pose) < 1e-9);
        CHECK(translation_distance(rel, w.relative_pose) < 1e-9);
      }
    }
  }
}

TEST_CASE("substitute_object") {
  std::mt19937 gen(79);
  const std::set<std::string> assets = {"cube", "ball"};

  SECTION("identity offset changes only the binding") {
    auto demo = make_demo({1.0, 0.1, 0.1}, gen);
    const auto before = demo.object_tracks.at("cube");
    const auto out = substitute_object(demo, "cube", "ball", assets);
    CHECK(out.object_assets.at("cube") == "ball");
    for (std::size_t t = 0; t < before.size(); ++t) {
      CHECK(out.object_tracks.at("cube")[t].translation == before[t].translation);
      CHECK(out.object_tracks.at("cube")[t].rotation.coeffs() == before[t].rotation.coeffs());
    }
  }
  SECTION("a grasp offset shifts every in-window pose in the end-effector frame") {
    auto demo = make_demo({1.0, 0.1, 0.1, 1.0}, gen);
    const auto ee = random_ee_poses(4, gen);
    demo = apply_fix(demo, "cube", ee);
    const auto before = demo.object_tracks.at("cube");
    const RigidTransform offset(Quat::Identity(), Vec3(0, 0, 0.02));
    const auto out = substitute_object(demo, "cube", "ball", assets, offset);
    const auto& w = demo.grasp_windows.at("cube");
    for (std::size_t t = 0; t < before.size(); ++t) {
      if (t >= w.start_step && t <= w.end_step) {
        const oracle::M4 expected =
            oracle::m4_mul(oracle::m4_from_transform(before[t]), oracle::m4_from_transform(offset));
        CHECK(oracle::m4_translation_gap(oracle::m4_from_transform(out.object_tracks.at("cube")[t]), expected) <
              1e-12);
      } else {
        CHECK(out.object_tracks.at("cube")[t].translation == before[t].translation);
      }
    }
    CHECK(rotation_distance(compose(invert(ee[w.start_step]), out.object_tracks.at("cube")[w.start_step]),
                            out.grasp_windows.at("cube").relative_pose) < 1e-12);
  }
  SECTION("unknown asset id") {
    auto demo = make_demo({1.0, 0.1}, gen);
    try {
      substitute_object(demo, "cube", "ghost", assets);
      FAIL("expected UnknownAsset");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UnknownAsset);
    }
  }
}

TEST_CASE("perturb_poses") {
  std::mt19937 gen(83);

  SECTION("null perturbation is the identity") {
    auto demo = make_demo({1.0, 0.1, 0.1}, gen);
    const auto out = perturb_poses(demo, "cube", 7, 0.0, 0.0, {1.0, 1.0});
    for (std::size_t t = 0; t < demo.steps(); ++t) {
      CHECK(out.object_tracks.at("cube")[t].translation == demo.object_tracks.at("cube")[t].translation);
      CHECK(out.object_tracks.at("cube")[t].rotation.coeffs() == demo.object_tracks.at("cube")[t].rotation.coeffs());
    }
    CHECK(out.object_scales.at("cube") == 1.0);
  }
  SECTION("same seed gives identical output, different seeds differ") {
    auto demo = make_demo({1.0, 1.0, 0.1}, gen);
    const auto a = perturb_poses(demo, "cube", 99, 0.05, 0.2, {0.9, 1.1});
    const auto b = perturb_poses(demo, "cube", 99, 0.05, 0.2, {0.9, 1.1});
    const auto c = perturb_poses(demo, "cube", 100, 0.05, 0.2, {0.9, 1.1});
    CHECK(a.object_tracks.at("cube")[0].translation == b.object_tracks.at("cube")[0].translation);
    CHECK(a.object_scales.at("cube") == b.object_scales.at("cube"));
    CHECK(a.object_tracks.at("cube")[0].translation != c.object_tracks.at("cube")[0].translation);
  }
  SECTION("perturbation stays within bounds over 1000 seeds") {
    auto demo = make_demo({1.0, 1.0, 0.1, 0.1}, gen);
    const auto ee = random_ee_poses(4, gen);
    demo = apply_fix(demo, "cube", ee);
    const double max_t = 0.05, max_r = 0.2;
    const Vec3 anchor = demo.object_tracks.at("cube")[0].translation;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const auto out = perturb_poses(demo, "cube", seed, max_t, max_r, {0.9, 1.1});
      const RigidTransform& p = out.object_tracks.at("cube")[0];
      const RigidTransform& orig = demo.object_tracks.at("cube")[0];
      CHECK(rotation_distance(orig, p) <= max_r + 1e-9);
      // The rotation pivot is the anchor, so the anchor moves by exactly the drawn offset.
      const RigidTransform delta = compose(p, invert(orig));
      CHECK((delta.apply(anchor) - anchor).norm() <= max_t + 1e-9);
      const double s = out.object_scales.at("cube");
      CHECK(s >= 0.9);
      CHECK(s <= 1.1);
      // In-window poses are untouched: they follow the end-effector.
      const auto& w = demo.grasp_windows.at("cube");
      CHECK(out.object_tracks.at("cube")[w.start_step].translation ==
            demo.object_tracks.at("cube")[w.start_step].translation);
    }
  }
  SECTION("perturb and substitute commute for an identity offset") {
    auto demo = make_demo({1.0, 0.1, 0.1}, gen);
    const std::set<std::string> assets = {"cube", "ball"};
    const auto a = substitute_object(perturb_poses(demo, "cube", 5, 0.03, 0.1, {0.95, 1.05}), "cube", "ball", assets);
    const auto b = perturb_poses(substitute_object(demo, "cube", "ball", assets), "cube", 5, 0.03, 0.1, {0.95, 1.05});
    for (std::size_t t = 0; t < demo.steps(); ++t) {
      CHECK(a.object_tracks.at("cube")[t].translation == b.object_tracks.at("cube")[t].translation);
      CHECK(a.object_tracks.at("cube")[t].rotation.coeffs() == b.object_tracks.at("cube")[t].rotation.coeffs());
    }
    CHECK(a.object_assets.at("cube") == "ball");
    CHECK(b.object_assets.at("cube") == "ball");
  }
  SECTION("plausibility warning thresholds") {
    CHECK(!perturbation_plausibility_warning(0.05, 0.2));
    CHECK(perturbation_plausibility_warning(0.5, 0.2));
    CHECK(perturbation_plausibility_warning(0.05, 1.0));
  }
}
