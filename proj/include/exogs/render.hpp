// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "exogs/error.hpp"
#include "exogs/geometry.hpp"
#include "exogs/gscene.hpp"
#include "exogs/image.hpp"
#include "exogs/parallel.hpp"
#include "exogs/sh.hpp"

namespace exogs {

// Standard splatting thresholds.
constexpr double kAlphaClamp = 0.99;
constexpr double kMinAlpha = 1.0 / 255.0;
constexpr double kMinTransmittance = 1e-4;
constexpr double kCovarianceDilation = 0.3;  // px^2, added to the 2D covariance diagonal
constexpr double kInstanceAlphaFloor = 0.5;
constexpr std::uint8_t kNoInstance = 255;

struct RenderConfig {
  int tile_size = 16;
  int sh_degree_used = 3;
  Vec3 background_color{0.0, 0.0, 0.0};
  ShHandling sh_handling = ShHandling::Truncate;
  int workers = 1;
};

struct RenderOutput {
  ImageF rgb;            // H x W x 3, [0, 1]
  ImageU8 instance;      // H x W, 255 = none
  ImageF depth;          // H x W, alpha-weighted expected depth in meters, 0 = invalid
  ImageF alpha;          // H x W, sum of contribution weights
  ImageF transmittance;  // H x W, residual T
};

namespace render_detail {

/// One world-space gaussian flattened out of the frame's placements,
/// projected to screen space. `index` is the global compositing tie-break.
struct ScreenGaussian {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double depth = 0.0;
  // Inverse 2D covariance (conic): [a, b; b, c].
  double conic_a = 0.0;
  double conic_b = 0.0;
  double conic_c = 0.0;
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive 3-sigma bbox in pixels
  double opacity = 0.0;
  double color[3] = {0.0, 0.0, 0.0};
  std::uint8_t label = kNoInstance;
  std::size_t index = 0;
};

inline std::vector<ScreenGaussian> project_scene(const FrameScene& scene, const RenderConfig& config) {
  scene.camera.validate();
  const Mat3 world_to_cam = scene.camera.extrinsics.rotation_matrix();
  const Vec3 cam_center = scene.camera.center();
  const double fx = scene.camera.fx, fy = scene.camera.fy;
  const double cx = scene.camera.cx, cy = scene.camera.cy;
  const int width = scene.camera.width, height = scene.camera.height;

  std::vector<ScreenGaussian> out;
  std::size_t global_index = 0;
  double basis[16];

  for (const auto& placement : scene.placements) {
    require(placement.asset != nullptr, Errc::MissingBinding, "placement '" + placement.asset_id + "' has no asset");
    const GaussianAsset world =
        transform_asset(*placement.asset, placement.pose, placement.scale, config.sh_handling);
    const int config_bands = (config.sh_degree_used + 1) * (config.sh_degree_used + 1);
    const int bands_used = std::min(world.sh_bands, config_bands);

    for (std::size_t n = 0; n < world.count; ++n, ++global_index) {
      const Vec3 p_world = world.position(n);
      const Vec3 p_cam = world_to_cam * p_world + scene.camera.extrinsics.translation;
      const double z = p_cam.z();
      if (z <= kMinCameraDepth) continue;

      ScreenGaussian g;
      g.index = global_index;
      g.depth = z;
      g.mean_x = fx * p_cam.x() / z + cx;
      g.mean_y = fy * p_cam.y() / z + cy;

      const Mat3 cov_world = gaussian_covariance(world, n);
      const Mat3 cov_cam = world_to_cam * cov_world * world_to_cam.transpose();
      Eigen::Matrix<double, 2, 3> jac;
      jac << fx / z, 0.0, -fx * p_cam.x() / (z * z),
             0.0, fy / z, -fy * p_cam.y() / (z * z);
      Eigen::Matrix2d cov2 = jac * cov_cam * jac.transpose();
      cov2(0, 0) += kCovarianceDilation;
      cov2(1, 1) += kCovarianceDilation;
      const double det = cov2(0, 0) * cov2(1, 1) - cov2(0, 1) * cov2(0, 1);
      if (!(det > 0.0) || !std::isfinite(det)) continue;
      g.conic_a = cov2(1, 1) / det;
      g.conic_b = -cov2(0, 1) / det;
      g.conic_c = cov2(0, 0) / det;

      const double rx = 3.0 * std::sqrt(cov2(0, 0));
      const double ry = 3.0 * std::sqrt(cov2(1, 1));
      g.x0 = std::max(0, static_cast<int>(std::ceil(g.mean_x - rx)));
      g.x1 = std::min(width - 1, static_cast<int>(std::floor(g.mean_x + rx)));
      g.y0 = std::max(0, static_cast<int>(std::ceil(g.mean_y - ry)));
      g.y1 = std::min(height - 1, static_cast<int>(std::floor(g.mean_y + ry)));
      if (g.x0 > g.x1 || g.y0 > g.y1) continue;

      g.opacity = world.opacity(n);
      g.label = world.instance_label;

      Vec3 dir = p_world - cam_center;
      const double norm = dir.norm();
      dir = norm > 1e-12 ? Vec3(dir / norm) : Vec3(0.0, 0.0, 1.0);
      sh_basis(dir, bands_used, basis);
      const Vec3 gain = world.gain(n);
      for (int c = 0; c < 3; ++c) {
        const double raw = sh_decode(world.sh_channel(n, c), basis, bands_used);
        g.color[c] = std::clamp(raw * gain(c), 0.0, 1.0);
      }
      out.push_back(g);
    }
  }

  // Global front-to-back order with a stable index tie-break; this is what
  // makes the output independent of tiling and worker count.
  std::sort(out.begin(), out.end(), [](const ScreenGaussian& a, const ScreenGaussian& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.index < b.index;
  });
  return out;
}

}  // namespace render_detail

/// Tile-based splatting rasterizer. Per pixel, gaussians composite
/// front-to-back: alpha = min(0.99, opacity * exp(-0.5 d^T Sigma2d^-1 d))
/// evaluated at the pixel center, contributions below 1/255 are skipped,
/// accumulation stops once transmittance falls below 1e-4, and each
/// gaussian only touches the bounding box of its 3-sigma ellipse. The
/// instance label is the label of the largest single contribution weight,
/// or 255 where the accumulated alpha stays below 0.5.
inline RenderOutput render(const FrameScene& scene, const RenderConfig& config) {
  const int width = scene.camera.width;
  const int height = scene.camera.height;
  require(config.tile_size >= 1, Errc::OutOfRange, "tile_size must be >= 1");
  if (scene.background) {
    require(scene.background->width == width && scene.background->height == height, Errc::LengthMismatch,
            "background image size does not match the render resolution");
  }

  RenderOutput out;
  out.rgb = ImageF(width, height, 3);
  out.instance = ImageU8(width, height, 1, kNoInstance);
  out.depth = ImageF(width, height, 1);
  out.alpha = ImageF(width, height, 1);
  out.transmittance = ImageF(width, height, 1, 1.0f);

  const auto gaussians = render_detail::project_scene(scene, config);

  const int tile = config.tile_size;
  const int tiles_x = (width + tile - 1) / tile;
  const int tiles_y = (height + tile - 1) / tile;

  // Per-tile lists preserve the global sorted order.
  std::vector<std::vector<std::uint32_t>> tile_lists(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (std::uint32_t gi = 0; gi < gaussians.size(); ++gi) {
    const auto& g = gaussians[gi];
    const int tx0 = g.x0 / tile, tx1 = g.x1 / tile;
    const int ty0 = g.y0 / tile, ty1 = g.y1 / tile;
    for (int ty = ty0; ty <= ty1; ++ty) {
      for (int tx = tx0; tx <= tx1; ++tx) tile_lists[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(gi);
    }
  }

  parallel_for(tile_lists.size(), config.workers, [&](std::size_t tile_index) {
    const int tx = static_cast<int>(tile_index) % tiles_x;
    const int ty = static_cast<int>(tile_index) / tiles_x;
    const int px0 = tx * tile, px1 = std::min(width, px0 + tile);
    const int py0 = ty * tile, py1 = std::min(height, py0 + tile);
    const auto& list = tile_lists[tile_index];

    for (int py = py0; py < py1; ++py) {
      for (int px = px0; px < px1; ++px) {
        double transmittance = 1.0;
        double alpha_sum = 0.0;
        double rgb[3] = {0.0, 0.0, 0.0};
        double depth_sum = 0.0;
        double best_weight = 0.0;
        std::uint8_t best_label = kNoInstance;

        for (const std::uint32_t gi : list) {
          if (transmittance < kMinTransmittance) break;
          const auto& g = gaussians[gi];
          if (px < g.x0 || px > g.x1 || py < g.y0 || py > g.y1) continue;
          const double dx = px - g.mean_x;
          const double dy = py - g.mean_y;
          const double maha = g.conic_a * dx * dx + 2.0 * g.conic_b * dx * dy + g.conic_c * dy * dy;
          const double alpha = std::min(kAlphaClamp, g.opacity * std::exp(-0.5 * maha));
          if (alpha < kMinAlpha) continue;
          const double weight = alpha * transmittance;
          for (int c = 0; c < 3; ++c) rgb[c] += weight * g.color[c];
          depth_sum += weight * g.depth;
          alpha_sum += weight;
          if (weight > best_weight) {
            best_weight = weight;
            best_label = g.label;
          }
          transmittance *= 1.0 - alpha;
        }

        for (int c = 0; c < 3; ++c) {
          const double bg = scene.background ? static_cast<double>(scene.background->at(px, py, c))
                                             : config.background_color(c);
          out.rgb.at(px, py, c) = static_cast<float>(rgb[c] + transmittance * bg);
        }
        out.instance.at(px, py) = alpha_sum < kInstanceAlphaFloor ? kNoInstance : best_label;
        out.depth.at(px, py) = alpha_sum > 0.0 ? static_cast<float>(depth_sum / alpha_sum) : 0.0f;
        out.alpha.at(px, py) = static_cast<float>(alpha_sum);
        out.transmittance.at(px, py) = static_cast<float>(transmittance);
      }
    }
  });
  return out;
}

/// Maps render over frames; identical outputs regardless of worker count.
inline std::vector<RenderOutput> render_sequence(const std::vector<FrameScene>& scenes, const RenderConfig& config) {
  std::vector<RenderOutput> outputs(scenes.size());
  RenderConfig frame_config = config;
  frame_config.workers = 1;
  parallel_for(scenes.size(), config.workers, [&](std::size_t i) {
    try {
      outputs[i] = render(scenes[i], frame_config);
    } catch (const Error& e) {
      raise(e.code(), std::string(e.what()) + " (at frame " + std::to_string(i) + ")");
    }
  });
  return outputs;
}

}  // namespace exogs
