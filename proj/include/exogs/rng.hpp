// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace exogs {

/// Philox4x32-10 counter-based generator. A stream is addressed by
/// (seed, episode, stream id, draw); values inside a stream come from an
/// incrementing block counter, so outputs never depend on evaluation order
/// or worker count.
class PhiloxRng {
 public:
  PhiloxRng(std::uint64_t seed, std::uint32_t episode, std::uint32_t stream, std::uint32_t draw)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        counter_{episode, stream, draw, 0} {}

  std::uint32_t next_u32() {
    if (block_pos_ == 4) {
      block_ = philox_block(counter_, key_);
      counter_[3] += 1;
      block_pos_ = 0;
    }
    return block_[block_pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    return (hi << 32) | lo;
  }

  /// Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform direction on the unit sphere.
  Eigen::Vector3d unit_vector() {
    const double z = uniform(-1.0, 1.0);
    const double phi = uniform(0.0, 2.0 * M_PI);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
  }

  /// Uniform direction times uniform magnitude in [0, max_norm].
  Eigen::Vector3d vector_in_ball(double max_norm) {
    const Eigen::Vector3d dir = unit_vector();
    return dir * uniform(0.0, max_norm);
  }

  /// Rotation with uniform axis and uniform angle in [0, max_angle].
  Eigen::Quaterniond rotation_within(double max_angle) {
    const Eigen::Vector3d axis = unit_vector();
    const double angle = uniform(0.0, max_angle);
    return Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis));
  }

 private:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static std::uint32_t mul_hi(std::uint32_t a, std::uint32_t b) {
    return static_cast<std::uint32_t>((static_cast<std::uint64_t>(a) * b) >> 32);
  }
  static std::uint32_t mul_lo(std::uint32_t a, std::uint32_t b) {
    return static_cast<std::uint32_t>(static_cast<std::uint64_t>(a) * b);
  }

  static Block philox_block(Block ctr, Key key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint32_t lo0 = mul_lo(kMul0, ctr[0]);
      const std::uint32_t hi0 = mul_hi(kMul0, ctr[0]);
      const std::uint32_t lo1 = mul_lo(kMul1, ctr[2]);
      const std::uint32_t hi1 = mul_hi(kMul1, ctr[2]);
      ctr = Block{hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

  Key key_;
  Block counter_;
  Block block_{};
  int block_pos_ = 4;
};

/// Stream ids used across the pipeline; part of the on-disk provenance.
enum class RngStream : std::uint32_t {
  Viewpoint = 1,
  Color = 2,
  Background = 3,
  ObjectPose = 4,
  PoseProcess = 5,
};

inline PhiloxRng make_rng(std::uint64_t seed, std::uint32_t episode, RngStream stream, std::uint32_t draw = 0) {
  return PhiloxRng(seed, episode, static_cast<std::uint32_t>(stream), draw);
}

}  // namespace exogs
