// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "exogs/demo.hpp"
#include "exogs/error.hpp"
#include "exogs/geometry.hpp"
#include "exogs/image.hpp"
#include "exogs/kinematics.hpp"
#include "exogs/serde.hpp"
#include "exogs/sh.hpp"

namespace exogs {

constexpr double kMinActivatedScale = 1e-7;  // meters
constexpr double kMaxActivatedScale = 10.0;  // meters

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Editable 3D Gaussian asset: raw (pre-activation) parameter arrays plus one
/// instance label. Scales are stored in log space and opacities as logits,
/// matching the splat file layout; activations are applied on use.
struct GaussianAsset {
  std::string asset_id;
  std::uint8_t instance_label = 0;  // 0 = background, 1 = robot, 2.. = objects
  std::size_t count = 0;
  int sh_bands = 1;                  // 1, 4, 9 or 16 coefficients per channel
  std::vector<double> positions;     // N*3, meters
  std::vector<double> log_scales;    // N*3
  std::vector<double> rotations;     // N*4, unit wxyz
  std::vector<double> opacity_logits;  // N
  std::vector<double> sh;            // N*3*bands, [gaussian][channel][coeff]
  Vec3 base_color_gain{1.0, 1.0, 1.0};  // multiplies decoded RGB at render time
  std::vector<double> local_gain;    // optional per-gaussian scalar gain, empty = all 1

  int sh_degree() const { return sh_degree_for_bands(sh_bands); }

  Vec3 position(std::size_t n) const { return Vec3(positions[3 * n], positions[3 * n + 1], positions[3 * n + 2]); }

  Vec3 activated_scale(std::size_t n) const {
    return Vec3(std::exp(log_scales[3 * n]), std::exp(log_scales[3 * n + 1]), std::exp(log_scales[3 * n + 2]));
  }

  Quat rotation(std::size_t n) const {
    return Quat(rotations[4 * n], rotations[4 * n + 1], rotations[4 * n + 2], rotations[4 * n + 3]);
  }

  double opacity(std::size_t n) const { return sigmoid(opacity_logits[n]); }

  const double* sh_channel(std::size_t n, int channel) const { return &sh[(n * 3 + channel) * sh_bands]; }
  double* sh_channel(std::size_t n, int channel) { return &sh[(n * 3 + channel) * sh_bands]; }

  Vec3 gain(std::size_t n) const {
    return local_gain.empty() ? base_color_gain : base_color_gain * local_gain[n];
  }

  Vec3 centroid() const {
    Vec3 sum = Vec3::Zero();
    for (std::size_t n = 0; n < count; ++n) sum += position(n);
    return count > 0 ? Vec3(sum / static_cast<double>(count)) : sum;
  }

  void validate() const {
    require(count >= 1, Errc::ParseError, "asset '" + asset_id + "' has no gaussians");
    require(positions.size() == count * 3 && log_scales.size() == count * 3 && rotations.size() == count * 4 &&
                opacity_logits.size() == count && sh.size() == count * 3 * static_cast<std::size_t>(sh_bands),
            Errc::ParseError, "asset '" + asset_id + "' has inconsistent array sizes");
    sh_degree_for_bands(sh_bands);
    for (std::size_t n = 0; n < count; ++n) {
      require(std::abs(rotation(n).norm() - 1.0) <= 1e-6, Errc::ParseError,
              "asset '" + asset_id + "' gaussian " + std::to_string(n) + " has a non-unit quaternion");
    }
  }
};

struct SplatLoadStats {
  std::size_t clamped_scales = 0;
  std::size_t renormalized_rotations = 0;
};

namespace splat_detail {

struct PlyHeader {
  std::size_t vertex_count = 0;
  std::vector<std::string> properties;  // in file order, all float32
  std::size_t data_offset = 0;
};

inline PlyHeader parse_ply_header(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  PlyHeader header;
  std::size_t pos = 0;
  const auto next_line = [&]() -> std::string {
    std::string line;
    while (pos < bytes.size() && bytes[pos] != '\n') line.push_back(static_cast<char>(bytes[pos++]));
    require(pos < bytes.size(), Errc::ParseError, origin + ": truncated header");
    ++pos;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  require(next_line() == "ply", Errc::ParseError, origin + ": not a PLY file");
  bool in_vertex_element = false;
  for (;;) {
    const std::string line = next_line();
    if (line == "end_header") break;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "format") {
      std::string fmt;
      ss >> fmt;
      require(fmt == "binary_little_endian", Errc::UnsupportedLayout,
              origin + ": only binary_little_endian PLY is supported");
    } else if (word == "element") {
      std::string name;
      std::size_t n = 0;
      ss >> name >> n;
      in_vertex_element = name == "vertex";
      if (in_vertex_element) header.vertex_count = n;
      else require(n == 0, Errc::UnsupportedLayout, origin + ": unexpected element '" + name + "'");
    } else if (word == "property" && in_vertex_element) {
      std::string type, name;
      ss >> type >> name;
      require(type == "float" || type == "float32", Errc::UnsupportedLayout,
              origin + ": property '" + name + "' must be float32");
      header.properties.push_back(name);
    }
  }
  header.data_offset = pos;
  return header;
}

}  // namespace splat_detail

/// Reads a standard 3DGS splat file (binary little-endian PLY with fields
/// x,y,z, f_dc_0..2, f_rest_*, opacity, scale_0..2, rot_0..3; rot_0 is the
/// quaternion real part). The SH degree is inferred from the f_rest count.
/// Out-of-range scales are clamped and near-unit quaternions renormalized,
/// with counts reported through `stats`.
inline GaussianAsset load_splat(const std::filesystem::path& path, const std::string& asset_id,
                                std::uint8_t instance_label, SplatLoadStats* stats = nullptr) {
  const auto bytes = png_detail::read_file(path);
  const auto header = splat_detail::parse_ply_header(bytes, path.string());
  require(header.vertex_count >= 1, Errc::ParseError, path.string() + ": empty vertex element");

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.properties.size(); ++i) index[header.properties[i]] = i;
  const auto need = [&](const std::string& name) {
    const auto it = index.find(name);
    require(it != index.end(), Errc::UnsupportedLayout, path.string() + ": missing property '" + name + "'");
    return it->second;
  };

  const std::size_t ix = need("x"), iy = need("y"), iz = need("z");
  const std::size_t idc0 = need("f_dc_0"), idc1 = need("f_dc_1"), idc2 = need("f_dc_2");
  const std::size_t iop = need("opacity");
  const std::size_t is0 = need("scale_0"), is1 = need("scale_1"), is2 = need("scale_2");
  const std::size_t ir0 = need("rot_0"), ir1 = need("rot_1"), ir2 = need("rot_2"), ir3 = need("rot_3");

  std::size_t rest_count = 0;
  while (index.count("f_rest_" + std::to_string(rest_count)) > 0) ++rest_count;
  require(rest_count == 0 || rest_count == 9 || rest_count == 24 || rest_count == 45, Errc::UnsupportedLayout,
          path.string() + ": f_rest count " + std::to_string(rest_count) + " does not match SH degree 1..3");
  std::size_t rest_base = 0;
  if (rest_count > 0) {
    rest_base = need("f_rest_0");
    for (std::size_t k = 1; k < rest_count; ++k) {
      require(need("f_rest_" + std::to_string(k)) == rest_base + k, Errc::UnsupportedLayout,
              path.string() + ": f_rest properties must be contiguous");
    }
  }
  const int bands = static_cast<int>(rest_count / 3) + 1;

  const std::size_t stride = header.properties.size() * sizeof(float);
  require(bytes.size() >= header.data_offset + stride * header.vertex_count, Errc::ParseError,
          path.string() + ": truncated vertex data");

  GaussianAsset asset;
  asset.asset_id = asset_id;
  asset.instance_label = instance_label;
  asset.count = header.vertex_count;
  asset.sh_bands = bands;
  asset.positions.resize(asset.count * 3);
  asset.log_scales.resize(asset.count * 3);
  asset.rotations.resize(asset.count * 4);
  asset.opacity_logits.resize(asset.count);
  asset.sh.assign(asset.count * 3 * static_cast<std::size_t>(bands), 0.0);

  SplatLoadStats local_stats;
  const double min_log = std::log(kMinActivatedScale);
  const double max_log = std::log(kMaxActivatedScale);
  for (std::size_t n = 0; n < asset.count; ++n) {
    const float* row = reinterpret_cast<const float*>(bytes.data() + header.data_offset + n * stride);
    const double x = row[ix], y = row[iy], z = row[iz];
    require(std::isfinite(x) && std::isfinite(y) && std::isfinite(z), Errc::ParseError,
            path.string() + ": non-finite position at row " + std::to_string(n));
    asset.positions[3 * n] = x;
    asset.positions[3 * n + 1] = y;
    asset.positions[3 * n + 2] = z;
    for (int a = 0; a < 3; ++a) {
      double ls = row[a == 0 ? is0 : a == 1 ? is1 : is2];
      if (ls < min_log || ls > max_log) {
        ls = std::clamp(ls, min_log, max_log);
        ++local_stats.clamped_scales;
      }
      asset.log_scales[3 * n + a] = ls;
    }
    Quat q(row[ir0], row[ir1], row[ir2], row[ir3]);
    const double norm = q.norm();
    require(norm > 1e-8, Errc::ParseError, path.string() + ": zero quaternion at row " + std::to_string(n));
    if (std::abs(norm - 1.0) > 1e-6) ++local_stats.renormalized_rotations;
    q.normalize();
    asset.rotations[4 * n] = q.w();
    asset.rotations[4 * n + 1] = q.x();
    asset.rotations[4 * n + 2] = q.y();
    asset.rotations[4 * n + 3] = q.z();
    asset.opacity_logits[n] = row[iop];
    for (int c = 0; c < 3; ++c) {
      asset.sh_channel(n, c)[0] = row[c == 0 ? idc0 : c == 1 ? idc1 : idc2];
      for (int k = 1; k < bands; ++k) {
        // f_rest is channel-major: all (bands-1) coefficients of R, then G, then B.
        asset.sh_channel(n, c)[k] = row[rest_base + static_cast<std::size_t>(c) * (bands - 1) + (k - 1)];
      }
    }
  }
  if (stats) *stats = local_stats;
  asset.validate();
  return asset;
}

/// Writes the same layout load_splat reads (used for fixtures and caching).
inline void save_splat(const std::filesystem::path& path, const GaussianAsset& asset) {
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\nelement vertex " << asset.count << "\n";
  for (const char* p : {"x", "y", "z"}) header << "property float " << p << "\n";
  for (int c = 0; c < 3; ++c) header << "property float f_dc_" << c << "\n";
  for (int k = 0; k < 3 * (asset.sh_bands - 1); ++k) header << "property float f_rest_" << k << "\n";
  header << "property float opacity\n";
  for (int a = 0; a < 3; ++a) header << "property float scale_" << a << "\n";
  for (int a = 0; a < 4; ++a) header << "property float rot_" << a << "\n";
  header << "end_header\n";

  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::IoError, "cannot write " + path.string());
  const std::string head = header.str();
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  std::vector<float> row(3 + 3 + 3 * (asset.sh_bands - 1) + 1 + 3 + 4);
  for (std::size_t n = 0; n < asset.count; ++n) {
    std::size_t w = 0;
    for (int a = 0; a < 3; ++a) row[w++] = static_cast<float>(asset.positions[3 * n + a]);
    for (int c = 0; c < 3; ++c) row[w++] = static_cast<float>(asset.sh_channel(n, c)[0]);
    for (int c = 0; c < 3; ++c) {
      for (int k = 1; k < asset.sh_bands; ++k) row[w++] = static_cast<float>(asset.sh_channel(n, c)[k]);
    }
    row[w++] = static_cast<float>(asset.opacity_logits[n]);
    for (int a = 0; a < 3; ++a) row[w++] = static_cast<float>(asset.log_scales[3 * n + a]);
    for (int a = 0; a < 4; ++a) row[w++] = static_cast<float>(asset.rotations[4 * n + a]);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  require(out.good(), Errc::IoError, "short write to " + path.string());
}

/// Policy for higher SH bands when an asset is rotated: rotate them exactly
/// or truncate to the view-independent DC term.
enum class ShHandling { Truncate, Rotate };

/// Rigid transform plus uniform scaling about the asset centroid. Opacities
/// and DC color are untouched; higher SH bands follow `sh_handling` unless
/// the rotation is the identity, in which case they are kept verbatim.
inline GaussianAsset transform_asset(const GaussianAsset& asset, const RigidTransform& t, double scale = 1.0,
                                     ShHandling sh_handling = ShHandling::Truncate) {
  require(scale > 0.0, Errc::OutOfRange, "asset scale factor must be positive");
  GaussianAsset out = asset;
  const Vec3 c = asset.centroid();
  const double log_scale = std::log(scale);
  const bool identity_rotation = t.rotation.w() == 1.0 && t.rotation.x() == 0.0 && t.rotation.y() == 0.0 &&
                                 t.rotation.z() == 0.0;

  for (std::size_t n = 0; n < asset.count; ++n) {
    const Vec3 p = c + scale * (asset.position(n) - c);
    const Vec3 pw = t.apply(p);
    out.positions[3 * n] = pw.x();
    out.positions[3 * n + 1] = pw.y();
    out.positions[3 * n + 2] = pw.z();
    for (int a = 0; a < 3; ++a) out.log_scales[3 * n + a] = asset.log_scales[3 * n + a] + log_scale;
    const Quat q = RigidTransform::canonicalized(t.rotation * asset.rotation(n));
    out.rotations[4 * n] = q.w();
    out.rotations[4 * n + 1] = q.x();
    out.rotations[4 * n + 2] = q.y();
    out.rotations[4 * n + 3] = q.z();
  }

  if (!identity_rotation && asset.sh_bands > 1) {
    if (sh_handling == ShHandling::Truncate) {
      for (std::size_t n = 0; n < asset.count; ++n) {
        for (int ch = 0; ch < 3; ++ch) {
          double* coeffs = out.sh_channel(n, ch);
          for (int k = 1; k < out.sh_bands; ++k) coeffs[k] = 0.0;
        }
      }
    } else {
      const ShRotationMatrices rot(t.rotation_matrix(), asset.sh_degree());
      for (std::size_t n = 0; n < asset.count; ++n) {
        for (int ch = 0; ch < 3; ++ch) rot.apply(out.sh_channel(n, ch), out.sh_bands);
      }
    }
  }
  return out;
}

/// 3x3 world covariance of one gaussian: R diag(s^2) R^T.
inline Mat3 gaussian_covariance(const GaussianAsset& asset, std::size_t n) {
  const Mat3 r = asset.rotation(n).toRotationMatrix();
  const Vec3 s = asset.activated_scale(n);
  return r * s.cwiseProduct(s).asDiagonal() * r.transpose();
}

struct AssetRecord {
  std::shared_ptr<const GaussianAsset> asset;
  std::string binding;  // "environment", a robot link name, or an object id
  std::string path;
};

/// Read-shared library of loaded assets keyed by asset id.
class AssetLibrary {
 public:
  void insert(GaussianAsset asset, const std::string& binding, const std::string& path = "") {
    const std::string id = asset.asset_id;
    records_[id] = AssetRecord{std::make_shared<const GaussianAsset>(std::move(asset)), binding, path};
  }

  bool has(const std::string& id) const { return records_.count(id) > 0; }

  const GaussianAsset& at(const std::string& id) const {
    const auto it = records_.find(id);
    require(it != records_.end(), Errc::UnknownAsset, "asset '" + id + "' is not in the library");
    return *it->second.asset;
  }

  std::shared_ptr<const GaussianAsset> share(const std::string& id) const {
    const auto it = records_.find(id);
    require(it != records_.end(), Errc::UnknownAsset, "asset '" + id + "' is not in the library");
    return it->second.asset;
  }

  const std::string& binding(const std::string& id) const {
    const auto it = records_.find(id);
    require(it != records_.end(), Errc::UnknownAsset, "asset '" + id + "' is not in the library");
    return it->second.binding;
  }

  std::set<std::string> ids() const {
    std::set<std::string> out;
    for (const auto& [id, rec] : records_) out.insert(id);
    return out;
  }

  const std::map<std::string, AssetRecord>& records() const { return records_; }

  void replace_asset(const std::string& id, GaussianAsset asset) {
    auto it = records_.find(id);
    require(it != records_.end(), Errc::UnknownAsset, "asset '" + id + "' is not in the library");
    it->second.asset = std::make_shared<const GaussianAsset>(std::move(asset));
  }

 private:
  std::map<std::string, AssetRecord> records_;
};

namespace splat_detail {

// EXOGS_CACHE holds binary dumps of parsed splat files keyed by the source
// path, size and mtime, skipping the PLY decode on repeat runs.
constexpr std::uint32_t kCacheMagic = 0x31434745;  // "EGC1"

inline std::optional<std::filesystem::path> cache_file_for(const std::filesystem::path& splat_path) {
  const char* env = std::getenv("EXOGS_CACHE");
  if (!env || !*env) return std::nullopt;
  std::error_code ec;
  std::filesystem::create_directories(env, ec);
  if (ec) return std::nullopt;
  const auto size = std::filesystem::file_size(splat_path, ec);
  if (ec) return std::nullopt;
  const auto mtime = std::filesystem::last_write_time(splat_path, ec).time_since_epoch().count();
  if (ec) return std::nullopt;
  const std::string key = splat_path.string() + ":" + std::to_string(size) + ":" + std::to_string(mtime);
  return std::filesystem::path(env) / (hash_hex(fnv1a_hash(key)) + ".splat");
}

inline void write_cache(const std::filesystem::path& path, const GaussianAsset& asset) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) return;
  const auto put = [&](const void* p, std::size_t n) { out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); };
  const std::uint64_t count = asset.count;
  const std::uint32_t bands = static_cast<std::uint32_t>(asset.sh_bands);
  put(&kCacheMagic, sizeof(kCacheMagic));
  put(&count, sizeof(count));
  put(&bands, sizeof(bands));
  put(asset.positions.data(), asset.positions.size() * sizeof(double));
  put(asset.log_scales.data(), asset.log_scales.size() * sizeof(double));
  put(asset.rotations.data(), asset.rotations.size() * sizeof(double));
  put(asset.opacity_logits.data(), asset.opacity_logits.size() * sizeof(double));
  put(asset.sh.data(), asset.sh.size() * sizeof(double));
}

inline std::optional<GaussianAsset> read_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) return std::nullopt;
  const auto get = [&](void* p, std::size_t n) { in.read(static_cast<char*>(p), static_cast<std::streamsize>(n)); };
  std::uint32_t magic = 0;
  std::uint64_t count = 0;
  std::uint32_t bands = 0;
  get(&magic, sizeof(magic));
  get(&count, sizeof(count));
  get(&bands, sizeof(bands));
  if (!in.good() || magic != kCacheMagic || count == 0 || (bands != 1 && bands != 4 && bands != 9 && bands != 16)) {
    return std::nullopt;
  }
  GaussianAsset asset;
  asset.count = count;
  asset.sh_bands = static_cast<int>(bands);
  asset.positions.resize(count * 3);
  asset.log_scales.resize(count * 3);
  asset.rotations.resize(count * 4);
  asset.opacity_logits.resize(count);
  asset.sh.resize(count * 3 * bands);
  get(asset.positions.data(), asset.positions.size() * sizeof(double));
  get(asset.log_scales.data(), asset.log_scales.size() * sizeof(double));
  get(asset.rotations.data(), asset.rotations.size() * sizeof(double));
  get(asset.opacity_logits.data(), asset.opacity_logits.size() * sizeof(double));
  get(asset.sh.data(), asset.sh.size() * sizeof(double));
  if (!in.good()) return std::nullopt;
  return asset;
}

}  // namespace splat_detail

/// Loads an asset manifest: a JSON object mapping asset_id to
/// {path, instance_label, binding}. Paths resolve relative to the manifest.
/// If EXOGS_CACHE names a directory, parsed splats are cached there.
inline AssetLibrary load_asset_library(const std::filesystem::path& manifest_path) {
  const Json manifest = load_json_file(manifest_path);
  require(manifest.is_object(), Errc::SchemaError, manifest_path.string() + ": manifest must be a JSON object");
  AssetLibrary lib;
  for (const auto& [asset_id, record] : manifest.items()) {
    try {
      const std::filesystem::path rel(record.at("path").get<std::string>());
      const auto path = rel.is_absolute() ? rel : manifest_path.parent_path() / rel;
      const int label = record.at("instance_label").get<int>();
      require(label >= 0 && label < 255, Errc::SchemaError, "instance_label must be in [0, 254]");
      const auto binding = record.at("binding").get<std::string>();
      require(std::filesystem::exists(path), Errc::MissingFile, "splat file " + path.string());

      GaussianAsset asset;
      const auto cache_path = splat_detail::cache_file_for(path);
      bool from_cache = false;
      if (cache_path && std::filesystem::exists(*cache_path)) {
        if (auto cached = splat_detail::read_cache(*cache_path)) {
          asset = std::move(*cached);
          from_cache = true;
        }
      }
      if (!from_cache) {
        asset = load_splat(path, asset_id, static_cast<std::uint8_t>(label));
        if (cache_path) splat_detail::write_cache(*cache_path, asset);
      }
      asset.asset_id = asset_id;
      asset.instance_label = static_cast<std::uint8_t>(label);
      lib.insert(std::move(asset), binding, path.string());
    } catch (const Json::exception& e) {
      raise(Errc::SchemaError, manifest_path.string() + ": asset '" + asset_id + "': " + e.what());
    }
  }
  return lib;
}

struct Placement {
  std::string asset_id;
  std::shared_ptr<const GaussianAsset> asset;
  RigidTransform pose;
  double scale = 1.0;
};

/// Fully posed scene for one timestep.
struct FrameScene {
  std::vector<Placement> placements;
  CameraModel camera;
  std::shared_ptr<const ImageF> background;  // optional, pre-fitted to the render size
  Vec3 background_color{0.0, 0.0, 0.0};
};

/// environment assets at identity + robot link assets at their FK poses +
/// object assets at their processed track poses.
inline FrameScene compose_frame(const AssetLibrary& lib, const Demonstration& demo, std::size_t step,
                                const std::vector<RigidTransform>& link_poses, const RobotModel& model,
                                const CameraModel& camera) {
  require(step < demo.steps(), Errc::OutOfRange,
          "step " + std::to_string(step) + " outside trajectory of length " + std::to_string(demo.steps()));
  require(link_poses.size() == model.links.size(), Errc::LengthMismatch, "link pose count != link count");

  FrameScene scene;
  scene.camera = camera;
  std::set<std::string> placed;
  const auto place = [&](const std::string& asset_id, const RigidTransform& pose, double scale) {
    require(placed.insert(asset_id).second, Errc::SchemaError, "asset '" + asset_id + "' placed twice in one frame");
    scene.placements.push_back(Placement{asset_id, lib.share(asset_id), pose, scale});
  };

  for (const auto& [asset_id, rec] : lib.records()) {
    if (rec.binding == "environment") {
      place(asset_id, RigidTransform::identity(), 1.0);
    } else if (const int li = model.link_index(rec.binding); li >= 0) {
      place(asset_id, link_poses[static_cast<std::size_t>(li)], 1.0);
    }
    // Other bindings are object assets; they are placed through the demo below.
  }
  for (const auto& [object_id, track] : demo.object_tracks) {
    const auto ait = demo.object_assets.find(object_id);
    const std::string asset_id = ait != demo.object_assets.end() ? ait->second : object_id;
    require(lib.has(asset_id), Errc::MissingBinding,
            "object '" + object_id + "' is bound to asset '" + asset_id + "' which is not loaded");
    const double scale = demo.object_scales.count(object_id) ? demo.object_scales.at(object_id) : 1.0;
    place(asset_id, track[step], scale);
  }
  return scene;
}

}  // namespace exogs
