// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "exogs/error.hpp"
#include "exogs/geometry.hpp"

namespace exogs {

using Json = nlohmann::json;

inline Json to_json(const RigidTransform& t) {
  return Json{{"wxyz", {t.rotation.w(), t.rotation.x(), t.rotation.y(), t.rotation.z()}},
              {"xyz", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

inline RigidTransform transform_from_json(const Json& j) {
  const auto& w = j.at("wxyz");
  const auto& x = j.at("xyz");
  require(w.size() == 4 && x.size() == 3, Errc::SchemaError, "pose needs wxyz[4] and xyz[3]");
  return RigidTransform(Quat(w[0].get<double>(), w[1].get<double>(), w[2].get<double>(), w[3].get<double>()),
                        Vec3(x[0].get<double>(), x[1].get<double>(), x[2].get<double>()));
}

inline Json to_json(const CameraModel& cam) {
  return Json{{"fx", cam.fx},       {"fy", cam.fy},           {"cx", cam.cx},
              {"cy", cam.cy},       {"width", cam.width},     {"height", cam.height},
              {"extrinsics", to_json(cam.extrinsics)}};
}

inline CameraModel camera_from_json(const Json& j) {
  CameraModel cam;
  try {
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    cam.extrinsics = transform_from_json(j.at("extrinsics"));
  } catch (const Json::exception& e) {
    raise(Errc::SchemaError, std::string("camera record: ") + e.what());
  }
  cam.validate();
  return cam;
}

inline Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), Errc::MissingFile, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    raise(Errc::SchemaError, path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  require(out.good(), Errc::IoError, "cannot write " + path.string());
  out << j.dump(2) << "\n";
  require(out.good(), Errc::IoError, "short write to " + path.string());
}

/// FNV-1a over a string; used for plan/provenance hashes, not security.
inline std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace exogs
