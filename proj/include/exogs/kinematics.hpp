// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "exogs/error.hpp"
#include "exogs/geometry.hpp"

namespace exogs {

enum class JointType { Revolute, Prismatic, Fixed };

struct JointDesc {
  std::string name;
  JointType type = JointType::Fixed;
  std::string parent_link;
  std::string child_link;
  RigidTransform origin;          // parent link frame -> joint frame at zero
  Vec3 axis{1.0, 0.0, 0.0};       // unit, in the joint frame
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool is_gripper = false;        // driven by g instead of q

  bool operator==(const JointDesc& o) const {
    return name == o.name && type == o.type && parent_link == o.parent_link && child_link == o.child_link &&
           origin.rotation.coeffs() == o.origin.rotation.coeffs() && origin.translation == o.origin.translation &&
           axis == o.axis && lower == o.lower && upper == o.upper && is_gripper == o.is_gripper;
  }
};

struct LinkDesc {
  std::string name;
  int parent_joint = -1;  // index into joints, -1 for the root link

  bool operator==(const LinkDesc& o) const { return name == o.name && parent_joint == o.parent_joint; }
};

/// Kinematic tree parsed from a URDF subset (revolute/prismatic/fixed joints;
/// visual, collision and inertial elements are ignored). Two extension
/// elements are understood: <gripper min_open max_open joints="a b"/> names
/// prismatic finger joints driven symmetrically by the gripper signal, and
/// <end_effector link="..."/> marks the frame used for object attachment.
struct RobotModel {
  std::string name;
  std::vector<LinkDesc> links;    // document order
  std::vector<JointDesc> joints;  // document order
  std::vector<int> actuated;      // joint indices addressed by q, document order
  RigidTransform base_pose;
  std::string end_effector_link;
  double gripper_min_open = 0.0;
  double gripper_max_open = 0.08;

  int dof() const { return static_cast<int>(actuated.size()); }

  int link_index(const std::string& link_name) const {
    for (std::size_t i = 0; i < links.size(); ++i) {
      if (links[i].name == link_name) return static_cast<int>(i);
    }
    return -1;
  }

  int end_effector_index() const { return link_index(end_effector_link); }

  bool operator==(const RobotModel& o) const {
    return name == o.name && links == o.links && joints == o.joints && actuated == o.actuated &&
           base_pose.rotation.coeffs() == o.base_pose.rotation.coeffs() &&
           base_pose.translation == o.base_pose.translation && end_effector_link == o.end_effector_link &&
           gripper_min_open == o.gripper_min_open && gripper_max_open == o.gripper_max_open;
  }
};

struct JointState {
  Eigen::VectorXd q;
  double g = 0.0;  // gripper opening fraction in [0, 1]
  double t = 0.0;  // seconds
};

struct Trajectory {
  std::vector<JointState> states;

  std::size_t size() const { return states.size(); }

  void validate() const {
    for (std::size_t i = 0; i < states.size(); ++i) {
      const auto& s = states[i];
      require(s.g >= 0.0 && s.g <= 1.0, Errc::OutOfRange,
              "gripper fraction out of [0,1] at step " + std::to_string(i));
      if (i > 0) {
        require(states[i - 1].t < s.t, Errc::NonMonotonicTimestamps,
                "timestamps must be strictly increasing at step " + std::to_string(i));
        require(states[i - 1].q.size() == s.q.size(), Errc::DimensionMismatch,
                "joint dimension changes at step " + std::to_string(i));
      }
    }
  }
};

namespace urdf_detail {

inline std::vector<double> parse_numbers(const std::string& text, std::size_t expected, const std::string& what) {
  std::istringstream ss(text);
  std::vector<double> out;
  double v = 0.0;
  while (ss >> v) out.push_back(v);
  require(out.size() == expected, Errc::ParseError,
          what + ": expected " + std::to_string(expected) + " numbers, got '" + text + "'");
  return out;
}

inline RigidTransform parse_origin(const boost::property_tree::ptree& node) {
  const auto xyz_s = node.get<std::string>("<xmlattr>.xyz", "0 0 0");
  const auto xyz = parse_numbers(xyz_s, 3, "origin xyz");
  const Vec3 t(xyz[0], xyz[1], xyz[2]);
  if (const auto wxyz_s = node.get_optional<std::string>("<xmlattr>.wxyz")) {
    const auto w = parse_numbers(*wxyz_s, 4, "origin wxyz");
    return RigidTransform(Quat(w[0], w[1], w[2], w[3]), t);
  }
  const auto rpy_s = node.get<std::string>("<xmlattr>.rpy", "0 0 0");
  const auto rpy = parse_numbers(rpy_s, 3, "origin rpy");
  const Quat q = Eigen::AngleAxisd(rpy[2], Vec3::UnitZ()) * Eigen::AngleAxisd(rpy[1], Vec3::UnitY()) *
                 Eigen::AngleAxisd(rpy[0], Vec3::UnitX());
  return RigidTransform(q, t);
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt_transform_attrs(const RigidTransform& t) {
  const auto& q = t.rotation;
  return "xyz=\"" + fmt_double(t.translation.x()) + " " + fmt_double(t.translation.y()) + " " +
         fmt_double(t.translation.z()) + "\" wxyz=\"" + fmt_double(q.w()) + " " + fmt_double(q.x()) + " " +
         fmt_double(q.y()) + " " + fmt_double(q.z()) + "\"";
}

}  // namespace urdf_detail

inline RobotModel parse_robot(const std::string& urdf_text) {
  namespace pt = boost::property_tree;
  pt::ptree doc;
  try {
    std::istringstream ss(urdf_text);
    pt::read_xml(ss, doc);
  } catch (const pt::xml_parser_error& e) {
    raise(Errc::ParseError, std::string("malformed XML: ") + e.what());
  }
  const auto robot = doc.get_child_optional("robot");
  require(bool(robot), Errc::ParseError, "missing <robot> root element");

  RobotModel model;
  model.name = robot->get<std::string>("<xmlattr>.name", "robot");
  std::vector<std::string> gripper_joint_names;
  std::optional<std::string> ee_link;

  for (const auto& [tag, node] : *robot) {
    if (tag == "link") {
      LinkDesc link;
      link.name = node.get<std::string>("<xmlattr>.name", "");
      require(!link.name.empty(), Errc::ParseError, "link without a name");
      model.links.push_back(link);
    } else if (tag == "joint") {
      JointDesc j;
      j.name = node.get<std::string>("<xmlattr>.name", "");
      const auto type = node.get<std::string>("<xmlattr>.type", "");
      if (type == "revolute") {
        j.type = JointType::Revolute;
      } else if (type == "prismatic") {
        j.type = JointType::Prismatic;
      } else if (type == "fixed") {
        j.type = JointType::Fixed;
      } else {
        raise(Errc::UnsupportedJoint, "joint '" + j.name + "' has unsupported type '" + type + "'");
      }
      j.parent_link = node.get<std::string>("parent.<xmlattr>.link", "");
      j.child_link = node.get<std::string>("child.<xmlattr>.link", "");
      require(!j.parent_link.empty() && !j.child_link.empty(), Errc::ParseError,
              "joint '" + j.name + "' needs parent and child links");
      if (const auto origin = node.get_child_optional("origin")) j.origin = urdf_detail::parse_origin(*origin);
      if (const auto axis = node.get_child_optional("axis")) {
        const auto a = urdf_detail::parse_numbers(axis->get<std::string>("<xmlattr>.xyz", "1 0 0"), 3, "axis xyz");
        j.axis = Vec3(a[0], a[1], a[2]);
      }
      require(j.axis.norm() > 1e-12, Errc::ParseError, "joint '" + j.name + "' has a zero axis");
      j.axis.normalize();
      if (const auto limit = node.get_child_optional("limit")) {
        j.lower = limit->get<double>("<xmlattr>.lower", j.lower);
        j.upper = limit->get<double>("<xmlattr>.upper", j.upper);
      }
      require(j.lower <= j.upper, Errc::ParseError, "joint '" + j.name + "' has limits with lower > upper");
      model.joints.push_back(j);
    } else if (tag == "gripper") {
      model.gripper_min_open = node.get<double>("<xmlattr>.min_open", model.gripper_min_open);
      model.gripper_max_open = node.get<double>("<xmlattr>.max_open", model.gripper_max_open);
      if (const auto names = node.get_optional<std::string>("<xmlattr>.joints")) {
        std::istringstream ss(*names);
        std::string n;
        while (ss >> n) gripper_joint_names.push_back(n);
      }
    } else if (tag == "end_effector") {
      ee_link = node.get<std::string>("<xmlattr>.link", "");
    } else if (tag == "base_pose") {
      model.base_pose = urdf_detail::parse_origin(node);
    }
  }
  require(model.gripper_min_open <= model.gripper_max_open, Errc::ParseError,
          "gripper range has min_open > max_open");
  require(!model.links.empty(), Errc::ParseError, "robot has no links");

  // Wire up the tree and reject anything that is not a tree rooted at one base.
  for (std::size_t ji = 0; ji < model.joints.size(); ++ji) {
    auto& j = model.joints[ji];
    require(model.link_index(j.parent_link) >= 0, Errc::ParseError,
            "joint '" + j.name + "' references missing parent link '" + j.parent_link + "'");
    const int child = model.link_index(j.child_link);
    require(child >= 0, Errc::ParseError,
            "joint '" + j.name + "' references missing child link '" + j.child_link + "'");
    require(model.links[child].parent_joint < 0, Errc::CycleError,
            "link '" + j.child_link + "' has more than one parent joint");
    model.links[child].parent_joint = static_cast<int>(ji);
  }
  int roots = 0;
  for (const auto& link : model.links) {
    if (link.parent_joint < 0) ++roots;
  }
  require(roots == 1, Errc::CycleError,
          "kinematic graph must be a tree with exactly one root, found " + std::to_string(roots) + " roots");
  // A parent chain that never reaches the root means a cycle.
  for (std::size_t li = 0; li < model.links.size(); ++li) {
    int cursor = static_cast<int>(li);
    std::size_t hops = 0;
    while (model.links[cursor].parent_joint >= 0) {
      cursor = model.link_index(model.joints[model.links[cursor].parent_joint].parent_link);
      require(++hops <= model.links.size(), Errc::CycleError, "cycle detected through link '" + model.links[li].name + "'");
    }
  }

  for (const auto& gname : gripper_joint_names) {
    bool found = false;
    for (auto& j : model.joints) {
      if (j.name == gname) {
        require(j.type == JointType::Prismatic, Errc::UnsupportedJoint,
                "gripper joint '" + gname + "' must be prismatic");
        j.is_gripper = true;
        found = true;
      }
    }
    require(found, Errc::ParseError, "gripper references missing joint '" + gname + "'");
  }
  for (std::size_t ji = 0; ji < model.joints.size(); ++ji) {
    const auto& j = model.joints[ji];
    if (j.type != JointType::Fixed && !j.is_gripper) model.actuated.push_back(static_cast<int>(ji));
  }

  if (ee_link) {
    require(model.link_index(*ee_link) >= 0, Errc::ParseError, "end_effector references missing link '" + *ee_link + "'");
    model.end_effector_link = *ee_link;
  } else {
    model.end_effector_link = model.links.back().name;
  }
  return model;
}

inline RobotModel load_robot(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), Errc::MissingFile, "cannot open robot description " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_robot(ss.str());
}

/// Emits the same URDF subset parse_robot reads; parse(serialize(m)) == m.
inline std::string serialize_robot(const RobotModel& model) {
  using urdf_detail::fmt_double;
  using urdf_detail::fmt_transform_attrs;
  std::ostringstream out;
  out << "<robot name=\"" << model.name << "\">\n";
  for (const auto& link : model.links) out << "  <link name=\"" << link.name << "\"/>\n";
  std::string gripper_joints;
  for (const auto& j : model.joints) {
    const char* type = j.type == JointType::Revolute ? "revolute" : j.type == JointType::Prismatic ? "prismatic" : "fixed";
    out << "  <joint name=\"" << j.name << "\" type=\"" << type << "\">\n";
    out << "    <parent link=\"" << j.parent_link << "\"/>\n";
    out << "    <child link=\"" << j.child_link << "\"/>\n";
    out << "    <origin " << fmt_transform_attrs(j.origin) << "/>\n";
    out << "    <axis xyz=\"" << fmt_double(j.axis.x()) << " " << fmt_double(j.axis.y()) << " "
        << fmt_double(j.axis.z()) << "\"/>\n";
    if (std::isfinite(j.lower) || std::isfinite(j.upper)) {
      out << "    <limit lower=\"" << fmt_double(j.lower) << "\" upper=\"" << fmt_double(j.upper) << "\"/>\n";
    }
    out << "  </joint>\n";
    if (j.is_gripper) gripper_joints += (gripper_joints.empty() ? "" : " ") + j.name;
  }
  out << "  <gripper min_open=\"" << fmt_double(model.gripper_min_open) << "\" max_open=\""
      << fmt_double(model.gripper_max_open) << "\"";
  if (!gripper_joints.empty()) out << " joints=\"" << gripper_joints << "\"";
  out << "/>\n";
  out << "  <end_effector link=\"" << model.end_effector_link << "\"/>\n";
  out << "  <base_pose " << fmt_transform_attrs(model.base_pose) << "/>\n";
  out << "</robot>\n";
  return out.str();
}

enum class LimitPolicy { Error, Clamp };

inline double gripper_to_width(const RobotModel& model, double g) {
  require(g >= 0.0 && g <= 1.0, Errc::OutOfRange, "gripper fraction must be in [0,1], got " + std::to_string(g));
  return model.gripper_min_open + g * (model.gripper_max_open - model.gripper_min_open);
}

/// Per-link world poses for one joint configuration: each link's pose is its
/// parent's pose composed with the joint origin and the joint motion.
/// Gripper finger joints move by half the commanded width each.
inline std::vector<RigidTransform> forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q,
                                                      LimitPolicy policy = LimitPolicy::Error, double gripper = 0.0) {
  require(q.size() == model.dof(), Errc::DimensionMismatch,
          "expected " + std::to_string(model.dof()) + " joint values, got " + std::to_string(q.size()));

  std::vector<int> q_index(model.joints.size(), -1);
  for (std::size_t k = 0; k < model.actuated.size(); ++k) q_index[model.actuated[k]] = static_cast<int>(k);

  const double finger_travel = gripper_to_width(model, std::clamp(gripper, 0.0, 1.0)) / 2.0;

  std::vector<RigidTransform> poses(model.links.size());
  std::vector<bool> done(model.links.size(), false);

  // Links are resolved on demand by walking up to the root; the tree was
  // validated at parse time so recursion depth is bounded by L.
  const std::function<const RigidTransform&(int)> pose_of = [&](int link) -> const RigidTransform& {
    if (done[link]) return poses[link];
    const int ji = model.links[link].parent_joint;
    if (ji < 0) {
      poses[link] = model.base_pose;
    } else {
      const JointDesc& j = model.joints[ji];
      const RigidTransform& parent = pose_of(model.link_index(j.parent_link));
      double value = 0.0;
      if (j.is_gripper) {
        value = finger_travel;
      } else if (q_index[ji] >= 0) {
        value = q(q_index[ji]);
        if (value < j.lower - 1e-6 || value > j.upper + 1e-6) {
          if (policy == LimitPolicy::Error) {
            raise(Errc::JointLimitViolation,
                  "joint '" + j.name + "' value " + std::to_string(value) + " outside [" + std::to_string(j.lower) +
                      ", " + std::to_string(j.upper) + "]");
          }
          value = std::clamp(value, j.lower, j.upper);
        }
      }
      RigidTransform motion;
      if (j.type == JointType::Revolute) {
        motion = RigidTransform(Quat(Eigen::AngleAxisd(value, j.axis)), Vec3::Zero());
      } else if (j.type == JointType::Prismatic) {
        motion = RigidTransform(Quat::Identity(), value * j.axis);
      }
      poses[link] = compose(compose(parent, j.origin), motion);
    }
    done[link] = true;
    return poses[link];
  };
  for (std::size_t li = 0; li < model.links.size(); ++li) pose_of(static_cast<int>(li));
  return poses;
}

/// Link poses for every trajectory step; row t is forward_kinematics(q_t).
inline std::vector<std::vector<RigidTransform>> replay_link_poses(const RobotModel& model, const Trajectory& traj,
                                                                  LimitPolicy policy = LimitPolicy::Error) {
  traj.validate();
  std::vector<std::vector<RigidTransform>> rows;
  rows.reserve(traj.states.size());
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    const auto& s = traj.states[t];
    try {
      rows.push_back(forward_kinematics(model, s.q, policy, s.g));
    } catch (const Error& e) {
      raise(e.code(), std::string(e.what()) + " (at trajectory step " + std::to_string(t) + ")");
    }
  }
  return rows;
}

}  // namespace exogs
