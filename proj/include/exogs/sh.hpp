// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "exogs/error.hpp"
#include "exogs/geometry.hpp"

namespace exogs {

// Real spherical harmonics in the standard splatting convention
// (Condon-Shortley phase folded into the constants).
constexpr double kShC0 = 0.28209479177387814;
constexpr double kShC1 = 0.4886025119029199;
constexpr std::array<double, 5> kShC2 = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                         -1.0925484305920792, 0.5462742152960396};
constexpr std::array<double, 7> kShC3 = {-0.5900435899266435, 2.890611442640554,  -0.4570457994644658,
                                         0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                                         -0.5900435899266435};

inline int sh_degree_for_bands(int bands) {
  switch (bands) {
    case 1: return 0;
    case 4: return 1;
    case 9: return 2;
    case 16: return 3;
  }
  raise(Errc::UnsupportedLayout, "spherical harmonics band count must be 1, 4, 9 or 16, got " + std::to_string(bands));
}

/// Fills basis[0..bands) with the real SH basis values for a unit direction.
inline void sh_basis(const Vec3& dir, int bands, double* basis) {
  const double x = dir.x(), y = dir.y(), z = dir.z();
  basis[0] = kShC0;
  if (bands <= 1) return;
  basis[1] = -kShC1 * y;
  basis[2] = kShC1 * z;
  basis[3] = -kShC1 * x;
  if (bands <= 4) return;
  const double xx = x * x, yy = y * y, zz = z * z;
  basis[4] = kShC2[0] * x * y;
  basis[5] = kShC2[1] * y * z;
  basis[6] = kShC2[2] * (2.0 * zz - xx - yy);
  basis[7] = kShC2[3] * x * z;
  basis[8] = kShC2[4] * (xx - yy);
  if (bands <= 9) return;
  basis[9] = kShC3[0] * y * (3.0 * xx - yy);
  basis[10] = kShC3[1] * x * y * z;
  basis[11] = kShC3[2] * y * (4.0 * zz - xx - yy);
  basis[12] = kShC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  basis[13] = kShC3[4] * x * (4.0 * zz - xx - yy);
  basis[14] = kShC3[5] * z * (xx - yy);
  basis[15] = kShC3[6] * x * (xx - 3.0 * yy);
}

/// c = 0.5 + sum_k basis_k * coeff_k, the splatting color decode (unclamped).
inline double sh_decode(const double* coeffs, const double* basis, int bands) {
  double v = 0.5;
  for (int k = 0; k < bands; ++k) v += basis[k] * coeffs[k];
  return v;
}

namespace sh_detail {

// Ivanic & Ruse recursion for real-SH rotation matrices, band by band.
// Operates in the plain real basis; callers conjugate with the
// Condon-Shortley signs to match the splatting convention above.
struct BandRotations {
  std::vector<Eigen::MatrixXd> bands;  // bands[l] is (2l+1)x(2l+1)

  double entry(int l, int m, int n) const { return bands[l](m + l, n + l); }
};

inline double ivanic_p(const BandRotations& rot, int i, int a, int b, int l) {
  const Eigen::MatrixXd& r1 = rot.bands[1];
  const Eigen::MatrixXd& prev = rot.bands[l - 1];
  if (b == l) {
    return r1(i + 1, 2) * prev(a + l - 1, 2 * l - 2) - r1(i + 1, 0) * prev(a + l - 1, 0);
  }
  if (b == -l) {
    return r1(i + 1, 2) * prev(a + l - 1, 0) + r1(i + 1, 0) * prev(a + l - 1, 2 * l - 2);
  }
  return r1(i + 1, 1) * prev(a + l - 1, b + l - 1);
}

inline double ivanic_u(const BandRotations& rot, int m, int n, int l) { return ivanic_p(rot, 0, m, n, l); }

inline double ivanic_v(const BandRotations& rot, int m, int n, int l) {
  if (m == 0) {
    return ivanic_p(rot, 1, 1, n, l) + ivanic_p(rot, -1, -1, n, l);
  }
  if (m > 0) {
    const double d = m == 1 ? 1.0 : 0.0;
    return ivanic_p(rot, 1, m - 1, n, l) * std::sqrt(1.0 + d) - ivanic_p(rot, -1, -m + 1, n, l) * (1.0 - d);
  }
  const double d = m == -1 ? 1.0 : 0.0;
  return ivanic_p(rot, 1, m + 1, n, l) * (1.0 - d) + ivanic_p(rot, -1, -m - 1, n, l) * std::sqrt(1.0 + d);
}

inline double ivanic_w(const BandRotations& rot, int m, int n, int l) {
  if (m == 0) return 0.0;
  if (m > 0) return ivanic_p(rot, 1, m + 1, n, l) + ivanic_p(rot, -1, -m - 1, n, l);
  return ivanic_p(rot, 1, m - 1, n, l) - ivanic_p(rot, -1, -m + 1, n, l);
}

inline BandRotations band_rotations(const Mat3& r, int max_degree) {
  BandRotations rot;
  rot.bands.resize(static_cast<std::size_t>(max_degree) + 1);
  rot.bands[0] = Eigen::MatrixXd::Ones(1, 1);
  if (max_degree < 1) return rot;

  // Band 1 in the (y, z, x) arrangement of the plain real basis.
  Eigen::MatrixXd r1(3, 3);
  r1 << r(1, 1), r(1, 2), r(1, 0),
        r(2, 1), r(2, 2), r(2, 0),
        r(0, 1), r(0, 2), r(0, 0);
  rot.bands[1] = r1;

  for (int l = 2; l <= max_degree; ++l) {
    Eigen::MatrixXd band = Eigen::MatrixXd::Zero(2 * l + 1, 2 * l + 1);
    for (int m = -l; m <= l; ++m) {
      for (int n = -l; n <= l; ++n) {
        const double d = m == 0 ? 1.0 : 0.0;
        const double denom = std::abs(n) == l ? (2.0 * l) * (2.0 * l - 1.0) : double(l + n) * double(l - n);
        const double u = std::sqrt(double(l + m) * double(l - m) / denom);
        const double v =
            0.5 * std::sqrt((1.0 + d) * double(l + std::abs(m) - 1) * double(l + std::abs(m)) / denom) * (1.0 - 2.0 * d);
        const double w = -0.5 * std::sqrt(double(l - std::abs(m) - 1) * double(l - std::abs(m)) / denom) * (1.0 - d);
        double value = 0.0;
        if (u != 0.0) value += u * ivanic_u(rot, m, n, l);
        if (v != 0.0) value += v * ivanic_v(rot, m, n, l);
        if (w != 0.0) value += w * ivanic_w(rot, m, n, l);
        band(m + l, n + l) = value;
      }
    }
    rot.bands[l] = band;
  }
  return rot;
}

}  // namespace sh_detail

/// Per-band rotation matrices matching the splatting basis above: rotating a
/// coefficient vector with these is equivalent to evaluating the original
/// coefficients along the inversely rotated direction.
class ShRotationMatrices {
 public:
  ShRotationMatrices(const Mat3& rotation, int max_degree) {
    auto plain = sh_detail::band_rotations(rotation, max_degree);
    bands_.reserve(plain.bands.size());
    for (int l = 0; l < static_cast<int>(plain.bands.size()); ++l) {
      Eigen::MatrixXd m = plain.bands[l];
      // Conjugate with the Condon-Shortley signs sigma_m = (-1)^m.
      for (int a = -l; a <= l; ++a) {
        for (int b = -l; b <= l; ++b) {
          const double sign = ((a + b) % 2 == 0) ? 1.0 : -1.0;
          m(a + l, b + l) *= sign;
        }
      }
      bands_.push_back(std::move(m));
    }
  }

  /// In-place rotation of one channel's coefficients (length = bands).
  void apply(double* coeffs, int bands) const {
    const int degree = sh_degree_for_bands(bands);
    for (int l = 1; l <= degree && l < static_cast<int>(bands_.size()); ++l) {
      const Eigen::MatrixXd& m = bands_[l];
      Eigen::VectorXd in(2 * l + 1);
      for (int k = 0; k < 2 * l + 1; ++k) in(k) = coeffs[l * l + k];
      const Eigen::VectorXd out = m * in;
      for (int k = 0; k < 2 * l + 1; ++k) coeffs[l * l + k] = out(k);
    }
  }

 private:
  std::vector<Eigen::MatrixXd> bands_;
};

}  // namespace exogs
