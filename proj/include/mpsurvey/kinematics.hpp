#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>

namespace mps {

struct CartesianPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Eigen::Vector3d vec() const { return {x, y, z}; }
  static CartesianPoint from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
};

struct CylindricalPoint {
  double r = 0.0;
  double theta = 0.0;
  double h = 0.0;

  CartesianPoint to_cartesian() const {
    return {r * std::cos(theta), r * std::sin(theta), h};
  }
};

struct JointLimits {
  std::array<double, 3> lo{-1.5707963267948966, -1.5707963267948966, -1.5707963267948966};
  std::array<double, 3> hi{1.5707963267948966, 1.5707963267948966, 1.5707963267948966};

  bool contains(double g0, double g1, double g2) const {
    return g0 >= lo[0] && g0 <= hi[0] && g1 >= lo[1] && g1 <= hi[1] &&
           g2 >= lo[2] && g2 <= hi[2];
  }
  // Limits spanning +/- half_range around a nominal pose.
  static JointLimits around(double g0, double g1, double g2, double half_range);
};

// Link lengths and design offsets of the 4-DoF arm. The fourth joint is not
// controlled directly: the wrist stays vertical through
// gamma3 = wrist_sum - gamma1 - gamma2, where wrist_sum is nominally pi/2 and
// may be trimmed slightly to compensate mount flex.
struct ArmGeometry {
  double r1 = 0.13;       // link 1 length (m)
  double r2 = 0.124;      // link 2 length (m)
  double alpha_j = 0.186; // design offset angle (rad)
  double wrist_sum = 1.5707963267948966;
  JointLimits limits;

  void validate() const;
};

struct JointConfig {
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;

  double gamma3(const ArmGeometry& geom) const {
    return geom.wrist_sum - gamma1 - gamma2;
  }
};

struct JointDeltas {
  double d0 = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

class JointLimitError : public std::domain_error {
 public:
  explicit JointLimitError(const std::string& what) : std::domain_error(what) {}
};

class SingularityError : public std::runtime_error {
 public:
  explicit SingularityError(const std::string& what) : std::runtime_error(what) {}
};

// Position of the last joint in rover-frame cylindrical coordinates:
//   theta = gamma0
//   r = r1*sin(delta) + r2*cos(beta)
//   h = r1*cos(delta) + r2*sin(beta)
// with delta = gamma1 + alpha_j and beta = -gamma1 - gamma2.
CylindricalPoint forward_cylindrical(const ArmGeometry& geom, const JointConfig& q);

// Same point mapped to Cartesian (x forward, z up).
CartesianPoint forward_cartesian(const ArmGeometry& geom, const JointConfig& q);

// Analytic Jacobian d(x,y,z)/d(gamma0,gamma1,gamma2) of forward_cartesian.
Eigen::Matrix3d image_jacobian(const ArmGeometry& geom, const JointConfig& q);

struct IncrementOptions {
  bool damping_enabled = true;
  double cond_threshold = 1e6;
  double damping_scale = 1e-4;  // mu = damping_scale * trace(J^T J) / 3
};

// Joint increments realizing a fraction lambda of the Cartesian displacement
// delta_pos: lambda * J^-1 * delta_pos for a well conditioned Jacobian,
// damped least squares past the condition threshold.
JointDeltas solve_increment(const ArmGeometry& geom, const JointConfig& q,
                            const CartesianPoint& delta_pos, double lambda,
                            const IncrementOptions& opts = {});

double jacobian_condition(const Eigen::Matrix3d& j);

}  // namespace mps
