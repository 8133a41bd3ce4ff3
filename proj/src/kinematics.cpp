#include "mpsurvey/kinematics.hpp"

#include <cmath>
#include <sstream>

namespace mps {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_limits(const ArmGeometry& geom, const JointConfig& q) {
  if (!geom.limits.contains(q.gamma0, q.gamma1, q.gamma2)) {
    std::ostringstream os;
    os << "joint config (" << q.gamma0 << ", " << q.gamma1 << ", " << q.gamma2
       << ") outside limits";
    throw JointLimitError(os.str());
  }
}

}  // namespace

JointLimits JointLimits::around(double g0, double g1, double g2, double half_range) {
  JointLimits lim;
  lim.lo = {g0 - half_range, g1 - half_range, g2 - half_range};
  lim.hi = {g0 + half_range, g1 + half_range, g2 + half_range};
  return lim;
}

void ArmGeometry::validate() const {
  if (r1 <= 0.0 || r2 <= 0.0) {
    throw std::invalid_argument("arm link lengths must be positive");
  }
  if (wrist_sum < kPi / 2.0 - 0.1 || wrist_sum > kPi / 2.0 + 0.1) {
    throw std::invalid_argument("wrist sum outside trim range around pi/2");
  }
  for (int i = 0; i < 3; ++i) {
    if (limits.lo[i] >= limits.hi[i]) {
      throw std::invalid_argument("joint limit interval empty");
    }
  }
}

CylindricalPoint forward_cylindrical(const ArmGeometry& geom, const JointConfig& q) {
  check_limits(geom, q);
  const double delta = q.gamma1 + geom.alpha_j;
  const double beta = -q.gamma1 - q.gamma2;
  CylindricalPoint p;
  p.theta = q.gamma0;
  p.r = geom.r1 * std::sin(delta) + geom.r2 * std::cos(beta);
  p.h = geom.r1 * std::cos(delta) + geom.r2 * std::sin(beta);
  return p;
}

CartesianPoint forward_cartesian(const ArmGeometry& geom, const JointConfig& q) {
  return forward_cylindrical(geom, q).to_cartesian();
}

Eigen::Matrix3d image_jacobian(const ArmGeometry& geom, const JointConfig& q) {
  check_limits(geom, q);
  const double delta = q.gamma1 + geom.alpha_j;
  const double beta = -q.gamma1 - q.gamma2;
  const double phi1 = geom.r1 * std::sin(delta);
  const double phi2 = geom.r2;
  const double phi3 = geom.r1 * std::cos(delta);
  const double sb = std::sin(beta);
  const double cb = std::cos(beta);
  const double s0 = std::sin(q.gamma0);
  const double c0 = std::cos(q.gamma0);

  // Differentiating the closed-form position directly. Note the bottom row
  // carries cos(beta): dz/dgamma1 = -phi1 - phi2*cos(beta) and
  // dz/dgamma2 = -phi2*cos(beta), which the finite-difference tests pin down.
  Eigen::Matrix3d j;
  j(0, 0) = -(phi1 + phi2 * cb) * s0;
  j(0, 1) = (phi3 + phi2 * sb) * c0;
  j(0, 2) = phi2 * sb * c0;
  j(1, 0) = (phi1 + phi2 * cb) * c0;
  j(1, 1) = (phi3 + phi2 * sb) * s0;
  j(1, 2) = phi2 * sb * s0;
  j(2, 0) = 0.0;
  j(2, 1) = -phi1 - phi2 * cb;
  j(2, 2) = -phi2 * cb;
  return j;
}

double jacobian_condition(const Eigen::Matrix3d& j) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(j);
  const double smin = svd.singularValues()(2);
  const double smax = svd.singularValues()(0);
  if (smin <= 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return smax / smin;
}

JointDeltas solve_increment(const ArmGeometry& geom, const JointConfig& q,
                            const CartesianPoint& delta_pos, double lambda,
                            const IncrementOptions& opts) {
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("step fraction lambda must lie in (0, 1]");
  }
  const Eigen::Matrix3d j = image_jacobian(geom, q);
  const double cond = jacobian_condition(j);

  Eigen::Vector3d full;
  if (cond < opts.cond_threshold) {
    full = j.fullPivLu().solve(delta_pos.vec());
  } else if (opts.damping_enabled) {
    const Eigen::Matrix3d jtj = j.transpose() * j;
    const double mu = opts.damping_scale * jtj.trace() / 3.0;
    full = (jtj + mu * Eigen::Matrix3d::Identity()).ldlt().solve(j.transpose() * delta_pos.vec());
  } else {
    std::ostringstream os;
    os << "Jacobian near-singular (cond=" << cond << ") at q=(" << q.gamma0
       << ", " << q.gamma1 << ", " << q.gamma2 << ") with damping disabled";
    throw SingularityError(os.str());
  }

  return {lambda * full(0), lambda * full(1), lambda * full(2)};
}

}  // namespace mps
