#pragma once

#include <stdexcept>

#include "mpsurvey/kinematics.hpp"

namespace mps {

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

struct PlanarDisplacement {
  double dx = 0.0;
  double dy = 0.0;
};

// Perspective model p = (omega/z_c) * [x_c, y_c] + principal point. Only the
// ratio omega/z_c is observable in calibration; omega is fixed from the field
// of view so renders and the servo scale stay consistent.
struct CameraIntrinsics {
  double omega = 381.3518983;  // (W/2) / tan(fov/2) for W=640, fov=80 deg
  double u0 = 320.0;
  double v0 = 180.0;
  int width = 640;
  int height = 360;
  double fov_deg = 80.0;

  void validate() const {
    if (omega <= 0.0) throw std::invalid_argument("omega must be positive");
    if (u0 < 0.0 || u0 > width || v0 < 0.0 || v0 > height) {
      throw std::invalid_argument("principal point outside image bounds");
    }
  }
};

// Empirical pixel-to-distance scale at the reference height, plus the fixed
// hand-eye yaw between image axes and the rover frame.
struct ScaleCalibration {
  double meters_per_pixel = 0.1 / 381.3518983;
  double nominal_zc = 0.1;
  double hand_eye_yaw = 0.0;

  void validate() const {
    if (meters_per_pixel <= 0.0) {
      throw std::invalid_argument("meters_per_pixel must be positive");
    }
  }
};

class BehindCameraError : public std::domain_error {
 public:
  explicit BehindCameraError(const std::string& what) : std::domain_error(what) {}
};

// Projects a camera-frame point (z_c > 0 in front of the lens).
PixelCoord project(const CameraIntrinsics& intr, const CartesianPoint& p_cam);

// Maps a pixel error to a planar displacement in the rover frame.
PlanarDisplacement pixel_to_displacement(const ScaleCalibration& cal,
                                         const PixelCoord& pixel_error);

}  // namespace mps
