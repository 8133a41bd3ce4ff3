#include "mpsurvey/camera.hpp"

#include <cmath>
#include <sstream>

namespace mps {

PixelCoord project(const CameraIntrinsics& intr, const CartesianPoint& p_cam) {
  if (!(p_cam.z > 0.0)) {
    std::ostringstream os;
    os << "point behind camera: z_c = " << p_cam.z;
    throw BehindCameraError(os.str());
  }
  const double scale = intr.omega / p_cam.z;
  return {scale * p_cam.x + intr.u0, scale * p_cam.y + intr.v0};
}

PlanarDisplacement pixel_to_displacement(const ScaleCalibration& cal,
                                         const PixelCoord& pixel_error) {
  cal.validate();
  const double dx_cam = cal.meters_per_pixel * pixel_error.u;
  const double dy_cam = cal.meters_per_pixel * pixel_error.v;
  const double c = std::cos(cal.hand_eye_yaw);
  const double s = std::sin(cal.hand_eye_yaw);
  return {c * dx_cam - s * dy_cam, s * dx_cam + c * dy_cam};
}

}  // namespace mps
