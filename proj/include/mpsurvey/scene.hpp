#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mpsurvey/camera.hpp"
#include "mpsurvey/kinematics.hpp"
#include "mpsurvey/segmentation.hpp"
#include "mpsurvey/spectra.hpp"

namespace mps {

// Smooth seeded height field: a short sum of low-frequency sinusoids whose
// amplitudes are scaled to keep the gradient under the slope cap. Test
// fixtures may add localized bumps.
class Terrain {
 public:
  struct Wave {
    double amplitude = 0.0;
    double kx = 0.0;
    double ky = 0.0;
    double phase = 0.0;
  };
  struct Bump {
    double x = 0.0;
    double y = 0.0;
    double radius = 0.0;
    double height = 0.0;
  };

  static Terrain flat();
  static Terrain generate(std::uint64_t seed, double max_slope_deg = 10.0,
                          int n_waves = 6);

  double height(double x, double y) const;
  double max_slope_deg() const { return max_slope_deg_; }
  void add_bump(const Bump& b) { bumps_.push_back(b); }

 private:
  std::vector<Wave> waves_;
  std::vector<Bump> bumps_;
  double max_slope_deg_ = 10.0;
};

struct Particle {
  double x = 0.0;
  double y = 0.0;
  double size_mm = 0.0;  // diameter
  Hsv color;
  std::string material;

  double radius_m() const { return size_mm * 0.5e-3; }
};

struct WorkspaceBounds {
  double x0 = -1.0;
  double y0 = -1.0;
  double x1 = 1.0;
  double y1 = 1.0;
};

struct Scene {
  Terrain terrain;
  std::vector<Particle> particles;
  WorkspaceBounds bounds;
  std::uint64_t seed = 0;

  void validate() const;  // slope cap, >= 1 mm sizes, positions in bounds

  // Particles with servo-friendly colors scattered uniformly; sizes 2-4 mm.
  static Scene scatter(std::uint64_t seed, const WorkspaceBounds& bounds, int n_particles,
                       double max_slope_deg = 10.0);
};

struct RoverPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

// End-effector instrument layout relative to the last arm joint.
struct Mounting {
  double base_height = 0.14;       // arm base above nominal ground (m)
  double tool_offset = 0.05;       // last joint down to the lens focus point (m)
  double cam_offset_radial = 0.002;
  double cam_offset_up = 0.028;
};

struct NirGeometry {
  double focus_distance = 0.010;       // collimating lens focusing distance (m)
  double spot_radius_focused = 0.0014; // emitter spot radius at zero defocus (m)
  double spot_spread = 0.35;           // radius growth per unit |defocus|
  double receiver_shift = 1.0;         // footprint shift per unit defocus (tan 45 deg)
  double g_width = 0.0004;             // SNR falloff length scale (m)
  double snr_max = 15000.0;
  double counts_scale = 30000.0;
  double dark_floor = 4000.0;

  double spot_radius(double defocus) const {
    return spot_radius_focused + spot_spread * std::abs(defocus);
  }
  double focus_gain(double defocus) const {
    const double t = defocus / g_width;
    return std::exp(-t * t);
  }
  double effective_snr(double defocus) const {
    return std::max(1.0, snr_max * focus_gain(defocus));
  }
};

struct ActuationModel {
  double sigma_act = 2.0e-4;  // rad, per joint per step
  double flex_bias = 0.010;   // rad, constant uncalibrated mount sag
  int settle_ticks = 3;       // planner ticks before a new image is accepted
};

struct EffectorState {
  JointConfig q;              // achieved joints (encoders read these)
  CartesianPoint focus;       // true world focus point, including flex
  bool lamp_on = false;
  bool settled = true;
  bool limit_hit = false;
  int settle_countdown = 0;
};

struct NirSample {
  Spectrum raw;                           // role sample
  std::map<std::string, double> weights;  // ground-truth footprint composition
  double snr_effective = 0.0;
  double defocus = 0.0;
};

struct ReferencePair {
  Spectrum reference;
  Spectrum dark;
};

class ReferenceContaminatedError : public std::runtime_error {
 public:
  explicit ReferenceContaminatedError(const std::string& what)
      : std::runtime_error(what) {}
};

// World-to-pixel bridge for the current effector pose. Camera axes rotate
// with the first joint (eye-in-hand).
struct CameraView {
  CartesianPoint position;
  double yaw = 0.0;

  PixelCoord project_world(const CameraIntrinsics& intr, const CartesianPoint& world) const;
  CartesianPoint pixel_to_ground(const CameraIntrinsics& intr, const PixelCoord& px,
                                 double ground_z) const;
};

// Single-owner deterministic episode simulator. Actuation noise draws come
// from an internal stream seeded by the scene seed; spectra acquisitions take
// explicit seeds so callers control replay.
class SceneSim {
 public:
  SceneSim(Scene scene, ArmGeometry geom, Mounting mount, NirGeometry nir,
           ActuationModel act, GridPtr grid = WavelengthGrid::standard());

  const Scene& scene() const { return scene_; }
  Scene& scene_mutable() { return scene_; }
  const ArmGeometry& geometry() const { return geom_; }
  const Mounting& mounting() const { return mount_; }
  const NirGeometry& nir() const { return nir_; }
  const ActuationModel& actuation() const { return act_; }
  const GridPtr& grid() const { return grid_; }
  const SpectralLibrary& library() const { return library_; }

  void set_rover_pose(const RoverPose& pose) { rover_ = pose; }
  const RoverPose& rover() const { return rover_; }

  EffectorState make_state(const JointConfig& q, bool lamp_on = false) const;

  // Applies deltas plus seeded per-joint Gaussian noise, clamps to limits,
  // and restarts the settling countdown.
  EffectorState step_arm(const EffectorState& state, const JointDeltas& deltas);

  // Consumes one settling interval (time bookkeeping only).
  void settle(EffectorState& state);
  std::uint64_t ticks() const { return ticks_; }
  void advance_ticks(std::uint64_t n) { ticks_ += n; }

  SceneImage render(const EffectorState& state, const CameraIntrinsics& intr,
                    Illumination illumination) const;

  NirSample sample_nir(const EffectorState& state, std::uint64_t seed) const;
  ReferencePair acquire_reference(const EffectorState& state, std::uint64_t seed) const;

  double terrain_height(double x, double y) const;
  double defocus(const EffectorState& state) const;
  std::map<std::string, double> footprint_weights(const EffectorState& state) const;
  // Center of the collection footprint on the terrain (ground truth).
  CartesianPoint measurement_point(const EffectorState& state) const;

  CartesianPoint focus_world(const JointConfig& q, bool with_flex) const;
  CameraView camera_view(const JointConfig& q) const;

 private:
  Scene scene_;
  ArmGeometry geom_;
  Mounting mount_;
  NirGeometry nir_;
  ActuationModel act_;
  GridPtr grid_;
  SpectralLibrary library_ = SpectralLibrary::builtin();
  RoverPose rover_;
  std::mt19937_64 act_rng_;
  std::uint64_t ticks_ = 0;
};

}  // namespace mps
