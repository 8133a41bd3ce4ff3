#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mpsurvey/classifier.hpp"
#include "mpsurvey/scene.hpp"
#include "mpsurvey/seeding.hpp"
#include "mpsurvey/segmentation.hpp"

namespace mps {

struct ServoParams {
  double lambda = 0.2;              // fraction of the solved displacement per step
  double xy_tol = 1e-3;             // terminal xy tolerance (m)
  double track_tol = 2.0e-4;        // XY-phase apparent-error stop (m)
  double snr_threshold_frac = 0.6;  // stop descent at this fraction of rated SNR
  int max_iters = 80;               // per-phase iteration cap
  double spiral_step = 5e-4;        // terminal search grid pitch (m)
  double coarse_dia_factor = 1.5;   // spot clearly out of focus above this
  double coarse_step = 2e-3;        // m
  double fine_step = 2.5e-4;        // m
  double collision_margin = 1.5e-3; // never command focus below terrain - margin
  double max_joint_step = 0.15;     // per-joint rate limit (rad per settled step)
  double reference_offset = 6e-3;   // sideways hop for the sand reference (m)
  double energy_floor = 0.10;       // minimum accepted band contrast
  double energy_factor = 6.0;       // ... or this multiple of the sand level
  int max_spiral_probes = 25;
};

enum class ServoPhase { XY, DESCEND, TERMINAL };
const char* to_string(ServoPhase phase);

struct ServoIterRecord {
  int iter = 0;
  ServoPhase phase = ServoPhase::XY;
  double ex_px = 0.0;
  double ey_px = 0.0;
  double d0 = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double z_mm = 0.0;  // focus height over terrain
  double snr = 0.0;
  bool valid = false;
};

struct ServoTrace {
  std::vector<ServoIterRecord> rows;

  void add(const ServoIterRecord& row) { rows.push_back(row); }
  static void write_csv_header(std::ostream& out);
  void write_csv_rows(std::ostream& out) const;
};

// Calibration constants handed to the controller: everything it is allowed to
// know. True flex and noise live only in the simulator.
struct ServoSetup {
  CameraIntrinsics intrinsics;
  ScaleCalibration scale;
  SegmentationParams segmentation;
  PixelCoord focus_pixel;        // taught pixel of the lens focus point
  double focused_spot_dia_px = 17.6;
  double snr_rated = 15000.0;
  double dark_level = 4000.0;    // sensor floor from commissioning

  static ServoSetup standard(const CameraIntrinsics& intr, const Mounting& mount,
                             const NirGeometry& nir, double nominal_zc);
};

class TargetLostError : public std::runtime_error {
 public:
  explicit TargetLostError(const std::string& what) : std::runtime_error(what) {}
};

class CollisionRiskError : public std::runtime_error {
 public:
  explicit CollisionRiskError(const std::string& what) : std::runtime_error(what) {}
};

struct DescendFeedback {
  double snr_estimate = 0.0;
};

enum class TrackStatus { converged, lost, iteration_cap };
enum class DescendStatus { snr_reached, iteration_cap };

struct ReferenceContext {
  ReferencePair pair;
  double sand_energy = 0.0;  // band contrast of a sand self-measurement
};

struct TerminalResult {
  bool success = false;
  EffectorState state;
  AbsorbanceResult absorbance;
  int probes = 0;
  double energy = 0.0;
};

// Closed-loop positioning for one episode: XY visual servoing on the taught
// focus pixel, SNR-driven descent, then the occlusion-tolerant terminal
// search driven by measurement validity.
class ServoController {
 public:
  ServoController(SceneSim& sim, ServoSetup setup, ServoParams params,
                  const TrainedClassifier* classifier = nullptr);

  void begin_episode(std::uint64_t episode_seed, const PixelCoord& target_pixel);

  // One XY correction from the current detections (delta z = 0); throws
  // TargetLostError when no detection sits inside the gate.
  JointDeltas servo_xy_step(const EffectorState& state,
                            const std::vector<Detection>& detections);

  // One height step from the spot diameter and SNR feedback; zero deltas once
  // the SNR threshold is met.
  JointDeltas descend_step(const EffectorState& state,
                           const std::optional<Detection>& spot,
                           const DescendFeedback& feedback) const;

  double estimate_snr(const EffectorState& state);

  TrackStatus track(EffectorState& state, ServoTrace& trace);
  DescendStatus descend(EffectorState& state, ServoTrace& trace);

  // Hops sideways onto clean sand, trims height, measures the reference pair
  // and the sand baseline energy, and returns to the sampling pose.
  ReferenceContext reference_sequence(EffectorState& state, ServoTrace& trace);

  TerminalResult terminal_refine(EffectorState& state, const ReferenceContext& ref,
                                 ServoTrace& trace);

  const PixelCoord& last_error_px() const { return last_error_px_; }
  const ServoParams& params() const { return params_; }
  const ServoSetup& setup() const { return setup_; }

 private:
  std::uint64_t next_seed() { return split_seed(episode_seed_, acq_counter_++); }
  EffectorState move_focus(EffectorState state, double dx, double dy, double dz,
                           ServoTrace* trace, ServoPhase phase, int iter);
  // SNR-driven height correction; returns the next trace iteration index.
  int trim_height(EffectorState& state, ServoTrace& trace, int max_steps, int iter_base);

  double* trim_z_acc_ = nullptr;
  SceneSim& sim_;
  ServoSetup setup_;
  ServoParams params_;
  const TrainedClassifier* classifier_;
  PixelCoord target_pixel_{};
  PixelCoord last_error_px_{};
  std::uint64_t episode_seed_ = 0;
  std::uint64_t acq_counter_ = 0;
};

}  // namespace mps
