#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mpsurvey/classifier.hpp"
#include "mpsurvey/scene.hpp"
#include "mpsurvey/servo.hpp"

namespace mps {

enum class MissionState { NAVIGATE, SCAN, TRACK, DESCEND, REFERENCE, SAMPLE, CLASSIFY, STOW };
enum class MissionEvent {
  waypoint_reached,
  candidate_found,
  no_candidates,
  xy_converged,
  target_lost,
  snr_reached,
  reference_clean,
  valid_spectrum,
  spiral_exhausted,
  logged,
  mission_complete,
  abort
};

const char* to_string(MissionState s);
const char* to_string(MissionEvent e);

class ProtocolError : public std::logic_error {
 public:
  ProtocolError(MissionState s, MissionEvent e)
      : std::logic_error(std::string("illegal transition: event ") + to_string(e) +
                         " in state " + to_string(s)) {}
};

struct Transition {
  MissionState from;
  MissionEvent event;
  MissionState to;
};

// The declared transition table; next_state accepts exactly these edges plus
// abort -> STOW from every state.
const std::vector<Transition>& transition_table();
MissionState next_state(MissionState current, MissionEvent event);

struct PowerEntry {
  std::string component;
  double voltage = 0.0;
  double current = 0.0;
};

struct ScanPlan {
  JointConfig pose{0.0, 1.02, 0.148};        // focus ~22 mm above ground
  std::vector<double> thetas{-0.8, 0.0, 0.8}; // sub-scan first-joint angles
  double stride = 0.135;                      // waypoint spacing (m)
  double adaptive_variance_threshold = 1.0;   // halve stride above this
  int adaptive_window = 5;
};

struct SceneSpec {
  int particles = 10;
  WorkspaceBounds bounds{0.0, -0.2, 1.0, 0.2};
  double max_slope_deg = 10.0;
};

struct MissionConfig {
  ArmGeometry arm;
  CameraIntrinsics camera;
  Mounting mounting;
  NirGeometry nir;
  ActuationModel actuation;
  ServoParams servo;
  ScanPlan scan;
  SceneSpec scene;
  double rover_speed = 0.016;   // m/s
  double battery_hours = 3.0;
  double swath = 0.405;         // m; sized so one charge covers ~70 m^2
  std::vector<PowerEntry> power_table;
  std::string model_path;       // empty: train the built-in model in-process
  std::uint64_t model_train_seed = 24105;

  static MissionConfig defaults();
  void validate() const;

  std::string to_json(int indent = -1) const;
  static MissionConfig from_json(const std::string& text);
  static MissionConfig load(const std::string& path);
  void save(const std::string& path) const;
};

struct MissionLogRow {
  std::uint64_t tick = 0;
  MissionState state = MissionState::NAVIGATE;
  std::string event;
  std::string detail;
};

struct MissionLog {
  std::uint64_t seed = 0;
  std::string config_json;  // canonical compact dump, for replay
  std::vector<MissionLogRow> rows;

  std::string serialize() const;
  static MissionLog parse(const std::string& text);
};

struct MissionSummary {
  int scene_particles = 0;
  int found = 0;
  int missed = 0;
  int out_of_swath = 0;
  int classified_total = 0;
  int classified_correct = 0;
  std::map<std::string, int> per_class_counts;
  double classification_accuracy = 0.0;
  double path_length_m = 0.0;
  double area_covered_m2 = 0.0;
  int waypoints = 0;
  int failed_samples = 0;

  std::string to_json() const;
};

struct MissionResult {
  MissionLog log;
  MissionSummary summary;
  ServoTrace trace;
};

MissionResult run_mission(const MissionConfig& config, std::uint64_t seed);

struct EnduranceReport {
  double path_m = 0.0;
  double area_m2 = 0.0;
  double duration_h = 0.0;
  std::vector<PowerEntry> power;
  double total_peak_w = 0.0;

  std::string to_json() const;
};

EnduranceReport endurance_report(const MissionConfig& config);

// ---- evaluation harnesses ----

struct SweepTrial {
  int trial = 0;
  std::uint64_t seed = 0;
  std::string material;
  double before_mm = 0.0;  // xy error after descent + reference, pre-terminal
  double after_mm = 0.0;   // xy error at the accepted measurement pose
  int probes = 0;
  bool valid = false;
};

// Seeded single-particle positioning trials with random initial aim offsets
// up to max_offset; emits the before/after-terminal error pairs.
std::vector<SweepTrial> run_sweep(const MissionConfig& config, int n_trials,
                                  std::uint64_t base_seed, double max_offset = 0.03);
void write_sweep_csv(const std::vector<SweepTrial>& trials, std::ostream& out);

struct SensitivityPoint {
  double z_offset_mm = 0.0;
  bool valid = false;
  double masked_fraction = 0.0;
  double band_contrast = 0.0;
  Spectrum absorbance;
};

// Bench-style characterization: noiseless actuation, flat terrain, a 3 mm
// polymer target; the lens is raised by each z offset and the absorbance
// validity and band contrast recorded.
std::vector<SensitivityPoint> run_sensitivity(const MissionConfig& config,
                                              const std::vector<double>& offsets_mm,
                                              std::uint64_t seed);
void write_sensitivity_csv(const std::vector<SensitivityPoint>& points, std::ostream& out);
void write_sensitivity_curves_csv(const std::vector<SensitivityPoint>& points,
                                  std::ostream& out);

// Shared by the mission and the harnesses: a trained model for the built-in
// library (loaded from config.model_path when set).
TrainedClassifier mission_classifier(const MissionConfig& config);

// Damped-Newton aim on the nominal kinematics: joints that place the lens
// focus point at a rover-frame target.
JointConfig aim_focus_nominal(const ArmGeometry& geom, const Mounting& mount,
                              const JointConfig& q0, const CartesianPoint& target);

}  // namespace mps
