#include "mpsurvey/servo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace mps {

namespace {
constexpr double kPi = 3.14159265358979323846;

struct SpiralOffset {
  int x = 0;
  int y = 0;
};

// Expanding square spiral starting at the current pose: covers the +/-1 mm
// error disc within the first ring at the default 0.5 mm pitch.
std::vector<SpiralOffset> spiral_offsets(int count) {
  std::vector<SpiralOffset> out;
  out.push_back({0, 0});
  int x = 0;
  int y = 0;
  int leg = 1;
  int dir = 0;  // +x, +y, -x, -y
  static const int dx[4] = {1, 0, -1, 0};
  static const int dy[4] = {0, 1, 0, -1};
  while (static_cast<int>(out.size()) < count) {
    for (int repeat = 0; repeat < 2 && static_cast<int>(out.size()) < count; ++repeat) {
      for (int s = 0; s < leg && static_cast<int>(out.size()) < count; ++s) {
        x += dx[dir];
        y += dy[dir];
        out.push_back({x, y});
      }
      dir = (dir + 1) % 4;
    }
    ++leg;
  }
  return out;
}

}  // namespace

const char* to_string(ServoPhase phase) {
  switch (phase) {
    case ServoPhase::XY: return "XY";
    case ServoPhase::DESCEND: return "DESCEND";
    case ServoPhase::TERMINAL: return "TERMINAL";
  }
  return "XY";
}

void ServoTrace::write_csv_header(std::ostream& out) {
  out << "iter,phase,ex_px,ey_px,dg0,dg1,dg2,z_mm,snr,valid\n";
}

void ServoTrace::write_csv_rows(std::ostream& out) const {
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.4f,%.4f,%.7g,%.7g,%.7g,%.4f,%.2f,%d\n",
                  r.iter, to_string(r.phase), r.ex_px, r.ey_px, r.d0, r.d1, r.d2,
                  r.z_mm, r.snr, r.valid ? 1 : 0);
    out << buf;
  }
}

ServoSetup ServoSetup::standard(const CameraIntrinsics& intr, const Mounting& mount,
                                const NirGeometry& nir, double nominal_zc) {
  ServoSetup s;
  s.intrinsics = intr;
  s.scale.meters_per_pixel = nominal_zc / intr.omega;
  s.scale.nominal_zc = nominal_zc;
  s.scale.hand_eye_yaw = 0.0;
  s.focus_pixel = {intr.u0 - intr.omega * mount.cam_offset_radial / nominal_zc, intr.v0};
  s.focused_spot_dia_px = 2.0 * nir.spot_radius_focused * intr.omega /
                          (mount.cam_offset_up + mount.tool_offset);
  s.snr_rated = nir.snr_max;
  s.dark_level = nir.dark_floor;
  const double one_mm_radius_px = 0.5e-3 / s.scale.meters_per_pixel;
  s.segmentation.min_area_px = kPi * one_mm_radius_px * one_mm_radius_px;
  return s;
}

ServoController::ServoController(SceneSim& sim, ServoSetup setup, ServoParams params,
                                 const TrainedClassifier* classifier)
    : sim_(sim), setup_(std::move(setup)), params_(params), classifier_(classifier) {}

void ServoController::begin_episode(std::uint64_t episode_seed,
                                    const PixelCoord& target_pixel) {
  episode_seed_ = episode_seed;
  acq_counter_ = 0;
  target_pixel_ = target_pixel;
  last_error_px_ = {0.0, 0.0};
}

JointDeltas ServoController::servo_xy_step(const EffectorState& state,
                                           const std::vector<Detection>& detections) {
  const Detection* target = nullptr;
  double best = 80.0;  // gate radius (px)
  for (const auto& d : detections) {
    const double du = d.centroid.u - target_pixel_.u;
    const double dv = d.centroid.v - target_pixel_.v;
    const double dist = std::hypot(du, dv);
    if (dist < best) {
      best = dist;
      target = &d;
    }
  }
  if (!target) {
    throw TargetLostError("no candidate detection inside the tracking gate");
  }
  target_pixel_ = target->centroid;
  last_error_px_ = {target->centroid.u - setup_.focus_pixel.u,
                    target->centroid.v - setup_.focus_pixel.v};

  ScaleCalibration cal = setup_.scale;
  cal.hand_eye_yaw += state.q.gamma0;  // image axes rotate with the first joint
  const PlanarDisplacement disp = pixel_to_displacement(cal, last_error_px_);
  JointDeltas jd = solve_increment(sim_.geometry(), state.q, {disp.dx, disp.dy, 0.0},
                                   params_.lambda);
  // Joint rate limit, as the vendor arm controller enforces.
  const double biggest = std::max({std::abs(jd.d0), std::abs(jd.d1), std::abs(jd.d2)});
  if (biggest > params_.max_joint_step) {
    const double scale = params_.max_joint_step / biggest;
    jd.d0 *= scale;
    jd.d1 *= scale;
    jd.d2 *= scale;
  }
  return jd;
}

JointDeltas ServoController::descend_step(const EffectorState& state,
                                          const std::optional<Detection>& spot,
                                          const DescendFeedback& feedback) const {
  if (feedback.snr_estimate >= params_.snr_threshold_frac * setup_.snr_rated) {
    return {};
  }
  // A vanished spot near the ground means the target occludes it; creep.
  const double dia_px = spot ? spot->spot_diameter : 0.0;
  const double step = dia_px > params_.coarse_dia_factor * setup_.focused_spot_dia_px
                          ? params_.coarse_step
                          : params_.fine_step;
  if (sim_.defocus(state) - step < -params_.collision_margin) {
    throw CollisionRiskError("descent would pass the terrain collision margin");
  }
  return solve_increment(sim_.geometry(), state.q, {0.0, 0.0, -step}, 1.0);
}

double ServoController::estimate_snr(const EffectorState& state) {
  const Spectrum s1 = sim_.sample_nir(state, next_seed()).raw;
  const Spectrum s2 = sim_.sample_nir(state, next_seed()).raw;
  double sq = 0.0;
  for (std::size_t i = 0; i < s1.intensities.size(); ++i) {
    const double d = s1.intensities[i] - s2.intensities[i];
    sq += d * d;
  }
  const double sigma =
      std::sqrt(sq / (2.0 * static_cast<double>(s1.intensities.size())));
  const double signal = std::max(0.0, s1.mean() - setup_.dark_level);
  return signal / std::max(sigma, 1e-9);
}

TrackStatus ServoController::track(EffectorState& state, ServoTrace& trace) {
  for (int iter = 0; iter < params_.max_iters; ++iter) {
    sim_.settle(state);
    const SceneImage img = sim_.render(state, setup_.intrinsics, Illumination::LED);
    const auto detections = detect_candidates(img, setup_.segmentation);
    JointDeltas jd;
    try {
      jd = servo_xy_step(state, detections);
    } catch (const TargetLostError&) {
      return TrackStatus::lost;
    }
    ServoIterRecord row;
    row.iter = iter;
    row.phase = ServoPhase::XY;
    row.ex_px = last_error_px_.u;
    row.ey_px = last_error_px_.v;
    row.d0 = jd.d0;
    row.d1 = jd.d1;
    row.d2 = jd.d2;
    row.z_mm = sim_.defocus(state) * 1e3;
    trace.add(row);

    const double err_m =
        std::hypot(last_error_px_.u, last_error_px_.v) * setup_.scale.meters_per_pixel;
    if (err_m <= params_.track_tol) return TrackStatus::converged;
    state = sim_.step_arm(state, jd);
  }
  return TrackStatus::iteration_cap;
}

DescendStatus ServoController::descend(EffectorState& state, ServoTrace& trace) {
  state.lamp_on = true;
  for (int iter = 0; iter < params_.max_iters; ++iter) {
    sim_.settle(state);
    const SceneImage img = sim_.render(state, setup_.intrinsics, Illumination::NIR_lamp);
    const auto spot = detect_nir_spot(img, setup_.segmentation);
    const DescendFeedback fb{estimate_snr(state)};
    const JointDeltas jd = descend_step(state, spot, fb);

    ServoIterRecord row;
    row.iter = iter;
    row.phase = ServoPhase::DESCEND;
    row.d0 = jd.d0;
    row.d1 = jd.d1;
    row.d2 = jd.d2;
    row.z_mm = sim_.defocus(state) * 1e3;
    row.snr = fb.snr_estimate;
    trace.add(row);

    if (jd.d0 == 0.0 && jd.d1 == 0.0 && jd.d2 == 0.0) return DescendStatus::snr_reached;
    state = sim_.step_arm(state, jd);
  }
  return DescendStatus::iteration_cap;
}

EffectorState ServoController::move_focus(EffectorState state, double dx, double dy,
                                          double dz, ServoTrace* trace, ServoPhase phase,
                                          int iter) {
  const JointDeltas jd =
      solve_increment(sim_.geometry(), state.q, {dx, dy, dz}, 1.0);
  state = sim_.step_arm(state, jd);
  sim_.settle(state);
  if (trace) {
    ServoIterRecord row;
    row.iter = iter;
    row.phase = phase;
    row.d0 = jd.d0;
    row.d1 = jd.d1;
    row.d2 = jd.d2;
    row.z_mm = sim_.defocus(state) * 1e3;
    trace->add(row);
  }
  return state;
}

int ServoController::trim_height(EffectorState& state, ServoTrace& trace, int max_steps,
                                 int iter_base) {
  double* z_acc = trim_z_acc_;
  int iter = iter_base;
  for (int trim = 0; trim < max_steps; ++trim) {
    const SceneImage img = sim_.render(state, setup_.intrinsics, Illumination::NIR_lamp);
    const auto spot = detect_nir_spot(img, setup_.segmentation);
    const DescendFeedback fb{estimate_snr(state)};
    JointDeltas jd;
    try {
      jd = descend_step(state, spot, fb);
    } catch (const CollisionRiskError&) {
      break;
    }
    if (jd.d0 == 0.0 && jd.d1 == 0.0 && jd.d2 == 0.0) break;
    // Commanded z change from the controller's own linear model.
    const Eigen::Vector3d planned =
        image_jacobian(sim_.geometry(), state.q) * Eigen::Vector3d(jd.d0, jd.d1, jd.d2);
    state = sim_.step_arm(state, jd);
    sim_.settle(state);
    if (z_acc) *z_acc += planned.z();
    ServoIterRecord row;
    row.iter = iter++;
    row.phase = ServoPhase::DESCEND;
    row.d0 = jd.d0;
    row.d1 = jd.d1;
    row.d2 = jd.d2;
    row.z_mm = sim_.defocus(state) * 1e3;
    row.snr = fb.snr_estimate;
    trace.add(row);
  }
  return iter;
}

ReferenceContext ServoController::reference_sequence(EffectorState& state,
                                                     ServoTrace& trace) {
  static const double dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  const double lift = 2e-3;  // hop with headroom, then trim back down by SNR
  const double c0 = std::cos(state.q.gamma0);
  const double s0 = std::sin(state.q.gamma0);

  for (const auto& dir : dirs) {
    // Offsets expressed in the arm-radial frame; two half-steps per hop keep
    // the linearization error down.
    const double ox = params_.reference_offset * (dir[0] * c0 - dir[1] * s0);
    const double oy = params_.reference_offset * (dir[0] * s0 + dir[1] * c0);
    double z_acc = lift;
    int iter = 1000;  // reference-motion rows sort after descend iterations
    state = move_focus(state, 0.5 * ox, 0.5 * oy, 0.5 * lift, &trace,
                       ServoPhase::DESCEND, iter++);
    state = move_focus(state, 0.5 * ox, 0.5 * oy, 0.5 * lift, &trace,
                       ServoPhase::DESCEND, iter++);
    trim_z_acc_ = &z_acc;
    iter = trim_height(state, trace, 12, iter);
    trim_z_acc_ = nullptr;
    try {
      ReferenceContext ctx;
      ctx.pair = sim_.acquire_reference(state, next_seed());
      const Spectrum sand_raw = sim_.sample_nir(state, next_seed()).raw;
      ctx.sand_energy =
          band_contrast(absorbance(sand_raw, ctx.pair.dark, ctx.pair.reference).spectrum);
      // Return with a little headroom, then re-approach focus from above so
      // the sampling pose sits at measurement SNR before the terminal search.
      const double back_lift = 5e-4;
      state = move_focus(state, -0.5 * ox, -0.5 * oy, -0.5 * (z_acc - back_lift), &trace,
                         ServoPhase::DESCEND, iter++);
      state = move_focus(state, -0.5 * ox, -0.5 * oy, -0.5 * (z_acc - back_lift), &trace,
                         ServoPhase::DESCEND, iter++);
      trim_height(state, trace, 8, iter);
      return ctx;
    } catch (const ReferenceContaminatedError&) {
      state = move_focus(state, -0.5 * ox, -0.5 * oy, -0.5 * z_acc, &trace,
                         ServoPhase::DESCEND, iter++);
      state = move_focus(state, -0.5 * ox, -0.5 * oy, -0.5 * z_acc, &trace,
                         ServoPhase::DESCEND, iter++);
      trim_height(state, trace, 6, iter);
    }
  }
  throw ReferenceContaminatedError("no clean sand patch around the target");
}

TerminalResult ServoController::terminal_refine(EffectorState& state,
                                                const ReferenceContext& ref,
                                                ServoTrace& trace) {
  const auto offsets = spiral_offsets(params_.max_spiral_probes);
  const double accept_energy =
      std::max(params_.energy_floor, params_.energy_factor * ref.sand_energy);
  const double c0 = std::cos(state.q.gamma0);
  const double s0 = std::sin(state.q.gamma0);

  TerminalResult result;
  SpiralOffset prev{0, 0};
  for (int k = 0; k < static_cast<int>(offsets.size()); ++k) {
    JointDeltas jd;
    if (k > 0) {
      const double rx = (offsets[static_cast<std::size_t>(k)].x - prev.x) * params_.spiral_step;
      const double ry = (offsets[static_cast<std::size_t>(k)].y - prev.y) * params_.spiral_step;
      const double dx = rx * c0 - ry * s0;
      const double dy = rx * s0 + ry * c0;
      jd = solve_increment(sim_.geometry(), state.q, {dx, dy, 0.0}, 1.0);
      state = sim_.step_arm(state, jd);
      sim_.settle(state);
    }
    prev = offsets[static_cast<std::size_t>(k)];

    const NirSample sample = sim_.sample_nir(state, next_seed());
    AbsorbanceResult abs = absorbance(sample.raw, ref.pair.dark, ref.pair.reference);
    const double energy = band_contrast(abs.spectrum);

    ServoIterRecord row;
    row.iter = k;
    row.phase = ServoPhase::TERMINAL;
    row.d0 = jd.d0;
    row.d1 = jd.d1;
    row.d2 = jd.d2;
    row.z_mm = sim_.defocus(state) * 1e3;
    row.snr = sample.snr_effective;
    row.valid = abs.valid;
    trace.add(row);

    bool accept = abs.valid && energy >= accept_energy;
    if (accept && classifier_) {
      accept = classifier_->predict(abs.spectrum).label != "sand";
    }
    result.probes = k + 1;
    if (accept) {
      result.success = true;
      result.state = state;
      result.absorbance = std::move(abs);
      result.energy = energy;
      return result;
    }
    if (k + 1 == static_cast<int>(offsets.size())) {
      result.state = state;
      result.absorbance = std::move(abs);
      result.energy = energy;
    }
  }
  result.success = false;
  return result;
}

}  // namespace mps
