#include "mpsurvey/mission.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <deque>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "mpsurvey/seeding.hpp"

namespace mps {

namespace {

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

}  // namespace

std::string MissionLog::serialize() const {
  std::ostringstream out;
  out << "# mpsurvey-mission-log v1\n";
  out << "# seed=" << seed << '\n';
  out << "# config=" << config_json << '\n';
  out << "tick,state,event,detail\n";
  for (const auto& r : rows) {
    out << r.tick << ',' << to_string(r.state) << ',' << r.event << ',' << r.detail << '\n';
  }
  return out.str();
}

MissionLog MissionLog::parse(const std::string& text) {
  MissionLog log;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# seed=", 0) == 0) {
      log.seed = std::stoull(line.substr(7));
    } else if (line.rfind("# config=", 0) == 0) {
      log.config_json = line.substr(9);
    } else if (line.rfind("#", 0) == 0 || line.rfind("tick,", 0) == 0 || line.empty()) {
      continue;
    }
    // row parsing is not needed for replay comparison
  }
  if (log.config_json.empty()) {
    throw std::runtime_error("mission log missing config header");
  }
  return log;
}

TrainedClassifier mission_classifier(const MissionConfig& config) {
  if (!config.model_path.empty()) {
    return TrainedClassifier::load(config.model_path);
  }
  DatasetParams params;
  params.grid = WavelengthGrid::standard();
  params.counts_scale = config.nir.counts_scale;
  params.dark_floor = config.nir.dark_floor;
  params.seed = config.model_train_seed;
  const Dataset ds = make_dataset(SpectralLibrary::builtin(), params);
  return train(ds.train, SvmVariant::SVM3_I, {}, config.model_train_seed);
}

JointConfig aim_focus_nominal(const ArmGeometry& geom, const Mounting& mount,
                              const JointConfig& q0, const CartesianPoint& target) {
  JointConfig q = q0;
  for (int iter = 0; iter < 12; ++iter) {
    const CartesianPoint arm = forward_cartesian(geom, q);
    const CartesianPoint focus{arm.x, arm.y, mount.base_height + arm.z - mount.tool_offset};
    const CartesianPoint err{target.x - focus.x, target.y - focus.y, target.z - focus.z};
    if (std::abs(err.x) < 1e-10 && std::abs(err.y) < 1e-10 && std::abs(err.z) < 1e-10) break;
    const JointDeltas jd = solve_increment(geom, q, err, 1.0);
    q.gamma0 = std::clamp(q.gamma0 + jd.d0, geom.limits.lo[0], geom.limits.hi[0]);
    q.gamma1 = std::clamp(q.gamma1 + jd.d1, geom.limits.lo[1], geom.limits.hi[1]);
    q.gamma2 = std::clamp(q.gamma2 + jd.d2, geom.limits.lo[2], geom.limits.hi[2]);
  }
  return q;
}

namespace {

struct Attempt {
  double x = 0.0;
  double y = 0.0;
};

double nominal_scan_zc(const MissionConfig& config) {
  const CartesianPoint arm = forward_cartesian(config.arm, config.scan.pose);
  return config.mounting.base_height + arm.z + config.mounting.cam_offset_up;
}

}  // namespace

MissionResult run_mission(const MissionConfig& config, std::uint64_t seed) {
  config.validate();
  Scene scene = Scene::scatter(seed, config.scene.bounds, config.scene.particles,
                               config.scene.max_slope_deg);
  scene.validate();
  SceneSim sim(scene, config.arm, config.mounting, config.nir, config.actuation);
  const TrainedClassifier model = mission_classifier(config);
  const double zc = nominal_scan_zc(config);
  const ServoSetup setup =
      ServoSetup::standard(config.camera, config.mounting, config.nir, zc);
  ServoController ctl(sim, setup, config.servo, &model);

  MissionResult res;
  res.log.seed = seed;
  res.log.config_json = config.to_json();

  MissionState st = MissionState::NAVIGATE;
  auto emit = [&](MissionEvent e, const std::string& detail = std::string()) {
    res.log.rows.push_back({sim.ticks(), st, to_string(e), detail});
    st = next_state(st, e);
  };

  const double reach = std::hypot(forward_cartesian(config.arm, config.scan.pose).x,
                                  forward_cartesian(config.arm, config.scan.pose).y);
  const double lane_y = 0.5 * (config.scene.bounds.y0 + config.scene.bounds.y1);
  const double wp_first = config.scene.bounds.x0 - reach + 0.05;
  const double wp_last = config.scene.bounds.x1 - reach + 0.09;

  std::vector<Attempt> attempts;
  std::vector<int> particle_found(scene.particles.size(), 0);
  std::vector<std::string> particle_pred(scene.particles.size());
  MissionSummary& summary = res.summary;
  summary.scene_particles = static_cast<int>(scene.particles.size());

  EffectorState state;
  std::uint64_t episode = 0;
  std::deque<int> detection_history;
  double rover_x = wp_first - config.scan.stride;
  double wp = wp_first;
  bool aborted = false;

  auto goto_scan_pose = [&](double theta, bool lamp) {
    JointConfig target = config.scan.pose;
    target.gamma0 = theta;
    const JointDeltas jd{target.gamma0 - state.q.gamma0, target.gamma1 - state.q.gamma1,
                         target.gamma2 - state.q.gamma2};
    state = sim.step_arm(state, jd);
    state.lamp_on = lamp;
    sim.settle(state);
  };

  sim.set_rover_pose({rover_x, lane_y, 0.0});
  state = sim.make_state(config.scan.pose, false);

  while (wp <= wp_last && !aborted) {
    const double dist = std::abs(wp - rover_x);
    sim.advance_ticks(static_cast<std::uint64_t>(dist / config.rover_speed * 10.0));
    summary.path_length_m += dist;
    rover_x = wp;
    sim.set_rover_pose({rover_x, lane_y, 0.0});
    ++summary.waypoints;
    emit(MissionEvent::waypoint_reached, fmt("x=%.4f;y=%.4f", rover_x, lane_y));

    int found_this_wp = 0;
    for (double theta : config.scan.thetas) {
      goto_scan_pose(theta, false);
      for (;;) {
        const SceneImage img = sim.render(state, setup.intrinsics, Illumination::LED);
        const auto detections = detect_candidates(img, setup.segmentation);
        const CameraView view = sim.camera_view(state.q);
        const Detection* chosen = nullptr;
        CartesianPoint est;
        const double reach_max = 0.93 * (config.arm.r1 + config.arm.r2);
        for (const auto& d : detections) {
          const CartesianPoint g = view.pixel_to_ground(setup.intrinsics, d.centroid,
                                                        view.position.z - setup.scale.nominal_zc);
          bool seen = false;
          for (const auto& a : attempts) {
            if (std::hypot(g.x - a.x, g.y - a.y) < 8e-3) seen = true;
          }
          // Leave unreachable edge detections for a closer waypoint.
          const double radial = std::hypot(g.x - rover_x, g.y - lane_y);
          if (!seen && radial < reach_max && radial > 0.06) {
            chosen = &d;
            est = g;
            break;
          }
        }
        if (!chosen) break;

        attempts.push_back({est.x, est.y});
        ++found_this_wp;
        emit(MissionEvent::candidate_found,
             fmt("u=%.1f;v=%.1f;est_x=%.4f;est_y=%.4f", chosen->centroid.u,
                 chosen->centroid.v, est.x, est.y));

        // Planner setpoint: aim the arm at the estimate, then servo visually.
        const CartesianPoint aim{est.x - rover_x, est.y - lane_y, est.z + 0.022};
        const JointConfig q_aim =
            aim_focus_nominal(config.arm, config.mounting, state.q, aim);
        state = sim.step_arm(state, {q_aim.gamma0 - state.q.gamma0,
                                     q_aim.gamma1 - state.q.gamma1,
                                     q_aim.gamma2 - state.q.gamma2});
        sim.settle(state);
        const PixelCoord start_px =
            sim.camera_view(state.q).project_world(setup.intrinsics, {est.x, est.y, est.z});
        ctl.begin_episode(split_seed(seed, 0x120000 + episode++), start_px);

        const TrackStatus ts = ctl.track(state, res.trace);
        if (ts != TrackStatus::converged) {
          emit(MissionEvent::target_lost);
          goto_scan_pose(theta, false);
          continue;
        }
        emit(MissionEvent::xy_converged,
             fmt("ex_px=%.2f;ey_px=%.2f", ctl.last_error_px().u, ctl.last_error_px().v));

        DescendStatus ds;
        try {
          ds = ctl.descend(state, res.trace);
        } catch (const CollisionRiskError& e) {
          emit(MissionEvent::abort, std::string("collision_risk;") + e.what());
          aborted = true;
          break;
        }
        if (ds != DescendStatus::snr_reached) {
          emit(MissionEvent::abort, "descend_iteration_cap");
          aborted = true;
          break;
        }
        emit(MissionEvent::snr_reached, fmt("z_mm=%.3f", sim.defocus(state) * 1e3));

        ReferenceContext ref;
        try {
          ref = ctl.reference_sequence(state, res.trace);
        } catch (const ReferenceContaminatedError& e) {
          emit(MissionEvent::abort, std::string("reference_unavailable;") + e.what());
          aborted = true;
          break;
        }
        emit(MissionEvent::reference_clean, fmt("sand_energy=%.5f", ref.sand_energy));

        const TerminalResult tr = ctl.terminal_refine(state, ref, res.trace);
        if (tr.success) {
          emit(MissionEvent::valid_spectrum,
               fmt("probes=%d;energy=%.4f", tr.probes, tr.energy));
          const Prediction pred = model.predict(tr.absorbance.spectrum);
          const CartesianPoint mp = sim.measurement_point(tr.state);
          int hit = -1;
          double best = 3e-3;
          for (std::size_t i = 0; i < scene.particles.size(); ++i) {
            const double d2 = std::hypot(mp.x - scene.particles[i].x,
                                         mp.y - scene.particles[i].y);
            if (d2 < best) {
              best = d2;
              hit = static_cast<int>(i);
            }
          }
          std::string truth = "none";
          if (hit >= 0) {
            truth = scene.particles[static_cast<std::size_t>(hit)].material;
            if (!particle_found[static_cast<std::size_t>(hit)]) {
              particle_found[static_cast<std::size_t>(hit)] = 1;
              particle_pred[static_cast<std::size_t>(hit)] = pred.label;
            }
          }
          ++summary.per_class_counts[pred.label];
          emit(MissionEvent::logged, fmt("material=%s;margin=%.4f;truth=%s",
                                         pred.label.c_str(), pred.margin, truth.c_str()));
        } else {
          ++summary.failed_samples;
          emit(MissionEvent::spiral_exhausted, fmt("probes=%d", tr.probes));
          emit(MissionEvent::logged, "no_sample");
        }
        goto_scan_pose(theta, false);
      }
      if (aborted) break;
    }
    if (aborted) break;

    detection_history.push_back(found_this_wp);
    if (static_cast<int>(detection_history.size()) > config.scan.adaptive_window) {
      detection_history.pop_front();
    }
    double stride = config.scan.stride;
    if (static_cast<int>(detection_history.size()) >= config.scan.adaptive_window) {
      double mean = 0.0;
      for (int v : detection_history) mean += v;
      mean /= static_cast<double>(detection_history.size());
      double var = 0.0;
      for (int v : detection_history) var += (v - mean) * (v - mean);
      var /= static_cast<double>(detection_history.size());
      // Denser sampling where detection counts are volatile.
      if (var > config.scan.adaptive_variance_threshold) stride *= 0.5;
    }
    emit(MissionEvent::no_candidates, fmt("wp_detections=%d", found_this_wp));
    wp += stride;
  }

  if (!aborted) {
    emit(MissionEvent::mission_complete);
  }

  for (std::size_t i = 0; i < scene.particles.size(); ++i) {
    const auto& p = scene.particles[i];
    const bool in_swath = std::abs(p.y - lane_y) <= config.swath * 0.5 &&
                          p.x >= config.scene.bounds.x0 && p.x <= config.scene.bounds.x1;
    if (particle_found[i]) {
      ++summary.found;
      ++summary.classified_total;
      if (particle_pred[i] == p.material) ++summary.classified_correct;
    } else if (in_swath) {
      ++summary.missed;
    } else {
      ++summary.out_of_swath;
    }
  }
  summary.classification_accuracy =
      summary.classified_total > 0
          ? static_cast<double>(summary.classified_correct) / summary.classified_total
          : 0.0;
  summary.area_covered_m2 = summary.path_length_m * config.swath;
  return res;
}

std::vector<SweepTrial> run_sweep(const MissionConfig& config, int n_trials,
                                  std::uint64_t base_seed, double max_offset) {
  config.validate();
  const TrainedClassifier model = mission_classifier(config);
  const double zc = nominal_scan_zc(config);
  const ServoSetup setup =
      ServoSetup::standard(config.camera, config.mounting, config.nir, zc);
  static const char* materials[4] = {"PP", "PET", "HDPE", "PS"};
  static const double hues[3] = {220.0, 352.0, 120.0};

  auto run_trial = [&](int t) -> SweepTrial {
    SweepTrial trial;
    trial.trial = t;
    trial.seed = split_seed(base_seed, static_cast<std::uint64_t>(t));
    trial.material = materials[t % 4];

    Scene sc;
    sc.seed = trial.seed;
    sc.bounds = {-0.1, -0.1, 0.45, 0.1};
    sc.terrain = Terrain::generate(trial.seed, config.scene.max_slope_deg);
    Particle p;
    p.x = 0.17;
    p.y = 0.0;
    p.size_mm = 3.0;
    p.color.h = static_cast<float>(hues[t % 3]);
    p.color.s = 0.85f;
    p.color.v = 0.70f;
    p.material = trial.material;
    sc.particles.push_back(p);

    SceneSim sim(sc, config.arm, config.mounting, config.nir, config.actuation);
    sim.set_rover_pose({0.0, 0.0, 0.0});
    ServoController ctl(sim, setup, config.servo, &model);

    auto rng = make_rng(trial.seed, 0x0ff);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double r = max_offset * u01(rng);
    const double ang = 2.0 * 3.14159265358979323846 * u01(rng);
    const double ground = sim.terrain_height(p.x, p.y);
    const CartesianPoint aim{p.x + r * std::cos(ang), p.y + r * std::sin(ang),
                             ground + 0.022};
    const JointConfig q0 =
        aim_focus_nominal(config.arm, config.mounting, config.scan.pose, aim);
    EffectorState state = sim.make_state(q0, false);

    ServoTrace trace;
    const SceneImage img = sim.render(state, setup.intrinsics, Illumination::LED);
    const auto detections = detect_candidates(img, setup.segmentation);
    if (detections.empty()) {
      trial.valid = false;
      return trial;
    }
    ctl.begin_episode(trial.seed, detections.front().centroid);
    if (ctl.track(state, trace) != TrackStatus::converged) {
      trial.valid = false;
      return trial;
    }
    try {
      if (ctl.descend(state, trace) != DescendStatus::snr_reached) {
        trial.valid = false;
        return trial;
      }
      const ReferenceContext ref = ctl.reference_sequence(state, trace);
      const CartesianPoint before = sim.measurement_point(state);
      trial.before_mm = std::hypot(before.x - p.x, before.y - p.y) * 1e3;
      const TerminalResult tr = ctl.terminal_refine(state, ref, trace);
      trial.probes = tr.probes;
      trial.valid = tr.success;
      const CartesianPoint after = sim.measurement_point(tr.state);
      trial.after_mm = std::hypot(after.x - p.x, after.y - p.y) * 1e3;
    } catch (const std::exception&) {
      trial.valid = false;
    }
    return trial;
  };

  std::vector<SweepTrial> out(static_cast<std::size_t>(n_trials));
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int t = next.fetch_add(1);
      if (t >= n_trials) return;
      out[static_cast<std::size_t>(t)] = run_trial(t);
    }
  };
  if (workers <= 1 || n_trials <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < std::min<unsigned>(workers, static_cast<unsigned>(n_trials)); ++i) {
      pool.emplace_back(worker);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

void write_sweep_csv(const std::vector<SweepTrial>& trials, std::ostream& out) {
  out << "trial,seed,material,before_mm,after_mm,probes,valid\n";
  for (const auto& t : trials) {
    out << fmt("%d,%llu,%s,%.4f,%.4f,%d,%d\n", t.trial,
               static_cast<unsigned long long>(t.seed), t.material.c_str(), t.before_mm,
               t.after_mm, t.probes, t.valid ? 1 : 0);
  }
}

std::vector<SensitivityPoint> run_sensitivity(const MissionConfig& config,
                                              const std::vector<double>& offsets_mm,
                                              std::uint64_t seed) {
  MissionConfig bench = config;
  bench.actuation.sigma_act = 0.0;
  bench.actuation.flex_bias = 0.0;

  Scene sc;
  sc.seed = seed;
  sc.bounds = {-0.1, -0.1, 0.45, 0.1};
  sc.terrain = Terrain::flat();
  Particle p;
  p.x = 0.17;
  p.y = 0.0;
  p.size_mm = 3.0;
  p.color.h = 220.0f;
  p.color.s = 0.85f;
  p.color.v = 0.70f;
  p.material = "PP";
  sc.particles.push_back(p);

  SceneSim sim(sc, bench.arm, bench.mounting, bench.nir, bench.actuation);
  sim.set_rover_pose({0.0, 0.0, 0.0});

  // Reference pair from clean sand beside the target, in focus.
  const CartesianPoint ref_aim{p.x + 0.012, p.y, 1e-4};
  const JointConfig q_ref =
      aim_focus_nominal(bench.arm, bench.mounting, bench.scan.pose, ref_aim);
  EffectorState ref_state = sim.make_state(q_ref, true);
  const ReferencePair ref = sim.acquire_reference(ref_state, split_seed(seed, 1));

  std::vector<SensitivityPoint> out;
  for (std::size_t k = 0; k < offsets_mm.size(); ++k) {
    const double dz = offsets_mm[k] * 1e-3;
    const JointConfig q =
        aim_focus_nominal(bench.arm, bench.mounting, bench.scan.pose, {p.x, p.y, dz});
    EffectorState state = sim.make_state(q, true);
    const NirSample sample = sim.sample_nir(state, split_seed(seed, 100 + k));
    const AbsorbanceResult abs = absorbance(sample.raw, ref.dark, ref.reference);
    SensitivityPoint pt;
    pt.z_offset_mm = offsets_mm[k];
    pt.valid = abs.valid;
    pt.masked_fraction = abs.masked_fraction();
    pt.band_contrast = band_contrast(abs.spectrum);
    pt.absorbance = abs.spectrum;
    out.push_back(std::move(pt));
  }
  return out;
}

void write_sensitivity_csv(const std::vector<SensitivityPoint>& points, std::ostream& out) {
  out << "z_offset_mm,valid,masked_fraction,band_contrast\n";
  for (const auto& p : points) {
    out << fmt("%.3f,%d,%.4f,%.5f\n", p.z_offset_mm, p.valid ? 1 : 0, p.masked_fraction,
               p.band_contrast);
  }
}

void write_sensitivity_curves_csv(const std::vector<SensitivityPoint>& points,
                                  std::ostream& out) {
  out << "z_offset_mm,wavelength_nm,absorbance\n";
  for (const auto& p : points) {
    const auto& pts = p.absorbance.grid->points();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      out << fmt("%.3f,%.3f,%.6g\n", p.z_offset_mm, pts[i], p.absorbance.intensities[i]);
    }
  }
}

}  // namespace mps
