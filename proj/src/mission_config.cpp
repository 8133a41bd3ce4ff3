#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mpsurvey/mission.hpp"

namespace mps {

const char* to_string(MissionState s) {
  switch (s) {
    case MissionState::NAVIGATE: return "NAVIGATE";
    case MissionState::SCAN: return "SCAN";
    case MissionState::TRACK: return "TRACK";
    case MissionState::DESCEND: return "DESCEND";
    case MissionState::REFERENCE: return "REFERENCE";
    case MissionState::SAMPLE: return "SAMPLE";
    case MissionState::CLASSIFY: return "CLASSIFY";
    case MissionState::STOW: return "STOW";
  }
  return "STOW";
}

const char* to_string(MissionEvent e) {
  switch (e) {
    case MissionEvent::waypoint_reached: return "waypoint_reached";
    case MissionEvent::candidate_found: return "candidate_found";
    case MissionEvent::no_candidates: return "no_candidates";
    case MissionEvent::xy_converged: return "xy_converged";
    case MissionEvent::target_lost: return "target_lost";
    case MissionEvent::snr_reached: return "snr_reached";
    case MissionEvent::reference_clean: return "reference_clean";
    case MissionEvent::valid_spectrum: return "valid_spectrum";
    case MissionEvent::spiral_exhausted: return "spiral_exhausted";
    case MissionEvent::logged: return "logged";
    case MissionEvent::mission_complete: return "mission_complete";
    case MissionEvent::abort: return "abort";
  }
  return "abort";
}

const std::vector<Transition>& transition_table() {
  static const std::vector<Transition> table = {
      {MissionState::NAVIGATE, MissionEvent::waypoint_reached, MissionState::SCAN},
      {MissionState::NAVIGATE, MissionEvent::mission_complete, MissionState::STOW},
      {MissionState::SCAN, MissionEvent::candidate_found, MissionState::TRACK},
      {MissionState::SCAN, MissionEvent::no_candidates, MissionState::NAVIGATE},
      {MissionState::TRACK, MissionEvent::xy_converged, MissionState::DESCEND},
      {MissionState::TRACK, MissionEvent::target_lost, MissionState::SCAN},
      {MissionState::DESCEND, MissionEvent::snr_reached, MissionState::REFERENCE},
      {MissionState::REFERENCE, MissionEvent::reference_clean, MissionState::SAMPLE},
      {MissionState::SAMPLE, MissionEvent::valid_spectrum, MissionState::CLASSIFY},
      {MissionState::SAMPLE, MissionEvent::spiral_exhausted, MissionState::CLASSIFY},
      {MissionState::CLASSIFY, MissionEvent::logged, MissionState::SCAN},
  };
  return table;
}

MissionState next_state(MissionState current, MissionEvent event) {
  if (event == MissionEvent::abort) return MissionState::STOW;  // safety edge
  for (const auto& t : transition_table()) {
    if (t.from == current && t.event == event) return t.to;
  }
  throw ProtocolError(current, event);
}

MissionConfig MissionConfig::defaults() {
  MissionConfig c;
  c.arm.limits = JointLimits::around(c.scan.pose.gamma0, c.scan.pose.gamma1,
                                     c.scan.pose.gamma2, 1.5707963267948966);
  c.power_table = {{"embedded_computers", 12.0, 1.25},
                   {"spectrometer", 5.0, 3.00},
                   {"lamp", 12.0, 1.20},
                   {"robotic_arm", 12.0, 5.00},
                   {"rover_drive", 11.1, 8.00}};
  return c;
}

void MissionConfig::validate() const {
  arm.validate();
  camera.validate();
  if (rover_speed <= 0.0) throw std::invalid_argument("rover_speed must be positive");
  if (battery_hours <= 0.0) throw std::invalid_argument("battery_hours must be positive");
  if (swath <= 0.0) throw std::invalid_argument("swath must be positive");
  if (scan.stride <= 0.0) throw std::invalid_argument("scan stride must be positive");
  if (scene.particles < 0) throw std::invalid_argument("particle count negative");
  if (!(servo.lambda > 0.0 && servo.lambda <= 1.0)) {
    throw std::invalid_argument("servo lambda must lie in (0, 1]");
  }
  if (servo.xy_tol <= 0.0 || servo.track_tol <= 0.0) {
    throw std::invalid_argument("servo tolerances must be positive");
  }
  if (!model_path.empty()) {
    std::ifstream f(model_path);
    if (!f) throw std::invalid_argument("classifier model not found: " + model_path);
  }
}

namespace {

using nlohmann::json;

json arm_to_json(const ArmGeometry& a) {
  return {{"r1", a.r1},
          {"r2", a.r2},
          {"alpha_j", a.alpha_j},
          {"wrist_sum", a.wrist_sum},
          {"limits_lo", a.limits.lo},
          {"limits_hi", a.limits.hi}};
}

void arm_from_json(const json& j, ArmGeometry& a) {
  a.r1 = j.value("r1", a.r1);
  a.r2 = j.value("r2", a.r2);
  a.alpha_j = j.value("alpha_j", a.alpha_j);
  a.wrist_sum = j.value("wrist_sum", a.wrist_sum);
  if (j.contains("limits_lo")) a.limits.lo = j.at("limits_lo").get<std::array<double, 3>>();
  if (j.contains("limits_hi")) a.limits.hi = j.at("limits_hi").get<std::array<double, 3>>();
}

}  // namespace

std::string MissionConfig::to_json(int indent) const {
  json j;
  j["arm"] = arm_to_json(arm);
  j["camera"] = {{"omega", camera.omega}, {"u0", camera.u0},     {"v0", camera.v0},
                 {"width", camera.width}, {"height", camera.height}, {"fov_deg", camera.fov_deg}};
  j["mounting"] = {{"base_height", mounting.base_height},
                   {"tool_offset", mounting.tool_offset},
                   {"cam_offset_radial", mounting.cam_offset_radial},
                   {"cam_offset_up", mounting.cam_offset_up}};
  j["nir"] = {{"focus_distance", nir.focus_distance},
              {"spot_radius_focused", nir.spot_radius_focused},
              {"spot_spread", nir.spot_spread},
              {"receiver_shift", nir.receiver_shift},
              {"g_width", nir.g_width},
              {"snr_max", nir.snr_max},
              {"counts_scale", nir.counts_scale},
              {"dark_floor", nir.dark_floor}};
  j["actuation"] = {{"sigma_act", actuation.sigma_act},
                    {"flex_bias", actuation.flex_bias},
                    {"settle_ticks", actuation.settle_ticks}};
  j["servo"] = {{"lambda", servo.lambda},
                {"xy_tol", servo.xy_tol},
                {"track_tol", servo.track_tol},
                {"snr_threshold_frac", servo.snr_threshold_frac},
                {"max_iters", servo.max_iters},
                {"spiral_step", servo.spiral_step},
                {"coarse_dia_factor", servo.coarse_dia_factor},
                {"coarse_step", servo.coarse_step},
                {"fine_step", servo.fine_step},
                {"collision_margin", servo.collision_margin},
                {"reference_offset", servo.reference_offset},
                {"energy_floor", servo.energy_floor},
                {"energy_factor", servo.energy_factor},
                {"max_spiral_probes", servo.max_spiral_probes}};
  j["scan"] = {{"pose", {scan.pose.gamma0, scan.pose.gamma1, scan.pose.gamma2}},
               {"thetas", scan.thetas},
               {"stride", scan.stride},
               {"adaptive_variance_threshold", scan.adaptive_variance_threshold},
               {"adaptive_window", scan.adaptive_window}};
  j["scene"] = {{"particles", scene.particles},
                {"bounds", {scene.bounds.x0, scene.bounds.y0, scene.bounds.x1, scene.bounds.y1}},
                {"max_slope_deg", scene.max_slope_deg}};
  j["rover"] = {{"speed", rover_speed}, {"battery_hours", battery_hours}, {"swath", swath}};
  json power = json::array();
  for (const auto& p : power_table) {
    power.push_back({{"component", p.component}, {"voltage", p.voltage}, {"current", p.current}});
  }
  j["power_table"] = std::move(power);
  j["classifier"] = {{"model_path", model_path}, {"train_seed", model_train_seed}};
  return indent >= 0 ? j.dump(indent) : j.dump();
}

MissionConfig MissionConfig::from_json(const std::string& text) {
  const json j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  MissionConfig c = defaults();
  if (j.contains("arm")) arm_from_json(j.at("arm"), c.arm);
  if (j.contains("camera")) {
    const auto& cam = j.at("camera");
    c.camera.omega = cam.value("omega", c.camera.omega);
    c.camera.u0 = cam.value("u0", c.camera.u0);
    c.camera.v0 = cam.value("v0", c.camera.v0);
    c.camera.width = cam.value("width", c.camera.width);
    c.camera.height = cam.value("height", c.camera.height);
    c.camera.fov_deg = cam.value("fov_deg", c.camera.fov_deg);
  }
  if (j.contains("mounting")) {
    const auto& m = j.at("mounting");
    c.mounting.base_height = m.value("base_height", c.mounting.base_height);
    c.mounting.tool_offset = m.value("tool_offset", c.mounting.tool_offset);
    c.mounting.cam_offset_radial = m.value("cam_offset_radial", c.mounting.cam_offset_radial);
    c.mounting.cam_offset_up = m.value("cam_offset_up", c.mounting.cam_offset_up);
  }
  if (j.contains("nir")) {
    const auto& n = j.at("nir");
    c.nir.focus_distance = n.value("focus_distance", c.nir.focus_distance);
    c.nir.spot_radius_focused = n.value("spot_radius_focused", c.nir.spot_radius_focused);
    c.nir.spot_spread = n.value("spot_spread", c.nir.spot_spread);
    c.nir.receiver_shift = n.value("receiver_shift", c.nir.receiver_shift);
    c.nir.g_width = n.value("g_width", c.nir.g_width);
    c.nir.snr_max = n.value("snr_max", c.nir.snr_max);
    c.nir.counts_scale = n.value("counts_scale", c.nir.counts_scale);
    c.nir.dark_floor = n.value("dark_floor", c.nir.dark_floor);
  }
  if (j.contains("actuation")) {
    const auto& a = j.at("actuation");
    c.actuation.sigma_act = a.value("sigma_act", c.actuation.sigma_act);
    c.actuation.flex_bias = a.value("flex_bias", c.actuation.flex_bias);
    c.actuation.settle_ticks = a.value("settle_ticks", c.actuation.settle_ticks);
  }
  if (j.contains("servo")) {
    const auto& s = j.at("servo");
    c.servo.lambda = s.value("lambda", c.servo.lambda);
    c.servo.xy_tol = s.value("xy_tol", c.servo.xy_tol);
    c.servo.track_tol = s.value("track_tol", c.servo.track_tol);
    c.servo.snr_threshold_frac = s.value("snr_threshold_frac", c.servo.snr_threshold_frac);
    c.servo.max_iters = s.value("max_iters", c.servo.max_iters);
    c.servo.spiral_step = s.value("spiral_step", c.servo.spiral_step);
    c.servo.coarse_dia_factor = s.value("coarse_dia_factor", c.servo.coarse_dia_factor);
    c.servo.coarse_step = s.value("coarse_step", c.servo.coarse_step);
    c.servo.fine_step = s.value("fine_step", c.servo.fine_step);
    c.servo.collision_margin = s.value("collision_margin", c.servo.collision_margin);
    c.servo.reference_offset = s.value("reference_offset", c.servo.reference_offset);
    c.servo.energy_floor = s.value("energy_floor", c.servo.energy_floor);
    c.servo.energy_factor = s.value("energy_factor", c.servo.energy_factor);
    c.servo.max_spiral_probes = s.value("max_spiral_probes", c.servo.max_spiral_probes);
  }
  if (j.contains("scan")) {
    const auto& s = j.at("scan");
    if (s.contains("pose")) {
      const auto pose = s.at("pose").get<std::array<double, 3>>();
      c.scan.pose = {pose[0], pose[1], pose[2]};
    }
    if (s.contains("thetas")) c.scan.thetas = s.at("thetas").get<std::vector<double>>();
    c.scan.stride = s.value("stride", c.scan.stride);
    c.scan.adaptive_variance_threshold =
        s.value("adaptive_variance_threshold", c.scan.adaptive_variance_threshold);
    c.scan.adaptive_window = s.value("adaptive_window", c.scan.adaptive_window);
  }
  if (j.contains("scene")) {
    const auto& s = j.at("scene");
    c.scene.particles = s.value("particles", c.scene.particles);
    if (s.contains("bounds")) {
      const auto b = s.at("bounds").get<std::array<double, 4>>();
      c.scene.bounds = {b[0], b[1], b[2], b[3]};
    }
    c.scene.max_slope_deg = s.value("max_slope_deg", c.scene.max_slope_deg);
  }
  if (j.contains("rover")) {
    const auto& r = j.at("rover");
    c.rover_speed = r.value("speed", c.rover_speed);
    c.battery_hours = r.value("battery_hours", c.battery_hours);
    c.swath = r.value("swath", c.swath);
  }
  if (j.contains("power_table")) {
    c.power_table.clear();
    for (const auto& p : j.at("power_table")) {
      c.power_table.push_back({p.at("component").get<std::string>(),
                               p.at("voltage").get<double>(),
                               p.at("current").get<double>()});
    }
  }
  if (j.contains("classifier")) {
    const auto& cl = j.at("classifier");
    c.model_path = cl.value("model_path", c.model_path);
    c.model_train_seed = cl.value("train_seed", c.model_train_seed);
  }
  c.validate();
  return c;
}

MissionConfig MissionConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return from_json(buf.str());
}

void MissionConfig::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << to_json(2) << '\n';
}

EnduranceReport endurance_report(const MissionConfig& config) {
  config.validate();
  EnduranceReport r;
  r.duration_h = config.battery_hours;
  r.path_m = config.rover_speed * config.battery_hours * 3600.0;
  r.area_m2 = r.path_m * config.swath;
  r.power = config.power_table;
  for (const auto& p : r.power) r.total_peak_w += p.voltage * p.current;
  return r;
}

std::string EnduranceReport::to_json() const {
  json j;
  j["note"] = "arithmetic consistency from configured constants, not a measurement";
  j["duration_h"] = duration_h;
  j["path_m"] = path_m;
  j["area_m2"] = area_m2;
  json power = json::array();
  for (const auto& p : this->power) {
    power.push_back({{"component", p.component},
                     {"voltage_V", p.voltage},
                     {"current_A", p.current},
                     {"peak_W", p.voltage * p.current}});
  }
  j["power_peak"] = std::move(power);
  j["total_peak_W"] = total_peak_w;
  return j.dump(2);
}

std::string MissionSummary::to_json() const {
  json j;
  j["scene_particles"] = scene_particles;
  j["found"] = found;
  j["missed"] = missed;
  j["out_of_swath"] = out_of_swath;
  j["classified_total"] = classified_total;
  j["classified_correct"] = classified_correct;
  j["classification_accuracy"] = classification_accuracy;
  j["per_class_counts"] = per_class_counts;
  j["path_length_m"] = path_length_m;
  j["area_covered_m2"] = area_covered_m2;
  j["waypoints"] = waypoints;
  j["failed_samples"] = failed_samples;
  return j.dump(2);
}

}  // namespace mps
