#include "mpsurvey/scene.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mpsurvey/seeding.hpp"

namespace mps {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Stateless per-cell texture hash (world-anchored so the sand pattern is
// rigid under camera motion).
inline std::uint64_t cell_hash(std::uint64_t seed, std::int64_t cx, std::int64_t cy) {
  std::uint64_t z = seed ^ (static_cast<std::uint64_t>(cx) * 0x9e3779b97f4a7c15ULL) ^
                    (static_cast<std::uint64_t>(cy) * 0xc2b2ae3d27d4eb4fULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double hash01(std::uint64_t h, int lane) {
  return static_cast<double>((h >> (lane * 21)) & 0x1fffff) / 2097151.0;
}

}  // namespace

Terrain Terrain::flat() {
  Terrain t;
  t.max_slope_deg_ = 10.0;
  return t;
}

Terrain Terrain::generate(std::uint64_t seed, double max_slope_deg, int n_waves) {
  Terrain t;
  t.max_slope_deg_ = max_slope_deg;
  auto rng = make_rng(seed, 0x7e44);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double gradient_budget = 0.0;
  for (int i = 0; i < n_waves; ++i) {
    Wave w;
    const double wavelength = 0.5 + 0.7 * u01(rng);
    const double k = 2.0 * kPi / wavelength;
    const double dir = 2.0 * kPi * u01(rng);
    w.kx = k * std::cos(dir);
    w.ky = k * std::sin(dir);
    w.phase = 2.0 * kPi * u01(rng);
    w.amplitude = 0.5 + 0.5 * u01(rng);
    gradient_budget += w.amplitude * k;
    t.waves_.push_back(w);
  }
  // Worst-case gradient is the sum of per-wave slopes; leave 10% headroom.
  const double scale = 0.9 * std::tan(max_slope_deg * kPi / 180.0) / gradient_budget;
  for (auto& w : t.waves_) w.amplitude *= scale;
  return t;
}

double Terrain::height(double x, double y) const {
  double h = 0.0;
  for (const auto& w : waves_) {
    h += w.amplitude * std::sin(w.kx * x + w.ky * y + w.phase);
  }
  for (const auto& b : bumps_) {
    const double dx = x - b.x;
    const double dy = y - b.y;
    const double t = (dx * dx + dy * dy) / (b.radius * b.radius);
    if (t < 9.0) h += b.height * std::exp(-t);
  }
  return h;
}

void Scene::validate() const {
  for (const auto& p : particles) {
    if (p.size_mm < 1.0) {
      throw std::invalid_argument("particle below 1 mm: " + p.material);
    }
    if (p.x < bounds.x0 || p.x > bounds.x1 || p.y < bounds.y0 || p.y > bounds.y1) {
      throw std::invalid_argument("particle outside workspace bounds");
    }
  }
  // Sampled slope check over the workspace.
  const double limit = std::tan(terrain.max_slope_deg() * kPi / 180.0) + 1e-6;
  const int n = 40;
  const double eps = 0.01;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      const double x = bounds.x0 + (bounds.x1 - bounds.x0) * i / n;
      const double y = bounds.y0 + (bounds.y1 - bounds.y0) * j / n;
      const double gx = (terrain.height(x + eps, y) - terrain.height(x - eps, y)) / (2 * eps);
      const double gy = (terrain.height(x, y + eps) - terrain.height(x, y - eps)) / (2 * eps);
      if (std::sqrt(gx * gx + gy * gy) > limit) {
        throw std::invalid_argument("terrain exceeds slope cap");
      }
    }
  }
}

Scene Scene::scatter(std::uint64_t seed, const WorkspaceBounds& bounds, int n_particles,
                     double max_slope_deg) {
  Scene scene;
  scene.seed = seed;
  scene.bounds = bounds;
  scene.terrain = Terrain::generate(seed, max_slope_deg);

  auto rng = make_rng(seed, 0x5ce4e);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double hues[3] = {220.0, 352.0, 120.0};
  static const char* materials[8] = {"PP",  "PET", "HDPE", "PVC",
                                     "PS",  "LDPE", "PLA",  "nylon"};
  const double margin = 0.04;
  for (int i = 0; i < n_particles; ++i) {
    Particle p;
    for (int attempt = 0; attempt < 256; ++attempt) {
      p.x = bounds.x0 + margin + (bounds.x1 - bounds.x0 - 2 * margin) * u01(rng);
      p.y = bounds.y0 + margin + (bounds.y1 - bounds.y0 - 2 * margin) * u01(rng);
      bool clear = true;
      for (const auto& other : scene.particles) {
        const double dx = p.x - other.x;
        const double dy = p.y - other.y;
        if (dx * dx + dy * dy < 0.025 * 0.025) clear = false;
      }
      if (clear) break;
    }
    p.size_mm = 2.0 + 2.0 * u01(rng);
    p.color.h = static_cast<float>(hues[i % 3] + 8.0 * (u01(rng) - 0.5));
    p.color.s = static_cast<float>(0.75 + 0.15 * u01(rng));
    p.color.v = static_cast<float>(0.62 + 0.20 * u01(rng));
    p.material = materials[i % 8];
    scene.particles.push_back(p);
  }
  return scene;
}

PixelCoord CameraView::project_world(const CameraIntrinsics& intr,
                                     const CartesianPoint& world) const {
  const double rx = world.x - position.x;
  const double ry = world.y - position.y;
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  CartesianPoint cam_point;
  cam_point.x = c * rx + s * ry;
  cam_point.y = -s * rx + c * ry;
  cam_point.z = position.z - world.z;  // depth along the downward axis
  return project(intr, cam_point);
}

CartesianPoint CameraView::pixel_to_ground(const CameraIntrinsics& intr,
                                           const PixelCoord& px, double ground_z) const {
  const double zc = position.z - ground_z;
  if (!(zc > 0.0)) throw BehindCameraError("ground plane not in front of camera");
  const double xc = (px.u - intr.u0) * zc / intr.omega;
  const double yc = (px.v - intr.v0) * zc / intr.omega;
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {position.x + c * xc - s * yc, position.y + s * xc + c * yc, ground_z};
}

SceneSim::SceneSim(Scene scene, ArmGeometry geom, Mounting mount, NirGeometry nir,
                   ActuationModel act, GridPtr grid)
    : scene_(std::move(scene)),
      geom_(geom),
      mount_(mount),
      nir_(nir),
      act_(act),
      grid_(std::move(grid)),
      act_rng_(make_rng(scene_.seed, 0xac7)) {
  geom_.validate();
}

double SceneSim::terrain_height(double x, double y) const {
  return scene_.terrain.height(x, y);
}

CartesianPoint SceneSim::focus_world(const JointConfig& q, bool with_flex) const {
  const CartesianPoint arm = forward_cartesian(geom_, q);
  const double ch = std::cos(rover_.heading);
  const double sh = std::sin(rover_.heading);
  const double jx = rover_.x + ch * arm.x - sh * arm.y;
  const double jy = rover_.y + sh * arm.x + ch * arm.y;
  const double jz = mount_.base_height + arm.z;
  const double phi = rover_.heading + q.gamma0;
  const double flex = with_flex ? act_.flex_bias : 0.0;
  return {jx + mount_.tool_offset * std::sin(flex) * std::cos(phi),
          jy + mount_.tool_offset * std::sin(flex) * std::sin(phi),
          jz - mount_.tool_offset * std::cos(flex)};
}

CameraView SceneSim::camera_view(const JointConfig& q) const {
  const CartesianPoint arm = forward_cartesian(geom_, q);
  const double ch = std::cos(rover_.heading);
  const double sh = std::sin(rover_.heading);
  const double jx = rover_.x + ch * arm.x - sh * arm.y;
  const double jy = rover_.y + sh * arm.x + ch * arm.y;
  const double jz = mount_.base_height + arm.z;
  const double phi = rover_.heading + q.gamma0;
  CameraView view;
  view.yaw = phi;
  view.position = {jx + mount_.cam_offset_radial * std::cos(phi),
                   jy + mount_.cam_offset_radial * std::sin(phi),
                   jz + mount_.cam_offset_up};
  return view;
}

EffectorState SceneSim::make_state(const JointConfig& q, bool lamp_on) const {
  EffectorState st;
  st.q = q;
  st.focus = focus_world(q, true);
  st.lamp_on = lamp_on;
  st.settled = true;
  return st;
}

EffectorState SceneSim::step_arm(const EffectorState& state, const JointDeltas& deltas) {
  if (!std::isfinite(deltas.d0) || !std::isfinite(deltas.d1) || !std::isfinite(deltas.d2)) {
    throw std::invalid_argument("joint deltas must be finite");
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  double target[3] = {state.q.gamma0 + deltas.d0 + act_.sigma_act * gauss(act_rng_),
                      state.q.gamma1 + deltas.d1 + act_.sigma_act * gauss(act_rng_),
                      state.q.gamma2 + deltas.d2 + act_.sigma_act * gauss(act_rng_)};
  EffectorState next = state;
  next.limit_hit = false;
  for (int i = 0; i < 3; ++i) {
    const double clamped = std::clamp(target[i], geom_.limits.lo[i], geom_.limits.hi[i]);
    if (clamped != target[i]) next.limit_hit = true;
    target[i] = clamped;
  }
  next.q = {target[0], target[1], target[2]};
  next.focus = focus_world(next.q, true);
  next.settled = false;
  next.settle_countdown = act_.settle_ticks;
  return next;
}

void SceneSim::settle(EffectorState& state) {
  if (!state.settled) {
    ticks_ += static_cast<std::uint64_t>(state.settle_countdown);
    state.settle_countdown = 0;
    state.settled = true;
  }
  ticks_ += 1;  // the accepted frame itself
}

SceneImage SceneSim::render(const EffectorState& state, const CameraIntrinsics& intr,
                            Illumination illumination) const {
  const CameraView cam = camera_view(state.q);
  const double ground_ref = terrain_height(cam.position.x, cam.position.y);
  if (cam.position.z <= ground_ref) {
    std::ostringstream os;
    os << "camera below terrain: cam=(" << cam.position.x << ", " << cam.position.y
       << ", " << cam.position.z << ") terrain=" << ground_ref << " q=(" << state.q.gamma0
       << ", " << state.q.gamma1 << ", " << state.q.gamma2 << ")";
    throw std::invalid_argument(os.str());
  }
  const bool nir = illumination == Illumination::NIR_lamp;
  SceneImage img = SceneImage::blank(intr.width, intr.height, illumination);

  // Background sand. Under the NIR lamp the scene is dark and candidate
  // detection is not run, so a flat dim fill is enough; under LED the texture
  // is world-anchored (rigid under camera motion).
  const double zc = cam.position.z - ground_ref;
  const double cyaw = std::cos(cam.yaw);
  const double syaw = std::sin(cam.yaw);
  if (nir) {
    const Hsv dim{46.0f, 0.24f, 0.11f};
    std::fill(img.pixels.begin(), img.pixels.end(), dim);
  } else {
    const double step = zc / intr.omega;
    const double du_x = cyaw * step;
    const double du_y = syaw * step;
    for (int v = 0; v < intr.height; ++v) {
      const double yc = (v + 0.5 - intr.v0) * step;
      const double x0 = (0.5 - intr.u0) * step;
      double wx = cam.position.x + cyaw * x0 - syaw * yc;
      double wy = cam.position.y + syaw * x0 + cyaw * yc;
      std::int64_t last_cx = std::numeric_limits<std::int64_t>::min();
      std::int64_t last_cy = last_cx;
      Hsv c;
      for (int u = 0; u < intr.width; ++u, wx += du_x, wy += du_y) {
        const std::int64_t cx = static_cast<std::int64_t>(std::floor(wx * 2000.0));
        const std::int64_t cy = static_cast<std::int64_t>(std::floor(wy * 2000.0));
        if (cx != last_cx || cy != last_cy) {
          const std::uint64_t h = cell_hash(scene_.seed, cx, cy);
          c.h = static_cast<float>(38.0 + 17.0 * hash01(h, 0));
          c.s = static_cast<float>(0.15 + 0.17 * hash01(h, 1));
          c.v = static_cast<float>(0.55 + 0.25 * hash01(h, 2));
          last_cx = cx;
          last_cy = cy;
        }
        img.at(u, v) = c;
      }
    }
  }

  // NIR illumination spot on the terrain.
  double spot_cx = 0.0;
  double spot_cy = 0.0;
  double spot_r = 0.0;
  bool spot_drawn = false;
  if (nir && state.lamp_on) {
    spot_cx = state.focus.x;
    spot_cy = state.focus.y;
    const double spot_z = terrain_height(spot_cx, spot_cy);
    const double d = state.focus.z - spot_z;
    spot_r = nir_.spot_radius(d);
    spot_drawn = true;
    try {
      const PixelCoord pc = cam.project_world(intr, {spot_cx, spot_cy, spot_z});
      const double zsp = cam.position.z - spot_z;
      const double rpx = intr.omega * spot_r / zsp;
      const int u0 = std::max(0, static_cast<int>(std::floor(pc.u - rpx - 1)));
      const int u1 = std::min(intr.width - 1, static_cast<int>(std::ceil(pc.u + rpx + 1)));
      const int v0 = std::max(0, static_cast<int>(std::floor(pc.v - rpx - 1)));
      const int v1 = std::min(intr.height - 1, static_cast<int>(std::ceil(pc.v + rpx + 1)));
      for (int v = v0; v <= v1; ++v) {
        for (int u = u0; u <= u1; ++u) {
          const CartesianPoint g = cam.pixel_to_ground(intr, {u + 0.5, v + 0.5}, spot_z);
          const double dx = g.x - spot_cx;
          const double dy = g.y - spot_cy;
          const double rho2 = dx * dx + dy * dy;
          if (rho2 > spot_r * spot_r) continue;
          Hsv c;
          c.h = 10.0f;
          c.s = 0.80f;
          c.v = static_cast<float>(0.95 - 0.25 * rho2 / (spot_r * spot_r));
          img.at(u, v) = c;
        }
      }
    } catch (const BehindCameraError&) {
      // spot behind the camera cannot happen in nominal poses; skip drawing
    }
  }

  // Particles as flat discs on the terrain.
  for (const auto& p : scene_.particles) {
    const double pz = terrain_height(p.x, p.y);
    PixelCoord pc;
    try {
      pc = cam.project_world(intr, {p.x, p.y, pz});
    } catch (const BehindCameraError&) {
      continue;
    }
    const double zp = cam.position.z - pz;
    const double r = p.radius_m();
    const double rpx = intr.omega * r / zp;
    const int u0 = std::max(0, static_cast<int>(std::floor(pc.u - rpx - 1)));
    const int u1 = std::min(intr.width - 1, static_cast<int>(std::ceil(pc.u + rpx + 1)));
    const int v0 = std::max(0, static_cast<int>(std::floor(pc.v - rpx - 1)));
    const int v1 = std::min(intr.height - 1, static_cast<int>(std::ceil(pc.v + rpx + 1)));
    if (u0 > u1 || v0 > v1) continue;
    const bool blue_band = p.color.h >= 160.0f && p.color.h <= 300.0f;
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        const CartesianPoint g = cam.pixel_to_ground(intr, {u + 0.5, v + 0.5}, pz);
        const double dx = g.x - p.x;
        const double dy = g.y - p.y;
        if (dx * dx + dy * dy > r * r) continue;
        const std::uint64_t h =
            cell_hash(scene_.seed ^ 0xb10b5, static_cast<std::int64_t>(std::floor(g.x / 0.0005)),
                      static_cast<std::int64_t>(std::floor(g.y / 0.0005)));
        Hsv c = p.color;
        c.v = std::clamp(c.v + static_cast<float>(0.06 * (hash01(h, 2) - 0.5)), 0.0f, 1.0f);
        if (nir) {
          const double sx = g.x - spot_cx;
          const double sy = g.y - spot_cy;
          const bool in_spot = spot_drawn && (sx * sx + sy * sy <= spot_r * spot_r);
          if (in_spot && blue_band) {
            // Blue material under the incandescent NIR lamp goes nearly black.
            c.s = 0.05f;
            c.v = 0.04f;
          } else if (in_spot) {
            c.h = static_cast<float>(0.3 * c.h + 0.7 * 12.0);
            c.s *= 0.8f;
            c.v = 0.72f;
          } else {
            c.v *= 0.15f;
          }
        }
        img.at(u, v) = c;
      }
    }
  }
  return img;
}

double SceneSim::defocus(const EffectorState& state) const {
  return state.focus.z - terrain_height(state.focus.x, state.focus.y);
}

CartesianPoint SceneSim::measurement_point(const EffectorState& state) const {
  const double d = defocus(state);
  const double phi = rover_.heading + state.q.gamma0;
  const double cx = state.focus.x + nir_.receiver_shift * d * std::cos(phi);
  const double cy = state.focus.y + nir_.receiver_shift * d * std::sin(phi);
  return {cx, cy, terrain_height(cx, cy)};
}

std::map<std::string, double> SceneSim::footprint_weights(const EffectorState& state) const {
  const double d = defocus(state);
  const CartesianPoint center = measurement_point(state);
  const double cx = center.x;
  const double cy = center.y;
  const double r = nir_.spot_radius(d);

  // 0.1 mm rasterization of the collection footprint.
  const double step = 1e-4;
  const int n = static_cast<int>(std::ceil(r / step)) + 1;
  std::map<std::string, double> weights;
  std::size_t total = 0;
  for (int iy = -n; iy <= n; ++iy) {
    for (int ix = -n; ix <= n; ++ix) {
      const double gx = cx + ix * step;
      const double gy = cy + iy * step;
      const double ddx = gx - cx;
      const double ddy = gy - cy;
      if (ddx * ddx + ddy * ddy > r * r) continue;
      ++total;
      const char* material = "sand";
      for (const auto& p : scene_.particles) {
        const double px = gx - p.x;
        const double py = gy - p.y;
        const double pr = p.radius_m();
        if (px * px + py * py <= pr * pr) {
          material = p.material.c_str();
          break;
        }
      }
      weights[material] += 1.0;
    }
  }
  for (auto& [name, w] : weights) w /= static_cast<double>(total);
  return weights;
}

NirSample SceneSim::sample_nir(const EffectorState& state, std::uint64_t seed) const {
  if (!state.lamp_on) throw std::invalid_argument("sample_nir requires the lamp on");
  NirSample out;
  out.defocus = defocus(state);
  out.weights = footprint_weights(state);
  out.snr_effective = nir_.effective_snr(out.defocus);
  const double gain = nir_.focus_gain(out.defocus);

  std::vector<std::pair<Spectrum, double>> parts;
  for (const auto& [material, w] : out.weights) {
    parts.emplace_back(synthesize_reflectance(library_.at(material), grid_), w);
  }
  const Spectrum mixed = mix_spectra(parts);
  Spectrum raw = mixed;
  raw.role = SpectrumRole::sample;
  for (double& v : raw.intensities) {
    v = nir_.dark_floor + nir_.counts_scale * gain * v;
  }
  out.raw = add_noise(raw, out.snr_effective, split_seed(seed, 0x5a));
  return out;
}

ReferencePair SceneSim::acquire_reference(const EffectorState& state,
                                          std::uint64_t seed) const {
  if (!state.lamp_on) throw std::invalid_argument("acquire_reference requires the lamp on");
  const auto weights = footprint_weights(state);
  for (const auto& [material, w] : weights) {
    if (material != "sand" && w > 0.0) {
      std::ostringstream os;
      os << "reference footprint contaminated by " << material << " (weight " << w << ")";
      throw ReferenceContaminatedError(os.str());
    }
  }
  const double d = defocus(state);
  const double gain = nir_.focus_gain(d);
  const double snr_eff = nir_.effective_snr(d);

  Spectrum reference = synthesize_reflectance(library_.at("sand"), grid_);
  reference.role = SpectrumRole::reference;
  for (double& v : reference.intensities) {
    v = nir_.dark_floor + nir_.counts_scale * gain * v;
  }
  Spectrum dark;
  dark.grid = grid_;
  dark.role = SpectrumRole::dark;
  dark.intensities.assign(grid_->size(), nir_.dark_floor);

  ReferencePair out;
  out.reference = add_noise(reference, snr_eff, split_seed(seed, 0x9e));
  out.dark = add_noise(dark, nir_.snr_max, split_seed(seed, 0xda));
  return out;
}

}  // namespace mps
