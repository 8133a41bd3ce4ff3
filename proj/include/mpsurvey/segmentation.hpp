#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mpsurvey/camera.hpp"

namespace mps {

// Hue in degrees [0, 360), saturation and value in [0, 1].
struct Hsv {
  float h = 0.0f;
  float s = 0.0f;
  float v = 0.0f;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
};

Rgb hsv_to_rgb(const Hsv& c);
Hsv rgb_to_hsv(const Rgb& c);

enum class Illumination { LED, NIR_lamp };

struct SceneImage {
  int width = 0;
  int height = 0;
  Illumination mode = Illumination::LED;
  std::vector<Hsv> pixels;

  Hsv& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
  const Hsv& at(int u, int v) const {
    return pixels[static_cast<std::size_t>(v) * width + u];
  }
  static SceneImage blank(int w, int h, Illumination mode, const Hsv& fill = {});
};

struct BBox {
  int u0 = 0;
  int v0 = 0;
  int u1 = 0;  // inclusive
  int v1 = 0;
};

enum class DetectionKind { candidate_particle, nir_spot };

struct Detection {
  PixelCoord centroid;
  double area = 0.0;  // hole-filled pixel count
  BBox bbox;
  DetectionKind kind = DetectionKind::candidate_particle;
  double spot_diameter = 0.0;  // equivalent-circle diameter, nir_spot only
};

struct SegmentationParams {
  // Candidate rule: saturation >= s_min, hue outside the sand band, value
  // above the black floor. Thresholds are declared defaults; the sand band
  // matches the synthetic beach texture.
  double s_min = 0.45;
  double sand_hue_lo = 35.0;
  double sand_hue_hi = 60.0;
  double v_floor = 0.15;
  double min_area_px = 11.0;   // projected area of a 1 mm particle at 10 cm
  double max_area_px = 600.0;
  double min_circularity = 0.5;
  // NIR spot rule: bright pixels under lamp illumination.
  double spot_value_min = 0.60;
  double spot_min_area_px = 20.0;
};

// Connected components over the color threshold with hole filling and
// parent/child containment (holes count toward the parent blob). Sorted by
// area descending, ties by (u, v).
std::vector<Detection> detect_candidates(const SceneImage& img,
                                         const SegmentationParams& params);

// Largest bright blob under NIR illumination, or nothing.
std::optional<Detection> detect_nir_spot(const SceneImage& img,
                                         const SegmentationParams& params);

// Binary P6 portable pixmap, for fixtures.
void write_ppm(const SceneImage& img, const std::string& path);
SceneImage read_ppm(const std::string& path, Illumination mode);

}  // namespace mps
