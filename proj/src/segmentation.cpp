#include "mpsurvey/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mps {

namespace {
constexpr double kPi = 3.14159265358979323846;

struct Blob {
  std::vector<std::size_t> pixels;  // hole-filled
  BBox bbox{1 << 30, 1 << 30, -1, -1};
  long filled_edges = 0;  // exposed 4-edges of the filled region
};

// Foreground blobs over a predicate mask: 8-connected components, then holes
// (4-connected background not reachable from the blob's padded bbox border)
// are folded into the parent component. Hole filling stays local to each
// bbox, so a frame with sparse blobs costs little more than the mask scan.
std::vector<Blob> find_blobs(int width, int height, const std::vector<char>& mask) {
  std::vector<std::int32_t> labels(mask.size(), -1);
  std::vector<Blob> blobs;
  std::vector<std::size_t> stack;

  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || labels[start] != -1) continue;
    const std::int32_t id = static_cast<std::int32_t>(blobs.size());
    blobs.emplace_back();
    Blob& blob = blobs.back();
    labels[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      blob.pixels.push_back(i);
      const int u = static_cast<int>(i % static_cast<std::size_t>(width));
      const int v = static_cast<int>(i / static_cast<std::size_t>(width));
      blob.bbox.u0 = std::min(blob.bbox.u0, u);
      blob.bbox.v0 = std::min(blob.bbox.v0, v);
      blob.bbox.u1 = std::max(blob.bbox.u1, u);
      blob.bbox.v1 = std::max(blob.bbox.v1, v);
      for (int dv = -1; dv <= 1; ++dv) {
        for (int du = -1; du <= 1; ++du) {
          if (du == 0 && dv == 0) continue;
          const int nu = u + du;
          const int nv = v + dv;
          if (nu < 0 || nu >= width || nv < 0 || nv >= height) continue;
          const std::size_t ni = static_cast<std::size_t>(nv) * width + nu;
          if (mask[ni] && labels[ni] == -1) {
            labels[ni] = id;
            stack.push_back(ni);
          }
        }
      }
    }
  }

  // Local hole filling per blob.
  for (auto& blob : blobs) {
    const int bu0 = std::max(0, blob.bbox.u0 - 1);
    const int bv0 = std::max(0, blob.bbox.v0 - 1);
    const int bu1 = std::min(width - 1, blob.bbox.u1 + 1);
    const int bv1 = std::min(height - 1, blob.bbox.v1 + 1);
    const int bw = bu1 - bu0 + 1;
    const int bh = bv1 - bv0 + 1;
    // 0 unknown background, 1 reachable from border, 2 foreground
    std::vector<char> local(static_cast<std::size_t>(bw) * bh, 0);
    for (int v = bv0; v <= bv1; ++v) {
      for (int u = bu0; u <= bu1; ++u) {
        if (mask[static_cast<std::size_t>(v) * width + u]) {
          local[static_cast<std::size_t>(v - bv0) * bw + (u - bu0)] = 2;
        }
      }
    }
    std::vector<std::size_t> flood;
    auto seed = [&](int lu, int lv) {
      const std::size_t li = static_cast<std::size_t>(lv) * bw + lu;
      if (local[li] == 0) {
        local[li] = 1;
        flood.push_back(li);
      }
    };
    for (int lu = 0; lu < bw; ++lu) {
      seed(lu, 0);
      seed(lu, bh - 1);
    }
    for (int lv = 0; lv < bh; ++lv) {
      seed(0, lv);
      seed(bw - 1, lv);
    }
    while (!flood.empty()) {
      const std::size_t li = flood.back();
      flood.pop_back();
      const int lu = static_cast<int>(li % static_cast<std::size_t>(bw));
      const int lv = static_cast<int>(li / static_cast<std::size_t>(bw));
      if (lu > 0) seed(lu - 1, lv);
      if (lu + 1 < bw) seed(lu + 1, lv);
      if (lv > 0) seed(lu, lv - 1);
      if (lv + 1 < bh) seed(lu, lv + 1);
    }
    for (int lv = 0; lv < bh; ++lv) {
      for (int lu = 0; lu < bw; ++lu) {
        if (local[static_cast<std::size_t>(lv) * bw + lu] == 0) {
          blob.pixels.push_back(static_cast<std::size_t>(lv + bv0) * width + (lu + bu0));
          local[static_cast<std::size_t>(lv) * bw + lu] = 2;
        }
      }
    }
    // Perimeter bookkeeping reuses the local map: count exposed 4-edges.
    blob.filled_edges = 0;
    for (int lv = 0; lv < bh; ++lv) {
      for (int lu = 0; lu < bw; ++lu) {
        if (local[static_cast<std::size_t>(lv) * bw + lu] != 2) continue;
        auto exposed = [&](int nu, int nv) {
          if (nu < 0 || nv < 0 || nu >= bw || nv >= bh) return 1;
          return local[static_cast<std::size_t>(nv) * bw + nu] == 2 ? 0 : 1;
        };
        blob.filled_edges += exposed(lu - 1, lv) + exposed(lu + 1, lv) +
                             exposed(lu, lv - 1) + exposed(lu, lv + 1);
      }
    }
  }
  return blobs;
}

}  // namespace

SceneImage SceneImage::blank(int w, int h, Illumination mode, const Hsv& fill) {
  SceneImage img;
  img.width = w;
  img.height = h;
  img.mode = mode;
  img.pixels.assign(static_cast<std::size_t>(w) * h, fill);
  return img;
}

namespace {

Detection blob_to_detection(const Blob& blob, int width, DetectionKind kind) {
  Detection d;
  d.kind = kind;
  d.area = static_cast<double>(blob.pixels.size());
  double su = 0.0;
  double sv = 0.0;
  for (std::size_t i : blob.pixels) {
    su += static_cast<double>(i % static_cast<std::size_t>(width)) + 0.5;
    sv += static_cast<double>(i / static_cast<std::size_t>(width)) + 0.5;
  }
  d.centroid = {su / d.area, sv / d.area};
  d.bbox = blob.bbox;
  if (kind == DetectionKind::nir_spot) {
    d.spot_diameter = 2.0 * std::sqrt(d.area / kPi);
  }
  return d;
}

}  // namespace

std::vector<Detection> detect_candidates(const SceneImage& img,
                                         const SegmentationParams& params) {
  std::vector<char> mask(img.pixels.size(), 0);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const Hsv& p = img.pixels[i];
    const bool sand_hue = p.h >= params.sand_hue_lo && p.h <= params.sand_hue_hi;
    mask[i] = p.s >= params.s_min && !sand_hue && p.v >= params.v_floor;
  }
  const auto blobs = find_blobs(img.width, img.height, mask);

  std::vector<Detection> out;
  for (const auto& b : blobs) {
    const double area = static_cast<double>(b.pixels.size());
    if (area < params.min_area_px || area > params.max_area_px) continue;
    const double perimeter = static_cast<double>(b.filled_edges);
    const double circularity = 4.0 * kPi * area / (perimeter * perimeter);
    if (circularity < params.min_circularity) continue;
    out.push_back(blob_to_detection(b, img.width, DetectionKind::candidate_particle));
  }
  std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    if (a.area != b.area) return a.area > b.area;
    if (a.centroid.u != b.centroid.u) return a.centroid.u < b.centroid.u;
    return a.centroid.v < b.centroid.v;
  });
  return out;
}

std::optional<Detection> detect_nir_spot(const SceneImage& img,
                                         const SegmentationParams& params) {
  if (img.mode != Illumination::NIR_lamp) return std::nullopt;
  std::vector<char> mask(img.pixels.size(), 0);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    mask[i] = img.pixels[i].v >= params.spot_value_min;
  }
  const auto blobs = find_blobs(img.width, img.height, mask);

  const Blob* best = nullptr;
  for (const auto& b : blobs) {
    if (static_cast<double>(b.pixels.size()) < params.spot_min_area_px) continue;
    if (!best || b.pixels.size() > best->pixels.size()) best = &b;
  }
  if (!best) return std::nullopt;
  return blob_to_detection(*best, img.width, DetectionKind::nir_spot);
}

Rgb hsv_to_rgb(const Hsv& c) {
  const float h = c.h >= 360.0f ? c.h - 360.0f : c.h;
  const float C = c.v * c.s;
  const float hp = h / 60.0f;
  const float X = C * (1.0f - std::abs(std::fmod(hp, 2.0f) - 1.0f));
  float r = 0.0f;
  float g = 0.0f;
  float b = 0.0f;
  if (hp < 1.0f) {
    r = C; g = X;
  } else if (hp < 2.0f) {
    r = X; g = C;
  } else if (hp < 3.0f) {
    g = C; b = X;
  } else if (hp < 4.0f) {
    g = X; b = C;
  } else if (hp < 5.0f) {
    r = X; b = C;
  } else {
    r = C; b = X;
  }
  const float m = c.v - C;
  auto to8 = [](float x) {
    return static_cast<std::uint8_t>(std::clamp(x * 255.0f + 0.5f, 0.0f, 255.0f));
  };
  return {to8(r + m), to8(g + m), to8(b + m)};
}

Hsv rgb_to_hsv(const Rgb& c) {
  const float r = c.r / 255.0f;
  const float g = c.g / 255.0f;
  const float b = c.b / 255.0f;
  const float mx = std::max({r, g, b});
  const float mn = std::min({r, g, b});
  const float d = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0.0f ? d / mx : 0.0f;
  if (d <= 0.0f) {
    out.h = 0.0f;
  } else if (mx == r) {
    out.h = 60.0f * std::fmod((g - b) / d + 6.0f, 6.0f);
  } else if (mx == g) {
    out.h = 60.0f * ((b - r) / d + 2.0f);
  } else {
    out.h = 60.0f * ((r - g) / d + 4.0f);
  }
  return out;
}

void write_ppm(const SceneImage& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  for (const Hsv& p : img.pixels) {
    const Rgb c = hsv_to_rgb(p);
    f.put(static_cast<char>(c.r));
    f.put(static_cast<char>(c.g));
    f.put(static_cast<char>(c.b));
  }
}

SceneImage read_ppm(const std::string& path, Illumination mode) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw std::runtime_error("not a P6 pixmap: " + path);
  int w = 0;
  int h = 0;
  int maxval = 0;
  f >> w >> h >> maxval;
  if (maxval != 255) throw std::runtime_error("unsupported pixmap depth");
  f.get();  // single whitespace after header
  SceneImage img = SceneImage::blank(w, h, mode);
  for (auto& p : img.pixels) {
    Rgb c;
    c.r = static_cast<std::uint8_t>(f.get());
    c.g = static_cast<std::uint8_t>(f.get());
    c.b = static_cast<std::uint8_t>(f.get());
    p = rgb_to_hsv(c);
  }
  if (!f) throw std::runtime_error("truncated pixmap: " + path);
  return img;
}

}  // namespace mps
