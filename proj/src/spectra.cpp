#include "mpsurvey/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mpsurvey/seeding.hpp"

namespace mps {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

WavelengthGrid::WavelengthGrid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.size() < 2) {
    throw std::invalid_argument("wavelength grid needs at least two points");
  }
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    if (!(points_[i] < points_[i + 1])) {
      throw std::invalid_argument("wavelength grid must be strictly increasing");
    }
  }
  if (points_.front() < 900.0 || points_.back() > 1700.0) {
    throw std::invalid_argument("wavelength grid must lie within [900, 1700] nm");
  }
}

GridPtr WavelengthGrid::uniform(std::size_t n, double lo_nm, double hi_nm) {
  std::vector<double> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = lo_nm + (hi_nm - lo_nm) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return std::make_shared<const WavelengthGrid>(std::move(pts));
}

GridPtr WavelengthGrid::standard() {
  static const GridPtr grid = uniform(512, 900.0, 1700.0);
  return grid;
}

double WavelengthGrid::spacing() const {
  return (points_.back() - points_.front()) / static_cast<double>(points_.size() - 1);
}

std::size_t WavelengthGrid::nearest_index(double wavelength_nm) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), wavelength_nm);
  if (it == points_.begin()) return 0;
  if (it == points_.end()) return points_.size() - 1;
  const std::size_t hi = static_cast<std::size_t>(it - points_.begin());
  return (wavelength_nm - points_[hi - 1] <= points_[hi] - wavelength_nm) ? hi - 1 : hi;
}

const char* to_string(SpectrumRole role) {
  switch (role) {
    case SpectrumRole::dark: return "dark";
    case SpectrumRole::reference: return "reference";
    case SpectrumRole::sample: return "sample";
    case SpectrumRole::absorbance: return "absorbance";
  }
  return "sample";
}

SpectrumRole role_from_string(const std::string& s) {
  if (s == "dark") return SpectrumRole::dark;
  if (s == "reference") return SpectrumRole::reference;
  if (s == "sample") return SpectrumRole::sample;
  if (s == "absorbance") return SpectrumRole::absorbance;
  throw std::invalid_argument("unknown spectrum role: " + s);
}

double Spectrum::mean() const {
  if (intensities.empty()) return 0.0;
  double sum = 0.0;
  for (double v : intensities) sum += v;
  return sum / static_cast<double>(intensities.size());
}

bool Spectrum::same_grid(const Spectrum& other) const {
  if (!grid || !other.grid) return false;
  return grid == other.grid || *grid == *other.grid;
}

void Spectrum::validate() const {
  if (!grid) throw std::invalid_argument("spectrum has no grid");
  if (intensities.size() != grid->size()) {
    throw std::invalid_argument("spectrum length does not match grid");
  }
  if (role != SpectrumRole::absorbance) {
    for (double v : intensities) {
      if (!(v >= 0.0)) throw std::invalid_argument("intensities must be non-negative");
    }
  }
}

const MaterialSignature& SpectralLibrary::at(const std::string& material) const {
  auto it = entries_.find(material);
  if (it == entries_.end()) {
    throw std::out_of_range("unknown material: " + material);
  }
  return it->second;
}

bool SpectralLibrary::contains(const std::string& material) const {
  return entries_.count(material) != 0;
}

void SpectralLibrary::insert(MaterialSignature sig) {
  entries_[sig.material] = std::move(sig);
}

std::vector<std::string> SpectralLibrary::materials() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, sig] : entries_) out.push_back(name);
  return out;
}

const std::vector<std::string>& SpectralLibrary::solid_materials() {
  static const std::vector<std::string> names = {
      "PP",     "PET",       "PVC",  "PS",   "nylon",     "PLA",  "HDPE",
      "LDPE",   "rubber",    "cardboard", "wood", "bark", "dry_grass"};
  return names;
}

const std::vector<std::string>& SpectralLibrary::interferants() {
  static const std::vector<std::string> names = {"water", "plant_matter"};
  return names;
}

SpectralLibrary SpectralLibrary::builtin() {
  SpectralLibrary lib;
  auto add = [&lib](const char* name, double baseline,
                    std::initializer_list<OvertoneBand> bands) {
    MaterialSignature sig;
    sig.material = name;
    sig.baseline = baseline;
    sig.bands.assign(bands);
    lib.insert(std::move(sig));
  };

  // Polymers: narrow overtone bands, bright baselines.
  add("PP", 0.88, {{1195, 18, 0.32}, {1390, 22, 0.20}, {1660, 25, 0.26}});
  add("PET", 0.86, {{1130, 16, 0.28}, {1415, 20, 0.24}, {1640, 22, 0.22}});
  add("PVC", 0.84, {{1160, 15, 0.30}, {1425, 24, 0.18}, {1690, 24, 0.20}});
  add("PS", 0.87, {{1145, 14, 0.26}, {1210, 16, 0.17}, {1675, 20, 0.28}});
  add("nylon", 0.82, {{1060, 20, 0.22}, {1485, 26, 0.30}, {1620, 22, 0.18}});
  add("PLA", 0.85, {{1105, 16, 0.24}, {1370, 20, 0.22}, {1450, 18, 0.14}});
  add("HDPE", 0.90, {{1175, 14, 0.34}, {1350, 18, 0.14}, {1565, 20, 0.18}});
  add("LDPE", 0.89, {{1215, 15, 0.30}, {1335, 18, 0.12}, {1585, 20, 0.20}});
  // Organics and background: broader, weaker structure.
  add("rubber", 0.45, {{1080, 30, 0.15}, {1260, 35, 0.18}, {1650, 40, 0.12}});
  add("cardboard", 0.70, {{1200, 40, 0.12}, {1490, 45, 0.22}});
  add("wood", 0.62, {{1170, 45, 0.10}, {1460, 50, 0.20}, {1680, 45, 0.12}});
  add("bark", 0.50, {{1120, 50, 0.10}, {1440, 55, 0.16}});
  add("dry_grass", 0.66, {{1250, 45, 0.10}, {1505, 40, 0.15}});
  add("sand", 0.75, {{1000, 80, 0.03}, {1385, 65, 0.055}});
  // Interferants: the broad 1440-1450 nm structure deliberately overlaps
  // several polymer bands, which is what makes contamination confusable.
  add("water", 0.55, {{1150, 45, 0.12}, {1440, 55, 0.42}});
  add("plant_matter", 0.60, {{1205, 40, 0.12}, {1450, 50, 0.30}, {1680, 35, 0.10}});
  return lib;
}

void SpectralLibrary::validate(const WavelengthGrid& grid) const {
  const double min_sep = 2.0 * grid.spacing();
  const auto& lo = grid.points().front();
  const auto& hi = grid.points().back();
  for (const auto& [name, sig] : entries_) {
    if (sig.baseline <= 0.0) {
      throw std::invalid_argument("baseline must be positive for " + name);
    }
    for (const auto& b : sig.bands) {
      if (b.amplitude <= 0.0) {
        throw std::invalid_argument("band amplitude must be positive for " + name);
      }
      if (b.center_nm < lo || b.center_nm > hi) {
        throw std::invalid_argument("band center off grid for " + name);
      }
    }
  }
  // Every polymer pair must be separated by at least one band center that has
  // no counterpart within two grid spacings in the other signature.
  static const std::vector<std::string> plastics = {"PP",   "PET",  "PVC",  "PS",
                                                    "nylon", "PLA", "HDPE", "LDPE"};
  for (std::size_t i = 0; i < plastics.size(); ++i) {
    for (std::size_t j = i + 1; j < plastics.size(); ++j) {
      if (!contains(plastics[i]) || !contains(plastics[j])) continue;
      const auto& a = at(plastics[i]).bands;
      const auto& b = at(plastics[j]).bands;
      bool separated = false;
      for (const auto& ba : a) {
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& bb : b) {
          nearest = std::min(nearest, std::abs(ba.center_nm - bb.center_nm));
        }
        if (nearest > min_sep) separated = true;
      }
      if (!separated) {
        throw std::invalid_argument("plastic signatures too close: " + plastics[i] +
                                    " vs " + plastics[j]);
      }
    }
  }
}

Spectrum synthesize_reflectance(const MaterialSignature& sig, GridPtr grid) {
  if (!grid) throw std::invalid_argument("null grid");
  Spectrum s;
  s.grid = grid;
  s.role = SpectrumRole::sample;
  s.intensities.resize(grid->size());
  const auto& pts = grid->points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double v = sig.baseline;
    for (const auto& b : sig.bands) {
      const double t = (pts[i] - b.center_nm) / b.width_nm;
      v -= b.amplitude * std::exp(-0.5 * t * t);
    }
    s.intensities[i] = std::max(0.0, v);
  }
  return s;
}

Spectrum add_noise(const Spectrum& s, double snr, std::uint64_t seed) {
  if (snr == kInfiniteSnr || std::isinf(snr)) {
    return s;
  }
  if (!(snr > 0.0)) throw std::invalid_argument("snr must be positive");
  Spectrum out = s;
  const double sigma = s.mean() / snr;
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (double& v : out.intensities) {
    v += gauss(rng);
    if (out.role != SpectrumRole::absorbance) v = std::max(0.0, v);
  }
  return out;
}

AbsorbanceResult absorbance(const Spectrum& sample, const Spectrum& dark,
                            const Spectrum& reference) {
  if (!sample.same_grid(dark) || !sample.same_grid(reference)) {
    throw std::invalid_argument("absorbance inputs must share one grid");
  }
  AbsorbanceResult res;
  res.spectrum.grid = sample.grid;
  res.spectrum.role = SpectrumRole::absorbance;
  res.spectrum.intensities.resize(sample.intensities.size());
  for (std::size_t i = 0; i < sample.intensities.size(); ++i) {
    const double num = sample.intensities[i] - dark.intensities[i];
    const double den = reference.intensities[i] - dark.intensities[i];
    if (num <= 0.0 || den <= 0.0) {
      res.spectrum.intensities[i] = kNan;
      ++res.masked;
    } else {
      res.spectrum.intensities[i] = -std::log10(num / den);
    }
  }
  res.valid = res.masked_fraction() <= kMaskedFractionLimit;
  return res;
}

Spectrum mix_spectra(const std::vector<std::pair<Spectrum, double>>& parts) {
  if (parts.empty()) throw std::invalid_argument("mix_spectra needs at least one part");
  double total = 0.0;
  for (const auto& [s, w] : parts) {
    if (w < 0.0) throw std::invalid_argument("mix weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("mix weights must sum to 1 within 1e-9");
  }
  Spectrum out = parts.front().first;
  for (double& v : out.intensities) v *= parts.front().second;
  for (std::size_t k = 1; k < parts.size(); ++k) {
    if (!out.same_grid(parts[k].first)) {
      throw std::invalid_argument("mix_spectra inputs must share one grid");
    }
    const auto& src = parts[k].first.intensities;
    for (std::size_t i = 0; i < src.size(); ++i) {
      out.intensities[i] += parts[k].second * src[i];
    }
  }
  return out;
}

double band_contrast(const Spectrum& absorbance_spectrum) {
  std::vector<double> finite;
  finite.reserve(absorbance_spectrum.intensities.size());
  for (double v : absorbance_spectrum.intensities) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  if (finite.size() < 8) return 0.0;
  auto pct = [&finite](double p) {
    const std::size_t k =
        static_cast<std::size_t>(p * static_cast<double>(finite.size() - 1));
    std::nth_element(finite.begin(), finite.begin() + static_cast<long>(k), finite.end());
    return finite[k];
  };
  const double hi = pct(0.98);
  const double lo = pct(0.02);
  return hi - lo;
}

void write_spectrum_csv(const Spectrum& s, std::ostream& out) {
  out << "wavelength_nm,intensity\n";
  const auto& pts = s.grid->points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out << format_double(pts[i]) << ',' << format_double(s.intensities[i]) << '\n';
  }
}

void write_spectrum_csv(const Spectrum& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  write_spectrum_csv(s, f);
}

Spectrum read_spectrum_csv(std::istream& in, SpectrumRole role) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("wavelength_nm,intensity", 0) != 0) {
    throw std::runtime_error("spectrum CSV missing header row");
  }
  std::vector<double> wl;
  std::vector<double> inten;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("malformed spectrum CSV row");
    wl.push_back(std::stod(line.substr(0, comma)));
    inten.push_back(std::stod(line.substr(comma + 1)));
  }
  Spectrum s;
  s.grid = std::make_shared<const WavelengthGrid>(std::move(wl));
  s.intensities = std::move(inten);
  s.role = role;
  return s;
}

Spectrum read_spectrum_csv(const std::string& path, SpectrumRole role) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  return read_spectrum_csv(f, role);
}

std::string SpectralLibrary::to_json() const {
  nlohmann::json doc;
  auto& mats = doc["materials"];
  for (const auto& [name, sig] : entries_) {
    nlohmann::json entry;
    entry["baseline"] = sig.baseline;
    for (const auto& b : sig.bands) {
      entry["bands"].push_back(
          {{"center_nm", b.center_nm}, {"width_nm", b.width_nm}, {"amplitude", b.amplitude}});
    }
    mats[name] = std::move(entry);
  }
  return doc.dump(2);
}

SpectralLibrary SpectralLibrary::from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text, nullptr, true, /*ignore_comments=*/true);
  SpectralLibrary lib;
  for (const auto& [name, entry] : doc.at("materials").items()) {
    MaterialSignature sig;
    sig.material = name;
    sig.baseline = entry.at("baseline").get<double>();
    if (entry.contains("bands")) {
      for (const auto& b : entry.at("bands")) {
        sig.bands.push_back({b.at("center_nm").get<double>(), b.at("width_nm").get<double>(),
                             b.at("amplitude").get<double>()});
      }
    }
    lib.insert(std::move(sig));
  }
  return lib;
}

void SpectralLibrary::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << to_json() << '\n';
}

SpectralLibrary SpectralLibrary::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return from_json(buf.str());
}

}  // namespace mps
