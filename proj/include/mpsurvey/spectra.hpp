#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace mps {

class WavelengthGrid {
 public:
  WavelengthGrid(std::vector<double> points);

  static std::shared_ptr<const WavelengthGrid> uniform(std::size_t n, double lo_nm,
                                                       double hi_nm);
  // 512 points over 900-1700 nm.
  static std::shared_ptr<const WavelengthGrid> standard();

  const std::vector<double>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double spacing() const;  // mean spacing
  std::size_t nearest_index(double wavelength_nm) const;

  bool operator==(const WavelengthGrid& other) const { return points_ == other.points_; }

 private:
  std::vector<double> points_;
};

using GridPtr = std::shared_ptr<const WavelengthGrid>;

enum class SpectrumRole { dark, reference, sample, absorbance };

const char* to_string(SpectrumRole role);
SpectrumRole role_from_string(const std::string& s);

// Intensity samples on a shared wavelength grid. Masked absorbance points are
// stored as NaN.
struct Spectrum {
  GridPtr grid;
  std::vector<double> intensities;
  SpectrumRole role = SpectrumRole::sample;

  double mean() const;
  bool same_grid(const Spectrum& other) const;
  void validate() const;
};

struct OvertoneBand {
  double center_nm = 0.0;
  double width_nm = 0.0;
  double amplitude = 0.0;
};

struct MaterialSignature {
  std::string material;
  double baseline = 1.0;  // reflectance level away from the bands
  std::vector<OvertoneBand> bands;
};

// Seeded synthetic signature set: 13 solid materials, sand, and the two
// interferants (water, plant_matter). Stand-in for measured polymer spectra;
// band placement is synthetic and claims no chemical fidelity.
class SpectralLibrary {
 public:
  static SpectralLibrary builtin();

  const MaterialSignature& at(const std::string& material) const;
  bool contains(const std::string& material) const;
  void insert(MaterialSignature sig);
  std::vector<std::string> materials() const;
  const std::map<std::string, MaterialSignature>& entries() const { return entries_; }

  // Material names excluding the interferants and sand (the 13 classifiable
  // solids); classifier class sets build on these plus sand.
  static const std::vector<std::string>& solid_materials();
  static const std::vector<std::string>& interferants();

  std::string to_json() const;
  static SpectralLibrary from_json(const std::string& text);
  void save(const std::string& path) const;
  static SpectralLibrary load(const std::string& path);

  // Pairwise plastic band-center separation and band sanity checks.
  void validate(const WavelengthGrid& grid) const;

 private:
  std::map<std::string, MaterialSignature> entries_;
};

// Baseline minus the sum of Gaussian absorption bands, clipped at zero.
Spectrum synthesize_reflectance(const MaterialSignature& sig, GridPtr grid);

constexpr double kInfiniteSnr = -1.0;  // flag: add_noise returns the input unchanged

// Zero-mean Gaussian noise with sigma = mean(intensities)/snr; non-absorbance
// roles are clipped at zero afterwards. Deterministic per seed.
Spectrum add_noise(const Spectrum& s, double snr, std::uint64_t seed);

struct AbsorbanceResult {
  Spectrum spectrum;        // role absorbance, masked points NaN
  std::size_t masked = 0;
  bool valid = false;       // masked fraction <= threshold

  double masked_fraction() const {
    return spectrum.intensities.empty()
               ? 1.0
               : static_cast<double>(masked) / static_cast<double>(spectrum.intensities.size());
  }
};

inline constexpr double kMaskedFractionLimit = 0.20;

// A = -log10((sample - dark) / (reference - dark)) pointwise. Points with a
// non-positive numerator or denominator are masked; the whole measurement is
// invalid once more than 20% of points mask out.
AbsorbanceResult absorbance(const Spectrum& sample, const Spectrum& dark,
                            const Spectrum& reference);

// Convex combination of spectra on a shared grid; weights must sum to 1
// within 1e-9.
Spectrum mix_spectra(const std::vector<std::pair<Spectrum, double>>& parts);

// Robust band contrast of an absorbance spectrum: spread between the 2nd and
// 98th percentile of finite values. Zero if fewer than 8 points are finite.
double band_contrast(const Spectrum& absorbance_spectrum);

// CSV with fixed header "wavelength_nm,intensity".
void write_spectrum_csv(const Spectrum& s, std::ostream& out);
void write_spectrum_csv(const Spectrum& s, const std::string& path);
Spectrum read_spectrum_csv(std::istream& in, SpectrumRole role);
Spectrum read_spectrum_csv(const std::string& path, SpectrumRole role);

}  // namespace mps
