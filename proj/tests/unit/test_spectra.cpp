#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "mpsurvey/spectra.hpp"

using namespace mps;

namespace {

Spectrum flat(GridPtr grid, double level, SpectrumRole role) {
  Spectrum s;
  s.grid = grid;
  s.role = role;
  s.intensities.assign(grid->size(), level);
  return s;
}

}  // namespace

TEST_CASE("wavelength grid invariants") {
  CHECK_THROWS_AS(WavelengthGrid({1000.0, 999.0}), std::invalid_argument);
  CHECK_THROWS_AS(WavelengthGrid({800.0, 1000.0}), std::invalid_argument);
  const auto g = WavelengthGrid::standard();
  CHECK(g->size() == 512);
  CHECK(g->points().front() == doctest::Approx(900.0));
  CHECK(g->points().back() == doctest::Approx(1700.0));
  CHECK(g->nearest_index(1200.0) ==
        g->nearest_index(g->points()[g->nearest_index(1200.0)]));
}

TEST_CASE("synthesize_reflectance") {
  const auto grid = WavelengthGrid::standard();

  SUBCASE("no bands gives the flat baseline") {
    MaterialSignature sig;
    sig.material = "blank";
    sig.baseline = 0.8;
    const Spectrum s = synthesize_reflectance(sig, grid);
    for (double v : s.intensities) CHECK(v == doctest::Approx(0.8));
  }

  SUBCASE("single band puts the minimum at the nearest grid point") {
    MaterialSignature sig;
    sig.material = "one";
    sig.baseline = 1.0;
    sig.bands = {{1200.0, 20.0, 0.4}};
    const Spectrum s = synthesize_reflectance(sig, grid);
    std::size_t argmin = 0;
    for (std::size_t i = 1; i < s.intensities.size(); ++i) {
      if (s.intensities[i] < s.intensities[argmin]) argmin = i;
    }
    CHECK(argmin == grid->nearest_index(1200.0));
  }

  SUBCASE("PP and PET differ") {
    const auto lib = SpectralLibrary::builtin();
    const Spectrum a = synthesize_reflectance(lib.at("PP"), grid);
    const Spectrum b = synthesize_reflectance(lib.at("PET"), grid);
    double l2 = 0.0;
    for (std::size_t i = 0; i < a.intensities.size(); ++i) {
      const double d = a.intensities[i] - b.intensities[i];
      l2 += d * d;
    }
    CHECK(std::sqrt(l2) > 0.0);
  }
}

TEST_CASE("built-in library passes its own validation") {
  const auto lib = SpectralLibrary::builtin();
  CHECK_NOTHROW(lib.validate(*WavelengthGrid::standard()));
  CHECK(lib.materials().size() == 16);
  for (const auto& name : SpectralLibrary::solid_materials()) CHECK(lib.contains(name));
  for (const auto& name : SpectralLibrary::interferants()) CHECK(lib.contains(name));
  CHECK(lib.contains("sand"));
}

TEST_CASE("add_noise") {
  const auto grid = WavelengthGrid::standard();
  const Spectrum clean = flat(grid, 10000.0, SpectrumRole::sample);

  SUBCASE("infinite snr flag returns the input unchanged") {
    const Spectrum s = add_noise(clean, kInfiniteSnr, 3);
    CHECK(s.intensities == clean.intensities);
    const Spectrum s2 = add_noise(clean, std::numeric_limits<double>::infinity(), 3);
    CHECK(s2.intensities == clean.intensities);
  }

  SUBCASE("same seed is bit-identical, different seed is not") {
    const Spectrum a = add_noise(clean, 15000.0, 42);
    const Spectrum b = add_noise(clean, 15000.0, 42);
    const Spectrum c = add_noise(clean, 15000.0, 43);
    CHECK(a.intensities == b.intensities);
    CHECK(a.intensities != c.intensities);
  }

  SUBCASE("empirical sigma tracks mean/snr at 15000:1") {
    // ~10k draws across 20 seeded spectra.
    double sum_sq = 0.0;
    std::size_t n = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Spectrum noisy = add_noise(clean, 15000.0, 1000 + seed);
      for (std::size_t i = 0; i < noisy.intensities.size(); ++i) {
        const double d = noisy.intensities[i] - clean.intensities[i];
        sum_sq += d * d;
        ++n;
      }
    }
    const double sigma = std::sqrt(sum_sq / static_cast<double>(n));
    const double expected = 10000.0 / 15000.0;
    CHECK(sigma == doctest::Approx(expected).epsilon(0.10));
  }

  SUBCASE("non-positive snr rejected") {
    CHECK_THROWS_AS(add_noise(clean, 0.0, 1), std::invalid_argument);
  }
}

TEST_CASE("absorbance identities") {
  const auto grid = WavelengthGrid::standard();
  const Spectrum dark = flat(grid, 100.0, SpectrumRole::dark);
  const Spectrum reference = flat(grid, 1100.0, SpectrumRole::reference);

  SUBCASE("sample equal to reference gives zero absorbance") {
    const AbsorbanceResult r = absorbance(reference, dark, reference);
    CHECK(r.valid);
    CHECK(r.masked == 0);
    for (double v : r.spectrum.intensities) CHECK(std::abs(v) <= 1e-12);
  }

  SUBCASE("a tenth of the reference signal gives absorbance one") {
    const Spectrum sample = flat(grid, 200.0, SpectrumRole::sample);  // num = 100 = den/10
    const AbsorbanceResult r = absorbance(sample, dark, reference);
    CHECK(r.valid);
    for (double v : r.spectrum.intensities) CHECK(std::abs(v - 1.0) <= 1e-12);
  }

  SUBCASE("sample at the dark level masks out entirely") {
    const Spectrum sample = flat(grid, 100.0, SpectrumRole::sample);
    const AbsorbanceResult r = absorbance(sample, dark, reference);
    CHECK_FALSE(r.valid);
    CHECK(r.masked == grid->size());
    for (double v : r.spectrum.intensities) CHECK(std::isnan(v));
  }

  SUBCASE("masked fraction below the threshold stays valid") {
    Spectrum sample = flat(grid, 600.0, SpectrumRole::sample);
    for (std::size_t i = 0; i < 51; ++i) sample.intensities[i] = 50.0;  // < dark
    const AbsorbanceResult r = absorbance(sample, dark, reference);
    CHECK(r.masked == 51);
    CHECK(r.valid);  // 51/512 < 20%
    Spectrum worse = sample;
    for (std::size_t i = 0; i < 105; ++i) worse.intensities[i] = 50.0;
    CHECK_FALSE(absorbance(worse, dark, reference).valid);
  }

  SUBCASE("grid mismatch rejected") {
    const auto other = WavelengthGrid::uniform(256, 900.0, 1700.0);
    const Spectrum sample = flat(other, 500.0, SpectrumRole::sample);
    CHECK_THROWS_AS(absorbance(sample, dark, reference), std::invalid_argument);
  }

  SUBCASE("invariant under common positive rescaling") {
    const auto lib = SpectralLibrary::builtin();
    Spectrum sample = synthesize_reflectance(lib.at("PP"), grid);
    Spectrum ref2 = synthesize_reflectance(lib.at("sand"), grid);
    Spectrum zero = flat(grid, 0.0, SpectrumRole::dark);
    const AbsorbanceResult base = absorbance(sample, zero, ref2);
    Spectrum sample_scaled = sample;
    Spectrum ref_scaled = ref2;
    for (double& v : sample_scaled.intensities) v *= 37.5;
    for (double& v : ref_scaled.intensities) v *= 37.5;
    const AbsorbanceResult scaled = absorbance(sample_scaled, zero, ref_scaled);
    for (std::size_t i = 0; i < base.spectrum.intensities.size(); ++i) {
      CHECK(base.spectrum.intensities[i] ==
            doctest::Approx(scaled.spectrum.intensities[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("mix_spectra") {
  const auto grid = WavelengthGrid::standard();
  const Spectrum a = flat(grid, 2.0, SpectrumRole::sample);
  const Spectrum b = flat(grid, 4.0, SpectrumRole::sample);

  SUBCASE("single part with weight one is the identity") {
    const Spectrum m = mix_spectra({{a, 1.0}});
    CHECK(m.intensities == a.intensities);
  }

  SUBCASE("equal mix of flats is the average") {
    const Spectrum m = mix_spectra({{a, 0.5}, {b, 0.5}});
    for (double v : m.intensities) CHECK(v == doctest::Approx(3.0));
  }

  SUBCASE("weights must sum to one") {
    CHECK_THROWS_AS(mix_spectra({{a, 0.5}, {b, 0.6}}), std::invalid_argument);
    CHECK_THROWS_AS(mix_spectra({{a, -0.5}, {b, 1.5}}), std::invalid_argument);
  }

  SUBCASE("absorbance of a mix differs from the mix of absorbances") {
    const auto lib = SpectralLibrary::builtin();
    const Spectrum pp = synthesize_reflectance(lib.at("PP"), grid);
    const Spectrum water = synthesize_reflectance(lib.at("water"), grid);
    const Spectrum sand = synthesize_reflectance(lib.at("sand"), grid);
    const Spectrum zero = flat(grid, 0.0, SpectrumRole::dark);

    const Spectrum mixed = mix_spectra({{pp, 0.5}, {water, 0.5}});
    const Spectrum a_of_mix = absorbance(mixed, zero, sand).spectrum;
    const Spectrum a_pp = absorbance(pp, zero, sand).spectrum;
    const Spectrum a_water = absorbance(water, zero, sand).spectrum;
    const Spectrum mix_of_a = mix_spectra({{a_pp, 0.5}, {a_water, 0.5}});

    double diff = 0.0;
    for (std::size_t i = 0; i < a_of_mix.intensities.size(); ++i) {
      diff = std::max(diff, std::abs(a_of_mix.intensities[i] - mix_of_a.intensities[i]));
    }
    CHECK(diff > 1e-4);  // log nonlinearity
  }
}

TEST_CASE("nearest-centroid separability of the noiseless library") {
  const auto grid = WavelengthGrid::standard();
  const auto lib = SpectralLibrary::builtin();
  const Spectrum sand = synthesize_reflectance(lib.at("sand"), grid);
  const Spectrum zero = flat(grid, 0.0, SpectrumRole::dark);

  std::vector<std::string> names = lib.materials();
  std::vector<Spectrum> centroids;
  for (const auto& name : names) {
    centroids.push_back(
        absorbance(synthesize_reflectance(lib.at(name), grid), zero, sand).spectrum);
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < names.size(); ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < centroids[i].intensities.size(); ++k) {
        const double diff = centroids[i].intensities[k] - centroids[j].intensities[k];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    CHECK(best == i);
  }
}

TEST_CASE("spectrum CSV round trip with fixed header") {
  const auto grid = WavelengthGrid::standard();
  const auto lib = SpectralLibrary::builtin();
  const Spectrum s = synthesize_reflectance(lib.at("nylon"), grid);
  std::ostringstream out;
  write_spectrum_csv(s, out);
  CHECK(out.str().rfind("wavelength_nm,intensity\n", 0) == 0);
  std::istringstream in(out.str());
  const Spectrum back = read_spectrum_csv(in, SpectrumRole::sample);
  REQUIRE(back.intensities.size() == s.intensities.size());
  for (std::size_t i = 0; i < s.intensities.size(); ++i) {
    CHECK(back.intensities[i] == s.intensities[i]);
  }
}

TEST_CASE("library JSON round trip") {
  const auto lib = SpectralLibrary::builtin();
  const auto round = SpectralLibrary::from_json(lib.to_json());
  CHECK(round.materials() == lib.materials());
  const auto& a = lib.at("PVC");
  const auto& b = round.at("PVC");
  CHECK(a.baseline == b.baseline);
  REQUIRE(a.bands.size() == b.bands.size());
  for (std::size_t i = 0; i < a.bands.size(); ++i) {
    CHECK(a.bands[i].center_nm == b.bands[i].center_nm);
    CHECK(a.bands[i].amplitude == b.bands[i].amplitude);
  }
}

TEST_CASE("band_contrast is a robust spread") {
  const auto grid = WavelengthGrid::standard();
  Spectrum flat_a = flat(grid, 0.0, SpectrumRole::absorbance);
  CHECK(band_contrast(flat_a) == doctest::Approx(0.0));
  flat_a.intensities[100] = 5.0;  // single outlier barely moves the 98th percentile
  CHECK(band_contrast(flat_a) < 0.2);
  Spectrum structured = flat_a;
  for (std::size_t i = 200; i < 260; ++i) structured.intensities[i] = 0.4;
  CHECK(band_contrast(structured) >= 0.3);
}
