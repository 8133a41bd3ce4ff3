#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpsurvey/spectra.hpp"

namespace mps {

struct SpectrumMeta {
  double snr = 0.0;
  bool interferant = false;
};

struct LabeledSpectrum {
  Spectrum absorbance;
  std::string label;
  SpectrumMeta meta;
};

enum class SvmVariant { SVM3, SVM3_I };

const char* to_string(SvmVariant v);
SvmVariant variant_from_string(const std::string& s);

class TrainingFailure : public std::runtime_error {
 public:
  TrainingFailure(const std::string& subproblem, const std::string& what)
      : std::runtime_error("SVM sub-problem " + subproblem + ": " + what),
        subproblem_(subproblem) {}
  const std::string& subproblem() const { return subproblem_; }

 private:
  std::string subproblem_;
};

struct StandardScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  void fit(const std::vector<std::vector<double>>& rows);
  void apply(std::vector<double>& row) const;
};

// One binary one-vs-one sub-problem; decision > 0 votes for class_a.
struct BinarySvm {
  int class_a = 0;
  int class_b = 0;
  std::vector<std::vector<double>> support_vectors;  // standardized features
  std::vector<double> coeffs;                        // alpha_i * y_i
  double bias = 0.0;
};

struct Prediction {
  std::string label;
  double margin = 0.0;  // winner vote share, in [0, 1]
};

struct TrainOptions {
  double C = 10.0;
  double kkt_tolerance = 1e-3;
  std::uint64_t max_steps = 2'000'000;  // pair-optimization step cap per sub-problem
};

class TrainedClassifier {
 public:
  static constexpr int kKernelDegree = 3;

  // Cubic kernel (1 + <x,y>/N)^3 over standardized features.
  static double kernel(const std::vector<double>& x, const std::vector<double>& y);

  Prediction predict(const Spectrum& absorbance_spectrum) const;
  Prediction predict_features(const std::vector<double>& raw_features) const;

  // Per-class summed decision values for the given raw features (test hook
  // and tie-break evidence).
  std::vector<double> class_decision_sums(const std::vector<double>& raw_features) const;

  const std::vector<std::string>& classes() const { return classes_; }
  SvmVariant variant() const { return variant_; }
  const GridPtr& grid() const { return grid_; }
  const std::vector<BinarySvm>& pairs() const { return pairs_; }

  std::string to_json() const;
  static TrainedClassifier from_json(const std::string& text);
  void save(const std::string& path) const;
  static TrainedClassifier load(const std::string& path);

  friend TrainedClassifier train(const std::vector<LabeledSpectrum>& dataset,
                                 SvmVariant variant, const TrainOptions& opts,
                                 std::uint64_t seed);

 private:
  GridPtr grid_;
  SvmVariant variant_ = SvmVariant::SVM3;
  double c_ = 10.0;
  StandardScaler scaler_;
  std::vector<std::string> classes_;
  std::vector<BinarySvm> pairs_;
};

// One-vs-one cubic SVMs fitted by sequential minimal optimization. The
// dataset is canonicalized (sorted) and then shuffled with the seed, so the
// result is bit-reproducible and independent of input row order. The SVM3
// variant drops interferant-flagged rows; SVM3+I keeps them.
TrainedClassifier train(const std::vector<LabeledSpectrum>& dataset, SvmVariant variant,
                        const TrainOptions& opts = {}, std::uint64_t seed = 1);

struct ConfusionMatrix {
  std::vector<std::string> row_labels;  // actual classes present in the testset
  std::vector<std::string> col_labels;  // model classes
  std::vector<std::vector<int>> counts;

  std::vector<std::vector<double>> row_normalized() const;
  void write_csv(std::ostream& out) const;
};

struct PerClassErrors {
  int true_positive = 0;
  int false_positive = 0;
  int false_negative = 0;
};

struct EvalReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  std::map<std::string, PerClassErrors> per_class;
};

EvalReport evaluate(const TrainedClassifier& model,
                    const std::vector<LabeledSpectrum>& testset);

// ---- synthetic dataset generation (bench-style measurements) ----

struct DatasetParams {
  GridPtr grid;
  std::vector<double> snrs = {500.0, 2000.0, 15000.0};
  int clean_train_per_class = 6;
  int clean_test_per_class = 4;
  std::vector<double> interferant_weights = {0.1, 0.2, 0.3};
  int contaminated_train_per_combo = 1;
  int contaminated_test_per_combo = 1;
  // Partial sand coverage happens on every field measurement, so both
  // variants train with sand-diluted rows (not flagged as interferant).
  std::vector<double> sand_dilution_weights = {0.2, 0.4};
  int sand_dilution_train_per_combo = 1;
  // Focus-gain jitter on training rows: collimating lenses are never
  // perfectly aligned in the field, which shifts the log-ratio baseline.
  double min_focus_gain = 0.85;
  double counts_scale = 30000.0;
  double dark_floor = 4000.0;
  bool include_sand_class = true;
  std::uint64_t seed = 1;
};

struct Dataset {
  std::vector<LabeledSpectrum> train;
  std::vector<LabeledSpectrum> test;
};

// Simulates the acquisition chain for one sample: raw counts for the mixed
// reflectance, a sand reference and a dark floor, each with Gaussian noise at
// the given SNR, then the dark-corrected log-ratio absorbance. sample_gain
// models imperfect lens focus on the sample relative to the reference.
Spectrum measure_absorbance(const Spectrum& reflectance, const Spectrum& sand_reflectance,
                            double snr, double counts_scale, double dark_floor,
                            std::uint64_t seed, double sample_gain = 1.0);

Dataset make_dataset(const SpectralLibrary& library, const DatasetParams& params);

void save_dataset(const std::vector<LabeledSpectrum>& data, const std::string& dir);
std::vector<LabeledSpectrum> load_dataset(const std::string& dir);

}  // namespace mps
