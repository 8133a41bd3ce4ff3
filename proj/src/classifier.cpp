#include "mpsurvey/classifier.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mpsurvey/seeding.hpp"

namespace mps {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Platt-style SMO for one binary sub-problem. Deterministic: candidate scans
// start at index 0 and the max-|E1-E2| heuristic breaks ties on the lower
// index.
class SmoSolver {
 public:
  SmoSolver(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys,
            const TrainOptions& opts, std::string subproblem)
      : xs_(xs), ys_(ys), opts_(opts), subproblem_(std::move(subproblem)) {
    const std::size_t n = xs_.size();
    gram_.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        const double k = TrainedClassifier::kernel(xs_[i], xs_[j]);
        gram_[i][j] = k;
        gram_[j][i] = k;
      }
    }
    alpha_.assign(n, 0.0);
    errors_.resize(n);
    for (std::size_t i = 0; i < n; ++i) errors_[i] = -ys_[i];
  }

  void solve() {
    std::size_t num_changed = 0;
    bool examine_all = true;
    while (num_changed > 0 || examine_all) {
      num_changed = 0;
      if (examine_all) {
        for (std::size_t i = 0; i < xs_.size(); ++i) num_changed += examine(i);
      } else {
        for (std::size_t i = 0; i < xs_.size(); ++i) {
          if (alpha_[i] > 0.0 && alpha_[i] < opts_.C) num_changed += examine(i);
        }
      }
      if (examine_all) {
        examine_all = false;
      } else if (num_changed == 0) {
        examine_all = true;
      }
    }
  }

  const std::vector<double>& alphas() const { return alpha_; }
  double bias() const { return bias_; }

 private:
  std::size_t examine(std::size_t i2) {
    const double y2 = ys_[i2];
    const double a2 = alpha_[i2];
    const double e2 = errors_[i2];
    const double r2 = e2 * y2;
    const bool violates = (r2 < -opts_.kkt_tolerance && a2 < opts_.C) ||
                          (r2 > opts_.kkt_tolerance && a2 > 0.0);
    if (!violates) return 0;

    // Second-choice heuristic: largest |E1 - E2| among non-bound points.
    std::size_t best = i2;
    double best_gap = -1.0;
    for (std::size_t i = 0; i < xs_.size(); ++i) {
      if (i == i2 || alpha_[i] <= 0.0 || alpha_[i] >= opts_.C) continue;
      const double gap = std::abs(errors_[i] - e2);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    if (best != i2 && take_step(best, i2)) return 1;
    for (std::size_t i = 0; i < xs_.size(); ++i) {
      if (i != i2 && alpha_[i] > 0.0 && alpha_[i] < opts_.C && take_step(i, i2)) return 1;
    }
    for (std::size_t i = 0; i < xs_.size(); ++i) {
      if (i != i2 && take_step(i, i2)) return 1;
    }
    return 0;
  }

  bool take_step(std::size_t i1, std::size_t i2) {
    if (i1 == i2) return false;
    if (++steps_ > opts_.max_steps) {
      throw TrainingFailure(subproblem_, "iteration cap exceeded before KKT tolerance");
    }
    const double alph1 = alpha_[i1];
    const double alph2 = alpha_[i2];
    const double y1 = ys_[i1];
    const double y2 = ys_[i2];
    const double e1 = errors_[i1];
    const double e2 = errors_[i2];
    const double s = y1 * y2;

    double lo;
    double hi;
    if (s < 0.0) {
      lo = std::max(0.0, alph2 - alph1);
      hi = std::min(opts_.C, opts_.C + alph2 - alph1);
    } else {
      lo = std::max(0.0, alph1 + alph2 - opts_.C);
      hi = std::min(opts_.C, alph1 + alph2);
    }
    if (lo >= hi) return false;

    const double k11 = gram_[i1][i1];
    const double k12 = gram_[i1][i2];
    const double k22 = gram_[i2][i2];
    const double eta = k11 + k22 - 2.0 * k12;

    double a2_new;
    if (eta > 0.0) {
      a2_new = alph2 + y2 * (e1 - e2) / eta;
      a2_new = std::clamp(a2_new, lo, hi);
    } else {
      // Degenerate curvature: evaluate the objective at both clip ends.
      const double f1 = y1 * e1 - alph1 * k11 - s * alph2 * k12;
      const double f2 = y2 * e2 - s * alph1 * k12 - alph2 * k22;
      const double l1 = alph1 + s * (alph2 - lo);
      const double h1 = alph1 + s * (alph2 - hi);
      const double lo_obj = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 +
                            s * lo * l1 * k12;
      const double hi_obj = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 +
                            s * hi * h1 * k12;
      if (lo_obj < hi_obj - 1e-12) {
        a2_new = lo;
      } else if (lo_obj > hi_obj + 1e-12) {
        a2_new = hi;
      } else {
        return false;
      }
    }
    if (std::abs(a2_new - alph2) < 1e-10 * (a2_new + alph2 + 1e-10)) return false;

    const double a1_new = alph1 + s * (alph2 - a2_new);
    const double d1 = y1 * (a1_new - alph1);
    const double d2 = y2 * (a2_new - alph2);

    const double b1 = bias_ - e1 - d1 * k11 - d2 * k12;
    const double b2 = bias_ - e2 - d1 * k12 - d2 * k22;
    double b_new;
    if (a1_new > 0.0 && a1_new < opts_.C) {
      b_new = b1;
    } else if (a2_new > 0.0 && a2_new < opts_.C) {
      b_new = b2;
    } else {
      b_new = 0.5 * (b1 + b2);
    }
    const double db = b_new - bias_;

    alpha_[i1] = a1_new;
    alpha_[i2] = a2_new;
    bias_ = b_new;
    for (std::size_t j = 0; j < xs_.size(); ++j) {
      errors_[j] += d1 * gram_[i1][j] + d2 * gram_[i2][j] + db;
    }
    return true;
  }

  const std::vector<std::vector<double>>& xs_;
  const std::vector<double>& ys_;
  TrainOptions opts_;
  std::string subproblem_;
  std::vector<std::vector<double>> gram_;
  std::vector<double> alpha_;
  std::vector<double> errors_;
  double bias_ = 0.0;
  std::uint64_t steps_ = 0;
};

std::vector<double> imputed_features(const Spectrum& s) {
  std::vector<double> f = s.intensities;
  for (double& v : f) {
    if (!std::isfinite(v)) v = 0.0;
  }
  return f;
}

}  // namespace

const char* to_string(SvmVariant v) {
  return v == SvmVariant::SVM3 ? "SVM3" : "SVM3+I";
}

SvmVariant variant_from_string(const std::string& s) {
  if (s == "SVM3") return SvmVariant::SVM3;
  if (s == "SVM3+I" || s == "SVM3I" || s == "SVM3_I") return SvmVariant::SVM3_I;
  throw std::invalid_argument("unknown SVM variant: " + s);
}

void StandardScaler::fit(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("cannot fit scaler on empty data");
  const std::size_t d = rows.front().size();
  mean.assign(d, 0.0);
  scale.assign(d, 1.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) mean[i] += r[i];
  }
  for (double& m : mean) m /= static_cast<double>(rows.size());
  std::vector<double> var(d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) {
      const double dv = r[i] - mean[i];
      var[i] += dv * dv;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    const double sd = std::sqrt(var[i] / static_cast<double>(rows.size()));
    scale[i] = sd > 1e-12 ? sd : 1.0;
  }
}

void StandardScaler::apply(std::vector<double>& row) const {
  for (std::size_t i = 0; i < row.size(); ++i) {
    row[i] = (row[i] - mean[i]) / scale[i];
  }
}

double TrainedClassifier::kernel(const std::vector<double>& x, const std::vector<double>& y) {
  const double base = 1.0 + dot(x, y) / static_cast<double>(x.size());
  return base * base * base;
}

TrainedClassifier train(const std::vector<LabeledSpectrum>& dataset, SvmVariant variant,
                        const TrainOptions& opts, std::uint64_t seed) {
  std::vector<const LabeledSpectrum*> rows;
  rows.reserve(dataset.size());
  for (const auto& r : dataset) {
    if (variant == SvmVariant::SVM3 && r.meta.interferant) continue;
    rows.push_back(&r);
  }
  if (rows.empty()) throw std::invalid_argument("empty training set after variant filter");
  const GridPtr grid = rows.front()->absorbance.grid;
  for (const auto* r : rows) {
    if (!r->absorbance.same_grid(rows.front()->absorbance)) {
      throw std::invalid_argument("training spectra must share one grid");
    }
  }

  std::map<std::string, int> class_counts;
  for (const auto* r : rows) ++class_counts[r->label];
  if (class_counts.size() < 2) {
    throw std::invalid_argument("training needs at least two classes");
  }
  for (const auto& [label, count] : class_counts) {
    if (count < 5) {
      throw std::invalid_argument("class " + label + " has fewer than 5 examples");
    }
  }

  // Canonical sort, then a seeded shuffle: input row order cannot influence
  // the fit.
  std::vector<std::vector<double>> features(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    features[i] = imputed_features(rows[i]->absorbance);
  }
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a]->label != rows[b]->label) return rows[a]->label < rows[b]->label;
    return features[a] < features[b];
  });
  auto rng = make_rng(seed, 0xc1a55);
  std::shuffle(order.begin(), order.end(), rng);

  TrainedClassifier model;
  model.grid_ = grid;
  model.variant_ = variant;
  model.c_ = opts.C;
  for (const auto& [label, count] : class_counts) model.classes_.push_back(label);

  std::vector<std::vector<double>> x(rows.size());
  std::vector<int> y_class(rows.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    x[k] = std::move(features[order[k]]);
    const auto it = std::lower_bound(model.classes_.begin(), model.classes_.end(),
                                     rows[order[k]]->label);
    y_class[k] = static_cast<int>(it - model.classes_.begin());
  }
  model.scaler_.fit(x);
  for (auto& row : x) model.scaler_.apply(row);

  struct PairTask {
    int a;
    int b;
  };
  std::vector<PairTask> tasks;
  const int n_classes = static_cast<int>(model.classes_.size());
  for (int a = 0; a < n_classes; ++a) {
    for (int b = a + 1; b < n_classes; ++b) tasks.push_back({a, b});
  }
  model.pairs_.resize(tasks.size());

  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto worker = [&]() {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      try {
        const auto [a, b] = tasks[t];
        std::vector<std::vector<double>> xs;
        std::vector<double> ys;
        for (std::size_t k = 0; k < x.size(); ++k) {
          if (y_class[k] == a) {
            xs.push_back(x[k]);
            ys.push_back(1.0);
          } else if (y_class[k] == b) {
            xs.push_back(x[k]);
            ys.push_back(-1.0);
          }
        }
        SmoSolver solver(xs, ys, opts,
                         model.classes_[a] + " vs " + model.classes_[b]);
        solver.solve();
        BinarySvm svm;
        svm.class_a = a;
        svm.class_b = b;
        for (std::size_t k = 0; k < xs.size(); ++k) {
          if (solver.alphas()[k] > 1e-10) {
            svm.support_vectors.push_back(xs[k]);
            svm.coeffs.push_back(solver.alphas()[k] * ys[k]);
          }
        }
        svm.bias = solver.bias();
        model.pairs_[t] = std::move(svm);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const unsigned n_threads =
      std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                         static_cast<unsigned>(tasks.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return model;
}

std::vector<double> TrainedClassifier::class_decision_sums(
    const std::vector<double>& raw_features) const {
  std::vector<double> f = raw_features;
  for (double& v : f) {
    if (!std::isfinite(v)) v = 0.0;
  }
  scaler_.apply(f);
  std::vector<double> sums(classes_.size(), 0.0);
  for (const auto& svm : pairs_) {
    double dec = svm.bias;
    for (std::size_t k = 0; k < svm.support_vectors.size(); ++k) {
      dec += svm.coeffs[k] * kernel(svm.support_vectors[k], f);
    }
    sums[static_cast<std::size_t>(svm.class_a)] += dec;
    sums[static_cast<std::size_t>(svm.class_b)] -= dec;
  }
  return sums;
}

Prediction TrainedClassifier::predict_features(const std::vector<double>& raw_features) const {
  if (raw_features.size() != scaler_.mean.size()) {
    throw std::invalid_argument("feature length does not match trained model");
  }
  std::vector<double> f = raw_features;
  for (double& v : f) {
    if (!std::isfinite(v)) v = 0.0;
  }
  scaler_.apply(f);

  std::vector<int> votes(classes_.size(), 0);
  std::vector<double> sums(classes_.size(), 0.0);
  for (const auto& svm : pairs_) {
    double dec = svm.bias;
    for (std::size_t k = 0; k < svm.support_vectors.size(); ++k) {
      dec += svm.coeffs[k] * kernel(svm.support_vectors[k], f);
    }
    if (dec > 0.0) {
      ++votes[static_cast<std::size_t>(svm.class_a)];
    } else {
      ++votes[static_cast<std::size_t>(svm.class_b)];
    }
    sums[static_cast<std::size_t>(svm.class_a)] += dec;
    sums[static_cast<std::size_t>(svm.class_b)] -= dec;
  }

  std::size_t winner = 0;
  for (std::size_t c = 1; c < classes_.size(); ++c) {
    if (votes[c] > votes[winner] ||
        (votes[c] == votes[winner] && sums[c] > sums[winner])) {
      winner = c;
    }
    // Equal votes and equal sums resolve to the lexicographically smaller
    // label, which is the earlier index by construction.
  }
  Prediction p;
  p.label = classes_[winner];
  p.margin = classes_.size() > 1
                 ? static_cast<double>(votes[winner]) / static_cast<double>(classes_.size() - 1)
                 : 1.0;
  return p;
}

Prediction TrainedClassifier::predict(const Spectrum& absorbance_spectrum) const {
  if (!grid_ || !absorbance_spectrum.grid ||
      !(grid_ == absorbance_spectrum.grid || *grid_ == *absorbance_spectrum.grid)) {
    throw std::invalid_argument("spectrum grid does not match training grid");
  }
  return predict_features(absorbance_spectrum.intensities);
}

EvalReport evaluate(const TrainedClassifier& model,
                    const std::vector<LabeledSpectrum>& testset) {
  if (testset.empty()) throw std::invalid_argument("empty testset");
  EvalReport report;
  std::map<std::string, int> row_index;
  for (const auto& r : testset) row_index.emplace(r.label, 0);
  int idx = 0;
  for (auto& [label, i] : row_index) {
    i = idx++;
    report.confusion.row_labels.push_back(label);
  }
  report.confusion.col_labels = model.classes();
  std::map<std::string, int> col_index;
  for (std::size_t c = 0; c < report.confusion.col_labels.size(); ++c) {
    col_index[report.confusion.col_labels[c]] = static_cast<int>(c);
  }
  report.confusion.counts.assign(report.confusion.row_labels.size(),
                                 std::vector<int>(report.confusion.col_labels.size(), 0));

  int correct = 0;
  for (const auto& r : testset) {
    const Prediction p = model.predict(r.absorbance);
    ++report.confusion.counts[static_cast<std::size_t>(row_index[r.label])]
                             [static_cast<std::size_t>(col_index[p.label])];
    auto& actual = report.per_class[r.label];
    auto& predicted = report.per_class[p.label];
    if (p.label == r.label) {
      ++actual.true_positive;
      ++correct;
    } else {
      ++actual.false_negative;
      ++predicted.false_positive;
    }
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(testset.size());
  return report;
}

std::vector<std::vector<double>> ConfusionMatrix::row_normalized() const {
  std::vector<std::vector<double>> out(counts.size(),
                                       std::vector<double>(col_labels.size(), 0.0));
  for (std::size_t r = 0; r < counts.size(); ++r) {
    int total = 0;
    for (int c : counts[r]) total += c;
    if (total == 0) continue;
    for (std::size_t c = 0; c < counts[r].size(); ++c) {
      out[r][c] = static_cast<double>(counts[r][c]) / static_cast<double>(total);
    }
  }
  return out;
}

void ConfusionMatrix::write_csv(std::ostream& out) const {
  out << "actual";
  for (const auto& c : col_labels) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < row_labels.size(); ++r) {
    out << row_labels[r];
    for (int v : counts[r]) out << ',' << v;
    out << '\n';
  }
}

std::string TrainedClassifier::to_json() const {
  nlohmann::json doc;
  doc["format"] = "mpsurvey-svm";
  doc["version"] = 1;
  doc["kernel_degree"] = kKernelDegree;
  doc["C"] = c_;
  doc["variant"] = to_string(variant_);
  doc["grid"] = grid_->points();
  doc["scaler"]["mean"] = scaler_.mean;
  doc["scaler"]["scale"] = scaler_.scale;
  doc["classes"] = classes_;
  auto& pairs = doc["pairs"];
  pairs = nlohmann::json::array();
  for (const auto& svm : pairs_) {
    nlohmann::json p;
    p["class_a"] = svm.class_a;
    p["class_b"] = svm.class_b;
    p["bias"] = svm.bias;
    p["coeffs"] = svm.coeffs;
    p["support_vectors"] = svm.support_vectors;
    pairs.push_back(std::move(p));
  }
  return doc.dump();
}

TrainedClassifier TrainedClassifier::from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  if (doc.at("format").get<std::string>() != "mpsurvey-svm") {
    throw std::invalid_argument("not an mpsurvey SVM model document");
  }
  TrainedClassifier model;
  model.grid_ = std::make_shared<const WavelengthGrid>(
      doc.at("grid").get<std::vector<double>>());
  model.variant_ = variant_from_string(doc.at("variant").get<std::string>());
  model.c_ = doc.at("C").get<double>();
  model.scaler_.mean = doc.at("scaler").at("mean").get<std::vector<double>>();
  model.scaler_.scale = doc.at("scaler").at("scale").get<std::vector<double>>();
  model.classes_ = doc.at("classes").get<std::vector<std::string>>();
  for (const auto& p : doc.at("pairs")) {
    BinarySvm svm;
    svm.class_a = p.at("class_a").get<int>();
    svm.class_b = p.at("class_b").get<int>();
    svm.bias = p.at("bias").get<double>();
    svm.coeffs = p.at("coeffs").get<std::vector<double>>();
    svm.support_vectors = p.at("support_vectors").get<std::vector<std::vector<double>>>();
    model.pairs_.push_back(std::move(svm));
  }
  return model;
}

void TrainedClassifier::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << to_json() << '\n';
}

TrainedClassifier TrainedClassifier::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return from_json(buf.str());
}

Spectrum measure_absorbance(const Spectrum& reflectance, const Spectrum& sand_reflectance,
                            double snr, double counts_scale, double dark_floor,
                            std::uint64_t seed, double sample_gain) {
  Spectrum sample = reflectance;
  sample.role = SpectrumRole::sample;
  for (double& v : sample.intensities) v = dark_floor + counts_scale * sample_gain * v;
  Spectrum reference = sand_reflectance;
  reference.role = SpectrumRole::reference;
  for (double& v : reference.intensities) v = dark_floor + counts_scale * v;
  Spectrum dark;
  dark.grid = reflectance.grid;
  dark.role = SpectrumRole::dark;
  dark.intensities.assign(reflectance.intensities.size(), dark_floor);

  sample = add_noise(sample, snr, split_seed(seed, 0));
  reference = add_noise(reference, snr, split_seed(seed, 1));
  dark = add_noise(dark, snr, split_seed(seed, 2));
  return absorbance(sample, dark, reference).spectrum;
}

Dataset make_dataset(const SpectralLibrary& library, const DatasetParams& params) {
  const GridPtr grid = params.grid ? params.grid : WavelengthGrid::standard();
  const Spectrum sand_refl = synthesize_reflectance(library.at("sand"), grid);

  std::vector<std::string> classes = SpectralLibrary::solid_materials();
  if (params.include_sand_class) classes.push_back("sand");

  Dataset ds;
  std::uint64_t counter = 0;
  auto next_seed = [&]() { return split_seed(params.seed, counter++); };

  auto push = [&](std::vector<LabeledSpectrum>& out, const Spectrum& refl,
                  const std::string& label, double snr, bool interferant) {
    LabeledSpectrum row;
    const std::uint64_t s = next_seed();
    // Training rows carry seeded focus-gain jitter; the test split is bench
    // conditions (gain 1).
    double gain = 1.0;
    if (&out == &ds.train && params.min_focus_gain < 1.0) {
      gain = params.min_focus_gain +
             (1.0 - params.min_focus_gain) *
                 (static_cast<double>(split_seed(s, 0x9a1) & 0xffff) / 65535.0);
    }
    row.absorbance = measure_absorbance(refl, sand_refl, snr, params.counts_scale,
                                        params.dark_floor, s, gain);
    row.label = label;
    row.meta = {snr, interferant};
    out.push_back(std::move(row));
  };

  for (const auto& label : classes) {
    const Spectrum refl = synthesize_reflectance(library.at(label), grid);
    for (double snr : params.snrs) {
      for (int i = 0; i < params.clean_train_per_class; ++i) {
        push(ds.train, refl, label, snr, false);
      }
      for (int i = 0; i < params.clean_test_per_class; ++i) {
        push(ds.test, refl, label, snr, false);
      }
    }
  }

  for (const auto& material : SpectralLibrary::solid_materials()) {
    const Spectrum refl = synthesize_reflectance(library.at(material), grid);
    for (double w : params.sand_dilution_weights) {
      const Spectrum diluted = mix_spectra({{refl, 1.0 - w}, {sand_refl, w}});
      for (double snr : params.snrs) {
        for (int i = 0; i < params.sand_dilution_train_per_combo; ++i) {
          push(ds.train, diluted, material, snr, false);
        }
      }
    }
    for (const auto& interferant : SpectralLibrary::interferants()) {
      const Spectrum irefl = synthesize_reflectance(library.at(interferant), grid);
      for (double w : params.interferant_weights) {
        const Spectrum mixed = mix_spectra({{refl, 1.0 - w}, {irefl, w}});
        for (double snr : params.snrs) {
          for (int i = 0; i < params.contaminated_train_per_combo; ++i) {
            push(ds.train, mixed, material, snr, true);
          }
          for (int i = 0; i < params.contaminated_test_per_combo; ++i) {
            push(ds.test, mixed, material, snr, true);
          }
        }
      }
    }
  }
  return ds;
}

void save_dataset(const std::vector<LabeledSpectrum>& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = nlohmann::json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "spec_%05zu.csv", i);
    write_spectrum_csv(data[i].absorbance, dir + "/" + name);
    manifest.push_back({{"file", name},
                        {"label", data[i].label},
                        {"snr", data[i].meta.snr},
                        {"interferant", data[i].meta.interferant}});
  }
  std::ofstream f(dir + "/manifest.json");
  if (!f) throw std::runtime_error("cannot write manifest in " + dir);
  f << manifest.dump(2) << '\n';
}

std::vector<LabeledSpectrum> load_dataset(const std::string& dir) {
  std::ifstream f(dir + "/manifest.json");
  if (!f) throw std::runtime_error("cannot open manifest in " + dir);
  nlohmann::json manifest;
  f >> manifest;
  std::vector<LabeledSpectrum> out;
  for (const auto& entry : manifest) {
    LabeledSpectrum row;
    row.absorbance = read_spectrum_csv(dir + "/" + entry.at("file").get<std::string>(),
                                       SpectrumRole::absorbance);
    row.label = entry.at("label").get<std::string>();
    row.meta.snr = entry.at("snr").get<double>();
    row.meta.interferant = entry.at("interferant").get<bool>();
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace mps
