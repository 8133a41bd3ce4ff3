#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mpsurvey/mission.hpp"

namespace {

mps::MissionConfig load_config(const std::string& path) {
  if (path.empty()) return mps::MissionConfig::defaults();
  return mps::MissionConfig::load(path);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << content;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beach microplastics survey simulator"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "mission config JSON (defaults when omitted)");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run a full seeded mission");
  std::uint64_t sim_seed = 1;
  std::string sim_out = "mission_out";
  simulate->add_option("--seed", sim_seed, "mission seed");
  simulate->add_option("--out", sim_out, "output directory");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo servo trials, before/after CSV");
  int sweep_trials = 100;
  std::uint64_t sweep_seed = 7;
  std::string sweep_out = "sweep.csv";
  sweep->add_option("--trials", sweep_trials, "number of trials");
  sweep->add_option("--seed", sweep_seed, "base seed");
  sweep->add_option("--out", sweep_out, "output CSV path");

  // sensitivity
  auto* sens = app.add_subcommand("sensitivity", "z-offset absorbance sweep");
  std::vector<double> sens_offsets = {0.0, 0.25, 0.5, 1.0, 2.0};
  std::uint64_t sens_seed = 11;
  std::string sens_out = "sensitivity";
  sens->add_option("--offsets", sens_offsets, "z offsets in mm");
  sens->add_option("--seed", sens_seed, "seed");
  sens->add_option("--out", sens_out, "output prefix");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a classifier on the synthetic library");
  std::string train_variant = "SVM3+I";
  std::uint64_t train_seed = 1;
  std::string train_out = "model.json";
  std::string dataset_dir;
  train_cmd->add_option("--variant", train_variant, "SVM3 or SVM3+I");
  train_cmd->add_option("--seed", train_seed, "dataset/train seed");
  train_cmd->add_option("--out", train_out, "model output path");
  train_cmd->add_option("--save-dataset", dataset_dir, "also save the dataset directory");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model, emit confusion CSV");
  std::string eval_model = "model.json";
  std::string eval_dataset;
  std::uint64_t eval_seed = 1;
  std::string eval_out = "confusion.csv";
  eval_cmd->add_option("--model", eval_model, "model path");
  eval_cmd->add_option("--dataset", eval_dataset, "dataset directory (synthesized when omitted)");
  eval_cmd->add_option("--seed", eval_seed, "synthetic testset seed");
  eval_cmd->add_option("--out", eval_out, "confusion matrix CSV path");

  // endurance
  auto* endur = app.add_subcommand("endurance", "path/area/power arithmetic report");

  // replay
  auto* replay = app.add_subcommand("replay", "re-run a mission log and compare byte-for-byte");
  std::string replay_log;
  replay->add_option("log", replay_log, "mission log path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      const auto config = load_config(config_path);
      const auto result = mps::run_mission(config, sim_seed);
      std::filesystem::create_directories(sim_out);
      write_file(sim_out + "/mission_log.csv", result.log.serialize());
      write_file(sim_out + "/summary.json", result.summary.to_json() + "\n");
      std::ostringstream trace;
      mps::ServoTrace::write_csv_header(trace);
      result.trace.write_csv_rows(trace);
      write_file(sim_out + "/trace.csv", trace.str());
      std::cout << result.summary.to_json() << '\n';
      return 0;
    }
    if (sweep->parsed()) {
      const auto config = load_config(config_path);
      const auto trials = mps::run_sweep(config, sweep_trials, sweep_seed);
      std::ofstream f(sweep_out);
      if (!f) throw std::runtime_error("cannot open for write: " + sweep_out);
      mps::write_sweep_csv(trials, f);
      int ok = 0;
      for (const auto& t : trials) {
        if (t.valid && t.after_mm <= 1.0) ++ok;
      }
      std::cout << "trials=" << trials.size() << " within_1mm=" << ok << '\n';
      return ok == static_cast<int>(trials.size()) ? 0 : (ok * 100 >= 95 * sweep_trials ? 0 : 1);
    }
    if (sens->parsed()) {
      const auto config = load_config(config_path);
      const auto points = mps::run_sensitivity(config, sens_offsets, sens_seed);
      {
        std::ofstream f(sens_out + "_summary.csv");
        if (!f) throw std::runtime_error("cannot write " + sens_out + "_summary.csv");
        mps::write_sensitivity_csv(points, f);
      }
      {
        std::ofstream f(sens_out + "_curves.csv");
        if (!f) throw std::runtime_error("cannot write " + sens_out + "_curves.csv");
        mps::write_sensitivity_curves_csv(points, f);
      }
      for (const auto& p : points) {
        std::cout << "z=" << p.z_offset_mm << "mm valid=" << p.valid
                  << " band_contrast=" << p.band_contrast << '\n';
      }
      return 0;
    }
    if (train_cmd->parsed()) {
      mps::DatasetParams params;
      params.seed = train_seed;
      const auto ds = mps::make_dataset(mps::SpectralLibrary::builtin(), params);
      if (!dataset_dir.empty()) {
        mps::save_dataset(ds.train, dataset_dir + "/train");
        mps::save_dataset(ds.test, dataset_dir + "/test");
      }
      const auto model =
          mps::train(ds.train, mps::variant_from_string(train_variant), {}, train_seed);
      model.save(train_out);
      const auto report = mps::evaluate(model, ds.test);
      std::cout << "variant=" << mps::to_string(model.variant())
                << " classes=" << model.classes().size()
                << " test_accuracy=" << report.accuracy << '\n';
      return 0;
    }
    if (eval_cmd->parsed()) {
      const auto model = mps::TrainedClassifier::load(eval_model);
      std::vector<mps::LabeledSpectrum> testset;
      if (!eval_dataset.empty()) {
        testset = mps::load_dataset(eval_dataset);
      } else {
        mps::DatasetParams params;
        params.seed = eval_seed;
        testset = mps::make_dataset(mps::SpectralLibrary::builtin(), params).test;
      }
      const auto report = mps::evaluate(model, testset);
      std::ofstream f(eval_out);
      if (!f) throw std::runtime_error("cannot open for write: " + eval_out);
      report.confusion.write_csv(f);
      std::cout << "accuracy=" << report.accuracy << " samples=" << testset.size() << '\n';
      return 0;
    }
    if (endur->parsed()) {
      const auto config = load_config(config_path);
      std::cout << mps::endurance_report(config).to_json() << '\n';
      return 0;
    }
    if (replay->parsed()) {
      std::ifstream f(replay_log);
      if (!f) throw std::runtime_error("cannot open: " + replay_log);
      std::ostringstream buf;
      buf << f.rdbuf();
      const std::string original = buf.str();
      const auto header = mps::MissionLog::parse(original);
      const auto config = mps::MissionConfig::from_json(header.config_json);
      const auto result = mps::run_mission(config, header.seed);
      if (result.log.serialize() == original) {
        std::cout << "replay: identical\n";
        return 0;
      }
      std::cout << "replay: MISMATCH\n";
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
