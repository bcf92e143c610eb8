#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rdopt/allocation.hpp"
#include "rdopt/classifier.hpp"
#include "rdopt/clustering.hpp"
#include "rdopt/errors.hpp"
#include "rdopt/evaluation.hpp"
#include "rdopt/io.hpp"
#include "rdopt/rd_model.hpp"
#include "rdopt/synth_corpus.hpp"
#include "rdopt/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Removes every tracked output unless the command commits, so failed runs
// leave no partial files behind.
class OutputGuard {
 public:
  ~OutputGuard() {
    if (committed_) return;
    for (const auto& p : paths_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }

  fs::path track(fs::path p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    paths_.push_back(p);
    return p;
  }

  void commit() { committed_ = true; }

 private:
  std::vector<fs::path> paths_;
  bool committed_ = false;
};

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string item = text.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    if (item.empty()) throw rdopt::ValidationError("empty entry in list '" + text + "'");
    out.push_back(std::stod(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw rdopt::ValidationError("empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const double v : parse_double_list(text)) out.push_back(static_cast<int>(v));
  return out;
}

struct GenerateArgs {
  std::string config_path;
  int n_chunks = 500;
  int k_true = 10;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir = ".";
};

int run_generate(const GenerateArgs& args) {
  rdopt::SynthConfig cfg;
  if (!args.config_path.empty()) {
    cfg = rdopt::synth_config_from_json(rdopt::load_json(args.config_path));
    if (args.seed_given) cfg.seed = args.seed;
  } else {
    cfg = rdopt::default_synth_config(args.n_chunks, args.k_true, args.seed);
  }

  const rdopt::SynthCorpus corpus = rdopt::generate(cfg);

  OutputGuard guard;
  const fs::path dir = args.out_dir;
  rdopt::save_rd_csv(guard.track(dir / "rd_samples.csv"), corpus.dataset);
  rdopt::save_features_csv(guard.track(dir / "features.csv"), corpus.features);
  std::vector<std::pair<std::string, int>> labels;
  for (std::size_t i = 0; i < corpus.true_labels.size(); ++i)
    labels.emplace_back(corpus.dataset.samples[i].chunk_id, corpus.true_labels[i]);
  rdopt::save_labels_csv(guard.track(dir / "labels.csv"), labels, "true_cluster");
  rdopt::save_json(guard.track(dir / "synth_config.json"), rdopt::to_json(cfg));
  guard.commit();

  std::cout << "generated " << corpus.dataset.size() << " chunks over "
            << cfg.grid.size() << " grid points into " << dir.string() << "\n";
  return 0;
}

struct ClusterArgs {
  std::string rd_csv;
  int k = 10;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::string out_model;
  std::string out_labels;
  std::string sweep_ks;
  std::string sweep_out;
};

int run_cluster(const ClusterArgs& args) {
  const rdopt::RDDataset dataset = rdopt::load_rd_csv(args.rd_csv);

  rdopt::KMeansConfig cfg;
  cfg.k = args.k;
  cfg.seed = args.seed;

  OutputGuard guard;
  const fs::path dir = args.out_dir;

  if (!args.sweep_ks.empty()) {
    const rdopt::NormalizationStats stats = rdopt::fit_normalization(dataset);
    const rdopt::Mat Xn =
        rdopt::normalize_rows(rdopt::to_rd_matrix(dataset), stats);
    const auto sweep =
        rdopt::error_vs_k_sweep(Xn, parse_int_list(args.sweep_ks), cfg);
    const fs::path sweep_path = args.sweep_out.empty()
                                    ? dir / "cluster_error_sweep.csv"
                                    : fs::path(args.sweep_out);
    rdopt::save_error_sweep_csv(guard.track(sweep_path), sweep);
  }

  rdopt::ClusterAssignment assignment;
  const rdopt::ClusterModel model =
      rdopt::build_cluster_model(dataset, cfg, &assignment);

  const fs::path model_path = args.out_model.empty()
                                  ? dir / "cluster_model.json"
                                  : fs::path(args.out_model);
  rdopt::save_json(guard.track(model_path), rdopt::to_json(model));

  std::vector<std::pair<std::string, int>> labels;
  for (int i = 0; i < dataset.size(); ++i)
    labels.emplace_back(dataset.samples[i].chunk_id, assignment.labels[i]);
  const fs::path labels_path = args.out_labels.empty()
                                   ? dir / "cluster_labels.csv"
                                   : fs::path(args.out_labels);
  rdopt::save_labels_csv(guard.track(labels_path), labels, "cluster");
  guard.commit();

  std::cout << "clustered " << dataset.size() << " chunks into " << args.k
            << " clusters (inertia " << assignment.inertia << ")\n";
  return 0;
}

struct TrainArgs {
  std::string features_csv;
  std::string labels_csv;
  double split = 0.8;
  int folds = 5;
  std::uint64_t seed = 0;
  std::string c_grid = "0.1,1,10,100";
  std::string gamma_grid = "0.01,0.1,1,10";
  std::string out_dir = ".";
  std::string out_model;
  std::string out_report;
};

int run_train(const TrainArgs& args) {
  const auto features = rdopt::load_features_csv(args.features_csv);
  const auto label_rows = rdopt::load_labels_csv(args.labels_csv);

  // join by chunk_id, keeping the feature-file order
  std::map<std::string, int> label_of;
  for (const auto& [id, label] : label_rows) label_of[id] = label;
  std::vector<int> labels;
  std::string unmatched;
  int unmatched_count = 0;
  for (const auto& fv : features) {
    const auto it = label_of.find(fv.chunk_id);
    if (it == label_of.end()) {
      unmatched += (unmatched_count++ ? ", " : "") + fv.chunk_id;
      continue;
    }
    labels.push_back(it->second);
    label_of.erase(it);
  }
  for (const auto& [id, label] : label_of)
    unmatched += (unmatched_count++ ? ", " : "") + id;
  if (unmatched_count)
    throw rdopt::ValidationError("unmatched chunk_ids between features and labels: " +
                                 unmatched);

  const rdopt::TrainedClassifier trained = rdopt::train_classifier(
      features, labels, args.split, args.folds, args.seed,
      parse_double_list(args.c_grid), parse_double_list(args.gamma_grid));

  OutputGuard guard;
  const fs::path dir = args.out_dir;
  const fs::path model_path =
      args.out_model.empty() ? dir / "classifier.json" : fs::path(args.out_model);
  const fs::path report_path = args.out_report.empty()
                                   ? dir / "train_report.json"
                                   : fs::path(args.out_report);
  rdopt::save_json(guard.track(model_path), rdopt::to_json(trained.model));
  rdopt::save_json(guard.track(report_path), rdopt::to_json(trained.report));
  guard.commit();

  std::cout << "trained on " << trained.report.n_train << " / tested on "
            << trained.report.n_test << " chunks; best (c, gamma) = ("
            << trained.report.best.c << ", " << trained.report.best.gamma
            << "), test accuracy " << trained.report.test_accuracy << "\n";
  return 0;
}

struct ClassifyArgs {
  std::string features_csv;
  std::string model_path;
  std::string out_dir = ".";
  std::string out;
};

int run_classify(const ClassifyArgs& args) {
  const auto features = rdopt::load_features_csv(args.features_csv);
  const rdopt::ClassifierModel model =
      rdopt::classifier_model_from_json(rdopt::load_json(args.model_path));

  std::vector<std::pair<std::string, int>> predictions;
  predictions.reserve(features.size());
  for (const auto& fv : features)
    predictions.emplace_back(fv.chunk_id, rdopt::predict(model, fv.values));

  OutputGuard guard;
  const fs::path out = args.out.empty() ? fs::path(args.out_dir) / "predictions.csv"
                                        : fs::path(args.out);
  rdopt::save_labels_csv(guard.track(out), predictions, "cluster");
  guard.commit();

  std::cout << "classified " << predictions.size() << " chunks\n";
  return 0;
}

struct WeightsArgs {
  std::string predictions_csv;
  int k = 0;
  std::string out_dir = ".";
  std::string out;
};

int run_weights(const WeightsArgs& args) {
  const auto rows = rdopt::load_labels_csv(args.predictions_csv);
  std::vector<int> predictions;
  predictions.reserve(rows.size());
  for (const auto& [id, label] : rows) predictions.push_back(label);

  const rdopt::CorpusDistribution w = rdopt::estimate_weights(predictions, args.k);

  OutputGuard guard;
  const fs::path out = args.out.empty() ? fs::path(args.out_dir) / "weights.json"
                                        : fs::path(args.out);
  rdopt::save_json(guard.track(out), rdopt::to_json(w));
  guard.commit();

  std::cout << "estimated weights over " << args.k << " clusters from "
            << predictions.size() << " predictions\n";
  return 0;
}

struct OptimizeArgs {
  std::string model_path;
  std::string weights_path;
  double min_avg_quality = 0.0;
  double min_worst_quality = 0.0;
  std::string out_dir = ".";
  std::string out;
};

int run_optimize(const OptimizeArgs& args) {
  const rdopt::ClusterModel model =
      rdopt::cluster_model_from_json(rdopt::load_json(args.model_path));
  const rdopt::CorpusDistribution w =
      rdopt::corpus_distribution_from_json(rdopt::load_json(args.weights_path));
  const rdopt::QualityConstraints constraints{args.min_avg_quality,
                                              args.min_worst_quality};

  const rdopt::AllocationSolution solution =
      rdopt::solve_allocation(model, w, constraints);

  OutputGuard guard;
  const fs::path out = args.out.empty() ? fs::path(args.out_dir) / "allocation.json"
                                        : fs::path(args.out);
  rdopt::save_json(guard.track(out), rdopt::to_json(solution));
  guard.commit();

  std::cout << "allocation: avg rate " << solution.avg_rate << " kbps, avg quality "
            << solution.avg_quality << " dB, worst quality "
            << solution.worst_quality << " dB (lambda " << solution.lambda_star
            << ")\n";
  return 0;
}

struct EvaluateArgs {
  std::string model_path;
  std::string weights_path;
  std::string rd_csv;
  std::string features_csv;
  std::string classifier_path;
  std::string crf_ladder;
  std::string out_dir = ".";
};

int run_evaluate(const EvaluateArgs& args) {
  const rdopt::ClusterModel model =
      rdopt::cluster_model_from_json(rdopt::load_json(args.model_path));
  const rdopt::CorpusDistribution w =
      rdopt::corpus_distribution_from_json(rdopt::load_json(args.weights_path));
  const rdopt::RDDataset dataset = rdopt::load_rd_csv(args.rd_csv);
  const auto features = rdopt::load_features_csv(args.features_csv);
  const rdopt::ClassifierModel classifier =
      rdopt::classifier_model_from_json(rdopt::load_json(args.classifier_path));

  std::vector<double> ladder;
  if (args.crf_ladder.empty()) {
    for (int j = 0; j < model.grid.size(); ++j)
      ladder.push_back(model.grid.points[j]);
  } else {
    ladder = parse_double_list(args.crf_ladder);
  }

  const rdopt::ExpectedEvaluation expected =
      rdopt::evaluate_expected(model, w, ladder);
  const rdopt::ActualSweeps actual = rdopt::actual_sweeps(
      dataset, features, classifier, expected.crfs, expected.solutions);
  const rdopt::Sweep oracle = rdopt::oracle_actual_sweep(dataset, actual.baseline);

  json bd = {{"v", 1}, {"entries", json::array()}};
  bd["entries"].push_back(
      {{"pair", "optimal_expected_vs_baseline_expected"},
       {"bd_rate_percent", rdopt::bd_rate(expected.baseline, expected.optimal)}});
  bd["entries"].push_back(
      {{"pair", "optimal_actual_vs_baseline_actual"},
       {"bd_rate_percent", rdopt::bd_rate(actual.baseline, actual.optimal)}});

  OutputGuard guard;
  const fs::path dir = args.out_dir;
  rdopt::save_sweeps_csv(guard.track(dir / "sweeps.csv"),
                         {expected.baseline, expected.optimal, actual.baseline,
                          actual.optimal, oracle});
  rdopt::save_json(guard.track(dir / "bdrate.json"), bd);
  guard.commit();

  std::cout << "expected BD-rate "
            << bd["entries"][0]["bd_rate_percent"].get<double>()
            << "%, actual BD-rate "
            << bd["entries"][1]["bd_rate_percent"].get<double>() << "%\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corpus-level rate-distortion operating-point allocation toolkit"};
  app.require_subcommand(1);

  // global flags; subcommands fall through to them
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed");
  app.add_option("--out-dir", out_dir, "Directory for default-named outputs");

  GenerateArgs gen;
  auto* cmd_gen = app.add_subcommand("generate", "Generate a synthetic corpus");
  cmd_gen->fallthrough();
  cmd_gen->add_option("--config", gen.config_path, "Synth config JSON");
  cmd_gen->add_option("--n-chunks", gen.n_chunks, "Number of chunks");
  cmd_gen->add_option("--k-true", gen.k_true, "Number of archetypes");

  ClusterArgs clu;
  auto* cmd_clu = app.add_subcommand("cluster", "Cluster chunk R-D curves");
  cmd_clu->fallthrough();
  cmd_clu->add_option("--rd-samples", clu.rd_csv, "R-D sample CSV")->required();
  cmd_clu->add_option("--k", clu.k, "Number of clusters");
  cmd_clu->add_option("--out-model", clu.out_model, "Cluster model JSON path");
  cmd_clu->add_option("--out-labels", clu.out_labels, "Cluster label CSV path");
  cmd_clu->add_option("--sweep-ks", clu.sweep_ks,
                      "Comma list of k values for the error-vs-k sweep");
  cmd_clu->add_option("--sweep-out", clu.sweep_out, "Sweep CSV path");

  TrainArgs tra;
  auto* cmd_tra = app.add_subcommand("train", "Train the R-D cluster classifier");
  cmd_tra->fallthrough();
  cmd_tra->add_option("--features", tra.features_csv, "Feature CSV")->required();
  cmd_tra->add_option("--labels", tra.labels_csv, "Label CSV")->required();
  cmd_tra->add_option("--split", tra.split, "Training fraction");
  cmd_tra->add_option("--folds", tra.folds, "Cross-validation folds");
  cmd_tra->add_option("--c-grid", tra.c_grid, "Comma list of C values");
  cmd_tra->add_option("--gamma-grid", tra.gamma_grid, "Comma list of gamma values");
  cmd_tra->add_option("--out-model", tra.out_model, "Classifier JSON path");
  cmd_tra->add_option("--out-report", tra.out_report, "Train report JSON path");

  ClassifyArgs cla;
  auto* cmd_cla = app.add_subcommand("classify", "Predict R-D clusters from features");
  cmd_cla->fallthrough();
  cmd_cla->add_option("--features", cla.features_csv, "Feature CSV")->required();
  cmd_cla->add_option("--model", cla.model_path, "Classifier JSON")->required();
  cmd_cla->add_option("--out", cla.out, "Prediction CSV path");

  WeightsArgs wei;
  auto* cmd_wei = app.add_subcommand("weights", "Estimate cluster weights");
  cmd_wei->fallthrough();
  cmd_wei->add_option("--predictions", wei.predictions_csv, "Prediction CSV")
      ->required();
  cmd_wei->add_option("--k", wei.k, "Number of clusters")->required();
  cmd_wei->add_option("--out", wei.out, "Weights JSON path");

  OptimizeArgs opt;
  auto* cmd_opt = app.add_subcommand("optimize", "Solve the bitrate allocation");
  cmd_opt->fallthrough();
  cmd_opt->add_option("--model", opt.model_path, "Cluster model JSON")->required();
  cmd_opt->add_option("--weights", opt.weights_path, "Weights JSON")->required();
  cmd_opt->add_option("--min-avg-quality", opt.min_avg_quality,
                      "Average quality floor, dB")->required();
  cmd_opt->add_option("--min-worst-quality", opt.min_worst_quality,
                      "Worst-cluster quality floor, dB")->required();
  cmd_opt->add_option("--out", opt.out, "Solution JSON path");

  EvaluateArgs eva;
  auto* cmd_eva = app.add_subcommand("evaluate", "Baseline/optimal sweeps and BD-rate");
  cmd_eva->fallthrough();
  cmd_eva->add_option("--model", eva.model_path, "Cluster model JSON")->required();
  cmd_eva->add_option("--weights", eva.weights_path, "Weights JSON")->required();
  cmd_eva->add_option("--rd-samples", eva.rd_csv, "R-D sample CSV")->required();
  cmd_eva->add_option("--features", eva.features_csv, "Feature CSV")->required();
  cmd_eva->add_option("--classifier", eva.classifier_path, "Classifier JSON")
      ->required();
  cmd_eva->add_option("--crf-ladder", eva.crf_ladder,
                      "Comma list of baseline CRFs (default: full grid)");

  CLI11_PARSE(app, argc, argv);

  gen.seed = clu.seed = tra.seed = seed;
  gen.seed_given = seed_opt->count() > 0;
  gen.out_dir = clu.out_dir = tra.out_dir = cla.out_dir = wei.out_dir =
      opt.out_dir = eva.out_dir = out_dir;

  try {
    if (cmd_gen->parsed()) return run_generate(gen);
    if (cmd_clu->parsed()) return run_cluster(clu);
    if (cmd_tra->parsed()) return run_train(tra);
    if (cmd_cla->parsed()) return run_classify(cla);
    if (cmd_wei->parsed()) return run_weights(wei);
    if (cmd_opt->parsed()) return run_optimize(opt);
    if (cmd_eva->parsed()) return run_evaluate(eva);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
