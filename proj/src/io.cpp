#include "rdopt/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "rdopt/errors.hpp"

namespace rdopt {

using nlohmann::json;

namespace {

std::string csv_error(const std::filesystem::path& path, std::size_t line,
                      const std::string& message) {
  return path.string() + ":" + std::to_string(line) + ": " + message;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_csv_double(const std::string& text, const std::filesystem::path& path,
                        std::size_t line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(csv_error(path, line, "expected a number, got '" + text + "'"));
  }
}

int parse_csv_int(const std::string& text, const std::filesystem::path& path,
                  std::size_t line) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(csv_error(path, line, "expected an integer, got '" + text + "'"));
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

void check_chunk_id(const std::string& id) {
  if (id.empty()) throw ValidationError("empty chunk_id");
  if (id.find(',') != std::string::npos || id.find('\n') != std::string::npos)
    throw ValidationError("chunk_id '" + id + "' contains a CSV delimiter");
}

json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vec vec_from_json(const json& arr) {
  if (!arr.is_array()) throw ValidationError("expected a JSON array of numbers");
  Vec v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

void require_version(const json& j, const std::string& kind) {
  if (!j.is_object() || !j.contains("v") || j["v"].get<int>() != 1)
    throw ValidationError(kind + ": unsupported or missing schema version");
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

RDDataset load_rd_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line))
    throw ValidationError(csv_error(path, 1, "empty file"));
  ++line_no;
  if (line != "chunk_id,q,rate_kbps,quality_db")
    throw ValidationError(csv_error(path, 1,
        "expected header 'chunk_id,q,rate_kbps,quality_db', got '" + line + "'"));

  struct Row {
    double q, rate, quality;
  };
  // preserve first-appearance order of chunks
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;
  std::set<double> q_values;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4)
      throw ValidationError(csv_error(path, line_no, "expected 4 fields, got " +
                                      std::to_string(fields.size())));
    const std::string& id = fields[0];
    if (id.empty()) throw ValidationError(csv_error(path, line_no, "empty chunk_id"));
    const double q = parse_csv_double(fields[1], path, line_no);
    const double rate = parse_csv_double(fields[2], path, line_no);
    const double quality = parse_csv_double(fields[3], path, line_no);
    auto [it, inserted] = rows.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.push_back({q, rate, quality});
    q_values.insert(q);
  }
  if (order.empty()) throw ValidationError(path.string() + ": no data rows");

  RDDataset dataset;
  dataset.grid.points.resize(q_values.size());
  {
    Eigen::Index j = 0;
    for (const double q : q_values) dataset.grid.points[j++] = q;
  }
  const int s = dataset.grid.size();

  for (const auto& id : order) {
    auto& chunk_rows = rows[id];
    std::sort(chunk_rows.begin(), chunk_rows.end(),
              [](const Row& a, const Row& b) { return a.q < b.q; });
    RDSample sample;
    sample.chunk_id = id;
    sample.rates.resize(s);
    sample.qualities.resize(s);
    if (static_cast<int>(chunk_rows.size()) != s)
      throw ValidationError(path.string() + ": chunk '" + id + "' covers " +
                            std::to_string(chunk_rows.size()) + " of " +
                            std::to_string(s) + " grid points");
    for (int j = 0; j < s; ++j) {
      if (chunk_rows[j].q != dataset.grid.points[j])
        throw ValidationError(path.string() + ": chunk '" + id +
                              "' does not cover the full grid");
      sample.rates[j] = chunk_rows[j].rate;
      sample.qualities[j] = chunk_rows[j].quality;
    }
    dataset.samples.push_back(std::move(sample));
  }
  validate(dataset);
  return dataset;
}

void save_rd_csv(const std::filesystem::path& path, const RDDataset& dataset) {
  auto out = open_output(path);
  out << "chunk_id,q,rate_kbps,quality_db\n";
  for (const auto& s : dataset.samples) {
    check_chunk_id(s.chunk_id);
    for (int j = 0; j < dataset.grid.size(); ++j)
      out << s.chunk_id << ',' << format_double(dataset.grid.points[j]) << ','
          << format_double(s.rates[j]) << ',' << format_double(s.qualities[j])
          << '\n';
  }
}

std::vector<FeatureVector> load_features_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError(csv_error(path, 1, "empty file"));
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "chunk_id")
    throw ValidationError(csv_error(path, 1, "expected header 'chunk_id,f0,f1,...'"));
  for (std::size_t i = 1; i < header.size(); ++i)
    if (header[i] != "f" + std::to_string(i - 1))
      throw ValidationError(csv_error(path, 1, "expected feature column f" +
                                      std::to_string(i - 1) + ", got '" + header[i] + "'"));
  const std::size_t f = header.size() - 1;

  std::vector<FeatureVector> features;
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != f + 1)
      throw ValidationError(csv_error(path, line_no, "expected " +
                                      std::to_string(f + 1) + " fields, got " +
                                      std::to_string(fields.size())));
    FeatureVector fv;
    fv.chunk_id = fields[0];
    if (fv.chunk_id.empty())
      throw ValidationError(csv_error(path, line_no, "empty chunk_id"));
    if (!seen.insert(fv.chunk_id).second)
      throw ValidationError(csv_error(path, line_no, "duplicate chunk_id '" +
                                      fv.chunk_id + "'"));
    fv.values.resize(f);
    for (std::size_t i = 0; i < f; ++i)
      fv.values[i] = parse_csv_double(fields[i + 1], path, line_no);
    if (!fv.values.allFinite())
      throw ValidationError(csv_error(path, line_no, "non-finite feature value"));
    features.push_back(std::move(fv));
  }
  if (features.empty()) throw ValidationError(path.string() + ": no data rows");
  return features;
}

void save_features_csv(const std::filesystem::path& path,
                       const std::vector<FeatureVector>& features) {
  auto out = open_output(path);
  if (features.empty()) throw ValidationError("refusing to write empty feature set");
  const auto f = features.front().values.size();
  out << "chunk_id";
  for (Eigen::Index i = 0; i < f; ++i) out << ",f" << i;
  out << '\n';
  for (const auto& fv : features) {
    check_chunk_id(fv.chunk_id);
    if (fv.values.size() != f)
      throw ValidationError("inconsistent feature dimension at chunk '" +
                            fv.chunk_id + "'");
    out << fv.chunk_id;
    for (Eigen::Index i = 0; i < f; ++i) out << ',' << format_double(fv.values[i]);
    out << '\n';
  }
}

std::vector<std::pair<std::string, int>> load_labels_csv(
    const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError(csv_error(path, 1, "empty file"));
  const auto header = split_csv_line(line);
  if (header.size() != 2 || header[0] != "chunk_id")
    throw ValidationError(csv_error(path, 1,
        "expected a two-column header 'chunk_id,<label>', got '" + line + "'"));

  std::vector<std::pair<std::string, int>> out;
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 2)
      throw ValidationError(csv_error(path, line_no, "expected 2 fields, got " +
                                      std::to_string(fields.size())));
    if (fields[0].empty())
      throw ValidationError(csv_error(path, line_no, "empty chunk_id"));
    if (!seen.insert(fields[0]).second)
      throw ValidationError(csv_error(path, line_no, "duplicate chunk_id '" +
                                      fields[0] + "'"));
    out.emplace_back(fields[0], parse_csv_int(fields[1], path, line_no));
  }
  if (out.empty()) throw ValidationError(path.string() + ": no data rows");
  return out;
}

void save_labels_csv(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, int>>& rows,
                     const std::string& value_column) {
  auto out = open_output(path);
  out << "chunk_id," << value_column << '\n';
  for (const auto& [id, value] : rows) {
    check_chunk_id(id);
    out << id << ',' << value << '\n';
  }
}

void save_sweeps_csv(const std::filesystem::path& path,
                     const std::vector<Sweep>& sweeps) {
  auto out = open_output(path);
  out << "kind,label,avg_rate_kbps,avg_quality_db,worst_quality_db\n";
  for (const auto& sweep : sweeps)
    for (const auto& p : sweep.points)
      out << to_string(sweep.kind) << ',' << p.label << ','
          << format_double(p.avg_rate) << ',' << format_double(p.avg_quality)
          << ',' << format_double(p.worst_quality) << '\n';
}

void save_error_sweep_csv(const std::filesystem::path& path,
                          const std::vector<std::pair<int, double>>& rows) {
  auto out = open_output(path);
  out << "k,mean_relative_error\n";
  for (const auto& [k, err] : rows)
    out << k << ',' << format_double(err) << '\n';
}

json to_json(const ClusterModel& model) {
  validate(model);
  json centroids = json::array();
  for (const auto& c : model.centroids)
    centroids.push_back({{"cluster_id", c.cluster_id},
                         {"rates", vec_to_json(c.rates)},
                         {"qualities", vec_to_json(c.qualities)}});
  return {{"v", 1},
          {"grid", vec_to_json(model.grid.points)},
          {"stats", {{"means", vec_to_json(model.stats.means)},
                     {"stds", vec_to_json(model.stats.stds)}}},
          {"centroids", centroids},
          {"k", model.k},
          {"seed", model.seed}};
}

ClusterModel cluster_model_from_json(const json& j) {
  require_version(j, "cluster model");
  ClusterModel model;
  model.grid.points = vec_from_json(j.at("grid"));
  model.stats.means = vec_from_json(j.at("stats").at("means"));
  model.stats.stds = vec_from_json(j.at("stats").at("stds"));
  model.k = j.at("k").get<int>();
  model.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& c : j.at("centroids"))
    model.centroids.push_back({c.at("cluster_id").get<int>(),
                               vec_from_json(c.at("rates")),
                               vec_from_json(c.at("qualities"))});
  validate(model);
  return model;
}

json to_json(const ClassifierModel& model) {
  validate(model);
  json machines = json::array();
  std::size_t pair = 0;
  for (std::size_t a = 0; a < model.svm.classes.size(); ++a) {
    for (std::size_t b = a + 1; b < model.svm.classes.size(); ++b, ++pair) {
      const auto& m = model.svm.machines[pair];
      json sv = json::array();
      for (Eigen::Index r = 0; r < m.support_vectors.rows(); ++r)
        sv.push_back(vec_to_json(m.support_vectors.row(r).transpose()));
      machines.push_back({{"class_a", model.svm.classes[a]},
                          {"class_b", model.svm.classes[b]},
                          {"support_vectors", sv},
                          {"dual_coefs", vec_to_json(m.dual_coefs)},
                          {"bias", m.bias},
                          {"converged", m.converged}});
    }
  }
  return {{"v", 1},
          {"scaler", {{"means", vec_to_json(model.scaler.means)},
                      {"stds", vec_to_json(model.scaler.stds)}}},
          {"classes", model.svm.classes},
          {"hyperparams", {{"c", model.svm.hyperparams.c},
                           {"gamma", model.svm.hyperparams.gamma}}},
          {"machines", machines}};
}

ClassifierModel classifier_model_from_json(const json& j) {
  require_version(j, "classifier model");
  ClassifierModel model;
  model.scaler.means = vec_from_json(j.at("scaler").at("means"));
  model.scaler.stds = vec_from_json(j.at("scaler").at("stds"));
  model.svm.classes = j.at("classes").get<std::vector<int>>();
  model.svm.hyperparams.c = j.at("hyperparams").at("c").get<double>();
  model.svm.hyperparams.gamma = j.at("hyperparams").at("gamma").get<double>();

  const auto& machines = j.at("machines");
  std::size_t pair = 0;
  for (std::size_t a = 0; a < model.svm.classes.size(); ++a) {
    for (std::size_t b = a + 1; b < model.svm.classes.size(); ++b, ++pair) {
      if (pair >= machines.size())
        throw ValidationError("classifier model: missing binary machines");
      const auto& jm = machines[pair];
      if (jm.at("class_a").get<int>() != model.svm.classes[a] ||
          jm.at("class_b").get<int>() != model.svm.classes[b])
        throw ValidationError("classifier model: machine pair order mismatch");
      BinarySvm m;
      const auto& sv = jm.at("support_vectors");
      if (sv.empty())
        throw ValidationError("classifier model: machine without support vectors");
      m.support_vectors.resize(sv.size(), model.scaler.size());
      for (std::size_t r = 0; r < sv.size(); ++r)
        m.support_vectors.row(r) = vec_from_json(sv[r]).transpose();
      m.dual_coefs = vec_from_json(jm.at("dual_coefs"));
      m.bias = jm.at("bias").get<double>();
      m.converged = jm.at("converged").get<bool>();
      model.svm.machines.push_back(std::move(m));
    }
  }
  if (pair != machines.size())
    throw ValidationError("classifier model: extra binary machines");
  validate(model);
  return model;
}

json to_json(const TrainReport& report) {
  json grid = json::array();
  for (const auto& cell : report.cv_grid)
    grid.push_back({{"c", cell.c},
                    {"gamma", cell.gamma},
                    {"mean_cv_accuracy", cell.mean_cv_accuracy}});
  json confusion = json::array();
  for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index col = 0; col < report.confusion.cols(); ++col)
      row.push_back(report.confusion(r, col));
    confusion.push_back(std::move(row));
  }
  return {{"v", 1},
          {"cv_grid", grid},
          {"best", {{"c", report.best.c}, {"gamma", report.best.gamma}}},
          {"test_accuracy", report.test_accuracy},
          {"confusion_matrix", confusion},
          {"classes", report.classes},
          {"n_train", report.n_train},
          {"n_test", report.n_test}};
}

json to_json(const CorpusDistribution& w) {
  validate(w);
  return {{"v", 1},
          {"k", static_cast<int>(w.weights.size())},
          {"weights", vec_to_json(w.weights)}};
}

CorpusDistribution corpus_distribution_from_json(const json& j) {
  require_version(j, "corpus distribution");
  CorpusDistribution w;
  w.weights = vec_from_json(j.at("weights"));
  if (j.contains("k") && j.at("k").get<int>() != w.weights.size())
    throw ValidationError("corpus distribution: k does not match weights length");
  validate(w);
  return w;
}

json to_json(const AllocationSolution& solution) {
  return {{"v", 1},
          {"op_index", solution.op_index},
          {"op_values", vec_to_json(solution.op_values)},
          {"avg_rate_kbps", solution.avg_rate},
          {"avg_quality_db", solution.avg_quality},
          {"worst_quality_db", solution.worst_quality},
          {"lambda_star", solution.lambda_star},
          {"exact", solution.exact}};
}

json to_json(const SynthConfig& cfg) {
  validate(cfg);
  json archetypes = json::array();
  for (const auto& p : cfg.archetypes)
    archetypes.push_back({{"a", p.a}, {"b", p.b}, {"c", p.c}, {"d", p.d}});
  return {{"v", 1},
          {"n_chunks", cfg.n_chunks},
          {"k_true", cfg.k_true},
          {"grid", vec_to_json(cfg.grid.points)},
          {"archetypes", archetypes},
          {"mixture", vec_to_json(cfg.mixture)},
          {"rd_noise_rel", cfg.rd_noise_rel},
          {"feature_dim", cfg.feature_dim},
          {"feature_noise", cfg.feature_noise},
          {"seed", cfg.seed}};
}

SynthConfig synth_config_from_json(const json& j) {
  require_version(j, "synth config");
  SynthConfig cfg;
  cfg.n_chunks = j.at("n_chunks").get<int>();
  cfg.k_true = j.at("k_true").get<int>();
  cfg.grid.points = vec_from_json(j.at("grid"));
  for (const auto& p : j.at("archetypes"))
    cfg.archetypes.push_back({p.at("a").get<double>(), p.at("b").get<double>(),
                              p.at("c").get<double>(), p.at("d").get<double>()});
  cfg.mixture = vec_from_json(j.at("mixture"));
  if (j.contains("rd_noise_rel")) cfg.rd_noise_rel = j.at("rd_noise_rel").get<double>();
  if (j.contains("feature_dim")) cfg.feature_dim = j.at("feature_dim").get<int>();
  if (j.contains("feature_noise")) cfg.feature_noise = j.at("feature_noise").get<double>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  validate(cfg);
  return cfg;
}

void save_json(const std::filesystem::path& path, const json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

json load_json(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace rdopt
