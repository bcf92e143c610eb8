#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rdopt/allocation.hpp"
#include "rdopt/classifier.hpp"
#include "rdopt/evaluation.hpp"
#include "rdopt/synth_corpus.hpp"
#include "rdopt/types.hpp"

namespace rdopt {

// Shortest-round-trip decimal formatting used in every CSV we write.
std::string format_double(double v);

// R-D sample CSV: header `chunk_id,q,rate_kbps,quality_db`, one row per
// (chunk, grid point). The grid is inferred as the sorted set of distinct
// q values; every chunk must cover the full grid. Parse errors carry the
// 1-based line number.
RDDataset load_rd_csv(const std::filesystem::path& path);
void save_rd_csv(const std::filesystem::path& path, const RDDataset& dataset);

// Feature CSV: header `chunk_id,f0,f1,...`.
std::vector<FeatureVector> load_features_csv(const std::filesystem::path& path);
void save_features_csv(const std::filesystem::path& path,
                       const std::vector<FeatureVector>& features);

// Two-column label CSV: `chunk_id,<value column>`; the value column name is
// free on load (cluster assignments, ground-truth labels, predictions all
// share the shape).
std::vector<std::pair<std::string, int>> load_labels_csv(
    const std::filesystem::path& path);
void save_labels_csv(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, int>>& rows,
                     const std::string& value_column);

// Sweep CSV: header `kind,label,avg_rate_kbps,avg_quality_db,worst_quality_db`.
void save_sweeps_csv(const std::filesystem::path& path,
                     const std::vector<Sweep>& sweeps);

// k / mean_relative_error CSV emitted by the cluster-count sweep.
void save_error_sweep_csv(const std::filesystem::path& path,
                          const std::vector<std::pair<int, double>>& rows);

// JSON documents (all carry a schema version field "v": 1).
nlohmann::json to_json(const ClusterModel& model);
ClusterModel cluster_model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ClassifierModel& model);
ClassifierModel classifier_model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainReport& report);

nlohmann::json to_json(const CorpusDistribution& w);
CorpusDistribution corpus_distribution_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AllocationSolution& solution);

nlohmann::json to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j);

void save_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json load_json(const std::filesystem::path& path);

}  // namespace rdopt
