#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "infomtl/adamax.hpp"
#include "infomtl/checkpoint.hpp"
#include "infomtl/data.hpp"
#include "infomtl/objectives.hpp"
#include "infomtl/weighting.hpp"

namespace infomtl {

struct TrainConfig {
  std::string name = "run";       // unique method label within a suite
  ObjectiveConfig objective;      // mode + alpha/beta/tau
  int epochs = 20;
  int patience = 3;
  int batch_size = 128;
  double lr = 5e-5;
  double dropout = 0.2;
  std::vector<int> hidden = {256};
  int repr_dim = 128;
  double data_fraction = 1.0;
  int diag_every = 0;             // 0 = diagnostics off
  double grad_clip = 0.0;         // 0 = off
  bool proportional_batches = false;
  double dwa_temperature = 2.0;
  bool f32 = false;
  uint64_t seed = 1;
  std::string dataset_path;       // provenance for run-dir tooling

  // test seam: when non-empty, epoch e reads its validation Avg from this
  // stream instead of evaluating (never serialized)
  std::vector<double> val_avg_stub;

  void validate(int num_tasks) const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_total = 0, train_ce = 0, train_infonce = 0, train_kl = 0;
  std::vector<double> train_per_task_ce;
  std::vector<double> val_scores;  // per task, percent
  double val_avg = 0;
  bool has_diag = false;
  double mi_xz = 0;                // InfoNCE bound on I(X;Z)
  std::vector<double> mi_zzt;      // per-task I(Z;Z_t) bound / histogram
};

struct RunRecord {
  TrainConfig config;
  std::vector<EpochRecord> epoch_log;
  int best_epoch = 0;  // 1-based; 0 = initialization
  double best_val_avg = 0;
  std::vector<std::vector<double>> test_scores;  // [task][metric], percent
  double test_avg = 0;
  std::vector<double> uniformity_per_task;  // shared Z on each task's test set
  std::vector<double> ari_per_task;         // output reprs vs gold labels
  ModelState model;                          // restored best checkpoint
  std::vector<std::pair<std::string, Tensor>> extra_params;
};

RunRecord train(const MultiTaskDataset& ds, const TrainConfig& config);

// per-task metric scores (percent) of a model on train/val/test splits
enum class SplitKind { train, val, test };
std::vector<std::vector<double>> evaluate_split(const ModelState& model,
                                                const MultiTaskDataset& ds,
                                                SplitKind which);

// Writes config.json, metrics.jsonl, summary.json, checkpoint/ and reprs/
// under `dir`. Re-running with identical inputs reproduces every byte.
void persist_run(const RunRecord& record, const MultiTaskDataset& ds,
                 const std::filesystem::path& dir);

struct SuiteConfig {
  std::string name = "experiment";
  std::vector<TrainConfig> methods;
  std::vector<uint64_t> seeds = {1, 2, 3};
  bool with_delta_p = true;
  std::string reference_method = "ew";  // matched by objective mode
  int jobs = 1;

  nlohmann::json to_json() const;
  static SuiteConfig from_json(const nlohmann::json& j);
};

struct SuiteRow {
  std::string method;
  double fraction = 1.0;
  std::vector<std::vector<double>> mean_scores;  // [task][metric]
  std::vector<std::vector<double>> std_scores;
  double avg_mean = 0, avg_std = 0;
  double dp = 0;
};

struct SuiteResult {
  std::vector<SuiteRow> rows;
  std::string report_csv;
  std::string long_csv;
};

// Cartesian (config x seed) runs; per-method mean/std across seeds; Avg and
// delta_p against the same-fraction EW rows. Run directories land under
// out_dir/<method>/seed<seed>.
SuiteResult run_suite(const MultiTaskDataset& ds, const SuiteConfig& suite,
                      const std::filesystem::path& out_dir);

}  // namespace infomtl
