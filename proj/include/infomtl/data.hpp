#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "infomtl/metrics.hpp"
#include "infomtl/rng.hpp"
#include "infomtl/tensor.hpp"

namespace infomtl {

struct TaskSpec {
  int id = 0;
  std::string name;
  int classes = 2;
  MetricSpec metric;
};

struct Split {
  std::vector<double> features;  // n * dx, row-major
  std::vector<int> labels;
  int n() const { return static_cast<int>(labels.size()); }
};

struct TaskSplits {
  Split train, val, test;
};

struct MultiTaskDataset {
  int dx = 0;
  std::vector<TaskSpec> tasks;
  std::vector<TaskSplits> data;  // one per task

  int num_tasks() const { return static_cast<int>(tasks.size()); }
  std::vector<int> class_counts() const;
  std::vector<int64_t> train_counts() const;
  void validate() const;

  // features of one split as a {n, dx} tensor
  Tensor split_features(int task, const Split& split) const;
};

struct SyntheticTaskConfig {
  std::string name;
  int classes = 2;
  int train_n = 0, val_n = 0, test_n = 0;
};

// Shared dims drive every task's label, each task's own block drives only
// that task, redundant dims are pure noise. Labels come from a per-task
// random linear map + argmax, then flip to a uniform other label with
// probability label_noise; feature_noise adds N(0, scale^2) to every
// coordinate after labeling.
struct SyntheticConfig {
  int shared_dims = 6;
  int per_task_dims = 3;
  int redundant_dims = 48;
  double label_noise = 0.1;
  double feature_noise = 0.5;
  uint64_t seed = 1;
  std::vector<SyntheticTaskConfig> tasks;
  std::vector<MetricSpec> metrics;  // optional; defaults to macro-F1 per task

  int dx() const {
    return shared_dims +
           per_task_dims * static_cast<int>(tasks.size()) + redundant_dims;
  }
  void validate() const;
};

// The default 6-task generator config: class counts (4,2,2,2,3,3), train
// sizes following the benchmark skew with one dominant task, redundant dims
// at twice the signal dims, 10% label noise.
SyntheticConfig default_synthetic_config(uint64_t seed);

std::string synthetic_config_to_json(const SyntheticConfig& cfg);
SyntheticConfig synthetic_config_from_json(const std::string& text);

MultiTaskDataset generate_synthetic(const SyntheticConfig& config);

// On-disk format: manifest.json naming one JSONL file per (task, split);
// each record is {"task": int, "features": [...], "label": int}.
void save_dataset(const MultiTaskDataset& ds, const std::filesystem::path& dir);
MultiTaskDataset load_dataset(const std::filesystem::path& manifest_path);

// Per-task train split reduced to ceil(fraction * n) by seeded shuffle;
// val/test untouched.
MultiTaskDataset subsample(const MultiTaskDataset& ds, double fraction,
                           uint64_t seed);

struct MultiTaskBatch {
  Tensor x;                                  // {B, dx}
  std::vector<int> labels;                   // per row
  std::vector<int> task_ids;                 // per row
  std::vector<std::vector<int>> rows_by_task;  // rows of each task
  int size() const { return static_cast<int>(labels.size()); }
};

// Task-uniform mixed-batch sampler. Every batch contains every task with
// floor(B/T) or +1 examples; tasks draw without replacement from per-task
// shuffled decks; the epoch is defined by the largest task, which is dealt
// exactly once per epoch whenever B, T and its size make that feasible
// (smaller tasks reshuffle and repeat). proportional=true switches to
// size-proportional allocation instead.
class BatchSampler {
 public:
  BatchSampler(const MultiTaskDataset& ds, int batch_size, RngStream rng,
               bool proportional = false);

  int batches_per_epoch() const { return batches_per_epoch_; }
  MultiTaskBatch next();

 private:
  void start_epoch();
  std::vector<int> batch_counts();

  const MultiTaskDataset& ds_;
  int batch_size_;
  bool proportional_;
  RngStream rng_;
  int largest_task_ = 0;
  int batches_per_epoch_ = 0;
  int largest_extras_ = 0;  // +1 slots the largest task receives per epoch
  bool largest_exact_ = true;
  int batch_in_epoch_ = 0;
  int rotation_ = 0;
  std::vector<std::vector<int>> decks_;
  std::vector<size_t> cursors_;
  std::vector<int> prop_counts_;
};

}  // namespace infomtl
