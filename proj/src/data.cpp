#include "infomtl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "infomtl/common.hpp"

namespace infomtl {

using nlohmann::json;

std::vector<int> MultiTaskDataset::class_counts() const {
  std::vector<int> out;
  for (const auto& t : tasks) out.push_back(t.classes);
  return out;
}

std::vector<int64_t> MultiTaskDataset::train_counts() const {
  std::vector<int64_t> out;
  for (const auto& d : data) out.push_back(d.train.n());
  return out;
}

void MultiTaskDataset::validate() const {
  IMTL_CHECK(dx > 0, "dataset: dx must be positive");
  IMTL_CHECK(!tasks.empty(), "dataset: no tasks");
  IMTL_CHECK(tasks.size() == data.size(), "dataset: task/split count mismatch");
  for (size_t t = 0; t < tasks.size(); ++t) {
    const auto& spec = tasks[t];
    IMTL_CHECK(spec.classes >= 2, "dataset: task " + std::to_string(t) +
                                      " needs at least 2 classes");
    spec.metric.validate(spec.classes);
    for (const Split* s : {&data[t].train, &data[t].val, &data[t].test}) {
      IMTL_CHECK(s->features.size() ==
                     static_cast<size_t>(s->n()) * static_cast<size_t>(dx),
                 "dataset: ragged features in task " + std::to_string(t));
      for (size_t i = 0; i < s->labels.size(); ++i) {
        IMTL_CHECK(s->labels[i] >= 0 && s->labels[i] < spec.classes,
                   "dataset: label out of range in task " + std::to_string(t) +
                       " record " + std::to_string(i));
      }
    }
  }
}

Tensor MultiTaskDataset::split_features(int task, const Split& split) const {
  IMTL_CHECK(task >= 0 && task < num_tasks(), "split_features: bad task");
  return Tensor::from_values({split.n(), dx}, split.features);
}

void SyntheticConfig::validate() const {
  IMTL_CHECK(!tasks.empty(), "synthetic: no tasks configured");
  IMTL_CHECK(shared_dims >= 1 && per_task_dims >= 1 && redundant_dims >= 0,
             "synthetic: invalid dims");
  IMTL_CHECK(label_noise >= 0.0 && label_noise <= 1.0,
             "synthetic: label_noise must be in [0,1]");
  IMTL_CHECK(feature_noise >= 0.0, "synthetic: feature_noise must be >= 0");
  IMTL_CHECK(metrics.empty() || metrics.size() == tasks.size(),
             "synthetic: metrics must match task count when given");
  for (const auto& t : tasks) {
    IMTL_CHECK(t.classes >= 2, "synthetic: classes must be >= 2");
    IMTL_CHECK(t.train_n > 0 && t.val_n > 0 && t.test_n > 0,
               "synthetic: split sizes must be positive");
  }
}

SyntheticConfig default_synthetic_config(uint64_t seed) {
  SyntheticConfig cfg;
  cfg.seed = seed;
  cfg.shared_dims = 6;
  cfg.per_task_dims = 3;
  cfg.label_noise = 0.10;
  cfg.feature_noise = 0.5;
  // train sizes follow the benchmark skew (one task dominates by >10x)
  cfg.tasks = {
      {"emotion", 4, 72, 60, 200},
      {"hate", 2, 200, 60, 200},
      {"irony", 2, 64, 60, 200},
      {"offense", 2, 265, 60, 200},
      {"senti", 3, 1009, 120, 320},
      {"stance", 3, 58, 60, 200},
  };
  // signal dims = 6 + 6*3 = 24; redundant = 2x signal
  cfg.redundant_dims = 48;
  cfg.metrics = {
      {MetricKind::macro_f1, {}, true},
      {MetricKind::macro_f1, {}, true},
      {MetricKind::subset_macro_f1, {1}, true},
      {MetricKind::macro_f1, {}, true},
      {MetricKind::macro_recall, {}, true},
      {MetricKind::subset_macro_f1, {1, 2}, true},
  };
  return cfg;
}

std::string synthetic_config_to_json(const SyntheticConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["shared_dims"] = cfg.shared_dims;
  j["per_task_dims"] = cfg.per_task_dims;
  j["redundant_dims"] = cfg.redundant_dims;
  j["label_noise"] = cfg.label_noise;
  j["feature_noise"] = cfg.feature_noise;
  json tasks = json::array();
  for (size_t t = 0; t < cfg.tasks.size(); ++t) {
    const auto& tc = cfg.tasks[t];
    json jt;
    jt["name"] = tc.name;
    jt["classes"] = tc.classes;
    jt["train"] = tc.train_n;
    jt["val"] = tc.val_n;
    jt["test"] = tc.test_n;
    if (!cfg.metrics.empty()) {
      jt["metric"] = {
          {"kind", metric_kind_name(cfg.metrics[t].kind)},
          {"class_subset", cfg.metrics[t].class_subset},
          {"higher_is_better", cfg.metrics[t].higher_is_better}};
    }
    tasks.push_back(jt);
  }
  j["tasks"] = tasks;
  return j.dump(2);
}

SyntheticConfig synthetic_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError("bad synthetic config: " + std::string(e.what()));
  }
  SyntheticConfig cfg;
  cfg.seed = j.value("seed", 1ULL);
  cfg.shared_dims = j.value("shared_dims", 6);
  cfg.per_task_dims = j.value("per_task_dims", 3);
  cfg.redundant_dims = j.value("redundant_dims", 48);
  cfg.label_noise = j.value("label_noise", 0.1);
  cfg.feature_noise = j.value("feature_noise", 0.5);
  IMTL_CHECK(j.contains("tasks"), "synthetic config: missing tasks");
  for (const auto& jt : j.at("tasks")) {
    SyntheticTaskConfig tc;
    tc.name = jt.value("name", "task");
    tc.classes = jt.value("classes", 2);
    tc.train_n = jt.value("train", 100);
    tc.val_n = jt.value("val", 50);
    tc.test_n = jt.value("test", 100);
    cfg.tasks.push_back(tc);
    MetricSpec m;
    if (jt.contains("metric")) {
      const auto& jm = jt.at("metric");
      m.kind = metric_kind_from_name(jm.value("kind", "macro_f1"));
      if (jm.contains("class_subset")) {
        m.class_subset = jm.at("class_subset").get<std::vector<int>>();
      }
      m.higher_is_better = jm.value("higher_is_better", true);
    }
    cfg.metrics.push_back(m);
  }
  cfg.validate();
  return cfg;
}

MultiTaskDataset generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  int T = static_cast<int>(config.tasks.size());
  int dx = config.dx();
  int sig = config.shared_dims + config.per_task_dims;

  RngStream root(config.seed);

  // one label map per task, fixed across splits
  std::vector<std::vector<double>> maps;
  for (int t = 0; t < T; ++t) {
    RngStream mr = root.fork("labelmap", static_cast<uint64_t>(t));
    std::vector<double> m(static_cast<size_t>(config.tasks[static_cast<size_t>(t)].classes) *
                          static_cast<size_t>(sig));
    for (double& v : m) v = mr.normal();
    maps.push_back(std::move(m));
  }

  MultiTaskDataset ds;
  ds.dx = dx;
  for (int t = 0; t < T; ++t) {
    const auto& tc = config.tasks[static_cast<size_t>(t)];
    TaskSpec spec;
    spec.id = t;
    spec.name = tc.name;
    spec.classes = tc.classes;
    spec.metric = config.metrics.empty()
                      ? MetricSpec{MetricKind::macro_f1, {}, true}
                      : config.metrics[static_cast<size_t>(t)];
    ds.tasks.push_back(spec);
    ds.data.emplace_back();
  }

  for (int t = 0; t < T; ++t) {
    const auto& tc = config.tasks[static_cast<size_t>(t)];
    int classes = tc.classes;
    const auto& map = maps[static_cast<size_t>(t)];
    int own_off = config.shared_dims + t * config.per_task_dims;
    const int sizes[3] = {tc.train_n, tc.val_n, tc.test_n};
    for (int s = 0; s < 3; ++s) {
      RngStream rng = root.fork("examples", static_cast<uint64_t>(t * 3 + s));
      Split split;
      split.features.reserve(static_cast<size_t>(sizes[s]) * static_cast<size_t>(dx));
      split.labels.reserve(static_cast<size_t>(sizes[s]));
      for (int i = 0; i < sizes[s]; ++i) {
        std::vector<double> x(static_cast<size_t>(dx));
        for (double& v : x) v = rng.normal();
        // logits over [shared | own block]
        int best = 0;
        double best_v = -1e300;
        for (int c = 0; c < classes; ++c) {
          double acc = 0.0;
          const double* mrow = &map[static_cast<size_t>(c * sig)];
          for (int k = 0; k < config.shared_dims; ++k) acc += mrow[k] * x[static_cast<size_t>(k)];
          for (int k = 0; k < config.per_task_dims; ++k)
            acc += mrow[config.shared_dims + k] * x[static_cast<size_t>(own_off + k)];
          if (acc > best_v) {
            best_v = acc;
            best = c;
          }
        }
        int label = best;
        if (config.label_noise > 0.0 && rng.bernoulli(config.label_noise)) {
          int other = rng.uniform_int(classes - 1);
          label = other >= label ? other + 1 : other;
        }
        if (config.feature_noise > 0.0) {
          for (double& v : x) v += config.feature_noise * rng.normal();
        }
        split.features.insert(split.features.end(), x.begin(), x.end());
        split.labels.push_back(label);
      }
      TaskSplits& td = ds.data[static_cast<size_t>(t)];
      (s == 0 ? td.train : s == 1 ? td.val : td.test) = std::move(split);
    }
  }
  ds.validate();
  return ds;
}

// ------------------------------------------------------------------- I/O

namespace {

json metric_to_json(const MetricSpec& m) {
  json j;
  j["kind"] = metric_kind_name(m.kind);
  j["class_subset"] = m.class_subset;
  j["higher_is_better"] = m.higher_is_better;
  return j;
}

MetricSpec metric_from_json(const json& j) {
  MetricSpec m;
  m.kind = metric_kind_from_name(j.at("kind").get<std::string>());
  if (j.contains("class_subset"))
    m.class_subset = j.at("class_subset").get<std::vector<int>>();
  m.higher_is_better = j.value("higher_is_better", true);
  return m;
}

void write_split_jsonl(const std::filesystem::path& path, int task, int dx,
                       const Split& split) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os.precision(17);
  for (int i = 0; i < split.n(); ++i) {
    json rec;
    rec["task"] = task;
    rec["label"] = split.labels[static_cast<size_t>(i)];
    rec["features"] = std::vector<double>(
        split.features.begin() + static_cast<long>(i) * dx,
        split.features.begin() + static_cast<long>(i + 1) * dx);
    os << rec.dump() << "\n";
  }
}

Split read_split_jsonl(const std::filesystem::path& path, int task,
                       int classes, int dx) {
  std::ifstream is(path);
  if (!is) throw IoError("missing split file: " + path.string());
  Split split;
  std::string line;
  int idx = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError(path.string() + " record " + std::to_string(idx) +
                    ": bad JSON (" + e.what() + ")");
    }
    if (!rec.contains("task") || !rec.contains("features") ||
        !rec.contains("label")) {
      throw IoError(path.string() + " record " + std::to_string(idx) +
                    ": missing task/features/label field");
    }
    int rt = rec.at("task").get<int>();
    if (rt != task) {
      throw IoError(path.string() + " record " + std::to_string(idx) +
                    ": dangling task reference " + std::to_string(rt) +
                    " (expected " + std::to_string(task) + ")");
    }
    auto feats = rec.at("features").get<std::vector<double>>();
    if (static_cast<int>(feats.size()) != dx) {
      throw IoError(path.string() + " record " + std::to_string(idx) +
                    ": feature length " + std::to_string(feats.size()) +
                    " != dx " + std::to_string(dx));
    }
    int label = rec.at("label").get<int>();
    if (label < 0 || label >= classes) {
      throw IoError(path.string() + " record " + std::to_string(idx) +
                    ": label " + std::to_string(label) + " out of range [0," +
                    std::to_string(classes) + ")");
    }
    split.features.insert(split.features.end(), feats.begin(), feats.end());
    split.labels.push_back(label);
    ++idx;
  }
  return split;
}

}  // namespace

void save_dataset(const MultiTaskDataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["dx"] = ds.dx;
  json jtasks = json::array();
  for (int t = 0; t < ds.num_tasks(); ++t) {
    const auto& spec = ds.tasks[static_cast<size_t>(t)];
    std::string base = "task" + std::to_string(t);
    json jt;
    jt["id"] = spec.id;
    jt["name"] = spec.name;
    jt["classes"] = spec.classes;
    jt["metric"] = metric_to_json(spec.metric);
    jt["splits"] = {{"train", base + "_train.jsonl"},
                    {"val", base + "_val.jsonl"},
                    {"test", base + "_test.jsonl"}};
    jtasks.push_back(jt);
    const auto& td = ds.data[static_cast<size_t>(t)];
    write_split_jsonl(dir / (base + "_train.jsonl"), t, ds.dx, td.train);
    write_split_jsonl(dir / (base + "_val.jsonl"), t, ds.dx, td.val);
    write_split_jsonl(dir / (base + "_test.jsonl"), t, ds.dx, td.test);
  }
  manifest["tasks"] = jtasks;
  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw IoError("cannot write manifest in " + dir.string());
  os << manifest.dump(2) << "\n";
}

MultiTaskDataset load_dataset(const std::filesystem::path& manifest_path) {
  std::filesystem::path path = manifest_path;
  if (std::filesystem::is_directory(path)) path /= "manifest.json";
  std::ifstream is(path);
  if (!is) throw IoError("missing dataset manifest: " + path.string());
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw IoError("bad dataset manifest: " + std::string(e.what()));
  }
  auto dir = path.parent_path();

  MultiTaskDataset ds;
  if (!manifest.contains("dx") || !manifest.contains("tasks")) {
    throw IoError("dataset manifest: missing dx/tasks");
  }
  ds.dx = manifest.at("dx").get<int>();
  for (const auto& jt : manifest.at("tasks")) {
    TaskSpec spec;
    spec.id = jt.at("id").get<int>();
    spec.name = jt.value("name", "task" + std::to_string(spec.id));
    spec.classes = jt.at("classes").get<int>();
    spec.metric = metric_from_json(jt.at("metric"));
    const auto& js = jt.at("splits");
    for (const char* key : {"train", "val", "test"}) {
      if (!js.contains(key)) {
        throw IoError("dataset manifest: task " + std::to_string(spec.id) +
                      " missing split '" + key + "'");
      }
    }
    TaskSplits td;
    td.train = read_split_jsonl(dir / js.at("train").get<std::string>(),
                                spec.id, spec.classes, ds.dx);
    td.val = read_split_jsonl(dir / js.at("val").get<std::string>(), spec.id,
                              spec.classes, ds.dx);
    td.test = read_split_jsonl(dir / js.at("test").get<std::string>(), spec.id,
                               spec.classes, ds.dx);
    ds.tasks.push_back(std::move(spec));
    ds.data.push_back(std::move(td));
  }
  ds.validate();
  return ds;
}

MultiTaskDataset subsample(const MultiTaskDataset& ds, double fraction,
                           uint64_t seed) {
  IMTL_CHECK(fraction > 0.0 && fraction <= 1.0,
             "subsample: fraction must be in (0, 1]");
  if (fraction == 1.0) return ds;
  MultiTaskDataset out = ds;
  RngStream root(seed);
  for (int t = 0; t < ds.num_tasks(); ++t) {
    const Split& full = ds.data[static_cast<size_t>(t)].train;
    int keep = static_cast<int>(
        std::ceil(fraction * static_cast<double>(full.n())));
    IMTL_CHECK(keep > 0, "subsample: empty result for task " + std::to_string(t));
    std::vector<int> idx(static_cast<size_t>(full.n()));
    std::iota(idx.begin(), idx.end(), 0);
    RngStream r = root.fork("subsample", static_cast<uint64_t>(t));
    r.shuffle(idx);
    idx.resize(static_cast<size_t>(keep));
    Split reduced;
    for (int i : idx) {
      reduced.labels.push_back(full.labels[static_cast<size_t>(i)]);
      reduced.features.insert(
          reduced.features.end(),
          full.features.begin() + static_cast<long>(i) * ds.dx,
          full.features.begin() + static_cast<long>(i + 1) * ds.dx);
    }
    out.data[static_cast<size_t>(t)].train = std::move(reduced);
  }
  return out;
}

// ---------------------------------------------------------------- sampler

BatchSampler::BatchSampler(const MultiTaskDataset& ds, int batch_size,
                           RngStream rng, bool proportional)
    : ds_(ds), batch_size_(batch_size), proportional_(proportional),
      rng_(rng) {
  int T = ds.num_tasks();
  IMTL_CHECK(batch_size >= T,
             "sampler: batch size must be at least the task count");
  for (int t = 0; t < T; ++t) {
    IMTL_CHECK(ds.data[static_cast<size_t>(t)].train.n() > 0,
               "sampler: task " + std::to_string(t) + " has no train data");
  }

  int64_t n_max = 0;
  for (int t = 0; t < T; ++t) {
    int64_t n = ds.data[static_cast<size_t>(t)].train.n();
    if (n > n_max) {
      n_max = n;
      largest_task_ = t;
    }
  }

  if (proportional_) {
    // largest-remainder allocation of B across tasks by train size
    int64_t total = 0;
    for (int t = 0; t < T; ++t) total += ds.data[static_cast<size_t>(t)].train.n();
    prop_counts_.assign(static_cast<size_t>(T), 0);
    std::vector<std::pair<double, int>> rema;
    int assigned = 0;
    for (int t = 0; t < T; ++t) {
      double exact = static_cast<double>(batch_size) *
                     static_cast<double>(ds.data[static_cast<size_t>(t)].train.n()) /
                     static_cast<double>(total);
      int fl = std::max(1, static_cast<int>(exact));
      prop_counts_[static_cast<size_t>(t)] = fl;
      assigned += fl;
      rema.push_back({exact - fl, t});
    }
    std::sort(rema.rbegin(), rema.rend());
    for (int i = 0; assigned < batch_size; ++i) {
      prop_counts_[static_cast<size_t>(rema[static_cast<size_t>(i % T)].second)] += 1;
      ++assigned;
    }
    while (assigned > batch_size) {  // the max(1,...) floor can overshoot
      for (int t = 0; t < T && assigned > batch_size; ++t) {
        if (prop_counts_[static_cast<size_t>(t)] > 1) {
          prop_counts_[static_cast<size_t>(t)] -= 1;
          --assigned;
        }
      }
    }
    batches_per_epoch_ = static_cast<int>(
        (total + batch_size - 1) / batch_size);
    largest_exact_ = false;
  } else {
    int q = batch_size / T;
    int rem = batch_size % T;
    // Exactly-once dealing of the largest task: pick an epoch length N_b
    // with per-batch counts in {q, q+1} summing to n_max, as close to the
    // proportional length n_max*T/B as the interval allows.
    int64_t target = std::llround(static_cast<double>(n_max) * T /
                                  static_cast<double>(batch_size));
    largest_exact_ = false;
    if (rem >= 1) {
      int64_t lo = (n_max + q) / (q + 1);  // ceil(n_max/(q+1))
      int64_t hi = n_max / q;              // floor(n_max/q)
      if (lo <= hi && hi >= 1) {
        int64_t nb = std::clamp(target, std::max<int64_t>(1, lo), hi);
        batches_per_epoch_ = static_cast<int>(nb);
        largest_extras_ = static_cast<int>(n_max - nb * q);
        largest_exact_ = true;
      }
    } else if (q > 0 && n_max % q == 0) {
      batches_per_epoch_ = static_cast<int>(n_max / q);
      largest_extras_ = 0;
      largest_exact_ = true;
    }
    if (!largest_exact_) {
      // no feasible exact dealing; every task reshuffles on exhaustion
      batches_per_epoch_ = std::max<int>(1, static_cast<int>(target));
      largest_extras_ = 0;
    }
  }

  decks_.resize(static_cast<size_t>(T));
  cursors_.assign(static_cast<size_t>(T), 0);
  for (int t = 0; t < T; ++t) {
    auto& deck = decks_[static_cast<size_t>(t)];
    deck.resize(static_cast<size_t>(ds.data[static_cast<size_t>(t)].train.n()));
    std::iota(deck.begin(), deck.end(), 0);
  }
  start_epoch();
}

void BatchSampler::start_epoch() {
  for (size_t t = 0; t < decks_.size(); ++t) {
    rng_.shuffle(decks_[t]);
    cursors_[t] = 0;
  }
  batch_in_epoch_ = 0;
  rotation_ = 0;
}

std::vector<int> BatchSampler::batch_counts() {
  int T = ds_.num_tasks();
  if (proportional_) return prop_counts_;
  int q = batch_size_ / T;
  int rem = batch_size_ % T;
  std::vector<int> counts(static_cast<size_t>(T), q);
  int k = batch_in_epoch_;
  int left = rem;
  if (largest_exact_ && largest_extras_ > 0 && left > 0) {
    // Bresenham spread of the largest task's extras across the epoch
    int64_t before = static_cast<int64_t>(k) * largest_extras_ / batches_per_epoch_;
    int64_t after =
        static_cast<int64_t>(k + 1) * largest_extras_ / batches_per_epoch_;
    if (after > before) {
      counts[static_cast<size_t>(largest_task_)] += 1;
      --left;
    }
  }
  if (left > 0 && T > 1) {
    for (int j = 0; j < left; ++j) {
      int slot = (rotation_ + j) % (T - 1);
      int task = slot >= largest_task_ ? slot + 1 : slot;
      counts[static_cast<size_t>(task)] += 1;
    }
    rotation_ = (rotation_ + left) % (T - 1);
  } else if (left > 0) {
    counts[0] += left;
  }
  return counts;
}

MultiTaskBatch BatchSampler::next() {
  if (batch_in_epoch_ >= batches_per_epoch_) start_epoch();
  int T = ds_.num_tasks();
  std::vector<int> counts = batch_counts();

  MultiTaskBatch batch;
  batch.rows_by_task.resize(static_cast<size_t>(T));
  std::vector<double> features;
  features.reserve(static_cast<size_t>(batch_size_) * static_cast<size_t>(ds_.dx));
  int row = 0;
  for (int t = 0; t < T; ++t) {
    const Split& train = ds_.data[static_cast<size_t>(t)].train;
    auto& deck = decks_[static_cast<size_t>(t)];
    auto& cursor = cursors_[static_cast<size_t>(t)];
    for (int i = 0; i < counts[static_cast<size_t>(t)]; ++i) {
      if (cursor >= deck.size()) {
        rng_.shuffle(deck);
        cursor = 0;
      }
      int idx = deck[cursor++];
      features.insert(features.end(),
                      train.features.begin() + static_cast<long>(idx) * ds_.dx,
                      train.features.begin() + static_cast<long>(idx + 1) * ds_.dx);
      batch.labels.push_back(train.labels[static_cast<size_t>(idx)]);
      batch.task_ids.push_back(t);
      batch.rows_by_task[static_cast<size_t>(t)].push_back(row++);
    }
  }
  batch.x = Tensor::from_values({row, ds_.dx}, std::move(features));
  ++batch_in_epoch_;
  return batch;
}

}  // namespace infomtl
