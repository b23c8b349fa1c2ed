#include "infomtl/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>

#include "infomtl/common.hpp"
#include "infomtl/metrics.hpp"

namespace infomtl {

using nlohmann::json;

void TrainConfig::validate(int num_tasks) const {
  objective.validate();
  IMTL_CHECK(epochs >= 0, "train: epochs must be >= 0");
  if (epochs > 0) {
    IMTL_CHECK(patience >= 1 && patience <= epochs,
               "train: patience must lie in [1, epochs]");
  }
  IMTL_CHECK(batch_size >= num_tasks,
             "train: batch size must be at least the task count");
  IMTL_CHECK(lr > 0.0, "train: learning rate must be positive");
  IMTL_CHECK(dropout >= 0.0 && dropout < 1.0, "train: dropout in [0,1)");
  IMTL_CHECK(!hidden.empty() && repr_dim > 0, "train: bad encoder sizes");
  IMTL_CHECK(data_fraction > 0.0 && data_fraction <= 1.0,
             "train: data_fraction in (0,1]");
  IMTL_CHECK(diag_every >= 0 && grad_clip >= 0.0, "train: bad knobs");
  if (objective.mode == Method::pcgrad) {
    IMTL_CHECK(num_tasks >= 2, "train: pcgrad needs at least two tasks");
  }
}

json TrainConfig::to_json() const {
  json j;
  j["name"] = name;
  j["mode"] = method_name(objective.mode);
  j["alpha"] = objective.alpha;
  j["beta"] = objective.beta;
  j["tau"] = objective.tau;
  j["epochs"] = epochs;
  j["patience"] = patience;
  j["batch_size"] = batch_size;
  j["lr"] = lr;
  j["dropout"] = dropout;
  j["hidden"] = hidden;
  j["repr_dim"] = repr_dim;
  j["data_fraction"] = data_fraction;
  j["diag_every"] = diag_every;
  j["grad_clip"] = grad_clip;
  j["proportional_batches"] = proportional_batches;
  j["dwa_temperature"] = dwa_temperature;
  j["f32"] = f32;
  j["seed"] = seed;
  j["dataset"] = dataset_path;
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.name = j.value("name", "run");
  c.objective.mode = method_from_name(j.value("mode", "ew"));
  c.objective.alpha = j.value("alpha", 0.0);
  c.objective.beta = j.value("beta", 0.0);
  c.objective.tau = j.value("tau", 1.0);
  c.epochs = j.value("epochs", 20);
  c.patience = j.value("patience", 3);
  c.batch_size = j.value("batch_size", 128);
  c.lr = j.value("lr", 5e-5);
  c.dropout = j.value("dropout", 0.2);
  if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<int>>();
  c.repr_dim = j.value("repr_dim", 128);
  c.data_fraction = j.value("data_fraction", 1.0);
  c.diag_every = j.value("diag_every", 0);
  c.grad_clip = j.value("grad_clip", 0.0);
  c.proportional_batches = j.value("proportional_batches", false);
  c.dwa_temperature = j.value("dwa_temperature", 2.0);
  c.f32 = j.value("f32", false);
  c.seed = j.value("seed", 1ULL);
  c.dataset_path = j.value("dataset", "");
  return c;
}

std::vector<std::vector<double>> evaluate_split(const ModelState& model,
                                                const MultiTaskDataset& ds,
                                                SplitKind which) {
  std::vector<std::vector<double>> out;
  for (int t = 0; t < ds.num_tasks(); ++t) {
    const TaskSplits& td = ds.data[static_cast<size_t>(t)];
    const Split& split = which == SplitKind::train
                             ? td.train
                             : which == SplitKind::val ? td.val : td.test;
    Tensor x = ds.split_features(t, split);
    auto preds = predict_labels(model, x, t);
    double score =
        confusion_metric(split.labels, preds,
                         ds.tasks[static_cast<size_t>(t)].classes,
                         ds.tasks[static_cast<size_t>(t)].metric);
    out.push_back({100.0 * score});
  }
  return out;
}

namespace {

struct PrecisionScope {
  explicit PrecisionScope(bool f32) {
    prev = run_precision();
    set_run_precision(f32 ? Precision::f32 : Precision::f64);
  }
  ~PrecisionScope() { set_run_precision(prev); }
  Precision prev;
};

double clip_gradients(std::vector<Tensor>& params, double clip) {
  double norm2 = 0.0;
  for (auto& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) norm2 += g * g;
  }
  double norm = std::sqrt(norm2);
  if (clip > 0.0 && norm > clip) {
    double s = clip / norm;
    for (auto& p : params) {
      if (!p.has_grad()) continue;
      auto& g = p.data_->grad;
      for (double& x : g) x *= s;
    }
  }
  return norm;
}

// diagnostics subset: first examples of each task's val split, deterministic
Tensor diag_features(const MultiTaskDataset& ds, int cap_total) {
  int T = ds.num_tasks();
  int per_task = std::max(2, cap_total / std::max(1, T));
  std::vector<Tensor> parts;
  for (int t = 0; t < T; ++t) {
    const Split& val = ds.data[static_cast<size_t>(t)].val;
    int n = std::min(per_task, val.n());
    std::vector<double> feats(val.features.begin(),
                              val.features.begin() +
                                  static_cast<long>(n) * ds.dx);
    parts.push_back(Tensor::from_values({n, ds.dx}, std::move(feats)));
  }
  return concat_rows(parts);
}

void compute_diagnostics(const ModelState& model, const MultiTaskDataset& ds,
                         const TrainConfig& cfg, const RngStream& root,
                         int epoch, EpochRecord* rec) {
  rec->has_diag = true;
  Tensor xd = diag_features(ds, 256);
  RngStream diag = root.fork("diag", static_cast<uint64_t>(epoch));
  bool train_pass = cfg.dropout > 0.0;
  Tensor z = model.encode(xd, &diag, train_pass);
  Tensor zpos = model.encode(xd, &diag, train_pass);
  rec->mi_xz = mi_xz_estimate(z, zpos, cfg.objective.tau);

  rec->mi_zzt.clear();
  for (int t = 0; t < ds.num_tasks(); ++t) {
    const Split& val = ds.data[static_cast<size_t>(t)].val;
    Tensor x = ds.split_features(t, val);
    Tensor ze = model.encode(x, nullptr, false);
    if (!model.sto_heads.empty()) {
      auto sf = model.stochastic_forward(ze, t, nullptr, SampleMode::mean);
      rec->mi_zzt.push_back(mi_zzt_estimate(sf.mu, sf.logvar));
    } else {
      Tensor logits = model.head_logits(ze, t);
      uint64_t hseed = splitmix64(cfg.seed ^ (0x9e37ULL * (epoch + 1)) ^
                                  static_cast<uint64_t>(t));
      rec->mi_zzt.push_back(mi_histogram(ze, logits, hseed));
    }
  }
}

// one optimizer step for a weighting-baseline batch; returns the breakdown
LossBreakdown pcgrad_step(const MultiTaskBatch& batch, ModelState& model,
                          std::vector<Tensor>& all_params, size_t n_enc_params,
                          Adamax& opt, RngStream& dropout_rng,
                          RngStream& surgery_rng, double grad_clip) {
  Tape tape;
  TaskLossSet set = per_task_ce_losses(batch, model, dropout_rng, true);

  std::vector<std::vector<double>> enc_grads;
  std::vector<std::vector<double>> accum(all_params.size());
  for (size_t p = 0; p < all_params.size(); ++p) {
    accum[p].assign(all_params[p].values().size(), 0.0);
  }

  LossBreakdown breakdown;
  breakdown.ce = set.mean_ce.item();
  breakdown.per_task_count = set.counts;
  double total = 0.0;
  for (int t = 0; t < static_cast<int>(set.task_ce.size()); ++t) {
    if (!set.task_ce[static_cast<size_t>(t)].defined()) {
      breakdown.per_task_ce.push_back(0.0);
      continue;
    }
    double lt = set.task_ce[static_cast<size_t>(t)].item();
    breakdown.per_task_ce.push_back(lt);
    total += lt;
    tape.backward(set.task_ce[static_cast<size_t>(t)]);
    std::vector<double> flat;
    for (size_t p = 0; p < n_enc_params; ++p) {
      const auto& g = all_params[p].grad();
      if (g.empty()) {
        flat.insert(flat.end(), all_params[p].values().size(), 0.0);
      } else {
        flat.insert(flat.end(), g.begin(), g.end());
      }
    }
    enc_grads.push_back(std::move(flat));
    for (size_t p = n_enc_params; p < all_params.size(); ++p) {
      if (!all_params[p].has_grad()) continue;
      const auto& g = all_params[p].grad();
      for (size_t i = 0; i < g.size(); ++i) accum[p][i] += g[i];
    }
  }
  breakdown.total = Tensor::scalar(total);

  std::vector<double> combined;
  if (enc_grads.size() >= 2) {
    combined = pcgrad_combine(enc_grads, surgery_rng);
  } else {
    combined = enc_grads.at(0);
  }
  size_t off = 0;
  for (size_t p = 0; p < n_enc_params; ++p) {
    size_t n = all_params[p].values().size();
    accum[p].assign(combined.begin() + static_cast<long>(off),
                    combined.begin() + static_cast<long>(off + n));
    off += n;
  }
  for (size_t p = 0; p < all_params.size(); ++p) {
    all_params[p].data_->grad = accum[p];
  }
  clip_gradients(all_params, grad_clip);
  opt.step();
  opt.zero_grad();
  return breakdown;
}

}  // namespace

RunRecord train(const MultiTaskDataset& dataset, const TrainConfig& config) {
  dataset.validate();
  config.validate(dataset.num_tasks());
  PrecisionScope precision(config.f32);

  MultiTaskDataset ds =
      config.data_fraction < 1.0
          ? subsample(dataset, config.data_fraction, config.seed)
          : dataset;

  RngStream root(config.seed);
  RngStream dropout_rng = root.fork("dropout");
  RngStream sample_rng = root.fork("reparam");
  RngStream baseline_rng = root.fork("baselines");

  ObjectiveConfig objective = config.objective.normalized();
  int T = ds.num_tasks();

  ModelState model = ModelState::create(
      objective.mode, ds.dx, config.hidden, config.repr_dim, ds.class_counts(),
      config.dropout, root.fork("init"));

  TaskWeightState weight_state = TaskWeightState::create(
      objective.mode, T, ds.train_counts(), baseline_rng.fork("rlw"),
      config.dwa_temperature);

  std::vector<Tensor> all_params = model.parameters();
  size_t n_enc_params = 2 * model.encoder.layers.size();
  for (auto& [name, t] : weight_state.named_parameters()) {
    all_params.push_back(t);
  }
  Adamax opt(all_params, {config.lr, 0.9, 0.999, 1e-8});

  BatchSampler sampler(ds, config.batch_size, root.fork("sampling"),
                       config.proportional_batches);
  RngStream surgery_rng = baseline_rng.fork("pcgrad");

  RunRecord record;
  record.config = config;

  ModelState best_model = model.deep_copy();
  std::vector<std::pair<std::string, Tensor>> best_extra;
  for (auto& [name, t] : weight_state.named_parameters()) {
    best_extra.emplace_back(name, t.deep_copy());
  }
  double best_val = -std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int bad_epochs = 0;
  bool weighting = is_weighting_baseline(objective.mode);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_per_task_ce.assign(static_cast<size_t>(T), 0.0);
    std::vector<int> task_batches(static_cast<size_t>(T), 0);
    int batches = sampler.batches_per_epoch();
    for (int b = 0; b < batches; ++b) {
      MultiTaskBatch batch = sampler.next();
      LossBreakdown breakdown;
      try {
        if (objective.mode == Method::pcgrad) {
          breakdown = pcgrad_step(batch, model, all_params, n_enc_params, opt,
                                  dropout_rng, surgery_rng, config.grad_clip);
        } else if (weighting) {
          Tape tape;
          TaskLossSet set =
              per_task_ce_losses(batch, model, dropout_rng, true);
          std::vector<Tensor> present;
          for (auto& t : set.task_ce) {
            IMTL_CHECK(t.defined(),
                       "train: weighting methods need every task per batch");
            present.push_back(t);
          }
          Tensor total = weight_state.combine(present);
          breakdown.total = total;
          breakdown.ce = set.mean_ce.item();
          breakdown.per_task_count = set.counts;
          for (auto& t : set.task_ce) breakdown.per_task_ce.push_back(t.item());
          tape.backward(total);
          clip_gradients(all_params, config.grad_clip);
          opt.step();
          opt.zero_grad();
        } else {
          Tape tape;
          breakdown =
              objective_loss(batch, model, objective, dropout_rng, sample_rng);
          tape.backward(breakdown.total);
          clip_gradients(all_params, config.grad_clip);
          opt.step();
          opt.zero_grad();
        }
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " +
                           std::to_string(epoch) + " batch " +
                           std::to_string(b + 1) + ": " + e.what());
      }
      rec.train_total += breakdown.total.defined() ? breakdown.total.item() : 0.0;
      rec.train_ce += breakdown.ce;
      rec.train_infonce += breakdown.infonce;
      rec.train_kl += breakdown.kl;
      for (int t = 0; t < T && t < static_cast<int>(breakdown.per_task_ce.size());
           ++t) {
        if (breakdown.per_task_count.empty() ||
            breakdown.per_task_count[static_cast<size_t>(t)] > 0) {
          rec.train_per_task_ce[static_cast<size_t>(t)] +=
              breakdown.per_task_ce[static_cast<size_t>(t)];
          task_batches[static_cast<size_t>(t)] += 1;
        }
      }
    }
    rec.train_total /= batches;
    rec.train_ce /= batches;
    rec.train_infonce /= batches;
    rec.train_kl /= batches;
    for (int t = 0; t < T; ++t) {
      if (task_batches[static_cast<size_t>(t)] > 0) {
        rec.train_per_task_ce[static_cast<size_t>(t)] /=
            task_batches[static_cast<size_t>(t)];
      }
    }

    weight_state.end_epoch(rec.train_per_task_ce);

    if (!config.val_avg_stub.empty()) {
      size_t idx = std::min(static_cast<size_t>(epoch - 1),
                            config.val_avg_stub.size() - 1);
      rec.val_avg = config.val_avg_stub[idx];
    } else {
      auto val_scores = evaluate_split(model, ds, SplitKind::val);
      rec.val_avg = avg_score(val_scores);
      for (auto& s : val_scores) rec.val_scores.push_back(s[0]);
    }

    if (config.diag_every > 0 && epoch % config.diag_every == 0) {
      compute_diagnostics(model, ds, config, root, epoch, &rec);
    }

    record.epoch_log.push_back(rec);

    if (rec.val_avg > best_val) {
      best_val = rec.val_avg;
      best_epoch = epoch;
      bad_epochs = 0;
      best_model.copy_values_from(model);
      auto current = weight_state.named_parameters();
      for (size_t i = 0; i < best_extra.size(); ++i) {
        best_extra[i].second.mutable_values() = current[i].second.values();
      }
    } else {
      ++bad_epochs;
      if (bad_epochs >= config.patience) break;
    }
  }

  model.copy_values_from(best_model);
  record.best_epoch = best_epoch;
  record.best_val_avg = best_epoch > 0 ? best_val : 0.0;
  record.model = model;
  record.extra_params = best_extra;

  record.test_scores = evaluate_split(model, ds, SplitKind::test);
  record.test_avg = avg_score(record.test_scores);

  // representation quality at the best checkpoint
  RngStream repr_rng = root.fork("repr_diag");
  for (int t = 0; t < T; ++t) {
    const Split& test = ds.data[static_cast<size_t>(t)].test;
    Tensor x = ds.split_features(t, test);
    Tensor z = model.encode(x, nullptr, false);
    record.uniformity_per_task.push_back(uniformity(z));
    Tensor zt = model.det_heads.empty()
                    ? model.stochastic_forward(z, t, nullptr, SampleMode::mean).z_t
                    : model.head_logits(z, t);
    record.ari_per_task.push_back(ari_of_representations(
        zt, test.labels, ds.tasks[static_cast<size_t>(t)].classes,
        repr_rng.fork("task", static_cast<uint64_t>(t))));
  }
  return record;
}

// ----------------------------------------------------------- persistence

namespace {

json epoch_to_json(const EpochRecord& r) {
  json j;
  j["epoch"] = r.epoch;
  j["train"] = {{"total", r.train_total},
                {"ce", r.train_ce},
                {"infonce", r.train_infonce},
                {"kl", r.train_kl},
                {"per_task_ce", r.train_per_task_ce}};
  j["val_avg"] = r.val_avg;
  j["val_scores"] = r.val_scores;
  if (r.has_diag) {
    j["mi_xz"] = r.mi_xz;
    j["mi_zzt"] = r.mi_zzt;
  }
  return j;
}

}  // namespace

void persist_run(const RunRecord& record, const MultiTaskDataset& ds,
                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "config.json", std::ios::trunc);
    if (!os) throw IoError("cannot write config.json in " + dir.string());
    os << record.config.to_json().dump(2) << "\n";
  }
  {
    std::ofstream os(dir / "metrics.jsonl", std::ios::trunc);
    if (!os) throw IoError("cannot write metrics.jsonl in " + dir.string());
    for (const auto& r : record.epoch_log) os << epoch_to_json(r).dump() << "\n";
  }
  {
    json s;
    s["name"] = record.config.name;
    s["seed"] = record.config.seed;
    s["mode"] = method_name(record.config.objective.mode);
    s["best_epoch"] = record.best_epoch;
    s["best_val_avg"] = record.best_val_avg;
    s["test"] = {{"per_task", record.test_scores}, {"avg", record.test_avg}};
    s["diagnostics"] = {{"uniformity", record.uniformity_per_task},
                        {"ari", record.ari_per_task}};
    std::ofstream os(dir / "summary.json", std::ios::trunc);
    if (!os) throw IoError("cannot write summary.json in " + dir.string());
    os << s.dump(2) << "\n";
  }
  save_checkpoint(dir / "checkpoint", record.model, record.extra_params,
                  record.config.seed);

  // representation dumps at the best checkpoint
  auto reprs_dir = dir / "reprs";
  std::filesystem::create_directories(reprs_dir);
  json shapes;
  for (int t = 0; t < ds.num_tasks(); ++t) {
    const Split& test = ds.data[static_cast<size_t>(t)].test;
    Tensor x = ds.split_features(t, test);
    Tensor z = record.model.encode(x, nullptr, false);
    Tensor zt =
        record.model.det_heads.empty()
            ? record.model.stochastic_forward(z, t, nullptr, SampleMode::mean).z_t
            : record.model.head_logits(z, t);
    std::string zf = "task" + std::to_string(t) + "_z.bin";
    std::string ztf = "task" + std::to_string(t) + "_zt.bin";
    write_f64_file(reprs_dir / zf, z.values());
    write_f64_file(reprs_dir / ztf, zt.values());
    shapes["task" + std::to_string(t)] = {
        {"z", {{"file", zf}, {"shape", z.shape()}}},
        {"zt", {{"file", ztf}, {"shape", zt.shape()}}},
        {"labels", test.labels}};
  }
  std::ofstream os(reprs_dir / "shapes.json", std::ios::trunc);
  if (!os) throw IoError("cannot write shapes.json in " + reprs_dir.string());
  os << shapes.dump(2) << "\n";
}

// ----------------------------------------------------------------- suite

json SuiteConfig::to_json() const {
  json j;
  j["name"] = name;
  j["seeds"] = seeds;
  j["with_delta_p"] = with_delta_p;
  j["reference_method"] = reference_method;
  j["jobs"] = jobs;
  json ms = json::array();
  for (const auto& m : methods) ms.push_back(m.to_json());
  j["methods"] = ms;
  return j;
}

SuiteConfig SuiteConfig::from_json(const json& j) {
  SuiteConfig s;
  s.name = j.value("name", "experiment");
  if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  s.with_delta_p = j.value("with_delta_p", true);
  s.reference_method = j.value("reference_method", "ew");
  s.jobs = j.value("jobs", 1);
  IMTL_CHECK(j.contains("methods"), "suite: manifest has no methods");
  for (const auto& jm : j.at("methods")) {
    s.methods.push_back(TrainConfig::from_json(jm));
  }
  return s;
}

SuiteResult run_suite(const MultiTaskDataset& ds, const SuiteConfig& suite,
                      const std::filesystem::path& out_dir) {
  IMTL_CHECK(!suite.methods.empty(), "suite: no methods configured");
  IMTL_CHECK(!suite.seeds.empty(), "suite: no seeds configured");
  {
    std::vector<std::string> names;
    for (const auto& m : suite.methods) names.push_back(m.name);
    std::sort(names.begin(), names.end());
    IMTL_CHECK(std::adjacent_find(names.begin(), names.end()) == names.end(),
               "suite: method names must be unique");
  }
  if (suite.with_delta_p) {
    // every fraction group needs an EW reference
    for (const auto& m : suite.methods) {
      bool found = false;
      for (const auto& r : suite.methods) {
        if (r.data_fraction == m.data_fraction &&
            method_name(r.objective.mode) == suite.reference_method) {
          found = true;
          break;
        }
      }
      IMTL_CHECK(found,
                 "suite: delta_p requested but no '" + suite.reference_method +
                     "' config at data fraction " +
                     std::to_string(m.data_fraction));
    }
  }

  struct Job {
    size_t method_idx;
    uint64_t seed;
    RunRecord record;
  };
  std::vector<Job> jobs;
  for (size_t m = 0; m < suite.methods.size(); ++m) {
    for (uint64_t seed : suite.seeds) jobs.push_back({m, seed, {}});
  }

  auto run_one = [&](Job& job) {
    TrainConfig cfg = suite.methods[job.method_idx];
    cfg.seed = job.seed;
    job.record = train(ds, cfg);
    persist_run(job.record, ds,
                out_dir / cfg.name / ("seed" + std::to_string(job.seed)));
  };

  int parallel = std::max(1, suite.jobs);
  if (parallel == 1) {
    for (auto& job : jobs) run_one(job);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        run_one(jobs[i]);
      }
    };
    std::vector<std::future<void>> futs;
    for (int w = 0; w < parallel; ++w) {
      futs.push_back(std::async(std::launch::async, worker));
    }
    for (auto& f : futs) f.get();
  }

  // aggregate per method
  SuiteResult result;
  size_t n_seeds = suite.seeds.size();
  std::vector<std::vector<const RunRecord*>> per_method(suite.methods.size());
  for (const auto& job : jobs) {
    per_method[job.method_idx].push_back(&job.record);
  }

  std::vector<std::vector<MetricSpec>> specs;
  for (const auto& t : ds.tasks) specs.push_back({t.metric});

  for (size_t m = 0; m < suite.methods.size(); ++m) {
    SuiteRow row;
    row.method = suite.methods[m].name;
    row.fraction = suite.methods[m].data_fraction;
    const auto& runs = per_method[m];
    size_t T = runs[0]->test_scores.size();
    row.mean_scores.assign(T, {});
    row.std_scores.assign(T, {});
    for (size_t t = 0; t < T; ++t) {
      size_t N = runs[0]->test_scores[t].size();
      for (size_t n = 0; n < N; ++n) {
        double mean = 0.0;
        for (const auto* r : runs) mean += r->test_scores[t][n];
        mean /= static_cast<double>(n_seeds);
        double var = 0.0;
        for (const auto* r : runs) {
          double d = r->test_scores[t][n] - mean;
          var += d * d;
        }
        double sd = n_seeds > 1 ? std::sqrt(var / static_cast<double>(n_seeds - 1))
                                : 0.0;
        row.mean_scores[t].push_back(mean);
        row.std_scores[t].push_back(sd);
      }
    }
    row.avg_mean = avg_score(row.mean_scores);
    double avar = 0.0;
    std::vector<double> avgs;
    for (const auto* r : runs) avgs.push_back(r->test_avg);
    double amean = 0.0;
    for (double a : avgs) amean += a;
    amean /= static_cast<double>(avgs.size());
    for (double a : avgs) avar += (a - amean) * (a - amean);
    row.avg_std = n_seeds > 1 ? std::sqrt(avar / static_cast<double>(n_seeds - 1))
                              : 0.0;
    result.rows.push_back(std::move(row));
  }

  if (suite.with_delta_p) {
    for (auto& row : result.rows) {
      const SuiteRow* ref = nullptr;
      for (size_t m = 0; m < suite.methods.size(); ++m) {
        if (suite.methods[m].data_fraction == row.fraction &&
            method_name(suite.methods[m].objective.mode) ==
                suite.reference_method) {
          ref = &result.rows[m];
          break;
        }
      }
      IMTL_CHECK(ref != nullptr, "suite: missing delta_p reference");
      row.dp = delta_p(row.mean_scores, ref->mean_scores, specs);
    }
  }

  // report.csv: method x task-metric mean columns + Avg (mean/std) + delta_p
  std::ostringstream rep;
  rep.precision(17);
  rep << "method,fraction";
  for (size_t t = 0; t < specs.size(); ++t) {
    rep << "," << ds.tasks[t].name << ":" << specs[t][0].label();
  }
  rep << ",avg_mean,avg_std,delta_p\n";
  for (const auto& row : result.rows) {
    rep << row.method << "," << row.fraction;
    for (const auto& task : row.mean_scores)
      for (double v : task) rep << "," << v;
    rep << "," << row.avg_mean << "," << row.avg_std << "," << row.dp << "\n";
  }
  result.report_csv = rep.str();

  std::ostringstream lng;
  lng.precision(17);
  lng << "method,fraction,seed,task,metric,score\n";
  for (const auto& job : jobs) {
    const auto& cfg = suite.methods[job.method_idx];
    for (size_t t = 0; t < job.record.test_scores.size(); ++t) {
      for (size_t n = 0; n < job.record.test_scores[t].size(); ++n) {
        lng << cfg.name << "," << cfg.data_fraction << "," << job.seed << ","
            << ds.tasks[t].name << "," << specs[t][n].label() << ","
            << job.record.test_scores[t][n] << "\n";
      }
    }
  }
  result.long_csv = lng.str();

  std::filesystem::create_directories(out_dir);
  {
    std::ofstream os(out_dir / "report.csv", std::ios::trunc);
    if (!os) throw IoError("cannot write report.csv");
    os << result.report_csv;
  }
  {
    std::ofstream os(out_dir / "long.csv", std::ios::trunc);
    if (!os) throw IoError("cannot write long.csv");
    os << result.long_csv;
  }
  return result;
}

}  // namespace infomtl
