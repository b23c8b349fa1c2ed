// Command-line front end: dataset generation, training, suites, evaluation,
// robustness sweeps, diagnostics extraction, and report assembly.
//
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "infomtl/checkpoint.hpp"
#include "infomtl/data.hpp"
#include "infomtl/metrics.hpp"
#include "infomtl/robustness.hpp"
#include "infomtl/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace infomtl;

namespace {

fs::path resolve_out(const std::string& out) {
  fs::path p(out);
  const char* root = std::getenv("INFOMTL_OUT");
  if (root && *root && p.is_relative()) return fs::path(root) / p;
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot open " + p.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::trunc | std::ios::binary);
  if (!os) throw IoError("cannot write " + p.string());
  os << text;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

MultiTaskDataset dataset_for_run(const fs::path& run_dir,
                                 const std::string& data_override) {
  std::string path = data_override;
  if (path.empty()) {
    json cfg = json::parse(read_file(run_dir / "config.json"));
    path = cfg.value("dataset", "");
  }
  if (path.empty()) {
    throw ConfigError("no dataset recorded for this run; pass --data");
  }
  return load_dataset(path);
}

int cmd_gen_data(const std::string& config_file, const std::string& out,
                 uint64_t seed, bool print_config) {
  SyntheticConfig cfg = config_file.empty()
                            ? default_synthetic_config(seed)
                            : synthetic_config_from_json(read_file(config_file));
  if (config_file.empty()) cfg.seed = seed;
  if (print_config) {
    std::cout << synthetic_config_to_json(cfg) << "\n";
    return 0;
  }
  MultiTaskDataset ds = generate_synthetic(cfg);
  fs::path dir = resolve_out(out);
  save_dataset(ds, dir);

  std::cout << "task  name      classes  train   val  test  metric\n";
  for (int t = 0; t < ds.num_tasks(); ++t) {
    const auto& spec = ds.tasks[static_cast<size_t>(t)];
    const auto& d = ds.data[static_cast<size_t>(t)];
    std::cout << std::left << std::setw(6) << t << std::setw(10) << spec.name
              << std::setw(9) << spec.classes << std::setw(8) << d.train.n()
              << std::setw(5) << d.val.n() << std::setw(6) << d.test.n()
              << spec.metric.label() << "\n";
  }
  std::cout << "dx=" << ds.dx << "\n";
  std::cout << "dataset written to " << fs::absolute(dir).string() << "\n";
  return 0;
}

int cmd_train(const TrainConfig& cfg, const std::string& out) {
  MultiTaskDataset ds = load_dataset(cfg.dataset_path);
  RunRecord rec = train(ds, cfg);
  fs::path dir = resolve_out(out);
  persist_run(rec, ds, dir);
  std::cout << "best epoch " << rec.best_epoch << ", val avg "
            << rec.best_val_avg << ", test avg " << rec.test_avg << "\n";
  for (size_t t = 0; t < rec.test_scores.size(); ++t) {
    std::cout << "  " << ds.tasks[t].name << ": " << rec.test_scores[t][0]
              << "\n";
  }
  std::cout << "run written to " << fs::absolute(dir).string() << "\n";
  return 0;
}

int cmd_suite(const std::string& manifest_path, const std::string& out,
              int jobs_override) {
  json j = json::parse(read_file(manifest_path));
  SuiteConfig suite = SuiteConfig::from_json(j);
  std::string data_path = j.value("dataset", "");
  IMTL_CHECK(!data_path.empty(), "suite manifest: missing dataset path");
  for (auto& m : suite.methods) m.dataset_path = data_path;
  if (jobs_override > 0) suite.jobs = jobs_override;
  std::string out_dir = !out.empty() ? out : j.value("output", suite.name);
  MultiTaskDataset ds = load_dataset(data_path);
  fs::path dir = resolve_out(out_dir);
  SuiteResult res = run_suite(ds, suite, dir);
  std::cout << res.report_csv;
  std::cout << "suite written to " << fs::absolute(dir).string() << "\n";
  return 0;
}

int cmd_eval(const std::string& run, const std::string& data) {
  fs::path run_dir(run);
  Checkpoint ck = load_checkpoint(run_dir / "checkpoint");
  MultiTaskDataset ds = dataset_for_run(run_dir, data);
  auto scores = evaluate_split(ck.model, ds, SplitKind::test);
  std::cout << "task,metric,score\n";
  for (size_t t = 0; t < scores.size(); ++t) {
    std::cout << ds.tasks[t].name << "," << ds.tasks[t].metric.label() << ","
              << scores[t][0] << "\n";
  }
  std::cout << "avg," << avg_score(scores) << "\n";
  return 0;
}

int cmd_robustness(const std::string& run, const std::string& data,
                   const std::string& kind, const std::string& eps_csv,
                   uint64_t seed, const std::string& out) {
  fs::path run_dir(run);
  Checkpoint ck = load_checkpoint(run_dir / "checkpoint");
  MultiTaskDataset ds = dataset_for_run(run_dir, data);
  json cfg = json::parse(read_file(run_dir / "config.json"));
  std::string method = cfg.value("name", "run");

  std::vector<PerturbKind> kinds;
  if (kind == "both") {
    kinds = {PerturbKind::gaussian, PerturbKind::fgm};
  } else {
    kinds = {perturb_kind_from_name(kind)};
  }
  fs::path out_dir = out.empty() ? run_dir : resolve_out(out);
  fs::create_directories(out_dir);
  for (PerturbKind k : kinds) {
    PerturbSpec spec;
    spec.kind = k;
    if (!eps_csv.empty()) spec.epsilons = parse_double_list(eps_csv);
    spec.seed = seed;
    RobustReport report = robust_evaluate(ck.model, ds, spec);
    fs::path file =
        out_dir / ("robust_" + perturb_kind_name(k) + ".csv");
    write_file(file, report.to_csv(method));
    std::cout << "robust scores (" << perturb_kind_name(k) << ") written to "
              << fs::absolute(file).string() << "\n";
  }
  return 0;
}

int cmd_diagnose(const std::string& run, const std::string& out) {
  fs::path run_dir(run);
  json summary = json::parse(read_file(run_dir / "summary.json"));

  std::ostringstream csv;
  csv.precision(17);
  csv << "kind,epoch,task,value\n";
  {
    std::ifstream is(run_dir / "metrics.jsonl");
    if (!is) throw IoError("missing metrics.jsonl in " + run_dir.string());
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      json rec = json::parse(line);
      if (!rec.contains("mi_xz")) continue;
      int epoch = rec.at("epoch").get<int>();
      csv << "mi_xz," << epoch << ",-," << rec.at("mi_xz").get<double>()
          << "\n";
      auto zzt = rec.at("mi_zzt").get<std::vector<double>>();
      for (size_t t = 0; t < zzt.size(); ++t) {
        csv << "mi_zzt," << epoch << "," << t << "," << zzt[t] << "\n";
      }
    }
  }
  auto uni = summary.at("diagnostics").at("uniformity").get<std::vector<double>>();
  auto ari = summary.at("diagnostics").at("ari").get<std::vector<double>>();
  for (size_t t = 0; t < uni.size(); ++t) {
    csv << "uniformity,-," << t << "," << uni[t] << "\n";
  }
  for (size_t t = 0; t < ari.size(); ++t) {
    csv << "ari,-," << t << "," << ari[t] << "\n";
  }
  fs::path file = out.empty() ? run_dir / "diagnostics.csv" : resolve_out(out);
  write_file(file, csv.str());
  std::cout << "diagnostics written to " << fs::absolute(file).string() << "\n";
  return 0;
}

// --scores verification mode: CSV with a method column and numeric score
// columns, one task:metric per column, all higher-is-better
int report_from_scores(const std::string& scores_csv,
                       const std::string& ew_method, const std::string& out) {
  std::ifstream is(scores_csv);
  if (!is) throw IoError("cannot open " + scores_csv);
  std::string line;
  IMTL_CHECK(std::getline(is, line), "scores csv: empty file");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  IMTL_CHECK(cols.size() >= 2, "scores csv: need method + score columns");

  ScoreTable table;
  table.task_names.assign(cols.begin() + 1, cols.end());
  for (size_t t = 1; t < cols.size(); ++t) {
    table.specs.push_back({{MetricKind::macro_f1, {}, true}});
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    IMTL_CHECK(table.find_method(cell) < 0,
               "scores csv: duplicate method '" + cell + "'");
    table.methods.push_back(cell);
    std::vector<std::vector<double>> row;
    while (std::getline(ss, cell, ',')) row.push_back({std::stod(cell)});
    IMTL_CHECK(row.size() == table.specs.size(),
               "scores csv: ragged row for method");
    table.scores.push_back(std::move(row));
  }
  table.finalize(ew_method);
  std::string csv = table.to_csv();
  if (!out.empty()) write_file(resolve_out(out), csv);
  std::cout << csv;
  std::cout.precision(6);
  for (size_t m = 0; m < table.methods.size(); ++m) {
    std::cout << table.methods[m] << ": Avg=" << table.avg[m]
              << " dp=" << table.dp[m] << "%\n";
  }
  return 0;
}

// consolidates persisted run dirs into a score table + long-format CSV
int cmd_report(const std::vector<std::string>& runs,
               const std::string& scores_csv, const std::string& ew_method,
               const std::string& out) {
  if (!scores_csv.empty()) return report_from_scores(scores_csv, ew_method, out);
  IMTL_CHECK(!runs.empty(), "report: no run directories given");

  ScoreTable table;
  std::ostringstream lng;
  lng.precision(17);
  lng << "method,seed,task,score\n";
  for (const auto& run : runs) {
    json summary = json::parse(read_file(fs::path(run) / "summary.json"));
    std::string name = summary.at("name").get<std::string>();
    uint64_t seed = summary.at("seed").get<uint64_t>();
    auto per_task =
        summary.at("test").at("per_task").get<std::vector<std::vector<double>>>();
    IMTL_CHECK(table.find_method(name) < 0,
               "report: conflicting method name '" + name + "'");
    if (table.specs.empty()) {
      for (size_t t = 0; t < per_task.size(); ++t) {
        table.task_names.push_back("task" + std::to_string(t));
        std::vector<MetricSpec> specs(per_task[t].size(),
                                      {MetricKind::macro_f1, {}, true});
        table.specs.push_back(specs);
      }
    }
    table.methods.push_back(name);
    table.scores.push_back(per_task);
    for (size_t t = 0; t < per_task.size(); ++t) {
      for (double v : per_task[t]) {
        lng << name << "," << seed << ",task" << t << "," << v << "\n";
      }
    }
  }
  table.finalize(ew_method);
  fs::path out_dir = out.empty() ? fs::path(".") : resolve_out(out);
  fs::create_directories(out_dir);
  write_file(out_dir / "report.csv", table.to_csv());
  write_file(out_dir / "long.csv", lng.str());
  std::cout << table.to_csv();
  std::cout << "report written to " << fs::absolute(out_dir).string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"InfoMTL multi-task representation learning laboratory"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  std::string gen_config, gen_out = "data/synth";
  uint64_t gen_seed = 1;
  bool gen_print = false;
  gen->add_option("--config", gen_config, "synthetic config JSON file");
  gen->add_option("--out", gen_out, "output dataset directory");
  gen->add_option("--seed", gen_seed, "generator seed (default config only)");
  gen->add_flag("--print-config", gen_print, "print the effective config");

  // train
  auto* tr = app.add_subcommand("train", "train one configuration");
  TrainConfig tc;
  std::string tr_mode = "ew", tr_hidden, tr_out = "runs/run";
  tr->add_option("--data", tc.dataset_path, "dataset manifest or dir")
      ->required();
  tr->add_option("--mode", tr_mode,
                 "infomtl|simax_only|timin_only|ew|tw|si|uw|gls|dwa|rlw|"
                 "imtl_l|pcgrad");
  tr->add_option("--name", tc.name, "run label (defaults to mode)");
  tr->add_option("--alpha", tc.objective.alpha, "contrastive weight");
  tr->add_option("--beta", tc.objective.beta, "KL weight");
  tr->add_option("--tau", tc.objective.tau, "contrastive temperature");
  tr->add_option("--epochs", tc.epochs, "max epochs");
  tr->add_option("--patience", tc.patience, "early-stopping patience");
  tr->add_option("--batch", tc.batch_size, "total batch size");
  tr->add_option("--lr", tc.lr, "Adamax learning rate");
  tr->add_option("--dropout", tc.dropout, "encoder dropout");
  tr->add_option("--hidden", tr_hidden, "hidden sizes, e.g. 256 or 128,64");
  tr->add_option("--dz", tc.repr_dim, "representation dim");
  tr->add_option("--fraction", tc.data_fraction, "train-split fraction");
  tr->add_option("--diag-every", tc.diag_every, "diagnostic cadence (epochs)");
  tr->add_option("--grad-clip", tc.grad_clip, "global grad-norm clip");
  tr->add_option("--seed", tc.seed, "run seed");
  tr->add_flag("--f32", tc.f32, "32-bit value precision");
  tr->add_flag("--proportional", tc.proportional_batches,
               "size-proportional task mixing");
  tr->add_option("--out", tr_out, "run output directory");

  // suite
  auto* su = app.add_subcommand("suite", "run a manifest of configurations");
  std::string su_manifest, su_out;
  int su_jobs = 0;
  su->add_option("--manifest", su_manifest, "experiment manifest JSON")
      ->required();
  su->add_option("--out", su_out, "output directory (overrides manifest)");
  su->add_option("--jobs", su_jobs, "parallel runs");

  // eval
  auto* ev = app.add_subcommand("eval", "score a run's checkpoint on test");
  std::string ev_run, ev_data;
  ev->add_option("--run", ev_run, "run directory")->required();
  ev->add_option("--data", ev_data, "dataset override");

  // robustness
  auto* rb = app.add_subcommand("robustness", "perturbation sweeps");
  std::string rb_run, rb_data, rb_kind = "both", rb_eps, rb_out;
  uint64_t rb_seed = 0;
  rb->add_option("--run", rb_run, "run directory")->required();
  rb->add_option("--data", rb_data, "dataset override");
  rb->add_option("--kind", rb_kind, "gaussian|fgm|both");
  rb->add_option("--eps", rb_eps, "strength grid, e.g. 0,0.1,0.5,1,2,5");
  rb->add_option("--seed", rb_seed, "perturbation seed");
  rb->add_option("--out", rb_out, "output directory (defaults to run dir)");

  // diagnose
  auto* dg = app.add_subcommand("diagnose", "extract diagnostics from a run");
  std::string dg_run, dg_out;
  dg->add_option("--run", dg_run, "run directory")->required();
  dg->add_option("--out", dg_out, "output CSV path");

  // report
  auto* rp = app.add_subcommand("report", "consolidate runs into score tables");
  std::vector<std::string> rp_runs;
  std::string rp_scores, rp_ew = "ew", rp_out;
  rp->add_option("--runs", rp_runs, "run directories");
  rp->add_option("--scores", rp_scores,
                 "verification mode: score CSV to push through Avg/delta_p");
  rp->add_option("--ew-method", rp_ew, "reference method name");
  rp->add_option("--out", rp_out, "output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_data(gen_config, gen_out, gen_seed, gen_print);
    if (*tr) {
      tc.objective.mode = method_from_name(tr_mode);
      if (tc.name == "run") tc.name = tr_mode;
      if (!tr_hidden.empty()) tc.hidden = parse_int_list(tr_hidden);
      return cmd_train(tc, tr_out);
    }
    if (*su) return cmd_suite(su_manifest, su_out, su_jobs);
    if (*ev) return cmd_eval(ev_run, ev_data);
    if (*rb)
      return cmd_robustness(rb_run, rb_data, rb_kind, rb_eps, rb_seed, rb_out);
    if (*dg) return cmd_diagnose(dg_run, dg_out);
    if (*rp) return cmd_report(rp_runs, rp_scores, rp_ew, rp_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
