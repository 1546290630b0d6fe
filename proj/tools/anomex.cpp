// anomex: train a detector, pick exemplars, explain anomalies, score methods.
//
// Exit codes: 0 ok, 2 bad input or flags, 3 training / numeric failure,
// 4 empty baseline or no cluster.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "anomex/attribution.hpp"
#include "anomex/dataio.hpp"
#include "anomex/detector.hpp"
#include "anomex/errors.hpp"
#include "anomex/evaluation.hpp"
#include "anomex/exemplar.hpp"
#include "anomex/parallel.hpp"
#include "anomex/seeding.hpp"
#include "run_log.hpp"

namespace fs = std::filesystem;
using namespace anomex;

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory '" + dir.string() + "': " + ec.message());
}

// --- benchmark ---------------------------------------------------------------

struct BenchmarkArgs {
  fs::path out_dir = ".";
  Eigen::Index dims = 8;
  Eigen::Index n_train = 5000;
  Eigen::Index n_normal = 200;
  Eigen::Index n_faults = 400;
  std::vector<Eigen::Index> fault_dims = {1, 2};
  double magnitude = 0.35;
  std::uint64_t seed = 0;
};

int run_benchmark(const BenchmarkArgs& a) {
  BenchmarkConfig cfg;
  cfg.dims = a.dims;
  cfg.n_train = a.n_train;
  cfg.n_test_normal = a.n_normal;
  cfg.n_faults = a.n_faults;
  cfg.fault_dims = a.fault_dims;
  cfg.magnitude = a.magnitude;
  cfg.seed = derive_seed(a.seed, "benchmark");
  const Benchmark bench = generate_fault_benchmark(cfg);

  ensure_dir(a.out_dir);
  const fs::path train_path = a.out_dir / "train.csv";
  const fs::path test_path = a.out_dir / "test.csv";
  {
    auto out = open_output(train_path);
    write_telemetry(out, bench.train);
  }
  {
    auto out = open_output(test_path);
    write_labeled_csv(out, bench.train.names(), bench.test);
  }

  cli::RunLog log("benchmark", a.seed);
  log.flag("out_dir", a.out_dir.string());
  log.flag("dims", a.dims);
  log.flag("n_train", a.n_train);
  log.flag("n_normal", a.n_normal);
  log.flag("n_faults", a.n_faults);
  log.flag("fault_dims", a.fault_dims);
  log.flag("magnitude", a.magnitude);
  log.derived_seed("benchmark", cfg.seed);
  log.output(train_path);
  log.output(test_path);
  log.write_beside(train_path);
  std::cout << fmt::format("wrote {} training rows to {} and {} test rows to {}\n", bench.train.rows(),
                           train_path.string(), bench.test.size(), test_path.string());
  return 0;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
  fs::path data;
  fs::path out = "detector.json";
  double ratio = 3.0;
  double envelope = 0.05;
  TrainConfig train;
  std::string activation = "tanh";
  std::uint64_t seed = 0;
};

int run_train(TrainArgs a) {
  const Dataset data = load_telemetry(a.data);
  NegativeSamplingConfig ns;
  ns.ratio = a.ratio;
  ns.envelope = a.envelope;
  ns.seed = derive_seed(a.seed, "negative-sampling");
  a.train.hidden_activation = activation_from_string(a.activation);
  a.train.seed = derive_seed(a.seed, "training");
  const Detector det = fit_detector(data, ns, a.train);
  save_detector(det, a.out);

  cli::RunLog log("train", a.seed);
  log.flag("data", a.data.string());
  log.flag("out", a.out.string());
  log.flag("ratio", a.ratio);
  log.flag("envelope", a.envelope);
  log.flag("lr", a.train.learning_rate);
  log.flag("epochs", a.train.epochs);
  log.flag("batch", a.train.batch_size);
  log.flag("hidden", a.train.hidden);
  log.flag("activation", a.activation);
  log.derived_seed("negative-sampling", ns.seed);
  log.derived_seed("training", a.train.seed);
  log.input(a.data);
  log.output(a.out);
  if (det.meta().auc) log.note("holdout_auc", *det.meta().auc);
  log.write_beside(a.out);

  const auto& meta = det.meta();
  std::cout << fmt::format("trained on {} rows + {} negatives; holdout AUC {}\n", meta.positives,
                           meta.negatives, meta.auc ? fmt::format("{:.4f}", *meta.auc) : "n/a");
  return 0;
}

// --- baseline ----------------------------------------------------------------

struct BaselineArgs {
  fs::path detector;
  fs::path data;
  fs::path out = "exemplars.json";
  Eigen::Index n = 5;
  double epsilon = 0.1;
  std::optional<double> eps;
  std::optional<Eigen::Index> min_points;
  bool no_fallback = false;
  std::string mode = "clustered";
  std::uint64_t seed = 0;
};

int run_baseline(const BaselineArgs& a) {
  const Detector det = load_detector(a.detector);
  const Dataset data = select_columns(load_telemetry(a.data), det.normalizer().names());
  const RowMatrixXd normalized = det.normalizer().apply_rows(data.values());

  BaselineParams params;
  params.per_cluster = a.n;
  params.epsilon = a.epsilon;
  params.cluster_eps = a.eps;
  params.min_points = a.min_points;
  params.noise_fallback = !a.no_fallback;
  params.seed = derive_seed(a.seed, "baseline");
  ExemplarSet set;
  if (a.mode == "clustered") {
    set = select_baseline(normalized, det, params);
  } else if (a.mode == "top") {
    set = select_top_scoring(normalized, det, a.n, a.epsilon);
  } else {
    throw InputError("unknown baseline mode '" + a.mode + "' (expected clustered or top)");
  }
  write_json_file(exemplars_to_json(set), a.out);

  cli::RunLog log("baseline", a.seed);
  log.flag("detector", a.detector.string());
  log.flag("data", a.data.string());
  log.flag("out", a.out.string());
  log.flag("n", a.n);
  log.flag("epsilon", a.epsilon);
  log.flag("eps", a.eps ? nlohmann::json(*a.eps) : nlohmann::json(nullptr));
  log.flag("minpts", a.min_points ? nlohmann::json(*a.min_points) : nlohmann::json(nullptr));
  log.flag("no_fallback", a.no_fallback);
  log.flag("mode", a.mode);
  log.derived_seed("baseline", params.seed);
  log.input(a.detector);
  log.input(a.data);
  log.output(a.out);
  if (set.noise_fallback_used) log.note("noise_fallback", true);
  log.write_beside(a.out);

  std::cout << fmt::format("{} candidates, {} cluster(s), {} exemplars{}\n", set.candidates, set.clusters,
                           set.size(), set.noise_fallback_used ? " (all noise: single-cluster fallback)" : "");
  return 0;
}

// --- explain -----------------------------------------------------------------

struct PathArgs {
  std::string metric = "L2";
  std::string path = "straight";
  Eigen::Index steps = 1024;
  unsigned threads = 1;

  ExplainOptions options() const {
    ExplainOptions opts;
    opts.metric = metric_from_string(metric);
    opts.path.kind = path_kind_from_string(path);
    opts.path.steps = steps;
    return opts;
  }

  void record(cli::RunLog& log) const {
    log.flag("metric", metric);
    log.flag("path", path);
    log.flag("steps", steps);
    log.flag("threads", threads);
  }
};

struct ExplainArgs {
  fs::path detector;
  fs::path exemplars;
  fs::path input;
  fs::path out = "explanations.jsonl";
  PathArgs path;
};

int run_explain(const ExplainArgs& a) {
  const Detector det = load_detector(a.detector);
  const ExemplarSet set = exemplars_from_json(read_json_file(a.exemplars));
  if (set.empty()) throw EmptyBaseline("exemplar file '" + a.exemplars.string() + "' holds no exemplars");
  const Dataset data = select_columns(load_telemetry(a.input), det.normalizer().names());
  const ExplainOptions opts = a.path.options();

  std::vector<std::string> lines(static_cast<std::size_t>(data.rows()));
  parallel_for(lines.size(), a.path.threads, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    Explanation e = explain(det, set, data.row(row), opts);
    if (data.has_timestamps()) e.ts = data.timestamps()[i];
    nlohmann::json doc = explanation_to_json(e);
    doc["row"] = i;
    lines[i] = doc.dump();
  });
  {
    auto out = open_output(a.out);
    for (const auto& line : lines) out << line << '\n';
  }

  cli::RunLog log("explain", 0);
  log.flag("detector", a.detector.string());
  log.flag("exemplars", a.exemplars.string());
  log.flag("input", a.input.string());
  log.flag("out", a.out.string());
  a.path.record(log);
  log.input(a.detector);
  log.input(a.exemplars);
  log.input(a.input);
  log.output(a.out);
  log.write_beside(a.out);
  std::cout << fmt::format("explained {} rows into {}\n", lines.size(), a.out.string());
  return 0;
}

// --- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
  fs::path detector;
  fs::path exemplars;
  fs::path test;
  fs::path out_dir = ".";
  std::vector<std::string> methods = {"ig", "surrogate"};
  Eigen::Index samples = 0;
  double kernel_width = 0.1;
  PathArgs path;
  std::uint64_t seed = 0;
};

int run_evaluate(const EvaluateArgs& a) {
  const Detector det = load_detector(a.detector);
  const ExemplarSet set = exemplars_from_json(read_json_file(a.exemplars));
  const LabeledSet labeled = load_labeled(a.test);

  // Reorder test columns to the detector's dimension order.
  const auto& names = det.normalizer().names();
  std::vector<Eigen::Index> columns;
  for (const auto& name : names) {
    auto it = std::find(labeled.names.begin(), labeled.names.end(), name);
    if (it == labeled.names.end()) throw ShapeError("test file lacks column '" + name + "'");
    columns.push_back(static_cast<Eigen::Index>(it - labeled.names.begin()));
  }
  std::vector<LabeledAnomaly> rows;
  rows.reserve(labeled.rows.size());
  for (const auto& r : labeled.rows) {
    LabeledAnomaly out{Eigen::VectorXd(det.dims()), r.anomalous, Eigen::VectorXd(det.dims())};
    for (Eigen::Index d = 0; d < det.dims(); ++d) {
      out.x(d) = r.x(columns[static_cast<std::size_t>(d)]);
      out.beta(d) = r.beta(columns[static_cast<std::size_t>(d)]);
    }
    rows.push_back(std::move(out));
  }

  SurrogateConfig sc;
  sc.samples = a.samples;
  sc.kernel_width = a.kernel_width;
  sc.seed = derive_seed(a.seed, "surrogate");
  std::vector<AttributionMethod> methods;
  for (const auto& m : a.methods) {
    if (m == "ig") {
      methods.push_back(ig_method(det, set, a.path.options()));
    } else if (m == "surrogate") {
      methods.push_back(surrogate_method(det, sc));
    } else {
      throw InputError("unknown method '" + m + "' (expected ig or surrogate)");
    }
  }
  const auto reports = evaluate_methods(rows, methods, a.path.threads);

  ensure_dir(a.out_dir);
  const fs::path report_path = a.out_dir / "report.json";
  const fs::path table_path = a.out_dir / "table.txt";
  write_json_file(reports_to_json(reports), report_path);
  const std::string table = format_report_table(reports);
  {
    auto out = open_output(table_path);
    out << table;
  }

  cli::RunLog log("evaluate", a.seed);
  log.flag("detector", a.detector.string());
  log.flag("exemplars", a.exemplars.string());
  log.flag("test", a.test.string());
  log.flag("out_dir", a.out_dir.string());
  log.flag("methods", a.methods);
  log.flag("samples", a.samples);
  log.flag("kernel_width", a.kernel_width);
  a.path.record(log);
  log.derived_seed("surrogate", sc.seed);
  log.input(a.detector);
  log.input(a.exemplars);
  log.input(a.test);
  log.output(report_path);
  log.output(table_path);
  log.write_beside(report_path);
  std::cout << table;
  return 0;
}

void add_path_flags(CLI::App* cmd, PathArgs& p) {
  cmd->add_option("--metric", p.metric, "nearest-exemplar dissimilarity: L1 or L2")->capture_default_str();
  cmd->add_option("--path", p.path, "integration path: straight or axis")->capture_default_str();
  cmd->add_option("--steps", p.steps, "midpoint steps per path segment (doubled while the gap exceeds 1e-3)")
      ->capture_default_str();
  cmd->add_option("--threads", p.threads, "worker threads, 0 = all cores")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive attribution for anomaly detectors"};
  app.require_subcommand(1);

  BenchmarkArgs bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "write a synthetic labeled fault benchmark");
  bench_cmd->add_option("--out-dir", bench.out_dir, "directory for train.csv and test.csv")->capture_default_str();
  bench_cmd->add_option("--dims", bench.dims)->capture_default_str();
  bench_cmd->add_option("--n-train", bench.n_train)->capture_default_str();
  bench_cmd->add_option("--n-normal", bench.n_normal, "normal rows in the test set")->capture_default_str();
  bench_cmd->add_option("--n-faults", bench.n_faults)->capture_default_str();
  bench_cmd->add_option("--fault-dims", bench.fault_dims, "faulted dimension counts to draw from")
      ->delimiter(',')
      ->capture_default_str();
  bench_cmd->add_option("--magnitude", bench.magnitude, "fault shift")->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed)->capture_default_str();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "fit a negative-sampling detector");
  train_cmd->add_option("--data", train.data, "training telemetry CSV")->required();
  train_cmd->add_option("--out", train.out)->capture_default_str();
  train_cmd->add_option("--ratio", train.ratio, "negatives per observed row")->capture_default_str();
  train_cmd->add_option("--envelope", train.envelope, "negative hypercube inflation")->capture_default_str();
  train_cmd->add_option("--lr", train.train.learning_rate)->capture_default_str();
  train_cmd->add_option("--epochs", train.train.epochs)->capture_default_str();
  train_cmd->add_option("--batch", train.train.batch_size)->capture_default_str();
  train_cmd->add_option("--hidden", train.train.hidden, "hidden layer widths")->delimiter(',')->capture_default_str();
  train_cmd->add_option("--activation", train.activation, "tanh or logistic")->capture_default_str();
  train_cmd->add_option("--seed", train.seed)->capture_default_str();

  BaselineArgs base;
  auto* base_cmd = app.add_subcommand("baseline", "select exemplars from training data");
  base_cmd->add_option("--detector", base.detector)->required();
  base_cmd->add_option("--data", base.data, "training telemetry CSV")->required();
  base_cmd->add_option("--out", base.out)->capture_default_str();
  base_cmd->add_option("--n", base.n, "exemplars per cluster")->capture_default_str();
  base_cmd->add_option("--epsilon", base.epsilon, "candidates need a score above 1 - epsilon")->capture_default_str();
  base_cmd->add_option("--eps", base.eps, "DBSCAN radius (default 0.05 sqrt(D))");
  base_cmd->add_option("--minpts", base.min_points, "DBSCAN core size (default max(5, 1% of candidates))");
  base_cmd->add_flag("--no-fallback", base.no_fallback, "fail instead of using one cluster when all are noise");
  base_cmd->add_option("--mode", base.mode, "clustered or top")->capture_default_str();
  base_cmd->add_option("--seed", base.seed)->capture_default_str();

  ExplainArgs expl;
  auto* expl_cmd = app.add_subcommand("explain", "attribute each input row against its nearest exemplar");
  expl_cmd->add_option("--detector", expl.detector)->required();
  expl_cmd->add_option("--exemplars", expl.exemplars)->required();
  expl_cmd->add_option("--input", expl.input, "telemetry CSV to explain")->required();
  expl_cmd->add_option("--out", expl.out, "JSON lines, one per input row")->capture_default_str();
  add_path_flags(expl_cmd, expl.path);

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "compare attribution methods on a labeled test set");
  eval_cmd->add_option("--detector", eval.detector)->required();
  eval_cmd->add_option("--exemplars", eval.exemplars)->required();
  eval_cmd->add_option("--test", eval.test, "labeled test CSV")->required();
  eval_cmd->add_option("--out-dir", eval.out_dir, "directory for report.json and table.txt")->capture_default_str();
  eval_cmd->add_option("--methods", eval.methods, "ig, surrogate")->delimiter(',')->capture_default_str();
  eval_cmd->add_option("--samples", eval.samples, "surrogate perturbations (0 = max(1000, 10 D))")
      ->capture_default_str();
  eval_cmd->add_option("--kernel-width", eval.kernel_width)->capture_default_str();
  eval_cmd->add_option("--seed", eval.seed)->capture_default_str();
  add_path_flags(eval_cmd, eval.path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*bench_cmd) return run_benchmark(bench);
    if (*train_cmd) return run_train(train);
    if (*base_cmd) return run_baseline(base);
    if (*expl_cmd) return run_explain(expl);
    if (*eval_cmd) return run_evaluate(eval);
  } catch (const EmptyBaseline& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const NoClusterFound& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const TrainingError& e) {
    std::cerr << "training failed: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected failure: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
