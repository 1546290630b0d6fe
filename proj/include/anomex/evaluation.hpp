#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anomex/attribution.hpp"
#include "anomex/dataio.hpp"
#include "anomex/detector.hpp"
#include "anomex/exemplar.hpp"
#include "json.hpp"

namespace anomex {

// Ground truth for one test observation. For anomalous rows beta spreads unit
// mass evenly over the n_A fault dimensions; normal rows carry beta = 0.
struct LabeledAnomaly {
  Eigen::VectorXd x;  // raw coordinates
  bool anomalous = false;
  Eigen::VectorXd beta;
};

Eigen::VectorXd fault_label(Eigen::Index dims, const std::vector<Eigen::Index>& fault_dims);
void validate(const LabeledAnomaly& row);

// Mean absolute difference sum_d |b_d - beta_d| / D.
double attribution_error(const Eigen::Ref<const Eigen::VectorXd>& blame,
                         const Eigen::Ref<const Eigen::VectorXd>& beta);

struct MannWhitneyResult {
  double u = 0;  // statistic for the first sample
  double p = 1;  // two-sided
  bool exact = false;
};

// Midrank U with two-sided p. Exact permutation distribution of the rank sum
// when the smaller sample has fewer than 8 observations, otherwise the normal
// approximation with continuity and tie correction.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

struct Mode {
  Eigen::VectorXd center;  // inside the unit cube
  double scale = 0.015;    // per-dimension standard deviation
  double weight = 1.0;
};

struct BenchmarkConfig {
  Eigen::Index dims = 8;
  std::vector<Mode> modes;  // empty -> default_modes(dims)
  Eigen::Index n_train = 5000;
  Eigen::Index n_test_normal = 200;
  Eigen::Index n_faults = 400;
  std::vector<Eigen::Index> fault_dims = {1, 2};  // n_A drawn uniformly from this list
  double magnitude = 0.35;
  std::uint64_t seed = 0;
};

// Two unbalanced axis-aligned Gaussian modes (weights 0.7 / 0.3).
std::vector<Mode> default_modes(Eigen::Index dims);

struct Benchmark {
  Dataset train;
  std::vector<LabeledAnomaly> test;
};

Benchmark generate_fault_benchmark(const BenchmarkConfig& cfg);

// Test CSV: value columns, then "label" (1 = anomalous) and "beta_<name>".
void write_labeled_csv(std::ostream& out, const std::vector<std::string>& names,
                       const std::vector<LabeledAnomaly>& rows);

struct LabeledSet {
  std::vector<std::string> names;
  std::vector<LabeledAnomaly> rows;
};

LabeledSet parse_labeled(std::istream& in);
LabeledSet load_labeled(const std::filesystem::path& path);

// Maps a raw observation to a blame vector.
struct AttributionMethod {
  std::string name;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> attribute;
};

AttributionMethod ig_method(const Detector& det, const ExemplarSet& exemplars,
                            ExplainOptions opts = {});
AttributionMethod surrogate_method(const Detector& det, SurrogateConfig cfg = {});

struct MethodReport {
  std::string name;
  std::vector<double> errors;  // one per anomalous row, input order
  double mean = 0;
  double stddev = 0;  // sample standard deviation
  std::map<std::string, double> p_values;
  std::optional<std::string> failure;
};

// Requires at least 30 anomalous rows; normal rows are skipped. A method that
// throws on any row is reported with `failure` set and no errors.
std::vector<MethodReport> evaluate_methods(const std::vector<LabeledAnomaly>& test,
                                           const std::vector<AttributionMethod>& methods,
                                           unsigned threads = 1);

nlohmann::json reports_to_json(const std::vector<MethodReport>& reports);
std::string format_report_table(const std::vector<MethodReport>& reports);

}  // namespace anomex
