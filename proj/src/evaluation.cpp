#include "anomex/evaluation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "anomex/parallel.hpp"
#include "anomex/ranking.hpp"
#include "anomex/seeding.hpp"

namespace anomex {

Eigen::VectorXd fault_label(Eigen::Index dims, const std::vector<Eigen::Index>& fault_dims) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(dims);
  if (fault_dims.empty()) return beta;
  const double share = 1.0 / static_cast<double>(fault_dims.size());
  for (Eigen::Index d : fault_dims) {
    if (d < 0 || d >= dims) throw ShapeError("fault dimension out of range");
    beta(d) = share;
  }
  return beta;
}

void validate(const LabeledAnomaly& row) {
  if (row.x.size() != row.beta.size()) throw ShapeError("label width does not match observation");
  if ((row.beta.array() < 0).any()) throw InputError("label weights must be non-negative");
  if (row.anomalous) {
    if (std::abs(row.beta.sum() - 1.0) > 1e-9) throw InputError("anomalous label must sum to 1");
  } else if (!row.beta.isZero(0)) {
    throw InputError("normal rows must carry an all-zero label");
  }
}

double attribution_error(const Eigen::Ref<const Eigen::VectorXd>& blame,
                         const Eigen::Ref<const Eigen::VectorXd>& beta) {
  if (blame.size() != beta.size()) throw ShapeError("attribution and label widths differ");
  if (blame.size() == 0) throw ShapeError("attribution error of zero-width vectors");
  // Plain left-to-right sum; Eigen's packet reduction reorders the additions.
  double total = 0;
  for (Eigen::Index d = 0; d < blame.size(); ++d) total += std::abs(blame(d) - beta(d));
  return total / static_cast<double>(blame.size());
}

namespace {

// Exact two-sided p from the permutation distribution of the (doubled) rank
// sum of the smaller group. Returns nullopt when the table would be too big.
std::optional<double> exact_p(std::span<const double> a, std::span<const double> b) {
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);
  const bool a_small = a.size() <= b.size();
  const std::size_t n_small = a_small ? a.size() : b.size();
  const std::size_t n_other = pooled.size() - n_small;
  const std::size_t first = a_small ? 0 : a.size();

  std::vector<std::int64_t> doubled(ranks.size());
  for (std::size_t i = 0; i < ranks.size(); ++i) doubled[i] = std::llround(2.0 * ranks[i]);
  std::vector<std::int64_t> sorted = doubled;
  std::sort(sorted.rbegin(), sorted.rend());
  const std::int64_t max_sum = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n_small), std::int64_t{0});
  const double cost = static_cast<double>(pooled.size()) * static_cast<double>(n_small) * static_cast<double>(max_sum);
  if (cost > 5e8) return std::nullopt;

  const auto width = static_cast<std::size_t>(max_sum + 1);
  std::vector<std::vector<double>> ways(n_small + 1, std::vector<double>(width, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const auto r = static_cast<std::size_t>(doubled[i]);
    for (std::size_t j = std::min(i + 1, n_small); j >= 1; --j) {
      auto& row = ways[j];
      const auto& prev = ways[j - 1];
      for (std::size_t s = width; s-- > r;) row[s] += prev[s - r];
    }
  }
  std::int64_t observed = 0;
  for (std::size_t i = first; i < first + n_small; ++i) observed += doubled[i];
  const auto offset = static_cast<std::int64_t>(n_small * (n_small + 1));
  const auto mean2 = static_cast<std::int64_t>(n_small * n_other);  // 2 * E[U]
  const std::int64_t dev = std::llabs(observed - offset - mean2);
  double extreme = 0;
  double total = 0;
  for (std::size_t s = 0; s < width; ++s) {
    const double w = ways[n_small][s];
    if (w == 0) continue;
    total += w;
    if (std::llabs(static_cast<std::int64_t>(s) - offset - mean2) >= dev) extreme += w;
  }
  return extreme / total;
}

}  // namespace

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("Mann-Whitney U needs two non-empty samples");
  if (a.size() < 3 || b.size() < 3) {
    throw PreconditionError("Mann-Whitney U needs at least 3 observations per sample");
  }
  for (double v : a) if (!std::isfinite(v)) throw InputError("non-finite sample value");
  for (double v : b) if (!std::isfinite(v)) throw InputError("non-finite sample value");

  MannWhitneyResult out;
  out.u = rank_u_statistic(a, b);
  if (std::min(a.size(), b.size()) < 8) {
    if (auto p = exact_p(a, b)) {
      out.p = std::min(1.0, *p);
      out.exact = true;
      return out;
    }
  }
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  const double n = na + nb;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const double variance = na * nb / 12.0 * ((n + 1.0) - tie_term(pooled) / (n * (n - 1.0)));
  if (!(variance > 0)) {
    out.p = 1.0;
    return out;
  }
  const double z = std::max(std::abs(out.u - 0.5 * na * nb) - 0.5, 0.0) / std::sqrt(variance);
  out.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

std::vector<Mode> default_modes(Eigen::Index dims) {
  Mode a{Eigen::VectorXd(dims), 0.015, 0.7};
  Mode b{Eigen::VectorXd(dims), 0.02, 0.3};
  for (Eigen::Index d = 0; d < dims; ++d) {
    a.center(d) = d % 2 == 0 ? 0.3 : 0.7;
    b.center(d) = (d / 2) % 2 == 0 ? 0.7 : 0.3;
  }
  return {a, b};
}

namespace {

constexpr double kEnvelopeZ = 3.2905;  // two-sided 99.9% normal quantile

std::vector<Eigen::Index> eligible_fault_dims(const Mode& mode, double magnitude) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index d = 0; d < mode.center.size(); ++d) {
    if (mode.center(d) + magnitude <= 1.0 || mode.center(d) - magnitude >= 0.0) out.push_back(d);
  }
  return out;
}

}  // namespace

Benchmark generate_fault_benchmark(const BenchmarkConfig& input) {
  BenchmarkConfig cfg = input;
  if (cfg.dims < 1) throw InputError("benchmark needs at least one dimension");
  if (cfg.modes.empty()) cfg.modes = default_modes(cfg.dims);
  if (cfg.n_train < 1) throw InputError("benchmark needs training rows");
  if (cfg.n_test_normal < 0 || cfg.n_faults < 0) throw InputError("row counts must be non-negative");
  if (cfg.fault_dims.empty()) throw InputError("fault dimension counts must be non-empty");
  if (!(cfg.magnitude > 0)) throw InputError("fault magnitude must be positive");
  const Eigen::Index max_faults = *std::max_element(cfg.fault_dims.begin(), cfg.fault_dims.end());
  for (Eigen::Index n : cfg.fault_dims) {
    if (n < 1 || n > cfg.dims) throw InputError("fault dimension count out of range");
  }
  std::vector<double> weights;
  std::vector<std::vector<Eigen::Index>> eligible;
  for (const auto& mode : cfg.modes) {
    if (mode.center.size() != cfg.dims) throw ShapeError("mode center has the wrong width");
    if ((mode.center.array() < 0).any() || (mode.center.array() > 1).any()) {
      throw PreconditionError("mode centers must lie inside the unit cube");
    }
    if (!(mode.scale > 0) || !(mode.weight > 0)) throw InputError("mode scale and weight must be positive");
    if (cfg.magnitude < kEnvelopeZ * mode.scale) {
      throw PreconditionError(fmt::format(
          "fault magnitude {} stays inside the 99.9% envelope ({}) of a mode", cfg.magnitude,
          kEnvelopeZ * mode.scale));
    }
    eligible.push_back(eligible_fault_dims(mode, cfg.magnitude));
    if (static_cast<Eigen::Index>(eligible.back().size()) < max_faults) {
      throw InputError("infeasible benchmark: fault magnitude leaves the unit cube on too many dimensions");
    }
    weights.push_back(mode.weight);
  }

  std::vector<std::string> names;
  for (Eigen::Index d = 0; d < cfg.dims; ++d) names.push_back(fmt::format("x{}", d));

  std::discrete_distribution<std::size_t> pick_mode(weights.begin(), weights.end());
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&](std::mt19937_64& rng, std::size_t& mode_index) {
    mode_index = pick_mode(rng);
    const Mode& m = cfg.modes[mode_index];
    Eigen::VectorXd x(cfg.dims);
    for (Eigen::Index d = 0; d < cfg.dims; ++d) {
      x(d) = std::clamp(m.center(d) + m.scale * gauss(rng), 0.0, 1.0);
    }
    return x;
  };

  std::size_t mode_index = 0;
  std::mt19937_64 train_rng(derive_seed(cfg.seed, "benchmark-train"));
  RowMatrixXd train(cfg.n_train, cfg.dims);
  for (Eigen::Index i = 0; i < cfg.n_train; ++i) train.row(i) = draw(train_rng, mode_index).transpose();

  std::vector<LabeledAnomaly> test;
  std::mt19937_64 test_rng(derive_seed(cfg.seed, "benchmark-test"));
  for (Eigen::Index i = 0; i < cfg.n_test_normal; ++i) {
    test.push_back({draw(test_rng, mode_index), false, Eigen::VectorXd::Zero(cfg.dims)});
  }
  std::uniform_int_distribution<std::size_t> pick_count(0, cfg.fault_dims.size() - 1);
  for (Eigen::Index i = 0; i < cfg.n_faults; ++i) {
    Eigen::VectorXd x = draw(test_rng, mode_index);
    const Mode& m = cfg.modes[mode_index];
    auto pool = eligible[mode_index];
    const auto n_a = static_cast<std::size_t>(cfg.fault_dims[pick_count(test_rng)]);
    for (std::size_t k = 0; k < n_a; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(test_rng)]);
    }
    std::vector<Eigen::Index> faulted(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_a));
    std::sort(faulted.begin(), faulted.end());
    for (Eigen::Index d : faulted) {
      const bool up_ok = m.center(d) + cfg.magnitude <= 1.0;
      const bool down_ok = m.center(d) - cfg.magnitude >= 0.0;
      double sign = up_ok ? 1.0 : -1.0;
      if (up_ok && down_ok) sign = std::bernoulli_distribution(0.5)(test_rng) ? 1.0 : -1.0;
      x(d) = std::clamp(x(d) + sign * cfg.magnitude, 0.0, 1.0);
    }
    test.push_back({std::move(x), true, fault_label(cfg.dims, faulted)});
  }
  std::mt19937_64 order_rng(derive_seed(cfg.seed, "benchmark-order"));
  std::shuffle(test.begin(), test.end(), order_rng);

  return {Dataset(names, std::move(train), {}, fmt::format("synthetic benchmark seed={}", cfg.seed)),
          std::move(test)};
}

void write_labeled_csv(std::ostream& out, const std::vector<std::string>& names,
                       const std::vector<LabeledAnomaly>& rows) {
  for (const auto& n : names) out << n << ',';
  out << "label";
  for (const auto& n : names) out << ",beta_" << n;
  out << '\n';
  for (const auto& row : rows) {
    if (row.x.size() != static_cast<Eigen::Index>(names.size())) {
      throw ShapeError("labeled row width does not match names");
    }
    for (Eigen::Index d = 0; d < row.x.size(); ++d) out << format_number(row.x(d)) << ',';
    out << (row.anomalous ? 1 : 0);
    for (Eigen::Index d = 0; d < row.beta.size(); ++d) out << ',' << format_number(row.beta(d));
    out << '\n';
  }
}

LabeledSet parse_labeled(std::istream& in) {
  const CsvTable table = read_csv_table(in);
  const auto label_it = std::find(table.header.begin(), table.header.end(), "label");
  if (label_it == table.header.end()) throw ParseError("labeled data needs a 'label' column", 1);
  const auto label_col = static_cast<std::size_t>(label_it - table.header.begin());
  LabeledSet set;
  std::vector<std::size_t> value_cols;
  std::vector<std::size_t> beta_cols;
  for (std::size_t c = 0; c < label_col; ++c) {
    if (c == 0 && table.header[c] == "ts") continue;
    set.names.push_back(table.header[c]);
    value_cols.push_back(c);
    const auto beta = std::find(table.header.begin(), table.header.end(), "beta_" + table.header[c]);
    if (beta == table.header.end()) {
      throw ParseError("missing column 'beta_" + table.header[c] + "'", 1);
    }
    beta_cols.push_back(static_cast<std::size_t>(beta - table.header.begin()));
  }
  if (set.names.empty()) throw ParseError("labeled data has no value columns", 1);
  const auto dims = static_cast<Eigen::Index>(set.names.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cells = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    LabeledAnomaly row{Eigen::VectorXd(dims), false, Eigen::VectorXd(dims)};
    for (Eigen::Index d = 0; d < dims; ++d) {
      const auto vc = value_cols[static_cast<std::size_t>(d)];
      const auto bc = beta_cols[static_cast<std::size_t>(d)];
      row.x(d) = parse_cell(cells[vc], line, vc + 1);
      row.beta(d) = parse_cell(cells[bc], line, bc + 1);
    }
    const double label = parse_cell(cells[label_col], line, label_col + 1);
    if (label != 0.0 && label != 1.0) throw ParseError("label must be 0 or 1", line, label_col + 1);
    row.anomalous = label == 1.0;
    try {
      validate(row);
    } catch (const Error& e) {
      throw ParseError(e.what(), line);
    }
    set.rows.push_back(std::move(row));
  }
  return set;
}

LabeledSet load_labeled(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return parse_labeled(in);
}

AttributionMethod ig_method(const Detector& det, const ExemplarSet& exemplars, ExplainOptions opts) {
  return {"ig", [&det, &exemplars, opts](const Eigen::VectorXd& raw) {
            return explain(det, exemplars, raw, opts).blame;
          }};
}

AttributionMethod surrogate_method(const Detector& det, SurrogateConfig cfg) {
  return {"surrogate", [&det, cfg](const Eigen::VectorXd& raw) {
            return surrogate_attribution(det, det.normalizer().apply(raw), cfg);
          }};
}

std::vector<MethodReport> evaluate_methods(const std::vector<LabeledAnomaly>& test,
                                           const std::vector<AttributionMethod>& methods,
                                           unsigned threads) {
  std::vector<const LabeledAnomaly*> anomalies;
  for (const auto& row : test) {
    if (row.anomalous) anomalies.push_back(&row);
  }
  if (anomalies.size() < 30) {
    throw PreconditionError("evaluation needs at least 30 anomalous rows, got " +
                            std::to_string(anomalies.size()));
  }
  std::vector<MethodReport> reports;
  for (const auto& method : methods) {
    MethodReport report;
    report.name = method.name;
    std::vector<double> errors(anomalies.size());
    try {
      parallel_for(anomalies.size(), threads, [&](std::size_t i) {
        const auto& row = *anomalies[i];
        errors[i] = attribution_error(method.attribute(row.x), row.beta);
      });
      report.errors = std::move(errors);
      const auto n = static_cast<double>(report.errors.size());
      report.mean = std::accumulate(report.errors.begin(), report.errors.end(), 0.0) / n;
      double ss = 0;
      for (double e : report.errors) ss += (e - report.mean) * (e - report.mean);
      report.stddev = report.errors.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    } catch (const std::exception& e) {
      report.failure = e.what();
    }
    reports.push_back(std::move(report));
  }
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (std::size_t j = i + 1; j < reports.size(); ++j) {
      if (reports[i].failure || reports[j].failure) continue;
      const double p = mann_whitney_u(reports[i].errors, reports[j].errors).p;
      reports[i].p_values[reports[j].name] = p;
      reports[j].p_values[reports[i].name] = p;
    }
  }
  return reports;
}

nlohmann::json reports_to_json(const std::vector<MethodReport>& reports) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : reports) {
    list.push_back({{"name", r.name},
                    {"n", r.errors.size()},
                    {"mean", r.mean},
                    {"std", r.stddev},
                    {"errors", r.errors},
                    {"p_values", r.p_values},
                    {"failure", r.failure ? nlohmann::json(*r.failure) : nlohmann::json(nullptr)}});
  }
  return {{"methods", std::move(list)}, {"alpha", 0.05}};
}

std::string format_report_table(const std::vector<MethodReport>& reports) {
  std::size_t name_width = 6;
  for (const auto& r : reports) name_width = std::max(name_width, r.name.size());
  std::string out = fmt::format("{:<{}}  {:>5}  {:>14}  {:>10}", "method", name_width, "n",
                                "mean err (%)", "std (%)");
  for (const auto& r : reports) out += fmt::format("  {:>12}", "p vs " + r.name);
  out += '\n';
  for (const auto& r : reports) {
    if (r.failure) {
      out += fmt::format("{:<{}}  failed: {}\n", r.name, name_width, *r.failure);
      continue;
    }
    out += fmt::format("{:<{}}  {:>5}  {:>14.3f}  {:>10.3f}", r.name, name_width, r.errors.size(),
                       100.0 * r.mean, 100.0 * r.stddev);
    for (const auto& other : reports) {
      const auto it = r.p_values.find(other.name);
      out += it == r.p_values.end() ? fmt::format("  {:>12}", "-")
                                    : fmt::format("  {:>12.3g}", it->second);
    }
    out += '\n';
  }
  return out;
}

}  // namespace anomex
