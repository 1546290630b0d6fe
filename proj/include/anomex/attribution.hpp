#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "anomex/dataio.hpp"
#include "anomex/detector.hpp"
#include "anomex/errors.hpp"
#include "anomex/exemplar.hpp"
#include "json.hpp"

namespace anomex {

// Anything exposing a scalar score and its exact input gradient.
template <typename F>
concept DifferentiableScore = requires(const F& f, const typename F::Vector& x) {
  typename F::Scalar;
  typename F::Vector;
  { f.dims() } -> std::convertible_to<Eigen::Index>;
  { f.value(x) } -> std::convertible_to<typename F::Scalar>;
  { f.gradient(x) } -> std::convertible_to<typename F::Vector>;
};

// F(x) = w.x + b. Attributions of an affine score are path independent.
template <typename Scalar_ = double>
struct AffineScore {
  using Scalar = Scalar_;
  using Vector = Vec<Scalar>;

  Vector weights;
  Scalar bias = 0;

  Eigen::Index dims() const { return weights.size(); }
  Scalar value(const Vector& x) const { return weights.dot(x) + bias; }
  Vector gradient(const Vector&) const { return weights; }
};

enum class PathKind { Straight, AxisAligned };

std::string_view to_string(PathKind kind);
PathKind path_kind_from_string(std::string_view name);

// Straight: x + alpha (x' - x). AxisAligned: one coordinate at a time, axes in
// descending |x' - x|_d with index tie-break. `steps` midpoint samples per
// segment.
struct PathSpec {
  PathKind kind = PathKind::Straight;
  Eigen::Index steps = 1024;
};

namespace detail {

template <typename Vector>
void check_pair(Eigen::Index dims, const Vector& x, const Vector& baseline) {
  if (x.size() != dims || baseline.size() != dims) {
    throw ShapeError("attribution endpoints must have width " + std::to_string(dims));
  }
  if (!x.allFinite() || !baseline.allFinite()) throw InputError("attribution endpoints must be finite");
}

template <typename Vector>
std::vector<Eigen::Index> axis_order(const Vector& displacement) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(displacement.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    using std::abs;
    return abs(displacement(a)) > abs(displacement(b));
  });
  return order;
}

}  // namespace detail

// Path integral of dF/dx_d from x to the baseline, scaled by the displacement,
// approximated by the midpoint rule. The components sum to F(x') - F(x) up to
// discretization error.
template <DifferentiableScore F>
typename F::Vector integrated_gradients(const F& f, const typename F::Vector& x,
                                        const typename F::Vector& baseline, const PathSpec& path) {
  using Scalar = typename F::Scalar;
  using Vector = typename F::Vector;
  if (path.steps < 1) throw InputError("integration needs at least one step");
  detail::check_pair(f.dims(), x, baseline);
  const Vector delta = baseline - x;
  const Scalar m = Scalar(path.steps);
  Vector raw = Vector::Zero(x.size());
  if (path.kind == PathKind::Straight) {
    Vector total = Vector::Zero(x.size());
    for (Eigen::Index k = 0; k < path.steps; ++k) {
      const Scalar alpha = (Scalar(k) + Scalar(0.5)) / m;
      total += f.gradient(Vector(x + alpha * delta));
    }
    raw = delta.cwiseProduct(total) / m;
  } else {
    Vector corner = x;
    for (Eigen::Index d : detail::axis_order(delta)) {
      if (delta(d) == Scalar(0)) continue;
      Scalar total(0);
      Vector z = corner;
      for (Eigen::Index k = 0; k < path.steps; ++k) {
        z(d) = corner(d) + (Scalar(k) + Scalar(0.5)) / m * delta(d);
        total += f.gradient(z)(d);
      }
      raw(d) = delta(d) * total / m;
      corner(d) = baseline(d);
    }
  }
  return raw;
}

template <DifferentiableScore F>
typename F::Scalar completeness_gap(const F& f, const typename F::Vector& x,
                                    const typename F::Vector& baseline,
                                    const typename F::Vector& raw) {
  using std::abs;
  return abs(raw.sum() - (f.value(baseline) - f.value(x)));
}

// Positive attribution mass over total absolute mass: b_d in [0,1] and
// sum_d b_d <= 1. Negative components (movement toward normal) get no blame.
Eigen::VectorXd blame(const Eigen::Ref<const Eigen::VectorXd>& raw);

struct Explanation {
  Eigen::VectorXd x;         // normalized observation
  Eigen::VectorXd baseline;  // normalized exemplar
  double score = 0;
  double baseline_score = 0;
  Eigen::VectorXd raw;
  Eigen::VectorXd blame;
  double gap = 0;
  Metric metric = Metric::L2;
  PathSpec path;  // steps is the final, possibly refined, count
  std::size_t baseline_index = 0;
  double baseline_distance = 0;
  std::vector<std::string> flags;
  std::optional<Timestamp> ts;
};

struct ExplainOptions {
  Metric metric = Metric::L2;
  PathSpec path;
  double gap_tolerance = 1e-3;
  Eigen::Index max_steps = Eigen::Index{1} << 16;
  double anomaly_threshold = 0.5;  // F(x) above this is flagged non_anomalous
};

// Nearest exemplar, IG toward it (doubling steps while the completeness gap
// exceeds tolerance), then blame.
Explanation explain_normalized(const Detector& det, const ExemplarSet& exemplars,
                               const Eigen::Ref<const Eigen::VectorXd>& normalized,
                               const ExplainOptions& opts = {});

Explanation explain(const Detector& det, const ExemplarSet& exemplars,
                    const Eigen::Ref<const Eigen::VectorXd>& raw, const ExplainOptions& opts = {});

nlohmann::json explanation_to_json(const Explanation& e);

struct OrderingAgreement {
  Eigen::Index compared = 0;
  Eigen::Index agreeing = 0;

  double ratio() const {
    return compared == 0 ? 1.0 : static_cast<double>(agreeing) / static_cast<double>(compared);
  }
};

// Pairwise sign agreement of (a_u - a_v) with (reference_u - reference_v) over
// pairs whose reference difference is at least `tie`. With `skip_own_ties`,
// pairs tied in `a` are also excluded.
OrderingAgreement ordering_agreement(const Eigen::Ref<const Eigen::VectorXd>& a,
                                     const Eigen::Ref<const Eigen::VectorXd>& reference,
                                     double tie = 1e-6, bool skip_own_ties = false);

struct DesiderataOptions {
  double epsilon = 0.1;
  double anomaly_threshold = 0.5;
  PathSpec path;  // kind used for the dense reference integral
  Eigen::Index dense_steps = 16384;
  double dummy_tolerance = 1e-9;
  double probe = 0.05;
  double probe_tolerance = 1e-4;
  double tie_tolerance = 1e-6;
};

struct DesiderataReport {
  bool contrastive = false;
  double score = 0;
  double baseline_score = 0;
  double completeness_gap = 0;
  // One entry per dimension; empty when the dimension had non-zero attribution
  // and was not probed.
  std::vector<std::optional<bool>> sensitivity;
  OrderingAgreement proportionality;
  Eigen::VectorXd dense;

  bool sensitivity_ok() const {
    return std::all_of(sensitivity.begin(), sensitivity.end(),
                       [](const std::optional<bool>& s) { return !s || *s; });
  }
};

template <DifferentiableScore F>
DesiderataReport check_desiderata(const F& f, const typename F::Vector& x,
                                  const typename F::Vector& baseline,
                                  const typename F::Vector& raw, const DesiderataOptions& opts = {}) {
  using Vector = typename F::Vector;
  DesiderataReport report;
  report.score = static_cast<double>(f.value(x));
  report.baseline_score = static_cast<double>(f.value(baseline));
  report.contrastive =
      report.baseline_score >= 1.0 - opts.epsilon && report.score <= opts.anomaly_threshold;
  report.completeness_gap = static_cast<double>(completeness_gap(f, x, baseline, raw));

  report.sensitivity.resize(static_cast<std::size_t>(raw.size()));
  for (Eigen::Index d = 0; d < raw.size(); ++d) {
    if (std::abs(static_cast<double>(raw(d))) >= opts.dummy_tolerance) continue;
    bool ok = true;
    for (const Vector* endpoint : {&x, &baseline}) {
      const double base = static_cast<double>(f.value(*endpoint));
      for (double sign : {-1.0, 1.0}) {
        Vector probe = *endpoint;
        probe(d) += sign * opts.probe;
        ok = ok && std::abs(static_cast<double>(f.value(probe)) - base) < opts.probe_tolerance;
      }
    }
    report.sensitivity[static_cast<std::size_t>(d)] = ok;
  }

  PathSpec dense = opts.path;
  dense.steps = opts.dense_steps;
  report.dense = integrated_gradients(f, x, baseline, dense).template cast<double>();
  report.proportionality = ordering_agreement(raw.template cast<double>(), report.dense, opts.tie_tolerance);
  return report;
}

nlohmann::json desiderata_to_json(const DesiderataReport& report);

// LIME-style comparator: weighted least-squares linear fit to F over Gaussian
// perturbations of x (std = kernel_width), weighted by exp(-d^2 / w^2) with
// w = 0.75 sqrt(D) kernel_width.
struct SurrogateConfig {
  Eigen::Index samples = 0;  // 0 -> max(1000, 10 D)
  double kernel_width = 0.1;
  std::uint64_t seed = 0;
};

template <DifferentiableScore F>
Eigen::VectorXd surrogate_coefficients(const F& f, const Eigen::VectorXd& x,
                                       const SurrogateConfig& cfg) {
  const Eigen::Index dims = f.dims();
  if (x.size() != dims) throw ShapeError("surrogate input has the wrong width");
  if (!x.allFinite()) throw InputError("surrogate input must be finite");
  const Eigen::Index k = cfg.samples == 0 ? std::max<Eigen::Index>(1000, 10 * dims) : cfg.samples;
  if (k < 10 * dims) {
    throw PreconditionError("surrogate needs at least " + std::to_string(10 * dims) + " samples");
  }
  if (!(cfg.kernel_width > 0)) throw PreconditionError("kernel width must be positive");

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.kernel_width);
  const double w = 0.75 * std::sqrt(static_cast<double>(dims)) * cfg.kernel_width;
  Eigen::MatrixXd design(k, dims + 1);
  Eigen::VectorXd target(k);
  Eigen::VectorXd weight(k);
  using Vector = typename F::Vector;
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::VectorXd offset(dims);
    for (Eigen::Index d = 0; d < dims; ++d) offset(d) = noise(rng);
    design(i, 0) = 1.0;
    design.row(i).tail(dims) = offset.transpose();
    target(i) = static_cast<double>(f.value(Vector((x + offset).template cast<typename F::Scalar>())));
    weight(i) = std::exp(-offset.squaredNorm() / (w * w));
  }
  Eigen::MatrixXd normal = design.transpose() * weight.asDiagonal() * design;
  normal.diagonal().tail(dims).array() += 1e-6;
  const Eigen::VectorXd rhs = design.transpose() * weight.asDiagonal() * target;
  const Eigen::VectorXd beta = normal.ldlt().solve(rhs);
  return beta.tail(dims);
}

template <DifferentiableScore F>
Eigen::VectorXd surrogate_attribution(const F& f, const Eigen::VectorXd& x,
                                      const SurrogateConfig& cfg = {}) {
  const Eigen::VectorXd coef = surrogate_coefficients(f, x, cfg);
  return blame((coef * cfg.kernel_width).cwiseAbs());
}

}  // namespace anomex
