#include <doctest.h>

#include <cmath>
#include <random>

#include "anomex/attribution.hpp"
#include "fixture.hpp"

using namespace anomex;
using anomex::testing::fixture;
using anomex::testing::logistic_detector;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Closed-form straight-path integral for F = sigma(w.x + b).
Eigen::VectorXd logistic_ig(const Eigen::VectorXd& w, double b, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& xp) {
  const Eigen::VectorXd delta = xp - x;
  const double rise = sigmoid(w.dot(xp) + b) - sigmoid(w.dot(x) + b);
  return delta.cwiseProduct(w) * rise / w.dot(delta);
}

void check_codomain(const Eigen::VectorXd& b) {
  CHECK(b.minCoeff() >= 0.0);
  CHECK(b.maxCoeff() <= 1.0);
  CHECK(b.sum() <= 1.0);
}

// Rooftop unit telemetry in engineering units; two operating regimes.
Detector vav_detector(Eigen::VectorXd& fault, Eigen::Index& valve) {
  const std::vector<std::string> names = {"supply_air_temp", "zone_temp", "heating_valve", "airflow", "damper"};
  valve = 2;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g(0.0, 1.0);
  const Eigen::Index n = 3000;
  RowMatrixXd v(n, 5);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool occupied = i % 3 != 0;
    v(i, 0) = (occupied ? 14.0 : 18.0) + 0.3 * g(rng);
    v(i, 1) = (occupied ? 22.0 : 19.0) + 0.3 * g(rng);
    v(i, 2) = (occupied ? 30.0 : 10.0) + 2.0 * g(rng);
    v(i, 3) = (occupied ? 900.0 : 300.0) + 20.0 * g(rng);
    v(i, 4) = (occupied ? 60.0 : 20.0) + 2.0 * g(rng);
  }
  fault = Eigen::VectorXd(5);
  fault << 14.0, 22.0, 10.0, 900.0, 60.0;  // valve stuck shut while occupied
  NegativeSamplingConfig ns;
  ns.seed = 31;
  TrainConfig tc;
  tc.seed = 32;
  return fit_detector(Dataset(names, v), ns, tc);
}

}  // namespace

TEST_SUITE("attribution") {

TEST_CASE("zero displacement gives zero attribution") {
  const Detector det = logistic_detector(Eigen::Vector3d(1, -2, 0.5), 0.1);
  const Eigen::VectorXd x = Eigen::Vector3d(0.2, 0.4, 0.9);
  for (PathKind k : {PathKind::Straight, PathKind::AxisAligned}) {
    CHECK(integrated_gradients(det, x, x, PathSpec{k, 64}).isZero(0));
  }
}

TEST_CASE("logistic unit matches the closed-form path integral") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 1.5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd w(4), x(4), xp(4);
    for (int d = 0; d < 4; ++d) {
      w(d) = g(rng);
      x(d) = u(rng);
      xp(d) = u(rng);
    }
    const double b = g(rng);
    const Detector det = logistic_detector(w, b);
    const Eigen::VectorXd got = integrated_gradients(det, x, xp, PathSpec{PathKind::Straight, 2048});
    const Eigen::VectorXd want = logistic_ig(w, b, x, xp);
    CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("affine scores are path independent") {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    AffineScore<double> f{Eigen::VectorXd(6), g(rng)};
    Eigen::VectorXd x(6), xp(6);
    for (int d = 0; d < 6; ++d) {
      f.weights(d) = g(rng);
      x(d) = g(rng);
      xp(d) = g(rng);
    }
    const Eigen::VectorXd l2 = integrated_gradients(f, x, xp, PathSpec{PathKind::Straight, 16});
    const Eigen::VectorXd l1 = integrated_gradients(f, x, xp, PathSpec{PathKind::AxisAligned, 16});
    CHECK((l1 - l2).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((l2 - f.weights.cwiseProduct(xp - x)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("axis path visits larger displacements first") {
  // F = x0 * x1 is path dependent: the axis visited first sees the other at its start value.
  struct Product {
    using Scalar = double;
    using Vector = Eigen::VectorXd;
    Eigen::Index dims() const { return 2; }
    double value(const Vector& v) const { return v(0) * v(1); }
    Vector gradient(const Vector& v) const { return Eigen::Vector2d(v(1), v(0)); }
  };
  const Eigen::VectorXd x = Eigen::Vector2d(1, 1);
  const Eigen::VectorXd xp = Eigen::Vector2d(3, 2);  // |dx0| = 2 > |dx1| = 1
  const Eigen::VectorXd raw = integrated_gradients(Product{}, x, xp, PathSpec{PathKind::AxisAligned, 8});
  CHECK(raw(0) == doctest::Approx(2.0));  // x1 still 1 while x0 moves
  CHECK(raw(1) == doctest::Approx(3.0));  // x0 already 3 while x1 moves
  CHECK(raw.sum() == doctest::Approx(Product{}.value(xp) - Product{}.value(x)));
}

TEST_CASE("integration rejects bad inputs") {
  const Detector det = logistic_detector(Eigen::Vector2d(1, 1), 0);
  CHECK_THROWS_AS(integrated_gradients(det, Eigen::VectorXd(Eigen::Vector2d(0, 0)),
                                       Eigen::VectorXd(Eigen::Vector3d(0, 0, 0)), PathSpec{}),
                  ShapeError);
  CHECK_THROWS_AS(integrated_gradients(det, Eigen::VectorXd(Eigen::Vector2d(0, 0)),
                                       Eigen::VectorXd(Eigen::Vector2d(1, 1)), PathSpec{PathKind::Straight, 0}),
                  InputError);
  CHECK(path_kind_from_string("L1") == PathKind::AxisAligned);
  CHECK_THROWS_AS(path_kind_from_string("spiral"), InputError);
}

TEST_CASE("blame examples") {
  const Eigen::VectorXd a = blame(Eigen::Vector3d(0.6, -0.2, 0.2));
  CHECK(a(0) == doctest::Approx(0.6));
  CHECK(a(1) == 0.0);
  CHECK(a(2) == doctest::Approx(0.2));
  CHECK(blame(Eigen::Vector3d::Zero()).isZero(0));
  const Eigen::VectorXd c = blame(Eigen::Vector2d(2, 2));
  CHECK(c(0) == doctest::Approx(0.5));
  CHECK(c(1) == doctest::Approx(0.5));
  CHECK_THROWS_AS(blame(Eigen::Vector2d(NAN, 1)), InputError);
}

TEST_CASE("blame codomain holds exactly on random vectors") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> dims(1, 40);
  for (int t = 0; t < 2000; ++t) {
    Eigen::VectorXd raw(dims(rng));
    for (Eigen::Index d = 0; d < raw.size(); ++d) raw(d) = t % 3 == 0 ? std::abs(g(rng)) * 1e-3 : g(rng) * 1e5;
    const Eigen::VectorXd b = blame(raw);
    check_codomain(b);
    double sum = 0;
    for (Eigen::Index d = b.size() - 1; d >= 0; --d) sum += b(d);
    CHECK(sum <= 1.0);
  }
}

TEST_CASE("single-dimension fault is blamed on that dimension") {
  const auto& f = fixture();
  const Mode mode = default_modes(8)[0];
  Eigen::VectorXd x = mode.center;
  x(3) += mode.center(3) + 0.35 <= 1.0 ? 0.35 : -0.35;
  const Explanation e = explain(f.det, f.exemplars, x);
  Eigen::Index top = 0;
  e.blame.maxCoeff(&top);
  CHECK(top == 3);
  CHECK(e.gap <= 1e-3);
  CHECK(e.flags.empty());
  check_codomain(e.blame);
  CHECK(e.raw.sum() == doctest::Approx(e.baseline_score - e.score).epsilon(1e-3));
}

TEST_CASE("explaining an exemplar gives nothing to blame") {
  const auto& f = fixture();
  const auto& ex = f.exemplars.exemplars.front();
  const Explanation e = explain_normalized(f.det, f.exemplars, ex.x);
  CHECK(e.baseline_distance == 0);
  CHECK(e.blame.isZero(0));
  CHECK(e.gap == 0);
  CHECK(std::find(e.flags.begin(), e.flags.end(), "non_anomalous") != e.flags.end());
}

TEST_CASE("step count doubles until the gap is within tolerance") {
  const auto& f = fixture();
  const auto& row = *std::find_if(f.bench.test.begin(), f.bench.test.end(),
                                  [](const LabeledAnomaly& r) { return r.anomalous; });
  ExplainOptions opts;
  opts.path.steps = 1;
  const Explanation e = explain(f.det, f.exemplars, row.x, opts);
  CHECK(e.path.steps > 1);
  CHECK(e.gap <= 1e-3);
  opts.max_steps = 1;
  opts.gap_tolerance = 0;
  const Explanation capped = explain(f.det, f.exemplars, row.x, opts);
  CHECK(capped.path.steps == 1);
  CHECK(std::find(capped.flags.begin(), capped.flags.end(), "gap_above_tolerance") != capped.flags.end());
}

TEST_CASE("explanation json carries the documented fields") {
  const auto& f = fixture();
  Explanation e = explain(f.det, f.exemplars, f.bench.test.front().x);
  e.ts = parse_timestamp("2024-05-01T12:00:00Z");
  const auto doc = explanation_to_json(e);
  for (const char* key : {"x", "baseline", "score", "baseline_score", "raw", "blame", "gap", "metric", "path", "flags"}) {
    CHECK(doc.contains(key));
  }
  CHECK(doc.at("path").at("kind") == "straight");
  CHECK(doc.at("ts") == "2024-05-01T12:00:00Z");
}

TEST_CASE("valve fault in rooftop telemetry is dominated by the valve") {
  Eigen::VectorXd fault;
  Eigen::Index valve = 0;
  const Detector det = vav_detector(fault, valve);
  CHECK(det.meta().auc.value_or(0) >= 0.95);
  // Exemplars from a clean occupied-regime reading and an unoccupied one.
  ExemplarSet set;
  Eigen::VectorXd occupied(5), idle(5);
  occupied << 14.0, 22.0, 30.0, 900.0, 60.0;
  idle << 18.0, 19.0, 10.0, 300.0, 20.0;
  for (const auto& raw : {occupied, idle}) {
    const Eigen::VectorXd y = det.normalizer().apply(raw);
    set.exemplars.push_back({y, 0, det.value(y)});
  }
  const Explanation e = explain(det, set, fault);
  CHECK(e.score < 0.5);
  CHECK(e.baseline_index == 0);
  CHECK(e.blame(valve) > 0.5);
}

TEST_CASE("desiderata on an affine score") {
  const AffineScore<double> f{Eigen::Vector3d(2, 0, 1), 0};
  const Eigen::VectorXd x = Eigen::Vector3d(0, 0, 0);
  const Eigen::VectorXd xp = Eigen::Vector3d(1, 1, 1);
  const Eigen::VectorXd raw = integrated_gradients(f, x, xp, PathSpec{});
  CHECK(raw(0) > raw(2));
  CHECK(raw(1) == 0);
  DesiderataOptions opts;
  opts.epsilon = 0.1;
  const DesiderataReport r = check_desiderata(f, x, xp, raw, opts);
  CHECK(r.sensitivity[1].has_value());
  CHECK(r.sensitivity[1].value());
  CHECK_FALSE(r.sensitivity[0].has_value());
  CHECK(r.sensitivity_ok());
  CHECK(r.proportionality.compared == 3);
  CHECK(r.proportionality.ratio() == 1.0);
  CHECK(r.completeness_gap <= 1e-12);
  CHECK(r.contrastive);
}

TEST_CASE("desiderata on the fixture") {
  const auto& f = fixture();
  int audited = 0;
  for (const auto& row : f.bench.test) {
    if (!row.anomalous || audited == 5) continue;
    const Explanation e = explain(f.det, f.exemplars, row.x);
    if (e.score > 0.5) continue;  // missed by the detector, so not contrastive
    const DesiderataReport r = check_desiderata(f.det, e.x, e.baseline, e.raw);
    CHECK(r.contrastive);
    CHECK(r.completeness_gap <= 1e-3);
    CHECK(r.sensitivity_ok());
    const auto doc = desiderata_to_json(r);
    CHECK(doc.at("proportionality").at("compared") == r.proportionality.compared);
    ++audited;
  }
  CHECK(audited == 5);
  const auto& ex = f.exemplars.exemplars.front().x;
  const DesiderataReport same = check_desiderata(f.det, ex, ex, Eigen::VectorXd::Zero(8));
  CHECK(same.completeness_gap == 0);
}

TEST_CASE("surrogate recovers a logistic unit's gradient direction") {
  Eigen::VectorXd w(5);
  w << 1.5, -0.8, 0.3, 0.0, 2.0;
  const Detector det = logistic_detector(w, -1.0);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(5, 0.4);
  SurrogateConfig cfg;
  cfg.seed = 5;
  const Eigen::VectorXd coef = surrogate_coefficients(det, x, cfg);
  const Eigen::VectorXd grad = det.gradient(x);
  CHECK(coef.dot(grad) / (coef.norm() * grad.norm()) >= 0.99);
  const Eigen::VectorXd b = surrogate_attribution(det, x, cfg);
  check_codomain(b);
  CHECK(b == surrogate_attribution(det, x, cfg));
  Eigen::Index top = 0;
  b.maxCoeff(&top);
  CHECK(top == 4);
}

TEST_CASE("surrogate preconditions") {
  const Detector det = logistic_detector(Eigen::VectorXd::Ones(8), 0);
  SurrogateConfig cfg;
  cfg.samples = 79;
  CHECK_THROWS_AS(surrogate_coefficients(det, Eigen::VectorXd::Zero(8), cfg), PreconditionError);
  cfg.samples = 80;
  CHECK_NOTHROW(surrogate_coefficients(det, Eigen::VectorXd::Zero(8), cfg));
  cfg.kernel_width = 0;
  CHECK_THROWS_AS(surrogate_coefficients(det, Eigen::VectorXd::Zero(8), cfg), PreconditionError);
}

TEST_CASE("ordering agreement counts") {
  const OrderingAgreement all = ordering_agreement(Eigen::Vector3d(3, 2, 1), Eigen::Vector3d(30, 20, 10));
  CHECK(all.compared == 3);
  CHECK(all.agreeing == 3);
  const OrderingAgreement swapped = ordering_agreement(Eigen::Vector3d(1, 2, 0), Eigen::Vector3d(2, 1, 0));
  CHECK(swapped.agreeing == 2);
  const OrderingAgreement ties = ordering_agreement(Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(-1, -2, 1), 1e-6, true);
  CHECK(ties.compared == 2);
}

}  // TEST_SUITE
