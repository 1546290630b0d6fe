#include <doctest.h>

#include <filesystem>
#include <random>

#include "anomex/detector.hpp"
#include "fixture.hpp"

using namespace anomex;
using anomex::testing::fixture;

namespace {

Dataset small_blob(std::uint64_t seed, Eigen::Index rows) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.5, 0.05);
  RowMatrixXd v(rows, 3);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = g(rng);
  return Dataset({"a", "b", "c"}, v);
}

}  // namespace

TEST_SUITE("detector") {

TEST_CASE("negative counts and envelope") {
  const RowMatrixXd data = RowMatrixXd::Constant(100, 4, 0.5);
  NegativeSamplingConfig cfg;
  cfg.ratio = 2;
  cfg.seed = 4;
  const RowMatrixXd neg = sample_negatives(data, cfg);
  CHECK(neg.rows() == 200);
  CHECK(neg.cols() == 4);
  CHECK(neg.minCoeff() >= -cfg.envelope);
  CHECK(neg.maxCoeff() <= 1 + cfg.envelope);
  CHECK(neg.minCoeff() < 0);  // 800 draws: the inflated margin is reached

  cfg.envelope = 0;
  const RowMatrixXd unit = sample_negatives(data, cfg);
  CHECK(unit.minCoeff() >= 0);
  CHECK(unit.maxCoeff() <= 1);
  CHECK(sample_negatives(data, cfg) == unit);

  cfg.ratio = 0;
  CHECK_THROWS_AS(sample_negatives(data, cfg), InputError);
}

TEST_CASE("fractional ratio rounds up") {
  NegativeSamplingConfig cfg;
  cfg.ratio = 1.5;
  CHECK(sample_negatives(RowMatrixXd::Zero(3, 2), cfg).rows() == 5);
}

TEST_CASE("single row trains with a degenerate auc") {
  const Dataset one({"a", "b"}, RowMatrixXd::Constant(1, 2, 0.3));
  TrainConfig tc;
  tc.epochs = 3;
  const Detector det = fit_detector(one, NegativeSamplingConfig{}, tc);
  CHECK(det.meta().degenerate_auc);
  CHECK_FALSE(det.meta().auc.has_value());
  CHECK(det.meta().constant_dims == std::vector<Eigen::Index>{0, 1});
  const double s = score(det, Eigen::Vector2d(0.3, 0.3));
  CHECK(s > 0);
  CHECK(s < 1);
}

TEST_CASE("identical inputs give identical artifacts") {
  const Dataset data = small_blob(1, 200);
  NegativeSamplingConfig ns;
  ns.seed = 3;
  TrainConfig tc;
  tc.epochs = 5;
  tc.seed = 4;
  const Detector a = fit_detector(data, ns, tc);
  const Detector b = fit_detector(data, ns, tc);
  CHECK(detector_to_json(a).dump() == detector_to_json(b).dump());
  CHECK(a.meta().positives == 160);
  CHECK(a.meta().negatives == 480);
  CHECK(a.meta().holdout_positives == 40);
}

TEST_CASE("artifact round trip preserves scores") {
  const Dataset data = small_blob(2, 100);
  TrainConfig tc;
  tc.epochs = 3;
  const Detector det = fit_detector(data, NegativeSamplingConfig{}, tc);
  const auto path = std::filesystem::temp_directory_path() / "anomex_detector_roundtrip.json";
  save_detector(det, path);
  const Detector back = load_detector(path);
  std::filesystem::remove(path);
  CHECK(back.model() == det.model());
  CHECK(back.normalizer() == det.normalizer());
  CHECK(back.meta().auc == det.meta().auc);
  const Eigen::Vector3d x(0.45, 0.5, 0.61);
  CHECK(score(back, x) == score(det, x));
  CHECK_THROWS_AS(detector_from_json(nlohmann::json::parse(R"({"model": {}})")), ParseError);
}

TEST_CASE("fixture scores") {
  const auto& f = fixture();
  CHECK(f.det.meta().auc.value_or(0) >= 0.95);

  const Mode dense = default_modes(8)[0];
  const double inside = score(f.det, dense.center);
  CHECK(inside > 0.9);
  CHECK(score(f.det, dense.center) == inside);

  const double outside = score(f.det, Eigen::VectorXd::Constant(8, 10.0));
  CHECK(outside < 0.1);
  CHECK(score(f.det, Eigen::VectorXd::Constant(8, -10.0)) < 0.1);
}

TEST_CASE("faults score lower than normals on the benchmark") {
  const auto& f = fixture();
  double normal = 0, fault = 0;
  int n_normal = 0, n_fault = 0;
  for (const auto& row : f.bench.test) {
    const double s = score(f.det, row.x);
    CHECK(s > 0);
    CHECK(s < 1);
    if (row.anomalous) {
      fault += s;
      ++n_fault;
    } else {
      normal += s;
      ++n_normal;
    }
  }
  CHECK(fault / n_fault < normal / n_normal);
}

}  // TEST_SUITE
