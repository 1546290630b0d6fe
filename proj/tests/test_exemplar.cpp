#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "anomex/exemplar.hpp"
#include "fixture.hpp"

using namespace anomex;
using anomex::testing::fixture;
using anomex::testing::logistic_detector;

namespace {

// Scores sigma(5) ~ 0.993 everywhere, so every row is a candidate.
Detector everywhere_normal(Eigen::Index dims) { return logistic_detector(Eigen::VectorXd::Zero(dims), 5.0); }

RowMatrixXd gaussian_rows(std::mt19937_64& rng, Eigen::Index n, const Eigen::VectorXd& center, double sd) {
  std::normal_distribution<double> g(0.0, sd);
  RowMatrixXd out(n, center.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < center.size(); ++d) out(i, d) = center(d) + g(rng);
  }
  return out;
}

RowMatrixXd stack(const RowMatrixXd& a, const RowMatrixXd& b) {
  RowMatrixXd out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

ExemplarSet make_set(std::initializer_list<Eigen::Vector2d> points) {
  ExemplarSet s;
  for (const auto& p : points) s.exemplars.push_back({p, 0, 1.0});
  return s;
}

}  // namespace

TEST_SUITE("exemplar") {

TEST_CASE("dissimilarity arithmetic") {
  const Eigen::Vector2d o(0, 0), p(3, 4);
  CHECK(dissimilarity(o, p, Metric::L1) == 7);
  CHECK(dissimilarity(o, p, Metric::L2) == 5);
  CHECK(dissimilarity(p, p, Metric::L1) == 0);
  CHECK(dissimilarity(p, p, Metric::L2) == 0);
  CHECK_THROWS_AS(dissimilarity(Eigen::VectorXd(o), Eigen::VectorXd(Eigen::Vector3d(1, 2, 3)), Metric::L2), ShapeError);
}

TEST_CASE("triangle inequality on random triples") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int t = 0; t < 500; ++t) {
    Eigen::VectorXd x(5), y(5), z(5);
    for (int d = 0; d < 5; ++d) {
      x(d) = u(rng);
      y(d) = u(rng);
      z(d) = u(rng);
    }
    for (Metric m : {Metric::L1, Metric::L2}) {
      CHECK(dissimilarity(x, z, m) <= dissimilarity(x, y, m) + dissimilarity(y, z, m) + 1e-12);
      CHECK(dissimilarity(x, y, m) == dissimilarity(y, x, m));
    }
  }
}

TEST_CASE("dbscan on a hand-built layout") {
  RowMatrixXd pts(8, 2);
  pts << 0, 0, 0.1, 0, 0, 0.1, 0.1, 0.1,  // square
      5, 5, 5.1, 5, 5, 5.1,               // triangle
      9, 0;                               // loner
  const auto labels = dbscan(pts, 0.15, 3);
  CHECK(labels == std::vector<int>{0, 0, 0, 0, 1, 1, 1, -1});
  CHECK(dbscan(pts, 0.15, 5) == std::vector<int>(8, -1));
  CHECK_THROWS_AS(dbscan(pts, 0, 3), InputError);
}

TEST_CASE("border points join the cluster that reaches them") {
  RowMatrixXd pts(5, 1);
  pts << 0, 0.1, 0.2, 0.3, 0.44;  // 0.44 is a border point of 0.3
  const auto labels = dbscan(pts, 0.15, 3);
  CHECK(labels == std::vector<int>{0, 0, 0, 0, 0});
}

TEST_CASE("one tight cluster yields exactly n exemplars") {
  std::mt19937_64 rng(1);
  const RowMatrixXd x = gaussian_rows(rng, 100, Eigen::Vector2d(0.5, 0.5), 0.005);
  BaselineParams p;
  p.seed = 2;
  const ExemplarSet s = select_baseline(x, everywhere_normal(2), p);
  CHECK(s.size() == 5);
  CHECK(s.clusters == 1);
  for (const auto& e : s.exemplars) CHECK(e.cluster == 0);
  CHECK_FALSE(s.noise_fallback_used);
}

TEST_CASE("dense and sparse modes are both represented") {
  std::mt19937_64 rng(3);
  const RowMatrixXd a = gaussian_rows(rng, 400, Eigen::Vector2d(0.2, 0.2), 0.01);
  const RowMatrixXd b = gaussian_rows(rng, 40, Eigen::Vector2d(0.8, 0.7), 0.01);
  BaselineParams p;
  p.seed = 4;
  const ExemplarSet s = select_baseline(stack(a, b), everywhere_normal(2), p);
  CHECK(s.clusters == 2);
  CHECK(s.size() <= 10);
  std::set<int> ids;
  bool near_a = false, near_b = false;
  for (const auto& e : s.exemplars) {
    ids.insert(e.cluster);
    near_a = near_a || (e.x - Eigen::Vector2d(0.2, 0.2)).norm() < 0.1;
    near_b = near_b || (e.x - Eigen::Vector2d(0.8, 0.7)).norm() < 0.1;
  }
  CHECK(ids.size() == 2);
  CHECK(near_a);
  CHECK(near_b);
}

TEST_CASE("cluster coverage is min(n, cluster size)") {
  std::mt19937_64 rng(5);
  const RowMatrixXd a = gaussian_rows(rng, 50, Eigen::Vector2d(0.2, 0.2), 0.005);
  const RowMatrixXd b = gaussian_rows(rng, 6, Eigen::Vector2d(0.8, 0.8), 0.005);
  BaselineParams p;
  p.per_cluster = 8;
  p.min_points = 5;
  const RowMatrixXd x = stack(a, b);
  const ExemplarSet s = select_baseline(x, everywhere_normal(2), p);
  const auto labels = dbscan(x, s.cluster_eps, s.min_points);
  std::map<int, std::size_t> size, picked;
  for (int l : labels) {
    if (l >= 0) ++size[l];
  }
  for (const auto& e : s.exemplars) ++picked[e.cluster];
  REQUIRE(size.size() == 2);
  for (const auto& [cluster, n] : size) CHECK(picked[cluster] == std::min<std::size_t>(n, 8));
}

TEST_CASE("exemplars all clear the score threshold") {
  const auto& f = fixture();
  for (const auto& e : f.exemplars.exemplars) {
    CHECK(score_normalized(f.det, e.x) > 1 - f.exemplars.epsilon);
    CHECK(score_normalized(f.det, e.x) == e.score);
  }
}

TEST_CASE("no qualifying point raises EmptyBaseline") {
  std::mt19937_64 rng(6);
  const RowMatrixXd x = gaussian_rows(rng, 20, Eigen::Vector2d(0.5, 0.5), 0.1);
  const Detector low = logistic_detector(Eigen::VectorXd::Zero(2), -5.0);
  CHECK_THROWS_AS(select_baseline(x, low, BaselineParams{}), EmptyBaseline);
  BaselineParams tight;
  tight.epsilon = 1e-4;
  CHECK_THROWS_AS(select_baseline(x, everywhere_normal(2), tight), EmptyBaseline);
  CHECK_THROWS_AS(select_top_scoring(x, low, 5, 0.1), EmptyBaseline);
}

TEST_CASE("all-noise candidates fall back to one cluster") {
  RowMatrixXd x(6, 2);
  x << 0, 0, 1, 0, 0, 1, 1, 1, 0.5, 0.5, 0.2, 0.8;
  BaselineParams p;
  p.per_cluster = 3;
  const ExemplarSet s = select_baseline(x, everywhere_normal(2), p);
  CHECK(s.noise_fallback_used);
  CHECK(s.clusters == 1);
  CHECK(s.size() == 3);
  p.noise_fallback = false;
  CHECK_THROWS_AS(select_baseline(x, everywhere_normal(2), p), NoClusterFound);
}

TEST_CASE("selection is deterministic per seed") {
  std::mt19937_64 rng(7);
  const RowMatrixXd x = gaussian_rows(rng, 200, Eigen::Vector2d(0.4, 0.6), 0.01);
  BaselineParams p;
  p.seed = 10;
  const auto a = exemplars_to_json(select_baseline(x, everywhere_normal(2), p)).dump();
  CHECK(a == exemplars_to_json(select_baseline(x, everywhere_normal(2), p)).dump());
  p.seed = 11;
  CHECK(a != exemplars_to_json(select_baseline(x, everywhere_normal(2), p)).dump());
}

TEST_CASE("nearest exemplar examples") {
  const ExemplarSet s = make_set({{0, 0}, {10, 10}});
  const auto n = nearest_exemplar(Eigen::Vector2d(1, 1), s, Metric::L2);
  CHECK(n.index == 0);
  CHECK(n.distance == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

  const ExemplarSet t = make_set({{3, 3}, {0, 5}});
  const auto l2 = nearest_exemplar(Eigen::Vector2d(0, 0), t, Metric::L2);
  CHECK(l2.x == Eigen::VectorXd(Eigen::Vector2d(3, 3)));
  CHECK(l2.distance == doctest::Approx(std::sqrt(18.0)));
  const auto l1 = nearest_exemplar(Eigen::Vector2d(0, 0), t, Metric::L1);
  CHECK(l1.x == Eigen::VectorXd(Eigen::Vector2d(0, 5)));
  CHECK(l1.distance == 5);

  const auto self = nearest_exemplar(Eigen::Vector2d(10, 10), s, Metric::L1);
  CHECK(self.index == 1);
  CHECK(self.distance == 0);

  const ExemplarSet tie = make_set({{1, 0}, {0, 1}, {-1, 0}});
  CHECK(nearest_exemplar(Eigen::Vector2d(0, 0), tie, Metric::L2).index == 0);
  CHECK_THROWS_AS(nearest_exemplar(Eigen::Vector2d(0, 0), ExemplarSet{}, Metric::L2), EmptyBaseline);
}

TEST_CASE("nearest exemplar beats every other exemplar") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 50; ++t) {
    ExemplarSet s;
    for (int k = 0; k < 7; ++k) s.exemplars.push_back({Eigen::Vector3d(u(rng), u(rng), u(rng)), 0, 1});
    const Eigen::Vector3d x(u(rng), u(rng), u(rng));
    for (Metric m : {Metric::L1, Metric::L2}) {
      const auto n = nearest_exemplar(x, s, m);
      for (const auto& e : s.exemplars) CHECK(n.distance <= dissimilarity(x, e.x, m));
    }
  }
}

TEST_CASE("exemplar json round trip") {
  const auto& s = fixture().exemplars;
  const ExemplarSet back = exemplars_from_json(nlohmann::json::parse(exemplars_to_json(s).dump()));
  REQUIRE(back.size() == s.size());
  CHECK(back.clusters == s.clusters);
  CHECK(back.cluster_eps == s.cluster_eps);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(back.exemplars[i].x == s.exemplars[i].x);
  CHECK_THROWS_AS(exemplars_from_json(nlohmann::json::parse("{}")), ParseError);
}

TEST_CASE("metric names") {
  CHECK(metric_from_string("L1") == Metric::L1);
  CHECK(metric_from_string("l2") == Metric::L2);
  CHECK(to_string(Metric::L1) == "L1");
  CHECK_THROWS_AS(metric_from_string("cosine"), InputError);
}

}  // TEST_SUITE
