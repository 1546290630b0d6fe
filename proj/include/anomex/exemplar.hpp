#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "anomex/detector.hpp"
#include "anomex/errors.hpp"
#include "json.hpp"

namespace anomex {

enum class Metric { L1, L2 };

std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view name);

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar dissimilarity(const Eigen::MatrixBase<DerivedA>& x,
                                        const Eigen::MatrixBase<DerivedB>& y, Metric m) {
  if (x.size() != y.size()) throw ShapeError("dissimilarity of vectors with different widths");
  return m == Metric::L1 ? (x - y).template lpNorm<1>() : (x - y).norm();
}

// Labels for DBSCAN over rows of `points` under L2; -1 marks noise. A point is
// core when its eps-neighbourhood (itself included) holds >= min_points rows.
// Cluster ids are assigned in order of their first core point.
std::vector<int> dbscan(const RowMatrixXd& points, double eps, Eigen::Index min_points);

struct BaselineParams {
  Eigen::Index per_cluster = 5;        // n
  double epsilon = 0.1;                // candidates need F(x) > 1 - epsilon
  std::optional<double> cluster_eps;   // default 0.05 * sqrt(D)
  std::optional<Eigen::Index> min_points;  // default max(5, ceil(0.01 * |candidates|))
  std::uint64_t seed = 0;
  bool noise_fallback = true;
};

struct Exemplar {
  Eigen::VectorXd x;  // normalized coordinates
  int cluster = 0;
  double score = 0;
};

struct ExemplarSet {
  std::vector<Exemplar> exemplars;
  Eigen::Index per_cluster = 0;
  double epsilon = 0;
  double cluster_eps = 0;
  Eigen::Index min_points = 0;
  std::uint64_t seed = 0;
  Eigen::Index candidates = 0;
  int clusters = 0;
  bool noise_fallback_used = false;
  std::string mode = "clustered";  // or "top_score" for the naive comparison

  std::size_t size() const { return exemplars.size(); }
  bool empty() const { return exemplars.empty(); }
};

// Multimodal baseline: keep rows scoring above 1 - epsilon, cluster them with
// DBSCAN under L2, then draw up to n rows uniformly from every cluster.
ExemplarSet select_baseline(const RowMatrixXd& normalized, const Detector& det,
                            const BaselineParams& params);

// Naive comparison mode: the `count` highest-scoring rows above 1 - epsilon.
ExemplarSet select_top_scoring(const RowMatrixXd& normalized, const Detector& det,
                               Eigen::Index count, double epsilon);

struct NearestExemplar {
  std::size_t index = 0;
  Eigen::VectorXd x;
  double distance = 0;
};

// Linear scan; ties go to the lowest index.
NearestExemplar nearest_exemplar(const Eigen::Ref<const Eigen::VectorXd>& x, const ExemplarSet& set,
                                 Metric metric);

nlohmann::json exemplars_to_json(const ExemplarSet& set);
ExemplarSet exemplars_from_json(const nlohmann::json& doc);

}  // namespace anomex
