#include "anomex/exemplar.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <random>
#include <string>

#include "anomex/seeding.hpp"

namespace anomex {

std::string_view to_string(Metric m) { return m == Metric::L1 ? "L1" : "L2"; }

Metric metric_from_string(std::string_view name) {
  if (name == "L1" || name == "l1") return Metric::L1;
  if (name == "L2" || name == "l2") return Metric::L2;
  throw InputError("unknown metric '" + std::string(name) + "' (expected L1 or L2)");
}

namespace {

std::vector<Eigen::Index> region_query(const RowMatrixXd& points, Eigen::Index i, double eps_sq) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index j = 0; j < points.rows(); ++j) {
    if ((points.row(j) - points.row(i)).squaredNorm() <= eps_sq) out.push_back(j);
  }
  return out;
}

}  // namespace

std::vector<int> dbscan(const RowMatrixXd& points, double eps, Eigen::Index min_points) {
  if (!(eps > 0)) throw InputError("DBSCAN eps must be positive");
  if (min_points < 1) throw InputError("DBSCAN minPts must be positive");
  constexpr int kUnvisited = -2;
  constexpr int kNoise = -1;
  const double eps_sq = eps * eps;
  std::vector<int> labels(static_cast<std::size_t>(points.rows()), kUnvisited);
  int cluster = 0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if (labels[static_cast<std::size_t>(i)] != kUnvisited) continue;
    auto seeds = region_query(points, i, eps_sq);
    if (static_cast<Eigen::Index>(seeds.size()) < min_points) {
      labels[static_cast<std::size_t>(i)] = kNoise;
      continue;
    }
    labels[static_cast<std::size_t>(i)] = cluster;
    std::deque<Eigen::Index> frontier(seeds.begin(), seeds.end());
    while (!frontier.empty()) {
      const Eigen::Index j = frontier.front();
      frontier.pop_front();
      int& label = labels[static_cast<std::size_t>(j)];
      if (label == kNoise) label = cluster;  // border point
      if (label != kUnvisited) continue;
      label = cluster;
      auto neighbours = region_query(points, j, eps_sq);
      if (static_cast<Eigen::Index>(neighbours.size()) >= min_points) {
        frontier.insert(frontier.end(), neighbours.begin(), neighbours.end());
      }
    }
    ++cluster;
  }
  return labels;
}

namespace {

void check_params(const BaselineParams& p) {
  if (p.per_cluster < 1) throw InputError("exemplars per cluster must be positive");
  if (!(p.epsilon > 0 && p.epsilon < 1)) throw InputError("epsilon must lie in (0, 1)");
  if (p.cluster_eps && !(*p.cluster_eps > 0)) throw InputError("DBSCAN eps must be positive");
  if (p.min_points && *p.min_points < 1) throw InputError("DBSCAN minPts must be positive");
}

}  // namespace

ExemplarSet select_baseline(const RowMatrixXd& normalized, const Detector& det,
                            const BaselineParams& params) {
  check_params(params);
  if (normalized.rows() == 0) throw InputError("cannot select a baseline from an empty dataset");
  if (normalized.cols() != det.dims()) throw ShapeError("data width does not match detector");

  const Eigen::VectorXd scores = score_rows(det, normalized);
  std::vector<Eigen::Index> candidates;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (scores(i) > 1.0 - params.epsilon) candidates.push_back(i);
  }
  if (candidates.empty()) {
    throw EmptyBaseline("no training point scores above " + std::to_string(1.0 - params.epsilon));
  }

  RowMatrixXd cand(static_cast<Eigen::Index>(candidates.size()), normalized.cols());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand.row(static_cast<Eigen::Index>(i)) = normalized.row(candidates[i]);
  }

  ExemplarSet set;
  set.per_cluster = params.per_cluster;
  set.epsilon = params.epsilon;
  set.cluster_eps = params.cluster_eps.value_or(0.05 * std::sqrt(static_cast<double>(normalized.cols())));
  set.min_points = params.min_points.value_or(std::max<Eigen::Index>(
      5, static_cast<Eigen::Index>(std::ceil(0.01 * static_cast<double>(candidates.size())))));
  set.seed = params.seed;
  set.candidates = static_cast<Eigen::Index>(candidates.size());

  std::vector<int> labels = dbscan(cand, set.cluster_eps, set.min_points);
  int clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  if (clusters == 0) {
    if (!params.noise_fallback) {
      throw NoClusterFound("DBSCAN labelled all " + std::to_string(candidates.size()) +
                           " candidates as noise");
    }
    std::fill(labels.begin(), labels.end(), 0);
    clusters = 1;
    set.noise_fallback_used = true;
  }
  set.clusters = clusters;

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(clusters));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::mt19937_64 rng(derive_seed(params.seed, "exemplar-sample"));
  for (int c = 0; c < clusters; ++c) {
    auto& pool = members[static_cast<std::size_t>(c)];
    const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(params.per_cluster));
    // partial Fisher-Yates: the first `take` entries become a uniform sample
    for (std::size_t k = 0; k < take; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    for (std::size_t k = 0; k < take; ++k) {
      const std::size_t i = pool[k];
      set.exemplars.push_back({cand.row(static_cast<Eigen::Index>(i)).transpose(), c,
                               scores(candidates[i])});
    }
  }
  return set;
}

ExemplarSet select_top_scoring(const RowMatrixXd& normalized, const Detector& det,
                               Eigen::Index count, double epsilon) {
  if (count < 1) throw InputError("sample size must be positive");
  if (!(epsilon > 0 && epsilon < 1)) throw InputError("epsilon must lie in (0, 1)");
  const Eigen::VectorXd scores = score_rows(det, normalized);
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (scores(i) > 1.0 - epsilon) order.push_back(i);
  }
  if (order.empty()) throw EmptyBaseline("no training point scores above " + std::to_string(1.0 - epsilon));
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return scores(a) > scores(b); });
  ExemplarSet set;
  set.mode = "top_score";
  set.per_cluster = count;
  set.epsilon = epsilon;
  set.candidates = static_cast<Eigen::Index>(order.size());
  set.clusters = 1;
  const std::size_t take = std::min(order.size(), static_cast<std::size_t>(count));
  for (std::size_t k = 0; k < take; ++k) {
    set.exemplars.push_back({normalized.row(order[k]).transpose(), 0, scores(order[k])});
  }
  return set;
}

NearestExemplar nearest_exemplar(const Eigen::Ref<const Eigen::VectorXd>& x, const ExemplarSet& set,
                                 Metric metric) {
  if (set.empty()) throw EmptyBaseline("exemplar set is empty");
  NearestExemplar best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < set.exemplars.size(); ++i) {
    const double d = dissimilarity(x, set.exemplars[i].x, metric);
    if (d < best.distance) {
      best.index = i;
      best.distance = d;
    }
  }
  best.x = set.exemplars[best.index].x;
  return best;
}

nlohmann::json exemplars_to_json(const ExemplarSet& set) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : set.exemplars) {
    list.push_back({{"x", vector_to_json(e.x)}, {"cluster", e.cluster}, {"score", e.score}});
  }
  return {{"params",
           {{"mode", set.mode},
            {"n", set.per_cluster},
            {"epsilon", set.epsilon},
            {"eps", set.cluster_eps},
            {"minpts", set.min_points},
            {"seed", set.seed},
            {"candidates", set.candidates},
            {"clusters", set.clusters},
            {"noise_fallback", set.noise_fallback_used}}},
          {"exemplars", std::move(list)}};
}

ExemplarSet exemplars_from_json(const nlohmann::json& doc) {
  try {
    const auto& p = doc.at("params");
    ExemplarSet set;
    set.mode = p.value("mode", std::string("clustered"));
    set.per_cluster = p.at("n").get<Eigen::Index>();
    set.epsilon = p.at("epsilon").get<double>();
    set.cluster_eps = p.value("eps", 0.0);
    set.min_points = p.value("minpts", Eigen::Index{0});
    set.seed = p.value("seed", std::uint64_t{0});
    set.candidates = p.value("candidates", Eigen::Index{0});
    set.clusters = p.value("clusters", 0);
    set.noise_fallback_used = p.value("noise_fallback", false);
    for (const auto& e : doc.at("exemplars")) {
      set.exemplars.push_back(
          {vector_from_json(e.at("x")), e.at("cluster").get<int>(), e.at("score").get<double>()});
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed exemplar document: ") + e.what());
  }
}

}  // namespace anomex
