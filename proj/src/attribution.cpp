#include "anomex/attribution.hpp"

namespace anomex {

std::string_view to_string(PathKind kind) {
  return kind == PathKind::Straight ? "straight" : "axis";
}

PathKind path_kind_from_string(std::string_view name) {
  if (name == "straight" || name == "L2" || name == "l2") return PathKind::Straight;
  if (name == "axis" || name == "L1" || name == "l1") return PathKind::AxisAligned;
  throw InputError("unknown path kind '" + std::string(name) + "' (expected straight or axis)");
}

Eigen::VectorXd blame(const Eigen::Ref<const Eigen::VectorXd>& raw) {
  if (!raw.allFinite()) throw InputError("attribution contains non-finite values");
  const double total = raw.cwiseAbs().sum();
  if (total == 0) return Eigen::VectorXd::Zero(raw.size());
  Eigen::VectorXd b = raw.cwiseMax(0.0) / total;
  // Rounding can push the sum a few ulps past 1; pull it back under a bound
  // that holds for any summation order.
  const double cap = 1.0 - 2.0 * static_cast<double>(raw.size()) * std::numeric_limits<double>::epsilon();
  double sum = 0;
  for (Eigen::Index d = 0; d < b.size(); ++d) sum += b(d);
  if (sum > cap) b *= cap / sum;
  return b;
}

Explanation explain_normalized(const Detector& det, const ExemplarSet& exemplars,
                               const Eigen::Ref<const Eigen::VectorXd>& normalized,
                               const ExplainOptions& opts) {
  if (opts.path.steps < 1) throw InputError("integration needs at least one step");
  if (normalized.size() != det.dims()) throw ShapeError("observation width does not match detector");
  const NearestExemplar nearest = nearest_exemplar(normalized, exemplars, opts.metric);

  Explanation e;
  e.x = normalized;
  e.baseline = nearest.x;
  e.baseline_index = nearest.index;
  e.baseline_distance = nearest.distance;
  e.metric = opts.metric;
  e.score = det.value(e.x);
  e.baseline_score = det.value(e.baseline);
  e.path = opts.path;

  e.raw = integrated_gradients(det, e.x, e.baseline, e.path);
  e.gap = completeness_gap(det, e.x, e.baseline, e.raw);
  while (e.gap > opts.gap_tolerance && e.path.steps < opts.max_steps) {
    e.path.steps = std::min(e.path.steps * 2, opts.max_steps);
    e.raw = integrated_gradients(det, e.x, e.baseline, e.path);
    e.gap = completeness_gap(det, e.x, e.baseline, e.raw);
  }
  e.blame = blame(e.raw);
  if (e.score > opts.anomaly_threshold) e.flags.emplace_back("non_anomalous");
  if (e.gap > opts.gap_tolerance) e.flags.emplace_back("gap_above_tolerance");
  if (e.baseline_score <= e.score) e.flags.emplace_back("baseline_not_contrastive");
  return e;
}

Explanation explain(const Detector& det, const ExemplarSet& exemplars,
                    const Eigen::Ref<const Eigen::VectorXd>& raw, const ExplainOptions& opts) {
  return explain_normalized(det, exemplars, det.normalizer().apply(raw), opts);
}

nlohmann::json explanation_to_json(const Explanation& e) {
  nlohmann::json doc = {
      {"x", vector_to_json(e.x)},
      {"baseline", vector_to_json(e.baseline)},
      {"score", e.score},
      {"baseline_score", e.baseline_score},
      {"raw", vector_to_json(e.raw)},
      {"blame", vector_to_json(e.blame)},
      {"gap", e.gap},
      {"metric", to_string(e.metric)},
      {"path", {{"kind", to_string(e.path.kind)}, {"m", e.path.steps}}},
      {"baseline_index", e.baseline_index},
      {"baseline_distance", e.baseline_distance},
      {"flags", e.flags},
  };
  if (e.ts) doc["ts"] = e.ts->text;
  return doc;
}

OrderingAgreement ordering_agreement(const Eigen::Ref<const Eigen::VectorXd>& a,
                                     const Eigen::Ref<const Eigen::VectorXd>& reference, double tie,
                                     bool skip_own_ties) {
  if (a.size() != reference.size()) throw ShapeError("ordering comparison of different widths");
  OrderingAgreement out;
  for (Eigen::Index u = 0; u < a.size(); ++u) {
    for (Eigen::Index v = u + 1; v < a.size(); ++v) {
      const double ref = reference(u) - reference(v);
      const double own = a(u) - a(v);
      if (std::abs(ref) < tie) continue;
      if (skip_own_ties && std::abs(own) < tie) continue;
      ++out.compared;
      if ((ref > 0) == (own > 0) && own != 0) ++out.agreeing;
    }
  }
  return out;
}

nlohmann::json desiderata_to_json(const DesiderataReport& report) {
  nlohmann::json sensitivity = nlohmann::json::array();
  for (const auto& s : report.sensitivity) {
    sensitivity.push_back(s ? nlohmann::json(*s) : nlohmann::json(nullptr));
  }
  return {{"contrastive", report.contrastive},
          {"score", report.score},
          {"baseline_score", report.baseline_score},
          {"completeness_gap", report.completeness_gap},
          {"sensitivity", std::move(sensitivity)},
          {"proportionality",
           {{"compared", report.proportionality.compared},
            {"agreeing", report.proportionality.agreeing},
            {"ratio", report.proportionality.ratio()}}}};
}

}  // namespace anomex
