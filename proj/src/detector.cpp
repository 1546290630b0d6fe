#include "anomex/detector.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "anomex/ranking.hpp"
#include "anomex/seeding.hpp"

namespace anomex {

void validate(const NegativeSamplingConfig& cfg) {
  if (!(cfg.ratio > 0) || !std::isfinite(cfg.ratio)) {
    throw InputError("negative ratio must be finite and positive");
  }
  if (!(cfg.envelope >= 0) || !(cfg.envelope < 1)) {
    throw InputError("envelope expansion must lie in [0, 1)");
  }
}

Detector::Detector(Network model, Normalizer normalizer, DetectorMeta meta)
    : model_(std::move(model)), normalizer_(std::move(normalizer)), meta_(std::move(meta)) {
  if (normalizer_.dims() != model_.dims()) {
    throw ShapeError("normalizer width does not match model width");
  }
}

RowMatrixXd sample_negatives(const RowMatrixXd& normalized, const NegativeSamplingConfig& cfg) {
  validate(cfg);
  if (normalized.rows() == 0) throw InputError("cannot sample negatives for an empty dataset");
  const auto count = static_cast<Eigen::Index>(
      std::ceil(cfg.ratio * static_cast<double>(normalized.rows()) - 1e-9));
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> dist(-cfg.envelope, 1.0 + cfg.envelope);
  RowMatrixXd out(count, normalized.cols());
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < normalized.cols(); ++j) out(i, j) = dist(rng);
  }
  return out;
}

namespace {

RowMatrixXd take_rows(const RowMatrixXd& m, const std::vector<Eigen::Index>& idx,
                      std::size_t begin, std::size_t end) {
  RowMatrixXd out(static_cast<Eigen::Index>(end - begin), m.cols());
  for (std::size_t i = begin; i < end; ++i) out.row(static_cast<Eigen::Index>(i - begin)) = m.row(idx[i]);
  return out;
}

}  // namespace

Detector fit_detector(const Dataset& data, const NegativeSamplingConfig& sampling,
                      const TrainConfig& training) {
  validate(sampling);
  validate(training);
  if (data.rows() == 0) throw InputError("cannot fit a detector on an empty dataset");

  Normalizer norm = fit_normalizer(data);
  const RowMatrixXd x = norm.apply_rows(data.values());

  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 split_rng(derive_seed(sampling.seed, "holdout-split"));
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_hold = static_cast<std::size_t>(x.rows() / 5);
  const RowMatrixXd holdout = take_rows(x, order, 0, n_hold);
  const RowMatrixXd fit_rows = take_rows(x, order, n_hold, order.size());

  const RowMatrixXd negatives = sample_negatives(fit_rows, sampling);
  RowMatrixXd inputs(fit_rows.rows() + negatives.rows(), x.cols());
  inputs << fit_rows, negatives;
  Eigen::VectorXd targets(inputs.rows());
  targets.head(fit_rows.rows()).setOnes();
  targets.tail(negatives.rows()).setZero();

  const Network model = train(initial_network(x.cols(), training), inputs, targets, training);

  DetectorMeta meta;
  meta.positives = fit_rows.rows();
  meta.negatives = negatives.rows();
  meta.ratio = sampling.ratio;
  meta.envelope = sampling.envelope;
  meta.sampling_seed = sampling.seed;
  meta.training_seed = training.seed;
  meta.constant_dims = norm.constant_dims();

  Detector det(model, norm, meta);
  if (holdout.rows() > 0) {
    NegativeSamplingConfig fresh = sampling;
    fresh.seed = derive_seed(sampling.seed, "holdout-negatives");
    const RowMatrixXd holdout_negatives = sample_negatives(holdout, fresh);
    const Eigen::VectorXd pos = score_rows(det, holdout);
    const Eigen::VectorXd neg = score_rows(det, holdout_negatives);
    meta.auc = roc_auc(std::span<const double>(pos.data(), static_cast<std::size_t>(pos.size())),
                       std::span<const double>(neg.data(), static_cast<std::size_t>(neg.size())));
    meta.holdout_positives = holdout.rows();
    meta.holdout_negatives = holdout_negatives.rows();
  } else {
    meta.degenerate_auc = true;
  }
  return Detector(model, std::move(norm), std::move(meta));
}

double score(const Detector& det, const Eigen::Ref<const Eigen::VectorXd>& raw) {
  return forward(det.model(), det.normalizer().apply(raw));
}

double score_normalized(const Detector& det, const Eigen::Ref<const Eigen::VectorXd>& normalized) {
  return forward(det.model(), normalized);
}

Eigen::VectorXd score_rows(const Detector& det, const RowMatrixXd& normalized) {
  Eigen::VectorXd out(normalized.rows());
  for (Eigen::Index i = 0; i < normalized.rows(); ++i) {
    out(i) = forward(det.model(), normalized.row(i).transpose());
  }
  return out;
}

nlohmann::json detector_to_json(const Detector& det) {
  const auto& m = det.meta();
  nlohmann::json meta = {
      {"auc", m.auc ? nlohmann::json(*m.auc) : nlohmann::json(nullptr)},
      {"degenerate_auc", m.degenerate_auc},
      {"r", m.ratio},
      {"envelope", m.envelope},
      {"seeds", {{"sampling", m.sampling_seed}, {"training", m.training_seed}}},
      {"positives", m.positives},
      {"negatives", m.negatives},
      {"holdout_positives", m.holdout_positives},
      {"holdout_negatives", m.holdout_negatives},
      {"constant_dims", m.constant_dims},
  };
  return {{"model", network_to_json(det.model())},
          {"normalizer", normalizer_to_json(det.normalizer())},
          {"meta", std::move(meta)}};
}

Detector detector_from_json(const nlohmann::json& doc) {
  try {
    const auto& j = doc.at("meta");
    DetectorMeta meta;
    if (!j.at("auc").is_null()) meta.auc = j.at("auc").get<double>();
    meta.degenerate_auc = j.value("degenerate_auc", false);
    meta.ratio = j.at("r").get<double>();
    meta.envelope = j.value("envelope", 0.0);
    meta.sampling_seed = j.at("seeds").at("sampling").get<std::uint64_t>();
    meta.training_seed = j.at("seeds").at("training").get<std::uint64_t>();
    meta.positives = j.value("positives", Eigen::Index{0});
    meta.negatives = j.value("negatives", Eigen::Index{0});
    meta.holdout_positives = j.value("holdout_positives", Eigen::Index{0});
    meta.holdout_negatives = j.value("holdout_negatives", Eigen::Index{0});
    meta.constant_dims = j.value("constant_dims", std::vector<Eigen::Index>{});
    return Detector(network_from_json(doc.at("model")), normalizer_from_json(doc.at("normalizer")),
                    std::move(meta));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed detector document: ") + e.what());
  }
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
}

void save_detector(const Detector& det, const std::filesystem::path& path) {
  write_json_file(detector_to_json(det), path);
}

Detector load_detector(const std::filesystem::path& path) {
  return detector_from_json(read_json_file(path));
}

}  // namespace anomex
