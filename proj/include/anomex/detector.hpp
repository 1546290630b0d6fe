#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>

#include "anomex/dataio.hpp"
#include "anomex/network.hpp"
#include "json.hpp"

namespace anomex {

// Negatives are drawn uniformly from [-envelope, 1 + envelope]^D, `ratio` per
// observed row.
struct NegativeSamplingConfig {
  double ratio = 3.0;
  double envelope = 0.05;
  std::uint64_t seed = 0;
};

void validate(const NegativeSamplingConfig& cfg);

struct DetectorMeta {
  Eigen::Index positives = 0;  // observed rows used for training
  Eigen::Index negatives = 0;
  Eigen::Index holdout_positives = 0;
  Eigen::Index holdout_negatives = 0;
  double ratio = 0;
  double envelope = 0;
  std::uint64_t sampling_seed = 0;
  std::uint64_t training_seed = 0;
  std::optional<double> auc;  // empty when the holdout is too small to score
  bool degenerate_auc = false;
  std::vector<Eigen::Index> constant_dims;
};

// Anomaly scorer F = network o normalizer. Scores near 1 are normal, near 0
// anomalous. The network operates in normalized [0,1]^D coordinates, so a
// Detector is also a differentiable score function over that space.
class Detector {
 public:
  using Scalar = double;
  using Vector = Eigen::VectorXd;

  Detector(Network model, Normalizer normalizer, DetectorMeta meta = {});

  Eigen::Index dims() const { return model_.dims(); }
  const Network& model() const { return model_; }
  const Normalizer& normalizer() const { return normalizer_; }
  const DetectorMeta& meta() const { return meta_; }

  double value(const Eigen::VectorXd& normalized) const { return forward(model_, normalized); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& normalized) const {
    return input_gradient(model_, normalized);
  }

 private:
  Network model_;
  Normalizer normalizer_;
  DetectorMeta meta_;
};

RowMatrixXd sample_negatives(const RowMatrixXd& normalized, const NegativeSamplingConfig& cfg);

// Holds out 20% of rows (seeded) to report AUC against fresh negatives.
Detector fit_detector(const Dataset& data, const NegativeSamplingConfig& sampling,
                      const TrainConfig& training);

double score(const Detector& det, const Eigen::Ref<const Eigen::VectorXd>& raw);
double score_normalized(const Detector& det, const Eigen::Ref<const Eigen::VectorXd>& normalized);
Eigen::VectorXd score_rows(const Detector& det, const RowMatrixXd& normalized);

nlohmann::json detector_to_json(const Detector& det);
Detector detector_from_json(const nlohmann::json& doc);

void save_detector(const Detector& det, const std::filesystem::path& path);
Detector load_detector(const std::filesystem::path& path);

// Shared helpers for JSON artifacts on disk.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);

}  // namespace anomex
