#include <string>

#include "anomex/network.hpp"

namespace anomex {

std::string_view to_string(Activation act) {
  return act == Activation::Logistic ? "logistic" : "tanh";
}

Activation activation_from_string(std::string_view name) {
  if (name == "logistic") return Activation::Logistic;
  if (name == "tanh") return Activation::Tanh;
  throw InputError("unknown activation '" + std::string(name) + "'");
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0) || !std::isfinite(cfg.learning_rate)) {
    throw InputError("learning rate must be finite and positive");
  }
  if (cfg.epochs < 0) throw InputError("epochs must be non-negative");
  if (cfg.batch_size < 1) throw InputError("batch size must be positive");
  for (int units : cfg.hidden) {
    if (units < 1) throw InputError("hidden layer widths must be positive");
  }
}

nlohmann::json network_to_json(const Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) row.push_back(layer.weights(r, c));
      w.push_back(std::move(row));
    }
    nlohmann::json b = nlohmann::json::array();
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) b.push_back(layer.bias(i));
    layers.push_back({{"w", std::move(w)}, {"b", std::move(b)}, {"act", to_string(layer.activation)}});
  }
  return {{"dims", net.dims()}, {"layers", std::move(layers)}, {"seed", net.seed()}};
}

Network network_from_json(const nlohmann::json& doc) {
  try {
    const auto dims = doc.at("dims").get<Eigen::Index>();
    std::vector<BasicLayer<double>> layers;
    for (const auto& entry : doc.at("layers")) {
      const auto& w = entry.at("w");
      const auto& b = entry.at("b");
      const auto rows = static_cast<Eigen::Index>(w.size());
      const auto cols = rows > 0 ? static_cast<Eigen::Index>(w.at(0).size()) : 0;
      BasicLayer<double> layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(b.size()),
                               activation_from_string(entry.at("act").get<std::string>())};
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = w.at(static_cast<std::size_t>(r));
        if (static_cast<Eigen::Index>(row.size()) != cols) throw ParseError("ragged weight matrix");
        for (Eigen::Index c = 0; c < cols; ++c) {
          layer.weights(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
        }
      }
      for (std::size_t i = 0; i < b.size(); ++i) {
        layer.bias(static_cast<Eigen::Index>(i)) = b.at(i).get<double>();
      }
      layers.push_back(std::move(layer));
    }
    return Network(dims, std::move(layers), doc.value("seed", std::uint64_t{0}));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model document: ") + e.what());
  }
}

}  // namespace anomex
