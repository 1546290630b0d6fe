#include "fixture.hpp"

#include <fstream>
#include <sstream>

#include "anomex/seeding.hpp"

namespace anomex::testing {

Fixture build_fixture(const BenchmarkConfig& input, std::uint64_t seed) {
  BenchmarkConfig cfg = input;
  cfg.seed = derive_seed(seed, "benchmark");
  Benchmark bench = generate_fault_benchmark(cfg);

  NegativeSamplingConfig ns;
  ns.seed = derive_seed(seed, "negative-sampling");
  TrainConfig tc;
  tc.seed = derive_seed(seed, "training");
  Detector det = fit_detector(bench.train, ns, tc);

  RowMatrixXd normalized = det.normalizer().apply_rows(bench.train.values());
  BaselineParams params;
  params.seed = derive_seed(seed, "baseline");
  ExemplarSet exemplars = select_baseline(normalized, det, params);
  return {std::move(bench), std::move(det), std::move(normalized), std::move(exemplars)};
}

const Fixture& fixture() {
  static const Fixture f = build_fixture(BenchmarkConfig{}, 0);
  return f;
}

Detector logistic_detector(const Eigen::VectorXd& w, double b) {
  const Eigen::Index dims = w.size();
  BasicLayer<double> unit{w.transpose(), Eigen::VectorXd::Constant(1, b), Activation::Logistic};
  std::vector<std::string> names;
  for (Eigen::Index d = 0; d < dims; ++d) names.push_back("v" + std::to_string(d));
  return Detector(Network(dims, {unit}),
                  Normalizer(Eigen::VectorXd::Zero(dims), Eigen::VectorXd::Ones(dims), names));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace anomex::testing
