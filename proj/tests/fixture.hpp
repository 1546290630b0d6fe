#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "anomex/attribution.hpp"
#include "anomex/detector.hpp"
#include "anomex/evaluation.hpp"
#include "anomex/exemplar.hpp"

namespace anomex::testing {

// Default benchmark, detector and exemplars, seeded exactly as the CLI does
// with --seed 0. Built once per process.
struct Fixture {
  Benchmark bench;
  Detector det;
  RowMatrixXd train_normalized;
  ExemplarSet exemplars;
};

const Fixture& fixture();

// Same pipeline on an arbitrary benchmark config.
Fixture build_fixture(const BenchmarkConfig& cfg, std::uint64_t seed);

// One logistic unit F(x) = sigma(w.x + b) with an identity normalizer.
Detector logistic_detector(const Eigen::VectorXd& w, double b);

// Central-difference gradient.
template <typename F>
Eigen::VectorXd numeric_gradient(const F& f, const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    Eigen::VectorXd up = x;
    Eigen::VectorXd down = x;
    up(d) += h;
    down(d) -= h;
    g(d) = (f(up) - f(down)) / (2 * h);
  }
  return g;
}

std::string read_file(const std::string& path);

}  // namespace anomex::testing
