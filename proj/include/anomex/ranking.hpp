#pragma once

#include <span>
#include <vector>

namespace anomex {

// 1-based ranks of `values`, ties receiving the mean of the ranks they span.
std::vector<double> midranks(std::span<const double> values);

// Sum over tie groups of (t^3 - t).
double tie_term(std::span<const double> values);

// Mann-Whitney statistic for `a` vs `b`: pairs with a > b count 1, ties 1/2.
double rank_u_statistic(std::span<const double> a, std::span<const double> b);

// Area under the ROC curve where `positive` should score higher than `negative`.
double roc_auc(std::span<const double> positive, std::span<const double> negative);

}  // namespace anomex
