#pragma once

#include <span>
#include <vector>

#include "kdstr/core.hpp"

namespace kdstr {

// D' with the keys of `d` and the values predicted by the reduction.
Dataset reconstruct(const Dataset& d, const Reduction& r);

// Model value at an arbitrary (time, location) inside some region's block.
// Time bounds and outlines are closed; on shared boundaries the lowest
// region id wins. Outlines carry no holes, so a point strictly inside two
// outlines goes to the smaller one.
std::vector<double> impute(const Reduction& r, double time, std::span<const double> location);

struct NrmseReport {
  double value = 0.0;
  std::vector<double> rmse;           // per feature
  std::vector<double> range;          // per feature
  std::vector<int> excluded_features; // zero range, left out of the average
};

NrmseReport nrmse_report(const Dataset& d, const Dataset& reconstructed);
double nrmse(const Dataset& d, const Dataset& reconstructed);
double mape(const Dataset& d, const Dataset& reconstructed);
double error_metric(ErrorMetric metric, const Dataset& d, const Dataset& reconstructed);

}  // namespace kdstr
