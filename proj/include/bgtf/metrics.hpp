#pragma once
// The five evaluation metrics. Reports carry MSE, RMSE, MAE, MAPE (percent),
// and R^2, always computed in original target units.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bgtf/tensor.hpp"

namespace bgtf {

inline constexpr double kMapeEps = 1e-8;

struct MetricsReport {
  std::string model;
  double mse = 0.0;
  double rmse = 0.0;  // always sqrt(mse), never stored independently
  double mae = 0.0;
  double mape_percent = 0.0;
  std::optional<double> r2;  // absent when Var(y_true) == 0
  std::size_t n = 0;
  std::size_t n_mape_excluded = 0;  // samples with |y| <= kMapeEps
};

inline MetricsReport compute_metrics(const std::vector<double>& y_true,
                                     const std::vector<double>& y_pred,
                                     const std::string& model_name) {
  if (y_true.empty() || y_true.size() != y_pred.size())
    throw DataError("compute_metrics: need equal, nonzero-length vectors (got " +
                    std::to_string(y_true.size()) + " and " + std::to_string(y_pred.size()) + ")");
  const std::size_t n = y_true.size();
  MetricsReport rep;
  rep.model = model_name;
  rep.n = n;

  double sse = 0.0, sae = 0.0, mape_sum = 0.0;
  std::size_t mape_used = 0;
  double y_mean = 0.0;
  for (double y : y_true) y_mean += y;
  y_mean /= static_cast<double>(n);
  double sst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double err = y_true[i] - y_pred[i];
    sse += err * err;
    sae += std::abs(err);
    sst += (y_true[i] - y_mean) * (y_true[i] - y_mean);
    if (std::abs(y_true[i]) > kMapeEps) {
      mape_sum += std::abs(err) / std::abs(y_true[i]);
      ++mape_used;
    }
  }
  rep.mse = sse / static_cast<double>(n);
  rep.rmse = std::sqrt(rep.mse);
  rep.mae = sae / static_cast<double>(n);
  rep.n_mape_excluded = n - mape_used;
  rep.mape_percent = mape_used > 0 ? 100.0 * mape_sum / static_cast<double>(mape_used) : 0.0;
  if (sst > 0.0) rep.r2 = 1.0 - sse / sst;
  return rep;
}

}  // namespace bgtf
