#include "dmmmen/rng.hpp"

#include <algorithm>
#include <cmath>

namespace dmmmen {

std::vector<double> responsibilities_from_logs(const std::vector<double>& logw) {
  if (logw.empty()) throw ValueError("responsibilities_from_logs: empty weight vector");
  const double m = *std::max_element(logw.begin(), logw.end());
  if (!std::isfinite(m))
    throw NumericalError("responsibilities_from_logs: all log-weights are -inf");
  std::vector<double> p(logw.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logw.size(); ++k) {
    p[k] = std::exp(logw[k] - m);
    total += p[k];
  }
  for (auto& v : p) v /= total;
  return p;
}

}  // namespace dmmmen
