#include "cdslam/robust.hpp"

#include <algorithm>
#include <cmath>

#include "cdslam/error.hpp"

namespace cdslam {

HuberValue HuberRho(double r2, double delta) {
  if (r2 <= delta * delta) return {r2, 1.0};
  const double r = std::sqrt(r2);
  return {2.0 * delta * r - delta * delta, delta / r};
}

double Median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::kInsufficientPoints, "median of empty list");
  const std::size_t n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

double MadSigma(std::span<const double> residuals, double mad_scale, double sigma_floor) {
  const double med = Median(std::vector<double>(residuals.begin(), residuals.end()));
  std::vector<double> deviations;
  deviations.reserve(residuals.size());
  for (double r : residuals) deviations.push_back(std::abs(r - med));
  return std::max(mad_scale * Median(std::move(deviations)), sigma_floor);
}

}  // namespace cdslam
