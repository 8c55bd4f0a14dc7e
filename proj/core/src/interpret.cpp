#include "smpf/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "smpf/errors.hpp"

namespace smpf {

std::vector<double> gradient_at(const MetamodelTree& t, std::span<const double> x0) {
  GradientTape tape;
  backward(t, x0, tape);
  return tape.input_grads;
}

ImportanceReport rank_features(const MetamodelTree& t, std::span<const double> x0) {
  ImportanceReport report;
  report.point.assign(x0.begin(), x0.end());
  report.gradient = gradient_at(t, x0);
  report.ranking.resize(report.gradient.size());
  std::iota(report.ranking.begin(), report.ranking.end(), 0);
  std::sort(report.ranking.begin(), report.ranking.end(), [&](int a, int b) {
    const double ma = std::abs(report.gradient[a]);
    const double mb = std::abs(report.gradient[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  });
  return report;
}

std::vector<double> hessian_at(const MetamodelTree& t, std::span<const double> x0) {
  const int d = t.d;
  if (static_cast<int>(x0.size()) != d) {
    throw DataError("hessian_at: expected " + std::to_string(d) + " features");
  }
  std::vector<double> h(static_cast<std::size_t>(d) * d, 0.0);
  std::vector<double> point(x0.begin(), x0.end());
  for (int j = 0; j < d; ++j) {
    const double step = 1e-4 * (1.0 + std::abs(x0[j]));
    point[j] = x0[j] + step;
    const std::vector<double> plus = gradient_at(t, point);
    point[j] = x0[j] - step;
    const std::vector<double> minus = gradient_at(t, point);
    point[j] = x0[j];
    for (int i = 0; i < d; ++i) {
      // Column j: d(grad_i)/dx_j.
      h[static_cast<std::size_t>(i) * d + j] = (plus[i] - minus[i]) / (2.0 * step);
    }
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const double sym = 0.5 * (h[static_cast<std::size_t>(i) * d + j] +
                                h[static_cast<std::size_t>(j) * d + i]);
      h[static_cast<std::size_t>(i) * d + j] = sym;
      h[static_cast<std::size_t>(j) * d + i] = sym;
    }
  }
  return h;
}

}  // namespace smpf
