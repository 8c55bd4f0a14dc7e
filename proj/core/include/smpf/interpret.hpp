#pragma once

#include <optional>
#include <span>
#include <vector>

#include "smpf/tree.hpp"

namespace smpf {

// Instance-wise interpretation of a fitted metamodel at one point: the
// first-order coefficients of its local expansion, a feature ranking by
// coefficient magnitude, and optionally the second-order matrix.
struct ImportanceReport {
  std::vector<double> point;
  std::vector<double> gradient;          // dg/dx_j at the point
  std::vector<int> ranking;              // features sorted by |gradient| desc
  std::optional<std::vector<double>> hessian;  // d*d row-major, symmetric
};

// Per-feature partials dg/dx_j; exactly zero for features with no incoming
// edge. Throws DataError on a dimension mismatch.
std::vector<double> gradient_at(const MetamodelTree& t, std::span<const double> x0);

// Ranking by descending |gradient| with ties broken by feature index.
ImportanceReport rank_features(const MetamodelTree& t, std::span<const double> x0);

// Second partials by central differences of the analytic gradient with
// step 1e-4 * (1 + |x0_j|) per axis, symmetrized as (H + H^T)/2.
std::vector<double> hessian_at(const MetamodelTree& t, std::span<const double> x0);

}  // namespace smpf
