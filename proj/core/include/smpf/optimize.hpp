#pragma once

#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "smpf/expr.hpp"
#include "smpf/rng.hpp"
#include "smpf/tree.hpp"

namespace smpf {

// The ground-truth source being approximated: either a closed-form target
// queryable anywhere in its domain box, or a fixed labeled dataset.
class Oracle {
 public:
  enum class Kind { kSynthetic, kDataset };

  static Oracle synthetic(Expression expr,
                          std::vector<std::pair<double, double>> domain);
  static Oracle dataset(std::vector<double> x_rows, std::vector<double> y, int d);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  std::size_t rows() const { return y_.size(); }  // dataset only
  const std::vector<std::pair<double, double>>& domain() const { return domain_; }
  const std::vector<double>& data_x() const { return x_; }
  const std::vector<double>& data_y() const { return y_; }

  // Synthetic targets only: the black-box value at an arbitrary point.
  double query(std::span<const double> x) const;

 private:
  Oracle() = default;
  Kind kind_ = Kind::kSynthetic;
  int dim_ = 0;
  Expression expr_;
  std::vector<std::pair<double, double>> domain_;
  std::vector<double> x_;  // dataset rows, row-major
  std::vector<double> y_;
};

// A sampled evaluation batch: row-major m x d inputs with targets.
struct Batch {
  int d = 0;
  std::vector<double> x;
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * static_cast<std::size_t>(d), static_cast<std::size_t>(d)};
  }
};

// Synthetic: m i.i.d. uniform points in the domain box with oracle values.
// Dataset: m rows sampled without replacement, or all rows when m exceeds
// the dataset size.
Batch sample_batch(const Oracle& oracle, std::size_t m, RngStream& rng);

// Mean squared error over the batch; returns +infinity if any residual is
// non-finite. Throws DataError on a feature-count mismatch.
double mse(const MetamodelTree& t, const Batch& batch);

inline constexpr double kInfFitness = std::numeric_limits<double>::infinity();

// Regularized fitness: mse + lambda * edge_count. Lower is better.
struct FitnessRecord {
  double mse = kInfFitness;
  int edges = 0;
  double fitness = kInfFitness;
};

FitnessRecord fitness(const MetamodelTree& t, const Batch& batch, double lambda);

// k full-batch gradient-descent steps on the batch MSE, using one batch
// sampled at entry and held fixed. Per-coordinate gradients are clipped to
// [-1e3, 1e3]; a non-finite gradient leaves its parameter untouched for
// that step. Structure and class tags are never modified.
MetamodelTree train_tree(MetamodelTree t, const Oracle& oracle, int k, double lr,
                         std::size_t m, RngStream& rng);

// Same, but on a caller-provided batch (used by the training loop so the
// batch/gradient machinery can be tested and reused independently).
void train_tree_on_batch(MetamodelTree& t, const Batch& batch, int k, double lr);

}  // namespace smpf
