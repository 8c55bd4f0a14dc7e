#include "smpf/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "smpf/errors.hpp"

namespace smpf {

Oracle Oracle::synthetic(Expression expr, std::vector<std::pair<double, double>> domain) {
  if (domain.empty()) throw DataError("synthetic oracle: empty domain");
  for (const auto& [lo, hi] : domain) {
    if (!(lo < hi)) throw DataError("synthetic oracle: domain bounds must satisfy lo < hi");
  }
  if (expr.max_var_index() >= static_cast<int>(domain.size())) {
    throw DataError("synthetic oracle: expression references x_" +
                    std::to_string(expr.max_var_index()) + " but domain has " +
                    std::to_string(domain.size()) + " features");
  }
  Oracle o;
  o.kind_ = Kind::kSynthetic;
  o.dim_ = static_cast<int>(domain.size());
  o.expr_ = std::move(expr);
  o.domain_ = std::move(domain);
  return o;
}

Oracle Oracle::dataset(std::vector<double> x_rows, std::vector<double> y, int d) {
  if (d < 1) throw DataError("dataset oracle: feature count must be >= 1");
  if (y.empty()) throw DataError("dataset oracle: needs at least one row");
  if (x_rows.size() != y.size() * static_cast<std::size_t>(d)) {
    throw DataError("dataset oracle: inconsistent row width");
  }
  for (double v : x_rows) {
    if (!std::isfinite(v)) throw DataError("dataset oracle: non-finite feature value");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw DataError("dataset oracle: non-finite target value");
  }
  Oracle o;
  o.kind_ = Kind::kDataset;
  o.dim_ = d;
  o.x_ = std::move(x_rows);
  o.y_ = std::move(y);
  return o;
}

double Oracle::query(std::span<const double> x) const {
  if (kind_ != Kind::kSynthetic) throw DataError("query: oracle is not synthetic");
  return expr_.eval(x);
}

Batch sample_batch(const Oracle& oracle, std::size_t m, RngStream& rng) {
  Batch batch;
  batch.d = oracle.dim();
  if (oracle.kind() == Oracle::Kind::kSynthetic) {
    batch.x.resize(m * static_cast<std::size_t>(batch.d));
    batch.y.resize(m);
    std::vector<double> point(batch.d);
    for (std::size_t i = 0; i < m; ++i) {
      for (int j = 0; j < batch.d; ++j) {
        const auto& [lo, hi] = oracle.domain()[j];
        point[j] = rng.uniform(lo, hi);
        batch.x[i * batch.d + j] = point[j];
      }
      batch.y[i] = oracle.query(point);
    }
    return batch;
  }

  const std::size_t n = oracle.rows();
  if (m >= n) {
    batch.x = oracle.data_x();
    batch.y = oracle.data_y();
    return batch;
  }
  // Partial Fisher-Yates: the first m entries form a uniform sample without
  // replacement.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.uniform_int(n - i);
    std::swap(idx[i], idx[j]);
  }
  batch.x.resize(m * static_cast<std::size_t>(batch.d));
  batch.y.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = oracle.data_x().data() + idx[i] * batch.d;
    std::copy(row, row + batch.d, batch.x.begin() + i * batch.d);
    batch.y[i] = oracle.data_y()[idx[i]];
  }
  return batch;
}

double mse(const MetamodelTree& t, const Batch& batch) {
  if (batch.d != t.d) {
    throw DataError("mse: batch width " + std::to_string(batch.d) +
                    " does not match tree d=" + std::to_string(t.d));
  }
  if (batch.size() == 0) throw DataError("mse: empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double r = eval_tree(t, batch.row(i)) - batch.y[i];
    sum += r * r;
  }
  const double value = sum / static_cast<double>(batch.size());
  return std::isfinite(value) ? value : kInfFitness;
}

FitnessRecord fitness(const MetamodelTree& t, const Batch& batch, double lambda) {
  FitnessRecord rec;
  rec.mse = mse(t, batch);
  rec.edges = edge_count(t);
  rec.fitness = rec.mse + lambda * rec.edges;
  return rec;
}

namespace {
constexpr double kGradClip = 1e3;
}

void train_tree_on_batch(MetamodelTree& t, const Batch& batch, int k, double lr) {
  if (batch.d != t.d) {
    throw DataError("train_tree: batch width does not match tree");
  }
  const std::size_t m = batch.size();
  const int np = param_count(t);
  std::vector<double> grad(np);
  GradientTape tape;
  TreeWorkspace ws;

  for (int step = 0; step < k; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double value = backward(t, batch.row(i), tape, ws);
      const double residual = value - batch.y[i];
      for (int p = 0; p < np; ++p) grad[p] += residual * tape.param_grads[p];
    }
    const double scale = 2.0 / static_cast<double>(m);
    int offset = 0;
    for_each_edge(t, [&](PrimitiveFunction& f) {
      for (int pi = 0; pi < f.arity(); ++pi) {
        double g = grad[offset + pi] * scale;
        if (!std::isfinite(g)) continue;  // skip this coordinate for this step
        g = std::clamp(g, -kGradClip, kGradClip);
        f.params[pi] -= lr * g;
      }
      offset += f.arity();
    });
  }
}

MetamodelTree train_tree(MetamodelTree t, const Oracle& oracle, int k, double lr,
                         std::size_t m, RngStream& rng) {
  // One batch per call, fixed across all k steps.
  const Batch batch = sample_batch(oracle, m, rng);
  train_tree_on_batch(t, batch, k, lr);
  return t;
}

}  // namespace smpf
