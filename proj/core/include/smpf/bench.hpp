#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smpf/csv.hpp"
#include "smpf/evolve.hpp"
#include "smpf/expr.hpp"
#include "smpf/optimize.hpp"

namespace smpf {

// A named closed-form target with its sampling box.
struct TargetSpec {
  std::string name;
  int dim = 0;
  std::string expression;  // in the grammar, extended with sqrt and sinc
  std::vector<std::pair<double, double>> domain;

  Oracle make_oracle() const;
};

// The benchmark suite: the four two-variable targets, the two
// three-variable extensions, and the nine multivariable targets
// (e4/e6/e8, s4/s6/s8, r4/r6/r8). All use the unit box.
const std::vector<TargetSpec>& registry();

// Stand-in black-boxes for the instance-wise importance protocol: each
// depends on a known subset of its features (see the expressions).
const std::vector<TargetSpec>& importance_targets();

// Looks up a target by name across registry() and importance_targets().
std::optional<TargetSpec> find_target(std::string_view name);

// Coefficient of determination 1 - SS_res/SS_tot; negative when worse than
// predicting the mean. Throws DataError for empty/mismatched inputs or a
// constant truth vector.
double r2(std::span<const double> pred, std::span<const double> truth);

struct SeedResult {
  std::uint64_t seed = 0;
  double train_mse = 0.0;
  double test_mse = 0.0;
  double train_r2 = 0.0;
  double test_r2 = 0.0;
  double seconds = 0.0;
};

struct RunReport {
  std::string target;
  std::vector<std::uint64_t> seeds;
  std::vector<SeedResult> per_seed;
  double mean_train_mse = 0, std_train_mse = 0;
  double mean_test_mse = 0, std_test_mse = 0;
  double mean_train_r2 = 0, std_train_r2 = 0;
  double mean_test_r2 = 0, std_test_r2 = 0;
  int best_index = 0;  // per_seed index with the highest test R^2
  MetamodelTree best_tree;
  double total_seconds = 0.0;
};

inline constexpr std::size_t kEvalPoints = 1000;  // held-out batch size

// Runs the search once per seed against a synthetic target: train on the
// target's box, score on a fresh uniform batch of kEvalPoints drawn from an
// independent stream, and aggregate mean +- sample std across seeds.
RunReport run_experiment(const TargetSpec& target, const SmpfConfig& cfg,
                         std::span<const std::uint64_t> seeds, int jobs = 1);

// Dataset mode: per seed an 80/20 split (fresh per seed), training on the
// 80% as a dataset oracle and scoring on the held-out rows.
RunReport run_experiment(const DatasetCsv& data, std::string name, const SmpfConfig& cfg,
                         std::span<const std::uint64_t> seeds, int jobs = 1);

// Seed-shuffled disjoint split; train gets round(frac*n) rows clamped to
// [1, n-1].
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_frac, RngStream& rng);

// Recomputes the aggregate fields from per_seed (used after editing and by
// the aggregation identity check).
void aggregate_report(RunReport& report);

// Writes <basename>.json, <basename>.csv (one row per seed) and
// <basename>_expression.txt under dir. Returns the JSON document.
nlohmann::json write_report(const RunReport& report, const SmpfConfig& cfg,
                            const std::filesystem::path& dir, const std::string& basename,
                            int precision);

}  // namespace smpf
