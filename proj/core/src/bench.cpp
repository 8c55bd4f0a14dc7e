#include "smpf/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

#include "smpf/csv.hpp"
#include "smpf/errors.hpp"

namespace smpf {

Oracle TargetSpec::make_oracle() const {
  return Oracle::synthetic(Expression::parse(expression), domain);
}

namespace {

TargetSpec make_target(std::string name, int dim, std::string expr) {
  TargetSpec t;
  t.name = std::move(name);
  t.dim = dim;
  t.expression = std::move(expr);
  t.domain.assign(dim, {0.0, 1.0});
  return t;
}

}  // namespace

const std::vector<TargetSpec>& registry() {
  static const std::vector<TargetSpec> targets = {
      // Two-variable suite.
      make_target("exp2d", 2, "exp(-3*x_0 + x_1)"),
      make_target("sin2d", 2, "sin(x_0*x_1)"),
      make_target("ratio2d", 2, "x_0*x_1/(x_0*x_0 + x_1)"),
      make_target("sinc2d", 2, "sinc(x_0*x_0 + x_1)"),
      // Three-variable extensions.
      make_target("exp3d", 3, "exp(-3*x_0 + x_1 + x_2*x_2)"),
      make_target("sin3d", 3, "sin(x_0*x_1 + x_2)"),
      // Multivariable suite.
      make_target("e4", 4, "exp(-2*x_0 + x_1 + 3*x_2 - 3*x_3)"),
      make_target("e6", 6, "exp(-2*x_0 + x_1 + 3*x_2 - 3*x_3)*exp(-2*x_4 + x_5)"),
      make_target("e8", 8,
                  "exp(-2*x_0 + x_1 + 3*x_2 - 3*x_3)*exp(-2*x_4 + x_5)*exp(-x_6*x_7)"),
      make_target("s4", 4, "sin(x_0*x_1 + x_2 + 2*x_3)"),
      make_target("s6", 6, "sin(x_0*x_1 + x_2 + 2*x_3 + 3*x_4 - x_5)"),
      make_target("s8", 8, "sin(x_0*x_1 + x_2 + 2*x_3 + 3*x_4 - x_5 + sqrt(x_6)*x_7)"),
      make_target("r4", 4, "x_0*x_1/(x_0*x_0 + x_1 + x_2*x_2 + 2*x_3)"),
      make_target("r6", 6,
                  "x_0*x_1/(x_0*x_0 + x_1 + x_2*x_2 + 2*x_3 + x_4*x_4*x_4 + x_5)"),
      make_target("r8", 8,
                  "(x_0*x_1 + sqrt(x_6)*x_7)/"
                  "(x_0*x_0 + x_1 + x_2*x_2 + 2*x_3 + x_4*x_4*x_4 + x_5)"),
  };
  return targets;
}

const std::vector<TargetSpec>& importance_targets() {
  static const std::vector<TargetSpec> targets = {
      // Depends on x_0 and x_1 only; six features total.
      make_target("pair6", 6, "sin(3*x_0) + x_1*x_1"),
      // Pure two-feature interaction among ten features.
      make_target("xor_like", 10, "x_0*x_1"),
      // First four features matter, additively.
      make_target("additive_like", 10, "sin(2*x_0) + 2*x_1 + x_2*x_2 + exp(-x_3)"),
      // x_4 gates which pair of features drives the output.
      make_target("switch_like", 10, "x_4*(x_0 + x_1) + (1 - x_4)*(x_2 + x_3)"),
  };
  return targets;
}

std::optional<TargetSpec> find_target(std::string_view name) {
  for (const auto& t : registry()) {
    if (t.name == name) return t;
  }
  for (const auto& t : importance_targets()) {
    if (t.name == name) return t;
  }
  return std::nullopt;
}

double r2(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw DataError("r2: length mismatch");
  if (truth.empty()) throw DataError("r2: empty input");
  const double n = static_cast<double>(truth.size());
  double mean = 0.0;
  for (double v : truth) mean += v;
  mean /= n;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot == 0.0) {
    throw DataError("r2: truth values are all identical (zero variance)");
  }
  return 1.0 - ss_res / ss_tot;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_frac, RngStream& rng) {
  if (n < 2) throw DataError("split_indices: need at least 2 rows");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.uniform_int(i + 1);
    std::swap(idx[i], idx[j]);
  }
  auto train_count = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  train_count = std::clamp<std::size_t>(train_count, 1, n - 1);
  std::vector<std::size_t> train(idx.begin(), idx.begin() + train_count);
  std::vector<std::size_t> test(idx.begin() + train_count, idx.end());
  return {std::move(train), std::move(test)};
}

namespace {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return out;
}

std::vector<double> predictions(const MetamodelTree& t, const Batch& batch) {
  std::vector<double> pred(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) pred[i] = eval_tree(t, batch.row(i));
  return pred;
}

double mse_of(std::span<const double> pred, std::span<const double> truth) {
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    sum += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  }
  return sum / static_cast<double>(truth.size());
}

struct SeedOutcome {
  SeedResult metrics;
  MetamodelTree tree;
};

RunReport assemble(std::string name, std::span<const std::uint64_t> seeds,
                   std::vector<SeedOutcome> outcomes) {
  RunReport report;
  report.target = std::move(name);
  report.seeds.assign(seeds.begin(), seeds.end());
  for (auto& o : outcomes) {
    report.per_seed.push_back(o.metrics);
    report.total_seconds += o.metrics.seconds;
  }
  aggregate_report(report);
  report.best_tree = std::move(outcomes[report.best_index].tree);
  return report;
}

}  // namespace

void aggregate_report(RunReport& report) {
  std::vector<double> train_mse, test_mse, train_r2, test_r2;
  for (const auto& s : report.per_seed) {
    train_mse.push_back(s.train_mse);
    test_mse.push_back(s.test_mse);
    train_r2.push_back(s.train_r2);
    test_r2.push_back(s.test_r2);
  }
  const auto a = mean_std(train_mse);
  report.mean_train_mse = a.mean;
  report.std_train_mse = a.std;
  const auto b = mean_std(test_mse);
  report.mean_test_mse = b.mean;
  report.std_test_mse = b.std;
  const auto c = mean_std(train_r2);
  report.mean_train_r2 = c.mean;
  report.std_train_r2 = c.std;
  const auto d = mean_std(test_r2);
  report.mean_test_r2 = d.mean;
  report.std_test_r2 = d.std;
  report.best_index = 0;
  for (std::size_t i = 1; i < report.per_seed.size(); ++i) {
    if (report.per_seed[i].test_r2 > report.per_seed[report.best_index].test_r2) {
      report.best_index = static_cast<int>(i);
    }
  }
}

RunReport run_experiment(const TargetSpec& target, const SmpfConfig& cfg,
                         std::span<const std::uint64_t> seeds, int jobs) {
  if (seeds.empty()) throw DataError("run_experiment: seed list is empty");
  validate_config(cfg);
  const Oracle oracle = target.make_oracle();

  std::vector<SeedOutcome> outcomes(seeds.size());
  const int inner_jobs = std::max<int>(1, jobs / static_cast<int>(seeds.size()));
  parallel_for(seeds.size(), jobs, [&](std::size_t si) {
    const auto start = std::chrono::steady_clock::now();
    SmpfConfig run_cfg = cfg;
    run_cfg.seed = seeds[si];
    RunResult rr = run_smpf(oracle, run_cfg, inner_jobs);

    RngStream metric_rng = streams::train_metric(seeds[si]);
    const Batch train_batch = sample_batch(oracle, kEvalPoints, metric_rng);
    RngStream test_rng = streams::test_batch(seeds[si]);
    const Batch test_batch = sample_batch(oracle, kEvalPoints, test_rng);

    SeedOutcome out;
    out.metrics.seed = seeds[si];
    const auto train_pred = predictions(rr.best, train_batch);
    const auto test_pred = predictions(rr.best, test_batch);
    out.metrics.train_mse = mse_of(train_pred, train_batch.y);
    out.metrics.test_mse = mse_of(test_pred, test_batch.y);
    out.metrics.train_r2 = r2(train_pred, train_batch.y);
    out.metrics.test_r2 = r2(test_pred, test_batch.y);
    out.metrics.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.tree = std::move(rr.best);
    outcomes[si] = std::move(out);
  });
  return assemble(target.name, seeds, std::move(outcomes));
}

RunReport run_experiment(const DatasetCsv& data, std::string name, const SmpfConfig& cfg,
                         std::span<const std::uint64_t> seeds, int jobs) {
  if (seeds.empty()) throw DataError("run_experiment: seed list is empty");
  validate_config(cfg);
  if (data.rows() < 2) throw DataError("run_experiment: dataset needs at least 2 rows");

  std::vector<SeedOutcome> outcomes(seeds.size());
  const int inner_jobs = std::max<int>(1, jobs / static_cast<int>(seeds.size()));
  parallel_for(seeds.size(), jobs, [&](std::size_t si) {
    const auto start = std::chrono::steady_clock::now();
    RngStream split_rng = streams::split(seeds[si]);
    const auto [train_idx, test_idx] = split_indices(data.rows(), 0.8, split_rng);

    auto gather = [&](const std::vector<std::size_t>& idx) {
      Batch b;
      b.d = data.d;
      b.x.reserve(idx.size() * data.d);
      b.y.reserve(idx.size());
      for (std::size_t row : idx) {
        const double* src = data.x.data() + row * data.d;
        b.x.insert(b.x.end(), src, src + data.d);
        b.y.push_back(data.y[row]);
      }
      return b;
    };
    const Batch train = gather(train_idx);
    const Batch test = gather(test_idx);

    SmpfConfig run_cfg = cfg;
    run_cfg.seed = seeds[si];
    const Oracle oracle = Oracle::dataset(train.x, train.y, data.d);
    RunResult rr = run_smpf(oracle, run_cfg, inner_jobs);

    SeedOutcome out;
    out.metrics.seed = seeds[si];
    const auto train_pred = predictions(rr.best, train);
    const auto test_pred = predictions(rr.best, test);
    out.metrics.train_mse = mse_of(train_pred, train.y);
    out.metrics.test_mse = mse_of(test_pred, test.y);
    out.metrics.train_r2 = r2(train_pred, train.y);
    out.metrics.test_r2 = r2(test_pred, test.y);
    out.metrics.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.tree = std::move(rr.best);
    outcomes[si] = std::move(out);
  });
  return assemble(std::move(name), seeds, std::move(outcomes));
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

nlohmann::json write_report(const RunReport& report, const SmpfConfig& cfg,
                            const std::filesystem::path& dir, const std::string& basename,
                            int precision) {
  nlohmann::json j;
  j["target"] = report.target;
  j["config"] = config_to_json(cfg);
  j["seeds"] = report.seeds;
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& s : report.per_seed) {
    per_seed.push_back({{"seed", s.seed},
                        {"train_mse", s.train_mse},
                        {"test_mse", s.test_mse},
                        {"train_r2", s.train_r2},
                        {"test_r2", s.test_r2},
                        {"seconds", s.seconds}});
  }
  j["per_seed"] = std::move(per_seed);
  j["aggregate"] = {{"train_mse", {{"mean", report.mean_train_mse}, {"std", report.std_train_mse}}},
                    {"test_mse", {{"mean", report.mean_test_mse}, {"std", report.std_test_mse}}},
                    {"train_r2", {{"mean", report.mean_train_r2}, {"std", report.std_train_r2}}},
                    {"test_r2", {{"mean", report.mean_test_r2}, {"std", report.std_test_r2}}}};
  const std::string expression = render_tree(report.best_tree, precision);
  j["best"] = {{"seed", report.per_seed[report.best_index].seed},
               {"test_r2", report.per_seed[report.best_index].test_r2},
               {"expression", expression}};
  j["total_seconds"] = report.total_seconds;

  atomic_write_file(dir / (basename + ".json"), j.dump(2) + "\n");

  std::string csv = "seed,train_mse,test_mse,train_r2,test_r2,seconds\n";
  for (const auto& s : report.per_seed) {
    csv += csv_join({std::to_string(s.seed), num(s.train_mse), num(s.test_mse),
                     num(s.train_r2), num(s.test_r2), num(s.seconds)});
  }
  atomic_write_file(dir / (basename + ".csv"), csv);
  atomic_write_file(dir / (basename + "_expression.txt"), expression + "\n");
  return j;
}

}  // namespace smpf
