// Command line front end: fit / eval / importance / bench / render.
//
// Exit codes: 0 success, 2 configuration error, 3 I/O error,
// 4 data/shape error. Output files are written atomically, so a failing
// invocation never leaves partial primary outputs behind.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "smpf/bench.hpp"
#include "smpf/csv.hpp"
#include "smpf/errors.hpp"
#include "smpf/evolve.hpp"
#include "smpf/interpret.hpp"
#include "smpf/tree.hpp"

namespace {

using namespace smpf;

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitData = 4;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// --config accepts either a file path or a bundled preset name.
SmpfConfig resolve_config(const std::string& spec) {
  if (std::filesystem::exists(spec)) return load_config_file(spec);
  if (is_config_preset(spec)) return config_preset(spec);
  throw IoError("config file not found: " + spec);
}

// Seed precedence: --seed flag, then SMPF_SEED, then the config value.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag_seed,
                           const SmpfConfig& cfg) {
  if (flag_seed) return *flag_seed;
  if (const char* env = std::getenv("SMPF_SEED")) {
    char* end = nullptr;
    const auto value = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') {
      throw ConfigError(std::string("SMPF_SEED is not an integer: ") + env);
    }
    return value;
  }
  return cfg.seed;
}

std::string available_target_names() {
  std::string names;
  for (const auto& t : registry()) names += t.name + " ";
  for (const auto& t : importance_targets()) names += t.name + " ";
  return names;
}

TargetSpec require_target(const std::string& name) {
  if (auto t = find_target(name)) return *t;
  throw ConfigError("unknown target '" + name + "'; available: " + available_target_names());
}

std::vector<std::uint64_t> seed_range(std::uint64_t base, int count) {
  std::vector<std::uint64_t> seeds(count);
  for (int i = 0; i < count; ++i) seeds[i] = base + static_cast<std::uint64_t>(i);
  return seeds;
}

struct CommonFlags {
  std::string config = "exp1";
  std::string target;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  int seeds = 5;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  int precision = 4;
  bool hessian = false;
};

int cmd_fit(const CommonFlags& flags) {
  SmpfConfig cfg = resolve_config(flags.config);
  cfg.seed = resolve_seed(flags.seed, cfg);
  const std::vector<std::uint64_t> seeds = {cfg.seed};

  RunReport report;
  if (!flags.target.empty()) {
    const TargetSpec target = require_target(flags.target);
    report = run_experiment(target, cfg, seeds, flags.jobs);
  } else {
    const DatasetCsv data = load_dataset_csv(flags.data);
    report = run_experiment(data, std::filesystem::path(flags.data).stem().string(), cfg,
                            seeds, flags.jobs);
  }

  const std::filesystem::path out_dir = flags.out;
  save_tree(report.best_tree, out_dir / "model.json");
  write_report(report, cfg, out_dir, "report", flags.precision);

  std::cout << "fit " << report.target << ": test_r2=" << fmt6(report.mean_test_r2)
            << " test_mse=" << fmt(report.mean_test_mse) << "\n"
            << "model: " << (out_dir / "model.json").string() << "\n"
            << "expression: " << render_tree(report.best_tree, flags.precision) << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& points_path,
             const std::string& out_path) {
  const MetamodelTree tree = load_tree(model_path);
  const DatasetCsv points = load_points_csv(points_path);

  std::string out;
  if (points.d == 0) {
    out = "g\n";  // empty input: header-only output
  } else {
    if (points.d != tree.d) {
      throw DataError("eval: points have " + std::to_string(points.d) +
                      " features but the model expects " + std::to_string(tree.d));
    }
    for (int i = 0; i < points.d; ++i) out += "x_" + std::to_string(i) + ",";
    out += "g\n";
    std::vector<std::string> cells(points.d + 1);
    for (std::size_t row = 0; row < points.rows(); ++row) {
      std::span<const double> x{points.x.data() + row * points.d,
                                static_cast<std::size_t>(points.d)};
      for (int i = 0; i < points.d; ++i) cells[i] = fmt(x[i]);
      cells[points.d] = fmt(eval_tree(tree, x));
      out += csv_join(cells);
    }
  }
  atomic_write_file(out_path, out);
  return 0;
}

int cmd_importance(const std::string& model_path, const std::string& points_path,
                   const std::string& out_dir, bool with_hessian) {
  const MetamodelTree tree = load_tree(model_path);
  const DatasetCsv points = load_points_csv(points_path);
  if (points.d != tree.d) {
    throw DataError("importance: points have " + std::to_string(points.d) +
                    " features but the model expects " + std::to_string(tree.d));
  }
  if (points.rows() == 0) throw DataError("importance: no points given");

  nlohmann::json reports = nlohmann::json::array();
  std::string csv = "point,feature,gradient,rank\n";
  for (std::size_t row = 0; row < points.rows(); ++row) {
    std::span<const double> x{points.x.data() + row * points.d,
                              static_cast<std::size_t>(points.d)};
    ImportanceReport rep = rank_features(tree, x);
    if (with_hessian) rep.hessian = hessian_at(tree, x);

    nlohmann::json j;
    j["point"] = rep.point;
    j["gradient"] = rep.gradient;
    j["ranking"] = rep.ranking;
    if (rep.hessian) {
      nlohmann::json rows = nlohmann::json::array();
      for (int i = 0; i < tree.d; ++i) {
        rows.push_back(std::vector<double>(rep.hessian->begin() + i * tree.d,
                                           rep.hessian->begin() + (i + 1) * tree.d));
      }
      j["hessian"] = rows;
    }
    reports.push_back(std::move(j));

    std::vector<int> rank_of(tree.d);
    for (int pos = 0; pos < tree.d; ++pos) rank_of[rep.ranking[pos]] = pos;
    for (int f = 0; f < tree.d; ++f) {
      csv += csv_join({std::to_string(row), std::to_string(f), fmt(rep.gradient[f]),
                       std::to_string(rank_of[f])});
    }
  }

  const std::filesystem::path dir = out_dir;
  atomic_write_file(dir / "importance.json", reports.dump(2) + "\n");
  atomic_write_file(dir / "importance.csv", csv);
  return 0;
}

int cmd_bench(const CommonFlags& flags) {
  SmpfConfig cfg = resolve_config(flags.config);
  cfg.seed = resolve_seed(flags.seed, cfg);
  if (flags.seeds < 1) throw ConfigError("--seeds must be >= 1");
  const auto seeds = seed_range(cfg.seed, flags.seeds);

  std::vector<TargetSpec> targets;
  if (flags.target.empty() || flags.target == "all") {
    targets = registry();
  } else {
    std::string rest = flags.target;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      targets.push_back(require_target(rest.substr(0, comma)));
      if (comma == std::string::npos) break;
      rest = rest.substr(comma + 1);
    }
  }

  const std::filesystem::path out_dir = flags.out;
  std::string summary = "target,seeds,mean_test_mse,std_test_mse,mean_test_r2,std_test_r2,"
                        "best_test_r2,seconds\n";
  std::printf("%-10s %12s %12s %12s %12s %10s\n", "target", "test_mse", "+-", "test_r2",
              "+-", "seconds");
  for (const auto& target : targets) {
    const RunReport report = run_experiment(target, cfg, seeds, flags.jobs);
    write_report(report, cfg, out_dir, target.name, flags.precision);
    summary += csv_join({target.name, std::to_string(seeds.size()),
                         fmt(report.mean_test_mse), fmt(report.std_test_mse),
                         fmt(report.mean_test_r2), fmt(report.std_test_r2),
                         fmt(report.per_seed[report.best_index].test_r2),
                         fmt(report.total_seconds)});
    std::printf("%-10s %12.5f %12.5f %12.4f %12.4f %10.2f\n", target.name.c_str(),
                report.mean_test_mse, report.std_test_mse, report.mean_test_r2,
                report.std_test_r2, report.total_seconds);
  }
  atomic_write_file(out_dir / "summary.csv", summary);
  return 0;
}

int cmd_render(const std::string& model_path, int precision, const std::string& out_path) {
  const MetamodelTree tree = load_tree(model_path);
  const std::string expression = render_tree(tree, precision);
  if (out_path.empty()) {
    std::cout << expression << "\n";
  } else {
    atomic_write_file(out_path, expression + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbolic metamodeling with primitive functions"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* fit = app.add_subcommand("fit", "Fit a metamodel to a target or dataset");
  fit->add_option("--config", flags.config, "Config file or preset (exp1/exp2/exp3)");
  fit->add_option("--target", flags.target, "Registry target name");
  fit->add_option("--data", flags.data, "Dataset CSV (x_0..x_{d-1},y)");
  fit->add_option("--out", flags.out, "Output directory")->required();
  fit->add_option("--seed", flags.seed, "Seed override");
  fit->add_option("--jobs", flags.jobs, "Worker threads");
  fit->add_option("--precision", flags.precision, "Expression precision");

  std::string model_path, points_path, out_file;
  auto* eval = app.add_subcommand("eval", "Evaluate a saved model on points");
  eval->add_option("--model", model_path, "Model JSON file")->required();
  eval->add_option("--data", points_path, "Points CSV (x_0..x_{d-1})")->required();
  eval->add_option("--out", out_file, "Output CSV")->required();

  auto* importance = app.add_subcommand("importance", "Instance-wise feature importance");
  importance->add_option("--model", model_path, "Model JSON file")->required();
  importance->add_option("--data", points_path, "Points CSV")->required();
  importance->add_option("--out", flags.out, "Output directory")->required();
  importance->add_flag("--hessian", flags.hessian, "Include second-order matrix");

  auto* bench = app.add_subcommand("bench", "Run registry experiments");
  bench->add_option("--config", flags.config, "Config file or preset");
  bench->add_option("--target", flags.target, "Comma-separated target names or 'all'");
  bench->add_option("--seeds", flags.seeds, "Number of seeds");
  bench->add_option("--seed", flags.seed, "Base seed");
  bench->add_option("--out", flags.out, "Output directory")->required();
  bench->add_option("--jobs", flags.jobs, "Worker threads");
  bench->add_option("--precision", flags.precision, "Expression precision");

  auto* render = app.add_subcommand("render", "Print a saved model as an expression");
  render->add_option("--model", model_path, "Model JSON file")->required();
  render->add_option("--precision", flags.precision, "Expression precision");
  render->add_option("--out", out_file, "Optional output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (fit->parsed()) {
      if (flags.target.empty() == flags.data.empty()) {
        throw ConfigError("fit: exactly one of --target or --data is required");
      }
      return cmd_fit(flags);
    }
    if (eval->parsed()) return cmd_eval(model_path, points_path, out_file);
    if (importance->parsed()) {
      return cmd_importance(model_path, points_path, flags.out, flags.hessian);
    }
    if (bench->parsed()) return cmd_bench(flags);
    if (render->parsed()) return cmd_render(model_path, flags.precision, out_file);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
