#include "smpf/evolve.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "smpf/csv.hpp"
#include "smpf/errors.hpp"

namespace smpf {

void validate_config(const SmpfConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (cfg.survivors < 1) fail("survivors must be >= 1");
  if (cfg.population_size < cfg.survivors) fail("population_size must be >= survivors");
  if (cfg.population_size % cfg.survivors != 0) {
    fail("population_size (" + std::to_string(cfg.population_size) +
         ") must be divisible by survivors (" + std::to_string(cfg.survivors) + ")");
  }
  if (cfg.min_middle_nodes < 1) fail("min_middle_nodes must be >= 1");
  if (cfg.max_middle_nodes < cfg.min_middle_nodes) {
    fail("max_middle_nodes must be >= min_middle_nodes");
  }
  if (!(cfg.edge_probability > 0.0) || cfg.edge_probability > 1.0) {
    fail("edge_probability must be in (0, 1]");
  }
  if (cfg.crossover_prob < 0.0 || cfg.crossover_prob > 1.0) {
    fail("crossover_prob must be in [0, 1]");
  }
  if (cfg.delete_prob < 0.0 || cfg.delete_prob > 1.0) fail("delete_prob must be in [0, 1]");
  if (cfg.gd_steps < 0) fail("gd_steps must be >= 0");
  if (!(cfg.learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (cfg.edge_penalty < 0.0) fail("edge_penalty must be >= 0");
  if (cfg.mutation_actions < 1) fail("mutation_actions must be >= 1");
  if (cfg.max_iterations < 0) fail("max_iterations must be >= 0");
  if (cfg.batch_size < 1) fail("batch_size must be >= 1");
  if (cfg.hidden_depth < 1) fail("hidden_depth must be >= 1");
  if (cfg.function_set.classes.empty()) fail("function_set must not be empty");
  std::set<PrimitiveClass> unique(cfg.function_set.classes.begin(),
                                  cfg.function_set.classes.end());
  if (unique.size() != cfg.function_set.classes.size()) {
    fail("function_set must not contain duplicates");
  }
  if (!(cfg.domain_lo < cfg.domain_hi)) fail("domain_lo must be < domain_hi");
  if (!std::isfinite(cfg.fitness_threshold)) fail("fitness_threshold must be finite");
}

namespace {

const char* const kConfigKeys[] = {
    "population_size", "min_middle_nodes", "max_middle_nodes", "survivors",
    "edge_probability", "gd_steps", "learning_rate", "edge_penalty",
    "crossover_prob", "delete_prob", "mutation_actions", "max_iterations",
    "fitness_threshold", "batch_size", "hidden_depth", "function_set",
    "seed", "domain",
};

FunctionSet function_set_from_json(const nlohmann::json& j) {
  if (j.is_string()) return FunctionSet::preset(j.get<std::string>());
  if (j.is_array()) {
    FunctionSet fs;
    fs.name = "custom";
    for (const auto& item : j) {
      if (!item.is_string()) throw ConfigError("config: function_set entries must be strings");
      const auto cls = class_from_name(item.get<std::string>());
      if (!cls) {
        throw ConfigError("config: unknown primitive class '" + item.get<std::string>() + "'");
      }
      fs.classes.push_back(*cls);
    }
    return fs;
  }
  throw ConfigError("config: function_set must be a preset name or a list of class names");
}

}  // namespace

SmpfConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(kConfigKeys), std::end(kConfigKeys),
                     [&](const char* k) { return key == k; }) == std::end(kConfigKeys)) {
      throw ConfigError("config: unknown field '" + key + "'");
    }
  }
  SmpfConfig cfg;
  auto get_int = [&](const char* key, int& out) {
    if (j.contains(key)) out = j.at(key).get<int>();
  };
  auto get_double = [&](const char* key, double& out) {
    if (j.contains(key)) out = j.at(key).get<double>();
  };
  get_int("population_size", cfg.population_size);
  get_int("min_middle_nodes", cfg.min_middle_nodes);
  get_int("max_middle_nodes", cfg.max_middle_nodes);
  get_int("survivors", cfg.survivors);
  get_double("edge_probability", cfg.edge_probability);
  get_int("gd_steps", cfg.gd_steps);
  get_double("learning_rate", cfg.learning_rate);
  get_double("edge_penalty", cfg.edge_penalty);
  get_double("crossover_prob", cfg.crossover_prob);
  get_double("delete_prob", cfg.delete_prob);
  get_int("mutation_actions", cfg.mutation_actions);
  get_int("max_iterations", cfg.max_iterations);
  get_double("fitness_threshold", cfg.fitness_threshold);
  get_int("batch_size", cfg.batch_size);
  get_int("hidden_depth", cfg.hidden_depth);
  if (j.contains("function_set")) cfg.function_set = function_set_from_json(j.at("function_set"));
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("domain")) {
    const auto& dom = j.at("domain");
    if (!dom.is_array() || dom.size() != 2) {
      throw ConfigError("config: domain must be [lo, hi]");
    }
    cfg.domain_lo = dom[0].get<double>();
    cfg.domain_hi = dom[1].get<double>();
  }
  validate_config(cfg);
  return cfg;
}

nlohmann::json config_to_json(const SmpfConfig& cfg) {
  nlohmann::json j;
  j["population_size"] = cfg.population_size;
  j["min_middle_nodes"] = cfg.min_middle_nodes;
  j["max_middle_nodes"] = cfg.max_middle_nodes;
  j["survivors"] = cfg.survivors;
  j["edge_probability"] = cfg.edge_probability;
  j["gd_steps"] = cfg.gd_steps;
  j["learning_rate"] = cfg.learning_rate;
  j["edge_penalty"] = cfg.edge_penalty;
  j["crossover_prob"] = cfg.crossover_prob;
  j["delete_prob"] = cfg.delete_prob;
  j["mutation_actions"] = cfg.mutation_actions;
  j["max_iterations"] = cfg.max_iterations;
  j["fitness_threshold"] = cfg.fitness_threshold;
  j["batch_size"] = cfg.batch_size;
  j["hidden_depth"] = cfg.hidden_depth;
  if (cfg.function_set.name != "custom" && !cfg.function_set.name.empty()) {
    j["function_set"] = cfg.function_set.name;
  } else {
    nlohmann::json names = nlohmann::json::array();
    for (auto cls : cfg.function_set.classes) names.push_back(std::string(class_name(cls)));
    j["function_set"] = names;
  }
  j["seed"] = cfg.seed;
  j["domain"] = {cfg.domain_lo, cfg.domain_hi};
  return j;
}

SmpfConfig load_config_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

bool is_config_preset(std::string_view name) {
  return name == "exp1" || name == "exp2" || name == "exp3";
}

SmpfConfig config_preset(std::string_view name) {
  SmpfConfig cfg;
  if (name == "exp1") {
    cfg.population_size = 20;
    cfg.gd_steps = 20;
    cfg.learning_rate = 0.1;
    cfg.max_iterations = 30;
    cfg.survivors = 4;
  } else if (name == "exp2") {
    cfg.population_size = 20;
    cfg.survivors = 2;
    cfg.gd_steps = 10;
    cfg.max_iterations = 10;
    cfg.learning_rate = 0.01;
    cfg.edge_probability = 0.7;
    cfg.crossover_prob = 0.7;
    cfg.delete_prob = 0.5;
    cfg.min_middle_nodes = 2;
    cfg.max_middle_nodes = 2;
    cfg.mutation_actions = 1;
  } else if (name == "exp3") {
    cfg.population_size = 20;
    cfg.survivors = 4;
    cfg.max_iterations = 20;
    cfg.gd_steps = 20;
    cfg.learning_rate = 0.05;
    cfg.edge_probability = 0.6;
    cfg.crossover_prob = 0.7;
    cfg.delete_prob = 0.5;
    cfg.mutation_actions = 1;
  } else {
    throw ConfigError("unknown config preset: " + std::string(name));
  }
  validate_config(cfg);
  return cfg;
}

namespace streams {
namespace {
enum Purpose : std::uint64_t {
  kInit = 1,
  kTrain = 2,
  kFitness = 3,
  kEvolve = 4,
  kTest = 5,
  kMetric = 6,
  kSplit = 7,
};
}

RngStream init_tree(std::uint64_t seed, int tree_index) {
  return RngStream::derive(seed, {kInit, static_cast<std::uint64_t>(tree_index)});
}
RngStream train(std::uint64_t seed, int generation, int tree_index) {
  return RngStream::derive(seed, {kTrain, static_cast<std::uint64_t>(generation),
                                  static_cast<std::uint64_t>(tree_index)});
}
RngStream fitness_batch(std::uint64_t seed, int generation) {
  return RngStream::derive(seed, {kFitness, static_cast<std::uint64_t>(generation)});
}
RngStream evolve(std::uint64_t seed, int generation) {
  return RngStream::derive(seed, {kEvolve, static_cast<std::uint64_t>(generation)});
}
RngStream test_batch(std::uint64_t seed) { return RngStream::derive(seed, {kTest}); }
RngStream train_metric(std::uint64_t seed) { return RngStream::derive(seed, {kMetric}); }
RngStream split(std::uint64_t seed) { return RngStream::derive(seed, {kSplit}); }
}  // namespace streams

namespace {

PrimitiveClass pick_class(const FunctionSet& fs, RngStream& rng) {
  return fs.classes[rng.uniform_int(fs.classes.size())];
}

// Connects one hidden layer of `size` nodes over `below` lower units:
// independent p0 edges, then the two repair rules, in that order.
std::vector<std::vector<int>> random_adjacency(int size, int below, double p0,
                                               RngStream& rng) {
  std::vector<std::vector<int>> children(size);
  std::vector<bool> covered(below, false);
  for (int u = 0; u < size; ++u) {
    for (int v = 0; v < below; ++v) {
      if (rng.bernoulli(p0)) {
        children[u].push_back(v);
        covered[v] = true;
      }
    }
  }
  for (int v = 0; v < below; ++v) {
    if (!covered[v]) {
      children[rng.uniform_int(size)].push_back(v);
    }
  }
  for (int u = 0; u < size; ++u) {
    if (children[u].empty()) {
      children[u].push_back(static_cast<int>(rng.uniform_int(below)));
    }
  }
  for (auto& c : children) std::sort(c.begin(), c.end());
  return children;
}

}  // namespace

MetamodelTree random_tree(const SmpfConfig& cfg, int d, RngStream& rng) {
  if (d < 1) throw DataError("random_tree: d must be >= 1");
  MetamodelTree t;
  t.d = d;
  const int span = cfg.max_middle_nodes - cfg.min_middle_nodes + 1;
  std::vector<int> sizes(cfg.hidden_depth);
  for (int& size : sizes) {
    size = cfg.min_middle_nodes + static_cast<int>(rng.uniform_int(span));
  }
  t.layers.resize(cfg.hidden_depth);
  for (int li = 0; li < cfg.hidden_depth; ++li) {
    const int below = li == 0 ? d : sizes[li - 1];
    const auto adjacency = random_adjacency(sizes[li], below, cfg.edge_probability, rng);
    auto& layer = t.layers[li];
    layer.resize(sizes[li]);
    for (int u = 0; u < sizes[li]; ++u) {
      layer[u].outgoing = init_primitive(pick_class(cfg.function_set, rng), rng);
      for (int v : adjacency[u]) {
        layer[u].children.push_back(
            {v, init_primitive(pick_class(cfg.function_set, rng), rng)});
      }
    }
  }
  return t;
}

MetamodelTree crossover(const MetamodelTree& t, std::span<const MetamodelTree> donors,
                        RngStream& rng, CrossoverTrace* trace) {
  if (donors.empty()) throw DataError("crossover: donor list is empty");
  MetamodelTree child = t;
  const int li = static_cast<int>(rng.uniform_int(child.layers.size()));
  const int ni = static_cast<int>(rng.uniform_int(child.layers[li].size()));
  const MetamodelTree& donor = donors[rng.uniform_int(donors.size())];
  const auto& donor_layer = donor.layers.at(li);
  const HiddenNode& donor_node = donor_layer[rng.uniform_int(donor_layer.size())];

  const int target_range =
      li == 0 ? child.d : static_cast<int>(child.layers[li - 1].size());
  HiddenNode replacement;
  replacement.outgoing = donor_node.outgoing;
  std::set<int> used;
  for (const ChildEdge& edge : donor_node.children) {
    int target = edge.target;
    if (target >= target_range || used.count(target)) {
      // Remap uniformly over the remaining free targets; drop if saturated.
      std::vector<int> free;
      for (int v = 0; v < target_range; ++v) {
        if (!used.count(v)) free.push_back(v);
      }
      if (free.empty()) continue;
      target = free[rng.uniform_int(free.size())];
    }
    used.insert(target);
    replacement.children.push_back({target, edge.fn});
  }

  if (trace) {
    trace->layer = li;
    trace->node = ni;
    trace->replaced_node_edges = 1 + static_cast<int>(child.layers[li][ni].children.size());
    trace->installed_node_edges = 1 + static_cast<int>(replacement.children.size());
  }
  child.layers[li][ni] = std::move(replacement);
  return child;
}

namespace {

struct ChildEdgeRef {
  int layer;
  int node;
  int child;
};

std::vector<ChildEdgeRef> collect_child_edges(const MetamodelTree& t) {
  std::vector<ChildEdgeRef> refs;
  for (std::size_t li = 0; li < t.layers.size(); ++li) {
    for (std::size_t ni = 0; ni < t.layers[li].size(); ++ni) {
      for (std::size_t ci = 0; ci < t.layers[li][ni].children.size(); ++ci) {
        refs.push_back({static_cast<int>(li), static_cast<int>(ni), static_cast<int>(ci)});
      }
    }
  }
  return refs;
}

void change_random_edge_class(MetamodelTree& t, const SmpfConfig& cfg, RngStream& rng) {
  std::vector<PrimitiveFunction*> edges;
  for_each_edge(t, [&](PrimitiveFunction& f) { edges.push_back(&f); });
  PrimitiveFunction* chosen = edges[rng.uniform_int(edges.size())];
  *chosen = init_primitive(pick_class(cfg.function_set, rng), rng);
}

}  // namespace

MetamodelTree mutate(const MetamodelTree& t, const SmpfConfig& cfg, RngStream& rng,
                     MutationTrace* trace) {
  MetamodelTree child = t;
  for (int action = 0; action < cfg.mutation_actions; ++action) {
    if (rng.bernoulli(cfg.delete_prob)) {
      const auto refs = collect_child_edges(child);
      const int attempts = edge_count(child);
      bool deleted = false;
      for (int a = 0; a < attempts && !deleted; ++a) {
        const ChildEdgeRef ref = refs[rng.uniform_int(refs.size())];
        auto& children = child.layers[ref.layer][ref.node].children;
        if (children.size() < 2) continue;  // never remove a node's last child
        children.erase(children.begin() + ref.child);
        deleted = true;
      }
      if (deleted) {
        if (trace) ++trace->removed_edges;
        continue;
      }
      // Every node is down to its last child; fall back to a class change.
    }
    change_random_edge_class(child, cfg, rng);
    if (trace) ++trace->class_changes;
  }
  return child;
}

Generation next_generation(const Generation& gen, const SmpfConfig& cfg, RngStream& rng,
                           EvolveTrace* trace) {
  const int m_pop = static_cast<int>(gen.trees.size());
  if (m_pop != cfg.population_size || gen.records.size() != gen.trees.size()) {
    throw DataError("next_generation: generation does not match config population");
  }

  // Sort by fitness, breaking ties toward fewer edges, then lower index.
  std::vector<int> order(m_pop);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ra = gen.records[a];
    const auto& rb = gen.records[b];
    if (ra.fitness != rb.fitness) return ra.fitness < rb.fitness;
    if (ra.edges != rb.edges) return ra.edges < rb.edges;
    return a < b;
  });

  const int s = cfg.survivors;
  std::vector<MetamodelTree> survivors;
  survivors.reserve(s);
  for (int i = 0; i < s; ++i) survivors.push_back(gen.trees[order[i]]);
  if (trace) trace->selected.assign(order.begin(), order.begin() + s);

  Generation next;
  next.index = gen.index + 1;
  next.trees = survivors;
  next.records.assign(m_pop, FitnessRecord{});

  const int offspring_per_survivor = cfg.population_size / s - 1;
  for (int i = 0; i < s; ++i) {
    // Donor pool: the other survivors; a lone survivor donates to itself.
    std::vector<MetamodelTree> donors;
    if (s == 1) {
      donors.push_back(survivors[0]);
    } else {
      for (int jj = 0; jj < s; ++jj) {
        if (jj != i) donors.push_back(survivors[jj]);
      }
    }
    for (int j = 0; j < offspring_per_survivor; ++j) {
      OffspringTrace off;
      off.survivor = i;
      if (rng.bernoulli(cfg.crossover_prob)) {
        off.is_crossover = true;
        next.trees.push_back(crossover(survivors[i], donors, rng, trace ? &off.cross : nullptr));
      } else {
        next.trees.push_back(mutate(survivors[i], cfg, rng, trace ? &off.mut : nullptr));
      }
      if (trace) trace->offspring.push_back(off);
    }
  }
  return next;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs < 1) jobs = 1;
  const std::size_t workers = std::min<std::size_t>(jobs, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> counter{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = counter.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

RunResult run_smpf(const Oracle& oracle, const SmpfConfig& cfg, int jobs) {
  validate_config(cfg);
  const int d = oracle.dim();
  const int m_pop = cfg.population_size;

  std::vector<MetamodelTree> trees(m_pop);
  for (int i = 0; i < m_pop; ++i) {
    RngStream rng = streams::init_tree(cfg.seed, i);
    trees[i] = random_tree(cfg, d, rng);
  }

  std::vector<FitnessRecord> records(m_pop);
  RunResult result;

  for (int gen = 0;; ++gen) {
    parallel_for(m_pop, jobs, [&](std::size_t i) {
      RngStream rng = streams::train(cfg.seed, gen, static_cast<int>(i));
      trees[i] = train_tree(std::move(trees[i]), oracle, cfg.gd_steps, cfg.learning_rate,
                            cfg.batch_size, rng);
    });

    RngStream fit_rng = streams::fitness_batch(cfg.seed, gen);
    const Batch batch = sample_batch(oracle, cfg.batch_size, fit_rng);
    parallel_for(m_pop, jobs, [&](std::size_t i) {
      records[i] = fitness(trees[i], batch, cfg.edge_penalty);
    });

    int best = 0;
    for (int i = 1; i < m_pop; ++i) {
      const auto& a = records[i];
      const auto& b = records[best];
      if (a.fitness < b.fitness ||
          (a.fitness == b.fitness && (a.edges < b.edges))) {
        best = i;
      }
    }
    result.history.push_back(records[best]);

    const bool below_threshold = records[best].fitness < cfg.fitness_threshold;
    if (below_threshold || gen >= cfg.max_iterations) {
      result.best = trees[best];
      result.best_record = records[best];
      break;
    }

    Generation current{std::move(trees), std::move(records), gen};
    RngStream evolve_rng = streams::evolve(cfg.seed, gen);
    Generation next = next_generation(current, cfg, evolve_rng);
    trees = std::move(next.trees);
    records.assign(m_pop, FitnessRecord{});
  }
  return result;
}

}  // namespace smpf
