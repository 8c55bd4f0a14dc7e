#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "smpf/optimize.hpp"
#include "smpf/primitives.hpp"
#include "smpf/rng.hpp"
#include "smpf/tree.hpp"

namespace smpf {

// Hyperparameters of the memetic search loop. Comments give the symbols
// used throughout the literature on this family of algorithms.
struct SmpfConfig {
  int population_size = 20;      // M
  int min_middle_nodes = 1;      // l1
  int max_middle_nodes = 3;      // l2
  int survivors = 4;             // s; must divide M
  double edge_probability = 0.7; // p0
  int gd_steps = 20;             // k
  double learning_rate = 0.1;    // lr
  double edge_penalty = 1e-3;    // lambda in fitness = mse + lambda * edges
  double crossover_prob = 0.7;   // p_cross
  double delete_prob = 0.5;      // p_del, within a mutation action
  int mutation_actions = 1;      // n_m
  int max_iterations = 30;       // generation cap
  double fitness_threshold = 1e-4;  // stop once best fitness drops below this
  int batch_size = 1024;         // m, per training call and fitness batch
  int hidden_depth = 1;          // H
  FunctionSet function_set = FunctionSet::preset("main5");
  std::uint64_t seed = 42;
  // Fallback domain box applied to every feature when the oracle does not
  // carry its own bounds.
  double domain_lo = 0.0;
  double domain_hi = 1.0;
};

// Throws ConfigError on any violated constraint (e.g. survivors not
// dividing the population size).
void validate_config(const SmpfConfig& cfg);

// JSON round trip. Loading rejects unknown fields; missing fields keep
// their defaults. "function_set" accepts a preset name or a list of class
// names.
SmpfConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const SmpfConfig& cfg);
SmpfConfig load_config_file(const std::filesystem::path& path);

// Bundled presets "exp1", "exp2", "exp3" (the three experiment setups).
SmpfConfig config_preset(std::string_view name);
bool is_config_preset(std::string_view name);

// Deterministic stream derivation. Streams are split per purpose and per
// (generation, tree) so results do not depend on scheduling.
namespace streams {
RngStream init_tree(std::uint64_t seed, int tree_index);
RngStream train(std::uint64_t seed, int generation, int tree_index);
RngStream fitness_batch(std::uint64_t seed, int generation);
RngStream evolve(std::uint64_t seed, int generation);
RngStream test_batch(std::uint64_t seed);
RngStream train_metric(std::uint64_t seed);
RngStream split(std::uint64_t seed);
}  // namespace streams

// Random tree with `d` features: the top layer size is drawn uniformly
// from [l1, l2], every (node, lower unit) pair is connected independently
// with probability p0, unconnected lower units are attached to a uniformly
// chosen node, childless nodes are attached to a uniformly chosen lower
// unit, and every edge receives a uniformly chosen class with N(0,1)
// parameters. Deeper trees repeat the procedure per adjacent layer pair.
MetamodelTree random_tree(const SmpfConfig& cfg, int d, RngStream& rng);

struct CrossoverTrace {
  int layer = 0;
  int node = 0;
  int replaced_node_edges = 0;   // outgoing + children of the replaced node
  int installed_node_edges = 0;  // outgoing + children actually installed
};

// Replaces one uniformly chosen hidden node of `t` (layer first, then node)
// with a deep copy of a same-layer node from a uniformly chosen donor,
// inheriting edge classes and parameters. Donor child targets that fall
// outside the recipient's valid range, or that would duplicate an already
// installed target, are remapped uniformly over the free targets (dropped
// only if none remain).
MetamodelTree crossover(const MetamodelTree& t, std::span<const MetamodelTree> donors,
                        RngStream& rng, CrossoverTrace* trace = nullptr);

struct MutationTrace {
  int removed_edges = 0;
  int class_changes = 0;
};

// Applies n_m independent actions: with probability p_del delete a
// uniformly chosen child edge (never an outgoing link and never a node's
// last child; the choice is resampled up to E times before falling back to
// a class change), otherwise reassign a uniformly chosen edge (any edge) to
// a uniformly chosen class with fresh N(0,1) parameters.
MetamodelTree mutate(const MetamodelTree& t, const SmpfConfig& cfg, RngStream& rng,
                     MutationTrace* trace = nullptr);

// One scored population.
struct Generation {
  std::vector<MetamodelTree> trees;
  std::vector<FitnessRecord> records;
  int index = 0;
};

struct OffspringTrace {
  int survivor = 0;  // index into the sorted survivor list
  bool is_crossover = false;
  CrossoverTrace cross;
  MutationTrace mut;
};

struct EvolveTrace {
  std::vector<int> selected;  // population indices of the survivors, best first
  std::vector<OffspringTrace> offspring;
};

// Selection plus reproduction: sorts by fitness ascending (ties broken by
// fewer edges, then lower index), carries the s best unchanged, and fills
// the population back to M with per-survivor offspring (crossover with
// probability p_cross against the other survivors, mutation otherwise).
// Offspring records are reset pending evaluation.
Generation next_generation(const Generation& gen, const SmpfConfig& cfg, RngStream& rng,
                           EvolveTrace* trace = nullptr);

struct RunResult {
  MetamodelTree best;
  FitnessRecord best_record;
  std::vector<FitnessRecord> history;  // best record of each generation
};

// The full loop: generate, then per generation train every tree (k GD steps
// each on its own batch), score everything on one shared fresh batch, stop
// when the best fitness falls below the threshold or the iteration cap is
// reached, otherwise evolve. Returns the final generation's best tree.
// `jobs` bounds worker threads; results are identical for any jobs >= 1.
RunResult run_smpf(const Oracle& oracle, const SmpfConfig& cfg, int jobs = 1);

// Utility used by the runner and the experiment harness: runs fn(i) for
// i in [0, n) on up to `jobs` threads and rethrows the first exception.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace smpf
