#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "smpf/primitives.hpp"

namespace smpf {

// Downward edge of a hidden node. In the bottom hidden layer `target` is a
// feature index in [0, d); in every higher layer it indexes a node of the
// layer directly below. Each edge carries its own function.
struct ChildEdge {
  int target = 0;
  PrimitiveFunction fn;

  friend bool operator==(const ChildEdge&, const ChildEdge&) = default;
};

// A hidden node aggregates its children by summation, then applies
// `outgoing` on the way to its parent (the root for top-layer nodes).
struct HiddenNode {
  PrimitiveFunction outgoing;
  std::vector<ChildEdge> children;  // nonempty; duplicate targets forbidden

  friend bool operator==(const HiddenNode&, const HiddenNode&) = default;
};

// The metamodel individual: a layered tree whose edges are parameterized
// univariate functions. layers[0] is the bottom hidden layer (children point
// at features); layers.back() is the top layer whose outgoing functions feed
// the summing root. With a single hidden layer the model value is
//
//   g(x) = sum_i outgoing_i( sum_{(j,f) in children_i} f(x_j) )
//
// and deeper trees nest the same pattern once per layer.
//
// Edge enumeration order (used by GradientTape and anything that walks all
// edges): layers bottom to top, nodes in list order, and per node the
// outgoing edge first followed by child edges in list order.
struct MetamodelTree {
  int d = 0;
  std::vector<std::vector<HiddenNode>> layers;

  int depth() const { return static_cast<int>(layers.size()); }

  friend bool operator==(const MetamodelTree&, const MetamodelTree&) = default;
};

// Total number of edges: every node contributes its outgoing link plus its
// child edges.
int edge_count(const MetamodelTree& t);

// Sum of parameter counts over all edges (length of a gradient tape's
// parameter section).
int param_count(const MetamodelTree& t);

// Walks every edge function in enumeration order.
template <typename Fn>
void for_each_edge(MetamodelTree& t, Fn&& fn) {
  for (auto& layer : t.layers) {
    for (auto& node : layer) {
      fn(node.outgoing);
      for (auto& child : node.children) fn(child.fn);
    }
  }
}
template <typename Fn>
void for_each_edge(const MetamodelTree& t, Fn&& fn) {
  for (const auto& layer : t.layers) {
    for (const auto& node : layer) {
      fn(node.outgoing);
      for (const auto& child : node.children) fn(child.fn);
    }
  }
}

// Checks the structural invariants (nonempty layers, nonempty children,
// targets in range, no duplicate targets, finite parameters); throws
// DataError describing the first violation.
void validate_tree(const MetamodelTree& t);

// Forward evaluation. Throws DataError if x.size() != d.
double eval_tree(const MetamodelTree& t, std::span<const double> x);

// Gradients of the model output for one input point.
struct GradientTape {
  std::vector<double> param_grads;  // per edge parameter, enumeration order
  std::vector<double> input_grads;  // d entries, zero for unused features
};

// Scratch buffers reused across backward calls in hot loops.
struct TreeWorkspace {
  std::vector<double> inner;
  std::vector<double> value;
  std::vector<double> adjoint;
  std::vector<PrimitiveEval> edges;
  std::vector<int> layer_node_start;
  std::vector<int> layer_edge_start;
  std::vector<int> layer_param_start;
};

// Single forward+backward pass: returns the model value and fills the tape
// with all parameter gradients and per-feature partials. Each edge function
// is evaluated exactly once per call.
double backward(const MetamodelTree& t, std::span<const double> x, GradientTape& tape,
                TreeWorkspace& ws);
double backward(const MetamodelTree& t, std::span<const double> x, GradientTape& tape);

// Fully expanded closed-form string in the expression grammar; parsing and
// evaluating it reproduces eval_tree up to coefficient rounding.
std::string render_tree(const MetamodelTree& t, int precision);

// Versioned JSON document (see README for the schema). Parameters survive
// a round trip bit-exactly.
std::string serialize_tree(const MetamodelTree& t);
MetamodelTree deserialize_tree(std::string_view text);

// File variants; save is atomic (temp file + rename).
void save_tree(const MetamodelTree& t, const std::filesystem::path& path);
MetamodelTree load_tree(const std::filesystem::path& path);

}  // namespace smpf
