#include "smpf/tree.hpp"

#include <cmath>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

#include "smpf/csv.hpp"
#include "smpf/errors.hpp"

namespace smpf {

int edge_count(const MetamodelTree& t) {
  int count = 0;
  for (const auto& layer : t.layers) {
    for (const auto& node : layer) {
      count += 1 + static_cast<int>(node.children.size());
    }
  }
  return count;
}

int param_count(const MetamodelTree& t) {
  int count = 0;
  for_each_edge(t, [&](const PrimitiveFunction& f) { count += f.arity(); });
  return count;
}

void validate_tree(const MetamodelTree& t) {
  if (t.d < 1) throw DataError("tree: feature count must be >= 1");
  if (t.layers.empty()) throw DataError("tree: at least one hidden layer required");
  for (std::size_t li = 0; li < t.layers.size(); ++li) {
    const auto& layer = t.layers[li];
    if (layer.empty()) throw DataError("tree: hidden layer " + std::to_string(li) + " is empty");
    const int target_range =
        li == 0 ? t.d : static_cast<int>(t.layers[li - 1].size());
    for (std::size_t ni = 0; ni < layer.size(); ++ni) {
      const auto& node = layer[ni];
      const std::string where =
          "tree: layer " + std::to_string(li) + " node " + std::to_string(ni);
      if (node.children.empty()) throw DataError(where + " has no child edges");
      std::set<int> seen;
      for (const auto& child : node.children) {
        if (child.target < 0 || child.target >= target_range) {
          throw DataError(where + " child target " + std::to_string(child.target) +
                          " out of range [0, " + std::to_string(target_range) + ")");
        }
        if (!seen.insert(child.target).second) {
          throw DataError(where + " has duplicate child target " +
                          std::to_string(child.target));
        }
      }
    }
  }
  bool finite = true;
  for_each_edge(t, [&](const PrimitiveFunction& f) {
    for (int i = 0; i < f.arity(); ++i) finite &= std::isfinite(f.params[i]);
  });
  if (!finite) throw DataError("tree: non-finite edge parameter");
}

double eval_tree(const MetamodelTree& t, std::span<const double> x) {
  if (static_cast<int>(x.size()) != t.d) {
    throw DataError("eval_tree: expected " + std::to_string(t.d) + " features, got " +
                    std::to_string(x.size()));
  }
  std::vector<double> below(x.begin(), x.end());
  std::vector<double> current;
  for (std::size_t li = 0; li < t.layers.size(); ++li) {
    const auto& layer = t.layers[li];
    current.resize(layer.size());
    for (std::size_t ni = 0; ni < layer.size(); ++ni) {
      const auto& node = layer[ni];
      double inner = 0.0;
      for (const auto& child : node.children) {
        inner += eval_primitive(child.fn, below[child.target]);
      }
      current[ni] = eval_primitive(node.outgoing, sanitize(inner));
    }
    below = current;
  }
  double root = 0.0;
  for (double v : below) root += v;
  return sanitize(root);
}

double backward(const MetamodelTree& t, std::span<const double> x, GradientTape& tape,
                TreeWorkspace& ws) {
  if (static_cast<int>(x.size()) != t.d) {
    throw DataError("backward: expected " + std::to_string(t.d) + " features, got " +
                    std::to_string(x.size()));
  }

  const int layer_count = t.depth();
  ws.layer_node_start.assign(layer_count + 1, 0);
  ws.layer_edge_start.assign(layer_count + 1, 0);
  ws.layer_param_start.assign(layer_count + 1, 0);
  for (int li = 0; li < layer_count; ++li) {
    int nodes = static_cast<int>(t.layers[li].size());
    int edges = 0, params = 0;
    for (const auto& node : t.layers[li]) {
      edges += 1 + static_cast<int>(node.children.size());
      params += node.outgoing.arity();
      for (const auto& child : node.children) params += child.fn.arity();
    }
    ws.layer_node_start[li + 1] = ws.layer_node_start[li] + nodes;
    ws.layer_edge_start[li + 1] = ws.layer_edge_start[li] + edges;
    ws.layer_param_start[li + 1] = ws.layer_param_start[li] + params;
  }
  const int total_nodes = ws.layer_node_start[layer_count];

  ws.inner.assign(total_nodes, 0.0);
  ws.value.assign(total_nodes, 0.0);
  ws.adjoint.assign(total_nodes, 0.0);
  ws.edges.resize(ws.layer_edge_start[layer_count]);
  tape.param_grads.assign(ws.layer_param_start[layer_count], 0.0);
  tape.input_grads.assign(t.d, 0.0);

  // Forward pass, caching one PrimitiveEval per edge at its enumeration slot
  // (per node: outgoing first, then children).
  double root = 0.0;
  for (int li = 0; li < layer_count; ++li) {
    const auto& layer = t.layers[li];
    int edge_slot = ws.layer_edge_start[li];
    for (std::size_t ni = 0; ni < layer.size(); ++ni) {
      const auto& node = layer[ni];
      const int outgoing_slot = edge_slot++;
      double inner = 0.0;
      for (const auto& child : node.children) {
        const double in = li == 0 ? x[child.target]
                                  : ws.value[ws.layer_node_start[li - 1] + child.target];
        ws.edges[edge_slot] = eval_primitive_all(child.fn, in);
        inner += ws.edges[edge_slot].value;
        ++edge_slot;
      }
      inner = sanitize(inner);
      ws.edges[outgoing_slot] = eval_primitive_all(node.outgoing, inner);
      const int slot = ws.layer_node_start[li] + static_cast<int>(ni);
      ws.inner[slot] = inner;
      ws.value[slot] = ws.edges[outgoing_slot].value;
      if (li == layer_count - 1) root += ws.value[slot];
    }
  }
  root = sanitize(root);

  // Reverse pass: adjoint of a node value is d(root)/d(node output).
  for (int ni = ws.layer_node_start[layer_count - 1]; ni < total_nodes; ++ni) {
    ws.adjoint[ni] = 1.0;
  }
  for (int li = layer_count - 1; li >= 0; --li) {
    const auto& layer = t.layers[li];
    int edge_slot = ws.layer_edge_start[li];
    int param_slot = ws.layer_param_start[li];
    for (std::size_t ni = 0; ni < layer.size(); ++ni) {
      const auto& node = layer[ni];
      const double w = ws.adjoint[ws.layer_node_start[li] + static_cast<int>(ni)];
      const PrimitiveEval& out_eval = ws.edges[edge_slot++];
      for (int pi = 0; pi < node.outgoing.arity(); ++pi) {
        tape.param_grads[param_slot++] = sanitize(w * out_eval.dparam[pi]);
      }
      const double w_inner = w * out_eval.dx;
      for (const auto& child : node.children) {
        const PrimitiveEval& child_eval = ws.edges[edge_slot++];
        for (int pi = 0; pi < child.fn.arity(); ++pi) {
          tape.param_grads[param_slot++] = sanitize(w_inner * child_eval.dparam[pi]);
        }
        const double flow = w_inner * child_eval.dx;
        if (li == 0) {
          tape.input_grads[child.target] = sanitize(tape.input_grads[child.target] + flow);
        } else {
          ws.adjoint[ws.layer_node_start[li - 1] + child.target] += flow;
        }
      }
    }
  }
  return root;
}

double backward(const MetamodelTree& t, std::span<const double> x, GradientTape& tape) {
  TreeWorkspace ws;
  return backward(t, x, tape, ws);
}

namespace {

// Joins rendered summands, folding a leading minus into the separator.
std::string join_sum(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& part : parts) {
    if (out.empty()) {
      out = part;
    } else if (!part.empty() && part[0] == '-') {
      out += " - ";
      out += part.substr(1);
    } else {
      out += " + ";
      out += part;
    }
  }
  return out.empty() ? "0" : out;
}

std::string render_node(const MetamodelTree& t, int li, int ni, int precision) {
  const HiddenNode& node = t.layers[li][ni];
  std::vector<std::string> parts;
  parts.reserve(node.children.size());
  for (const auto& child : node.children) {
    const std::string arg = li == 0 ? "x_" + std::to_string(child.target)
                                    : render_node(t, li - 1, child.target, precision);
    parts.push_back(render_primitive(child.fn, arg, precision));
  }
  return render_primitive(node.outgoing, join_sum(parts), precision);
}

}  // namespace

std::string render_tree(const MetamodelTree& t, int precision) {
  std::vector<std::string> parts;
  const int top = t.depth() - 1;
  parts.reserve(t.layers[top].size());
  for (std::size_t ni = 0; ni < t.layers[top].size(); ++ni) {
    parts.push_back(render_node(t, top, static_cast<int>(ni), precision));
  }
  return join_sum(parts);
}

namespace {

nlohmann::json function_to_json(const PrimitiveFunction& f) {
  nlohmann::json j;
  j["class"] = class_name(f.cls);
  j["params"] = std::vector<double>(f.params.begin(), f.params.begin() + f.arity());
  return j;
}

PrimitiveFunction function_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("class") || !j.contains("params")) {
    throw DataError(where + ": expected {class, params}");
  }
  const auto cls = class_from_name(j["class"].get<std::string>());
  if (!cls) throw DataError(where + ": unknown class '" + j["class"].get<std::string>() + "'");
  PrimitiveFunction f;
  f.cls = *cls;
  const auto params = j["params"].get<std::vector<double>>();
  if (static_cast<int>(params.size()) != f.arity()) {
    throw DataError(where + ": class " + std::string(class_name(f.cls)) + " takes " +
                    std::to_string(f.arity()) + " parameters, got " +
                    std::to_string(params.size()));
  }
  for (int i = 0; i < f.arity(); ++i) f.params[i] = params[i];
  return f;
}

}  // namespace

std::string serialize_tree(const MetamodelTree& t) {
  nlohmann::json j;
  j["version"] = 1;
  j["d"] = t.d;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : t.layers) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : layer) {
      nlohmann::json n;
      n["outgoing"] = function_to_json(node.outgoing);
      nlohmann::json children = nlohmann::json::array();
      for (const auto& child : node.children) {
        nlohmann::json c = function_to_json(child.fn);
        c["target"] = child.target;
        children.push_back(std::move(c));
      }
      n["children"] = std::move(children);
      nodes.push_back(std::move(n));
    }
    layers.push_back({{"nodes", std::move(nodes)}});
  }
  j["layers"] = std::move(layers);
  return j.dump(2);
}

MetamodelTree deserialize_tree(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("tree document: ") + e.what(), e.byte);
  }
  if (!j.is_object()) throw DataError("tree document: expected a JSON object");
  if (!j.contains("version") || !j["version"].is_number_integer()) {
    throw DataError("tree document: missing integer 'version'");
  }
  if (j["version"].get<int>() != 1) {
    throw DataError("tree document: unsupported version " +
                    std::to_string(j["version"].get<int>()));
  }
  for (const auto& [key, _] : j.items()) {
    if (key != "version" && key != "d" && key != "layers") {
      throw DataError("tree document: unknown field '" + key + "'");
    }
  }
  if (!j.contains("d") || !j.contains("layers") || !j["layers"].is_array()) {
    throw DataError("tree document: missing 'd' or 'layers'");
  }

  MetamodelTree t;
  t.d = j["d"].get<int>();
  for (std::size_t li = 0; li < j["layers"].size(); ++li) {
    const auto& jl = j["layers"][li];
    if (!jl.is_object() || !jl.contains("nodes") || !jl["nodes"].is_array()) {
      throw DataError("tree document: layer " + std::to_string(li) + " missing 'nodes'");
    }
    std::vector<HiddenNode> layer;
    for (std::size_t ni = 0; ni < jl["nodes"].size(); ++ni) {
      const auto& jn = jl["nodes"][ni];
      const std::string where =
          "tree document: layer " + std::to_string(li) + " node " + std::to_string(ni);
      if (!jn.is_object() || !jn.contains("outgoing") || !jn.contains("children") ||
          !jn["children"].is_array()) {
        throw DataError(where + ": expected {outgoing, children}");
      }
      HiddenNode node;
      node.outgoing = function_from_json(jn["outgoing"], where + " outgoing");
      for (const auto& jc : jn["children"]) {
        if (!jc.is_object() || !jc.contains("target")) {
          throw DataError(where + ": child edge missing 'target'");
        }
        ChildEdge child;
        child.target = jc["target"].get<int>();
        child.fn = function_from_json(jc, where + " child");
        node.children.push_back(std::move(child));
      }
      layer.push_back(std::move(node));
    }
    t.layers.push_back(std::move(layer));
  }
  validate_tree(t);
  return t;
}

void save_tree(const MetamodelTree& t, const std::filesystem::path& path) {
  atomic_write_file(path, serialize_tree(t) + "\n");
}

MetamodelTree load_tree(const std::filesystem::path& path) {
  return deserialize_tree(read_file(path));
}

}  // namespace smpf
