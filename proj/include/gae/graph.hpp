#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gae/mat.hpp"

namespace gae {

enum class Split : std::uint8_t { kTrain, kVal, kTest };

const char* split_name(Split s);
Split parse_split(const std::string& s);

/// Immutable graph: CSR over both edge directions plus dense node features and
/// optional labels / train-val-test tags. Undirected graphs store each edge in
/// both directions. Safe for unrestricted concurrent reads once built.
struct Graph {
  int n_nodes = 0;
  int n_dims = 0;
  bool directed = false;

  // Outgoing CSR: targets of node v sit at out_targets[out_offsets[v] ..
  // out_offsets[v+1]), sorted ascending. Incoming CSR lists the sources of
  // each node's incoming edges, likewise sorted. Both describe the same edge
  // multiset.
  std::vector<int> out_offsets;
  std::vector<int> out_targets;
  std::vector<int> in_offsets;
  std::vector<int> in_targets;

  Mat features;               // N×F, finite
  std::vector<int> labels;    // empty when absent; else size N, values in [0,C)
  std::vector<Split> split;   // empty when absent; else size N

  int edge_count() const { return static_cast<int>(out_targets.size()); }
  int out_degree(int v) const;
  int in_degree(int v) const;
  std::span<const int> neighbors_out(int v) const;
  std::span<const int> neighbors_in(int v) const;
  bool has_edge(int u, int v) const;  // directed u -> v, binary search
};

/// Validates, optionally symmetrizes, sorts, and indexes an edge list.
/// Duplicate edges are errors ((u,v) and (v,u) are duplicates when
/// undirected).
Graph build_graph(int n_nodes, bool directed,
                  std::vector<std::pair<int, int>> edges, Mat features,
                  std::vector<int> labels = {}, std::vector<Split> split = {});

std::vector<int> in_degree(const Graph& g);

/// Returns a copy where every node has the edge (v,v) exactly once.
/// Idempotent.
Graph with_self_loops(const Graph& g);

/// Directory bundle: edges.tsv ("u<TAB>v" per line), features.tsv (N rows of
/// F tab-separated reals), optional labels.tsv (one class id per node line),
/// optional split.tsv (one of train/val/test per node line), optional
/// meta.tsv ("directed<TAB>true|false"; defaults to false).
Graph load_graph_bundle(const std::string& dir);

/// Inverse of load_graph_bundle, emitting canonical edge order (sorted (u,v);
/// one line per undirected edge with u <= v) and shortest round-trip reals.
void save_graph_bundle(const Graph& g, const std::string& dir);

struct SbmConfig {
  int n_nodes = 0;
  int n_blocks = 1;
  double p_in = 0.0;   // intra-block edge probability
  double p_out = 0.0;  // inter-block edge probability
  int feat_dim = 1;
  double signal = 0.0;      // per-block feature mean shift magnitude
  double noise_sigma = 0.0; // feature noise std
  std::uint64_t seed = 0;
};

/// Stochastic block model: undirected pairwise Bernoulli edges, labels =
/// block ids, feature means signal * 1[d mod n_blocks == block], Gaussian
/// noise, and a seeded uniform 10/10/80 train/val/test split. Deterministic
/// for a fixed config.
Graph sbm_generate(const SbmConfig& cfg);

}  // namespace gae
