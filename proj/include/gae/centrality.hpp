#pragma once

#include <string>
#include <vector>

#include "gae/graph.hpp"

namespace gae {

enum class CentralityMethod { kInDegree, kEigenvector, kPageRank };

const char* centrality_name(CentralityMethod m);
CentralityMethod parse_centrality(const std::string& name);

/// Node-importance scores. InDegree values are raw counts; Eigenvector and
/// PageRank values are L1-normalized distributions (sum 1, all >= 0).
struct NodeScores {
  std::vector<double> values;
  CentralityMethod method = CentralityMethod::kInDegree;
};

struct PowerIterConfig {
  double tol = 1e-10;    // L1 change between normalized iterates
  int max_iter = 10000;
  double alpha = 0.85;   // PageRank damping only
};

NodeScores indegree_scores(const Graph& g);

/// Power iteration for the dominant eigenvector of A, where row v aggregates
/// the scores of v's out-neighbors (score s_v = sum_u A_vu s_u / lambda).
/// Iterates on A + I from the uniform start: the shift leaves eigenvectors
/// unchanged but separates +/-lambda pairs, so bipartite structures converge
/// instead of oscillating. Returned lambda is the Rayleigh quotient on A.
/// Throws NonConvergenceError when max_iter is exhausted and ZeroVectorError
/// when the iterate collapses.
NodeScores eigenvector_scores(const Graph& g, const PowerIterConfig& cfg,
                              double* lambda_out = nullptr);

/// PageRank fixed point s = alpha*P*s + (1-alpha)*e/n with P the
/// column-stochastic walk matrix (mass flows along edge direction, each node
/// splitting its score over its out-neighbors); dangling nodes spread their
/// mass uniformly. Throws NonConvergenceError when max_iter is exhausted.
NodeScores pagerank_scores(const Graph& g, const PowerIterConfig& cfg);

NodeScores node_scores(const Graph& g, CentralityMethod method,
                       const PowerIterConfig& cfg = {});

}  // namespace gae
