#include "gae/centrality.hpp"

#include <cmath>
#include <numeric>

#include "gae/error.hpp"

namespace gae {

const char* centrality_name(CentralityMethod m) {
  switch (m) {
    case CentralityMethod::kInDegree: return "indegree";
    case CentralityMethod::kEigenvector: return "eigenvector";
    case CentralityMethod::kPageRank: return "pagerank";
  }
  throw Error("centrality_name: bad method");
}

CentralityMethod parse_centrality(const std::string& name) {
  if (name == "indegree") return CentralityMethod::kInDegree;
  if (name == "eigenvector") return CentralityMethod::kEigenvector;
  if (name == "pagerank") return CentralityMethod::kPageRank;
  throw ConfigError("unknown centrality method '" + name +
                    "' (expected indegree, eigenvector, or pagerank)");
}

NodeScores indegree_scores(const Graph& g) {
  NodeScores s;
  s.method = CentralityMethod::kInDegree;
  s.values.resize(static_cast<size_t>(g.n_nodes));
  for (int v = 0; v < g.n_nodes; ++v)
    s.values[static_cast<size_t>(v)] = static_cast<double>(g.in_degree(v));
  return s;
}

namespace {

void validate(const PowerIterConfig& cfg) {
  if (!(cfg.tol > 0.0)) throw ConfigError("power iteration: tol must be > 0");
  if (cfg.max_iter <= 0)
    throw ConfigError("power iteration: max_iter must be > 0");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    throw ConfigError("power iteration: alpha must be in (0,1)");
}

double l1_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

}  // namespace

NodeScores eigenvector_scores(const Graph& g, const PowerIterConfig& cfg,
                              double* lambda_out) {
  validate(cfg);
  if (g.edge_count() == 0)
    throw Error("eigenvector_scores: graph has no edges");
  const size_t n = static_cast<size_t>(g.n_nodes);
  std::vector<double> s(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n);

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    // next = (A + I) s: the +I shift keeps eigenvectors intact but makes the
    // dominant eigenvalue strictly largest in magnitude for graphs whose
    // spectrum is symmetric (bipartite), so the iteration cannot cycle.
    for (int v = 0; v < g.n_nodes; ++v) {
      double acc = s[static_cast<size_t>(v)];
      for (int u : g.neighbors_out(v)) acc += s[static_cast<size_t>(u)];
      next[static_cast<size_t>(v)] = acc;
    }
    double norm = l1_norm(next);
    if (norm == 0.0) throw ZeroVectorError("eigenvector iterate collapsed");
    double change = 0.0;
    for (size_t i = 0; i < n; ++i) {
      next[i] /= norm;
      change += std::abs(next[i] - s[i]);
    }
    s.swap(next);
    if (change <= cfg.tol) {
      if (lambda_out) {
        // Rayleigh quotient on the unshifted A: (s^T A s) / (s^T s).
        double num = 0.0, den = 0.0;
        for (int v = 0; v < g.n_nodes; ++v) {
          double av = 0.0;
          for (int u : g.neighbors_out(v)) av += s[static_cast<size_t>(u)];
          num += s[static_cast<size_t>(v)] * av;
          den += s[static_cast<size_t>(v)] * s[static_cast<size_t>(v)];
        }
        *lambda_out = num / den;
      }
      NodeScores out;
      out.method = CentralityMethod::kEigenvector;
      out.values = std::move(s);
      return out;
    }
  }
  throw NonConvergenceError("eigenvector centrality", cfg.max_iter);
}

NodeScores pagerank_scores(const Graph& g, const PowerIterConfig& cfg) {
  validate(cfg);
  const size_t n = static_cast<size_t>(g.n_nodes);
  const double teleport = (1.0 - cfg.alpha) / static_cast<double>(n);
  std::vector<double> s(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n);

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    // Mass dangling nodes would lose is spread uniformly, keeping P
    // column-stochastic.
    double dangling = 0.0;
    for (int v = 0; v < g.n_nodes; ++v)
      if (g.out_degree(v) == 0) dangling += s[static_cast<size_t>(v)];
    double base = teleport + cfg.alpha * dangling / static_cast<double>(n);

    // s'_v = base + alpha * sum over incoming u->v of s_u / outdeg(u).
    for (int v = 0; v < g.n_nodes; ++v) {
      double acc = 0.0;
      for (int u : g.neighbors_in(v))
        acc += s[static_cast<size_t>(u)] / static_cast<double>(g.out_degree(u));
      next[static_cast<size_t>(v)] = base + cfg.alpha * acc;
    }
    double change = 0.0;
    for (size_t i = 0; i < n; ++i) change += std::abs(next[i] - s[i]);
    s.swap(next);
    if (change <= cfg.tol) {
      NodeScores out;
      out.method = CentralityMethod::kPageRank;
      out.values = std::move(s);
      return out;
    }
  }
  throw NonConvergenceError("pagerank", cfg.max_iter);
}

NodeScores node_scores(const Graph& g, CentralityMethod method,
                       const PowerIterConfig& cfg) {
  switch (method) {
    case CentralityMethod::kInDegree: return indegree_scores(g);
    case CentralityMethod::kEigenvector: return eigenvector_scores(g, cfg);
    case CentralityMethod::kPageRank: return pagerank_scores(g, cfg);
  }
  throw Error("node_scores: bad method");
}

}  // namespace gae
