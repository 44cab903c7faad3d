#include "gae/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "gae/error.hpp"
#include "gae/rng.hpp"

namespace gae {

namespace fs = std::filesystem;

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  throw Error("split_name: bad tag");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw IoError("split tag must be train/val/test, got '" + s + "'");
}

int Graph::out_degree(int v) const {
  return out_offsets[static_cast<size_t>(v) + 1] - out_offsets[static_cast<size_t>(v)];
}

int Graph::in_degree(int v) const {
  return in_offsets[static_cast<size_t>(v) + 1] - in_offsets[static_cast<size_t>(v)];
}

std::span<const int> Graph::neighbors_out(int v) const {
  if (v < 0 || v >= n_nodes) throw Error("neighbors_out: node out of range");
  return {out_targets.data() + out_offsets[static_cast<size_t>(v)],
          static_cast<size_t>(out_degree(v))};
}

std::span<const int> Graph::neighbors_in(int v) const {
  if (v < 0 || v >= n_nodes) throw Error("neighbors_in: node out of range");
  return {in_targets.data() + in_offsets[static_cast<size_t>(v)],
          static_cast<size_t>(in_degree(v))};
}

bool Graph::has_edge(int u, int v) const {
  auto nb = neighbors_out(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

namespace {

void build_csr(int n, const std::vector<std::pair<int, int>>& by_key,
               std::vector<int>& offsets, std::vector<int>& values) {
  offsets.assign(static_cast<size_t>(n) + 1, 0);
  for (const auto& [key, _] : by_key) ++offsets[static_cast<size_t>(key) + 1];
  for (int i = 0; i < n; ++i)
    offsets[static_cast<size_t>(i) + 1] += offsets[static_cast<size_t>(i)];
  values.resize(by_key.size());
  std::vector<int> cursor(offsets.begin(), offsets.end() - 1);
  for (const auto& [key, value] : by_key)
    values[static_cast<size_t>(cursor[static_cast<size_t>(key)]++)] = value;
}

}  // namespace

Graph build_graph(int n_nodes, bool directed,
                  std::vector<std::pair<int, int>> edges, Mat features,
                  std::vector<int> labels, std::vector<Split> split) {
  if (n_nodes <= 0) throw Error("build_graph: need at least one node");
  if (features.rows != n_nodes)
    throw Error("build_graph: features have " + std::to_string(features.rows) +
                " rows for " + std::to_string(n_nodes) + " nodes");
  if (!all_finite(features))
    throw Error("build_graph: non-finite feature value");
  if (!labels.empty() && static_cast<int>(labels.size()) != n_nodes)
    throw Error("build_graph: label count mismatch");
  for (int lbl : labels)
    if (lbl < 0) throw Error("build_graph: negative label");
  if (!split.empty() && static_cast<int>(split.size()) != n_nodes)
    throw Error("build_graph: split tag count mismatch");

  for (auto& [u, v] : edges) {
    if (u < 0 || u >= n_nodes || v < 0 || v >= n_nodes)
      throw Error("build_graph: edge (" + std::to_string(u) + "," +
                  std::to_string(v) + ") out of range for N=" +
                  std::to_string(n_nodes));
    // For undirected graphs (u,v) and (v,u) name the same edge.
    if (!directed && u > v) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  auto dup = std::adjacent_find(edges.begin(), edges.end());
  if (dup != edges.end())
    throw Error("build_graph: duplicate edge (" + std::to_string(dup->first) +
                "," + std::to_string(dup->second) + ")");

  // Symmetrize: store both directions of every undirected non-loop edge.
  std::vector<std::pair<int, int>> directed_edges;
  directed_edges.reserve(edges.size() * (directed ? 1 : 2));
  for (const auto& [u, v] : edges) {
    directed_edges.emplace_back(u, v);
    if (!directed && u != v) directed_edges.emplace_back(v, u);
  }

  Graph g;
  g.n_nodes = n_nodes;
  g.n_dims = features.cols;
  g.directed = directed;
  g.features = std::move(features);
  g.labels = std::move(labels);
  g.split = std::move(split);

  std::sort(directed_edges.begin(), directed_edges.end());
  build_csr(n_nodes, directed_edges, g.out_offsets, g.out_targets);
  for (auto& [u, v] : directed_edges) std::swap(u, v);
  std::sort(directed_edges.begin(), directed_edges.end());
  build_csr(n_nodes, directed_edges, g.in_offsets, g.in_targets);
  return g;
}

std::vector<int> in_degree(const Graph& g) {
  std::vector<int> deg(static_cast<size_t>(g.n_nodes));
  for (int v = 0; v < g.n_nodes; ++v) deg[static_cast<size_t>(v)] = g.in_degree(v);
  return deg;
}

Graph with_self_loops(const Graph& g) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(g.out_targets.size() + static_cast<size_t>(g.n_nodes));
  for (int u = 0; u < g.n_nodes; ++u)
    for (int v : g.neighbors_out(u)) {
      if (!g.directed && v < u) continue;  // each undirected edge once
      edges.emplace_back(u, v);
    }
  for (int v = 0; v < g.n_nodes; ++v)
    if (!g.has_edge(v, v)) edges.emplace_back(v, v);
  return build_graph(g.n_nodes, g.directed, std::move(edges), g.features,
                     g.labels, g.split);
}

// ---------------------------------------------------------------------------
// Bundle IO
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot open " + p.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r')
      throw IoError(p.string() + ": CRLF line endings are not supported");
    lines.push_back(line);
  }
  return lines;
}

long parse_int_field(const std::string& s, const fs::path& p, int line_no) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError(p.string() + ":" + std::to_string(line_no) +
                  ": expected integer, got '" + s + "'");
  return v;
}

double parse_real_field(const std::string& s, const fs::path& p, int line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError(p.string() + ":" + std::to_string(line_no) +
                  ": expected real number, got '" + s + "'");
  if (!std::isfinite(v))
    throw IoError(p.string() + ":" + std::to_string(line_no) +
                  ": non-finite value '" + s + "'");
  return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> f;
  size_t start = 0;
  while (true) {
    size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      f.push_back(line.substr(start));
      return f;
    }
    f.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string format_real(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("format_real failed");
  return std::string(buf, ptr);
}

}  // namespace

Graph load_graph_bundle(const std::string& dir) {
  fs::path root(dir);
  fs::path feat_path = root / "features.tsv";
  fs::path edge_path = root / "edges.tsv";
  if (!fs::exists(feat_path)) throw IoError("missing " + feat_path.string());
  if (!fs::exists(edge_path)) throw IoError("missing " + edge_path.string());

  std::vector<std::string> feat_lines = read_lines(feat_path);
  if (feat_lines.empty()) throw IoError(feat_path.string() + ": no rows");
  int n = static_cast<int>(feat_lines.size());
  std::vector<std::string> first = split_tabs(feat_lines[0]);
  int f = static_cast<int>(first.size());
  Mat features(n, f);
  for (int r = 0; r < n; ++r) {
    std::vector<std::string> fields = split_tabs(feat_lines[static_cast<size_t>(r)]);
    if (static_cast<int>(fields.size()) != f)
      throw IoError(feat_path.string() + ":" + std::to_string(r + 1) +
                    ": ragged row (" + std::to_string(fields.size()) +
                    " fields, expected " + std::to_string(f) + ")");
    for (int c = 0; c < f; ++c)
      features(r, c) =
          parse_real_field(fields[static_cast<size_t>(c)], feat_path, r + 1);
  }

  bool directed = false;
  fs::path meta_path = root / "meta.tsv";
  if (fs::exists(meta_path)) {
    int line_no = 0;
    for (const std::string& line : read_lines(meta_path)) {
      ++line_no;
      if (line.empty()) continue;
      std::vector<std::string> kv = split_tabs(line);
      if (kv.size() != 2)
        throw IoError(meta_path.string() + ":" + std::to_string(line_no) +
                      ": expected key<TAB>value");
      if (kv[0] == "directed") {
        if (kv[1] == "true") directed = true;
        else if (kv[1] == "false") directed = false;
        else
          throw IoError(meta_path.string() + ": directed must be true/false");
      } else {
        throw IoError(meta_path.string() + ": unknown key '" + kv[0] + "'");
      }
    }
  }

  std::vector<std::pair<int, int>> edges;
  int line_no = 0;
  for (const std::string& line : read_lines(edge_path)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> uv = split_tabs(line);
    if (uv.size() != 2)
      throw IoError(edge_path.string() + ":" + std::to_string(line_no) +
                    ": expected u<TAB>v");
    long u = parse_int_field(uv[0], edge_path, line_no);
    long v = parse_int_field(uv[1], edge_path, line_no);
    if (u < 0 || u >= n || v < 0 || v >= n)
      throw IoError(edge_path.string() + ":" + std::to_string(line_no) +
                    ": node id out of range (N=" + std::to_string(n) + ")");
    edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
  }

  std::vector<int> labels;
  fs::path label_path = root / "labels.tsv";
  if (fs::exists(label_path)) {
    std::vector<std::string> lines = read_lines(label_path);
    if (static_cast<int>(lines.size()) != n)
      throw IoError(label_path.string() + ": expected " + std::to_string(n) +
                    " lines, got " + std::to_string(lines.size()));
    labels.reserve(lines.size());
    for (int r = 0; r < n; ++r) {
      long lbl = parse_int_field(lines[static_cast<size_t>(r)], label_path, r + 1);
      if (lbl < 0)
        throw IoError(label_path.string() + ":" + std::to_string(r + 1) +
                      ": negative label");
      labels.push_back(static_cast<int>(lbl));
    }
  }

  std::vector<Split> split;
  fs::path split_path = root / "split.tsv";
  if (fs::exists(split_path)) {
    std::vector<std::string> lines = read_lines(split_path);
    if (static_cast<int>(lines.size()) != n)
      throw IoError(split_path.string() + ": expected " + std::to_string(n) +
                    " lines, got " + std::to_string(lines.size()));
    split.reserve(lines.size());
    for (const std::string& line : lines) split.push_back(parse_split(line));
  }

  try {
    return build_graph(n, directed, std::move(edges), std::move(features),
                       std::move(labels), std::move(split));
  } catch (const Error& e) {
    throw IoError(dir + ": " + e.what());
  }
}

void save_graph_bundle(const Graph& g, const std::string& dir) {
  fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());

  auto open = [&](const char* name) {
    std::ofstream os(root / name, std::ios::binary);
    if (!os) throw IoError("cannot write " + (root / name).string());
    return os;
  };

  {
    std::ofstream os = open("edges.tsv");
    for (int u = 0; u < g.n_nodes; ++u)
      for (int v : g.neighbors_out(u)) {
        if (!g.directed && v < u) continue;
        os << u << '\t' << v << '\n';
      }
  }
  {
    std::ofstream os = open("features.tsv");
    for (int r = 0; r < g.features.rows; ++r) {
      for (int c = 0; c < g.features.cols; ++c) {
        if (c) os << '\t';
        os << format_real(g.features(r, c));
      }
      os << '\n';
    }
  }
  if (!g.labels.empty()) {
    std::ofstream os = open("labels.tsv");
    for (int lbl : g.labels) os << lbl << '\n';
  }
  if (!g.split.empty()) {
    std::ofstream os = open("split.tsv");
    for (Split s : g.split) os << split_name(s) << '\n';
  }
  {
    std::ofstream os = open("meta.tsv");
    os << "directed\t" << (g.directed ? "true" : "false") << '\n';
  }
}

// ---------------------------------------------------------------------------
// Synthetic graphs
// ---------------------------------------------------------------------------

Graph sbm_generate(const SbmConfig& cfg) {
  if (cfg.n_nodes <= 0) throw ConfigError("sbm: n_nodes must be positive");
  if (cfg.n_blocks <= 0 || cfg.n_blocks > cfg.n_nodes)
    throw ConfigError("sbm: n_blocks must be in [1, n_nodes]");
  if (cfg.feat_dim <= 0) throw ConfigError("sbm: feat_dim must be positive");
  if (!(cfg.p_out >= 0.0 && cfg.p_out <= cfg.p_in && cfg.p_in <= 1.0))
    throw ConfigError("sbm: need 0 <= p_out <= p_in <= 1");
  if (cfg.noise_sigma < 0.0) throw ConfigError("sbm: noise_sigma must be >= 0");

  int n = cfg.n_nodes;
  // floor(n/B) nodes per block, remainder in the last block.
  int per_block = n / cfg.n_blocks;
  std::vector<int> block(static_cast<size_t>(n));
  for (int v = 0; v < n; ++v)
    block[static_cast<size_t>(v)] = std::min(v / per_block, cfg.n_blocks - 1);

  RngStream rng(cfg.seed, "sbm");
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      double p = block[static_cast<size_t>(u)] == block[static_cast<size_t>(v)]
                     ? cfg.p_in
                     : cfg.p_out;
      if (rng.bernoulli(p)) edges.emplace_back(u, v);
    }

  Mat features(n, cfg.feat_dim);
  for (int v = 0; v < n; ++v)
    for (int d = 0; d < cfg.feat_dim; ++d) {
      double mean =
          (d % cfg.n_blocks == block[static_cast<size_t>(v)]) ? cfg.signal : 0.0;
      features(v, d) = mean + rng.normal(0.0, cfg.noise_sigma);
    }

  // Seeded uniform 10/10/80 split.
  std::vector<int> order(static_cast<size_t>(n));
  for (int v = 0; v < n; ++v) order[static_cast<size_t>(v)] = v;
  rng.shuffle(order);
  int n_train = n / 10, n_val = n / 10;
  std::vector<Split> split(static_cast<size_t>(n), Split::kTest);
  for (int i = 0; i < n_train; ++i)
    split[static_cast<size_t>(order[static_cast<size_t>(i)])] = Split::kTrain;
  for (int i = n_train; i < n_train + n_val; ++i)
    split[static_cast<size_t>(order[static_cast<size_t>(i)])] = Split::kVal;

  return build_graph(n, /*directed=*/false, std::move(edges),
                     std::move(features), std::move(block), std::move(split));
}

}  // namespace gae
