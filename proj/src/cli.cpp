#include "gae/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gae/centrality.hpp"
#include "gae/error.hpp"
#include "gae/gat.hpp"
#include "gae/kernels.hpp"
#include "gae/masking.hpp"
#include "gae/params.hpp"
#include "gae/rng.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace gae {

// ---------------------------------------------------------------------------
// Small text helpers
// ---------------------------------------------------------------------------

namespace {

std::string format_real(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("format_real failed");
  return std::string(buf, ptr);
}

std::string trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string slurp_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void spew_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

/// Error messages embedded in TSV cells must stay single-field.
std::string sanitize_cell(std::string s) {
  for (char& c : s)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return s;
}

int edit_distance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string nearest_of(const std::string& key,
                       std::span<const char* const> candidates) {
  std::string best;
  int best_d = std::numeric_limits<int>::max();
  for (const char* c : candidates) {
    int d = edit_distance(key, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

double parse_real_value(const std::string& key, const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("key '" + key + "': expected a real number, got '" + s +
                      "'");
  return v;
}

int parse_int_value(const std::string& key, const std::string& s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("key '" + key + "': expected an integer, got '" + s +
                      "'");
  return v;
}

std::uint64_t parse_u64_value(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("key '" + key +
                      "': expected a non-negative integer, got '" + s + "'");
  return v;
}

bool parse_bool_value(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + s +
                    "'");
}

std::vector<std::string> split_comma_list(const std::string& key,
                                          const std::string& s) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= s.size()) {
    size_t comma = s.find(',', start);
    std::string tok = trim(s.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start));
    if (tok.empty())
      throw ConfigError("key '" + key + "': empty entry in list '" + s + "'");
    out.push_back(tok);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// key=value configuration
// ---------------------------------------------------------------------------

constexpr const char* kConfigKeys[] = {
    "dataset", "pf",   "pn",    "num",  "epochs",     "lr",      "weight_decay",
    "hidden",  "heads", "seed", "centrality", "variant", "stop_grad_target"};

void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
  TrainConfig& t = cfg.train;
  if (key == "dataset") cfg.dataset = value;
  else if (key == "pf") t.pf = parse_real_value(key, value);
  else if (key == "pn") t.pn = parse_real_value(key, value);
  else if (key == "num") t.num = parse_int_value(key, value);
  else if (key == "epochs") t.epochs = parse_int_value(key, value);
  else if (key == "lr") t.lr = parse_real_value(key, value);
  else if (key == "weight_decay") t.weight_decay = parse_real_value(key, value);
  else if (key == "hidden") t.hidden = parse_int_value(key, value);
  else if (key == "heads") t.heads = parse_int_value(key, value);
  else if (key == "seed") t.seed = parse_u64_value(key, value);
  else if (key == "centrality") t.centrality = parse_centrality(value);
  else if (key == "variant") t.variant = parse_variant(value);
  else if (key == "stop_grad_target")
    t.stop_grad_target = parse_bool_value(key, value);
  else
    throw ConfigError("unknown config key '" + key + "' (did you mean '" +
                      nearest_of(key, kConfigKeys) + "'?)");
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": duplicate key '" + key + "'");
    apply_kv(cfg, key, value);
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(slurp_file(path));
}

void apply_config_override(RunConfig& cfg, const std::string& key_eq_value) {
  size_t eq = key_eq_value.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override expects key=value, got '" + key_eq_value + "'");
  apply_kv(cfg, trim(key_eq_value.substr(0, eq)),
           trim(key_eq_value.substr(eq + 1)));
}

// ---------------------------------------------------------------------------
// Datasets: bundle directories and sbm: generator specs
// ---------------------------------------------------------------------------

bool is_sbm_spec(const std::string& dataset) {
  return dataset.rfind("sbm:", 0) == 0;
}

SbmConfig parse_sbm_spec(const std::string& spec, std::uint64_t seed) {
  static constexpr const char* kSbmKeys[] = {"nodes", "blocks", "p_in", "p_out",
                                             "dim",   "signal", "noise"};
  if (!is_sbm_spec(spec))
    throw ConfigError("not an sbm: spec: '" + spec + "'");
  SbmConfig c;
  c.seed = seed;
  std::string body = spec.substr(4);
  if (trim(body).empty()) throw ConfigError("sbm spec needs nodes=N");
  std::set<std::string> seen;
  for (const std::string& tok : split_comma_list("sbm", body)) {
    size_t eq = tok.find('=');
    if (eq == std::string::npos)
      throw ConfigError("sbm spec entry '" + tok + "': expected key=value");
    std::string key = trim(tok.substr(0, eq));
    std::string value = trim(tok.substr(eq + 1));
    if (!seen.insert(key).second)
      throw ConfigError("sbm spec: duplicate key '" + key + "'");
    if (key == "nodes") c.n_nodes = parse_int_value(key, value);
    else if (key == "blocks") c.n_blocks = parse_int_value(key, value);
    else if (key == "p_in") c.p_in = parse_real_value(key, value);
    else if (key == "p_out") c.p_out = parse_real_value(key, value);
    else if (key == "dim") c.feat_dim = parse_int_value(key, value);
    else if (key == "signal") c.signal = parse_real_value(key, value);
    else if (key == "noise") c.noise_sigma = parse_real_value(key, value);
    else
      throw ConfigError("unknown sbm key '" + key + "' (did you mean '" +
                        nearest_of(key, kSbmKeys) + "'?)");
  }
  if (!seen.count("nodes")) throw ConfigError("sbm spec needs nodes=N");
  return c;
}

Graph load_dataset(const std::string& dataset, std::uint64_t seed) {
  if (is_sbm_spec(dataset)) return sbm_generate(parse_sbm_spec(dataset, seed));
  return load_graph_bundle(dataset);
}

// ---------------------------------------------------------------------------
// Run manifests
// ---------------------------------------------------------------------------

namespace {

struct CommandContext {
  std::string command;
  RunConfig cfg;
  ProbeConfig probe;
  ordered_json args = ordered_json::object();
  fs::path out;
  bool strict = false;
};

ordered_json train_to_json(const TrainConfig& t) {
  return ordered_json{{"pf", t.pf},
                      {"pn", t.pn},
                      {"num", t.num},
                      {"epochs", t.epochs},
                      {"lr", t.lr},
                      {"weight_decay", t.weight_decay},
                      {"hidden", t.hidden},
                      {"heads", t.heads},
                      {"seed", t.seed},
                      {"centrality", centrality_name(t.centrality)},
                      {"variant", variant_name(t.variant)},
                      {"stop_grad_target", t.stop_grad_target}};
}

TrainConfig train_from_json(const ordered_json& j) {
  TrainConfig t;
  t.pf = j.at("pf").get<double>();
  t.pn = j.at("pn").get<double>();
  t.num = j.at("num").get<int>();
  t.epochs = j.at("epochs").get<int>();
  t.lr = j.at("lr").get<double>();
  t.weight_decay = j.at("weight_decay").get<double>();
  t.hidden = j.at("hidden").get<int>();
  t.heads = j.at("heads").get<int>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.centrality = parse_centrality(j.at("centrality").get<std::string>());
  t.variant = parse_variant(j.at("variant").get<std::string>());
  t.stop_grad_target = j.at("stop_grad_target").get<bool>();
  return t;
}

ordered_json probe_to_json(const ProbeConfig& p) {
  return ordered_json{{"l2_sweep", p.l2_sweep},
                      {"probe_epochs", p.probe_epochs},
                      {"probe_lr", p.probe_lr},
                      {"seed", p.seed},
                      {"metric", metric_name(p.metric)}};
}

ProbeConfig probe_from_json(const ordered_json& j) {
  ProbeConfig p;
  p.l2_sweep = j.at("l2_sweep").get<std::vector<double>>();
  p.probe_epochs = j.at("probe_epochs").get<int>();
  p.probe_lr = j.at("probe_lr").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.metric = parse_metric(j.at("metric").get<std::string>());
  return p;
}

/// Every command serializes a manifest next to its outputs; `deterministic`
/// lists the files a strict replay must reproduce byte-for-byte (timing
/// reports are excluded).
void write_manifest(const CommandContext& ctx,
                    const std::vector<std::string>& outputs,
                    const std::vector<std::string>& deterministic) {
  std::uint64_t s = ctx.cfg.train.seed;
  ordered_json m;
  m["command"] = ctx.command;
  m["version"] = kVersion;
  m["strict"] = ctx.strict;
  m["out_dir"] = fs::absolute(ctx.out).string();
  m["dataset"] = ctx.cfg.dataset;
  m["train"] = train_to_json(ctx.cfg.train);
  m["probe"] = probe_to_json(ctx.probe);
  m["seeds"] = ordered_json{
      {"master", s},
      {"sbm", RngStream::stream_seed(s, "sbm")},
      {"node_mask", RngStream::stream_seed(s, "node_mask")},
      {"init", RngStream::stream_seed(s, "init")},
      {"am_order", RngStream::stream_seed(s, "am_order")},
      {"probe", RngStream::stream_seed(ctx.probe.seed, "probe")}};
  m["args"] = ctx.args;
  m["outputs"] = outputs;
  m["deterministic_outputs"] = deterministic;
  spew_file(ctx.out / "manifest.json", m.dump(2) + "\n");
}

void require_dataset(const RunConfig& cfg) {
  if (cfg.dataset.empty())
    throw ConfigError(
        "config key 'dataset' is required (a bundle directory or an sbm: "
        "spec)");
}

// ---------------------------------------------------------------------------
// Commands. Each reads only CommandContext so a manifest replay follows the
// exact same code path as the original invocation.
// ---------------------------------------------------------------------------

void cmd_synth(const CommandContext& ctx) {
  if (!is_sbm_spec(ctx.cfg.dataset))
    throw ConfigError("synth needs an sbm: generator spec, got '" +
                      ctx.cfg.dataset + "'");
  Graph g = load_dataset(ctx.cfg.dataset, ctx.cfg.train.seed);
  save_graph_bundle(g, ctx.out.string());
  std::vector<std::string> files = {"edges.tsv", "features.tsv"};
  if (!g.labels.empty()) files.push_back("labels.tsv");
  if (!g.split.empty()) files.push_back("split.tsv");
  files.push_back("meta.tsv");
  write_manifest(ctx, files, files);
  std::printf("wrote bundle %s: %d nodes, %d edges\n", ctx.out.string().c_str(),
              g.n_nodes, g.edge_count() / (g.directed ? 1 : 2));
}

void cmd_importance(const CommandContext& ctx) {
  require_dataset(ctx.cfg);
  Graph g = load_dataset(ctx.cfg.dataset, ctx.cfg.train.seed);
  CentralityMethod method =
      parse_centrality(ctx.args.at("method").get<std::string>());
  PowerIterConfig pc;
  pc.tol = ctx.args.at("tol").get<double>();
  pc.max_iter = ctx.args.at("max_iter").get<int>();
  pc.alpha = ctx.args.at("alpha").get<double>();
  std::string header;
  NodeScores scores;
  if (method == CentralityMethod::kEigenvector) {
    double lambda = 0.0;
    scores = eigenvector_scores(g, pc, &lambda);
    header = "# method=eigenvector lambda=" + format_real(lambda);
  } else if (method == CentralityMethod::kPageRank) {
    scores = pagerank_scores(g, pc);
    header = "# method=pagerank alpha=" + format_real(pc.alpha);
  } else {
    scores = indegree_scores(g);
    header = "# method=indegree";
  }
  std::string tsv = header + "\n";
  for (int v = 0; v < g.n_nodes; ++v)
    tsv += std::to_string(v) + "\t" +
           format_real(scores.values[static_cast<size_t>(v)]) + "\n";
  spew_file(ctx.out / "importance.tsv", tsv);
  write_manifest(ctx, {"importance.tsv"}, {"importance.tsv"});
  std::fputs(tsv.c_str(), stdout);
}

void cmd_schedule_preview(const CommandContext& ctx) {
  double pf = ctx.args.at("pf").get<double>();
  int rounds = ctx.args.at("rounds").get<int>();
  int dims = ctx.args.at("dims").get<int>();
  MaskSchedule sched;
  int f = 0;
  if (dims > 0) {
    // No dataset: preview the counts with the identity dimension order.
    std::vector<int> order(static_cast<size_t>(dims));
    std::iota(order.begin(), order.end(), 0);
    sched = build_mask_schedule_with_order(std::move(order), pf, rounds);
    f = dims;
  } else {
    require_dataset(ctx.cfg);
    Graph g = load_dataset(ctx.cfg.dataset, ctx.cfg.train.seed);
    CentralityMethod method =
        parse_centrality(ctx.args.at("centrality").get<std::string>());
    NodeScores scores = node_scores(g, method);
    sched = build_mask_schedule(dimension_importance(g, scores), pf, rounds);
    f = g.n_dims;
  }
  std::string tsv = "round\tcount\tremaining\tfirst_masked\n";
  int prefix = 0;
  for (int i = 0; i < sched.rounds; ++i) {
    int count = sched.counts[static_cast<size_t>(i)];
    std::string ids;
    for (int k = 0; k < count && k < 10; ++k) {
      if (k) ids += ",";
      ids += std::to_string(sched.order[static_cast<size_t>(prefix + k)]);
    }
    prefix += count;
    tsv += std::to_string(i + 1) + "\t" + std::to_string(count) + "\t" +
           std::to_string(f - prefix) + "\t" + ids + "\n";
  }
  spew_file(ctx.out / "schedule.tsv", tsv);
  write_manifest(ctx, {"schedule.tsv"}, {"schedule.tsv"});
  std::fputs(tsv.c_str(), stdout);
}

void cmd_train(const CommandContext& ctx) {
  require_dataset(ctx.cfg);
  Graph g = load_dataset(ctx.cfg.dataset, ctx.cfg.train.seed);
  TrainResult r = train(g, ctx.cfg.train);
  write_report_jsonl(r.report, (ctx.out / "report.jsonl").string());
  write_loss_jsonl(r.report, (ctx.out / "loss.jsonl").string());
  r.params.save((ctx.out / "checkpoint.bin").string());
  write_manifest(ctx, {"report.jsonl", "loss.jsonl", "checkpoint.bin"},
                 {"loss.jsonl", "checkpoint.bin"});
  std::printf("trained %d epochs; final loss %s; outputs in %s\n",
              ctx.cfg.train.epochs,
              format_real(r.report.epochs.back().loss).c_str(),
              ctx.out.string().c_str());
}

void cmd_embed(const CommandContext& ctx) {
  require_dataset(ctx.cfg);
  Graph g = load_dataset(ctx.cfg.dataset, ctx.cfg.train.seed);
  ParamStore params =
      ParamStore::load(ctx.args.at("checkpoint").get<std::string>());
  Mat emb = export_embeddings(g, params);
  save_embeddings_tsv(emb, (ctx.out / "embeddings.tsv").string());
  write_manifest(ctx, {"embeddings.tsv"}, {"embeddings.tsv"});
  std::printf("wrote %dx%d embeddings to %s\n", emb.rows, emb.cols,
              (ctx.out / "embeddings.tsv").string().c_str());
}

void cmd_probe(const CommandContext& ctx) {
  require_dataset(ctx.cfg);
  int runs = ctx.args.at("runs").get<int>();
  std::string rerun = ctx.args.at("rerun").get<std::string>();
  std::string checkpoint = ctx.args.at("checkpoint").get<std::string>();
  if (runs < 1) throw ConfigError("--runs must be >= 1");
  if (runs > 1 && rerun == "none")
    throw ConfigError(
        "--runs > 1 needs --rerun-probe (fresh probe init per run) or "
        "--rerun-encoder (fresh encoder per run)");
  if (rerun == "encoder" && !checkpoint.empty())
    throw ConfigError("--rerun-encoder retrains the encoder; drop --checkpoint");

  Graph g = load_dataset(ctx.cfg.dataset, ctx.cfg.train.seed);
  if (g.labels.empty())
    throw ConfigError("probe needs a labeled dataset (labels.tsv)");
  if (g.split.empty())
    throw ConfigError("probe needs a train/val/test split (split.tsv)");

  ParamStore shared;
  if (rerun != "encoder") {
    shared = checkpoint.empty() ? train(g, ctx.cfg.train).params
                                : ParamStore::load(checkpoint);
  }

  std::vector<ProbeResult> results;
  std::vector<std::uint64_t> probe_seeds;
  for (int i = 0; i < runs; ++i) {
    ProbeConfig pc = ctx.probe;
    if (rerun == "probe") pc.seed = ctx.probe.seed + static_cast<unsigned>(i);
    Mat emb;
    if (rerun == "encoder") {
      TrainConfig tc = ctx.cfg.train;
      tc.seed = ctx.cfg.train.seed + static_cast<unsigned>(i);
      emb = export_embeddings(g, train(g, tc).params);
    } else {
      emb = export_embeddings(g, shared);
    }
    results.push_back(linear_probe(emb, g.labels, g.split, pc));
    probe_seeds.push_back(pc.seed);
  }

  double mean = 0.0;
  for (const ProbeResult& r : results) mean += r.value;
  mean /= static_cast<double>(runs);

  ordered_json report;
  report["metric"] = metric_name(ctx.probe.metric);
  report["value"] = runs == 1 ? results[0].value : mean;
  if (runs == 1) report["l2_chosen"] = results[0].l2_chosen;
  report["seed"] = ctx.probe.seed;
  if (runs > 1) {
    double var = 0.0;
    for (const ProbeResult& r : results)
      var += (r.value - mean) * (r.value - mean);
    report["mean"] = mean;
    report["std"] = std::sqrt(var / static_cast<double>(runs - 1));
    ordered_json arr = ordered_json::array();
    for (size_t i = 0; i < results.size(); ++i)
      arr.push_back(ordered_json{{"seed", probe_seeds[i]},
                                 {"value", results[i].value},
                                 {"l2_chosen", results[i].l2_chosen},
                                 {"val_value", results[i].val_value}});
    report["runs"] = arr;
  }
  spew_file(ctx.out / "probe.json", report.dump(2) + "\n");
  write_manifest(ctx, {"probe.json"}, {"probe.json"});
  std::printf("%s %s over %d run(s)\n", metric_name(ctx.probe.metric),
              format_real(report["value"].get<double>()).c_str(), runs);
}

void cmd_ablate(const CommandContext& ctx) {
  require_dataset(ctx.cfg);
  Graph g = load_dataset(ctx.cfg.dataset, ctx.cfg.train.seed);
  if (g.labels.empty() || g.split.empty())
    throw ConfigError("ablate probes every variant; needs labels and split");

  std::string tsv = "variant\tloss_final\tprobe_metric\tparam_count\n";
  std::vector<std::string> outputs = {"ablate.tsv"};
  std::vector<std::string> det = {"ablate.tsv"};
  for (Variant v : {Variant::kFull, Variant::kAM, Variant::kHM, Variant::kTC}) {
    TrainConfig tc = ctx.cfg.train;
    tc.variant = v;
    TrainResult r = train(g, tc);
    std::string name = variant_name(v);
    fs::path sub = ctx.out / name;
    std::error_code ec;
    fs::create_directories(sub, ec);
    if (ec) throw IoError("cannot create " + sub.string() + ": " + ec.message());
    write_report_jsonl(r.report, (sub / "report.jsonl").string());
    write_loss_jsonl(r.report, (sub / "loss.jsonl").string());
    r.params.save((sub / "checkpoint.bin").string());
    outputs.push_back(name + "/report.jsonl");
    outputs.push_back(name + "/loss.jsonl");
    outputs.push_back(name + "/checkpoint.bin");
    det.push_back(name + "/loss.jsonl");
    det.push_back(name + "/checkpoint.bin");

    Mat emb = export_embeddings(g, r.params);
    ProbeResult pr = linear_probe(emb, g.labels, g.split, ctx.probe);
    size_t count = r.params.scalar_count();
    if (v == Variant::kTC) {
      const Mat& w = r.params.get("noise.w");
      count -= static_cast<size_t>(w.rows) * static_cast<size_t>(w.cols);
    }
    tsv += name + "\t" + format_real(r.report.epochs.back().loss) + "\t" +
           format_real(pr.value) + "\t" + std::to_string(count) + "\n";
  }
  tsv +=
      "# TC never trains the corruption vector w, so w is excluded from its "
      "parameter count\n";
  spew_file(ctx.out / "ablate.tsv", tsv);
  write_manifest(ctx, outputs, det);
  std::fputs(tsv.c_str(), stdout);
}

void cmd_sweep(const CommandContext& ctx) {
  require_dataset(ctx.cfg);
  std::string axis = ctx.args.at("axis").get<std::string>();
  bool as_rounds = ctx.args.at("as_rounds").get<bool>();
  double max_rate = ctx.args.at("max_rate").get<double>();
  std::vector<std::string> values =
      ctx.args.at("values").get<std::vector<std::string>>();
  if (axis != "pf" && axis != "pn" && axis != "num")
    throw ConfigError("sweep axis must be pf, pn, or num; got '" + axis + "'");
  if (as_rounds && axis != "num")
    throw ConfigError("--as-rounds only applies to the num axis");
  if (values.empty()) throw ConfigError("sweep needs at least one value");

  // Validate the whole grid before spending any compute on it.
  std::vector<double> reals;
  std::vector<int> ints;
  for (const std::string& s : values) {
    if (axis == "num") {
      int v = parse_int_value(axis, s);
      if (v < 1)
        throw ConfigError("sweep value '" + s + "' must be a positive integer");
      ints.push_back(v);
    } else {
      double v = parse_real_value(axis, s);
      if (!(v > 0.0) || v > max_rate)
        throw ConfigError("sweep value " + s + " is outside (0, " +
                          format_real(max_rate) +
                          "]; adjust --max-rate to widen the guard");
      reals.push_back(v);
    }
  }

  Graph g = load_dataset(ctx.cfg.dataset, ctx.cfg.train.seed);
  if (g.labels.empty() || g.split.empty())
    throw ConfigError("sweep probes each cell; needs labels and split");

  std::string tsv = "value\tloss_final\tprobe_metric\tstatus\n";
  std::vector<std::string> outputs = {"sweep.tsv"};
  std::vector<std::string> det = {"sweep.tsv"};
  for (size_t k = 0; k < values.size(); ++k) {
    TrainConfig tc = ctx.cfg.train;
    std::string status = "ok";
    std::string loss_s = "-";
    std::string metric_s = "-";
    try {
      if (axis == "pf") {
        tc.pf = reals[k];
      } else if (axis == "pn") {
        tc.pn = reals[k];
      } else if (as_rounds) {
        int want = ints[k];
        if (want > tc.epochs - 1)
          throw ConfigError("requested " + std::to_string(want) +
                            " rounds but epochs=" + std::to_string(tc.epochs) +
                            " allows at most " + std::to_string(tc.epochs - 1));
        tc.num = (tc.epochs - 1) / want;
        if (tc.implied_rounds() != want)
          throw ConfigError("no masking interval yields " +
                            std::to_string(want) + " rounds for epochs=" +
                            std::to_string(tc.epochs));
        status = "ok (num=" + std::to_string(tc.num) + ")";
      } else {
        tc.num = ints[k];
      }
      fs::path cell = ctx.out / ("cell_" + values[k]);
      std::error_code ec;
      fs::create_directories(cell, ec);
      if (ec)
        throw IoError("cannot create " + cell.string() + ": " + ec.message());
      TrainResult r = train(g, tc);
      write_report_jsonl(r.report, (cell / "report.jsonl").string());
      write_loss_jsonl(r.report, (cell / "loss.jsonl").string());
      r.params.save((cell / "checkpoint.bin").string());
      std::string rel = "cell_" + values[k] + "/";
      outputs.push_back(rel + "report.jsonl");
      outputs.push_back(rel + "loss.jsonl");
      outputs.push_back(rel + "checkpoint.bin");
      det.push_back(rel + "loss.jsonl");
      det.push_back(rel + "checkpoint.bin");
      Mat emb = export_embeddings(g, r.params);
      ProbeResult pr = linear_probe(emb, g.labels, g.split, ctx.probe);
      loss_s = format_real(r.report.epochs.back().loss);
      metric_s = format_real(pr.value);
    } catch (const Error& e) {
      // A failed cell is recorded and the sweep moves on.
      status = "error: " + sanitize_cell(e.what());
      loss_s = "-";
      metric_s = "-";
    }
    tsv += values[k] + "\t" + loss_s + "\t" + metric_s + "\t" + status + "\n";
  }
  spew_file(ctx.out / "sweep.tsv", tsv);
  write_manifest(ctx, outputs, det);
  std::fputs(tsv.c_str(), stdout);
}

void execute(const CommandContext& ctx) {
  kern::set_parallel(!ctx.strict);
  std::error_code ec;
  fs::create_directories(ctx.out, ec);
  if (ec)
    throw IoError("cannot create output directory " + ctx.out.string() + ": " +
                  ec.message());
  if (ctx.command == "synth") cmd_synth(ctx);
  else if (ctx.command == "importance") cmd_importance(ctx);
  else if (ctx.command == "schedule-preview") cmd_schedule_preview(ctx);
  else if (ctx.command == "train") cmd_train(ctx);
  else if (ctx.command == "embed") cmd_embed(ctx);
  else if (ctx.command == "probe") cmd_probe(ctx);
  else if (ctx.command == "ablate") cmd_ablate(ctx);
  else if (ctx.command == "sweep") cmd_sweep(ctx);
  else throw ConfigError("unknown command '" + ctx.command + "'");
}

void cmd_replay(const std::string& manifest_path, const std::string& out,
                bool check, bool force_strict) {
  ordered_json m;
  try {
    m = ordered_json::parse(slurp_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest parse failed: " + std::string(e.what()));
  }
  CommandContext ctx;
  try {
    ctx.command = m.at("command").get<std::string>();
    ctx.cfg.dataset = m.at("dataset").get<std::string>();
    ctx.cfg.train = train_from_json(m.at("train"));
    ctx.probe = probe_from_json(m.at("probe"));
    ctx.args = m.at("args");
    ctx.strict = force_strict || m.at("strict").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest field missing or malformed: " +
                      std::string(e.what()));
  }
  ctx.out = out;
  execute(ctx);
  if (!check) return;

  fs::path orig = m.at("out_dir").get<std::string>();
  int mismatches = 0;
  size_t compared = 0;
  for (const auto& f : m.at("deterministic_outputs")) {
    std::string name = f.get<std::string>();
    std::string a = slurp_file(orig / name);
    std::string b = slurp_file(ctx.out / name);
    ++compared;
    if (a != b) {
      std::fprintf(stderr, "replay mismatch: %s\n", name.c_str());
      ++mismatches;
    }
  }
  if (mismatches)
    throw NumericError(std::to_string(mismatches) +
                       " replayed output(s) differ from the manifest run");
  std::printf("replay verified: %zu file(s) byte-identical\n", compared);
}

/// Dataset paths from configs/flags are pinned absolute so a manifest replays
/// from any working directory. Generator specs pass through untouched.
std::string normalize_dataset(const std::string& dataset) {
  if (dataset.empty() || is_sbm_spec(dataset)) return dataset;
  return fs::absolute(dataset).string();
}

struct CommonOpts {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  bool strict = false;
};

void add_common(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--config", o.config,
                  "key=value config file (keys: dataset, pf, pn, num, epochs, "
                  "lr, weight_decay, hidden, heads, seed, centrality, "
                  "variant, stop_grad_target)")
      ->required();
  sub->add_option("--set", o.sets,
                  "Override one config key, key=value (repeatable)");
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_flag("--strict", o.strict,
                "Run the serial reference kernels (results are bit-identical "
                "either way; strict pins the execution policy for audits)");
}

RunConfig resolve_config(const CommonOpts& o) {
  RunConfig cfg = load_run_config(o.config);
  for (const std::string& kv : o.sets) apply_config_override(cfg, kv);
  cfg.dataset = normalize_dataset(cfg.dataset);
  return cfg;
}

struct ProbeOpts {
  std::string l2;
  int epochs = 300;
  double lr = 0.01;
  std::uint64_t seed = 0;
  std::string metric = "accuracy";
  CLI::Option* seed_opt = nullptr;
};

void add_probe_opts(CLI::App* sub, ProbeOpts& o) {
  sub->add_option("--l2", o.l2,
                  "Comma-separated l2 sweep for the probe (default "
                  "1e-4,1e-3,1e-2; chosen on the validation split)");
  sub->add_option("--probe-epochs", o.epochs, "Probe training epochs");
  sub->add_option("--probe-lr", o.lr, "Probe learning rate");
  o.seed_opt = sub->add_option("--probe-seed", o.seed,
                               "Probe init seed (default: experiment seed)");
  sub->add_option("--metric", o.metric, "accuracy or micro_f1");
}

ProbeConfig resolve_probe(const ProbeOpts& o, std::uint64_t train_seed) {
  ProbeConfig pc;
  if (!o.l2.empty()) {
    pc.l2_sweep.clear();
    for (const std::string& tok : split_comma_list("l2", o.l2))
      pc.l2_sweep.push_back(parse_real_value("l2", tok));
  }
  pc.probe_epochs = o.epochs;
  pc.probe_lr = o.lr;
  pc.seed = (o.seed_opt != nullptr && o.seed_opt->count() > 0) ? o.seed
                                                               : train_seed;
  pc.metric = parse_metric(o.metric);
  return pc;
}

}  // namespace

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

int run_cli(int argc, const char* const* argv) {
  CLI::App app{
      "Self-supervised graph auto-encoder: centrality-driven hierarchical "
      "feature masking, trainable node corruption, attention "
      "encoder/decoder, and frozen-encoder linear-probe evaluation.",
      "gae"};
  app.set_version_flag("--version", kVersion);
  app.footer(
      "Exit codes: 0 success, 2 configuration error, 3 numerical failure, "
      "4 I/O error.");
  app.require_subcommand(1);

  // --- synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand(
      "synth", "Generate a stochastic block model dataset bundle");
  struct {
    std::string spec, out;
    std::uint64_t seed = 0;
  } sy;
  synth->add_option("--spec", sy.spec,
                    "Generator spec: sbm:nodes=N,blocks=B,p_in=..,p_out=..,"
                    "dim=F,signal=..,noise=..")
      ->required();
  synth->add_option("--seed", sy.seed, "Generator seed");
  synth->add_option("--out", sy.out, "Bundle directory to write")->required();
  synth->callback([&] {
    CommandContext ctx;
    ctx.command = "synth";
    ctx.cfg.dataset = sy.spec;
    ctx.cfg.train.seed = sy.seed;
    ctx.probe.seed = sy.seed;
    ctx.out = sy.out;
    execute(ctx);
  });

  // --- importance ----------------------------------------------------------
  auto* imp = app.add_subcommand(
      "importance",
      "Node importance scores as TSV. Eigenvector scores follow the "
      "incoming-influence convention on directed graphs: node v aggregates "
      "its out-neighbors' scores (s_v = sum over edges v->u of s_u / lambda).");
  struct {
    std::string dataset, out, method = "indegree";
    std::uint64_t seed = 0;
    double tol = 1e-10, alpha = 0.85;
    int max_iter = 10000;
  } io_;
  imp->add_option("--dataset", io_.dataset, "Bundle directory or sbm: spec")
      ->required();
  imp->add_option("--seed", io_.seed, "Dataset seed for sbm: specs");
  imp->add_option("--method", io_.method, "indegree, eigenvector, or pagerank");
  imp->add_option("--tol", io_.tol, "Power-iteration convergence tolerance");
  imp->add_option("--max-iter", io_.max_iter, "Power-iteration cap");
  imp->add_option("--alpha", io_.alpha, "PageRank damping factor");
  imp->add_option("--out", io_.out, "Output directory")->required();
  imp->callback([&] {
    CommandContext ctx;
    ctx.command = "importance";
    ctx.cfg.dataset = normalize_dataset(io_.dataset);
    ctx.cfg.train.seed = io_.seed;
    ctx.probe.seed = io_.seed;
    ctx.args = ordered_json{{"method", io_.method},
                            {"tol", io_.tol},
                            {"max_iter", io_.max_iter},
                            {"alpha", io_.alpha}};
    ctx.out = io_.out;
    execute(ctx);
  });

  // --- schedule-preview ------------------------------------------------------
  auto* sp = app.add_subcommand(
      "schedule-preview",
      "Per-round mask counts, remaining dimensions, and the first masked "
      "dimension ids as TSV");
  struct {
    std::string dataset, out, centrality = "indegree";
    std::uint64_t seed = 0;
    double pf = 0.0;
    int rounds = 0, dims = 0;
  } so_;
  auto* sp_ds =
      sp->add_option("--dataset", so_.dataset, "Bundle directory or sbm: spec");
  auto* sp_dims = sp->add_option(
      "--dims", so_.dims,
      "Preview counts for F dimensions with the identity order (no dataset)");
  sp_ds->excludes(sp_dims);
  sp_dims->excludes(sp_ds);
  sp->add_option("--seed", so_.seed, "Dataset seed for sbm: specs");
  sp->add_option("--centrality", so_.centrality,
                 "indegree, eigenvector, or pagerank");
  sp->add_option("--pf", so_.pf, "Masking rate per round")->required();
  sp->add_option("--rounds", so_.rounds, "Number of masking rounds")
      ->required();
  sp->add_option("--out", so_.out, "Output directory")->required();
  sp->callback([&] {
    if (so_.dataset.empty() && so_.dims <= 0)
      throw ConfigError("schedule-preview needs --dataset or --dims");
    CommandContext ctx;
    ctx.command = "schedule-preview";
    ctx.cfg.dataset = normalize_dataset(so_.dataset);
    ctx.cfg.train.seed = so_.seed;
    ctx.probe.seed = so_.seed;
    ctx.args = ordered_json{{"dims", so_.dims},
                            {"pf", so_.pf},
                            {"rounds", so_.rounds},
                            {"centrality", so_.centrality}};
    ctx.out = so_.out;
    execute(ctx);
  });

  // --- train -----------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Train the auto-encoder");
  CommonOpts tr_o;
  add_common(tr, tr_o);
  tr->callback([&] {
    CommandContext ctx;
    ctx.command = "train";
    ctx.cfg = resolve_config(tr_o);
    ctx.probe.seed = ctx.cfg.train.seed;
    ctx.out = tr_o.out;
    ctx.strict = tr_o.strict;
    execute(ctx);
  });

  // --- replay ----------------------------------------------------------------
  auto* rp = app.add_subcommand(
      "replay", "Re-run a manifest; with --check, verify the rerun reproduces "
                "the original deterministic outputs byte-for-byte");
  struct {
    std::string manifest, out;
    bool check = false, strict = false;
  } rp_o;
  rp->add_option("--manifest", rp_o.manifest, "manifest.json from a prior run")
      ->required();
  rp->add_option("--out", rp_o.out, "Directory for the replayed outputs")
      ->required();
  rp->add_flag("--check", rp_o.check,
               "Byte-compare the replayed deterministic outputs against the "
               "original run (exit 3 on mismatch)");
  rp->add_flag("--strict", rp_o.strict,
               "Force serial kernels regardless of the manifest");
  rp->callback(
      [&] { cmd_replay(rp_o.manifest, rp_o.out, rp_o.check, rp_o.strict); });

  // --- embed -----------------------------------------------------------------
  auto* em = app.add_subcommand(
      "embed", "Frozen-encoder embeddings of the original graph as TSV");
  CommonOpts em_o;
  std::string em_ck;
  add_common(em, em_o);
  em->add_option("--checkpoint", em_ck, "Trained checkpoint.bin")->required();
  em->callback([&] {
    CommandContext ctx;
    ctx.command = "embed";
    ctx.cfg = resolve_config(em_o);
    ctx.probe.seed = ctx.cfg.train.seed;
    ctx.args = ordered_json{{"checkpoint", fs::absolute(em_ck).string()}};
    ctx.out = em_o.out;
    ctx.strict = em_o.strict;
    execute(ctx);
  });

  // --- probe -----------------------------------------------------------------
  auto* pb = app.add_subcommand(
      "probe",
      "Linear-probe evaluation of frozen-encoder embeddings. Averaged "
      "repetition supports both conventions: --rerun-probe re-trains only the "
      "probe per run, --rerun-encoder re-trains the encoder too.");
  CommonOpts pb_o;
  ProbeOpts pb_p;
  struct {
    std::string checkpoint;
    int runs = 1;
    bool rerun_probe = false, rerun_encoder = false;
  } pb_x;
  add_common(pb, pb_o);
  add_probe_opts(pb, pb_p);
  pb->add_option("--checkpoint", pb_x.checkpoint,
                 "Trained checkpoint.bin (omit to train the encoder first)");
  pb->add_option("--runs", pb_x.runs, "Repetitions to average");
  auto* f1 = pb->add_flag("--rerun-probe", pb_x.rerun_probe,
                          "Vary the probe seed per run, encoder fixed");
  auto* f2 = pb->add_flag("--rerun-encoder", pb_x.rerun_encoder,
                          "Re-train the encoder with seed+i per run");
  f1->excludes(f2);
  f2->excludes(f1);
  pb->callback([&] {
    CommandContext ctx;
    ctx.command = "probe";
    ctx.cfg = resolve_config(pb_o);
    ctx.probe = resolve_probe(pb_p, ctx.cfg.train.seed);
    ctx.args = ordered_json{
        {"checkpoint",
         pb_x.checkpoint.empty() ? "" : fs::absolute(pb_x.checkpoint).string()},
        {"runs", pb_x.runs},
        {"rerun", pb_x.rerun_probe     ? "probe"
                  : pb_x.rerun_encoder ? "encoder"
                                       : "none"}};
    ctx.out = pb_o.out;
    ctx.strict = pb_o.strict;
    execute(ctx);
  });

  // --- ablate ----------------------------------------------------------------
  auto* ab = app.add_subcommand(
      "ablate",
      "Train Full, AM, HM, and TC with a shared seed and compare probes");
  CommonOpts ab_o;
  ProbeOpts ab_p;
  add_common(ab, ab_o);
  add_probe_opts(ab, ab_p);
  ab->callback([&] {
    CommandContext ctx;
    ctx.command = "ablate";
    ctx.cfg = resolve_config(ab_o);
    ctx.probe = resolve_probe(ab_p, ctx.cfg.train.seed);
    ctx.out = ab_o.out;
    ctx.strict = ab_o.strict;
    execute(ctx);
  });

  // --- sweep -----------------------------------------------------------------
  auto* sw = app.add_subcommand(
      "sweep", "One training+probe run per value of a hyper-parameter axis; "
               "failed cells are recorded and the sweep continues");
  CommonOpts sw_o;
  ProbeOpts sw_p;
  struct {
    std::string axis, values;
    bool as_rounds = false;
    double max_rate = 0.9;
  } sw_x;
  add_common(sw, sw_o);
  add_probe_opts(sw, sw_p);
  sw->add_option("--axis", sw_x.axis, "pf, pn, or num")->required();
  sw->add_option("--values", sw_x.values, "Comma-separated grid values")
      ->required();
  sw->add_flag("--as-rounds", sw_x.as_rounds,
               "Treat num-axis values as requested round counts and derive "
               "the masking interval");
  sw->add_option("--max-rate", sw_x.max_rate,
                 "Upper guard for pf/pn sweep values (default 0.9)");
  sw->callback([&] {
    CommandContext ctx;
    ctx.command = "sweep";
    ctx.cfg = resolve_config(sw_o);
    ctx.probe = resolve_probe(sw_p, ctx.cfg.train.seed);
    ctx.args = ordered_json{{"axis", sw_x.axis},
                            {"values", split_comma_list("values", sw_x.values)},
                            {"as_rounds", sw_x.as_rounds},
                            {"max_rate", sw_x.max_rate}};
    ctx.out = sw_o.out;
    ctx.strict = sw_o.strict;
    execute(ctx);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace gae
