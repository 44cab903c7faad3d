#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "gae/cli.hpp"
#include "gae/error.hpp"
#include "gae/graph.hpp"
#include "gae/kernels.hpp"
#include "json.hpp"

using namespace gae;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  return std::string((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  REQUIRE(os.good());
  os << text;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag)
      : path(fs::temp_directory_path() / (std::string("gae_test_") + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

/// Invokes the CLI as a process would, with argv[0] prepended.
int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gae");
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

/// A config whose tiny SBM trains in milliseconds. pf=0.25 keeps the
/// 8-dimension schedule feasible for the single implied round.
std::string tiny_config() {
  return "# tiny experiment\n"
         "dataset = sbm:nodes=24,blocks=3,p_in=0.5,p_out=0.05,dim=8,"
         "signal=1.0,noise=0.5\n"
         "pf = 0.25\n"
         "pn = 0.5\n"
         "num = 4\n"
         "epochs = 6\n"
         "lr = 0.005\n"
         "hidden = 8\n"
         "heads = 2\n"
         "seed = 3\n";
}

}  // namespace

TEST_CASE("run config parses the exact key set") {
  RunConfig cfg = parse_run_config(
      "# comment\n"
      "dataset = data/cora\n"
      "pf = 0.3\n"
      "pn = 0.75\n"
      "num = 200\n"
      "epochs = 2000\n"
      "lr = 0.001\n"
      "weight_decay = 0.01\n"
      "hidden = 512\n"
      "heads = 4\n"
      "seed = 42\n"
      "centrality = pagerank\n"
      "variant = TC\n"
      "stop_grad_target = true\n");
  CHECK(cfg.dataset == "data/cora");
  CHECK(cfg.train.pf == 0.3);
  CHECK(cfg.train.pn == 0.75);
  CHECK(cfg.train.num == 200);
  CHECK(cfg.train.epochs == 2000);
  CHECK(cfg.train.lr == 0.001);
  CHECK(cfg.train.weight_decay == 0.01);
  CHECK(cfg.train.hidden == 512);
  CHECK(cfg.train.heads == 4);
  CHECK(cfg.train.seed == 42);
  CHECK(cfg.train.centrality == CentralityMethod::kPageRank);
  CHECK(cfg.train.variant == Variant::kTC);
  CHECK(cfg.train.stop_grad_target);

  SUBCASE("omitted keys keep defaults") {
    RunConfig d = parse_run_config("pf = 0.2\n");
    CHECK(d.dataset.empty());
    CHECK(d.train.num == 200);
    CHECK(d.train.variant == Variant::kFull);
  }
}

TEST_CASE("unknown config keys name their nearest valid neighbor") {
  try {
    parse_run_config("pff = 0.3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("pff") != std::string::npos);
    CHECK(std::string(e.what()).find("'pf'") != std::string::npos);
  }
  try {
    parse_run_config("hiden = 64\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("'hidden'") != std::string::npos);
  }
}

TEST_CASE("malformed config text is rejected with line context") {
  CHECK_THROWS_AS(parse_run_config("pf 0.3\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("pf = 0.3\npf = 0.4\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("pf = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("num = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("seed = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("stop_grad_target = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("variant = Fully\n"), ConfigError);
}

TEST_CASE("command-line overrides beat file values") {
  RunConfig cfg = parse_run_config("pf = 0.1\nseed = 1\n");
  apply_config_override(cfg, "pf=0.4");
  apply_config_override(cfg, "dataset=sbm:nodes=10");
  CHECK(cfg.train.pf == 0.4);
  CHECK(cfg.dataset == "sbm:nodes=10");
  CHECK(cfg.train.seed == 1);
  CHECK_THROWS_AS(apply_config_override(cfg, "pf0.4"), ConfigError);
  CHECK_THROWS_AS(apply_config_override(cfg, "pfx=0.4"), ConfigError);
}

TEST_CASE("sbm specs parse with defaults and reject strangers") {
  SbmConfig c = parse_sbm_spec(
      "sbm:nodes=300,blocks=3,p_in=0.1,p_out=0.01,dim=16,signal=0.5,noise=1.0",
      9);
  CHECK(c.n_nodes == 300);
  CHECK(c.n_blocks == 3);
  CHECK(c.p_in == 0.1);
  CHECK(c.p_out == 0.01);
  CHECK(c.feat_dim == 16);
  CHECK(c.signal == 0.5);
  CHECK(c.noise_sigma == 1.0);
  CHECK(c.seed == 9);

  SUBCASE("omitted keys keep generator defaults") {
    SbmConfig d = parse_sbm_spec("sbm:nodes=10", 0);
    CHECK(d.n_nodes == 10);
    CHECK(d.n_blocks == 1);
    CHECK(d.feat_dim == 1);
  }
  SUBCASE("bad specs") {
    CHECK_THROWS_AS(parse_sbm_spec("sbm:", 0), ConfigError);
    CHECK_THROWS_AS(parse_sbm_spec("sbm:blocks=3", 0), ConfigError);
    CHECK_THROWS_AS(parse_sbm_spec("sbm:nodes=10,nodes=20", 0), ConfigError);
    CHECK_THROWS_AS(parse_sbm_spec("sbm:nodes=10,p_in", 0), ConfigError);
    try {
      parse_sbm_spec("sbm:nodes=10,blocs=2", 0);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("'blocks'") != std::string::npos);
    }
  }
  SUBCASE("spec detection") {
    CHECK(is_sbm_spec("sbm:nodes=10"));
    CHECK_FALSE(is_sbm_spec("data/sbm"));
    CHECK_FALSE(is_sbm_spec(""));
  }
}

TEST_CASE("load_dataset serves generator specs and bundle directories") {
  Graph g = load_dataset("sbm:nodes=20,blocks=2,p_in=0.5,dim=4,signal=1.0", 5);
  CHECK(g.n_nodes == 20);
  CHECK(g.n_dims == 4);
  CHECK(g.labels.size() == 20);

  TempDir tmp("cli_dataset");
  save_graph_bundle(g, (tmp.path / "bundle").string());
  Graph back = load_dataset((tmp.path / "bundle").string(), 0);
  CHECK(back.n_nodes == g.n_nodes);
  CHECK(back.edge_count() == g.edge_count());
  CHECK(back.features == g.features);

  CHECK_THROWS_AS(load_dataset((tmp.path / "missing").string(), 0), IoError);
}

TEST_CASE("cli synth writes a loadable bundle") {
  TempDir tmp("cli_synth");
  fs::path out = tmp.path / "bundle";
  REQUIRE(cli({"synth", "--spec", "sbm:nodes=18,blocks=3,p_in=0.6,dim=4",
               "--seed", "2", "--out", out.string()}) == 0);
  Graph g = load_graph_bundle(out.string());
  CHECK(g.n_nodes == 18);
  CHECK(g.labels.size() == 18);
  CHECK(fs::exists(out / "manifest.json"));
  // A directory where a spec is expected is a configuration error.
  CHECK(cli({"synth", "--spec", out.string(), "--out",
             (tmp.path / "x").string()}) == 2);
}

TEST_CASE("cli schedule preview emits the masking plan as TSV") {
  TempDir tmp("cli_sched");
  fs::path out = tmp.path / "sched";
  REQUIRE(cli({"schedule-preview", "--dims", "100", "--pf", "0.1", "--rounds",
               "3", "--out", out.string()}) == 0);
  CHECK(read_file(out / "schedule.tsv") ==
        "round\tcount\tremaining\tfirst_masked\n"
        "1\t10\t90\t0,1,2,3,4,5,6,7,8,9\n"
        "2\t9\t81\t10,11,12,13,14,15,16,17,18\n"
        "3\t8\t73\t19,20,21,22,23,24,25,26\n");
  // Infeasible plan surfaces as a configuration error.
  CHECK(cli({"schedule-preview", "--dims", "4", "--pf", "0.1", "--rounds", "2",
             "--out", (tmp.path / "bad").string()}) == 2);
  // Needs a dimension source.
  CHECK(cli({"schedule-preview", "--pf", "0.1", "--rounds", "2", "--out",
             (tmp.path / "none").string()}) == 2);
}

TEST_CASE("cli importance ranks the hand-checked chain") {
  TempDir tmp("cli_imp");
  // 0 -> 1, 0 -> 2, 1 -> 2: in-degrees 0, 1, 2.
  Graph g = build_graph(3, true, {{0, 1}, {0, 2}, {1, 2}}, Mat(3, 1));
  fs::path data = tmp.path / "chain";
  save_graph_bundle(g, data.string());
  fs::path out = tmp.path / "imp";
  REQUIRE(cli({"importance", "--dataset", data.string(), "--method",
               "indegree", "--out", out.string()}) == 0);
  CHECK(read_file(out / "importance.tsv") ==
        "# method=indegree\n"
        "0\t0\n"
        "1\t1\n"
        "2\t2\n");

  SUBCASE("eigenvector header names lambda") {
    Graph k3 = build_graph(3, false, {{0, 1}, {1, 2}, {0, 2}}, Mat(3, 1));
    fs::path tri = tmp.path / "tri";
    save_graph_bundle(k3, tri.string());
    fs::path eig = tmp.path / "eig";
    REQUIRE(cli({"importance", "--dataset", tri.string(), "--method",
                 "eigenvector", "--out", eig.string()}) == 0);
    std::string tsv = read_file(eig / "importance.tsv");
    CHECK(tsv.find("# method=eigenvector lambda=2\n") == 0);
  }
  SUBCASE("pagerank header names alpha") {
    fs::path pr = tmp.path / "pr";
    REQUIRE(cli({"importance", "--dataset", data.string(), "--method",
                 "pagerank", "--out", pr.string()}) == 0);
    CHECK(read_file(pr / "importance.tsv").find("# method=pagerank alpha=0.85\n") ==
          0);
  }
}

TEST_CASE("cli train writes outputs and a replayable manifest") {
  TempDir tmp("cli_train");
  fs::path cfg = tmp.path / "exp.cfg";
  write_file(cfg, tiny_config());
  fs::path run = tmp.path / "run";
  REQUIRE(cli({"train", "--config", cfg.string(), "--out", run.string(),
               "--strict"}) == 0);
  CHECK(fs::exists(run / "report.jsonl"));
  CHECK(fs::exists(run / "loss.jsonl"));
  CHECK(fs::exists(run / "checkpoint.bin"));

  auto manifest = nlohmann::json::parse(read_file(run / "manifest.json"));
  CHECK(manifest.at("command") == "train");
  CHECK(manifest.at("strict") == true);
  CHECK(manifest.at("version") == std::string(kVersion));
  CHECK(manifest.at("train").at("epochs") == 6);
  CHECK(manifest.at("train").at("seed") == 3);
  CHECK(manifest.at("seeds").contains("node_mask"));
  CHECK(manifest.at("deterministic_outputs") ==
        nlohmann::json({"loss.jsonl", "checkpoint.bin"}));

  SUBCASE("replay reproduces the deterministic outputs byte for byte") {
    fs::path rep = tmp.path / "replay";
    REQUIRE(cli({"replay", "--manifest", (run / "manifest.json").string(),
                 "--out", rep.string(), "--check"}) == 0);
    CHECK(read_file(rep / "loss.jsonl") == read_file(run / "loss.jsonl"));
    CHECK(read_file(rep / "checkpoint.bin") ==
          read_file(run / "checkpoint.bin"));
  }
  SUBCASE("replay --check flags a tampered original") {
    write_file(run / "loss.jsonl", "{\"epoch\":0,\"loss\":0.0}\n");
    CHECK(cli({"replay", "--manifest", (run / "manifest.json").string(),
               "--out", (tmp.path / "replay2").string(), "--check"}) == 3);
  }
  SUBCASE("overrides are resolved into the manifest") {
    fs::path run2 = tmp.path / "run2";
    REQUIRE(cli({"train", "--config", cfg.string(), "--set", "epochs=4",
                 "--set", "seed=11", "--out", run2.string()}) == 0);
    auto m2 = nlohmann::json::parse(read_file(run2 / "manifest.json"));
    CHECK(m2.at("train").at("epochs") == 4);
    CHECK(m2.at("train").at("seed") == 11);
  }
}

TEST_CASE("cli maps error classes to exit codes") {
  TempDir tmp("cli_codes");
  fs::path cfg = tmp.path / "exp.cfg";
  write_file(cfg, tiny_config());
  fs::path out = tmp.path / "out";

  // Unknown config key -> 2.
  fs::path bad = tmp.path / "bad.cfg";
  write_file(bad, "pff = 0.3\n");
  CHECK(cli({"train", "--config", bad.string(), "--out", out.string()}) == 2);
  // Missing config file -> 4.
  CHECK(cli({"train", "--config", (tmp.path / "nope.cfg").string(), "--out",
             out.string()}) == 4);
  // pn=0 leaves nothing to reconstruct -> numerical failure 3.
  CHECK(cli({"train", "--config", cfg.string(), "--set", "pn=0", "--out",
             out.string()}) == 3);
  // Unknown flag and missing subcommand -> parse errors 2.
  CHECK(cli({"train", "--config", cfg.string(), "--out", out.string(),
             "--frobnicate"}) == 2);
  CHECK(cli({}) == 2);
  // Missing dataset key -> 2.
  fs::path nods = tmp.path / "nods.cfg";
  write_file(nods, "pf = 0.25\n");
  CHECK(cli({"train", "--config", nods.string(), "--out", out.string()}) == 2);
}

TEST_CASE("cli probe validates run flags and reports the sweep choice") {
  TempDir tmp("cli_probe");
  fs::path cfg = tmp.path / "exp.cfg";
  write_file(cfg, tiny_config());
  fs::path run = tmp.path / "run";
  REQUIRE(cli({"train", "--config", cfg.string(), "--out", run.string()}) == 0);
  fs::path ck = run / "checkpoint.bin";

  fs::path p1 = tmp.path / "p1";
  REQUIRE(cli({"probe", "--config", cfg.string(), "--checkpoint", ck.string(),
               "--probe-epochs", "60", "--out", p1.string()}) == 0);
  auto rep = nlohmann::json::parse(read_file(p1 / "probe.json"));
  CHECK(rep.at("metric") == "accuracy");
  CHECK(rep.at("value").get<double>() >= 0.0);
  CHECK(rep.at("value").get<double>() <= 1.0);
  CHECK(rep.contains("l2_chosen"));
  CHECK(rep.at("seed") == 3);

  SUBCASE("multi-run needs an explicit repetition convention") {
    CHECK(cli({"probe", "--config", cfg.string(), "--checkpoint", ck.string(),
               "--runs", "3", "--out", (tmp.path / "p2").string()}) == 2);
  }
  SUBCASE("rerun-encoder contradicts a fixed checkpoint") {
    CHECK(cli({"probe", "--config", cfg.string(), "--checkpoint", ck.string(),
               "--runs", "2", "--rerun-encoder", "--out",
               (tmp.path / "p3").string()}) == 2);
  }
  SUBCASE("the two rerun conventions are mutually exclusive") {
    CHECK(cli({"probe", "--config", cfg.string(), "--runs", "2",
               "--rerun-probe", "--rerun-encoder", "--out",
               (tmp.path / "p4").string()}) == 2);
  }
  SUBCASE("rerun-probe averages over fresh probe seeds") {
    fs::path p5 = tmp.path / "p5";
    REQUIRE(cli({"probe", "--config", cfg.string(), "--checkpoint", ck.string(),
                 "--probe-epochs", "60", "--runs", "2", "--rerun-probe",
                 "--out", p5.string()}) == 0);
    auto multi = nlohmann::json::parse(read_file(p5 / "probe.json"));
    REQUIRE(multi.at("runs").size() == 2);
    CHECK(multi.at("runs")[0].at("seed") == 3);
    CHECK(multi.at("runs")[1].at("seed") == 4);
    CHECK(multi.contains("mean"));
    CHECK(multi.contains("std"));
  }
}

TEST_CASE("cli ablate emits four variants and the TC parameter note") {
  TempDir tmp("cli_ablate");
  fs::path cfg = tmp.path / "exp.cfg";
  write_file(cfg, tiny_config());
  fs::path out = tmp.path / "abl";
  REQUIRE(cli({"ablate", "--config", cfg.string(), "--probe-epochs", "40",
               "--out", out.string()}) == 0);
  std::string tsv = read_file(out / "ablate.tsv");
  CHECK(tsv.find("variant\tloss_final\tprobe_metric\tparam_count\n") == 0);
  CHECK(tsv.find("\nFull\t") != std::string::npos);
  CHECK(tsv.find("\nAM\t") != std::string::npos);
  CHECK(tsv.find("\nHM\t") != std::string::npos);
  CHECK(tsv.find("\nTC\t") != std::string::npos);
  CHECK(tsv.find("excluded from its parameter count") != std::string::npos);
  for (const char* v : {"Full", "AM", "HM", "TC"}) {
    CHECK(fs::exists(out / v / "loss.jsonl"));
    CHECK(fs::exists(out / v / "checkpoint.bin"));
  }

  // The TC row reports exactly dim fewer parameters than the others.
  auto row_count = [&](const std::string& name) {
    size_t at = tsv.find("\n" + name + "\t");
    REQUIRE(at != std::string::npos);
    size_t end = tsv.find('\n', at + 1);
    std::string row = tsv.substr(at + 1, end - at - 1);
    return std::stol(row.substr(row.rfind('\t') + 1));
  };
  CHECK(row_count("Full") == row_count("AM"));
  CHECK(row_count("TC") == row_count("Full") - 8);
}

TEST_CASE("cli sweep honors guards and records failed cells") {
  TempDir tmp("cli_sweep");
  fs::path cfg = tmp.path / "exp.cfg";
  write_file(cfg, tiny_config());

  SUBCASE("rate values above the guard are rejected up front") {
    CHECK(cli({"sweep", "--config", cfg.string(), "--axis", "pf", "--values",
               "0.25,0.95", "--out", (tmp.path / "s1").string()}) == 2);
    // Raising the guard admits the same grid.
    REQUIRE(cli({"sweep", "--config", cfg.string(), "--axis", "pn", "--values",
                 "0.95", "--max-rate", "0.99", "--probe-epochs", "40", "--out",
                 (tmp.path / "s2").string()}) == 0);
  }
  SUBCASE("unknown axis and misplaced flags are configuration errors") {
    CHECK(cli({"sweep", "--config", cfg.string(), "--axis", "lr", "--values",
               "0.1", "--out", (tmp.path / "s3").string()}) == 2);
    CHECK(cli({"sweep", "--config", cfg.string(), "--axis", "pf", "--values",
               "0.25", "--as-rounds", "--out", (tmp.path / "s4").string()}) ==
          2);
  }
  SUBCASE("a failing cell is recorded while the sweep continues") {
    fs::path out = tmp.path / "s5";
    // pf=0.05 on 8 dimensions gives floor(0.4)=0: that cell errors.
    REQUIRE(cli({"sweep", "--config", cfg.string(), "--axis", "pf", "--values",
                 "0.05,0.25", "--probe-epochs", "40", "--out",
                 out.string()}) == 0);
    std::string tsv = read_file(out / "sweep.tsv");
    CHECK(tsv.find("0.05\t-\t-\terror: ") != std::string::npos);
    CHECK(tsv.find("0.25\t") != std::string::npos);
    CHECK(tsv.find("0.25\t-") == std::string::npos);
    CHECK(fs::exists(out / "cell_0.25" / "loss.jsonl"));
  }
  SUBCASE("as-rounds derives the masking interval") {
    fs::path out = tmp.path / "s6";
    // epochs=6: 1 round -> num=5, 5 rounds -> num=1; 4 is unattainable
    // ((6-1)/num can be 5, 2, 1 but never 4).
    REQUIRE(cli({"sweep", "--config", cfg.string(), "--axis", "num",
                 "--values", "1,4", "--as-rounds", "--probe-epochs", "40",
                 "--out", out.string()}) == 0);
    std::string tsv = read_file(out / "sweep.tsv");
    CHECK(tsv.find("ok (num=5)") != std::string::npos);
    CHECK(tsv.find("no masking interval yields 4 rounds") !=
          std::string::npos);
  }
}

TEST_CASE("cli embed exports frozen-encoder embeddings") {
  TempDir tmp("cli_embed");
  fs::path cfg = tmp.path / "exp.cfg";
  write_file(cfg, tiny_config());
  fs::path run = tmp.path / "run";
  REQUIRE(cli({"train", "--config", cfg.string(), "--out", run.string()}) == 0);
  fs::path out = tmp.path / "emb";
  REQUIRE(cli({"embed", "--config", cfg.string(), "--checkpoint",
               (run / "checkpoint.bin").string(), "--out", out.string()}) == 0);
  std::string tsv = read_file(out / "embeddings.tsv");
  // 24 nodes, one line each, node id first.
  CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 24);
  CHECK(tsv.rfind("0\t", 0) == 0);

  // Restore the library default after the CLI runs flipped the kernel policy.
  kern::set_parallel(true);
}
