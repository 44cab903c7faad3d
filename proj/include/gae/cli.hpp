#pragma once

#include <cstdint>
#include <string>

#include "gae/eval.hpp"
#include "gae/graph.hpp"
#include "gae/training.hpp"

namespace gae {

inline constexpr const char* kVersion = "0.1.0";

/// A fully resolved experiment configuration: the key=value config file
/// contents with any command-line overrides already applied.
struct RunConfig {
  std::string dataset;  // bundle directory or an "sbm:..." generator spec
  TrainConfig train;
};

/// Parses plain key=value text. Blank lines and lines starting with '#' are
/// skipped. The key set is exactly {dataset, pf, pn, num, epochs, lr,
/// weight_decay, hidden, heads, seed, centrality, variant, stop_grad_target};
/// an unknown key raises ConfigError naming the key and its nearest valid
/// neighbor. Duplicate keys are errors.
RunConfig parse_run_config(const std::string& text);

RunConfig load_run_config(const std::string& path);

/// Applies one "key=value" override on top of a parsed config (command-line
/// flags beat file values).
void apply_config_override(RunConfig& cfg, const std::string& key_eq_value);

/// True when the dataset string is a generator spec rather than a directory.
bool is_sbm_spec(const std::string& dataset);

/// Parses "sbm:nodes=300,blocks=3,p_in=0.1,p_out=0.01,dim=16,signal=0.5,
/// noise=1.0". Omitted keys keep SbmConfig defaults; the generator seed is
/// the supplied experiment seed so a manifest pins the dataset exactly.
SbmConfig parse_sbm_spec(const std::string& spec, std::uint64_t seed);

/// Loads a bundle directory or generates the SBM described by an sbm: spec.
Graph load_dataset(const std::string& dataset, std::uint64_t seed);

/// Full command-line entry point (wrapped by main). Returns the process exit
/// code: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
int run_cli(int argc, const char* const* argv);

}  // namespace gae
