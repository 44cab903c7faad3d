#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gae/centrality.hpp"
#include "gae/corruption.hpp"
#include "gae/gat.hpp"
#include "gae/graph.hpp"
#include "gae/masking.hpp"
#include "gae/params.hpp"
#include "gae/tape.hpp"

namespace gae {

/// Ablation variants: AM swaps the importance-driven dimension order for a
/// seeded random one, HM masks once up front instead of hierarchically, TC
/// removes trainable corruption (w leaves the parameter set; the per-epoch
/// node mask still drives re-masking and the loss).
enum class Variant { kFull, kAM, kHM, kTC };

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct TrainConfig {
  double pf = 0.1;          // mask rate per hierarchy round
  double pn = 0.5;          // per-node noise probability
  int num = 200;            // epochs between masking increments
  int epochs = 100;
  double lr = 0.001;
  double weight_decay = 0.0;
  int hidden = 64;
  int heads = 4;
  std::uint64_t seed = 0;
  CentralityMethod centrality = CentralityMethod::kInDegree;
  Variant variant = Variant::kFull;
  bool stop_grad_target = false;  // detach the reconstruction target
  bool cosine_lr = false;         // optional decay; constant lr by default
  PowerIterConfig power;          // centrality solver settings

  /// Hierarchy rounds the epoch budget implies: floor((epochs-1)/num), the
  /// number of level transitions actually reached. HM always uses one round.
  int implied_rounds() const { return (epochs - 1) / num; }
  /// Masking level active at an epoch (1-based; level 1 = unmasked).
  int level_at(int epoch) const {
    return variant == Variant::kHM ? 2 : epoch / num + 1;
  }
};

void validate_train_config(const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  int level = 1;
  double loss = 0.0;
  int noisy_count = 0;
  double ms = 0.0;  // wall time; excluded from the determinism contract
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
};

/// One record per line: {"epoch":..,"level":..,"loss":..,"noisy_count":..,
/// "ms":..}. The companion loss file drops the timing field so reruns can be
/// compared byte-for-byte.
void write_report_jsonl(const TrainReport& report, const std::string& path);
void write_loss_jsonl(const TrainReport& report, const std::string& path);

// ---------------------------------------------------------------------------
// Loss pieces
// ---------------------------------------------------------------------------

/// Plain cosine similarity of two equal-length vectors; raises ZeroNormError
/// when either norm is below 1e-12.
double cosine_distance(std::span<const double> a, std::span<const double> b);

/// (1/|V~|) * sum over noisy v of (1 - cos(x_tilde_v, z_v))^2. Rows where
/// either vector is degenerate contribute (1-0)^2 = 1 with zero gradient.
Tensor reconstruction_loss(Tape& tape, Tensor x_tilde, Tensor z,
                           const NodeMask& mask);

/// The full per-epoch objective: corrupt (unless TC), encode, remask, decode,
/// masked cosine error. Shared by the training loop and the gradient checks.
Tensor build_training_loss(Tape& tape, const Mat& features,
                           const AttentionPlan& plan, const ParamStore& params,
                           const ModelConfig& mc, const NodeMask& mask,
                           Variant variant, bool stop_grad_target);

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::map<std::string, Mat> m;  // first moments, keyed like the params
  std::map<std::string, Mat> v;  // second moments
};

/// Bias-corrected Adam over every entry in `grads`, with decoupled weight
/// decay (p -= lr*wd*p) applied first. Parameters without a gradient entry
/// are untouched. The step counter advances once per call.
void adam_step(ParamStore& params, const GradMap& grads, AdamState& state,
               double lr, double weight_decay);

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainResult {
  ParamStore params;
  TrainReport report;
  MaskSchedule schedule;  // rounds == 0 when no masking was needed
};

/// Full training: build the mask schedule from centrality-driven dimension
/// importance (variant-dependent), then per epoch sample a node mask, run
/// the corrupted forward pass, and take an Adam step. Raises AllCleanError
/// when pn leaves no reconstruction targets and NumericError (with the
/// offending epoch) when the loss diverges.
TrainResult train(const Graph& g, const TrainConfig& cfg);

}  // namespace gae
