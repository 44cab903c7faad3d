#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gae/graph.hpp"
#include "gae/mat.hpp"
#include "gae/params.hpp"

namespace gae {

/// Frozen-encoder forward on the original graph and features: no masking,
/// corruption, or re-masking. Deterministic for fixed inputs.
Mat export_embeddings(const Graph& g, const ParamStore& params);

enum class Metric { kAccuracy, kMicroF1 };

const char* metric_name(Metric m);
Metric parse_metric(const std::string& name);

struct ProbeConfig {
  std::vector<double> l2_sweep = {1e-4, 1e-3, 1e-2};  // chosen on val
  int probe_epochs = 300;
  double probe_lr = 0.01;
  std::uint64_t seed = 0;
  Metric metric = Metric::kAccuracy;
};

struct ClassReport {
  int label = 0;
  int support = 0;     // test nodes with this label
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ProbeResult {
  double value = 0.0;       // chosen-model metric on the test split
  double val_value = 0.0;   // same metric on val (selection score)
  double l2_chosen = 0.0;
  std::vector<double> train_loss;  // per-epoch objective of the chosen model
  std::vector<int> predictions;    // per node, -1 where unlabeled inputs
  std::vector<ClassReport> per_class;
};

/// Multinomial logistic regression (softmax cross-entropy + l2 on weights,
/// bias excluded from the penalty) trained full-batch with Adam on the train
/// split; l2 picked by the validation metric (ties -> smaller l2); metric
/// reported on test. Requires labels, a full split, and >= 2 classes in the
/// training rows.
ProbeResult linear_probe(const Mat& embeddings, const std::vector<int>& labels,
                         const std::vector<Split>& split,
                         const ProbeConfig& cfg);

/// Fraction of positions where preds == labels; micro-F1 of single-label
/// multiclass predictions equals accuracy, so both names share this code.
double metric_score(const std::vector<int>& preds,
                    const std::vector<int>& labels, Metric kind);

/// Multi-label micro-F1 with pooled TP/FP/FN counts; each node carries a set
/// of predicted and true labels.
double micro_f1_multilabel(const std::vector<std::vector<int>>& preds,
                           const std::vector<std::vector<int>>& labels);

/// Embeddings TSV: "node_id<TAB>v0<TAB>v1...", one line per node.
void save_embeddings_tsv(const Mat& embeddings, const std::string& path);

}  // namespace gae
