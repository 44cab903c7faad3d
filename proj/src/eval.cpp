#include "gae/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "gae/error.hpp"
#include "gae/gat.hpp"
#include "gae/kernels.hpp"
#include "gae/rng.hpp"
#include "gae/tape.hpp"
#include "gae/training.hpp"

namespace gae {

Mat export_embeddings(const Graph& g, const ParamStore& params) {
  ModelConfig mc = infer_model_config(params);
  if (mc.in_dim != g.n_dims)
    throw Error("export_embeddings: checkpoint expects " +
                std::to_string(mc.in_dim) + "-dim features, graph has " +
                std::to_string(g.n_dims));
  AttentionPlan plan = build_attention_plan(g);
  Tape tape;
  Tensor h = encode(tape, tape.input(g.features), plan, params, mc);
  return h.val();
}

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::kAccuracy: return "accuracy";
    case Metric::kMicroF1: return "micro_f1";
  }
  throw Error("metric_name: bad metric");
}

Metric parse_metric(const std::string& name) {
  if (name == "accuracy") return Metric::kAccuracy;
  if (name == "micro_f1") return Metric::kMicroF1;
  throw ConfigError("unknown metric '" + name +
                    "' (expected accuracy or micro_f1)");
}

double metric_score(const std::vector<int>& preds,
                    const std::vector<int>& labels, Metric kind) {
  if (preds.size() != labels.size())
    throw Error("metric_score: length mismatch");
  if (preds.empty()) throw Error("metric_score: empty input");
  // Single-label micro-F1 pools one FP and one FN per error, so precision,
  // recall, and F1 all collapse to accuracy.
  (void)kind;
  size_t correct = 0;
  for (size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double micro_f1_multilabel(const std::vector<std::vector<int>>& preds,
                           const std::vector<std::vector<int>>& labels) {
  if (preds.size() != labels.size())
    throw Error("micro_f1_multilabel: length mismatch");
  long tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    std::set<int> p(preds[i].begin(), preds[i].end());
    std::set<int> t(labels[i].begin(), labels[i].end());
    for (int x : p) (t.count(x) ? tp : fp) += 1;
    for (int x : t)
      if (!p.count(x)) ++fn;
  }
  double denom = static_cast<double>(2 * tp + fp + fn);
  return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
}

namespace {

struct ProbeModel {
  Mat w;  // D×C
  Mat b;  // 1×C
};

struct ProbeFit {
  ProbeModel model;
  std::vector<double> train_loss;
};

std::vector<int> rows_of(const std::vector<Split>& split, Split which) {
  std::vector<int> out;
  for (int v = 0; v < static_cast<int>(split.size()); ++v)
    if (split[static_cast<size_t>(v)] == which) out.push_back(v);
  return out;
}

// Softmax cross-entropy + l2*||W||^2 on the listed rows; fills predictions
// for all rows on demand.
double probe_objective(const Mat& emb, const std::vector<int>& labels,
                       const std::vector<int>& rows, const ProbeModel& m,
                       double l2, Mat* grad_w, Mat* grad_b) {
  const int d = emb.cols;
  const int c = m.w.cols;
  double loss = 0.0;
  if (grad_w) {
    *grad_w = Mat(d, c);
    *grad_b = Mat(1, c);
  }
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  std::vector<double> logits(static_cast<size_t>(c));
  for (int v : rows) {
    const double* x = emb.row(v);
    for (int j = 0; j < c; ++j) {
      double z = m.b(0, j);
      for (int i = 0; i < d; ++i) z += x[i] * m.w(i, j);
      logits[static_cast<size_t>(j)] = z;
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& z : logits) {
      z = std::exp(z - mx);
      sum += z;
    }
    int y = labels[static_cast<size_t>(v)];
    double py = logits[static_cast<size_t>(y)] / sum;
    loss -= inv_n * std::log(std::max(py, 1e-300));
    if (grad_w) {
      for (int j = 0; j < c; ++j) {
        double p = logits[static_cast<size_t>(j)] / sum;
        double delta = inv_n * (p - (j == y ? 1.0 : 0.0));
        (*grad_b)(0, j) += delta;
        for (int i = 0; i < d; ++i) (*grad_w)(i, j) += delta * x[i];
      }
    }
  }
  for (size_t i = 0; i < m.w.a.size(); ++i) {
    loss += l2 * m.w.a[i] * m.w.a[i];
    if (grad_w) grad_w->a[i] += 2.0 * l2 * m.w.a[i];
  }
  return loss;
}

ProbeFit fit_probe(const Mat& emb, const std::vector<int>& labels,
                   const std::vector<int>& train_rows, int n_classes,
                   double l2, const ProbeConfig& cfg) {
  ProbeFit fit;
  RngStream rng(cfg.seed, "probe");
  fit.model.w = Mat(emb.cols, n_classes);
  for (double& x : fit.model.w.a) x = rng.normal(0.0, 0.01);
  fit.model.b = Mat(1, n_classes);

  ParamStore params;
  params.add("w", fit.model.w);
  params.add("b", fit.model.b);
  AdamState adam;
  fit.train_loss.reserve(static_cast<size_t>(cfg.probe_epochs));
  for (int epoch = 0; epoch < cfg.probe_epochs; ++epoch) {
    ProbeModel current{params.get("w"), params.get("b")};
    Mat gw, gb;
    double loss = probe_objective(emb, labels, train_rows, current, l2, &gw, &gb);
    fit.train_loss.push_back(loss);
    GradMap grads;
    grads["w"] = std::move(gw);
    grads["b"] = std::move(gb);
    adam_step(params, grads, adam, cfg.probe_lr, 0.0);
  }
  fit.model.w = params.get("w");
  fit.model.b = params.get("b");
  return fit;
}

std::vector<int> predict_all(const Mat& emb, const ProbeModel& m) {
  const int d = emb.cols;
  const int c = m.w.cols;
  std::vector<int> preds(static_cast<size_t>(emb.rows));
  for (int v = 0; v < emb.rows; ++v) {
    const double* x = emb.row(v);
    int best = 0;
    double best_z = -1e300;
    for (int j = 0; j < c; ++j) {
      double z = m.b(0, j);
      for (int i = 0; i < d; ++i) z += x[i] * m.w(i, j);
      if (z > best_z) {
        best_z = z;
        best = j;
      }
    }
    preds[static_cast<size_t>(v)] = best;
  }
  return preds;
}

double score_rows(const std::vector<int>& preds, const std::vector<int>& labels,
                  const std::vector<int>& rows, Metric kind) {
  std::vector<int> p, t;
  p.reserve(rows.size());
  t.reserve(rows.size());
  for (int v : rows) {
    p.push_back(preds[static_cast<size_t>(v)]);
    t.push_back(labels[static_cast<size_t>(v)]);
  }
  return metric_score(p, t, kind);
}

}  // namespace

ProbeResult linear_probe(const Mat& embeddings, const std::vector<int>& labels,
                         const std::vector<Split>& split,
                         const ProbeConfig& cfg) {
  const int n = embeddings.rows;
  if (n < 1) throw Error("linear_probe: no nodes");
  if (static_cast<int>(labels.size()) != n)
    throw Error("linear_probe: need one label per node");
  for (int lbl : labels)
    if (lbl < 0) throw Error("linear_probe: negative label");
  if (static_cast<int>(split.size()) != n)
    throw Error("linear_probe: split must cover all nodes");
  if (cfg.probe_epochs < 1) throw ConfigError("probe: epochs must be >= 1");
  if (!(cfg.probe_lr > 0.0)) throw ConfigError("probe: lr must be > 0");
  if (cfg.l2_sweep.empty()) throw ConfigError("probe: empty l2 sweep");
  for (double l2 : cfg.l2_sweep)
    if (l2 < 0.0) throw ConfigError("probe: l2 must be >= 0");

  int n_classes = 1 + *std::max_element(labels.begin(), labels.end());
  std::vector<int> train_rows = rows_of(split, Split::kTrain);
  std::vector<int> val_rows = rows_of(split, Split::kVal);
  std::vector<int> test_rows = rows_of(split, Split::kTest);
  if (train_rows.empty()) throw Error("linear_probe: empty train split");
  if (val_rows.empty()) throw Error("linear_probe: empty val split");
  if (test_rows.empty()) throw Error("linear_probe: empty test split");
  {
    std::set<int> seen;
    for (int v : train_rows) seen.insert(labels[static_cast<size_t>(v)]);
    if (seen.size() < 2)
      throw Error("linear_probe: training split has a single class");
  }

  // Sweep ascending so equal validation scores keep the smaller l2.
  std::vector<double> sweep = cfg.l2_sweep;
  std::sort(sweep.begin(), sweep.end());

  ProbeResult result;
  bool have_best = false;
  for (double l2 : sweep) {
    ProbeFit fit = fit_probe(embeddings, labels, train_rows, n_classes, l2, cfg);
    std::vector<int> preds = predict_all(embeddings, fit.model);
    double val = score_rows(preds, labels, val_rows, cfg.metric);
    if (!have_best || val > result.val_value) {
      have_best = true;
      result.val_value = val;
      result.l2_chosen = l2;
      result.value = score_rows(preds, labels, test_rows, cfg.metric);
      result.train_loss = std::move(fit.train_loss);
      result.predictions = std::move(preds);
    }
  }

  // Per-class precision/recall/F1 on the test split.
  for (int cls = 0; cls < n_classes; ++cls) {
    ClassReport cr;
    cr.label = cls;
    int tp = 0, fp = 0, fn = 0;
    for (int v : test_rows) {
      bool pred = result.predictions[static_cast<size_t>(v)] == cls;
      bool truth = labels[static_cast<size_t>(v)] == cls;
      cr.support += truth ? 1 : 0;
      if (pred && truth) ++tp;
      else if (pred) ++fp;
      else if (truth) ++fn;
    }
    cr.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
    cr.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
    cr.f1 = cr.precision + cr.recall == 0.0
                ? 0.0
                : 2.0 * cr.precision * cr.recall / (cr.precision + cr.recall);
    result.per_class.push_back(cr);
  }
  return result;
}

void save_embeddings_tsv(const Mat& embeddings, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  char buf[32];
  for (int v = 0; v < embeddings.rows; ++v) {
    os << v;
    for (int c = 0; c < embeddings.cols; ++c) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), embeddings(v, c));
      if (ec != std::errc()) throw Error("save_embeddings_tsv: format failed");
      os << '\t';
      os.write(buf, ptr - buf);
    }
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace gae
