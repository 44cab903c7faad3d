#include "gae/training.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "gae/error.hpp"
#include "gae/rng.hpp"

namespace gae {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "Full";
    case Variant::kAM: return "AM";
    case Variant::kHM: return "HM";
    case Variant::kTC: return "TC";
  }
  throw Error("variant_name: bad variant");
}

Variant parse_variant(const std::string& name) {
  if (name == "Full" || name == "full") return Variant::kFull;
  if (name == "AM" || name == "am") return Variant::kAM;
  if (name == "HM" || name == "hm") return Variant::kHM;
  if (name == "TC" || name == "tc") return Variant::kTC;
  throw ConfigError("unknown variant '" + name +
                    "' (expected Full, AM, HM, or TC)");
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (cfg.num < 1) throw ConfigError("train: num must be >= 1");
  if (!(cfg.pf > 0.0 && cfg.pf < 1.0))
    throw ConfigError("train: pf must be in (0,1), got " + std::to_string(cfg.pf));
  if (!(cfg.pn >= 0.0 && cfg.pn <= 1.0))
    throw ConfigError("train: pn must be in [0,1], got " + std::to_string(cfg.pn));
  if (!(cfg.lr > 0.0)) throw ConfigError("train: lr must be > 0");
  if (cfg.weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
  ModelConfig mc{1, cfg.hidden, cfg.heads};
  validate_model_config(mc);
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf, ptr);
}

void write_jsonl(const TrainReport& report, const std::string& path,
                 bool with_ms) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  for (const EpochRecord& r : report.epochs) {
    os << "{\"epoch\":" << r.epoch << ",\"level\":" << r.level
       << ",\"loss\":" << format_double(r.loss)
       << ",\"noisy_count\":" << r.noisy_count;
    if (with_ms) os << ",\"ms\":" << format_double(r.ms);
    os << "}\n";
  }
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace

void write_report_jsonl(const TrainReport& report, const std::string& path) {
  write_jsonl(report, path, /*with_ms=*/true);
}

void write_loss_jsonl(const TrainReport& report, const std::string& path) {
  write_jsonl(report, path, /*with_ms=*/false);
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  constexpr double kNormFloor = 1e-12;
  if (a.size() != b.size())
    throw Error("cosine_distance: length mismatch (" + std::to_string(a.size()) +
                " vs " + std::to_string(b.size()) + ")");
  double na = 0.0, nb = 0.0, dot = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
    dot += a[i] * b[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < kNormFloor || nb < kNormFloor)
    throw ZeroNormError("cosine_distance: vector norm below 1e-12");
  return dot / (na * nb);
}

Tensor reconstruction_loss(Tape& tape, Tensor x_tilde, Tensor z,
                           const NodeMask& mask) {
  if (mask.count < 1)
    throw AllCleanError("reconstruction_loss: no noisy nodes to reconstruct");
  Tensor cos = row_cosine(x_tilde, z);
  Tensor one = tape.input(Mat::full(cos.rows(), 1, 1.0));
  return mean_over(square(sub(one, cos)), mask.noisy_ids());
}

Tensor build_training_loss(Tape& tape, const Mat& features,
                           const AttentionPlan& plan, const ParamStore& params,
                           const ModelConfig& mc, const NodeMask& mask,
                           Variant variant, bool stop_grad_target) {
  Tensor x = tape.input(features);
  Tensor x_tilde = x;
  if (variant != Variant::kTC) {
    Tensor w = params.lease(tape, "noise.w");
    x_tilde = apply_corruption(x, w, mask);
  }
  Tensor h = encode(tape, x_tilde, plan, params, mc);
  Tensor h_tilde = remask(h, mask);
  Tensor z = decode(tape, h_tilde, plan, params, mc);
  Tensor target = stop_grad_target ? detach(x_tilde) : x_tilde;
  return reconstruction_loss(tape, target, z, mask);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void adam_step(ParamStore& params, const GradMap& grads, AdamState& state,
               double lr, double weight_decay) {
  ++state.t;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (const auto& [name, g] : grads) {
    Mat& p = params.get(name);
    if (!p.same_shape(g))
      throw Error("adam_step: gradient shape mismatch for '" + name + "'");
    auto [mit, fresh_m] = state.m.try_emplace(name, Mat(p.rows, p.cols));
    auto [vit, fresh_v] = state.v.try_emplace(name, Mat(p.rows, p.cols));
    Mat& m = mit->second;
    Mat& v = vit->second;
    if (!fresh_m && !m.same_shape(p))
      throw Error("adam_step: stale moment shape for '" + name + "'");
    for (size_t i = 0; i < p.a.size(); ++i) {
      if (weight_decay != 0.0) p.a[i] -= lr * weight_decay * p.a[i];
      m.a[i] = state.beta1 * m.a[i] + (1.0 - state.beta1) * g.a[i];
      v.a[i] = state.beta2 * v.a[i] + (1.0 - state.beta2) * g.a[i] * g.a[i];
      double m_hat = m.a[i] / bc1;
      double v_hat = v.a[i] / bc2;
      p.a[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

MaskSchedule make_schedule(const Graph& g, const TrainConfig& cfg, int rounds) {
  if (cfg.variant == Variant::kAM) {
    // Random-masking ablation: seeded uniform dimension order.
    std::vector<int> order(static_cast<size_t>(g.n_dims));
    std::iota(order.begin(), order.end(), 0);
    RngStream rng(cfg.seed, "am_order");
    rng.shuffle(order);
    return build_mask_schedule_with_order(std::move(order), cfg.pf, rounds);
  }
  NodeScores scores = node_scores(g, cfg.centrality, cfg.power);
  DimensionScores sd = dimension_importance(g, scores);
  return build_mask_schedule(sd, cfg.pf, rounds);
}

}  // namespace

TrainResult train(const Graph& g, const TrainConfig& cfg) {
  validate_train_config(cfg);

  int rounds = cfg.variant == Variant::kHM ? 1 : cfg.implied_rounds();
  TrainResult result;
  if (rounds >= 1) result.schedule = make_schedule(g, cfg, rounds);

  ModelConfig mc{g.n_dims, cfg.hidden, cfg.heads};
  RngStream init_rng(cfg.seed, "init");
  result.params = init_model_params(mc, init_rng);
  AttentionPlan plan = build_attention_plan(g);
  RngStream mask_rng(cfg.seed, "node_mask");
  AdamState adam;

  // Levels revisit the same matrices many epochs in a row; cache them.
  std::vector<Mat> level_features(static_cast<size_t>(rounds) + 2);
  std::vector<bool> level_ready(static_cast<size_t>(rounds) + 2, false);
  auto features_for = [&](int level) -> const Mat& {
    auto idx = static_cast<size_t>(level);
    if (!level_ready[idx]) {
      level_features[idx] =
          level == 1 ? g.features
                     : features_at_level(g, result.schedule, level).matrix;
      level_ready[idx] = true;
    }
    return level_features[idx];
  };

  result.report.epochs.reserve(static_cast<size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto started = std::chrono::steady_clock::now();
    int level = cfg.level_at(epoch);
    const Mat& features = features_for(level);

    NodeMask mask = sample_node_mask(g.n_nodes, cfg.pn, mask_rng);
    if (mask.count == 0)
      throw AllCleanError("train: pn=" + std::to_string(cfg.pn) +
                          " leaves no noisy nodes; nothing to reconstruct");

    double lr = cfg.lr;
    if (cfg.cosine_lr)
      lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) /
                                  static_cast<double>(cfg.epochs)));

    double loss_value = 0.0;
    try {
      Tape tape;
      Tensor loss = build_training_loss(tape, features, plan, result.params, mc,
                                        mask, cfg.variant, cfg.stop_grad_target);
      loss_value = loss.scalar();
      GradMap grads = tape.backward(loss);
      adam_step(result.params, grads, adam, lr, cfg.weight_decay);
    } catch (const FiniteCheckError& e) {
      throw NumericError("train: diverged at epoch " + std::to_string(epoch) +
                         ": " + e.what());
    }

    double ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - started)
                    .count();
    result.report.epochs.push_back(
        {epoch, level, loss_value, mask.count, ms});
  }
  return result;
}

}  // namespace gae
