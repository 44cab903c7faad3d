#include "gae/gat.hpp"

#include <cmath>

#include "gae/error.hpp"

namespace gae {

namespace {
constexpr double kLeakySlope = 0.2;
constexpr double kPreluInit = 0.25;

std::string head_name(const std::string& prefix, int k, const char* which) {
  return prefix + ".h" + std::to_string(k) + "." + which;
}
}  // namespace

AttentionPlan build_attention_plan(const Graph& g) {
  Graph aug = with_self_loops(g);
  AttentionPlan plan;
  plan.n_nodes = aug.n_nodes;
  plan.n_edges = aug.edge_count();
  std::vector<int> src_ids;
  std::vector<int> dst_ids;
  src_ids.reserve(static_cast<size_t>(plan.n_edges));
  dst_ids.reserve(static_cast<size_t>(plan.n_edges));
  for (int v = 0; v < aug.n_nodes; ++v)
    for (int u : aug.neighbors_in(v)) {
      src_ids.push_back(u);
      dst_ids.push_back(v);
    }
  plan.seg_offsets = aug.in_offsets;
  plan.src_plan = kern::make_gather_plan(std::move(src_ids), aug.n_nodes);
  plan.dst_plan = kern::make_gather_plan(std::move(dst_ids), aug.n_nodes);
  return plan;
}

void validate_model_config(const ModelConfig& cfg) {
  if (cfg.in_dim <= 0) throw ConfigError("model: in_dim must be positive");
  if (cfg.hidden <= 0) throw ConfigError("model: hidden must be positive");
  if (cfg.heads <= 0) throw ConfigError("model: heads must be positive");
  if (cfg.hidden % cfg.heads != 0)
    throw ConfigError("model: hidden (" + std::to_string(cfg.hidden) +
                      ") must be divisible by heads (" +
                      std::to_string(cfg.heads) + ")");
}

std::vector<GatLayerSpec> encoder_layers(const ModelConfig& cfg) {
  validate_model_config(cfg);
  int fh = cfg.hidden / cfg.heads;
  return {
      {"enc.l1", cfg.heads, cfg.in_dim, fh, Combine::kConcat, Activation::kPrelu},
      {"enc.l2", cfg.heads, cfg.hidden, fh, Combine::kConcat, Activation::kPrelu},
  };
}

std::vector<GatLayerSpec> decoder_layers(const ModelConfig& cfg) {
  validate_model_config(cfg);
  int fh = cfg.hidden / cfg.heads;
  return {
      {"dec.l1", cfg.heads, cfg.hidden, fh, Combine::kConcat, Activation::kPrelu},
      {"dec.l2", cfg.heads, cfg.hidden, cfg.in_dim, Combine::kAverage,
       Activation::kIdentity},
  };
}

namespace {

Mat glorot(RngStream& rng, int rows, int cols, int fan_in, int fan_out) {
  double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Mat m(rows, cols);
  for (double& x : m.a) x = rng.uniform(-s, s);
  return m;
}

void init_layer(ParamStore& store, const GatLayerSpec& spec, RngStream& rng) {
  for (int k = 0; k < spec.heads; ++k) {
    store.add(head_name(spec.prefix, k, "W"),
              glorot(rng, spec.f_in, spec.f_head, spec.f_in, spec.f_head));
    store.add(head_name(spec.prefix, k, "a"),
              glorot(rng, 2 * spec.f_head, 1, 2 * spec.f_head, 1));
  }
  if (spec.act == Activation::kPrelu)
    store.add(spec.prefix + ".prelu", Mat::full(1, 1, kPreluInit));
}

}  // namespace

ParamStore init_model_params(const ModelConfig& cfg, RngStream& rng) {
  ParamStore store;
  for (const GatLayerSpec& spec : encoder_layers(cfg)) init_layer(store, spec, rng);
  for (const GatLayerSpec& spec : decoder_layers(cfg)) init_layer(store, spec, rng);
  store.add("noise.w", init_noise_vector(cfg.in_dim, rng));
  return store;
}

ModelConfig infer_model_config(const ParamStore& params) {
  if (!params.has("enc.l1.h0.W"))
    throw Error("checkpoint lacks enc.l1.h0.W; not a model archive");
  ModelConfig cfg;
  const Mat& w0 = params.get("enc.l1.h0.W");
  cfg.in_dim = w0.rows;
  int heads = 0;
  while (params.has(head_name("enc.l1", heads, "W"))) ++heads;
  cfg.heads = heads;
  cfg.hidden = heads * w0.cols;
  validate_model_config(cfg);
  // Cross-check the decoder agrees on F and hidden.
  const Mat& dec_w = params.get("dec.l2.h0.W");
  if (dec_w.rows != cfg.hidden || dec_w.cols != cfg.in_dim)
    throw Error("checkpoint shapes inconsistent: dec.l2.h0.W is " +
                std::to_string(dec_w.rows) + "x" + std::to_string(dec_w.cols) +
                ", expected " + std::to_string(cfg.hidden) + "x" +
                std::to_string(cfg.in_dim));
  return cfg;
}

Tensor gat_layer_forward(Tape& tape, Tensor h, const AttentionPlan& plan,
                         const ParamStore& params, const GatLayerSpec& spec) {
  if (h.rows() != plan.n_nodes)
    throw Error(spec.prefix + ": input has " + std::to_string(h.rows()) +
                " rows, plan covers " + std::to_string(plan.n_nodes));
  if (h.cols() != spec.f_in)
    throw Error(spec.prefix + ": input width " + std::to_string(h.cols()) +
                ", expected " + std::to_string(spec.f_in));

  std::vector<Tensor> head_outs;
  head_outs.reserve(static_cast<size_t>(spec.heads));
  for (int k = 0; k < spec.heads; ++k) {
    Tensor w = params.lease(tape, head_name(spec.prefix, k, "W"));
    Tensor a = params.lease(tape, head_name(spec.prefix, k, "a"));
    Tensor wh = matmul(h, w);  // N×f_head
    // Split a into its destination and source halves; logits decompose as
    // a^T [Wh_v || Wh_u] = (a_dst . Wh_v) + (a_src . Wh_u).
    Tensor score_dst = matmul(wh, slice_rows(a, 0, spec.f_head));
    Tensor score_src = matmul(wh, slice_rows(a, spec.f_head, 2 * spec.f_head));
    Tensor logits = leaky_relu(add(gather_rows(score_dst, plan.dst_plan),
                                   gather_rows(score_src, plan.src_plan)),
                               kLeakySlope);
    Tensor att = segment_softmax(logits, plan.seg_offsets);
    Tensor messages = mul(gather_rows(wh, plan.src_plan), att);
    head_outs.push_back(scatter_add_rows(messages, plan.dst_plan));
  }

  Tensor combined;
  if (spec.combine == Combine::kConcat) {
    combined = concat_cols(head_outs);
  } else {
    combined = head_outs[0];
    for (size_t k = 1; k < head_outs.size(); ++k)
      combined = add(combined, head_outs[k]);
    combined = scale(combined, 1.0 / static_cast<double>(spec.heads));
  }
  if (spec.act == Activation::kPrelu)
    combined = prelu(combined, params.lease(tape, spec.prefix + ".prelu"));
  return combined;
}

Tensor encode(Tape& tape, Tensor x, const AttentionPlan& plan,
              const ParamStore& params, const ModelConfig& cfg) {
  Tensor h = x;
  for (const GatLayerSpec& spec : encoder_layers(cfg))
    h = gat_layer_forward(tape, h, plan, params, spec);
  return h;
}

Tensor remask(Tensor h, const NodeMask& mask) {
  if (static_cast<int>(mask.flags.size()) != h.rows())
    throw Error("remask: mask covers " + std::to_string(mask.flags.size()) +
                " nodes, hidden has " + std::to_string(h.rows()) + " rows");
  return zero_rows(h, mask.flags);
}

Tensor decode(Tape& tape, Tensor h, const AttentionPlan& plan,
              const ParamStore& params, const ModelConfig& cfg) {
  Tensor z = h;
  for (const GatLayerSpec& spec : decoder_layers(cfg))
    z = gat_layer_forward(tape, z, plan, params, spec);
  return z;
}

}  // namespace gae
