#pragma once

#include <string>
#include <vector>

#include "gae/corruption.hpp"
#include "gae/graph.hpp"
#include "gae/kernels.hpp"
#include "gae/params.hpp"
#include "gae/rng.hpp"
#include "gae/tape.hpp"

namespace gae {

/// Precomputed gather/scatter plans for attention over a graph. Edges are
/// enumerated destination-major (the self-loop-augmented in-CSR order), so
/// seg_offsets delimit each destination's incoming block and double as the
/// softmax segment boundaries. Built once per graph and shared by every
/// forward pass; must outlive any tape that uses it.
struct AttentionPlan {
  int n_nodes = 0;
  int n_edges = 0;
  kern::GatherPlan src_plan;      // idx[e] = source of edge e
  kern::GatherPlan dst_plan;      // idx[e] = destination of edge e
  std::vector<int> seg_offsets;   // == in-CSR offsets of the augmented graph
};

/// Adds self-loops (so every softmax segment is nonempty) and indexes the
/// result.
AttentionPlan build_attention_plan(const Graph& g);

struct ModelConfig {
  int in_dim = 0;   // F
  int hidden = 64;  // encoder output width; must be divisible by heads
  int heads = 4;
};

void validate_model_config(const ModelConfig& cfg);

enum class Combine { kConcat, kAverage };
enum class Activation { kPrelu, kIdentity };

/// One attention layer's shape and parameter naming. Parameters live in a
/// ParamStore under "<prefix>.h<k>.W" (f_in×f_head), "<prefix>.h<k>.a"
/// (2·f_head×1), and "<prefix>.prelu" (1×1) when activated.
struct GatLayerSpec {
  std::string prefix;
  int heads = 0;
  int f_in = 0;
  int f_head = 0;
  Combine combine = Combine::kConcat;
  Activation act = Activation::kPrelu;

  int f_out() const { return combine == Combine::kConcat ? heads * f_head : f_head; }
};

/// Encoder: two concat+PReLU layers F -> hidden -> hidden.
std::vector<GatLayerSpec> encoder_layers(const ModelConfig& cfg);
/// Decoder: concat+PReLU hidden -> hidden, then head-averaged identity
/// hidden -> F (averaging reaches arbitrary F where concat cannot).
std::vector<GatLayerSpec> decoder_layers(const ModelConfig& cfg);

/// Glorot-uniform weights and attention vectors, PReLU slopes at 0.25, plus
/// the shared corruption vector "noise.w" ~ N(0, 0.02).
ParamStore init_model_params(const ModelConfig& cfg, RngStream& rng);

/// Recovers the configuration from checkpoint tensor shapes.
ModelConfig infer_model_config(const ParamStore& params);

/// One multi-head attention layer: per head k, logits
/// e_vu = LeakyReLU(a_k^T [W_k h_v || W_k h_u]) over each v's incoming edges
/// (self-loop included), softmax per destination, h'_v = sum_u att_vu W_k h_u;
/// heads combined per spec, then the layer activation.
Tensor gat_layer_forward(Tape& tape, Tensor h, const AttentionPlan& plan,
                         const ParamStore& params, const GatLayerSpec& spec);

Tensor encode(Tape& tape, Tensor x, const AttentionPlan& plan,
              const ParamStore& params, const ModelConfig& cfg);

/// Zeroes noisy nodes' hidden rows; their gradients are blocked exactly.
Tensor remask(Tensor h, const NodeMask& mask);

Tensor decode(Tape& tape, Tensor h, const AttentionPlan& plan,
              const ParamStore& params, const ModelConfig& cfg);

}  // namespace gae
