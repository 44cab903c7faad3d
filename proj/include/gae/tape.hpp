#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gae/error.hpp"
#include "gae/kernels.hpp"
#include "gae/mat.hpp"

namespace gae {

class Tape;
class ParamStore;

/// Lightweight handle to a node on a Tape. Values are dense rank-≤2 tensors.
struct Tensor {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& val() const;
  double scalar() const;  // requires 1×1
  int rows() const;
  int cols() const;
  bool defined() const { return tape != nullptr; }
};

/// Gradients keyed by parameter name.
using GradMap = std::map<std::string, Mat>;

/// Append-only record of forward operations with their backward rules.
/// Topological order is insertion order; backward visits nodes in reverse
/// insertion order exactly once. One tape per training step; a tape is
/// confined to a single execution context.
///
/// Every forward op validates that its output is finite and throws
/// FiniteCheckError otherwise.
class Tape {
public:
  /// Constant leaf (no gradient).
  Tensor input(Mat v);

  /// Differentiable leaf registered under `name`.
  Tensor param(const std::string& name, Mat v);

  /// Runs reverse-mode accumulation from a 1×1 scalar. Returns one gradient
  /// per registered parameter (zeros when the parameter never reached the
  /// scalar); non-parameter leaves are skipped.
  GradMap backward(Tensor scalar);

  size_t size() const { return nodes_.size(); }
  const std::vector<std::pair<std::string, int>>& params() const {
    return params_;
  }

  // Node access used by op implementations and backward closures.
  int emplace(const char* op, Mat val, bool requires_grad,
              std::function<void(Tape&)> back = nullptr);
  void set_back(int id, std::function<void(Tape&)> back) {
    nodes_[static_cast<size_t>(id)].back = std::move(back);
  }
  bool requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }
  const Mat& value(int id) const { return nodes_[static_cast<size_t>(id)].val; }
  const Mat& grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }
  bool grad_allocated(int id) const { return !nodes_[static_cast<size_t>(id)].grad.empty(); }
  Mat& ensure_grad(int id);

private:
  struct Node {
    Mat val;
    Mat grad;  // allocated lazily on first accumulation
    bool requires_grad = false;
    std::function<void(Tape&)> back;
  };
  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, int>> params_;  // insertion order
};

// ---------------------------------------------------------------------------
// Forward ops. All record backward rules when an argument requires grad.
// ---------------------------------------------------------------------------

Tensor matmul(Tensor a, Tensor b);

/// add/sub accept equal shapes or a 1×F `b` broadcast across rows of a N×F `a`.
Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);

/// mul additionally accepts an N×1 `b` broadcast across columns.
Tensor mul(Tensor a, Tensor b);

Tensor scale(Tensor a, double c);
Tensor square(Tensor a);
Tensor sum(Tensor a);

/// Mean of the listed rows of an N×1 vector; errors on an empty set.
Tensor mean_over(Tensor a, std::vector<int> row_ids);

Tensor leaky_relu(Tensor a, double negative_slope);

/// PReLU with a trainable 1×1 slope. The kink at exactly 0 takes the
/// positive-branch derivative.
Tensor prelu(Tensor a, Tensor slope);

/// Per-segment softmax of an E×1 logit vector over [offsets[s], offsets[s+1])
/// slices, max-subtracted within each segment.
Tensor segment_softmax(Tensor logits, std::vector<int> offsets);

/// out.row(e) = x.row(plan.idx[e]). The plan must outlive the tape.
Tensor gather_rows(Tensor x, const kern::GatherPlan& plan);

/// out.row(r) = sum of x rows e with plan.idx[e] == r; output has plan.n_src
/// rows. The plan must outlive the tape.
Tensor scatter_add_rows(Tensor x, const kern::GatherPlan& plan);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(Tensor x, int row_begin, int row_end);

/// Per-row cosine of two N×F matrices -> N×1. Rows where either vector has
/// norm < 1e-12 produce 0 with zero gradient.
Tensor row_cosine(Tensor a, Tensor b);

/// Rows with flag set are zeroed; gradient to those rows is zero.
Tensor zero_rows(Tensor x, std::vector<std::uint8_t> flags);

/// Rows with flag set get `w` (1×F) added; clean rows are copied bitwise.
Tensor add_rows_where(Tensor x, Tensor w, std::vector<std::uint8_t> flags);

/// Value copy that blocks gradient flow.
Tensor detach(Tensor x);

// ---------------------------------------------------------------------------
// Finite-difference gradient checker.
// ---------------------------------------------------------------------------

using BuildFn = std::function<Tensor(Tape&, const ParamStore&)>;

/// Central finite differences against tape gradients over every coordinate of
/// every parameter in `params`. `build_fn` must rebuild the same scalar loss
/// deterministically; two baseline evaluations are compared to detect
/// violations. Returns the max relative error
/// |a - fd| / max(1, |a|, |fd|).
double grad_check(ParamStore& params, const BuildFn& build_fn,
                  double eps = 1e-5);

}  // namespace gae
