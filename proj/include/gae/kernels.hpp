#pragma once

#include <span>
#include <vector>

#include "gae/mat.hpp"

namespace gae::kern {

/// Runtime switch between the serial reference kernels and the OpenMP ones.
/// Defaults to parallel when compiled with OpenMP. Both paths produce
/// bit-identical results: parallelism is only ever across independent output
/// rows/segments and every accumulation keeps a fixed order, so strict mode
/// is about execution policy, not accuracy.
void set_parallel(bool on);
bool parallel_enabled();
int thread_count();

/// Precomputed index plan for gather/scatter pairs. `idx[e]` is the source
/// row of output row e. `offsets`/`perm` group the positions of `idx` by
/// source row (stable), which lets the transposed scatter run parallel over
/// destination rows with a deterministic per-row order.
struct GatherPlan {
  std::vector<int> idx;
  int n_src = 0;
  std::vector<int> offsets;  // n_src + 1
  std::vector<int> perm;     // idx.size()
};

GatherPlan make_gather_plan(std::vector<int> idx, int n_src);

// GEMM family, row-major, C overwritten unless accumulate.
void gemm_nn(const Mat& a, const Mat& b, Mat& c, bool accumulate = false);
void gemm_nt(const Mat& a, const Mat& b, Mat& c, bool accumulate = false);
void gemm_tn(const Mat& a, const Mat& b, Mat& c, bool accumulate = false);

/// out.row(e) = src.row(idx[e])
void gather_rows(const Mat& src, std::span<const int> idx, Mat& out);

/// out.row(r) += / = sum of src rows e with plan.idx[e] == r.
void scatter_add_rows(const Mat& src, const GatherPlan& plan, Mat& out,
                      bool accumulate = false);

/// Softmax within each [offsets[s], offsets[s+1]) slice of `logits`,
/// max-subtracted for overflow safety. Empty segments are skipped.
void segment_softmax(std::span<const double> logits,
                     std::span<const int> offsets, std::span<double> out);

/// dlogits for segment_softmax: w .* (g - <w, g>_segment).
void segment_softmax_backward(std::span<const double> weights,
                              std::span<const double> grad,
                              std::span<const int> offsets,
                              std::span<double> out);

/// out[j] = sum over rows of src(:, j); out has src.cols entries.
void col_sums(const Mat& src, std::span<double> out);

/// Deterministic (serial) full reduction.
double reduce_sum(std::span<const double> v);

// Serial reference implementations, kept callable for the equivalence tests
// and the benchmark target.
namespace serial {
void gemm_nn(const Mat& a, const Mat& b, Mat& c, bool accumulate);
void gemm_nt(const Mat& a, const Mat& b, Mat& c, bool accumulate);
void gemm_tn(const Mat& a, const Mat& b, Mat& c, bool accumulate);
void gather_rows(const Mat& src, std::span<const int> idx, Mat& out);
void scatter_add_rows(const Mat& src, const GatherPlan& plan, Mat& out,
                      bool accumulate);
void segment_softmax(std::span<const double> logits,
                     std::span<const int> offsets, std::span<double> out);
void segment_softmax_backward(std::span<const double> weights,
                              std::span<const double> grad,
                              std::span<const int> offsets,
                              std::span<double> out);
void col_sums(const Mat& src, std::span<double> out);
}  // namespace serial

namespace parallel {
void gemm_nn(const Mat& a, const Mat& b, Mat& c, bool accumulate);
void gemm_nt(const Mat& a, const Mat& b, Mat& c, bool accumulate);
void gemm_tn(const Mat& a, const Mat& b, Mat& c, bool accumulate);
void gather_rows(const Mat& src, std::span<const int> idx, Mat& out);
void scatter_add_rows(const Mat& src, const GatherPlan& plan, Mat& out,
                      bool accumulate);
void segment_softmax(std::span<const double> logits,
                     std::span<const int> offsets, std::span<double> out);
void segment_softmax_backward(std::span<const double> weights,
                              std::span<const double> grad,
                              std::span<const int> offsets,
                              std::span<double> out);
void col_sums(const Mat& src, std::span<double> out);
}  // namespace parallel

}  // namespace gae::kern
