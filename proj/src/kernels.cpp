#include "gae/kernels.hpp"

#include <algorithm>

#include "gae/error.hpp"
#include <atomic>
#include <cassert>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gae::kern {

namespace {
#ifdef _OPENMP
std::atomic<bool> g_parallel{true};
#else
std::atomic<bool> g_parallel{false};
#endif

// Accumulating kernels require a correctly shaped output; plain calls size
// (and zero) it themselves.
void prepare_out(Mat& c, int m, int n, bool accumulate, const char* op) {
  if (accumulate) {
    if (c.rows != m || c.cols != n)
      throw Error(std::string(op) +
                  ": accumulate target has wrong shape, expected " +
                  std::to_string(m) + "x" + std::to_string(n));
  } else {
    if (c.rows != m || c.cols != n) c = Mat(m, n);
    std::fill(c.a.begin(), c.a.end(), 0.0);
  }
}
}  // namespace

void set_parallel(bool on) {
#ifdef _OPENMP
  g_parallel.store(on);
#else
  (void)on;
#endif
}

bool parallel_enabled() { return g_parallel.load(); }

int thread_count() {
#ifdef _OPENMP
  return parallel_enabled() ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

GatherPlan make_gather_plan(std::vector<int> idx, int n_src) {
  GatherPlan p;
  p.n_src = n_src;
  p.offsets.assign(static_cast<size_t>(n_src) + 1, 0);
  for (int i : idx) {
    assert(i >= 0 && i < n_src);
    ++p.offsets[static_cast<size_t>(i) + 1];
  }
  std::partial_sum(p.offsets.begin(), p.offsets.end(), p.offsets.begin());
  p.perm.resize(idx.size());
  std::vector<int> cursor(p.offsets.begin(), p.offsets.end() - 1);
  for (int pos = 0; pos < static_cast<int>(idx.size()); ++pos) {
    p.perm[static_cast<size_t>(cursor[static_cast<size_t>(idx[static_cast<size_t>(pos)])]++)] = pos;
  }
  p.idx = std::move(idx);
  return p;
}

// ---------------------------------------------------------------------------
// Serial reference kernels.
// ---------------------------------------------------------------------------

namespace serial {

void gemm_nn(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
  assert(a.cols == b.rows);
  prepare_out(c, a.rows, b.cols, accumulate, "gemm_nn");
  const int m = a.rows, k = a.cols, n = b.cols;
  for (int i = 0; i < m; ++i) {
    double* cr = c.row(i);
    const double* ar = a.row(i);
    for (int p = 0; p < k; ++p) {
      const double av = ar[p];
      const double* br = b.row(p);
      for (int j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

void gemm_nt(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
  assert(a.cols == b.cols);
  prepare_out(c, a.rows, b.rows, accumulate, "gemm_nt");
  const int m = a.rows, k = a.cols, n = b.rows;
  for (int i = 0; i < m; ++i) {
    double* cr = c.row(i);
    const double* ar = a.row(i);
    for (int j = 0; j < n; ++j) {
      const double* br = b.row(j);
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += ar[p] * br[p];
      cr[j] += acc;
    }
  }
}

void gemm_tn(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
  assert(a.rows == b.rows);
  prepare_out(c, a.cols, b.cols, accumulate, "gemm_tn");
  const int m = a.cols, k = a.rows, n = b.cols;
  for (int i = 0; i < m; ++i) {
    double* cr = c.row(i);
    for (int p = 0; p < k; ++p) {
      const double av = a(p, i);
      const double* br = b.row(p);
      for (int j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

void gather_rows(const Mat& src, std::span<const int> idx, Mat& out) {
  if (out.rows != static_cast<int>(idx.size()) || out.cols != src.cols)
    out = Mat(static_cast<int>(idx.size()), src.cols);
  for (int e = 0; e < static_cast<int>(idx.size()); ++e) {
    const double* s = src.row(idx[static_cast<size_t>(e)]);
    std::copy(s, s + src.cols, out.row(e));
  }
}

void scatter_add_rows(const Mat& src, const GatherPlan& plan, Mat& out,
                      bool accumulate) {
  prepare_out(out, plan.n_src, src.cols, accumulate, "scatter_add_rows");
  const int cols = src.cols;
  for (int r = 0; r < plan.n_src; ++r) {
    double* dst = out.row(r);
    for (int j = plan.offsets[static_cast<size_t>(r)];
         j < plan.offsets[static_cast<size_t>(r) + 1]; ++j) {
      const double* s = src.row(plan.perm[static_cast<size_t>(j)]);
      for (int cidx = 0; cidx < cols; ++cidx) dst[cidx] += s[cidx];
    }
  }
}

namespace {
inline void softmax_segment(std::span<const double> logits, int lo, int hi,
                            std::span<double> out) {
  if (lo >= hi) return;
  double mx = logits[static_cast<size_t>(lo)];
  for (int i = lo + 1; i < hi; ++i)
    mx = std::max(mx, logits[static_cast<size_t>(i)]);
  double sum = 0.0;
  for (int i = lo; i < hi; ++i) {
    const double w = std::exp(logits[static_cast<size_t>(i)] - mx);
    out[static_cast<size_t>(i)] = w;
    sum += w;
  }
  const double inv = 1.0 / sum;
  for (int i = lo; i < hi; ++i) out[static_cast<size_t>(i)] *= inv;
}

inline void softmax_segment_backward(std::span<const double> w,
                                     std::span<const double> g, int lo, int hi,
                                     std::span<double> out) {
  double dot = 0.0;
  for (int i = lo; i < hi; ++i)
    dot += w[static_cast<size_t>(i)] * g[static_cast<size_t>(i)];
  for (int i = lo; i < hi; ++i)
    out[static_cast<size_t>(i)] =
        w[static_cast<size_t>(i)] * (g[static_cast<size_t>(i)] - dot);
}
}  // namespace

void segment_softmax(std::span<const double> logits,
                     std::span<const int> offsets, std::span<double> out) {
  const int n_seg = static_cast<int>(offsets.size()) - 1;
  for (int s = 0; s < n_seg; ++s) {
    softmax_segment(logits, offsets[static_cast<size_t>(s)],
                    offsets[static_cast<size_t>(s) + 1], out);
  }
}

void segment_softmax_backward(std::span<const double> weights,
                              std::span<const double> grad,
                              std::span<const int> offsets,
                              std::span<double> out) {
  const int n_seg = static_cast<int>(offsets.size()) - 1;
  for (int s = 0; s < n_seg; ++s) {
    softmax_segment_backward(weights, grad, offsets[static_cast<size_t>(s)],
                             offsets[static_cast<size_t>(s) + 1], out);
  }
}

void col_sums(const Mat& src, std::span<double> out) {
  assert(static_cast<int>(out.size()) == src.cols);
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i < src.rows; ++i) {
    const double* r = src.row(i);
    for (int j = 0; j < src.cols; ++j) out[static_cast<size_t>(j)] += r[j];
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP kernels. Work is split only across independent output rows/segments
// and every inner accumulation keeps the serial order, so results match the
// reference bitwise.
// ---------------------------------------------------------------------------

namespace parallel {

void gemm_nn(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
  assert(a.cols == b.rows);
  prepare_out(c, a.rows, b.cols, accumulate, "gemm_nn");
  const int m = a.rows, k = a.cols, n = b.cols;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double* cr = c.row(i);
    const double* ar = a.row(i);
    for (int p = 0; p < k; ++p) {
      const double av = ar[p];
      const double* br = b.row(p);
      for (int j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

void gemm_nt(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
  assert(a.cols == b.cols);
  prepare_out(c, a.rows, b.rows, accumulate, "gemm_nt");
  const int m = a.rows, k = a.cols, n = b.rows;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double* cr = c.row(i);
    const double* ar = a.row(i);
    for (int j = 0; j < n; ++j) {
      const double* br = b.row(j);
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += ar[p] * br[p];
      cr[j] += acc;
    }
  }
}

void gemm_tn(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
  assert(a.rows == b.rows);
  prepare_out(c, a.cols, b.cols, accumulate, "gemm_tn");
  const int m = a.cols, k = a.rows, n = b.cols;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double* cr = c.row(i);
    for (int p = 0; p < k; ++p) {
      const double av = a(p, i);
      const double* br = b.row(p);
      for (int j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

void gather_rows(const Mat& src, std::span<const int> idx, Mat& out) {
  if (out.rows != static_cast<int>(idx.size()) || out.cols != src.cols)
    out = Mat(static_cast<int>(idx.size()), src.cols);
  const int n = static_cast<int>(idx.size());
#pragma omp parallel for schedule(static)
  for (int e = 0; e < n; ++e) {
    const double* s = src.row(idx[static_cast<size_t>(e)]);
    std::copy(s, s + src.cols, out.row(e));
  }
}

void scatter_add_rows(const Mat& src, const GatherPlan& plan, Mat& out,
                      bool accumulate) {
  if (accumulate) {
    if (out.rows != plan.n_src || out.cols != src.cols)
      throw Error("scatter_add_rows: accumulate target has wrong shape");
  } else if (out.rows != plan.n_src || out.cols != src.cols) {
    out = Mat(plan.n_src, src.cols);
  }
  const int cols = src.cols;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < plan.n_src; ++r) {
    double* dst = out.row(r);
    if (!accumulate) std::fill(dst, dst + cols, 0.0);
    for (int j = plan.offsets[static_cast<size_t>(r)];
         j < plan.offsets[static_cast<size_t>(r) + 1]; ++j) {
      const double* s = src.row(plan.perm[static_cast<size_t>(j)]);
      for (int cidx = 0; cidx < cols; ++cidx) dst[cidx] += s[cidx];
    }
  }
}

void segment_softmax(std::span<const double> logits,
                     std::span<const int> offsets, std::span<double> out) {
  const int n_seg = static_cast<int>(offsets.size()) - 1;
#pragma omp parallel for schedule(static)
  for (int s = 0; s < n_seg; ++s) {
    serial::softmax_segment(logits, offsets[static_cast<size_t>(s)],
                            offsets[static_cast<size_t>(s) + 1], out);
  }
}

void segment_softmax_backward(std::span<const double> weights,
                              std::span<const double> grad,
                              std::span<const int> offsets,
                              std::span<double> out) {
  const int n_seg = static_cast<int>(offsets.size()) - 1;
#pragma omp parallel for schedule(static)
  for (int s = 0; s < n_seg; ++s) {
    serial::softmax_segment_backward(weights, grad,
                                     offsets[static_cast<size_t>(s)],
                                     offsets[static_cast<size_t>(s) + 1], out);
  }
}

void col_sums(const Mat& src, std::span<double> out) {
  assert(static_cast<int>(out.size()) == src.cols);
  const int cols = src.cols;
#pragma omp parallel for schedule(static)
  for (int j = 0; j < cols; ++j) {
    double acc = 0.0;
    for (int i = 0; i < src.rows; ++i) acc += src(i, j);
    out[static_cast<size_t>(j)] = acc;
  }
}

}  // namespace parallel

// ---------------------------------------------------------------------------
// Dispatchers.
// ---------------------------------------------------------------------------

void gemm_nn(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
  parallel_enabled() ? parallel::gemm_nn(a, b, c, accumulate)
                     : serial::gemm_nn(a, b, c, accumulate);
}
void gemm_nt(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
  parallel_enabled() ? parallel::gemm_nt(a, b, c, accumulate)
                     : serial::gemm_nt(a, b, c, accumulate);
}
void gemm_tn(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
  parallel_enabled() ? parallel::gemm_tn(a, b, c, accumulate)
                     : serial::gemm_tn(a, b, c, accumulate);
}
void gather_rows(const Mat& src, std::span<const int> idx, Mat& out) {
  parallel_enabled() ? parallel::gather_rows(src, idx, out)
                     : serial::gather_rows(src, idx, out);
}
void scatter_add_rows(const Mat& src, const GatherPlan& plan, Mat& out,
                      bool accumulate) {
  parallel_enabled() ? parallel::scatter_add_rows(src, plan, out, accumulate)
                     : serial::scatter_add_rows(src, plan, out, accumulate);
}
void segment_softmax(std::span<const double> logits,
                     std::span<const int> offsets, std::span<double> out) {
  parallel_enabled() ? parallel::segment_softmax(logits, offsets, out)
                     : serial::segment_softmax(logits, offsets, out);
}
void segment_softmax_backward(std::span<const double> weights,
                              std::span<const double> grad,
                              std::span<const int> offsets,
                              std::span<double> out) {
  parallel_enabled()
      ? parallel::segment_softmax_backward(weights, grad, offsets, out)
      : serial::segment_softmax_backward(weights, grad, offsets, out);
}
void col_sums(const Mat& src, std::span<double> out) {
  parallel_enabled() ? parallel::col_sums(src, out)
                     : serial::col_sums(src, out);
}

double reduce_sum(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc;
}

}  // namespace gae::kern
