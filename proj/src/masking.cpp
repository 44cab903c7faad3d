#include "gae/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gae/error.hpp"

namespace gae {

DimensionScores dimension_importance(const Graph& g, const NodeScores& s) {
  if (static_cast<int>(s.values.size()) != g.n_nodes)
    throw Error("dimension_importance: " + std::to_string(s.values.size()) +
                " scores for " + std::to_string(g.n_nodes) + " nodes");
  DimensionScores sd;
  sd.values.assign(static_cast<size_t>(g.n_dims), 0.0);
  for (int v = 0; v < g.n_nodes; ++v) {
    double sv = s.values[static_cast<size_t>(v)];
    for (int d = 0; d < g.n_dims; ++d)
      sd.values[static_cast<size_t>(d)] += sv * std::abs(g.features(v, d));
  }
  return sd;
}

MaskSchedule build_mask_schedule_with_order(std::vector<int> order, double pf,
                                            int rounds) {
  const int f = static_cast<int>(order.size());
  if (!(pf > 0.0 && pf < 1.0))
    throw ConfigError("mask schedule: pf must be in (0,1), got " +
                      std::to_string(pf));
  if (rounds < 1) throw ConfigError("mask schedule: rounds must be >= 1");
  if (f < 2) throw ConfigError("mask schedule: need at least 2 dimensions");
  {
    std::vector<int> check = order;
    std::sort(check.begin(), check.end());
    for (int d = 0; d < f; ++d)
      if (check[static_cast<size_t>(d)] != d)
        throw ConfigError("mask schedule: order is not a permutation of [0,F)");
  }

  MaskSchedule sched;
  sched.order = std::move(order);
  sched.pf = pf;
  sched.rounds = rounds;

  int masked = 0;
  for (int i = 1; i <= rounds; ++i) {
    int remaining = f - masked;
    // Tiny nudge so counts like 0.3*10 land on the intended integer instead
    // of one below it when the product is stored just under it.
    int m = static_cast<int>(
        std::floor(static_cast<double>(remaining) * pf + 1e-9));
    if (m == 0)
      throw ScheduleExhaustedError(
          "mask schedule exhausted at round " + std::to_string(i) + " (" +
              std::to_string(remaining) + " dimensions remain, pf=" +
              std::to_string(pf) + ")",
          i - 1);
    masked += m;
    sched.counts.push_back(m);
    sched.cumulative.emplace_back(sched.order.begin(),
                                  sched.order.begin() + masked);
  }
  return sched;
}

MaskSchedule build_mask_schedule(const DimensionScores& sd, double pf,
                                 int rounds) {
  const int f = static_cast<int>(sd.values.size());
  for (double v : sd.values)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw Error("mask schedule: importance scores must be finite and >= 0");
  std::vector<int> order(static_cast<size_t>(f));
  std::iota(order.begin(), order.end(), 0);
  // Least important first; equal scores keep ascending index order.
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return sd.values[static_cast<size_t>(a)] < sd.values[static_cast<size_t>(b)];
  });
  return build_mask_schedule_with_order(std::move(order), pf, rounds);
}

Mat apply_adaptive_mask(const Mat& x, const std::vector<int>& dims) {
  for (int d : dims)
    if (d < 0 || d >= x.cols)
      throw Error("apply_adaptive_mask: dimension " + std::to_string(d) +
                  " out of range for F=" + std::to_string(x.cols));
  Mat out = x;
  for (int r = 0; r < out.rows; ++r) {
    double* row = out.row(r);
    for (int d : dims) row[d] = 0.0;
  }
  return out;
}

HierarchicalFeatures features_at_level(const Graph& g,
                                       const MaskSchedule& sched, int level) {
  if (level < 1 || level > sched.rounds + 1)
    throw Error("features_at_level: level " + std::to_string(level) +
                " outside [1, " + std::to_string(sched.rounds + 1) + "]");
  HierarchicalFeatures hf;
  hf.level = level;
  hf.matrix = level == 1 ? g.features
                         : apply_adaptive_mask(
                               g.features,
                               sched.cumulative[static_cast<size_t>(level) - 2]);
  return hf;
}

}  // namespace gae
