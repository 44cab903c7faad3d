#pragma once

#include <vector>

#include "gae/centrality.hpp"
#include "gae/graph.hpp"
#include "gae/mat.hpp"

namespace gae {

/// Per-dimension importance: values[d] = sum_v node_score_v * |X_vd|.
struct DimensionScores {
  std::vector<double> values;
};

/// Progressive feature-dimension masking plan. Round i masks counts[i-1]
/// further dimensions, always taking the least important unmasked ones, so
/// the masked set grows monotonically and never covers all of F.
struct MaskSchedule {
  std::vector<int> order;  // all dims, ascending importance, index tie-break
  double pf = 0.0;         // masking rate per round
  int rounds = 0;
  std::vector<int> counts;                   // m_1 .. m_R
  std::vector<std::vector<int>> cumulative;  // masked set after each round

  int total_masked() const {
    return cumulative.empty() ? 0 : static_cast<int>(cumulative.back().size());
  }
};

/// Features with the schedule's first (level-1) rounds applied. Level 1 is
/// the untouched input.
struct HierarchicalFeatures {
  int level = 1;
  Mat matrix;
};

DimensionScores dimension_importance(const Graph& g, const NodeScores& s);

/// Builds the masking plan from an importance ordering. Count recurrence:
/// m_1 = floor(F*pf); thereafter m_i = floor(remaining_i * pf) with
/// remaining_i = F - sum_{j<i} m_j. A round whose count reaches zero makes
/// the configuration infeasible and raises ScheduleExhaustedError carrying
/// the last feasible round.
MaskSchedule build_mask_schedule(const DimensionScores& sd, double pf,
                                 int rounds);

/// Same plan but with a caller-supplied dimension order (used by the
/// random-masking ablation). `order` must be a permutation of [0, F).
MaskSchedule build_mask_schedule_with_order(std::vector<int> order, double pf,
                                            int rounds);

/// Returns a copy of x with the listed columns zeroed in every row.
Mat apply_adaptive_mask(const Mat& x, const std::vector<int>& dims);

/// Level n features: level 1 is g.features bitwise; level n>1 zeroes the
/// schedule's cumulative set after round n-1. Valid levels: 1..rounds+1.
HierarchicalFeatures features_at_level(const Graph& g,
                                       const MaskSchedule& sched, int level);

}  // namespace gae
