#include "gae/corruption.hpp"

#include "gae/error.hpp"

namespace gae {

std::vector<int> NodeMask::noisy_ids() const {
  std::vector<int> ids;
  ids.reserve(static_cast<size_t>(count));
  for (int v = 0; v < static_cast<int>(flags.size()); ++v)
    if (flags[static_cast<size_t>(v)]) ids.push_back(v);
  return ids;
}

NodeMask sample_node_mask(int n, double pn, RngStream& rng) {
  if (n <= 0) throw Error("sample_node_mask: n must be positive");
  if (!(pn >= 0.0 && pn <= 1.0))
    throw ConfigError("sample_node_mask: pn must be in [0,1], got " +
                      std::to_string(pn));
  constexpr int kMaxRetries = 100;
  NodeMask mask;
  mask.flags.resize(static_cast<size_t>(n));
  if (pn == 0.0) {
    std::fill(mask.flags.begin(), mask.flags.end(), 0);
    mask.count = 0;
    return mask;
  }
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    mask.count = 0;
    for (int v = 0; v < n; ++v) {
      bool noisy = rng.bernoulli(pn);
      mask.flags[static_cast<size_t>(v)] = noisy ? 1 : 0;
      mask.count += noisy ? 1 : 0;
    }
    if (mask.count > 0) return mask;
  }
  throw AllCleanError("sample_node_mask: no noisy node after " +
                      std::to_string(kMaxRetries) + " attempts (pn=" +
                      std::to_string(pn) + ", n=" + std::to_string(n) + ")");
}

Tensor apply_corruption(Tensor x, Tensor w, const NodeMask& mask) {
  if (static_cast<int>(mask.flags.size()) != x.rows())
    throw Error("apply_corruption: mask covers " +
                std::to_string(mask.flags.size()) + " nodes, features have " +
                std::to_string(x.rows()) + " rows");
  return add_rows_where(x, w, mask.flags);
}

Mat init_noise_vector(int f, RngStream& rng) {
  if (f <= 0) throw Error("init_noise_vector: need at least one dimension");
  Mat w(1, f);
  for (double& x : w.a) x = rng.normal(0.0, 0.02);
  return w;
}

}  // namespace gae
