#pragma once

#include <cstdint>
#include <vector>

#include "gae/masking.hpp"
#include "gae/rng.hpp"
#include "gae/tape.hpp"

namespace gae {

/// Which nodes get noise added, have their hidden code re-masked, and enter
/// the reconstruction loss.
struct NodeMask {
  std::vector<std::uint8_t> flags;  // 1 = noisy
  int count = 0;

  std::vector<int> noisy_ids() const;
};

/// Each node is independently noisy with probability pn. When pn > 0 an
/// all-clean draw is resampled (up to 100 retries) so training always has a
/// loss term; exhausting the retries raises AllCleanError. pn == 0 returns
/// the all-clean mask (the training loop rejects it).
NodeMask sample_node_mask(int n, double pn, RngStream& rng);

/// Tape op: row v of the result is x_v + w for noisy v, x_v bitwise
/// otherwise. Gradients flow to both x and the shared noise vector w (1xF).
Tensor apply_corruption(Tensor x, Tensor w, const NodeMask& mask);

/// Fresh noise-vector initialization: Gaussian(0, 0.02) entries.
Mat init_noise_vector(int f, RngStream& rng);

}  // namespace gae
