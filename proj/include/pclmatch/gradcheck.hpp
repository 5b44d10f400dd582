#pragma once

#include <cstdint>
#include <vector>

#include "pclmatch/encoder.hpp"

namespace pclmatch {

struct GradCheckResult {
  double max_rel_err = 0.0;
  int coords_checked = 0;
};

// Central-difference verification of the full model: the scalar under test
// is the mean label-smoothing loss of a random batch, differentiated
// analytically through backward() and numerically coordinate by coordinate
// (step 1e-5). Relative error uses a unit floor: |a-d| / max(1, |a|+|d|).
GradCheckResult grad_check_random_config(std::uint64_t seed, int coords_per_config,
                                         int config_count);

// Same check for one given parameter set and batch.
GradCheckResult grad_check(const EncoderParams& params, const std::vector<InputSequence>& batch,
                           const std::vector<int>& labels, double alpha, int coords,
                           std::uint64_t coord_seed);

}  // namespace pclmatch
