// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "qscale/law.hpp"
#include "qscale/rng.hpp"

namespace testutil {

inline std::string data_path(const std::string& name) {
  return std::string(QSCALE_DATA_DIR) + "/" + name;
}

// Table 1 rows (Huber estimation).
inline qscale::ScalingParams clm_huber_params() {
  return qscale::ScalingParams::reduced(1441.505289, 0.395859, 0.400657,
                                        3.439047);
}

inline qscale::ScalingParams nmt_huber_params() {
  return qscale::ScalingParams::reduced(139.602744, 0.250067, 0.173161,
                                        0.066539);
}

// Uniform draw in [lo, hi) for randomized property tests.
inline double uniform_in(qscale::rng::SplitMix64& stream, double lo,
                         double hi) {
  return lo + (hi - lo) * stream.next_unit();
}

}  // namespace testutil
