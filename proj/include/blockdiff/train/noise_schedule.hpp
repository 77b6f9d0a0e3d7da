#pragma once

#include <cmath>
#include <string>

#include "blockdiff/common.hpp"

namespace blockdiff::train {

enum class ScheduleFamily { kLinear, kCosine };

inline std::string to_string(ScheduleFamily f) {
  return f == ScheduleFamily::kLinear ? "LINEAR" : "COSINE";
}

inline ScheduleFamily schedule_family_from_string(const std::string& s) {
  if (s == "LINEAR") return ScheduleFamily::kLinear;
  if (s == "COSINE") return ScheduleFamily::kCosine;
  throw config_error("unknown schedule family: " + s);
}

// Mask-survival schedule alpha(t): strictly decreasing, alpha(0)=1, alpha(1)=0.
// A token survives corruption at noise level t with probability alpha(t).
struct NoiseSchedule {
  ScheduleFamily family = ScheduleFamily::kLinear;

  double alpha(double t) const {
    switch (family) {
      case ScheduleFamily::kLinear:
        return 1.0 - t;
      case ScheduleFamily::kCosine: {
        double c = std::cos(1.5707963267948966 * t);
        return c * c;
      }
    }
    return 0.0;
  }

  double alpha_deriv(double t) const {
    switch (family) {
      case ScheduleFamily::kLinear:
        return -1.0;
      case ScheduleFamily::kCosine:
        return -1.5707963267948966 * std::sin(3.141592653589793 * t);
    }
    return 0.0;
  }
};

// ELBO weight multiplying the summed cross-entropy over masked positions:
// |alpha'(t)| / (1 - alpha(t)). Diverges as t -> 0 for the linear family,
// so training clamps sampled timesteps to t >= kMinTimestep.
inline constexpr double kMinTimestep = 1e-3;

inline double loss_weight(double t, const NoiseSchedule& schedule) {
  BD_REQUIRE(t > 0.0 && t <= 1.0, "loss_weight requires t in (0, 1]");
  double denom = 1.0 - schedule.alpha(t);
  BD_REQUIRE(denom > 0.0, "loss_weight requires 1 - alpha(t) > 0");
  return std::abs(schedule.alpha_deriv(t)) / denom;
}

}  // namespace blockdiff::train
