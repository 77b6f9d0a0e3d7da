#pragma once

#include <cmath>

#include "blockdiff/nn/model.hpp"

namespace blockdiff::nn {

struct AdamConfig {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.01f;
};

// One AdamW update with bias correction. Weight decay is decoupled: applied
// directly to the parameter, never mixed into the gradient moments.
inline void adam_step(ModelState& m, const ParamStore& grads, float lr,
                      const AdamConfig& cfg = {}) {
  BD_CHECK(grads.size() == m.params.size(), "gradient layout mismatch");
  {
    std::string bad = grads.first_non_finite_segment();
    if (!bad.empty()) {
      throw std::runtime_error("non-finite gradient in segment " + bad);
    }
  }
  m.step_count += 1;
  const double t = static_cast<double>(m.step_count);
  const float bc1 = 1.0f - static_cast<float>(std::pow(cfg.beta1, t));
  const float bc2 = 1.0f - static_cast<float>(std::pow(cfg.beta2, t));

  float* p = m.params.data().data();
  float* m1 = m.moment1.data().data();
  float* m2 = m.moment2.data().data();
  const float* g = grads.data().data();
  const size_t n = m.params.size();
  for (size_t i = 0; i < n; ++i) {
    m1[i] = cfg.beta1 * m1[i] + (1.0f - cfg.beta1) * g[i];
    m2[i] = cfg.beta2 * m2[i] + (1.0f - cfg.beta2) * g[i] * g[i];
    float mhat = m1[i] / bc1;
    float vhat = m2[i] / bc2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * p[i]);
  }

  std::string bad = m.params.first_non_finite_segment();
  if (!bad.empty()) {
    throw std::runtime_error("non-finite parameter after update in segment " + bad);
  }
}

}  // namespace blockdiff::nn
