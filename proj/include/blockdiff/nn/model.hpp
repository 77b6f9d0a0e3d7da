#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "blockdiff/nn/types.hpp"
#include "blockdiff/rng.hpp"

namespace blockdiff::nn {

struct SegmentSpec {
  std::string name;
  int rows = 0;
  int cols = 0;
  size_t offset = 0;

  size_t count() const { return static_cast<size_t>(rows) * static_cast<size_t>(cols); }
};

// Flat float store addressed by named 2-D segments. Parameters, optimizer
// moments, and gradients all share one layout so they stay aligned.
class ParamStore {
 public:
  ParamStore() = default;

  explicit ParamStore(std::vector<SegmentSpec> segments) : segments_(std::move(segments)) {
    size_t total = 0;
    for (auto& s : segments_) {
      s.offset = total;
      total += s.count();
      index_.emplace(s.name, index_.size());
    }
    data_.assign(total, 0.0f);
  }

  MatMap seg(const std::string& name) {
    const SegmentSpec& s = spec(name);
    return MatMap(data_.data() + s.offset, s.rows, s.cols);
  }

  CMatMap seg(const std::string& name) const {
    const SegmentSpec& s = spec(name);
    return CMatMap(data_.data() + s.offset, s.rows, s.cols);
  }

  const SegmentSpec& spec(const std::string& name) const {
    auto it = index_.find(name);
    BD_CHECK(it != index_.end(), "unknown parameter segment: " + name);
    return segments_[it->second];
  }

  const std::vector<SegmentSpec>& segments() const { return segments_; }
  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }
  size_t size() const { return data_.size(); }
  void zero() { std::fill(data_.begin(), data_.end(), 0.0f); }

  bool all_finite() const {
    for (float v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  // Name of the first segment containing a non-finite value, or empty.
  std::string first_non_finite_segment() const {
    for (const auto& s : segments_) {
      for (size_t i = s.offset; i < s.offset + s.count(); ++i) {
        if (!std::isfinite(data_[i])) return s.name;
      }
    }
    return {};
  }

 private:
  std::vector<SegmentSpec> segments_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<float> data_;
};

inline std::vector<SegmentSpec> model_segments(const ModelConfig& cfg) {
  const int c = cfg.embed_dim;
  std::vector<SegmentSpec> segs;
  segs.push_back({"tok_embed", cfg.vocab_size, c});
  segs.push_back({"pos_embed", cfg.max_positions, c});
  segs.push_back({"img_proj_w", cfg.image_token_dim, c});
  segs.push_back({"img_proj_b", 1, c});
  segs.push_back({"img_type", 1, c});
  for (int l = 0; l < cfg.num_layers; ++l) {
    std::string p = "layer" + std::to_string(l) + ".";
    segs.push_back({p + "ln1_g", 1, c});
    segs.push_back({p + "ln1_b", 1, c});
    segs.push_back({p + "qkv_w", c, 3 * c});
    segs.push_back({p + "qkv_b", 1, 3 * c});
    segs.push_back({p + "attn_out_w", c, c});
    segs.push_back({p + "attn_out_b", 1, c});
    segs.push_back({p + "ln2_g", 1, c});
    segs.push_back({p + "ln2_b", 1, c});
    segs.push_back({p + "mlp_fc_w", c, 4 * c});
    segs.push_back({p + "mlp_fc_b", 1, 4 * c});
    segs.push_back({p + "mlp_out_w", 4 * c, c});
    segs.push_back({p + "mlp_out_b", 1, c});
  }
  segs.push_back({"final_ln_g", 1, c});
  segs.push_back({"final_ln_b", 1, c});
  segs.push_back({"head_w", c, cfg.vocab_out()});
  segs.push_back({"head_b", 1, cfg.vocab_out()});
  return segs;
}

struct ModelState {
  ModelConfig config;
  AttentionRegime regime;
  ParamStore params;
  ParamStore moment1;
  ParamStore moment2;
  int64_t step_count = 0;

  Vocab vocab() const { return config.vocab(); }
};

inline ModelState init_model(const ModelConfig& cfg, const AttentionRegime& regime) {
  cfg.validate();
  regime.validate();
  ModelState m;
  m.config = cfg;
  m.regime = regime;
  auto segs = model_segments(cfg);
  m.params = ParamStore(segs);
  m.moment1 = ParamStore(segs);
  m.moment2 = ParamStore(segs);

  Rng rng = Rng(cfg.seed).stream(0x696e6974);  // "init"
  constexpr float kInitStd = 0.02f;
  for (const auto& s : m.params.segments()) {
    float* p = m.params.data().data() + s.offset;
    bool is_ln_gain = s.name.ends_with("ln1_g") || s.name.ends_with("ln2_g") ||
                      s.name.ends_with("final_ln_g");
    bool is_bias = s.name.ends_with("_b");
    if (is_ln_gain) {
      std::fill(p, p + s.count(), 1.0f);
    } else if (is_bias) {
      // zero (already)
    } else {
      for (size_t i = 0; i < s.count(); ++i) p[i] = rng.normal_f(kInitStd);
    }
  }
  return m;
}

}  // namespace blockdiff::nn
