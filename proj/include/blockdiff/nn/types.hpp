#pragma once

#include <string>

#include <Eigen/Dense>

#include "blockdiff/common.hpp"

namespace blockdiff::nn {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;
using ByteMat = Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class RegimeTag { kBidirectional, kBlockCausal, kFullCausal };

inline std::string to_string(RegimeTag t) {
  switch (t) {
    case RegimeTag::kBidirectional: return "BIDIRECTIONAL";
    case RegimeTag::kBlockCausal: return "BLOCK_CAUSAL";
    case RegimeTag::kFullCausal: return "FULL_CAUSAL";
  }
  return "?";
}

inline RegimeTag regime_tag_from_string(const std::string& s) {
  if (s == "BIDIRECTIONAL") return RegimeTag::kBidirectional;
  if (s == "BLOCK_CAUSAL") return RegimeTag::kBlockCausal;
  if (s == "FULL_CAUSAL") return RegimeTag::kFullCausal;
  throw config_error("unknown attention regime: " + s);
}

struct AttentionRegime {
  RegimeTag tag = RegimeTag::kBidirectional;
  int block_size = 0;  // required (>= 1) for BLOCK_CAUSAL

  void validate() const {
    if (tag == RegimeTag::kBlockCausal) {
      BD_REQUIRE(block_size >= 1, "BLOCK_CAUSAL regime requires block_size >= 1");
    }
  }

  static AttentionRegime bidirectional() { return {RegimeTag::kBidirectional, 0}; }
  static AttentionRegime block_causal(int block_size) {
    AttentionRegime r{RegimeTag::kBlockCausal, block_size};
    r.validate();
    return r;
  }
  static AttentionRegime full_causal() { return {RegimeTag::kFullCausal, 0}; }
};

struct ModelConfig {
  int vocab_size = 0;       // total embedding rows, including EOS and mask sentinel
  int embed_dim = 0;
  int num_heads = 0;
  int num_layers = 0;
  int max_positions = 0;    // over the concatenated [image | text] axis
  int image_token_dim = 0;  // raw per-patch input dimension
  uint64_t seed = 0;

  void validate() const {
    BD_REQUIRE(vocab_size >= 3, "vocab_size must be >= 3");
    BD_REQUIRE(embed_dim >= 1 && num_heads >= 1 && num_layers >= 0, "bad model dims");
    BD_REQUIRE(embed_dim % num_heads == 0, "embed_dim must be divisible by num_heads");
    BD_REQUIRE(max_positions >= 1, "max_positions must be >= 1");
    BD_REQUIRE(image_token_dim >= 1, "image_token_dim must be >= 1");
  }

  Vocab vocab() const { return Vocab::from_total(vocab_size); }
  int head_dim() const { return embed_dim / num_heads; }
  int vocab_out() const { return vocab_size - 1; }  // mask sentinel is never predicted
};

inline constexpr float kLayerNormEps = 1e-5f;

}  // namespace blockdiff::nn
