#pragma once

#include <vector>

#include "blockdiff/nn/types.hpp"

namespace blockdiff::nn {

enum class SegmentTag { kImage, kPrefixBlock, kActiveBlock };

struct MaskSegment {
  SegmentTag tag;
  int start;
  int end;  // half-open
};

// Boolean (query, key) visibility for one forward pass over the materialized
// sequence [image | committed prefix blocks | active block].
//
// Image rows attend only to image columns in every regime, so image key/value
// entries never depend on text and stay valid in any cache mode. Text rows
// always see the full image.
struct AttentionMask {
  ByteMat allow;
  std::vector<MaskSegment> segments;

  int size() const { return static_cast<int>(allow.rows()); }
};

// `committed_blocks` prefix blocks of regime.block_size (active_block_size for
// regimes without an intrinsic block size) followed by one active block.
inline AttentionMask build_mask(const AttentionRegime& regime, int image_count,
                                int committed_blocks, int active_block_size) {
  BD_REQUIRE(image_count >= 0 && committed_blocks >= 0, "mask counts must be >= 0");
  BD_REQUIRE(active_block_size >= 1, "active_block_size must be >= 1");
  regime.validate();

  const int bs =
      regime.tag == RegimeTag::kBlockCausal ? regime.block_size : active_block_size;
  const int prefix_len = committed_blocks * bs;
  const int text_len = prefix_len + active_block_size;
  const int total = image_count + text_len;

  AttentionMask mask;
  mask.allow = ByteMat::Zero(total, total);
  if (image_count > 0) {
    mask.segments.push_back({SegmentTag::kImage, 0, image_count});
  }
  for (int b = 0; b < committed_blocks; ++b) {
    mask.segments.push_back(
        {SegmentTag::kPrefixBlock, image_count + b * bs, image_count + (b + 1) * bs});
  }
  mask.segments.push_back({SegmentTag::kActiveBlock, image_count + prefix_len, total});

  // image queries: image keys only
  for (int q = 0; q < image_count; ++q) {
    for (int k = 0; k < image_count; ++k) mask.allow(q, k) = 1;
  }

  auto block_of = [&](int text_idx) {
    return text_idx < prefix_len ? text_idx / bs : committed_blocks;
  };

  for (int tq = 0; tq < text_len; ++tq) {
    const int q = image_count + tq;
    for (int k = 0; k < image_count; ++k) mask.allow(q, k) = 1;
    for (int tk = 0; tk < text_len; ++tk) {
      bool ok = false;
      switch (regime.tag) {
        case RegimeTag::kBidirectional:
          ok = true;
          break;
        case RegimeTag::kBlockCausal:
          ok = block_of(tk) <= block_of(tq);
          break;
        case RegimeTag::kFullCausal:
          ok = tk <= tq;
          break;
      }
      if (ok) mask.allow(q, image_count + tk) = 1;
    }
  }
  return mask;
}

}  // namespace blockdiff::nn
