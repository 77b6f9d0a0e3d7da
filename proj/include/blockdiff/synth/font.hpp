#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <vector>

#include "blockdiff/common.hpp"
#include "blockdiff/rng.hpp"

namespace blockdiff::synth {

inline constexpr int kGlyphBits = 64;  // 8x8 binary bitmap
inline constexpr int kPatchDim = 64;   // flattened patch vector size

// Deterministic glyph alphabet. Bitmaps are pairwise separated by a Hamming
// margin so the clean task has a zero-error nearest-glyph solution.
struct GlyphFont {
  static constexpr int kMinHamming = 8;

  std::vector<uint64_t> glyphs;  // bit i = pixel i of the 8x8 bitmap
  uint64_t seed = 0;

  int size() const { return static_cast<int>(glyphs.size()); }

  // Flattened clean bitmap: pixel on = 1.0, off = 0.0.
  std::array<float, kPatchDim> patch(TokenId id) const {
    std::array<float, kPatchDim> out;
    uint64_t bits = glyphs[static_cast<size_t>(id)];
    for (int i = 0; i < kGlyphBits; ++i) out[static_cast<size_t>(i)] = (bits >> i) & 1 ? 1.0f : 0.0f;
    return out;
  }

  // Nearest glyph id under Hamming distance after thresholding at 0.5.
  // Ties resolve to the lowest id.
  TokenId nearest(const float* patch_values) const {
    uint64_t bits = 0;
    for (int i = 0; i < kGlyphBits; ++i) {
      if (patch_values[i] > 0.5f) bits |= uint64_t{1} << i;
    }
    int best = 65;
    TokenId best_id = 0;
    for (size_t g = 0; g < glyphs.size(); ++g) {
      int d = std::popcount(bits ^ glyphs[g]);
      if (d < best) {
        best = d;
        best_id = static_cast<TokenId>(g);
      }
    }
    return best_id;
  }
};

inline GlyphFont build_font(int vocab_size, uint64_t seed) {
  BD_REQUIRE(vocab_size >= 1 && vocab_size <= (1 << 20), "font vocab_size out of range");
  GlyphFont font;
  font.seed = seed;
  font.glyphs.reserve(static_cast<size_t>(vocab_size));
  Rng rng = Rng(seed).stream(0x666f6e74);  // "font"
  constexpr int kMaxTriesPerGlyph = 100000;
  for (int g = 0; g < vocab_size; ++g) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxTriesPerGlyph; ++attempt) {
      uint64_t candidate = rng.next_u64();
      bool ok = true;
      for (uint64_t existing : font.glyphs) {
        if (std::popcount(candidate ^ existing) < GlyphFont::kMinHamming) {
          ok = false;
          break;
        }
      }
      if (ok) {
        font.glyphs.push_back(candidate);
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw config_error(
          "could not satisfy the glyph Hamming margin after bounded retries; "
          "use a smaller vocab_size");
    }
  }
  return font;
}

}  // namespace blockdiff::synth
