#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "blockdiff/nn/mask.hpp"
#include "blockdiff/nn/model.hpp"

namespace blockdiff::nn {

using VecF = Eigen::VectorXf;

inline float gelu(float x) {
  return 0.5f * x * (1.0f + std::erf(x * 0.70710678f));
}

inline float gelu_grad(float x) {
  float phi = std::exp(-0.5f * x * x) * 0.39894228f;
  float cdf = 0.5f * (1.0f + std::erf(x * 0.70710678f));
  return cdf + x * phi;
}

// y = xhat * g + b with xhat = (x - mean) * rstd, kept for the backward pass.
inline void layer_norm(const RowMat& x, CMatMap g, CMatMap b, RowMat& xhat, VecF& rstd,
                       RowMat& out) {
  const auto rows = x.rows();
  const auto cols = x.cols();
  xhat.resize(rows, cols);
  out.resize(rows, cols);
  rstd.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    float mean = x.row(r).mean();
    float var = (x.row(r).array() - mean).square().mean();
    float rs = 1.0f / std::sqrt(var + kLayerNormEps);
    rstd(r) = rs;
    xhat.row(r) = (x.row(r).array() - mean) * rs;
    out.row(r) = xhat.row(r).cwiseProduct(g.row(0)) + b.row(0);
  }
}

struct LayerTape {
  RowMat xhat1;
  VecF rstd1;
  RowMat qkv;                 // T x 3C
  std::vector<RowMat> probs;  // per head, T x T attention weights
  RowMat att_ctx;             // T x C, pre output-projection
  RowMat xhat2;
  VecF rstd2;
  RowMat mlp_pre;  // T x 4C
  RowMat mlp_act;  // T x 4C
};

// Everything the exact backward pass needs from one batched forward pass.
struct ForwardTape {
  int image_count = 0;
  int text_count = 0;
  RowMat patches;                  // I x image_token_dim
  std::vector<TokenId> input_ids;  // embedding source per text row
  ByteMat allow;
  RowMat x0;
  std::vector<LayerTape> layers;
  RowMat xhat_final;
  VecF rstd_final;
};

// Batched forward over the full materialized sequence [image | text].
// `input_ids` supplies the embedding source id per text row; callers encode
// regime conventions there (diffusion regimes feed the slot itself with mask
// sentinels in place; the causal regime feeds the previous slot's token).
// Returns one logit row per text position, over content tokens plus EOS.
inline RowMat forward_train(const ModelState& m, const RowMat& image_patches,
                            std::span<const TokenId> input_ids, const AttentionMask& mask,
                            ForwardTape& tape) {
  const ModelConfig& cfg = m.config;
  const int I = static_cast<int>(image_patches.rows());
  const int X = static_cast<int>(input_ids.size());
  const int T = I + X;
  const int C = cfg.embed_dim;
  const int H = cfg.num_heads;
  const int hd = cfg.head_dim();

  BD_CHECK(mask.allow.rows() == T && mask.allow.cols() == T,
           "attention mask shape does not match materialized positions");
  BD_CHECK(I + X <= cfg.max_positions, "sequence exceeds max_positions");
  if (I > 0) {
    BD_CHECK(image_patches.cols() == cfg.image_token_dim, "bad image patch width");
  }

  tape.image_count = I;
  tape.text_count = X;
  tape.patches = image_patches;
  tape.input_ids.assign(input_ids.begin(), input_ids.end());
  tape.allow = mask.allow;
  tape.layers.assign(static_cast<size_t>(cfg.num_layers), LayerTape{});

  const auto& P = m.params;
  auto tok_embed = P.seg("tok_embed");
  auto pos_embed = P.seg("pos_embed");

  RowMat x(T, C);
  if (I > 0) {
    x.topRows(I).noalias() = image_patches * P.seg("img_proj_w");
    x.topRows(I).rowwise() += P.seg("img_proj_b").row(0) + P.seg("img_type").row(0);
    x.topRows(I) += pos_embed.middleRows(0, I);
  }
  for (int j = 0; j < X; ++j) {
    TokenId id = input_ids[static_cast<size_t>(j)];
    BD_CHECK(id >= 0 && id < cfg.vocab_size, "token id out of range");
    x.row(I + j) = tok_embed.row(id) + pos_embed.row(I + j);
  }
  tape.x0 = x;

  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  RowMat scores;

  for (int l = 0; l < cfg.num_layers; ++l) {
    LayerTape& lt = tape.layers[static_cast<size_t>(l)];
    std::string pre = "layer" + std::to_string(l) + ".";

    RowMat ln1_out;
    layer_norm(x, P.seg(pre + "ln1_g"), P.seg(pre + "ln1_b"), lt.xhat1, lt.rstd1, ln1_out);

    lt.qkv.resize(T, 3 * C);
    lt.qkv.noalias() = ln1_out * P.seg(pre + "qkv_w");
    lt.qkv.rowwise() += P.seg(pre + "qkv_b").row(0);

    lt.att_ctx.resize(T, C);
    lt.probs.assign(static_cast<size_t>(H), RowMat());
    for (int h = 0; h < H; ++h) {
      auto q = lt.qkv.middleCols(h * hd, hd);
      auto k = lt.qkv.middleCols(C + h * hd, hd);
      auto v = lt.qkv.middleCols(2 * C + h * hd, hd);
      scores.resize(T, T);
      scores.noalias() = q * k.transpose();
      scores *= scale;
      RowMat& probs = lt.probs[static_cast<size_t>(h)];
      probs.resize(T, T);
      for (int r = 0; r < T; ++r) {
        float mx = -std::numeric_limits<float>::infinity();
        for (int c2 = 0; c2 < T; ++c2) {
          if (mask.allow(r, c2)) mx = std::max(mx, scores(r, c2));
        }
        BD_CHECK(std::isfinite(mx), "attention row has no allowed key");
        float sum = 0.0f;
        for (int c2 = 0; c2 < T; ++c2) {
          float e = mask.allow(r, c2) ? std::exp(scores(r, c2) - mx) : 0.0f;
          probs(r, c2) = e;
          sum += e;
        }
        probs.row(r) /= sum;
      }
      lt.att_ctx.middleCols(h * hd, hd).noalias() = probs * v;
    }

    x.noalias() += lt.att_ctx * P.seg(pre + "attn_out_w");
    x.rowwise() += P.seg(pre + "attn_out_b").row(0);

    RowMat ln2_out;
    layer_norm(x, P.seg(pre + "ln2_g"), P.seg(pre + "ln2_b"), lt.xhat2, lt.rstd2, ln2_out);

    lt.mlp_pre.resize(T, 4 * C);
    lt.mlp_pre.noalias() = ln2_out * P.seg(pre + "mlp_fc_w");
    lt.mlp_pre.rowwise() += P.seg(pre + "mlp_fc_b").row(0);
    lt.mlp_act = lt.mlp_pre.unaryExpr([](float v) { return gelu(v); });

    x.noalias() += lt.mlp_act * P.seg(pre + "mlp_out_w");
    x.rowwise() += P.seg(pre + "mlp_out_b").row(0);
  }

  RowMat ln_final_out;
  layer_norm(x, P.seg("final_ln_g"), P.seg("final_ln_b"), tape.xhat_final, tape.rstd_final,
             ln_final_out);

  RowMat logits(X, cfg.vocab_out());
  logits.noalias() = ln_final_out.bottomRows(X) * P.seg("head_w");
  logits.rowwise() += P.seg("head_b").row(0);
  return logits;
}

}  // namespace blockdiff::nn
