#pragma once

#include "blockdiff/nn/forward.hpp"

namespace blockdiff::nn {

namespace detail {

// dx for y = xhat*g + b given dy, using only xhat and rstd.
inline void layer_norm_backward(const RowMat& xhat, const VecF& rstd, CMatMap g,
                                const RowMat& dy, RowMat& dx, MatMap dg, MatMap db) {
  const auto rows = xhat.rows();
  dx.resize(rows, xhat.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    dg.row(0) += dy.row(r).cwiseProduct(xhat.row(r));
    db.row(0) += dy.row(r);
    Eigen::RowVectorXf dxhat = dy.row(r).cwiseProduct(g.row(0));
    float m1 = dxhat.mean();
    float m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
    dx.row(r) = ((dxhat.array() - m1) - xhat.row(r).array() * m2) * rstd(r);
  }
}

}  // namespace detail

// Exact reverse-mode pass for forward_train. Accumulates parameter gradients
// (+=) into `grads`, which must share the model's segment layout.
inline void backward(const ModelState& m, const ForwardTape& tape, const RowMat& dlogits,
                     ParamStore& grads) {
  const ModelConfig& cfg = m.config;
  const int I = tape.image_count;
  const int X = tape.text_count;
  const int T = I + X;
  const int C = cfg.embed_dim;
  const int H = cfg.num_heads;
  const int hd = cfg.head_dim();
  BD_CHECK(T > 0 && !tape.layers.empty(), "backward called without a matching forward");
  BD_CHECK(dlogits.rows() == X && dlogits.cols() == cfg.vocab_out(),
           "dlogits shape mismatch");

  const auto& P = m.params;
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

  // head
  RowMat lnf_out_text(X, C);
  {
    auto g = P.seg("final_ln_g");
    auto b = P.seg("final_ln_b");
    for (int j = 0; j < X; ++j) {
      lnf_out_text.row(j) =
          tape.xhat_final.row(I + j).cwiseProduct(g.row(0)) + b.row(0);
    }
  }
  grads.seg("head_w").noalias() += lnf_out_text.transpose() * dlogits;
  grads.seg("head_b").row(0) += dlogits.colwise().sum();

  RowMat d_lnf = RowMat::Zero(T, C);
  d_lnf.bottomRows(X).noalias() = dlogits * P.seg("head_w").transpose();

  RowMat dx;
  detail::layer_norm_backward(tape.xhat_final, tape.rstd_final, P.seg("final_ln_g"), d_lnf,
                              dx, grads.seg("final_ln_g"), grads.seg("final_ln_b"));

  RowMat d_ln_out, d_pre, d_ctx, d_qkv, dprobs, dscores, d_branch;
  for (int l = cfg.num_layers - 1; l >= 0; --l) {
    const LayerTape& lt = tape.layers[static_cast<size_t>(l)];
    std::string pre = "layer" + std::to_string(l) + ".";

    // MLP block: x_out = x_mid + gelu(ln2(x_mid) W1 + b1) W2 + b2
    grads.seg(pre + "mlp_out_w").noalias() += lt.mlp_act.transpose() * dx;
    grads.seg(pre + "mlp_out_b").row(0) += dx.colwise().sum();
    d_pre.resize(T, 4 * C);
    d_pre.noalias() = dx * P.seg(pre + "mlp_out_w").transpose();
    d_pre.array() *= lt.mlp_pre.unaryExpr([](float v) { return gelu_grad(v); }).array();

    {
      auto g = P.seg(pre + "ln2_g");
      auto b = P.seg(pre + "ln2_b");
      RowMat ln2_out = lt.xhat2;
      for (Eigen::Index r = 0; r < ln2_out.rows(); ++r) {
        ln2_out.row(r) = lt.xhat2.row(r).cwiseProduct(g.row(0)) + b.row(0);
      }
      grads.seg(pre + "mlp_fc_w").noalias() += ln2_out.transpose() * d_pre;
    }
    grads.seg(pre + "mlp_fc_b").row(0) += d_pre.colwise().sum();
    d_ln_out.resize(T, C);
    d_ln_out.noalias() = d_pre * P.seg(pre + "mlp_fc_w").transpose();
    detail::layer_norm_backward(lt.xhat2, lt.rstd2, P.seg(pre + "ln2_g"), d_ln_out, d_branch,
                                grads.seg(pre + "ln2_g"), grads.seg(pre + "ln2_b"));
    dx += d_branch;  // residual

    // attention block: x_mid = x_in + (ctx Wo + bo)
    grads.seg(pre + "attn_out_w").noalias() += lt.att_ctx.transpose() * dx;
    grads.seg(pre + "attn_out_b").row(0) += dx.colwise().sum();
    d_ctx.resize(T, C);
    d_ctx.noalias() = dx * P.seg(pre + "attn_out_w").transpose();

    d_qkv = RowMat::Zero(T, 3 * C);
    for (int h = 0; h < H; ++h) {
      auto q = lt.qkv.middleCols(h * hd, hd);
      auto k = lt.qkv.middleCols(C + h * hd, hd);
      auto v = lt.qkv.middleCols(2 * C + h * hd, hd);
      const RowMat& probs = lt.probs[static_cast<size_t>(h)];
      auto d_ctx_h = d_ctx.middleCols(h * hd, hd);

      dprobs.resize(T, T);
      dprobs.noalias() = d_ctx_h * v.transpose();
      d_qkv.middleCols(2 * C + h * hd, hd).noalias() += probs.transpose() * d_ctx_h;

      // softmax backward; masked entries have probs == 0 and vanish
      VecF rowdot = (dprobs.array() * probs.array()).rowwise().sum();
      dscores = probs.array() * (dprobs.array().colwise() - rowdot.array());
      dscores *= scale;

      d_qkv.middleCols(h * hd, hd).noalias() += dscores * k;
      d_qkv.middleCols(C + h * hd, hd).noalias() += dscores.transpose() * q;
    }

    {
      auto g = P.seg(pre + "ln1_g");
      auto b = P.seg(pre + "ln1_b");
      RowMat ln1_out = lt.xhat1;
      for (Eigen::Index r = 0; r < ln1_out.rows(); ++r) {
        ln1_out.row(r) = lt.xhat1.row(r).cwiseProduct(g.row(0)) + b.row(0);
      }
      grads.seg(pre + "qkv_w").noalias() += ln1_out.transpose() * d_qkv;
    }
    grads.seg(pre + "qkv_b").row(0) += d_qkv.colwise().sum();
    d_ln_out.resize(T, C);
    d_ln_out.noalias() = d_qkv * P.seg(pre + "qkv_w").transpose();
    detail::layer_norm_backward(lt.xhat1, lt.rstd1, P.seg(pre + "ln1_g"), d_ln_out, d_branch,
                                grads.seg(pre + "ln1_g"), grads.seg(pre + "ln1_b"));
    dx += d_branch;
  }

  // embeddings
  auto d_tok = grads.seg("tok_embed");
  auto d_pos = grads.seg("pos_embed");
  if (I > 0) {
    grads.seg("img_proj_w").noalias() += tape.patches.transpose() * dx.topRows(I);
    grads.seg("img_proj_b").row(0) += dx.topRows(I).colwise().sum();
    grads.seg("img_type").row(0) += dx.topRows(I).colwise().sum();
    d_pos.middleRows(0, I) += dx.topRows(I);
  }
  for (int j = 0; j < X; ++j) {
    d_tok.row(tape.input_ids[static_cast<size_t>(j)]) += dx.row(I + j);
    d_pos.row(I + j) += dx.row(I + j);
  }
}

}  // namespace blockdiff::nn
