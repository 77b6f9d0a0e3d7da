#pragma once

// Test-only double-precision reference forward. Written with plain loops,
// independently of the Eigen production path, so it can serve both as a
// cross-check of forward_train and as the function that finite differences
// are taken of when validating the analytic backward pass.

#include <cmath>
#include <span>
#include <vector>

#include "blockdiff/nn/mask.hpp"
#include "blockdiff/nn/model.hpp"

namespace refimpl {

using blockdiff::TokenId;
using blockdiff::nn::AttentionMask;
using blockdiff::nn::ModelConfig;
using blockdiff::nn::ParamStore;

using DVec = std::vector<double>;
using DMat = std::vector<DVec>;

inline DMat get_seg(const ParamStore& p, const std::string& name) {
  auto m = p.seg(name);
  DMat out(static_cast<size_t>(m.rows()), DVec(static_cast<size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out[static_cast<size_t>(r)][static_cast<size_t>(c)] = m(r, c);
    }
  }
  return out;
}

inline DMat matmul(const DMat& a, const DMat& b) {
  DMat out(a.size(), DVec(b[0].size(), 0.0));
  for (size_t i = 0; i < a.size(); ++i) {
    for (size_t k = 0; k < b.size(); ++k) {
      double av = a[i][k];
      for (size_t j = 0; j < b[0].size(); ++j) out[i][j] += av * b[k][j];
    }
  }
  return out;
}

inline void add_row(DMat& m, const DMat& row) {
  for (auto& r : m) {
    for (size_t j = 0; j < r.size(); ++j) r[j] += row[0][j];
  }
}

inline DMat layer_norm(const DMat& x, const DMat& g, const DMat& b) {
  DMat out = x;
  for (size_t r = 0; r < x.size(); ++r) {
    double mean = 0.0;
    for (double v : x[r]) mean += v;
    mean /= static_cast<double>(x[r].size());
    double var = 0.0;
    for (double v : x[r]) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x[r].size());
    double rstd = 1.0 / std::sqrt(var + 1e-5);
    for (size_t j = 0; j < x[r].size(); ++j) {
      out[r][j] = (x[r][j] - mean) * rstd * g[0][j] + b[0][j];
    }
  }
  return out;
}

inline double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v * 0.7071067811865476)); }

// Same architecture as forward_train, evaluated entirely in double.
inline DMat forward(const ParamStore& params, const ModelConfig& cfg, const DMat& patches,
                    std::span<const TokenId> input_ids, const AttentionMask& mask) {
  const int I = static_cast<int>(patches.size());
  const int X = static_cast<int>(input_ids.size());
  const int T = I + X;
  const int C = cfg.embed_dim;
  const int H = cfg.num_heads;
  const int hd = cfg.head_dim();

  DMat tok = get_seg(params, "tok_embed");
  DMat pos = get_seg(params, "pos_embed");
  DMat x(static_cast<size_t>(T), DVec(static_cast<size_t>(C), 0.0));
  if (I > 0) {
    DMat img_w = get_seg(params, "img_proj_w");
    DMat img_b = get_seg(params, "img_proj_b");
    DMat img_t = get_seg(params, "img_type");
    for (int i = 0; i < I; ++i) {
      for (int j = 0; j < C; ++j) {
        double v = img_b[0][static_cast<size_t>(j)] + img_t[0][static_cast<size_t>(j)] +
                   pos[static_cast<size_t>(i)][static_cast<size_t>(j)];
        for (size_t k = 0; k < patches[static_cast<size_t>(i)].size(); ++k) {
          v += patches[static_cast<size_t>(i)][k] * img_w[k][static_cast<size_t>(j)];
        }
        x[static_cast<size_t>(i)][static_cast<size_t>(j)] = v;
      }
    }
  }
  for (int j = 0; j < X; ++j) {
    for (int c = 0; c < C; ++c) {
      x[static_cast<size_t>(I + j)][static_cast<size_t>(c)] =
          tok[static_cast<size_t>(input_ids[static_cast<size_t>(j)])][static_cast<size_t>(c)] +
          pos[static_cast<size_t>(I + j)][static_cast<size_t>(c)];
    }
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  for (int l = 0; l < cfg.num_layers; ++l) {
    std::string pre = "layer" + std::to_string(l) + ".";
    DMat ln1 = layer_norm(x, get_seg(params, pre + "ln1_g"), get_seg(params, pre + "ln1_b"));
    DMat qkv = matmul(ln1, get_seg(params, pre + "qkv_w"));
    add_row(qkv, get_seg(params, pre + "qkv_b"));

    DMat ctx(static_cast<size_t>(T), DVec(static_cast<size_t>(C), 0.0));
    for (int h = 0; h < H; ++h) {
      for (int q = 0; q < T; ++q) {
        DVec scores(static_cast<size_t>(T), -1e300);
        double mx = -1e300;
        for (int k = 0; k < T; ++k) {
          if (!mask.allow(q, k)) continue;
          double s = 0.0;
          for (int d = 0; d < hd; ++d) {
            s += qkv[static_cast<size_t>(q)][static_cast<size_t>(h * hd + d)] *
                 qkv[static_cast<size_t>(k)][static_cast<size_t>(C + h * hd + d)];
          }
          s *= scale;
          scores[static_cast<size_t>(k)] = s;
          mx = std::max(mx, s);
        }
        double sum = 0.0;
        DVec p(static_cast<size_t>(T), 0.0);
        for (int k = 0; k < T; ++k) {
          if (mask.allow(q, k)) {
            p[static_cast<size_t>(k)] = std::exp(scores[static_cast<size_t>(k)] - mx);
            sum += p[static_cast<size_t>(k)];
          }
        }
        for (int k = 0; k < T; ++k) {
          double w = p[static_cast<size_t>(k)] / sum;
          for (int d = 0; d < hd; ++d) {
            ctx[static_cast<size_t>(q)][static_cast<size_t>(h * hd + d)] +=
                w * qkv[static_cast<size_t>(k)][static_cast<size_t>(2 * C + h * hd + d)];
          }
        }
      }
    }
    DMat att = matmul(ctx, get_seg(params, pre + "attn_out_w"));
    add_row(att, get_seg(params, pre + "attn_out_b"));
    for (int r = 0; r < T; ++r) {
      for (int c = 0; c < C; ++c) x[static_cast<size_t>(r)][static_cast<size_t>(c)] += att[static_cast<size_t>(r)][static_cast<size_t>(c)];
    }

    DMat ln2 = layer_norm(x, get_seg(params, pre + "ln2_g"), get_seg(params, pre + "ln2_b"));
    DMat pre_act = matmul(ln2, get_seg(params, pre + "mlp_fc_w"));
    add_row(pre_act, get_seg(params, pre + "mlp_fc_b"));
    for (auto& row : pre_act) {
      for (auto& v : row) v = gelu(v);
    }
    DMat mlp = matmul(pre_act, get_seg(params, pre + "mlp_out_w"));
    add_row(mlp, get_seg(params, pre + "mlp_out_b"));
    for (int r = 0; r < T; ++r) {
      for (int c = 0; c < C; ++c) x[static_cast<size_t>(r)][static_cast<size_t>(c)] += mlp[static_cast<size_t>(r)][static_cast<size_t>(c)];
    }
  }

  DMat lnf = layer_norm(x, get_seg(params, "final_ln_g"), get_seg(params, "final_ln_b"));
  DMat text_rows(static_cast<size_t>(X), DVec(static_cast<size_t>(C)));
  for (int j = 0; j < X; ++j) text_rows[static_cast<size_t>(j)] = lnf[static_cast<size_t>(I + j)];
  DMat logits = matmul(text_rows, get_seg(params, "head_w"));
  add_row(logits, get_seg(params, "head_b"));
  return logits;
}

}  // namespace refimpl
