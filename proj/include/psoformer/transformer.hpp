/*
 * Copyright 2026 The psoformer Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Transformer-encoder binary classifier for tabular rows.
//
// Every feature becomes one token: token_i = x_i * scale_i + shift_i + PE_i,
// where PE is the fixed sinusoidal encoding. Each encoder layer is pre-norm:
//
//   X <- X + MHA(LN1(X))
//   X <- X + W2 relu(W1 LN2(X) + b1) + b2
//
// and the classifier reads the mean of the final tokens through a d_model x 2
// affine head. Forward and backward passes are written out by hand and run on
// a whole minibatch at once: the tokens of B rows are stacked into a
// (B * tokens) x d_model matrix so every projection is a single product.
// Everything is double precision.

#ifndef PSOFORMER_TRANSFORMER_HPP_
#define PSOFORMER_TRANSFORMER_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "psoformer/core.hpp"
#include "psoformer/data.hpp"

namespace psoformer::transformer {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training diverged: the loss or a gradient became NaN or infinite.
class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

struct TransformerConfig {
  std::size_t n_features = 13;
  std::size_t n_layers = 1;
  std::size_t d_model = 512;
  std::size_t n_heads = 8;
  std::size_t d_ff = 2048;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;

  std::size_t head_dim() const { return d_model / n_heads; }

  void validate() const {
    std::string problems;
    auto need = [&](bool ok, const char* msg) {
      if (!ok) problems += std::string(problems.empty() ? "" : "; ") + msg;
    };
    need(n_features >= 1, "n_features must be >= 1");
    need(n_layers >= 1, "n_layers must be >= 1");
    need(d_model >= 1, "d_model must be >= 1");
    need(n_heads >= 1, "n_heads must be >= 1");
    need(n_heads >= 1 && d_model % n_heads == 0, "d_model must be divisible by n_heads");
    need(d_ff >= 1, "d_ff must be >= 1");
    need(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be > 0");
    need(batch_size >= 1, "batch_size must be >= 1");
    need(epochs >= 1, "epochs must be >= 1");
    if (!problems.empty()) throw ConfigError("invalid transformer config: " + problems);
  }
};

struct LayerParams {
  Matrix ln1_gain, ln1_bias;  // 1 x d_model
  Matrix wq, wk, wv, wo;      // d_model x d_model, no biases
  Matrix ln2_gain, ln2_bias;  // 1 x d_model
  Matrix w1, b1;              // d_model x d_ff, 1 x d_ff
  Matrix w2, b2;              // d_ff x d_model, 1 x d_model
};

struct ModelParams {
  Matrix embed_scale;  // tokens x d_model
  Matrix embed_shift;  // tokens x d_model
  Matrix positional;   // tokens x d_model, fixed
  std::vector<LayerParams> layers;
  Matrix head_w;  // d_model x 2
  Matrix head_b;  // 1 x 2
};

namespace detail {

template <typename Params, typename Ptr>
std::vector<Ptr> collect_trainable(Params& p) {
  std::vector<Ptr> out{&p.embed_scale, &p.embed_shift};
  for (auto& l : p.layers) {
    for (Ptr m : {&l.ln1_gain, &l.ln1_bias, &l.wq, &l.wk, &l.wv, &l.wo, &l.ln2_gain, &l.ln2_bias,
                  &l.w1, &l.b1, &l.w2, &l.b2}) {
      out.push_back(m);
    }
  }
  out.push_back(&p.head_w);
  out.push_back(&p.head_b);
  return out;
}

}  // namespace detail

// Trainable tensors in a fixed canonical order (positional encodings excluded).
inline std::vector<Matrix*> trainable_tensors(ModelParams& p) {
  return detail::collect_trainable<ModelParams, Matrix*>(p);
}
inline std::vector<const Matrix*> trainable_tensors(const ModelParams& p) {
  return detail::collect_trainable<const ModelParams, const Matrix*>(p);
}

inline std::vector<std::string> trainable_tensor_names(std::size_t n_layers) {
  std::vector<std::string> out{"embed_scale", "embed_shift"};
  for (std::size_t l = 0; l < n_layers; ++l) {
    for (const char* n : {"ln1_gain", "ln1_bias", "wq", "wk", "wv", "wo", "ln2_gain", "ln2_bias",
                          "w1", "b1", "w2", "b2"}) {
      out.push_back("layer" + std::to_string(l) + "." + n);
    }
  }
  out.emplace_back("head_w");
  out.emplace_back("head_b");
  return out;
}

inline ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for (Matrix* m : trainable_tensors(z)) m->setZero();
  return z;
}

inline bool all_finite(const ModelParams& p) {
  for (const Matrix* m : trainable_tensors(p)) {
    if (!m->allFinite()) return false;
  }
  return true;
}

// PE[pos][2i] = sin(pos / 10000^(2i/d)), PE[pos][2i+1] = cos(same angle).
inline Matrix sinusoidal_encoding(std::size_t positions, std::size_t d_model) {
  Matrix pe(positions, d_model);
  for (std::size_t pos = 0; pos < positions; ++pos) {
    for (std::size_t j = 0; j < d_model; ++j) {
      const double i2 = static_cast<double>(j - j % 2);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, i2 / static_cast<double>(d_model));
      pe(pos, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

// Weights uniform in +-1/sqrt(fan_in); biases and layer-norm shifts zero,
// layer-norm gains one.
inline ModelParams init_params(const TransformerConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, stream_tag("transformer_init")));
  auto uniform = [&](std::size_t rows, std::size_t cols, std::size_t fan_in) {
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-a, a);
    return m;
  };
  const std::size_t t = cfg.n_features, d = cfg.d_model, f = cfg.d_ff;
  ModelParams p;
  p.embed_scale = uniform(t, d, 1);
  p.embed_shift = Matrix::Zero(t, d);
  p.positional = sinusoidal_encoding(t, d);
  p.layers.resize(cfg.n_layers);
  for (auto& l : p.layers) {
    l.ln1_gain = Matrix::Ones(1, d);
    l.ln1_bias = Matrix::Zero(1, d);
    l.wq = uniform(d, d, d);
    l.wk = uniform(d, d, d);
    l.wv = uniform(d, d, d);
    l.wo = uniform(d, d, d);
    l.ln2_gain = Matrix::Ones(1, d);
    l.ln2_bias = Matrix::Zero(1, d);
    l.w1 = uniform(d, f, d);
    l.b1 = Matrix::Zero(1, f);
    l.w2 = uniform(f, d, f);
    l.b2 = Matrix::Zero(1, d);
  }
  p.head_w = uniform(d, 2, d);
  p.head_b = Matrix::Zero(1, 2);
  return p;
}

// --- Building blocks -------------------------------------------------------

struct LayerNormCache {
  Matrix xhat;
  Eigen::VectorXd inv_std;
};

inline Matrix layer_norm_forward(const Matrix& x, const Matrix& gain, const Matrix& bias,
                                 LayerNormCache& cache) {
  const auto d = static_cast<double>(x.cols());
  cache.xhat.resize(x.rows(), x.cols());
  cache.inv_std.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / d;
    const auto centered = (x.row(r).array() - mean).eval();
    const double var = centered.square().sum() / d;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std(r) = inv;
    cache.xhat.row(r) = centered * inv;
  }
  Matrix y = cache.xhat;
  y.array().rowwise() *= gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

inline Matrix layer_norm_backward(const Matrix& dy, const Matrix& gain, const LayerNormCache& cache,
                                  Matrix& dgain, Matrix& dbias) {
  dgain += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbias += dy.colwise().sum();
  const auto d = static_cast<double>(dy.cols());
  Matrix dxhat = dy;
  dxhat.array().rowwise() *= gain.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_d = dxhat.row(r).sum() / d;
    const double mean_dx = dxhat.row(r).dot(cache.xhat.row(r)) / d;
    dx.row(r) = cache.inv_std(r) *
                (dxhat.row(r).array() - mean_d - cache.xhat.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

// In-place row softmax, max-shifted.
inline void softmax_rows(Matrix& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - m).exp().matrix();
    s.row(r) /= s.row(r).sum();
  }
}

struct AttentionCache {
  Matrix q, k, v;
  Matrix concat;
  Matrix weights;  // (batch * heads * tokens) x tokens
};

// Multi-head scaled dot-product self-attention over `tokens`-row blocks of h.
inline Matrix attention_forward(const Matrix& h, const LayerParams& lp, std::size_t n_heads,
                                std::size_t tokens, AttentionCache& cache) {
  const auto t = static_cast<Eigen::Index>(tokens);
  const Eigen::Index batch = h.rows() / t;
  const Eigen::Index heads = static_cast<Eigen::Index>(n_heads);
  const Eigen::Index dk = h.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  cache.q.noalias() = h * lp.wq;
  cache.k.noalias() = h * lp.wk;
  cache.v.noalias() = h * lp.wv;
  cache.concat.resize(h.rows(), h.cols());
  cache.weights.resize(batch * heads * t, t);
  Matrix s(t, t);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index hd = 0; hd < heads; ++hd) {
      s.noalias() = cache.q.block(b * t, hd * dk, t, dk) * cache.k.block(b * t, hd * dk, t, dk).transpose();
      s *= scale;
      softmax_rows(s);
      cache.weights.block((b * heads + hd) * t, 0, t, t) = s;
      cache.concat.block(b * t, hd * dk, t, dk).noalias() = s * cache.v.block(b * t, hd * dk, t, dk);
    }
  }
  return cache.concat * lp.wo;
}

// Accumulates parameter gradients into g and returns d(loss)/d(h).
inline Matrix attention_backward(const Matrix& dout, const Matrix& h, const LayerParams& lp,
                                 LayerParams& g, std::size_t n_heads, std::size_t tokens,
                                 const AttentionCache& cache) {
  const auto t = static_cast<Eigen::Index>(tokens);
  const Eigen::Index batch = h.rows() / t;
  const Eigen::Index heads = static_cast<Eigen::Index>(n_heads);
  const Eigen::Index dk = h.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  g.wo.noalias() += cache.concat.transpose() * dout;
  const Matrix dconcat = dout * lp.wo.transpose();
  Matrix dq(h.rows(), h.cols()), dk_all(h.rows(), h.cols()), dv(h.rows(), h.cols());
  Matrix da(t, t), ds(t, t);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index hd = 0; hd < heads; ++hd) {
      const auto a = cache.weights.block((b * heads + hd) * t, 0, t, t);
      const auto d_o = dconcat.block(b * t, hd * dk, t, dk);
      da.noalias() = d_o * cache.v.block(b * t, hd * dk, t, dk).transpose();
      dv.block(b * t, hd * dk, t, dk).noalias() = a.transpose() * d_o;
      const Eigen::VectorXd row_dot = (da.array() * a.array()).rowwise().sum();
      ds = a.array() * (da.array().colwise() - row_dot.array());
      ds *= scale;
      dq.block(b * t, hd * dk, t, dk).noalias() = ds * cache.k.block(b * t, hd * dk, t, dk);
      dk_all.block(b * t, hd * dk, t, dk).noalias() = ds.transpose() * cache.q.block(b * t, hd * dk, t, dk);
    }
  }
  g.wq.noalias() += h.transpose() * dq;
  g.wk.noalias() += h.transpose() * dk_all;
  g.wv.noalias() += h.transpose() * dv;
  Matrix dh = dq * lp.wq.transpose();
  dh.noalias() += dk_all * lp.wk.transpose();
  dh.noalias() += dv * lp.wv.transpose();
  return dh;
}

// --- Public single-row operations -----------------------------------------

// One token per feature: value_i * scale_i + shift_i + PE_i.
inline Matrix embed(std::span<const double> row, const ModelParams& p) {
  Matrix tokens = p.embed_shift + p.positional;
  for (std::size_t i = 0; i < row.size(); ++i) {
    tokens.row(static_cast<Eigen::Index>(i)) += row[i] * p.embed_scale.row(static_cast<Eigen::Index>(i));
  }
  return tokens;
}

// Self-attention of one row's tokens, output projection included. When
// `weights` is given it receives one tokens x tokens matrix per head.
inline Matrix multi_head_attention(const Matrix& x, const LayerParams& lp, std::size_t n_heads,
                                   std::vector<Matrix>* weights = nullptr) {
  AttentionCache cache;
  Matrix out = attention_forward(x, lp, n_heads, static_cast<std::size_t>(x.rows()), cache);
  if (weights) {
    weights->clear();
    const Eigen::Index t = x.rows();
    for (std::size_t h = 0; h < n_heads; ++h) {
      weights->push_back(cache.weights.block(static_cast<Eigen::Index>(h) * t, 0, t, t));
    }
  }
  return out;
}

// --- Batched forward/backward ---------------------------------------------

struct LayerCache {
  Matrix x_in;
  LayerNormCache ln1;
  Matrix h1;
  AttentionCache attn;
  Matrix x_mid;
  LayerNormCache ln2;
  Matrix h2;
  Matrix z;  // FFN pre-activation
  Matrix r;  // relu(z)
};

struct ForwardCache {
  std::size_t batch = 0;
  std::size_t tokens = 0;
  Matrix inputs;  // batch x n_features
  std::vector<LayerCache> layers;
  Matrix x_final;
  Matrix pooled;  // batch x d_model
  Matrix logits;  // batch x 2
};

// rows: batch x n_features of standardized values. Returns batch x 2 logits.
inline const Matrix& forward(const Matrix& rows, const ModelParams& p, const TransformerConfig& cfg,
                             ForwardCache& cache) {
  const Eigen::Index t = p.embed_scale.rows();
  const Eigen::Index batch = rows.rows();
  const Eigen::Index d = p.embed_scale.cols();
  cache.batch = static_cast<std::size_t>(batch);
  cache.tokens = static_cast<std::size_t>(t);
  cache.inputs = rows;

  Matrix x(batch * t, d);
  const Matrix base = p.embed_shift + p.positional;
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index i = 0; i < t; ++i) {
      x.row(b * t + i) = base.row(i) + rows(b, i) * p.embed_scale.row(i);
    }
  }

  cache.layers.resize(p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const LayerParams& lp = p.layers[l];
    LayerCache& c = cache.layers[l];
    c.x_in = x;
    c.h1 = layer_norm_forward(x, lp.ln1_gain, lp.ln1_bias, c.ln1);
    x += attention_forward(c.h1, lp, cfg.n_heads, cache.tokens, c.attn);
    c.x_mid = x;
    c.h2 = layer_norm_forward(x, lp.ln2_gain, lp.ln2_bias, c.ln2);
    c.z.noalias() = c.h2 * lp.w1;
    c.z.rowwise() += lp.b1.row(0);
    c.r = c.z.cwiseMax(0.0);
    x.noalias() += c.r * lp.w2;
    x.rowwise() += lp.b2.row(0);
  }
  cache.x_final = x;

  cache.pooled.resize(batch, d);
  for (Eigen::Index b = 0; b < batch; ++b) {
    cache.pooled.row(b) = x.middleRows(b * t, t).colwise().mean();
  }
  cache.logits.noalias() = cache.pooled * p.head_w;
  cache.logits.rowwise() += p.head_b.row(0);
  return cache.logits;
}

struct RowForward {
  std::array<double, 2> logits{};
  ForwardCache cache;
};

inline RowForward encoder_forward(std::span<const double> row, const ModelParams& p,
                                  const TransformerConfig& cfg) {
  RowForward out;
  Matrix rows(1, static_cast<Eigen::Index>(row.size()));
  for (std::size_t i = 0; i < row.size(); ++i) rows(0, static_cast<Eigen::Index>(i)) = row[i];
  const Matrix& logits = forward(rows, p, cfg, out.cache);
  out.logits = {logits(0, 0), logits(0, 1)};
  return out;
}

// Two-class softmax, max-shifted.
inline std::array<double, 2> softmax2(double l0, double l1) {
  const double m = std::max(l0, l1);
  const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
  const double s = e0 + e1;
  return {e0 / s, e1 / s};
}

struct LossAndGradients {
  double loss = 0.0;
  ModelParams grads;
};

// Mean softmax cross-entropy over the batch with reverse-mode gradients of
// every trainable tensor.
inline LossAndGradients loss_and_gradients(const Matrix& rows, std::span<const int> labels,
                                           const ModelParams& p, const TransformerConfig& cfg) {
  if (rows.rows() == 0) throw std::invalid_argument("empty batch");
  ForwardCache cache;
  const Matrix& logits = forward(rows, p, cfg, cache);
  const Eigen::Index batch = rows.rows();
  const Eigen::Index t = static_cast<Eigen::Index>(cache.tokens);
  const double inv_b = 1.0 / static_cast<double>(batch);

  LossAndGradients out;
  Matrix dlogits(batch, 2);
  double loss = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double l0 = logits(b, 0), l1 = logits(b, 1);
    const double m = std::max(l0, l1);
    const double lse = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
    const int y = labels[static_cast<std::size_t>(b)];
    loss += lse - (y == 0 ? l0 : l1);
    const auto prob = softmax2(l0, l1);
    dlogits(b, 0) = (prob[0] - (y == 0 ? 1.0 : 0.0)) * inv_b;
    dlogits(b, 1) = (prob[1] - (y == 1 ? 1.0 : 0.0)) * inv_b;
  }
  out.loss = loss * inv_b;
  if (!std::isfinite(out.loss)) throw NonFiniteLoss("loss is not finite");

  ModelParams& g = out.grads;
  g = zeros_like(p);
  g.head_w.noalias() = cache.pooled.transpose() * dlogits;
  g.head_b = dlogits.colwise().sum();
  const Matrix dpooled = dlogits * p.head_w.transpose();

  Matrix dx(batch * t, p.embed_scale.cols());
  const double inv_t = 1.0 / static_cast<double>(t);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index i = 0; i < t; ++i) dx.row(b * t + i) = dpooled.row(b) * inv_t;
  }

  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const LayerParams& lp = p.layers[li];
    LayerParams& gl = g.layers[li];
    const LayerCache& c = cache.layers[li];

    // Feed-forward sublayer; dx is the gradient of its residual output.
    gl.w2.noalias() += c.r.transpose() * dx;
    gl.b2 += dx.colwise().sum();
    Matrix dz = dx * lp.w2.transpose();
    dz.array() *= (c.z.array() > 0.0).cast<double>();
    gl.w1.noalias() += c.h2.transpose() * dz;
    gl.b1 += dz.colwise().sum();
    const Matrix dh2 = dz * lp.w1.transpose();
    dx += layer_norm_backward(dh2, lp.ln2_gain, c.ln2, gl.ln2_gain, gl.ln2_bias);

    // Attention sublayer.
    const Matrix dh1 = attention_backward(dx, c.h1, lp, gl, cfg.n_heads, cache.tokens, c.attn);
    dx += layer_norm_backward(dh1, lp.ln1_gain, c.ln1, gl.ln1_gain, gl.ln1_bias);
  }

  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index i = 0; i < t; ++i) {
      g.embed_scale.row(i) += rows(b, i) * dx.row(b * t + i);
      g.embed_shift.row(i) += dx.row(b * t + i);
    }
  }
  return out;
}

// --- Optimizer -------------------------------------------------------------

struct AdamState {
  ModelParams m;
  ModelParams v;
  std::uint64_t step = 0;
};

inline AdamState make_adam_state(const ModelParams& p) { return {zeros_like(p), zeros_like(p), 0}; }

inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  auto p = trainable_tensors(params);
  auto g = trainable_tensors(grads);
  auto m = trainable_tensors(state.m);
  auto v = trainable_tensors(state.v);
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i]->array() = kAdamBeta1 * m[i]->array() + (1.0 - kAdamBeta1) * g[i]->array();
    v[i]->array() = kAdamBeta2 * v[i]->array() + (1.0 - kAdamBeta2) * g[i]->array().square();
    p[i]->array() -= lr * (m[i]->array() / bc1) / ((v[i]->array() / bc2).sqrt() + kAdamEps);
  }
}

// --- Training and inference ------------------------------------------------

inline Matrix to_matrix(const Dataset& d, std::span<const std::size_t> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d.n_features()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto src = d.row(rows[r]);
    for (std::size_t c = 0; c < src.size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = src[c];
    }
  }
  return m;
}

struct Prediction {
  std::vector<int> labels;
  std::vector<std::array<double, 2>> probabilities;
};

// Label is argmax of the logits; exactly equal logits give label 0.
inline Prediction predict(const ModelParams& p, const TransformerConfig& cfg, const Dataset& d) {
  constexpr std::size_t kChunk = 256;
  Prediction out;
  out.labels.reserve(d.n_rows());
  out.probabilities.reserve(d.n_rows());
  ForwardCache cache;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < d.n_rows(); start += kChunk) {
    idx.clear();
    for (std::size_t r = start; r < std::min(d.n_rows(), start + kChunk); ++r) idx.push_back(r);
    const Matrix& logits = forward(to_matrix(d, idx), p, cfg, cache);
    for (Eigen::Index b = 0; b < logits.rows(); ++b) {
      out.labels.push_back(logits(b, 1) > logits(b, 0) ? 1 : 0);
      out.probabilities.push_back(softmax2(logits(b, 0), logits(b, 1)));
    }
  }
  return out;
}

inline double accuracy(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += (truth[i] == predicted[i]);
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

struct TrainReport {
  std::vector<double> epoch_loss;
  // Accuracy on the validation set, or on the training set when no
  // validation rows were given.
  std::vector<double> epoch_val_accuracy;
  std::size_t optimizer_steps = 0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

// Minibatch Adam on mean cross-entropy. Rows are reshuffled every epoch from
// a generator seeded by cfg.seed; the last partial batch is kept.
inline TrainResult train(const TransformerConfig& cfg, const Dataset& train_set, const Dataset& val_set) {
  cfg.validate();
  if (train_set.n_features() != cfg.n_features) {
    throw ConfigError("training data has " + std::to_string(train_set.n_features()) +
                      " features, config expects " + std::to_string(cfg.n_features));
  }
  if (train_set.empty()) throw std::invalid_argument("empty training set");
  const auto started = std::chrono::steady_clock::now();

  TrainResult out;
  out.params = init_params(cfg);
  AdamState adam = make_adam_state(out.params);
  Rng rng(derive_seed(cfg.seed, stream_tag("transformer_shuffle")));
  std::vector<std::size_t> order(train_set.n_rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<int> labels;
  const Dataset& monitor = val_set.empty() ? train_set : val_set;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> batch(order.data() + start, stop - start);
      labels.clear();
      for (std::size_t r : batch) labels.push_back(train_set.target(r));
      auto lg = loss_and_gradients(to_matrix(train_set, batch), labels, out.params, cfg);
      if (!all_finite(lg.grads)) throw NonFiniteLoss("gradient is not finite");
      adam_step(out.params, lg.grads, adam, cfg.learning_rate);
      ++out.report.optimizer_steps;
      total += lg.loss * static_cast<double>(batch.size());
    }
    if (!all_finite(out.params)) throw NonFiniteLoss("parameters are not finite");
    out.report.epoch_loss.push_back(total / static_cast<double>(order.size()));
    const auto pred = predict(out.params, cfg, monitor);
    out.report.epoch_val_accuracy.push_back(accuracy(monitor.targets(), pred.labels));
  }
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

// --- Serialization ---------------------------------------------------------
//
// Flat little-endian layout:
//   8 bytes   magic "PSOFMR01"
//   u64       tag length, then that many bytes of free text (run digest)
//   u64 x 5   n_features, n_layers, d_model, n_heads, d_ff
//   u64       tensor count
//   per tensor: u64 rows, u64 cols, rows*cols f64 values in row-major order
// Tensor order: positional, then trainable_tensors() order.

inline constexpr char kModelMagic[8] = {'P', 'S', 'O', 'F', 'M', 'R', '0', '1'};

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

inline std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8)) throw Error("model file truncated");
  return v;
}

}  // namespace detail

inline void save_model(std::ostream& out, const TransformerConfig& cfg, const ModelParams& p,
                       const std::string& tag = {}) {
  out.write(kModelMagic, 8);
  detail::put_u64(out, tag.size());
  out.write(tag.data(), static_cast<std::streamsize>(tag.size()));
  for (std::size_t v : {cfg.n_features, cfg.n_layers, cfg.d_model, cfg.n_heads, cfg.d_ff}) {
    detail::put_u64(out, v);
  }
  std::vector<const Matrix*> tensors{&p.positional};
  for (const Matrix* m : trainable_tensors(p)) tensors.push_back(m);
  detail::put_u64(out, tensors.size());
  for (const Matrix* m : tensors) {
    detail::put_u64(out, static_cast<std::uint64_t>(m->rows()));
    detail::put_u64(out, static_cast<std::uint64_t>(m->cols()));
    out.write(reinterpret_cast<const char*>(m->data()), static_cast<std::streamsize>(m->size() * 8));
  }
}

struct LoadedModel {
  TransformerConfig config;  // architecture fields only
  ModelParams params;
  std::string tag;
};

inline LoadedModel load_model(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kModelMagic)) throw Error("not a model file");
  LoadedModel out;
  const std::uint64_t tag_len = detail::get_u64(in);
  if (tag_len > (1u << 20)) throw Error("model file tag too long");
  out.tag.resize(tag_len);
  if (!in.read(out.tag.data(), static_cast<std::streamsize>(tag_len))) throw Error("model file truncated");
  auto& cfg = out.config;
  cfg.n_features = detail::get_u64(in);
  cfg.n_layers = detail::get_u64(in);
  cfg.d_model = detail::get_u64(in);
  cfg.n_heads = detail::get_u64(in);
  cfg.d_ff = detail::get_u64(in);
  cfg.validate();
  out.params.layers.resize(cfg.n_layers);
  std::vector<Matrix*> tensors{&out.params.positional};
  for (Matrix* m : trainable_tensors(out.params)) tensors.push_back(m);
  if (detail::get_u64(in) != tensors.size()) throw Error("model file tensor count mismatch");

  // Expected shapes come from a freshly shaped parameter set.
  const ModelParams shape = init_params(cfg);
  std::vector<const Matrix*> expected{&shape.positional};
  for (const Matrix* m : trainable_tensors(shape)) expected.push_back(m);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto rows = static_cast<Eigen::Index>(detail::get_u64(in));
    const auto cols = static_cast<Eigen::Index>(detail::get_u64(in));
    if (rows != expected[i]->rows() || cols != expected[i]->cols()) throw Error("model file shape mismatch");
    tensors[i]->resize(rows, cols);
    if (!in.read(reinterpret_cast<char*>(tensors[i]->data()), static_cast<std::streamsize>(rows * cols * 8))) {
      throw Error("model file truncated");
    }
  }
  return out;
}

}  // namespace psoformer::transformer

#endif  // PSOFORMER_TRANSFORMER_HPP_
