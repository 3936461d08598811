#pragma once

// Decoder-only pre-norm Transformer for symbol detection, templated on the
// scalar type: float for production training/eval, double for the
// finite-difference gradient gate.  All gradients are hand-derived analytic
// backprop; no autodiff.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "defined/common.hpp"
#include "defined/constellation.hpp"
#include "defined/rng.hpp"

namespace defined {

template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

struct ModelConfig {
  Modulation mod = Modulation::QAM16;
  int n_t = 1;
  int n_r = 1;
  int d_e = 64;
  int n_layers = 8;
  int n_heads = 8;
  int d_ff = 256;
  int T_max = 31;

  int n_classes() const {
    int c = build_constellation(mod).size();
    long total = 1;
    for (int a = 0; a < n_t; ++a) total *= c;
    return static_cast<int>(total);
  }
  /// Token width: complex receive vector split into [Re; Im] must fit, and so
  /// must the one-hot class vector.
  int input_dim() const { return std::max(2 * n_r, n_classes()); }
  int max_tokens() const { return 2 * T_max; }
  int head_dim() const { return d_e / n_heads; }

  void validate() const {
    if (d_e <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 || T_max <= 0)
      throw std::invalid_argument("model config: dimensions must be positive");
    if (d_e % n_heads != 0)
      throw std::invalid_argument("model config: d_e must be divisible by n_heads");
    if (n_t < 1 || n_r < 1)
      throw std::invalid_argument("model config: antenna counts must be >= 1");
  }

  bool operator==(const ModelConfig&) const = default;
};

/// Reference to one parameter tensor for flat iteration (optimizer,
/// serialization, gradient checking).  Vectors report cols = 1.
template <class S>
struct TensorRef {
  std::string name;
  S* data;
  long rows;
  long cols;
  long size() const { return rows * cols; }
};

template <class S>
struct Params {
  ModelConfig cfg;

  MatX<S> embed;  // d_e x D_s, applied as E = tokens * embed^T
  MatX<S> pos;    // max_tokens x d_e, learned absolute positions

  struct Layer {
    VecX<S> ln1_g, ln1_b;
    MatX<S> wq, wk, wv, wo;  // d_e x d_e, applied on the right: Q = X * wq
    VecX<S> ln2_g, ln2_b;
    MatX<S> w1;  // d_e x d_ff
    VecX<S> b1;
    MatX<S> w2;  // d_ff x d_e
    VecX<S> b2;
  };
  std::vector<Layer> layers;

  VecX<S> lnf_g, lnf_b;
  MatX<S> head;  // n_classes x d_e classification matrix

  static Params zeros(const ModelConfig& cfg) {
    cfg.validate();
    Params p;
    p.cfg = cfg;
    const int ds = cfg.input_dim();
    p.embed = MatX<S>::Zero(cfg.d_e, ds);
    p.pos = MatX<S>::Zero(cfg.max_tokens(), cfg.d_e);
    p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
    for (auto& l : p.layers) {
      l.ln1_g = VecX<S>::Zero(cfg.d_e);
      l.ln1_b = VecX<S>::Zero(cfg.d_e);
      l.wq = MatX<S>::Zero(cfg.d_e, cfg.d_e);
      l.wk = MatX<S>::Zero(cfg.d_e, cfg.d_e);
      l.wv = MatX<S>::Zero(cfg.d_e, cfg.d_e);
      l.wo = MatX<S>::Zero(cfg.d_e, cfg.d_e);
      l.ln2_g = VecX<S>::Zero(cfg.d_e);
      l.ln2_b = VecX<S>::Zero(cfg.d_e);
      l.w1 = MatX<S>::Zero(cfg.d_e, cfg.d_ff);
      l.b1 = VecX<S>::Zero(cfg.d_ff);
      l.w2 = MatX<S>::Zero(cfg.d_ff, cfg.d_e);
      l.b2 = VecX<S>::Zero(cfg.d_e);
    }
    p.lnf_g = VecX<S>::Zero(cfg.d_e);
    p.lnf_b = VecX<S>::Zero(cfg.d_e);
    p.head = MatX<S>::Zero(cfg.n_classes(), cfg.d_e);
    return p;
  }

  /// Weight matrices ~ N(0, 0.02); norm scales 1; biases 0.
  static Params init(const ModelConfig& cfg, Rng& rng) {
    Params p = zeros(cfg);
    auto fill = [&rng](MatX<S>& m) {
      for (long j = 0; j < m.cols(); ++j)
        for (long i = 0; i < m.rows(); ++i)
          m(i, j) = static_cast<S>(0.02 * rng.gaussian());
    };
    fill(p.embed);
    fill(p.pos);
    for (auto& l : p.layers) {
      l.ln1_g.setOnes();
      fill(l.wq);
      fill(l.wk);
      fill(l.wv);
      fill(l.wo);
      l.ln2_g.setOnes();
      fill(l.w1);
      fill(l.w2);
    }
    p.lnf_g.setOnes();
    fill(p.head);
    return p;
  }

  /// Visit every tensor in declared (checkpoint) order.
  template <class F>
  void for_each_tensor(F&& f) {
    f(TensorRef<S>{"embed", embed.data(), embed.rows(), embed.cols()});
    f(TensorRef<S>{"pos", pos.data(), pos.rows(), pos.cols()});
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& l = layers[i];
      std::string pre = "layer" + std::to_string(i) + ".";
      f(TensorRef<S>{pre + "ln1_g", l.ln1_g.data(), l.ln1_g.size(), 1});
      f(TensorRef<S>{pre + "ln1_b", l.ln1_b.data(), l.ln1_b.size(), 1});
      f(TensorRef<S>{pre + "wq", l.wq.data(), l.wq.rows(), l.wq.cols()});
      f(TensorRef<S>{pre + "wk", l.wk.data(), l.wk.rows(), l.wk.cols()});
      f(TensorRef<S>{pre + "wv", l.wv.data(), l.wv.rows(), l.wv.cols()});
      f(TensorRef<S>{pre + "wo", l.wo.data(), l.wo.rows(), l.wo.cols()});
      f(TensorRef<S>{pre + "ln2_g", l.ln2_g.data(), l.ln2_g.size(), 1});
      f(TensorRef<S>{pre + "ln2_b", l.ln2_b.data(), l.ln2_b.size(), 1});
      f(TensorRef<S>{pre + "w1", l.w1.data(), l.w1.rows(), l.w1.cols()});
      f(TensorRef<S>{pre + "b1", l.b1.data(), l.b1.size(), 1});
      f(TensorRef<S>{pre + "w2", l.w2.data(), l.w2.rows(), l.w2.cols()});
      f(TensorRef<S>{pre + "b2", l.b2.data(), l.b2.size(), 1});
    }
    f(TensorRef<S>{"lnf_g", lnf_g.data(), lnf_g.size(), 1});
    f(TensorRef<S>{"lnf_b", lnf_b.data(), lnf_b.size(), 1});
    f(TensorRef<S>{"head", head.data(), head.rows(), head.cols()});
  }

  template <class F>
  void for_each_tensor(F&& f) const {
    const_cast<Params*>(this)->for_each_tensor(
        [&f](const TensorRef<S>& t) { f(TensorRef<const S>{t.name, t.data, t.rows, t.cols}); });
  }

  long param_count() const {
    long n = 0;
    for_each_tensor([&n](const TensorRef<const S>& t) { n += t.size(); });
    return n;
  }

  /// p += a * q (same shapes).
  void axpy(S a, const Params& q) {
    std::vector<const S*> other;
    q.for_each_tensor([&other](const TensorRef<const S>& t) { other.push_back(t.data); });
    std::size_t idx = 0;
    for_each_tensor([&](const TensorRef<S>& t) {
      Eigen::Map<VecX<S>> dst(t.data, t.size());
      Eigen::Map<const VecX<S>> src(other[idx++], t.size());
      dst += a * src;
    });
  }

  void set_zero() {
    for_each_tensor([](const TensorRef<S>& t) {
      Eigen::Map<VecX<S>>(t.data, t.size()).setZero();
    });
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&ok](const TensorRef<const S>& t) {
      if (!Eigen::Map<const VecX<S>>(t.data, t.size()).allFinite()) ok = false;
    });
    return ok;
  }
};

/// Alternating y-token / x-token sequence, optionally ending on a query
/// y-token.  Row i of `tokens` is token i, width D_s.
template <class S>
struct TokenSeq {
  MatX<S> tokens;
  std::vector<int> y_rows;  // ascending token indices of y-tokens
};

/// One in-context example: received vector + hard joint-symbol label.
struct PairYX {
  CVec y;
  long x_index;
};

namespace detail {

template <class S>
inline void write_y_token(const ModelConfig& cfg, const CVec& y, MatX<S>& tokens, long row) {
  if (y.size() != cfg.n_r) throw std::invalid_argument("tokenize: y dimension != n_r");
  for (int r = 0; r < cfg.n_r; ++r) {
    tokens(row, r) = static_cast<S>(y(r).real());
    tokens(row, cfg.n_r + r) = static_cast<S>(y(r).imag());
  }
}

}  // namespace detail

/// Build the token matrix: y-tokens are [Re(y); Im(y)] zero-padded to D_s,
/// x-tokens are one-hot class vectors zero-padded to D_s.
template <class S>
TokenSeq<S> tokenize(const ModelConfig& cfg, const std::vector<PairYX>& pairs,
                     const CVec* query) {
  const int n_pairs = static_cast<int>(pairs.size());
  if (n_pairs > cfg.T_max) throw std::length_error("tokenize: too many pairs");
  if (query == nullptr && n_pairs == 0)
    throw std::invalid_argument("tokenize: empty sequence");
  const int n_tokens = 2 * n_pairs + (query ? 1 : 0);
  if (n_tokens > cfg.max_tokens()) throw std::length_error("tokenize: too many tokens");

  TokenSeq<S> seq;
  seq.tokens = MatX<S>::Zero(n_tokens, cfg.input_dim());
  seq.y_rows.reserve(static_cast<std::size_t>(n_pairs) + 1);
  const int n_classes = cfg.n_classes();
  for (int i = 0; i < n_pairs; ++i) {
    detail::write_y_token<S>(cfg, pairs[static_cast<std::size_t>(i)].y, seq.tokens, 2 * i);
    seq.y_rows.push_back(2 * i);
    long x = pairs[static_cast<std::size_t>(i)].x_index;
    if (x < 0 || x >= n_classes) throw std::out_of_range("tokenize: class index out of range");
    seq.tokens(2 * i + 1, static_cast<int>(x)) = static_cast<S>(1);
  }
  if (query) {
    detail::write_y_token<S>(cfg, *query, seq.tokens, n_tokens - 1);
    seq.y_rows.push_back(n_tokens - 1);
  }
  return seq;
}

namespace detail {

inline constexpr double kLnEps = 1e-5;

/// Pre-norm LayerNorm forward over rows; caches xhat and 1/std per row.
template <class S>
void layernorm_fwd(const MatX<S>& x, const VecX<S>& g, const VecX<S>& b, MatX<S>& out,
                   MatX<S>& xhat, VecX<S>& inv_std) {
  const long n = x.rows(), d = x.cols();
  out.resize(n, d);
  xhat.resize(n, d);
  inv_std.resize(n);
  for (long i = 0; i < n; ++i) {
    S mean = x.row(i).mean();
    auto centered = (x.row(i).array() - mean).eval();
    S var = centered.square().mean();
    S inv = S(1) / std::sqrt(var + static_cast<S>(kLnEps));
    inv_std(i) = inv;
    xhat.row(i) = (centered * inv).matrix();
    out.row(i) = xhat.row(i).cwiseProduct(g.transpose()) + b.transpose();
  }
}

/// Backward through LayerNorm.  Accumulates dg/db; returns dx.
template <class S>
MatX<S> layernorm_bwd(const MatX<S>& d_out, const MatX<S>& xhat, const VecX<S>& inv_std,
                      const VecX<S>& g, VecX<S>& dg, VecX<S>& db) {
  const long n = d_out.rows(), d = d_out.cols();
  MatX<S> dx(n, d);
  dg += (d_out.cwiseProduct(xhat)).colwise().sum().transpose();
  db += d_out.colwise().sum().transpose();
  const S inv_d = S(1) / static_cast<S>(d);
  for (long i = 0; i < n; ++i) {
    auto dxhat = d_out.row(i).cwiseProduct(g.transpose()).eval();
    S m1 = dxhat.mean();
    S m2 = dxhat.cwiseProduct(xhat.row(i)).sum() * inv_d;
    dx.row(i) = inv_std(i) * (dxhat.array() - m1 - xhat.row(i).array() * m2).matrix();
  }
  return dx;
}

template <class S>
struct LayerCache {
  MatX<S> in;                          // layer input E_l
  MatX<S> ln1_out, ln1_xhat;
  VecX<S> ln1_inv;
  MatX<S> q, k, v;                     // n x d_e
  std::vector<MatX<S>> attw;           // per head, n x n (zeros above diagonal)
  MatX<S> concat;                      // attention output before W_O
  MatX<S> after_attn;                  // U = in + concat * wo
  MatX<S> ln2_out, ln2_xhat;
  VecX<S> ln2_inv;
  MatX<S> ffn_pre, ffn_act;            // n x d_ff
};

template <class S>
struct FwdCache {
  std::vector<LayerCache<S>> layers;
  MatX<S> final_in;                    // output of the last layer, n x d_e
  MatX<S> lnf_out, lnf_xhat;           // final norm on y-rows only, n_y x d_e
  VecX<S> lnf_inv;
};

}  // namespace detail

/// Causal forward pass.  Returns one logits row (n_classes wide) per y-token,
/// in y_rows order.  Attention is computed per row over the prefix only, so
/// causality holds bitwise by construction.  Throws NumericError on
/// non-finite activations (layer index; -1 = embedding, n_layers = head).
template <class S>
MatX<S> forward(const Params<S>& params, const TokenSeq<S>& seq,
                detail::FwdCache<S>* cache = nullptr) {
  const ModelConfig& cfg = params.cfg;
  const long n = seq.tokens.rows();
  if (n > cfg.max_tokens()) throw std::length_error("forward: sequence too long");
  if (seq.tokens.cols() != cfg.input_dim())
    throw std::invalid_argument("forward: token width != D_s");
  if (seq.y_rows.empty()) throw std::invalid_argument("forward: no y-positions");

  const int dk = cfg.head_dim();
  const S scale = S(1) / std::sqrt(static_cast<S>(dk));

  MatX<S> x = seq.tokens * params.embed.transpose();
  x += params.pos.topRows(n);
  if (!x.allFinite()) throw NumericError(-1, "non-finite activations in embedding");

  if (cache) cache->layers.resize(static_cast<std::size_t>(cfg.n_layers));
  detail::LayerCache<S> local;

  for (int l = 0; l < cfg.n_layers; ++l) {
    auto& lc = cache ? cache->layers[static_cast<std::size_t>(l)] : local;
    const auto& lp = params.layers[static_cast<std::size_t>(l)];
    if (cache) lc.in = x;

    detail::layernorm_fwd(x, lp.ln1_g, lp.ln1_b, lc.ln1_out, lc.ln1_xhat, lc.ln1_inv);
    lc.q.noalias() = lc.ln1_out * lp.wq;
    lc.k.noalias() = lc.ln1_out * lp.wk;
    lc.v.noalias() = lc.ln1_out * lp.wv;

    lc.concat.resize(n, cfg.d_e);
    if (cache) lc.attw.assign(static_cast<std::size_t>(cfg.n_heads), MatX<S>::Zero(n, n));
    for (int h = 0; h < cfg.n_heads; ++h) {
      auto qh = lc.q.middleCols(h * dk, dk);
      auto kh = lc.k.middleCols(h * dk, dk);
      auto vh = lc.v.middleCols(h * dk, dk);
      for (long i = 0; i < n; ++i) {
        VecX<S> s = (kh.topRows(i + 1) * qh.row(i).transpose()) * scale;
        S mx = s.maxCoeff();
        VecX<S> w = ((s.array() - mx).exp()).matrix();
        w /= w.sum();
        if (cache) cache->layers[static_cast<std::size_t>(l)].attw[static_cast<std::size_t>(h)].row(i).head(i + 1) = w.transpose();
        lc.concat.block(i, h * dk, 1, dk).noalias() = w.transpose() * vh.topRows(i + 1);
      }
    }
    MatX<S> u = x + lc.concat * lp.wo;
    if (cache) lc.after_attn = u;

    detail::layernorm_fwd(u, lp.ln2_g, lp.ln2_b, lc.ln2_out, lc.ln2_xhat, lc.ln2_inv);
    lc.ffn_pre.noalias() = lc.ln2_out * lp.w1;
    lc.ffn_pre.rowwise() += lp.b1.transpose();
    lc.ffn_act = lc.ffn_pre.cwiseMax(S(0));
    x = u;
    x.noalias() += lc.ffn_act * lp.w2;
    x.rowwise() += lp.b2.transpose();
    if (!x.allFinite())
      throw NumericError(l, "non-finite activations in layer " + std::to_string(l));
  }

  // Final norm + classification head, read at y-positions only.
  const long n_y = static_cast<long>(seq.y_rows.size());
  MatX<S> y_states(n_y, cfg.d_e);
  for (long r = 0; r < n_y; ++r) y_states.row(r) = x.row(seq.y_rows[static_cast<std::size_t>(r)]);
  MatX<S> lnf_out, lnf_xhat;
  VecX<S> lnf_inv;
  detail::layernorm_fwd(y_states, params.lnf_g, params.lnf_b, lnf_out, lnf_xhat, lnf_inv);
  MatX<S> logits = lnf_out * params.head.transpose();
  if (!logits.allFinite())
    throw NumericError(cfg.n_layers, "non-finite logits at classification head");
  if (cache) {
    cache->final_in = std::move(x);
    cache->lnf_out = std::move(lnf_out);
    cache->lnf_xhat = std::move(lnf_xhat);
    cache->lnf_inv = std::move(lnf_inv);
  }
  return logits;
}

/// One training example: token sequence plus per-y-row target class
/// (-1 marks an unsupervised position).
template <class S>
struct SupervisedSeq {
  TokenSeq<S> seq;
  std::vector<long> targets;
};

template <class S>
using Batch = std::vector<SupervisedSeq<S>>;

namespace detail {

template <class S>
S row_cross_entropy(const Eigen::Matrix<S, 1, Eigen::Dynamic>& logits, long target,
                    Eigen::Matrix<S, 1, Eigen::Dynamic>* d_logits) {
  S mx = logits.maxCoeff();
  auto shifted = (logits.array() - mx).eval();
  S z = shifted.exp().sum();
  S loss = std::log(z) - shifted(static_cast<int>(target));
  if (d_logits) {
    *d_logits = (shifted.exp() / z).matrix();
    (*d_logits)(static_cast<int>(target)) -= S(1);
  }
  return loss;
}

template <class S>
long count_supervised(const Batch<S>& batch) {
  long m = 0;
  for (const auto& ex : batch) {
    if (ex.targets.size() != ex.seq.y_rows.size())
      throw std::invalid_argument("batch: targets misaligned with y-positions");
    for (long t : ex.targets)
      if (t >= 0) ++m;
  }
  return m;
}

}  // namespace detail

/// Mean masked cross-entropy over all supervised y-positions in the batch.
template <class S>
S batch_loss(const Params<S>& params, const Batch<S>& batch) {
  long m = detail::count_supervised(batch);
  if (m == 0) throw std::invalid_argument("batch: empty supervision mask");
  S total = S(0);
  for (const auto& ex : batch) {
    MatX<S> logits = forward(params, ex.seq);
    for (long r = 0; r < logits.rows(); ++r) {
      long tgt = ex.targets[static_cast<std::size_t>(r)];
      if (tgt < 0) continue;
      Eigen::Matrix<S, 1, Eigen::Dynamic> row = logits.row(r);
      total += detail::row_cross_entropy<S>(row, tgt, nullptr);
    }
  }
  return total / static_cast<S>(m);
}

/// Same loss, plus exact analytic gradients for every parameter tensor.
/// `grads` is zeroed first and must share the config.
template <class S>
S batch_loss_and_grads(const Params<S>& params, const Batch<S>& batch, Params<S>& grads) {
  const ModelConfig& cfg = params.cfg;
  if (!(grads.cfg == cfg)) grads = Params<S>::zeros(cfg);
  grads.set_zero();
  long m = detail::count_supervised(batch);
  if (m == 0) throw std::invalid_argument("batch: empty supervision mask");
  const S inv_m = S(1) / static_cast<S>(m);
  const int dk = cfg.head_dim();
  const S scale = S(1) / std::sqrt(static_cast<S>(dk));
  S total = S(0);

  for (const auto& ex : batch) {
    detail::FwdCache<S> cache;
    MatX<S> logits = forward(params, ex.seq, &cache);
    const long n = ex.seq.tokens.rows();
    const long n_y = logits.rows();

    // Loss + d(loss)/d(logits), scaled by the global 1/m up front.
    MatX<S> d_logits = MatX<S>::Zero(n_y, cfg.n_classes());
    for (long r = 0; r < n_y; ++r) {
      long tgt = ex.targets[static_cast<std::size_t>(r)];
      if (tgt < 0) continue;
      Eigen::Matrix<S, 1, Eigen::Dynamic> row = logits.row(r);
      Eigen::Matrix<S, 1, Eigen::Dynamic> drow(cfg.n_classes());
      total += detail::row_cross_entropy<S>(row, tgt, &drow);
      d_logits.row(r) = drow * inv_m;
    }

    // Head + final norm (y-rows only), scattered back to full width.
    grads.head.noalias() += d_logits.transpose() * cache.lnf_out;
    MatX<S> d_lnf_out = d_logits * params.head;
    MatX<S> d_y_states =
        detail::layernorm_bwd(d_lnf_out, cache.lnf_xhat, cache.lnf_inv, params.lnf_g,
                              grads.lnf_g, grads.lnf_b);
    MatX<S> dx = MatX<S>::Zero(n, cfg.d_e);
    for (long r = 0; r < n_y; ++r)
      dx.row(ex.seq.y_rows[static_cast<std::size_t>(r)]) = d_y_states.row(r);

    for (int l = cfg.n_layers - 1; l >= 0; --l) {
      const auto& lp = params.layers[static_cast<std::size_t>(l)];
      auto& lg = grads.layers[static_cast<std::size_t>(l)];
      auto& lc = cache.layers[static_cast<std::size_t>(l)];

      // FFN block: x_out = u + relu(ln2(u) w1 + b1) w2 + b2
      MatX<S> d_act = dx * lp.w2.transpose();
      lg.w2.noalias() += lc.ffn_act.transpose() * dx;
      lg.b2 += dx.colwise().sum().transpose();
      MatX<S> d_pre =
          ((lc.ffn_pre.array() > S(0)).template cast<S>() * d_act.array()).matrix();
      lg.w1.noalias() += lc.ln2_out.transpose() * d_pre;
      lg.b1 += d_pre.colwise().sum().transpose();
      MatX<S> d_ln2_out = d_pre * lp.w1.transpose();
      MatX<S> du = dx + detail::layernorm_bwd(d_ln2_out, lc.ln2_xhat, lc.ln2_inv,
                                              lp.ln2_g, lg.ln2_g, lg.ln2_b);

      // Attention block: u = in + concat * wo
      lg.wo.noalias() += lc.concat.transpose() * du;
      MatX<S> d_concat = du * lp.wo.transpose();
      MatX<S> dq = MatX<S>::Zero(n, cfg.d_e);
      MatX<S> dk_m = MatX<S>::Zero(n, cfg.d_e);
      MatX<S> dv = MatX<S>::Zero(n, cfg.d_e);
      for (int h = 0; h < cfg.n_heads; ++h) {
        auto qh = lc.q.middleCols(h * dk, dk);
        auto kh = lc.k.middleCols(h * dk, dk);
        auto vh = lc.v.middleCols(h * dk, dk);
        auto dqh = dq.middleCols(h * dk, dk);
        auto dkh = dk_m.middleCols(h * dk, dk);
        auto dvh = dv.middleCols(h * dk, dk);
        const auto& aw = lc.attw[static_cast<std::size_t>(h)];
        for (long i = 0; i < n; ++i) {
          auto w = aw.row(i).head(i + 1);
          Eigen::Matrix<S, 1, Eigen::Dynamic> d_oh = d_concat.block(i, h * dk, 1, dk);
          VecX<S> dw = vh.topRows(i + 1) * d_oh.transpose();
          dvh.topRows(i + 1).noalias() += w.transpose() * d_oh;
          S dot = w.transpose().dot(dw);
          VecX<S> ds = (w.transpose().array() * (dw.array() - dot)).matrix() * scale;
          dqh.row(i).noalias() += ds.transpose() * kh.topRows(i + 1);
          dkh.topRows(i + 1).noalias() += ds * qh.row(i);
        }
      }
      lg.wq.noalias() += lc.ln1_out.transpose() * dq;
      lg.wk.noalias() += lc.ln1_out.transpose() * dk_m;
      lg.wv.noalias() += lc.ln1_out.transpose() * dv;
      MatX<S> d_ln1_out = dq * lp.wq.transpose();
      d_ln1_out.noalias() += dk_m * lp.wk.transpose();
      d_ln1_out.noalias() += dv * lp.wv.transpose();
      dx = du + detail::layernorm_bwd(d_ln1_out, lc.ln1_xhat, lc.ln1_inv, lp.ln1_g,
                                      lg.ln1_g, lg.ln1_b);
    }

    grads.pos.topRows(n) += dx;
    grads.embed.noalias() += dx.transpose() * ex.seq.tokens;
  }
  return total / static_cast<S>(m);
}

/// Probabilities + argmax decision for the query given clean context pairs.
/// Argmax ties resolve to the lowest class index.
template <class S>
std::pair<VecX<S>, long> predict(const Params<S>& params, const std::vector<PairYX>& context,
                                 const CVec& y_query) {
  if (static_cast<int>(context.size()) > params.cfg.T_max - 1)
    throw std::length_error("predict: context too long");
  TokenSeq<S> seq = tokenize<S>(params.cfg, context, &y_query);
  MatX<S> logits = forward(params, seq);
  Eigen::Matrix<S, 1, Eigen::Dynamic> last = logits.row(logits.rows() - 1);
  S mx = last.maxCoeff();
  VecX<S> probs = ((last.array() - mx).exp()).matrix().transpose();
  probs /= probs.sum();
  long best = 0;
  for (long i = 1; i < probs.size(); ++i)
    if (probs(i) > probs(best)) best = i;
  return {probs, best};
}

/// Adam with linear warmup; state lives in the same tensor layout as the
/// parameters.
template <class S>
class Adam {
 public:
  Adam(const ModelConfig& cfg, double lr = 3e-4, int warmup_steps = 500,
       double clip_norm = 1.0)
      : lr_(lr), warmup_(warmup_steps), clip_norm_(clip_norm),
        m_(Params<S>::zeros(cfg)), v_(Params<S>::zeros(cfg)) {}

  long steps_taken() const { return t_; }

  void step(Params<S>& p, Params<S>& g) {
    ++t_;
    double lr_t = lr_;
    if (warmup_ > 0 && t_ <= warmup_) lr_t = lr_ * static_cast<double>(t_) / warmup_;

    if (clip_norm_ > 0.0) {
      double sq = 0.0;
      g.for_each_tensor([&sq](const TensorRef<S>& t) {
        sq += Eigen::Map<const VecX<S>>(t.data, t.size()).template cast<double>().squaredNorm();
      });
      double norm = std::sqrt(sq);
      if (norm > clip_norm_) {
        S shrink = static_cast<S>(clip_norm_ / norm);
        g.for_each_tensor([shrink](const TensorRef<S>& t) {
          Eigen::Map<VecX<S>>(t.data, t.size()) *= shrink;
        });
      }
    }

    const S b1 = static_cast<S>(0.9), b2 = static_cast<S>(0.999);
    const S eps = static_cast<S>(1e-8);
    const S bc1 = S(1) - std::pow(b1, static_cast<S>(t_));
    const S bc2 = S(1) - std::pow(b2, static_cast<S>(t_));
    const S alpha = static_cast<S>(lr_t);

    std::vector<S*> gp, mp, vp;
    g.for_each_tensor([&gp](const TensorRef<S>& t) { gp.push_back(t.data); });
    m_.for_each_tensor([&mp](const TensorRef<S>& t) { mp.push_back(t.data); });
    v_.for_each_tensor([&vp](const TensorRef<S>& t) { vp.push_back(t.data); });
    std::size_t idx = 0;
    p.for_each_tensor([&](const TensorRef<S>& t) {
      Eigen::Map<VecX<S>> pv(t.data, t.size());
      Eigen::Map<VecX<S>> gv(gp[idx], t.size());
      Eigen::Map<VecX<S>> mv(mp[idx], t.size());
      Eigen::Map<VecX<S>> vv(vp[idx], t.size());
      ++idx;
      mv = b1 * mv + (S(1) - b1) * gv;
      vv = b2 * vv + (S(1) - b2) * gv.cwiseProduct(gv);
      pv -= alpha * (mv / bc1).cwiseQuotient(((vv / bc2).cwiseSqrt().array() + eps).matrix());
    });
  }

 private:
  double lr_;
  int warmup_;
  double clip_norm_;
  long t_ = 0;
  Params<S> m_, v_;
};

}  // namespace defined
