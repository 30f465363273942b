#pragma once

// Post-LN transformer encoder with a tied-embedding masked-LM head, with a
// hand-written backward pass. Templated on the scalar so the same code runs
// in float for training and in double for gradient checking.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmconcept/nn/config.hpp"
#include "mmconcept/nn/rng.hpp"

namespace mmconcept::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ColVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct Param {
  Matrix<T> value;
  Matrix<T> grad;

  void resize(Eigen::Index rows, Eigen::Index cols) {
    value = Matrix<T>::Zero(rows, cols);
    grad = Matrix<T>::Zero(rows, cols);
  }
};

template <typename T>
struct LayerParams {
  Param<T> q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;
  Param<T> attn_ln_g, attn_ln_b;
  Param<T> ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b;
  Param<T> ffn_ln_g, ffn_ln_b;
};

template <typename T>
struct ModelParams {
  Param<T> token_embedding, position_embedding, emb_ln_g, emb_ln_b;
  std::vector<LayerParams<T>> layers;
  Param<T> head_w, head_b, head_ln_g, head_ln_b, output_bias;

  /// Calls fn(name, param) for every tensor in a fixed order.
  template <typename Fn>
  void visit(Fn&& fn) {
    visit_impl(*this, fn);
  }
  template <typename Fn>
  void visit(Fn&& fn) const {
    visit_impl(*this, fn);
  }

 private:
  template <typename Self, typename Fn>
  static void visit_impl(Self& self, Fn& fn) {
    fn("embeddings.token", self.token_embedding);
    fn("embeddings.position", self.position_embedding);
    fn("embeddings.ln.gamma", self.emb_ln_g);
    fn("embeddings.ln.beta", self.emb_ln_b);
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      auto& l = self.layers[i];
      const std::string p = "layer." + std::to_string(i) + ".";
      fn(p + "attn.q.weight", l.q_w);
      fn(p + "attn.q.bias", l.q_b);
      fn(p + "attn.k.weight", l.k_w);
      fn(p + "attn.k.bias", l.k_b);
      fn(p + "attn.v.weight", l.v_w);
      fn(p + "attn.v.bias", l.v_b);
      fn(p + "attn.out.weight", l.o_w);
      fn(p + "attn.out.bias", l.o_b);
      fn(p + "attn.ln.gamma", l.attn_ln_g);
      fn(p + "attn.ln.beta", l.attn_ln_b);
      fn(p + "ffn.in.weight", l.ffn_in_w);
      fn(p + "ffn.in.bias", l.ffn_in_b);
      fn(p + "ffn.out.weight", l.ffn_out_w);
      fn(p + "ffn.out.bias", l.ffn_out_b);
      fn(p + "ffn.ln.gamma", l.ffn_ln_g);
      fn(p + "ffn.ln.beta", l.ffn_ln_b);
    }
    fn("head.dense.weight", self.head_w);
    fn("head.dense.bias", self.head_b);
    fn("head.ln.gamma", self.head_ln_g);
    fn("head.ln.beta", self.head_ln_b);
    fn("head.output.bias", self.output_bias);
  }
};

/// A masked position and the token id the model should recover there.
struct MaskedPosition {
  std::size_t position = 0;
  int label = 0;

  bool operator==(const MaskedPosition&) const = default;
};

namespace detail {

inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return cdf + x * pdf;
}

template <typename T>
struct LayerNormCache {
  Matrix<T> xhat;
  ColVector<T> rstd;
};

template <typename T>
Matrix<T> layer_norm(const Matrix<T>& x, const Param<T>& gamma, const Param<T>& beta, LayerNormCache<T>& cache) {
  const Eigen::Index n = x.cols();
  cache.xhat.resize(x.rows(), n);
  cache.rstd.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T mean = x.row(r).mean();
    const T var = (x.row(r).array() - mean).square().mean();
    const T rstd = T(1) / std::sqrt(var + T(kLayerNormEps));
    cache.rstd(r) = rstd;
    cache.xhat.row(r) = (x.row(r).array() - mean) * rstd;
  }
  Matrix<T> y = cache.xhat.array().rowwise() * gamma.value.row(0).array();
  y.rowwise() += beta.value.row(0);
  return y;
}

template <typename T>
Matrix<T> layer_norm_backward(const Matrix<T>& dy, Param<T>& gamma, Param<T>& beta, const LayerNormCache<T>& cache) {
  gamma.grad.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  beta.grad.row(0) += dy.colwise().sum();
  const Matrix<T> dxhat = dy.array().rowwise() * gamma.value.row(0).array();
  Matrix<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const T mean_d = dxhat.row(r).mean();
    const T mean_dx = (dxhat.row(r).array() * cache.xhat.row(r).array()).mean();
    dx.row(r) = cache.rstd(r) * (dxhat.row(r).array() - mean_d - cache.xhat.row(r).array() * mean_dx);
  }
  return dx;
}

template <typename T>
Matrix<T> linear(const Matrix<T>& x, const Param<T>& w, const Param<T>& b) {
  Matrix<T> y(x.rows(), w.value.cols());
  y.noalias() = x * w.value;
  y.rowwise() += b.value.row(0);
  return y;
}

/// Accumulates parameter grads and returns dx.
template <typename T>
Matrix<T> linear_backward(const Matrix<T>& x, const Matrix<T>& dy, Param<T>& w, Param<T>& b) {
  w.grad.noalias() += x.transpose() * dy;
  b.grad.row(0) += dy.colwise().sum();
  Matrix<T> dx(dy.rows(), w.value.rows());
  dx.noalias() = dy * w.value.transpose();
  return dx;
}

template <typename T>
void softmax_rows(Matrix<T>& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const T mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

/// Inverted-dropout scale mask (entries 0 or 1/(1-rate)); empty when inactive.
template <typename T>
Matrix<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng* rng) {
  if (rng == nullptr || rate <= 0.0) return {};
  Matrix<T> keep(rows, cols);
  const T scale = T(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < keep.size(); ++i) keep.data()[i] = rng->uniform() < rate ? T(0) : scale;
  return keep;
}

template <typename T>
void apply_mask(Matrix<T>& x, const Matrix<T>& keep) {
  if (keep.size() != 0) x.array() *= keep.array();
}

template <typename T>
struct LayerCache {
  Matrix<T> input, q, k, v;
  std::vector<Matrix<T>> probs;      // per head, pre-dropout
  std::vector<Matrix<T>> probs_keep; // per head dropout masks
  Matrix<T> context, attn_keep;
  LayerNormCache<T> ln1;
  Matrix<T> h1, ffn_pre, ffn_act, ffn_keep;
  LayerNormCache<T> ln2;
};

template <typename T>
struct EncoderCache {
  LayerNormCache<T> emb_ln;
  Matrix<T> emb_keep;
  std::vector<LayerCache<T>> layers;
};

template <typename T>
struct HeadCache {
  Matrix<T> gathered, pre_act, act, normed;
  LayerNormCache<T> ln;
};

}  // namespace detail

template <typename T>
class MaskedLM {
 public:
  MaskedLM(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    allocate();
    initialize(seed);
  }

  /// Builds a model around existing parameter values (used by checkpoint loading).
  MaskedLM(ModelConfig config, ModelParams<T> params) : config_(std::move(config)), params_(std::move(params)) {
    config_.validate();
    check_shapes();
  }

  const ModelConfig& config() const { return config_; }
  ModelParams<T>& params() { return params_; }
  const ModelParams<T>& params() const { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    params_.visit([&](const std::string&, const Param<T>& p) { n += static_cast<std::size_t>(p.value.size()); });
    return n;
  }

  void zero_grad() {
    params_.visit([](const std::string&, Param<T>& p) { p.grad.setZero(); });
  }

  /// Final hidden states, one row per input position. Dropout is off.
  Matrix<T> encode(std::span<const int> ids) const {
    detail::EncoderCache<T> cache;
    return run_encoder(ids, cache, nullptr);
  }

  /// Vocabulary logits at the given positions (one row per position).
  Matrix<T> logits(std::span<const int> ids, std::span<const std::size_t> positions) const {
    detail::EncoderCache<T> cache;
    const Matrix<T> hidden = run_encoder(ids, cache, nullptr);
    detail::HeadCache<T> head;
    return run_head(hidden, positions, head);
  }

  /// Logits for every position, shape (sequence length, vocab size).
  Matrix<T> logits(std::span<const int> ids) const {
    std::vector<std::size_t> all(ids.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return logits(ids, all);
  }

  /// Row-wise log-softmax of logits(ids, positions).
  Matrix<T> log_probs(std::span<const int> ids, std::span<const std::size_t> positions) const {
    Matrix<T> l = logits(ids, positions);
    for (Eigen::Index r = 0; r < l.rows(); ++r) {
      const T mx = l.row(r).maxCoeff();
      const T lse = mx + std::log((l.row(r).array() - mx).exp().sum());
      l.row(r).array() -= lse;
    }
    return l;
  }

  /// Sum of cross-entropy over labelled positions, dropout off.
  T loss(std::span<const int> ids, std::span<const MaskedPosition> labels) const {
    if (labels.empty()) return T(0);
    std::vector<std::size_t> positions;
    for (const auto& l : labels) positions.push_back(l.position);
    const Matrix<T> lp = log_probs(ids, positions);
    T total = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) total -= lp(static_cast<Eigen::Index>(i), labels[i].label);
    return total;
  }

  /// Forward and backward pass for one sequence. Gradients of
  /// `loss_scale * sum(cross-entropy)` are added to the parameter grads.
  /// Dropout is active when `dropout_rng` is non-null. Returns the unscaled
  /// summed cross-entropy.
  T accumulate_gradients(std::span<const int> ids, std::span<const MaskedPosition> labels, T loss_scale,
                         Rng* dropout_rng) {
    if (labels.empty()) return T(0);
    detail::EncoderCache<T> cache;
    const Matrix<T> hidden = run_encoder(ids, cache, dropout_rng);
    std::vector<std::size_t> positions;
    for (const auto& l : labels) positions.push_back(l.position);
    detail::HeadCache<T> head;
    Matrix<T> dlogits = run_head(hidden, positions, head);

    T total = 0;
    for (Eigen::Index r = 0; r < dlogits.rows(); ++r) {
      const T mx = dlogits.row(r).maxCoeff();
      dlogits.row(r) = (dlogits.row(r).array() - mx).exp();
      const T sum = dlogits.row(r).sum();
      const int label = labels[static_cast<std::size_t>(r)].label;
      total -= std::log(dlogits(r, label) / sum);
      dlogits.row(r) /= sum;
      dlogits(r, label) -= T(1);
    }
    dlogits *= loss_scale;

    const Matrix<T> dhead = head_backward(dlogits, head);
    Matrix<T> dhidden = Matrix<T>::Zero(hidden.rows(), hidden.cols());
    for (std::size_t i = 0; i < positions.size(); ++i)
      dhidden.row(static_cast<Eigen::Index>(positions[i])) += dhead.row(static_cast<Eigen::Index>(i));
    encoder_backward(ids, dhidden, cache);
    return total;
  }

 private:
  void allocate() {
    const auto H = static_cast<Eigen::Index>(config_.hidden_size);
    const auto F = static_cast<Eigen::Index>(config_.ffn_size);
    const auto V = static_cast<Eigen::Index>(config_.vocab_size);
    const auto L = static_cast<Eigen::Index>(config_.max_sequence_length);
    params_.token_embedding.resize(V, H);
    params_.position_embedding.resize(L, H);
    params_.emb_ln_g.resize(1, H);
    params_.emb_ln_b.resize(1, H);
    params_.layers.resize(config_.num_layers);
    for (auto& l : params_.layers) {
      for (Param<T>* w : {&l.q_w, &l.k_w, &l.v_w, &l.o_w}) w->resize(H, H);
      for (Param<T>* b : {&l.q_b, &l.k_b, &l.v_b, &l.o_b, &l.attn_ln_g, &l.attn_ln_b, &l.ffn_out_b, &l.ffn_ln_g,
                          &l.ffn_ln_b})
        b->resize(1, H);
      l.ffn_in_w.resize(H, F);
      l.ffn_in_b.resize(1, F);
      l.ffn_out_w.resize(F, H);
    }
    params_.head_w.resize(H, H);
    params_.head_b.resize(1, H);
    params_.head_ln_g.resize(1, H);
    params_.head_ln_b.resize(1, H);
    params_.output_bias.resize(1, V);
  }

  void check_shapes() const {
    MaskedLM<T> probe = shape_probe();
    std::vector<std::pair<Eigen::Index, Eigen::Index>> want, got;
    probe.params_.visit([&](const std::string&, const Param<T>& p) { want.emplace_back(p.value.rows(), p.value.cols()); });
    params_.visit([&](const std::string&, const Param<T>& p) { got.emplace_back(p.value.rows(), p.value.cols()); });
    if (want != got) throw std::invalid_argument("parameter shapes do not match the model config");
  }

  MaskedLM<T> shape_probe() const {
    MaskedLM<T> probe;
    probe.config_ = config_;
    probe.allocate();
    return probe;
  }

  MaskedLM() = default;

  // Weights ~ N(0, 0.02), biases 0, layer-norm gains 1.
  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    params_.visit([&](const std::string& name, Param<T>& p) {
      p.grad.setZero();
      if (name.ends_with(".gamma")) {
        p.value.setOnes();
      } else if (name.ends_with(".bias") || name.ends_with(".beta")) {
        p.value.setZero();
      } else {
        for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(0.02 * rng.normal());
      }
    });
  }

  Matrix<T> run_encoder(std::span<const int> ids, detail::EncoderCache<T>& cache, Rng* rng) const {
    using namespace detail;
    const auto n = static_cast<Eigen::Index>(ids.size());
    if (ids.empty()) throw std::invalid_argument("empty input sequence");
    if (ids.size() > config_.max_sequence_length)
      throw std::invalid_argument("sequence length " + std::to_string(ids.size()) + " exceeds maximum " +
                                  std::to_string(config_.max_sequence_length));
    const auto H = static_cast<Eigen::Index>(config_.hidden_size);
    Matrix<T> x(n, H);
    for (Eigen::Index t = 0; t < n; ++t) {
      const int id = ids[static_cast<std::size_t>(t)];
      if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size)
        throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
      x.row(t) = params_.token_embedding.value.row(id) + params_.position_embedding.value.row(t);
    }
    x = layer_norm(x, params_.emb_ln_g, params_.emb_ln_b, cache.emb_ln);
    cache.emb_keep = dropout_mask<T>(n, H, config_.dropout_rate, rng);
    apply_mask(x, cache.emb_keep);

    const auto heads = static_cast<Eigen::Index>(config_.num_heads);
    const auto d = static_cast<Eigen::Index>(config_.head_size());
    const T scale = T(1) / std::sqrt(static_cast<T>(d));
    cache.layers.resize(params_.layers.size());
    for (std::size_t li = 0; li < params_.layers.size(); ++li) {
      const auto& l = params_.layers[li];
      auto& c = cache.layers[li];
      c.input = x;
      c.q = linear(x, l.q_w, l.q_b);
      c.k = linear(x, l.k_w, l.k_b);
      c.v = linear(x, l.v_w, l.v_b);
      c.context.resize(n, H);
      c.probs.resize(static_cast<std::size_t>(heads));
      c.probs_keep.resize(static_cast<std::size_t>(heads));
      for (Eigen::Index h = 0; h < heads; ++h) {
        Matrix<T> s(n, n);
        s.noalias() = c.q.middleCols(h * d, d) * c.k.middleCols(h * d, d).transpose();
        s *= scale;
        softmax_rows(s);
        auto& keep = c.probs_keep[static_cast<std::size_t>(h)];
        keep = dropout_mask<T>(n, n, config_.attention_dropout_rate, rng);
        if (keep.size() != 0) {
          Matrix<T> dropped = s.array() * keep.array();
          c.context.middleCols(h * d, d).noalias() = dropped * c.v.middleCols(h * d, d);
        } else {
          c.context.middleCols(h * d, d).noalias() = s * c.v.middleCols(h * d, d);
        }
        c.probs[static_cast<std::size_t>(h)] = std::move(s);
      }
      Matrix<T> attn = linear(c.context, l.o_w, l.o_b);
      c.attn_keep = dropout_mask<T>(n, H, config_.dropout_rate, rng);
      apply_mask(attn, c.attn_keep);
      c.h1 = layer_norm(Matrix<T>(x + attn), l.attn_ln_g, l.attn_ln_b, c.ln1);

      c.ffn_pre = linear(c.h1, l.ffn_in_w, l.ffn_in_b);
      c.ffn_act = c.ffn_pre.unaryExpr([](T v) { return gelu(v); });
      Matrix<T> ffn = linear(c.ffn_act, l.ffn_out_w, l.ffn_out_b);
      c.ffn_keep = dropout_mask<T>(n, H, config_.dropout_rate, rng);
      apply_mask(ffn, c.ffn_keep);
      x = layer_norm(Matrix<T>(c.h1 + ffn), l.ffn_ln_g, l.ffn_ln_b, c.ln2);
    }
    return x;
  }

  void encoder_backward(std::span<const int> ids, Matrix<T> dx, detail::EncoderCache<T>& cache) {
    using namespace detail;
    const auto heads = static_cast<Eigen::Index>(config_.num_heads);
    const auto d = static_cast<Eigen::Index>(config_.head_size());
    const T scale = T(1) / std::sqrt(static_cast<T>(d));
    for (std::size_t li = params_.layers.size(); li-- > 0;) {
      auto& l = params_.layers[li];
      auto& c = cache.layers[li];
      // FFN block: x_out = LN2(h1 + drop(ffn(h1)))
      Matrix<T> dr2 = layer_norm_backward(dx, l.ffn_ln_g, l.ffn_ln_b, c.ln2);
      Matrix<T> dffn = dr2;
      apply_mask(dffn, c.ffn_keep);
      Matrix<T> dact = linear_backward(c.ffn_act, dffn, l.ffn_out_w, l.ffn_out_b);
      dact.array() *= c.ffn_pre.unaryExpr([](T v) { return gelu_grad(v); }).array();
      Matrix<T> dh1 = dr2 + linear_backward(c.h1, dact, l.ffn_in_w, l.ffn_in_b);

      // Attention block: h1 = LN1(x + drop(attn(x)))
      Matrix<T> dr1 = layer_norm_backward(dh1, l.attn_ln_g, l.attn_ln_b, c.ln1);
      Matrix<T> dattn = dr1;
      apply_mask(dattn, c.attn_keep);
      const Matrix<T> dcontext = linear_backward(c.context, dattn, l.o_w, l.o_b);
      const auto n = c.q.rows();
      Matrix<T> dq(n, c.q.cols()), dk(n, c.k.cols()), dv(n, c.v.cols());
      for (Eigen::Index h = 0; h < heads; ++h) {
        const auto& probs = c.probs[static_cast<std::size_t>(h)];
        const auto& keep = c.probs_keep[static_cast<std::size_t>(h)];
        const auto dctx_h = dcontext.middleCols(h * d, d);
        Matrix<T> dprobs(n, n);
        dprobs.noalias() = dctx_h * c.v.middleCols(h * d, d).transpose();
        if (keep.size() != 0) {
          Matrix<T> dropped = probs.array() * keep.array();
          dv.middleCols(h * d, d).noalias() = dropped.transpose() * dctx_h;
          dprobs.array() *= keep.array();
        } else {
          dv.middleCols(h * d, d).noalias() = probs.transpose() * dctx_h;
        }
        // softmax backward
        const ColVector<T> dot = (dprobs.array() * probs.array()).rowwise().sum();
        Matrix<T> dscores = probs.array() * (dprobs.colwise() - dot).array();
        dscores *= scale;
        dq.middleCols(h * d, d).noalias() = dscores * c.k.middleCols(h * d, d);
        dk.middleCols(h * d, d).noalias() = dscores.transpose() * c.q.middleCols(h * d, d);
      }
      dx = dr1;
      dx += linear_backward(c.input, dq, l.q_w, l.q_b);
      dx += linear_backward(c.input, dk, l.k_w, l.k_b);
      dx += linear_backward(c.input, dv, l.v_w, l.v_b);
    }
    apply_mask(dx, cache.emb_keep);
    const Matrix<T> demb = layer_norm_backward(dx, params_.emb_ln_g, params_.emb_ln_b, cache.emb_ln);
    for (Eigen::Index t = 0; t < demb.rows(); ++t) {
      params_.token_embedding.grad.row(ids[static_cast<std::size_t>(t)]) += demb.row(t);
      params_.position_embedding.grad.row(t) += demb.row(t);
    }
  }

  Matrix<T> run_head(const Matrix<T>& hidden, std::span<const std::size_t> positions,
                     detail::HeadCache<T>& cache) const {
    using namespace detail;
    cache.gathered.resize(static_cast<Eigen::Index>(positions.size()), hidden.cols());
    for (std::size_t i = 0; i < positions.size(); ++i) {
      if (positions[i] >= static_cast<std::size_t>(hidden.rows())) throw std::out_of_range("position out of range");
      cache.gathered.row(static_cast<Eigen::Index>(i)) = hidden.row(static_cast<Eigen::Index>(positions[i]));
    }
    cache.pre_act = linear(cache.gathered, params_.head_w, params_.head_b);
    cache.act = cache.pre_act.unaryExpr([](T v) { return gelu(v); });
    cache.normed = layer_norm(cache.act, params_.head_ln_g, params_.head_ln_b, cache.ln);
    Matrix<T> out(cache.normed.rows(), params_.token_embedding.value.rows());
    out.noalias() = cache.normed * params_.token_embedding.value.transpose();
    out.rowwise() += params_.output_bias.value.row(0);
    return out;
  }

  Matrix<T> head_backward(const Matrix<T>& dlogits, detail::HeadCache<T>& cache) {
    using namespace detail;
    params_.output_bias.grad.row(0) += dlogits.colwise().sum();
    params_.token_embedding.grad.noalias() += dlogits.transpose() * cache.normed;
    Matrix<T> dnormed(dlogits.rows(), cache.normed.cols());
    dnormed.noalias() = dlogits * params_.token_embedding.value;
    Matrix<T> dact = layer_norm_backward(dnormed, params_.head_ln_g, params_.head_ln_b, cache.ln);
    dact.array() *= cache.pre_act.unaryExpr([](T v) { return gelu_grad(v); }).array();
    return linear_backward(cache.gathered, dact, params_.head_w, params_.head_b);
  }

  ModelConfig config_;
  ModelParams<T> params_;
};

}  // namespace mmconcept::nn
