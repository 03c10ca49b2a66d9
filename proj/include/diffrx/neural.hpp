#pragma once

// Small dense MLP with optional per-layer time conditioning, written with
// explicit forward caches and hand-derived reverse-mode gradients. The same
// class covers the softplus denoiser (time-conditioned) and the ReLU
// regression benchmark (unconditioned); the Adam optimizer below works on
// either.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffrx/numerics.hpp"

namespace diffrx {

enum class Activation { kSoftplus, kRelu };

// Numerically stable softplus and its derivative.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
inline double logistic(double x) {
  return x > 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

struct MlpConfig {
  std::size_t input_dim = 2;
  std::size_t hidden_dim = 128;
  std::size_t hidden_layers = 3;
  // Number of conditioning steps T; 0 disables time conditioning entirely.
  std::size_t time_steps = 0;
  Activation activation = Activation::kSoftplus;
  // Default applies the embedding to the pre-activation,
  //   h = act(affine ⊙ E[t]);
  // setting this scales after the activation instead, h = act(affine) ⊙ E[t].
  bool embed_after_activation = false;
};

class Mlp {
 public:
  struct Gradients {
    std::vector<Tensor2> weights;
    std::vector<Tensor2> biases;
    std::vector<Tensor2> embeddings;
  };

  struct Cache {
    std::vector<Tensor2> inputs;  // inputs[l] feeds layer l; inputs[0] = x
    std::vector<Tensor2> affine;  // pre-embedding affine output per hidden layer
    std::vector<Tensor2> hidden;  // post-activation output per hidden layer
  };

  Mlp() = default;

  Mlp(const MlpConfig& cfg, RngStream& rng) : cfg_(cfg) {
    if (cfg.input_dim < 1 || cfg.hidden_dim < 1 || cfg.hidden_layers < 1)
      throw std::invalid_argument("Mlp: dimensions must be positive");
    std::size_t in = cfg.input_dim;
    for (std::size_t l = 0; l < cfg.hidden_layers; ++l) {
      weights_.push_back(init_weight(in, cfg.hidden_dim, rng));
      biases_.emplace_back(1, cfg.hidden_dim, 0.0);
      if (conditioned())
        embeddings_.emplace_back(cfg.time_steps, cfg.hidden_dim, 1.0);
      in = cfg.hidden_dim;
    }
    weights_.push_back(init_weight(in, cfg.input_dim, rng));
    biases_.emplace_back(1, cfg.input_dim, 0.0);
  }

  const MlpConfig& config() const { return cfg_; }
  bool conditioned() const { return cfg_.time_steps > 0; }

  Tensor2 forward(const Tensor2& x, const std::vector<int>& ts) const {
    Cache cache;
    return forward(x, ts, cache);
  }

  Tensor2 forward(const Tensor2& x, const std::vector<int>& ts,
                  Cache& cache) const {
    check_inputs(x, ts);
    cache.inputs.clear();
    cache.affine.clear();
    cache.hidden.clear();
    cache.inputs.push_back(x);
    Tensor2 h = x;
    for (std::size_t l = 0; l < cfg_.hidden_layers; ++l) {
      Tensor2 z = affine(h, weights_[l], biases_[l]);
      cache.affine.push_back(z);
      h = activate(z, l, ts);
      cache.hidden.push_back(h);
      cache.inputs.push_back(h);
    }
    return affine(h, weights_.back(), biases_.back());
  }

  // Exact reverse-mode gradients of the cached forward pass with respect to
  // every weight, bias and referenced embedding row. `upstream` is
  // dLoss/dOutput.
  Gradients backward(const std::vector<int>& ts, const Cache& cache,
                     const Tensor2& upstream) const {
    Gradients g = zero_gradients();
    const std::size_t L = cfg_.hidden_layers;

    // Output layer.
    g.weights[L] = matmul_tn(cache.inputs[L], upstream);
    g.biases[L] = column_sums(upstream);
    Tensor2 grad_h = matmul_nt(upstream, weights_[L]);

    for (std::size_t l = L; l-- > 0;) {
      const Tensor2& z = cache.affine[l];
      Tensor2 grad_z(z.rows, z.cols);
      for (std::size_t r = 0; r < z.rows; ++r) {
        const double* erow =
            conditioned() ? embeddings_[l].row_ptr(ts[r] - 1) : nullptr;
        for (std::size_t c = 0; c < z.cols; ++c) {
          const double zv = z(r, c);
          const double gh = grad_h(r, c);
          if (!conditioned()) {
            grad_z(r, c) = gh * act_deriv(zv);
            continue;
          }
          const double e = erow[c];
          if (!cfg_.embed_after_activation) {
            // h = act(z * e): dz = gh * act'(z e) * e, dE = gh * act'(z e) * z
            const double d = act_deriv(zv * e);
            grad_z(r, c) = gh * d * e;
            g.embeddings[l](ts[r] - 1, c) += gh * d * zv;
          } else {
            // h = act(z) * e: dz = gh * e * act'(z), dE = gh * act(z)
            grad_z(r, c) = gh * e * act_deriv(zv);
            g.embeddings[l](ts[r] - 1, c) += gh * act_value(zv);
          }
        }
      }
      g.weights[l] = matmul_tn(cache.inputs[l], grad_z);
      g.biases[l] = column_sums(grad_z);
      if (l > 0) grad_h = matmul_nt(grad_z, weights_[l]);
    }
    return g;
  }

  Gradients zero_gradients() const {
    Gradients g;
    for (const Tensor2& w : weights_) g.weights.emplace_back(w.rows, w.cols);
    for (const Tensor2& b : biases_) g.biases.emplace_back(b.rows, b.cols);
    for (const Tensor2& e : embeddings_)
      g.embeddings.emplace_back(e.rows, e.cols);
    return g;
  }

  struct ParamRef {
    std::string name;
    Tensor2* value;
  };

  std::vector<ParamRef> params() {
    std::vector<ParamRef> refs;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      refs.push_back({"w" + std::to_string(l), &weights_[l]});
      refs.push_back({"b" + std::to_string(l), &biases_[l]});
    }
    for (std::size_t l = 0; l < embeddings_.size(); ++l)
      refs.push_back({"e" + std::to_string(l), &embeddings_[l]});
    return refs;
  }

  bool parameters_finite() const {
    for (const Tensor2& w : weights_)
      if (!all_finite(w)) return false;
    for (const Tensor2& b : biases_)
      if (!all_finite(b)) return false;
    for (const Tensor2& e : embeddings_)
      if (!all_finite(e)) return false;
    return true;
  }

  // Direct access used by tests and snapshot IO.
  Tensor2& weight(std::size_t l) { return weights_[l]; }
  Tensor2& bias(std::size_t l) { return biases_[l]; }
  Tensor2& embedding(std::size_t l) { return embeddings_[l]; }
  const Tensor2& weight(std::size_t l) const { return weights_[l]; }
  const Tensor2& bias(std::size_t l) const { return biases_[l]; }
  const Tensor2& embedding(std::size_t l) const { return embeddings_[l]; }

 private:
  static Tensor2 init_weight(std::size_t fan_in, std::size_t fan_out,
                             RngStream& rng) {
    Tensor2 w = sample_standard_normal(rng, fan_in, fan_out);
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : w.data) v *= s;
    return w;
  }

  static Tensor2 affine(const Tensor2& x, const Tensor2& w, const Tensor2& b) {
    Tensor2 out = matmul(x, w);
    for (std::size_t r = 0; r < out.rows; ++r)
      for (std::size_t c = 0; c < out.cols; ++c) out(r, c) += b(0, c);
    return out;
  }

  static Tensor2 column_sums(const Tensor2& t) {
    Tensor2 out(1, t.cols, 0.0);
    for (std::size_t r = 0; r < t.rows; ++r)
      for (std::size_t c = 0; c < t.cols; ++c) out(0, c) += t(r, c);
    return out;
  }

  double act_value(double x) const {
    return cfg_.activation == Activation::kSoftplus ? softplus(x)
                                                    : (x > 0.0 ? x : 0.0);
  }
  double act_deriv(double x) const {
    return cfg_.activation == Activation::kSoftplus ? logistic(x)
                                                    : (x > 0.0 ? 1.0 : 0.0);
  }

  Tensor2 activate(const Tensor2& z, std::size_t layer,
                   const std::vector<int>& ts) const {
    Tensor2 out(z.rows, z.cols);
    for (std::size_t r = 0; r < z.rows; ++r) {
      const double* erow =
          conditioned() ? embeddings_[layer].row_ptr(ts[r] - 1) : nullptr;
      for (std::size_t c = 0; c < z.cols; ++c) {
        const double zv = z(r, c);
        if (!conditioned())
          out(r, c) = act_value(zv);
        else if (!cfg_.embed_after_activation)
          out(r, c) = act_value(zv * erow[c]);
        else
          out(r, c) = act_value(zv) * erow[c];
      }
    }
    return out;
  }

  void check_inputs(const Tensor2& x, const std::vector<int>& ts) const {
    if (x.cols != cfg_.input_dim)
      throw std::invalid_argument("Mlp::forward: input width mismatch");
    if (conditioned()) {
      if (ts.size() != x.rows)
        throw std::invalid_argument("Mlp::forward: one t per row required");
      for (int t : ts)
        if (t < 1 || static_cast<std::size_t>(t) > cfg_.time_steps)
          throw std::out_of_range("Mlp::forward: t outside [1, T]");
    }
  }

  MlpConfig cfg_;
  std::vector<Tensor2> weights_;
  std::vector<Tensor2> biases_;
  std::vector<Tensor2> embeddings_;
};

struct TrainingDiverged : std::runtime_error {
  explicit TrainingDiverged(std::size_t step)
      : std::runtime_error("training diverged at step " +
                           std::to_string(step)),
        step(step) {}
  std::size_t step;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer(const Mlp& model, const AdamConfig& cfg)
      : cfg_(cfg), m_(model.zero_gradients()), v_(model.zero_gradients()) {}

  long steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

  void step(Mlp& model, const Mlp::Gradients& g) {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
      update(model.weight(l), g.weights[l], m_.weights[l], v_.weights[l], bc1,
             bc2);
      update(model.bias(l), g.biases[l], m_.biases[l], v_.biases[l], bc1, bc2);
    }
    for (std::size_t l = 0; l < g.embeddings.size(); ++l)
      update(model.embedding(l), g.embeddings[l], m_.embeddings[l],
             v_.embeddings[l], bc1, bc2);
  }

 private:
  void update(Tensor2& p, const Tensor2& g, Tensor2& m, Tensor2& v, double bc1,
              double bc2) {
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double gi = g.data[i];
      m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * gi;
      v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      p.data[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }

  AdamConfig cfg_;
  long step_ = 0;
  Mlp::Gradients m_;
  Mlp::Gradients v_;
};

}  // namespace diffrx
