#pragma once

// Denoising diffusion for 2-d samples. A linear variance schedule defines
// the forward corruption chain
//   x_t = sqrt(1 - beta_t) x_{t-1} + sqrt(beta_t) eps,
// trained by regressing the injected noise with an MSE objective and
// inverted by ancestral sampling. Timesteps are 1-based: t runs over
// [1, T], and cumulative products use the convention alpha_bar(0) = 1.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffrx/neural.hpp"
#include "diffrx/numerics.hpp"

namespace diffrx {

struct NoiseSchedule {
  std::vector<double> beta;       // beta[t-1] is the step-t variance
  std::vector<double> alpha;      // 1 - beta
  std::vector<double> alpha_bar;  // running product of alpha

  std::size_t timesteps() const { return beta.size(); }
  double beta_at(int t) const { return beta[check(t)]; }
  double alpha_at(int t) const { return alpha[check(t)]; }
  // Defined for t in [0, T] with alpha_bar_at(0) == 1.
  double alpha_bar_at(int t) const {
    if (t == 0) return 1.0;
    return alpha_bar[check(t)];
  }

 private:
  std::size_t check(int t) const {
    if (t < 1 || static_cast<std::size_t>(t) > beta.size())
      throw std::out_of_range("NoiseSchedule: t outside [1, T]");
    return static_cast<std::size_t>(t - 1);
  }
};

inline NoiseSchedule make_schedule(std::size_t timesteps, double beta_start,
                                   double beta_end) {
  if (timesteps < 1)
    throw std::invalid_argument("make_schedule: timesteps must be positive");
  if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end)
    throw std::invalid_argument(
        "make_schedule: need 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.beta.resize(timesteps);
  s.alpha.resize(timesteps);
  s.alpha_bar.resize(timesteps);
  double prod = 1.0;
  for (std::size_t i = 0; i < timesteps; ++i) {
    const double frac =
        timesteps == 1 ? 0.0
                       : static_cast<double>(i) /
                             static_cast<double>(timesteps - 1);
    s.beta[i] = beta_start + (beta_end - beta_start) * frac;
    s.alpha[i] = 1.0 - s.beta[i];
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
  }
  return s;
}

// One forward diffusion step given the injected noise.
inline Tensor2 forward_step(const Tensor2& x_prev, int t,
                            const NoiseSchedule& sched, const Tensor2& eps) {
  if (eps.rows != x_prev.rows || eps.cols != x_prev.cols)
    throw std::invalid_argument("forward_step: noise shape mismatch");
  const double a = std::sqrt(1.0 - sched.beta_at(t));
  const double b = std::sqrt(sched.beta_at(t));
  Tensor2 out(x_prev.rows, x_prev.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = a * x_prev.data[i] + b * eps.data[i];
  return out;
}

// Closed-form jump from x_0 straight to step t.
inline Tensor2 forward_jump(const Tensor2& x0, int t,
                            const NoiseSchedule& sched, const Tensor2& eps) {
  if (eps.rows != x0.rows || eps.cols != x0.cols)
    throw std::invalid_argument("forward_jump: noise shape mismatch");
  const double ab = sched.alpha_bar_at(t);
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  Tensor2 out(x0.rows, x0.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = a * x0.data[i] + b * eps.data[i];
  return out;
}

struct PosteriorStats {
  Tensor2 mean;
  double variance;
};

// Mean and variance of q(x_{t-1} | x_t, x_0).
inline PosteriorStats posterior(const Tensor2& x_t, const Tensor2& x0, int t,
                                const NoiseSchedule& sched) {
  if (x_t.rows != x0.rows || x_t.cols != x0.cols)
    throw std::invalid_argument("posterior: shape mismatch");
  const double at = sched.alpha_at(t);
  const double bt = sched.beta_at(t);
  const double ab_t = sched.alpha_bar_at(t);
  const double ab_prev = sched.alpha_bar_at(t - 1);
  const double denom = 1.0 - ab_t;
  const double c_t = std::sqrt(at) * (1.0 - ab_prev) / denom;
  const double c_0 = std::sqrt(ab_prev) * bt / denom;
  PosteriorStats out{Tensor2(x_t.rows, x_t.cols),
                     (1.0 - ab_prev) * bt / denom};
  for (std::size_t i = 0; i < out.mean.data.size(); ++i)
    out.mean.data[i] = c_t * x_t.data[i] + c_0 * x0.data[i];
  return out;
}

// Inverts the closed-form jump given a noise estimate.
inline Tensor2 predict_x0(const Tensor2& x_t, int t, const Tensor2& eps_hat,
                          const NoiseSchedule& sched) {
  if (eps_hat.rows != x_t.rows || eps_hat.cols != x_t.cols)
    throw std::invalid_argument("predict_x0: shape mismatch");
  const double ab = sched.alpha_bar_at(t);
  const double inv_a = 1.0 / std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  Tensor2 out(x_t.rows, x_t.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = inv_a * (x_t.data[i] - b * eps_hat.data[i]);
  return out;
}

// One optimizer update on a clean batch: per row draw t uniform on [1, T]
// and eps standard normal, corrupt with the closed-form jump, and take the
// MSE between eps and the model's estimate, averaged over the batch.
// Returns the loss at the evaluated point.
inline double training_step(Mlp& model, AdamOptimizer& opt,
                            const Tensor2& x0_batch,
                            const NoiseSchedule& sched, RngStream& rng) {
  const std::size_t n = x0_batch.rows;
  const std::size_t T = sched.timesteps();
  std::vector<int> ts(n);
  for (std::size_t r = 0; r < n; ++r)
    ts[r] = 1 + static_cast<int>(rng.next_below(T));
  Tensor2 eps = sample_standard_normal(rng, n, x0_batch.cols);

  Tensor2 x_t(n, x0_batch.cols);
  for (std::size_t r = 0; r < n; ++r) {
    const double ab = sched.alpha_bar_at(ts[r]);
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    for (std::size_t c = 0; c < x0_batch.cols; ++c)
      x_t(r, c) = a * x0_batch(r, c) + b * eps(r, c);
  }

  Mlp::Cache cache;
  Tensor2 eps_hat = model.forward(x_t, ts, cache);

  double loss = 0.0;
  Tensor2 upstream(n, x0_batch.cols);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < eps_hat.data.size(); ++i) {
    const double d = eps_hat.data[i] - eps.data[i];
    loss += d * d;
    upstream.data[i] = 2.0 * d * inv_n;
  }
  loss *= inv_n;

  opt.step(model, model.backward(ts, cache, upstream));
  return loss;
}

struct TrainOptions {
  std::size_t epochs = 2000;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  // Save a parameter copy every this many epochs (0 disables snapshots).
  std::size_t snapshot_every = 400;
};

struct EpochSnapshot {
  std::size_t epoch;
  Mlp model;
};

struct TrainResult {
  Mlp model;
  std::vector<EpochSnapshot> snapshots;
  std::vector<double> epoch_loss;
};

// Epoch = one pass of dataset-size/batch-size optimizer steps over randomly
// drawn batches (with replacement). The reported per-epoch loss is the mean
// over its steps. Throws TrainingDiverged when the loss or any parameter
// stops being finite.
inline TrainResult train(Mlp model, const Tensor2& dataset,
                         const NoiseSchedule& sched, const TrainOptions& opt,
                         RngStream& rng) {
  if (dataset.rows == 0)
    throw std::invalid_argument("train: empty dataset");
  if (opt.batch_size < 1 || opt.epochs < 1)
    throw std::invalid_argument("train: epochs and batch size must be positive");

  AdamConfig acfg;
  acfg.learning_rate = opt.learning_rate;
  AdamOptimizer adam(model, acfg);
  const std::size_t steps_per_epoch =
      std::max<std::size_t>(1, dataset.rows / opt.batch_size);

  TrainResult result;
  result.epoch_loss.reserve(opt.epochs);
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    double sum = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      Tensor2 batch(opt.batch_size, dataset.cols);
      for (std::size_t r = 0; r < opt.batch_size; ++r) {
        const std::size_t src = rng.next_below(dataset.rows);
        for (std::size_t c = 0; c < dataset.cols; ++c)
          batch(r, c) = dataset(src, c);
      }
      sum += training_step(model, adam, batch, sched, rng);
    }
    const double loss = sum / static_cast<double>(steps_per_epoch);
    if (!std::isfinite(loss) || !model.parameters_finite())
      throw TrainingDiverged(epoch);
    result.epoch_loss.push_back(loss);
    if (opt.snapshot_every > 0 && epoch % opt.snapshot_every == 0)
      result.snapshots.push_back({epoch, model});
  }
  result.model = std::move(model);
  return result;
}

struct SamplingDiverged : std::runtime_error {
  explicit SamplingDiverged(int t)
      : std::runtime_error("sampling diverged at step " + std::to_string(t)),
        step(t) {}
  int step;
};

enum class SamplerNoise {
  kStepBeta,       // inject sqrt(1 - alpha_t) z
  kPosteriorBeta,  // inject sqrt(beta_tilde_t) z
};

struct SampleOptions {
  // First reverse step; 0 means start from the full horizon T.
  int t_start = 0;
  SamplerNoise noise = SamplerNoise::kStepBeta;
};

namespace detail {

inline Tensor2 reverse_step(const Mlp& model, const Tensor2& x, int t,
                            const NoiseSchedule& sched, RngStream& rng,
                            SamplerNoise noise_kind) {
  const std::vector<int> ts(x.rows, t);
  Tensor2 eps_hat = model.forward(x, ts);
  const double at = sched.alpha_at(t);
  const double coef = (1.0 - at) / std::sqrt(1.0 - sched.alpha_bar_at(t));
  const double inv_sqrt_a = 1.0 / std::sqrt(at);
  Tensor2 out(x.rows, x.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = inv_sqrt_a * (x.data[i] - coef * eps_hat.data[i]);
  if (t > 1) {
    double sigma;
    if (noise_kind == SamplerNoise::kStepBeta) {
      sigma = std::sqrt(1.0 - at);
    } else {
      const double ab_t = sched.alpha_bar_at(t);
      const double ab_prev = sched.alpha_bar_at(t - 1);
      sigma = std::sqrt((1.0 - ab_prev) * sched.beta_at(t) / (1.0 - ab_t));
    }
    Tensor2 z = sample_standard_normal(rng, x.rows, x.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data[i] += sigma * z.data[i];
  }
  if (!all_finite(out)) throw SamplingDiverged(t);
  return out;
}

}  // namespace detail

// Ancestral sampling from x_{t_start} down to x_0. The caller provides the
// starting tensor, which is a fresh normal draw for generation and the
// stacked received signal when the chain acts as a receiver.
inline Tensor2 sample(const Mlp& model, const Tensor2& x_start,
                      const NoiseSchedule& sched, RngStream& rng,
                      const SampleOptions& opt = {}) {
  const int T = static_cast<int>(sched.timesteps());
  const int t0 = opt.t_start == 0 ? T : opt.t_start;
  if (t0 < 1 || t0 > T)
    throw std::out_of_range("sample: t_start outside [1, T]");
  Tensor2 x = x_start;
  for (int t = t0; t >= 1; --t)
    x = detail::reverse_step(model, x, t, sched, rng, opt.noise);
  return x;
}

// Same chain, but stops at each requested step and records the state x_t
// reached there. `record_at` must be sorted descending; values above
// t_start record the starting tensor. Recording t = 0 yields the final
// output.
inline std::vector<std::pair<int, Tensor2>> sample_trajectory(
    const Mlp& model, const Tensor2& x_start, const NoiseSchedule& sched,
    RngStream& rng, const std::vector<int>& record_at,
    const SampleOptions& opt = {}) {
  const int T = static_cast<int>(sched.timesteps());
  const int t0 = opt.t_start == 0 ? T : opt.t_start;
  if (t0 < 1 || t0 > T)
    throw std::out_of_range("sample_trajectory: t_start outside [1, T]");
  for (std::size_t i = 1; i < record_at.size(); ++i)
    if (record_at[i] >= record_at[i - 1])
      throw std::invalid_argument(
          "sample_trajectory: record_at must be strictly descending");

  std::vector<std::pair<int, Tensor2>> out;
  std::size_t next = 0;
  Tensor2 x = x_start;
  while (next < record_at.size() && record_at[next] >= t0)
    out.emplace_back(record_at[next++], x);
  for (int t = t0; t >= 1; --t) {
    if (next >= record_at.size()) break;
    x = detail::reverse_step(model, x, t, sched, rng, opt.noise);
    while (next < record_at.size() && record_at[next] == t - 1)
      out.emplace_back(record_at[next++], x);
  }
  return out;
}

}  // namespace diffrx
