#pragma once

// Central-difference verification of the analytic MLP gradients. The check
// scalarizes the network through a fixed random linear functional of the
// outputs, computes analytic parameter gradients in one backward pass, then
// compares randomly probed coordinates against (L(p+h) - L(p-h)) / 2h.

#include <cstddef>
#include <vector>

#include "diffrx/neural.hpp"
#include "diffrx/numerics.hpp"

namespace diffrx {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t probes = 0;
};

namespace detail {

inline double functional(Mlp& model, const Tensor2& x,
                         const std::vector<int>& ts, const Tensor2& r) {
  Tensor2 out = model.forward(x, ts);
  double s = 0.0;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    s += r.data[i] * out.data[i];
  return s;
}

// ReLU has a kink at zero; central differences straddling it are invalid,
// so inputs are redrawn until every pre-activation sits clear of the kink.
inline Tensor2 draw_probe_input(Mlp& model, const std::vector<int>& ts,
                                std::size_t rows, RngStream& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Tensor2 x = sample_standard_normal(rng, rows, model.config().input_dim);
    if (model.config().activation != Activation::kRelu) return x;
    Mlp::Cache cache;
    model.forward(x, ts, cache);
    double closest = 1e300;
    for (const Tensor2& z : cache.affine)
      for (double v : z.data) closest = std::min(closest, std::abs(v));
    if (closest > 1e-3) return x;
  }
  throw std::runtime_error("draw_probe_input: no kink-free input found");
}

}  // namespace detail

inline GradCheckResult gradient_check(Mlp& model, std::size_t batch_rows,
                                      RngStream& rng,
                                      std::size_t probes = 120,
                                      double h = 1e-5) {
  std::vector<int> ts;
  if (model.conditioned()) {
    ts.resize(batch_rows);
    for (std::size_t r = 0; r < batch_rows; ++r)
      ts[r] = 1 + static_cast<int>(rng.next_below(model.config().time_steps));
  }
  Tensor2 x = detail::draw_probe_input(model, ts, batch_rows, rng);
  Tensor2 r =
      sample_standard_normal(rng, batch_rows, model.config().input_dim);

  Mlp::Cache cache;
  model.forward(x, ts, cache);
  Mlp::Gradients analytic = model.backward(ts, cache, r);

  std::vector<Tensor2*> grads;
  for (Tensor2& g : analytic.weights) grads.push_back(&g);
  for (Tensor2& g : analytic.biases) grads.push_back(&g);
  for (Tensor2& g : analytic.embeddings) grads.push_back(&g);
  std::vector<Tensor2*> values;
  std::size_t total = 0;
  for (const Mlp::ParamRef& p : model.params()) total += p.value->data.size();
  {
    // params() lists weights then biases per layer; re-order to match grads.
    auto refs = model.params();
    std::vector<Tensor2*> ws, bs, es;
    for (auto& p : refs) {
      if (p.name[0] == 'w') ws.push_back(p.value);
      else if (p.name[0] == 'b') bs.push_back(p.value);
      else es.push_back(p.value);
    }
    for (auto* v : ws) values.push_back(v);
    for (auto* v : bs) values.push_back(v);
    for (auto* v : es) values.push_back(v);
  }

  GradCheckResult res;
  res.probes = probes;
  for (std::size_t k = 0; k < probes; ++k) {
    std::size_t flat = rng.next_below(total);
    std::size_t ti = 0;
    while (flat >= values[ti]->data.size()) flat -= values[ti++]->data.size();
    double& coord = values[ti]->data[flat];
    const double saved = coord;
    coord = saved + h;
    const double up = detail::functional(model, x, ts, r);
    coord = saved - h;
    const double down = detail::functional(model, x, ts, r);
    coord = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double exact = grads[ti]->data[flat];
    const double denom = std::max(std::abs(numeric), std::abs(exact));
    const double rel =
        denom < 1e-10 ? std::abs(numeric - exact) : std::abs(numeric - exact) / denom;
    res.max_rel_err = std::max(res.max_rel_err, rel);
  }
  return res;
}

}  // namespace diffrx
