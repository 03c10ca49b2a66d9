#pragma once

// Experiment harness. A link run pushes one batch of analogue source values
// through quantizer, QAM mapper and impaired channel, hands the stacked
// received symbols to the receivers, and scores mean squared error twice:
// against the clean scaled symbols and, after demapping, against the
// analogue source. Sweeps fan that out over SNR or impairment grids with
// one derived random lane per grid point, so reruns with the same seed are
// bit-identical and both receivers always see the same draw.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffrx/baseline.hpp"
#include "diffrx/channel.hpp"
#include "diffrx/data.hpp"
#include "diffrx/ddpm.hpp"
#include "diffrx/io.hpp"
#include "diffrx/modem.hpp"
#include "diffrx/neural.hpp"
#include "diffrx/numerics.hpp"

namespace diffrx {

struct MissingModel : std::runtime_error {
  explicit MissingModel(const std::string& what) : std::runtime_error(what) {}
};

inline double to_db(double linear) { return 10.0 * std::log10(linear); }

struct MseResult {
  double linear = 0.0;
  double db = 0.0;
};

inline MseResult mse(const std::vector<double>& truth,
                     const std::vector<double>& estimate) {
  if (truth.size() != estimate.size() || truth.empty())
    throw std::invalid_argument("mse: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = estimate[i] - truth[i];
    sum += d * d;
  }
  const double lin = sum / static_cast<double>(truth.size());
  return {lin, to_db(lin)};
}

inline MseResult mse_rows(const Tensor2& truth, const Tensor2& estimate) {
  if (truth.rows != estimate.rows || truth.cols != estimate.cols)
    throw std::invalid_argument("mse_rows: shape mismatch");
  return mse(truth.data, estimate.data);
}

// The denoiser behind the generative receiver is trained on the prior of
// the clean channel input sqrt(p) s, one row per constellation point; the
// channel itself never enters training.
inline TrainResult train_link_denoiser(const QamSpec& qam, double power,
                                       const MlpConfig& model_cfg,
                                       const NoiseSchedule& sched,
                                       const TrainOptions& opt,
                                       RngStream& rng) {
  const ComplexBatch points = constellation(qam);
  Tensor2 prior(points.size(), 2);
  const double sqrt_p = std::sqrt(power);
  for (std::size_t k = 0; k < points.size(); ++k) {
    prior(k, 0) = sqrt_p * points[k].real();
    prior(k, 1) = sqrt_p * points[k].imag();
  }
  RngStream init_rng = rng.derive(1);
  RngStream train_rng = rng.derive(2);
  Mlp model(model_cfg, init_rng);
  return train(std::move(model), prior, sched, opt, train_rng);
}

struct LinkPoint {
  unsigned order = 64;
  double snr_db = 0.0;
  ChannelConfig channel;  // noise_variance is derived from snr_db
  std::size_t symbols = 2000;
  SourceKind source = SourceKind::kUniform;
  SampleOptions sampling;
  std::size_t sample_runs = 10;
};

struct ReceiverScore {
  MseResult source;  // analogue values after demap and dequantize
  MseResult symbol;  // clean scaled symbols sqrt(p) s
};

struct LinkResult {
  ReceiverScore ddpm;
  ReceiverScore baseline;
  bool has_baseline = false;
};

namespace detail {

inline ReceiverScore score_estimate(const Tensor2& estimate_rows,
                                    const Tensor2& symbol_rows,
                                    const std::vector<double>& source_values,
                                    const QamSpec& qam, const Quantizer& quant,
                                    double power) {
  ReceiverScore score;
  score.symbol = mse_rows(symbol_rows, estimate_rows);
  ComplexBatch est = from_symbol_rows(estimate_rows);
  const double inv_sqrt_p = 1.0 / std::sqrt(power);
  for (auto& v : est) v *= inv_sqrt_p;
  const std::vector<double> decoded =
      dequantize(qam_demodulate(est, qam), quant);
  score.source = mse(source_values, decoded);
  return score;
}

}  // namespace detail

// One operating point with paired draws: both receivers see the identical
// received batch. The generative receiver is averaged over sample_runs
// independent chains (linear MSE mean, dB of that mean).
inline LinkResult run_link_once(const LinkPoint& pt, const Mlp& denoiser,
                                const NoiseSchedule& sched,
                                const Mlp* baseline, RngStream& rng) {
  const QamSpec qam = make_qam(pt.order);
  const Quantizer quant = make_quantizer(qam.bits_per_axis);

  RngStream src_rng = rng.derive(1);
  RngStream chan_rng = rng.derive(2);
  RngStream samp_rng = rng.derive(3);

  const std::vector<double> values =
      source_batch(pt.source, 2 * pt.symbols, src_rng);
  const ComplexBatch symbols = qam_modulate(quantize(values, quant), qam);

  ChannelConfig chan = pt.channel;
  chan.noise_variance = noise_variance_for_snr(chan.power, pt.snr_db);
  const ComplexBatch h = draw_fading(chan, symbols.size(), chan_rng);
  const ChannelDraw draw = transmit(symbols, chan, h, chan_rng);
  const Tensor2 received = to_symbol_rows(draw.received);

  Tensor2 clean(symbols.size(), 2);
  const double sqrt_p = std::sqrt(chan.power);
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    clean(k, 0) = sqrt_p * symbols[k].real();
    clean(k, 1) = sqrt_p * symbols[k].imag();
  }

  LinkResult out;
  if (pt.sample_runs < 1)
    throw std::invalid_argument("run_link_once: sample_runs must be positive");
  double src_lin = 0.0, sym_lin = 0.0;
  for (std::size_t run = 0; run < pt.sample_runs; ++run) {
    RngStream run_rng = samp_rng.derive(run);
    const Tensor2 est = sample(denoiser, received, sched, run_rng, pt.sampling);
    const ReceiverScore s =
        detail::score_estimate(est, clean, values, qam, quant, chan.power);
    src_lin += s.source.linear;
    sym_lin += s.symbol.linear;
  }
  src_lin /= static_cast<double>(pt.sample_runs);
  sym_lin /= static_cast<double>(pt.sample_runs);
  out.ddpm.source = {src_lin, to_db(src_lin)};
  out.ddpm.symbol = {sym_lin, to_db(sym_lin)};

  if (baseline) {
    const Tensor2 est = baseline_infer(*baseline, received);
    out.baseline =
        detail::score_estimate(est, clean, values, qam, quant, chan.power);
    out.has_baseline = true;
  }
  return out;
}

inline std::vector<double> default_snr_grid() {
  std::vector<double> grid;
  for (double v = -10.0; v <= 20.0 + 1e-9; v += 2.5) grid.push_back(v);
  return grid;
}

struct SnrSweepConfig {
  std::vector<unsigned> orders{16, 64, 256};
  std::vector<double> snr_db = default_snr_grid();
  ChannelConfig channel;  // noise_variance is derived per grid point
  std::size_t symbols = 2000;
  std::size_t sample_runs = 10;
  SourceKind source = SourceKind::kUniform;
  SampleOptions sampling;
  bool with_baseline = true;
  BaselineConfig baseline;  // order and snr_db are overwritten per point
};

struct SweepRow {
  unsigned order = 0;
  double snr_db = 0.0;
  std::string receiver;
  ReceiverScore score;
  std::size_t runs = 1;
};

// Grid points get lanes derived from (order index, SNR index), never from
// sequential stream position, so partial grids and full grids agree.
inline std::vector<SweepRow> snr_sweep(const SnrSweepConfig& cfg,
                                       const std::map<unsigned, Mlp>& denoisers,
                                       const NoiseSchedule& sched,
                                       RngStream& rng) {
  std::vector<SweepRow> rows;
  for (std::size_t oi = 0; oi < cfg.orders.size(); ++oi) {
    const unsigned order = cfg.orders[oi];
    const auto it = denoisers.find(order);
    if (it == denoisers.end())
      throw MissingModel("snr_sweep: no denoiser for order " +
                         std::to_string(order));
    for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
      RngStream point_rng = rng.derive(1000 * (oi + 1) + si);

      LinkPoint pt;
      pt.order = order;
      pt.snr_db = cfg.snr_db[si];
      pt.channel = cfg.channel;
      pt.symbols = cfg.symbols;
      pt.source = cfg.source;
      pt.sampling = cfg.sampling;
      pt.sample_runs = cfg.sample_runs;

      Mlp trained_baseline;
      const Mlp* baseline = nullptr;
      if (cfg.with_baseline) {
        BaselineConfig bc = cfg.baseline;
        bc.order = order;
        bc.snr_db = cfg.snr_db[si];
        bc.channel = cfg.channel;
        RngStream bl_rng = point_rng.derive(4);
        trained_baseline = train_baseline(bc, bl_rng).model;
        baseline = &trained_baseline;
      }

      const LinkResult res =
          run_link_once(pt, it->second, sched, baseline, point_rng);
      rows.push_back(
          {order, pt.snr_db, "ddpm", res.ddpm, pt.sample_runs});
      if (res.has_baseline)
        rows.push_back({order, pt.snr_db, "dnn", res.baseline, 1});
    }
  }
  return rows;
}

struct BoxStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

// Linear-interpolation quantiles on the sorted sample (the common "type 7"
// definition).
inline BoxStats box_stats(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("box_stats: empty sample");
  std::sort(v.begin(), v.end());
  auto quantile = [&](double p) {
    const double h = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    return lo + 1 < v.size() ? v[lo] + frac * (v[lo + 1] - v[lo]) : v[lo];
  };
  return {v.front(), quantile(0.25), quantile(0.5), quantile(0.75), v.back()};
}

struct HwiSweepConfig {
  unsigned order = 64;
  double snr_db = 10.0;
  std::vector<double> kappa_r{0.01, 0.05, 0.10, 0.15};
  ChannelConfig channel;  // kappa_t, power, fading, noise kind
  std::size_t realizations = 20;
  std::size_t symbols = 1000;
  SourceKind source = SourceKind::kUniform;
  SampleOptions sampling;
  std::size_t sample_runs = 1;
};

struct HwiRealization {
  double kappa_r = 0.0;
  std::size_t realization = 0;
  ReceiverScore score;
};

struct HwiCell {
  double kappa_r = 0.0;
  std::vector<HwiRealization> draws;
  BoxStats source_db;
};

inline std::vector<HwiCell> hwi_sweep(const HwiSweepConfig& cfg,
                                      const Mlp& denoiser,
                                      const NoiseSchedule& sched,
                                      RngStream& rng) {
  if (cfg.realizations < 1)
    throw std::invalid_argument("hwi_sweep: realizations must be positive");
  std::vector<HwiCell> cells;
  for (std::size_t ki = 0; ki < cfg.kappa_r.size(); ++ki) {
    HwiCell cell;
    cell.kappa_r = cfg.kappa_r[ki];
    std::vector<double> dbs;
    for (std::size_t r = 0; r < cfg.realizations; ++r) {
      RngStream draw_rng = rng.derive(1000 * (ki + 1) + r);
      LinkPoint pt;
      pt.order = cfg.order;
      pt.snr_db = cfg.snr_db;
      pt.channel = cfg.channel;
      pt.channel.kappa_r = cfg.kappa_r[ki];
      pt.symbols = cfg.symbols;
      pt.source = cfg.source;
      pt.sampling = cfg.sampling;
      pt.sample_runs = cfg.sample_runs;
      const LinkResult res =
          run_link_once(pt, denoiser, sched, nullptr, draw_rng);
      cell.draws.push_back({cfg.kappa_r[ki], r, res.ddpm});
      dbs.push_back(res.ddpm.source.db);
    }
    cell.source_db = box_stats(dbs);
    cells.push_back(std::move(cell));
  }
  return cells;
}

struct PointCloud {
  std::size_t epoch = 0;
  int t = 0;
  Tensor2 points;
};

// Generation quality probe: for every stored training snapshot, run one
// reverse chain from a fresh normal batch and record the state at each grid
// timestep.
inline std::vector<PointCloud> snapshot_grid(
    const std::vector<EpochSnapshot>& snapshots, const NoiseSchedule& sched,
    std::vector<int> t_grid, std::size_t count, RngStream& rng,
    const SampleOptions& opt = {}) {
  std::sort(t_grid.begin(), t_grid.end(), std::greater<int>());
  std::vector<PointCloud> clouds;
  for (const EpochSnapshot& snap : snapshots) {
    RngStream epoch_rng = rng.derive(snap.epoch);
    const Tensor2 start = sample_standard_normal(
        epoch_rng, count, snap.model.config().input_dim);
    auto states =
        sample_trajectory(snap.model, start, sched, epoch_rng, t_grid, opt);
    for (auto& [t, tensor] : states)
      clouds.push_back({snap.epoch, t, std::move(tensor)});
  }
  return clouds;
}

// CSV serialization shared by the command-line driver and the tests, so
// byte-identity checks exercise the exact production format.

inline std::string snr_sweep_csv(const std::vector<SweepRow>& rows,
                                 const SnrSweepConfig& cfg,
                                 std::uint64_t seed) {
  CsvWriter csv({"order", "snr_db", "receiver", "source", "noise", "fading",
                 "kappa_t", "kappa_r", "power", "symbols", "t_start",
                 "mse_linear", "mse_db", "symbol_mse_linear", "symbol_mse_db",
                 "runs", "seed"});
  for (const SweepRow& r : rows)
    csv.append_row(
        {std::to_string(r.order), format_double(r.snr_db), r.receiver,
         cfg.source == SourceKind::kUniform ? "uniform" : "swissroll",
         cfg.channel.noise_kind == NoiseKind::kGaussian ? "gaussian"
                                                        : "laplacian",
         cfg.channel.fading == Fading::kRayleigh ? "rayleigh" : "none",
         format_double(cfg.channel.kappa_t), format_double(cfg.channel.kappa_r),
         format_double(cfg.channel.power), std::to_string(cfg.symbols),
         std::to_string(cfg.sampling.t_start), format_double(r.score.source.linear),
         format_double(r.score.source.db),
         format_double(r.score.symbol.linear),
         format_double(r.score.symbol.db), std::to_string(r.runs),
         std::to_string(seed)});
  return csv.str();
}

inline std::string hwi_sweep_csv(const std::vector<HwiCell>& cells,
                                 const HwiSweepConfig& cfg,
                                 std::uint64_t seed) {
  CsvWriter csv({"order", "snr_db", "kappa_t", "kappa_r", "realization",
                 "noise", "fading", "power", "symbols", "mse_linear", "mse_db",
                 "symbol_mse_linear", "symbol_mse_db", "runs", "seed"});
  for (const HwiCell& cell : cells)
    for (const HwiRealization& d : cell.draws)
      csv.append_row(
          {std::to_string(cfg.order), format_double(cfg.snr_db),
           format_double(cfg.channel.kappa_t), format_double(d.kappa_r),
           std::to_string(d.realization),
           cfg.channel.noise_kind == NoiseKind::kGaussian ? "gaussian"
                                                          : "laplacian",
           cfg.channel.fading == Fading::kRayleigh ? "rayleigh" : "none",
           format_double(cfg.channel.power), std::to_string(cfg.symbols),
           format_double(d.score.source.linear),
           format_double(d.score.source.db),
           format_double(d.score.symbol.linear),
           format_double(d.score.symbol.db), std::to_string(cfg.sample_runs),
           std::to_string(seed)});
  return csv.str();
}

inline std::string hwi_box_csv(const std::vector<HwiCell>& cells,
                               const HwiSweepConfig& cfg, std::uint64_t seed) {
  CsvWriter csv({"order", "snr_db", "kappa_t", "kappa_r", "count", "min_db",
                 "q1_db", "median_db", "q3_db", "max_db", "seed"});
  for (const HwiCell& cell : cells)
    csv.append_row({std::to_string(cfg.order), format_double(cfg.snr_db),
                    format_double(cfg.channel.kappa_t),
                    format_double(cell.kappa_r),
                    std::to_string(cell.draws.size()),
                    format_double(cell.source_db.min),
                    format_double(cell.source_db.q1),
                    format_double(cell.source_db.median),
                    format_double(cell.source_db.q3),
                    format_double(cell.source_db.max), std::to_string(seed)});
  return csv.str();
}

inline std::string point_cloud_csv(const PointCloud& cloud) {
  CsvWriter csv({"epoch", "t", "x", "y"});
  for (std::size_t r = 0; r < cloud.points.rows; ++r)
    csv.append_row({std::to_string(cloud.epoch), std::to_string(cloud.t),
                    format_double(cloud.points(r, 0)),
                    format_double(cloud.points(r, 1))});
  return csv.str();
}

inline std::string loss_csv(const std::vector<double>& epoch_loss) {
  CsvWriter csv({"epoch", "loss"});
  for (std::size_t e = 0; e < epoch_loss.size(); ++e)
    csv.append_row({std::to_string(e + 1), format_double(epoch_loss[e])});
  return csv.str();
}

}  // namespace diffrx
