#pragma once

// Run configuration as flat key=value pairs. A config file holds one pair
// per line ('#' starts a comment); command-line overrides use the same
// syntax. Unknown keys and malformed values are hard errors, and the
// effective configuration can be echoed back in canonical order so every
// artifact directory records exactly what produced it.

#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffrx/baseline.hpp"
#include "diffrx/channel.hpp"
#include "diffrx/data.hpp"
#include "diffrx/ddpm.hpp"
#include "diffrx/eval.hpp"
#include "diffrx/io.hpp"
#include "diffrx/modem.hpp"

namespace diffrx {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct RunConfig {
  std::uint64_t seed = 1;

  std::size_t schedule_timesteps = 100;
  double schedule_beta_start = 1e-4;
  double schedule_beta_end = 0.02;

  std::size_t model_hidden_dim = 128;
  std::size_t model_hidden_layers = 3;
  bool model_embed_after_activation = false;

  std::size_t train_epochs = 2000;
  std::size_t train_batch_size = 256;
  double train_learning_rate = 1e-3;
  std::size_t train_snapshot_every = 400;

  std::size_t link_epochs = 4000;
  std::size_t link_batch_size = 256;
  double link_learning_rate = 1e-3;

  int sampling_t_start = 0;
  SamplerNoise sampling_noise = SamplerNoise::kStepBeta;

  double channel_power = 1.0;
  double channel_kappa_t = 0.05;
  double channel_kappa_r = 0.15;
  Fading channel_fading = Fading::kNone;
  NoiseKind channel_noise = NoiseKind::kGaussian;

  SourceKind source_kind = SourceKind::kUniform;

  std::size_t swissroll_samples = 10000;
  double swissroll_noise_std = 0.0;
  double swissroll_scale = 10.0;

  unsigned modem_order = 64;

  std::size_t baseline_iterations = 0;
  std::size_t baseline_batch_size = 256;
  double baseline_learning_rate = 0.01;
  std::size_t baseline_hidden_dim = 64;

  std::vector<unsigned> sweep_orders{16, 64, 256};
  std::vector<double> sweep_snr_db = default_snr_grid();
  std::size_t sweep_runs = 10;
  std::size_t sweep_symbols = 2000;
  bool sweep_baseline = true;

  double hwi_snr_db = 10.0;
  std::vector<double> hwi_kappa_r{0.01, 0.05, 0.10, 0.15};
  Fading hwi_fading = Fading::kRayleigh;
  std::size_t hwi_realizations = 20;
  std::size_t hwi_symbols = 1000;
  std::size_t hwi_runs = 1;

  std::vector<int> grid_t{50, 60, 70, 80, 90, 100};
  std::size_t grid_points = 1000;
  std::string grid_model_dir;

  std::string model_path;
  std::map<unsigned, std::string> order_model_paths{
      {16, ""}, {64, ""}, {256, ""}};
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for " + key + ": '" + v + "'");
  }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size() || (!v.empty() && v[0] == '-'))
      throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad integer value for " + key + ": '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean value for " + key + ": '" + v + "'");
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& key, const std::string& v,
                          F&& one) {
  std::vector<T> out;
  for (const std::string& part : split_list(v)) out.push_back(one(key, part));
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

}  // namespace detail

inline void apply_config_value(RunConfig& rc, const std::string& key,
                               const std::string& value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_u64;

  auto as_size = [&](const std::string& k, const std::string& v) {
    return static_cast<std::size_t>(parse_u64(k, v));
  };

  if (key == "seed") rc.seed = parse_u64(key, value);
  else if (key == "schedule.timesteps") rc.schedule_timesteps = as_size(key, value);
  else if (key == "schedule.beta_start") rc.schedule_beta_start = parse_double(key, value);
  else if (key == "schedule.beta_end") rc.schedule_beta_end = parse_double(key, value);
  else if (key == "model.hidden_dim") rc.model_hidden_dim = as_size(key, value);
  else if (key == "model.hidden_layers") rc.model_hidden_layers = as_size(key, value);
  else if (key == "model.embed_after_activation") rc.model_embed_after_activation = parse_bool(key, value);
  else if (key == "train.epochs") rc.train_epochs = as_size(key, value);
  else if (key == "train.batch_size") rc.train_batch_size = as_size(key, value);
  else if (key == "train.learning_rate") rc.train_learning_rate = parse_double(key, value);
  else if (key == "train.snapshot_every") rc.train_snapshot_every = as_size(key, value);
  else if (key == "link.epochs") rc.link_epochs = as_size(key, value);
  else if (key == "link.batch_size") rc.link_batch_size = as_size(key, value);
  else if (key == "link.learning_rate") rc.link_learning_rate = parse_double(key, value);
  else if (key == "sampling.t_start") rc.sampling_t_start = static_cast<int>(parse_u64(key, value));
  else if (key == "sampling.noise") {
    if (value == "step") rc.sampling_noise = SamplerNoise::kStepBeta;
    else if (value == "posterior") rc.sampling_noise = SamplerNoise::kPosteriorBeta;
    else throw ConfigError("sampling.noise must be 'step' or 'posterior'");
  }
  else if (key == "channel.power") rc.channel_power = parse_double(key, value);
  else if (key == "channel.kappa_t") rc.channel_kappa_t = parse_double(key, value);
  else if (key == "channel.kappa_r") rc.channel_kappa_r = parse_double(key, value);
  else if (key == "channel.fading" || key == "hwi.fading") {
    Fading f;
    if (value == "none") f = Fading::kNone;
    else if (value == "rayleigh") f = Fading::kRayleigh;
    else throw ConfigError(key + " must be 'none' or 'rayleigh'");
    (key == "channel.fading" ? rc.channel_fading : rc.hwi_fading) = f;
  }
  else if (key == "channel.noise") {
    if (value == "gaussian") rc.channel_noise = NoiseKind::kGaussian;
    else if (value == "laplacian") rc.channel_noise = NoiseKind::kLaplacian;
    else throw ConfigError("channel.noise must be 'gaussian' or 'laplacian'");
  }
  else if (key == "source.kind") {
    if (value == "uniform") rc.source_kind = SourceKind::kUniform;
    else if (value == "swissroll") rc.source_kind = SourceKind::kSwissRoll;
    else throw ConfigError("source.kind must be 'uniform' or 'swissroll'");
  }
  else if (key == "swissroll.samples") rc.swissroll_samples = as_size(key, value);
  else if (key == "swissroll.noise_std") rc.swissroll_noise_std = parse_double(key, value);
  else if (key == "swissroll.scale") rc.swissroll_scale = parse_double(key, value);
  else if (key == "modem.order") rc.modem_order = static_cast<unsigned>(parse_u64(key, value));
  else if (key == "baseline.iterations") rc.baseline_iterations = as_size(key, value);
  else if (key == "baseline.batch_size") rc.baseline_batch_size = as_size(key, value);
  else if (key == "baseline.learning_rate") rc.baseline_learning_rate = parse_double(key, value);
  else if (key == "baseline.hidden_dim") rc.baseline_hidden_dim = as_size(key, value);
  else if (key == "sweep.orders")
    rc.sweep_orders = detail::parse_list<unsigned>(
        key, value, [](const std::string& k, const std::string& v) {
          return static_cast<unsigned>(detail::parse_u64(k, v));
        });
  else if (key == "sweep.snr_db")
    rc.sweep_snr_db = detail::parse_list<double>(key, value, parse_double);
  else if (key == "sweep.runs") rc.sweep_runs = as_size(key, value);
  else if (key == "sweep.symbols") rc.sweep_symbols = as_size(key, value);
  else if (key == "sweep.baseline") rc.sweep_baseline = parse_bool(key, value);
  else if (key == "hwi.snr_db") rc.hwi_snr_db = parse_double(key, value);
  else if (key == "hwi.kappa_r")
    rc.hwi_kappa_r = detail::parse_list<double>(key, value, parse_double);
  else if (key == "hwi.realizations") rc.hwi_realizations = as_size(key, value);
  else if (key == "hwi.symbols") rc.hwi_symbols = as_size(key, value);
  else if (key == "hwi.runs") rc.hwi_runs = as_size(key, value);
  else if (key == "grid.t")
    rc.grid_t = detail::parse_list<int>(
        key, value, [](const std::string& k, const std::string& v) {
          return static_cast<int>(detail::parse_u64(k, v));
        });
  else if (key == "grid.points") rc.grid_points = as_size(key, value);
  else if (key == "grid.model_dir") rc.grid_model_dir = value;
  else if (key == "ddpm.model") rc.model_path = value;
  else if (key == "ddpm.model.16") rc.order_model_paths[16] = value;
  else if (key == "ddpm.model.64") rc.order_model_paths[64] = value;
  else if (key == "ddpm.model.256") rc.order_model_paths[256] = value;
  else throw ConfigError("unknown config key: '" + key + "'");
}

inline void apply_config_line(RunConfig& rc, const std::string& raw) {
  std::string line = raw;
  const std::size_t hash = line.find('#');
  if (hash != std::string::npos) line.erase(hash);
  const auto first = line.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return;
  const auto last = line.find_last_not_of(" \t\r\n");
  line = line.substr(first, last - first + 1);

  const std::size_t eq = line.find('=');
  if (eq == std::string::npos)
    throw ConfigError("expected key=value, got: '" + line + "'");
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
  };
  apply_config_value(rc, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
}

inline void apply_config_text(RunConfig& rc, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) apply_config_line(rc, line);
}

// Canonical echo of every effective setting.
inline std::string config_text(const RunConfig& rc) {
  std::ostringstream out;
  auto join_d = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ',';
      s += format_double(v[i]);
    }
    return s;
  };
  out << "seed = " << rc.seed << '\n';
  out << "schedule.timesteps = " << rc.schedule_timesteps << '\n';
  out << "schedule.beta_start = " << format_double(rc.schedule_beta_start) << '\n';
  out << "schedule.beta_end = " << format_double(rc.schedule_beta_end) << '\n';
  out << "model.hidden_dim = " << rc.model_hidden_dim << '\n';
  out << "model.hidden_layers = " << rc.model_hidden_layers << '\n';
  out << "model.embed_after_activation = "
      << (rc.model_embed_after_activation ? "true" : "false") << '\n';
  out << "train.epochs = " << rc.train_epochs << '\n';
  out << "train.batch_size = " << rc.train_batch_size << '\n';
  out << "train.learning_rate = " << format_double(rc.train_learning_rate) << '\n';
  out << "train.snapshot_every = " << rc.train_snapshot_every << '\n';
  out << "link.epochs = " << rc.link_epochs << '\n';
  out << "link.batch_size = " << rc.link_batch_size << '\n';
  out << "link.learning_rate = " << format_double(rc.link_learning_rate) << '\n';
  out << "sampling.t_start = " << rc.sampling_t_start << '\n';
  out << "sampling.noise = "
      << (rc.sampling_noise == SamplerNoise::kStepBeta ? "step" : "posterior")
      << '\n';
  out << "channel.power = " << format_double(rc.channel_power) << '\n';
  out << "channel.kappa_t = " << format_double(rc.channel_kappa_t) << '\n';
  out << "channel.kappa_r = " << format_double(rc.channel_kappa_r) << '\n';
  out << "channel.fading = "
      << (rc.channel_fading == Fading::kRayleigh ? "rayleigh" : "none") << '\n';
  out << "channel.noise = "
      << (rc.channel_noise == NoiseKind::kGaussian ? "gaussian" : "laplacian")
      << '\n';
  out << "source.kind = "
      << (rc.source_kind == SourceKind::kUniform ? "uniform" : "swissroll")
      << '\n';
  out << "swissroll.samples = " << rc.swissroll_samples << '\n';
  out << "swissroll.noise_std = " << format_double(rc.swissroll_noise_std) << '\n';
  out << "swissroll.scale = " << format_double(rc.swissroll_scale) << '\n';
  out << "modem.order = " << rc.modem_order << '\n';
  out << "baseline.iterations = " << rc.baseline_iterations << '\n';
  out << "baseline.batch_size = " << rc.baseline_batch_size << '\n';
  out << "baseline.learning_rate = " << format_double(rc.baseline_learning_rate) << '\n';
  out << "baseline.hidden_dim = " << rc.baseline_hidden_dim << '\n';
  {
    std::string s;
    for (std::size_t i = 0; i < rc.sweep_orders.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(rc.sweep_orders[i]);
    }
    out << "sweep.orders = " << s << '\n';
  }
  out << "sweep.snr_db = " << join_d(rc.sweep_snr_db) << '\n';
  out << "sweep.runs = " << rc.sweep_runs << '\n';
  out << "sweep.symbols = " << rc.sweep_symbols << '\n';
  out << "sweep.baseline = " << (rc.sweep_baseline ? "true" : "false") << '\n';
  out << "hwi.snr_db = " << format_double(rc.hwi_snr_db) << '\n';
  out << "hwi.kappa_r = " << join_d(rc.hwi_kappa_r) << '\n';
  out << "hwi.fading = "
      << (rc.hwi_fading == Fading::kRayleigh ? "rayleigh" : "none") << '\n';
  out << "hwi.realizations = " << rc.hwi_realizations << '\n';
  out << "hwi.symbols = " << rc.hwi_symbols << '\n';
  out << "hwi.runs = " << rc.hwi_runs << '\n';
  {
    std::string s;
    for (std::size_t i = 0; i < rc.grid_t.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(rc.grid_t[i]);
    }
    out << "grid.t = " << s << '\n';
  }
  out << "grid.points = " << rc.grid_points << '\n';
  out << "grid.model_dir = " << rc.grid_model_dir << '\n';
  out << "ddpm.model = " << rc.model_path << '\n';
  out << "ddpm.model.16 = " << rc.order_model_paths.at(16) << '\n';
  out << "ddpm.model.64 = " << rc.order_model_paths.at(64) << '\n';
  out << "ddpm.model.256 = " << rc.order_model_paths.at(256) << '\n';
  return out.str();
}

// Builders mapping the flat configuration onto the module structs.

inline NoiseSchedule schedule_from(const RunConfig& rc) {
  return make_schedule(rc.schedule_timesteps, rc.schedule_beta_start,
                       rc.schedule_beta_end);
}

inline MlpConfig denoiser_config_from(const RunConfig& rc) {
  MlpConfig cfg;
  cfg.input_dim = 2;
  cfg.hidden_dim = rc.model_hidden_dim;
  cfg.hidden_layers = rc.model_hidden_layers;
  cfg.time_steps = rc.schedule_timesteps;
  cfg.activation = Activation::kSoftplus;
  cfg.embed_after_activation = rc.model_embed_after_activation;
  return cfg;
}

inline ChannelConfig channel_from(const RunConfig& rc) {
  ChannelConfig cfg;
  cfg.power = rc.channel_power;
  cfg.kappa_t = rc.channel_kappa_t;
  cfg.kappa_r = rc.channel_kappa_r;
  cfg.fading = rc.channel_fading;
  cfg.noise_kind = rc.channel_noise;
  return cfg;
}

inline SampleOptions sampling_from(const RunConfig& rc) {
  return {rc.sampling_t_start, rc.sampling_noise};
}

inline TrainOptions swissroll_train_options(const RunConfig& rc) {
  return {rc.train_epochs, rc.train_batch_size, rc.train_learning_rate,
          rc.train_snapshot_every};
}

inline TrainOptions link_train_options(const RunConfig& rc) {
  return {rc.link_epochs, rc.link_batch_size, rc.link_learning_rate, 0};
}

inline BaselineConfig baseline_from(const RunConfig& rc) {
  BaselineConfig cfg;
  cfg.channel = channel_from(rc);
  cfg.iterations = rc.baseline_iterations;
  cfg.batch_size = rc.baseline_batch_size;
  cfg.learning_rate = rc.baseline_learning_rate;
  cfg.hidden_dim = rc.baseline_hidden_dim;
  return cfg;
}

inline SnrSweepConfig snr_sweep_from(const RunConfig& rc) {
  SnrSweepConfig cfg;
  cfg.orders = rc.sweep_orders;
  cfg.snr_db = rc.sweep_snr_db;
  cfg.channel = channel_from(rc);
  cfg.symbols = rc.sweep_symbols;
  cfg.sample_runs = rc.sweep_runs;
  cfg.source = rc.source_kind;
  cfg.sampling = sampling_from(rc);
  cfg.with_baseline = rc.sweep_baseline;
  cfg.baseline = baseline_from(rc);
  return cfg;
}

inline HwiSweepConfig hwi_sweep_from(const RunConfig& rc) {
  HwiSweepConfig cfg;
  cfg.order = rc.modem_order;
  cfg.snr_db = rc.hwi_snr_db;
  cfg.kappa_r = rc.hwi_kappa_r;
  cfg.channel = channel_from(rc);
  cfg.channel.fading = rc.hwi_fading;
  cfg.realizations = rc.hwi_realizations;
  cfg.symbols = rc.hwi_symbols;
  cfg.source = rc.source_kind;
  cfg.sampling = sampling_from(rc);
  cfg.sample_runs = rc.hwi_runs;
  return cfg;
}

inline SwissRollConfig swissroll_from(const RunConfig& rc) {
  return {rc.swissroll_samples, rc.swissroll_noise_std, rc.swissroll_scale};
}

}  // namespace diffrx
