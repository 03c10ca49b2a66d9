#pragma once

// Binary model checkpoints. Layout (little-endian):
//
//   bytes 0-7   magic "DRXMDL01" (format version baked into the tag)
//   u32         training epoch the parameters were captured at
//   u32         conditioning horizon T (0 when unconditioned)
//   u32         input_dim
//   u32         hidden_dim
//   u32         hidden_layers
//   u8          activation (0 = softplus, 1 = relu)
//   u8          embedding placement (0 = pre-activation, 1 = post)
//   u8 x 2      reserved, zero
//   u32         tensor count
//   per tensor  u32 rows, u32 cols, rows*cols f64
//
// Tensors appear as w0, b0, ..., wN, bN, then one embedding table per
// hidden layer when conditioned.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "diffrx/io.hpp"
#include "diffrx/neural.hpp"

namespace diffrx {

namespace detail {

constexpr char kModelMagic[8] = {'D', 'R', 'X', 'M', 'D', 'L', '0', '1'};

inline void put_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

inline void put_tensor(std::string& out, const Tensor2& t) {
  put_u32(out, static_cast<std::uint32_t>(t.rows));
  put_u32(out, static_cast<std::uint32_t>(t.cols));
  out.append(reinterpret_cast<const char*>(t.data.data()),
             t.data.size() * sizeof(double));
}

class BlobReader {
 public:
  BlobReader(const std::string& blob, const std::string& origin)
      : blob_(blob), origin_(origin) {}

  std::uint32_t u32() {
    std::uint32_t v;
    std::memcpy(&v, take(4), 4);
    return v;
  }

  std::uint8_t u8() { return static_cast<std::uint8_t>(*take(1)); }

  Tensor2 tensor() {
    const std::uint32_t rows = u32();
    const std::uint32_t cols = u32();
    Tensor2 t(rows, cols);
    std::memcpy(t.data.data(), take(t.data.size() * sizeof(double)),
                t.data.size() * sizeof(double));
    return t;
  }

  const char* take(std::size_t n) {
    if (pos_ + n > blob_.size())
      throw std::runtime_error("truncated model file: " + origin_);
    const char* p = blob_.data() + pos_;
    pos_ += n;
    return p;
  }

  bool exhausted() const { return pos_ == blob_.size(); }

 private:
  const std::string& blob_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline void save_model(const std::filesystem::path& path, const Mlp& model,
                       std::uint32_t epoch) {
  const MlpConfig& cfg = model.config();
  std::string blob(detail::kModelMagic, sizeof(detail::kModelMagic));
  detail::put_u32(blob, epoch);
  detail::put_u32(blob, static_cast<std::uint32_t>(cfg.time_steps));
  detail::put_u32(blob, static_cast<std::uint32_t>(cfg.input_dim));
  detail::put_u32(blob, static_cast<std::uint32_t>(cfg.hidden_dim));
  detail::put_u32(blob, static_cast<std::uint32_t>(cfg.hidden_layers));
  blob.push_back(cfg.activation == Activation::kRelu ? 1 : 0);
  blob.push_back(cfg.embed_after_activation ? 1 : 0);
  blob.push_back(0);
  blob.push_back(0);

  const std::size_t layers = cfg.hidden_layers + 1;
  const std::size_t embeds = model.conditioned() ? cfg.hidden_layers : 0;
  detail::put_u32(blob, static_cast<std::uint32_t>(2 * layers + embeds));
  for (std::size_t l = 0; l < layers; ++l) {
    detail::put_tensor(blob, model.weight(l));
    detail::put_tensor(blob, model.bias(l));
  }
  for (std::size_t l = 0; l < embeds; ++l)
    detail::put_tensor(blob, model.embedding(l));
  write_file_atomic(path, blob);
}

struct LoadedModel {
  Mlp model;
  std::uint32_t epoch = 0;
};

inline LoadedModel load_model(const std::filesystem::path& path) {
  const std::string blob = read_file(path);
  detail::BlobReader in(blob, path.string());
  if (std::memcmp(in.take(8), detail::kModelMagic, 8) != 0)
    throw std::runtime_error("not a model file: " + path.string());

  LoadedModel out;
  out.epoch = in.u32();
  MlpConfig cfg;
  cfg.time_steps = in.u32();
  cfg.input_dim = in.u32();
  cfg.hidden_dim = in.u32();
  cfg.hidden_layers = in.u32();
  cfg.activation = in.u8() ? Activation::kRelu : Activation::kSoftplus;
  cfg.embed_after_activation = in.u8() != 0;
  in.take(2);

  RngStream scratch(0);
  out.model = Mlp(cfg, scratch);
  const std::size_t layers = cfg.hidden_layers + 1;
  const std::size_t embeds = cfg.time_steps > 0 ? cfg.hidden_layers : 0;
  if (in.u32() != 2 * layers + embeds)
    throw std::runtime_error("unexpected tensor count: " + path.string());

  auto expect = [&](Tensor2& dst) {
    Tensor2 t = in.tensor();
    if (t.rows != dst.rows || t.cols != dst.cols)
      throw std::runtime_error("tensor shape mismatch: " + path.string());
    dst = std::move(t);
  };
  for (std::size_t l = 0; l < layers; ++l) {
    expect(out.model.weight(l));
    expect(out.model.bias(l));
  }
  for (std::size_t l = 0; l < embeds; ++l) expect(out.model.embedding(l));
  if (!in.exhausted())
    throw std::runtime_error("trailing bytes in model file: " + path.string());
  return out;
}

}  // namespace diffrx
