#include "ccvqa/toy_decoder.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <random>

#include "ccvqa/errors.hpp"
#include "ccvqa/util.hpp"

namespace ccvqa::lm {

namespace bytes {

std::vector<TokenId> encode(std::string_view text) {
  std::vector<TokenId> out;
  out.reserve(text.size());
  for (const char c : text) out.push_back(static_cast<unsigned char>(c));
  return out;
}

std::string decode(std::span<const TokenId> tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (const TokenId t : tokens) {
    if (t >= kVocab) throw VocabError("token id " + std::to_string(t) + " is not a byte");
    out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
  }
  return out;
}

}  // namespace bytes

void ToyLMConfig::validate() const {
  if (vocab_size == 0 || layers == 0 || heads == 0 || model_dim == 0) {
    throw ParameterError("toy LM sizes must be positive");
  }
  if (model_dim % (2 * heads) != 0) throw ParameterError("model_dim must be divisible by 2 * heads");
  if (!(rope_base > 1.0)) throw ParameterError("rope_base must be > 1");
  if (!(pi_scale >= 1.0)) throw ParameterError("pi_scale must be >= 1");
}

ToyLMConfig ToyLMConfig::from_json(const nlohmann::json& j) {
  ToyLMConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.model_dim = j.value("model_dim", c.model_dim);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.seed = j.value("seed", c.seed);
  c.rope_base = j.value("rope_base", c.rope_base);
  c.pi_scale = j.value("pi_scale", c.pi_scale);
  c.validate();
  return c;
}

nlohmann::json ToyLMConfig::to_json() const {
  return {{"vocab_size", vocab_size}, {"model_dim", model_dim}, {"layers", layers}, {"heads", heads},
          {"seed", seed},             {"rope_base", rope_base}, {"pi_scale", pi_scale}};
}

const Tensor& Weights::at(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ShapeError("missing tensor " + name);
  return it->second;
}

Tensor& Weights::at(const std::string& name) {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ShapeError("missing tensor " + name);
  return it->second;
}

void Weights::add(std::string name, Tensor t) {
  std::size_t count = 1;
  for (const auto s : t.shape) count *= s;
  if (count != t.values.size()) throw ShapeError("tensor " + name + " size does not match its shape");
  if (!tensors_.emplace(name, std::move(t)).second) throw DuplicateIdError("tensor " + name + " added twice");
  order_.push_back(std::move(name));
}

namespace {

std::string layer_name(std::size_t l, const char* part) { return "layers." + std::to_string(l) + "." + part; }

Tensor filled(std::vector<std::size_t> shape, float value) {
  std::size_t count = 1;
  for (const auto s : shape) count *= s;
  return Tensor{std::move(shape), std::vector<float>(count, value)};
}

Tensor uniform(std::vector<std::size_t> shape, double scale, std::mt19937_64& rng) {
  Tensor t = filled(std::move(shape), 0.0f);
  for (auto& v : t.values) v = static_cast<float>(scale * uniform_pm1(rng));
  return t;
}

}  // namespace

Weights Weights::random(const ToyLMConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.model_dim;
  const std::size_t f = 4 * d;
  std::mt19937_64 rng(cfg.seed);
  const double in_d = std::sqrt(3.0 / static_cast<double>(d));
  const double in_f = std::sqrt(3.0 / static_cast<double>(f));
  Weights w;
  w.add("tok_embedding", uniform({cfg.vocab_size, d}, 1.0, rng));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    w.add(layer_name(l, "attn_norm"), filled({d}, 1.0f));
    w.add(layer_name(l, "wq"), uniform({d, d}, in_d, rng));
    w.add(layer_name(l, "wk"), uniform({d, d}, in_d, rng));
    w.add(layer_name(l, "wv"), uniform({d, d}, in_d, rng));
    w.add(layer_name(l, "wo"), uniform({d, d}, in_d, rng));
    w.add(layer_name(l, "mlp_norm"), filled({d}, 1.0f));
    w.add(layer_name(l, "w1"), uniform({d, f}, in_d, rng));
    w.add(layer_name(l, "w2"), uniform({f, d}, in_f, rng));
  }
  w.add("final_norm", filled({d}, 1.0f));
  w.add("lm_head", uniform({d, cfg.vocab_size}, in_d, rng));
  return w;
}

void Weights::save(const std::string& bin_path, const std::string& sidecar_path) const {
  std::string blob;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& name : order_) {
    const Tensor& t = tensors_.at(name);
    tensors.push_back({{"name", name}, {"shape", t.shape}, {"offset", blob.size()}});
    for (const float v : t.values) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
    }
  }
  const nlohmann::json sidecar = {{"dtype", "float32"}, {"byte_order", "little"}, {"tensors", tensors}};
  write_file(bin_path, blob);
  write_file(sidecar_path, sidecar.dump(2) + "\n");
}

Weights Weights::load(const std::string& bin_path, const std::string& sidecar_path) {
  const std::string blob = read_file(bin_path);
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(read_file(sidecar_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("weight sidecar: ") + e.what());
  }
  if (sidecar.value("dtype", "") != "float32" || sidecar.value("byte_order", "") != "little") {
    throw ParseError(0, "weight sidecar must describe little-endian float32 data");
  }
  Weights w;
  for (const auto& entry : sidecar.at("tensors")) {
    Tensor t;
    t.shape = entry.at("shape").get<std::vector<std::size_t>>();
    std::size_t count = 1;
    for (const auto s : t.shape) count *= s;
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    if (offset + 4 * count > blob.size()) throw ShapeError("weight blob is shorter than its sidecar claims");
    t.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[offset + 4 * i + b])) << (8 * b);
      }
      t.values[i] = std::bit_cast<float>(bits);
    }
    w.add(entry.at("name").get<std::string>(), std::move(t));
  }
  return w;
}

ToyDecoder::ToyDecoder(ToyLMConfig cfg) : ToyDecoder(cfg, Weights::random(cfg)) {}

ToyDecoder::ToyDecoder(ToyLMConfig cfg, Weights weights) : cfg_(cfg), weights_(std::move(weights)) {
  cfg_.validate();
  const std::size_t d = cfg_.model_dim;
  auto expect = [&](const std::string& name, std::vector<std::size_t> shape) {
    if (weights_.at(name).shape != shape) throw ShapeError("tensor " + name + " has the wrong shape");
  };
  expect("tok_embedding", {cfg_.vocab_size, d});
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    expect(layer_name(l, "attn_norm"), {d});
    for (const char* p : {"wq", "wk", "wv", "wo"}) expect(layer_name(l, p), {d, d});
    expect(layer_name(l, "mlp_norm"), {d});
    expect(layer_name(l, "w1"), {d, 4 * d});
    expect(layer_name(l, "w2"), {4 * d, d});
  }
  expect("final_norm", {d});
  expect("lm_head", {d, cfg_.vocab_size});
}

namespace {

using Matrix = std::vector<double>;  // row-major, n rows

void rms_norm(const double* x, const Tensor& gain, std::size_t d, double* out) {
  double ss = 0.0;
  for (std::size_t i = 0; i < d; ++i) ss += x[i] * x[i];
  const double inv = 1.0 / std::sqrt(ss / static_cast<double>(d) + 1e-6);
  for (std::size_t i = 0; i < d; ++i) out[i] = x[i] * inv * static_cast<double>(gain.values[i]);
}

// out[n, cols] = x[n, rows] * w[rows, cols]
Matrix matmul(const Matrix& x, std::size_t n, const Tensor& w) {
  const std::size_t rows = w.shape[0];
  const std::size_t cols = w.shape[1];
  Matrix out(n * cols, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const double* xr = &x[t * rows];
    double* o = &out[t * cols];
    for (std::size_t r = 0; r < rows; ++r) {
      const double xv = xr[r];
      const float* wr = &w.values[r * cols];
      for (std::size_t c = 0; c < cols; ++c) o[c] += xv * static_cast<double>(wr[c]);
    }
  }
  return out;
}

}  // namespace

Logits ToyDecoder::next_token_logits(std::span<const TokenId> tokens, const PositionMap& positions) const {
  const std::size_t n = tokens.size();
  if (positions.size() != n) throw ShapeError("position map length differs from token count");
  if (n == 0) throw ShapeError("forward needs at least one token");
  for (const TokenId t : tokens) {
    if (t >= cfg_.vocab_size) throw VocabError("token id " + std::to_string(t) + " out of range");
  }
  std::vector<double> pos = positions.positions;
  if (cfg_.pi_scale > 1.0) pos = interpolate_positions(pos, cfg_.pi_scale);

  const std::size_t d = cfg_.model_dim;
  const std::size_t hd = d / cfg_.heads;
  const Tensor& emb = weights_.at("tok_embedding");
  Matrix h(n * d);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < d; ++i) h[t * d + i] = emb.values[tokens[t] * d + i];
  }

  Matrix x(n * d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<double> weights(n);
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const Tensor& g1 = weights_.at(layer_name(l, "attn_norm"));
    for (std::size_t t = 0; t < n; ++t) rms_norm(&h[t * d], g1, d, &x[t * d]);
    Matrix q = matmul(x, n, weights_.at(layer_name(l, "wq")));
    Matrix k = matmul(x, n, weights_.at(layer_name(l, "wk")));
    const Matrix v = matmul(x, n, weights_.at(layer_name(l, "wv")));
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t hh = 0; hh < cfg_.heads; ++hh) {
        rope_rotate_in_place(std::span<double>(&q[t * d + hh * hd], hd), pos[t], cfg_.rope_base);
        rope_rotate_in_place(std::span<double>(&k[t * d + hh * hd], hd), pos[t], cfg_.rope_base);
      }
    }
    Matrix attn(n * d, 0.0);
    for (std::size_t hh = 0; hh < cfg_.heads; ++hh) {
      const std::size_t off = hh * hd;
      for (std::size_t t = 0; t < n; ++t) {
        double mx = -INFINITY;
        for (std::size_t s = 0; s <= t; ++s) {
          double dot = 0.0;
          for (std::size_t i = 0; i < hd; ++i) dot += q[t * d + off + i] * k[s * d + off + i];
          weights[s] = dot * scale;
          mx = std::max(mx, weights[s]);
        }
        double z = 0.0;
        for (std::size_t s = 0; s <= t; ++s) {
          weights[s] = std::exp(weights[s] - mx);
          z += weights[s];
        }
        double* o = &attn[t * d + off];
        for (std::size_t s = 0; s <= t; ++s) {
          const double a = weights[s] / z;
          for (std::size_t i = 0; i < hd; ++i) o[i] += a * v[s * d + off + i];
        }
      }
    }
    const Matrix proj = matmul(attn, n, weights_.at(layer_name(l, "wo")));
    for (std::size_t i = 0; i < n * d; ++i) h[i] += proj[i];

    const Tensor& g2 = weights_.at(layer_name(l, "mlp_norm"));
    for (std::size_t t = 0; t < n; ++t) rms_norm(&h[t * d], g2, d, &x[t * d]);
    Matrix u = matmul(x, n, weights_.at(layer_name(l, "w1")));
    for (auto& e : u) e = e / (1.0 + std::exp(-e));
    const Matrix down = matmul(u, n, weights_.at(layer_name(l, "w2")));
    for (std::size_t i = 0; i < n * d; ++i) h[i] += down[i];
  }

  Matrix last(d);
  rms_norm(&h[(n - 1) * d], weights_.at("final_norm"), d, last.data());
  Logits logits = matmul(last, 1, weights_.at("lm_head"));
  for (const double z : logits) {
    if (!std::isfinite(z)) throw NumericError("toy decoder produced a non-finite logit");
  }
  return logits;
}

}  // namespace ccvqa::lm
