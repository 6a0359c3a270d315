#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccvqa/language_model.hpp"

namespace ccvqa::lm {

struct ToyLMConfig {
  std::size_t vocab_size = 256;
  std::size_t model_dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::uint64_t seed = 0;
  double rope_base = 10000.0;
  double pi_scale = 1.0;  // position interpolation divisor, 1 disables

  // ParameterError unless d is even and divisible by 2 * heads.
  void validate() const;
  static ToyLMConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> values;
};

// Named float32 parameters in a fixed order.
class Weights {
 public:
  static Weights random(const ToyLMConfig& cfg);

  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  const std::vector<std::string>& names() const { return order_; }
  void add(std::string name, Tensor t);

  // Flat little-endian float32 blob plus a JSON sidecar
  // {"dtype","byte_order","tensors":[{"name","shape","offset"}]}, offsets in bytes.
  void save(const std::string& bin_path, const std::string& sidecar_path) const;
  static Weights load(const std::string& bin_path, const std::string& sidecar_path);

 private:
  std::vector<std::string> order_;
  std::map<std::string, Tensor> tensors_;
};

// Small pre-norm causal decoder. Weights are stored as float32 and all
// arithmetic runs in double, so outputs are reproducible bit for bit.
class ToyDecoder : public LanguageModel {
 public:
  explicit ToyDecoder(ToyLMConfig cfg);
  ToyDecoder(ToyLMConfig cfg, Weights weights);

  std::size_t vocab_size() const override { return cfg_.vocab_size; }
  TokenId eos_token() const override { return bytes::kEos; }
  Logits next_token_logits(std::span<const TokenId> tokens, const PositionMap& positions) const override;

  const ToyLMConfig& config() const { return cfg_; }
  const Weights& weights() const { return weights_; }

 private:
  ToyLMConfig cfg_;
  Weights weights_;
};

}  // namespace ccvqa::lm
