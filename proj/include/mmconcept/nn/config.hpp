#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace mmconcept::nn {

struct ModelConfig {
  std::string preset = "desk";
  std::size_t num_layers = 2;
  std::size_t hidden_size = 128;
  std::size_t ffn_size = 512;
  std::size_t num_heads = 4;
  double dropout_rate = 0.1;
  double attention_dropout_rate = 0.1;
  std::string activation = "gelu";
  std::string positional_embedding = "absolute";
  std::size_t max_sequence_length = 256;
  std::size_t vocab_size = 0;
  double mask_rate = 0.15;
  std::uint64_t seed = 42;

  static ModelConfig desk() { return ModelConfig{}; }

  /// Twelve-layer base configuration used for full-scale runs.
  static ModelConfig paper_full() {
    ModelConfig c;
    c.preset = "paper-full";
    c.num_layers = 12;
    c.hidden_size = 768;
    c.ffn_size = 3072;
    c.num_heads = 12;
    c.max_sequence_length = 512;
    return c;
  }

  /// Used by unit tests and the overfit check.
  static ModelConfig tiny() {
    ModelConfig c;
    c.preset = "tiny";
    c.num_layers = 1;
    c.hidden_size = 32;
    c.ffn_size = 64;
    c.num_heads = 2;
    c.dropout_rate = 0.0;
    c.attention_dropout_rate = 0.0;
    c.max_sequence_length = 64;
    return c;
  }

  static ModelConfig from_preset(const std::string& name) {
    if (name == "desk") return desk();
    if (name == "paper-full") return paper_full();
    if (name == "tiny") return tiny();
    throw std::invalid_argument("unknown model preset '" + name + "'");
  }

  std::size_t head_size() const { return hidden_size / num_heads; }

  void validate() const {
    if (num_layers == 0 || hidden_size == 0 || ffn_size == 0 || num_heads == 0)
      throw std::invalid_argument("model config: sizes must be positive");
    if (hidden_size % num_heads != 0)
      throw std::invalid_argument("model config: hidden_size must be divisible by num_heads");
    if (dropout_rate < 0 || dropout_rate >= 1 || attention_dropout_rate < 0 || attention_dropout_rate >= 1)
      throw std::invalid_argument("model config: dropout rates must lie in [0, 1)");
    if (!(mask_rate > 0 && mask_rate < 1)) throw std::invalid_argument("model config: mask_rate must lie in (0, 1)");
    if (activation != "gelu") throw std::invalid_argument("model config: only gelu activation is supported");
    if (positional_embedding != "absolute")
      throw std::invalid_argument("model config: only absolute positional embeddings are supported");
    if (max_sequence_length < 2) throw std::invalid_argument("model config: max_sequence_length too small");
    if (vocab_size < 6) throw std::invalid_argument("model config: vocab_size not set");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ModelConfig, preset, num_layers, hidden_size, ffn_size, num_heads, dropout_rate,
                                   attention_dropout_rate, activation, positional_embedding, max_sequence_length,
                                   vocab_size, mask_rate, seed)

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  // A few hundred optimizer steps is all a desk-sized corpus gets in 100
  // epochs at batch 32, hence the high fixed rate and the long patience:
  // validation loss plateaus for ~20 epochs before identifiers are learned.
  double learning_rate = 2e-3;
  double validation_fraction = 0.10;
  std::size_t early_stop_patience = 20;
  double grad_clip_norm = 1.0;
  std::uint64_t seed = 42;

  void validate() const {
    if (batch_size == 0) throw std::invalid_argument("train config: batch_size must be positive");
    if (max_epochs == 0) throw std::invalid_argument("train config: max_epochs must be positive");
    if (!(learning_rate > 0)) throw std::invalid_argument("train config: learning_rate must be positive");
    if (!(validation_fraction > 0 && validation_fraction < 1))
      throw std::invalid_argument("train config: validation_fraction must lie in (0, 1)");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrainConfig, batch_size, max_epochs, learning_rate, validation_fraction,
                                   early_stop_patience, grad_clip_norm, seed)

}  // namespace mmconcept::nn
