#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pclmatch/corpus.hpp"
#include "pclmatch/rng.hpp"
#include "pclmatch/tensor.hpp"

namespace pclmatch {

struct EncoderConfig {
  int vocab_size = 0;
  int dim = 64;
  int layers = 2;
  int heads = 2;
  int ffn_dim = 256;
  int max_len = 64;
  double dropout_rate = 0.0;
  static constexpr int kNumClasses = 3;

  int head_dim() const { return dim / heads; }
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

struct LayerParams {
  Tensor ln1_g, ln1_b;      // 1 x dim
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // dim x dim / 1 x dim
  Tensor ln2_g, ln2_b;      // 1 x dim
  Tensor w1, b1;            // dim x ffn_dim / 1 x ffn_dim
  Tensor w2, b2;            // ffn_dim x dim / 1 x dim
};

// Every trainable tensor of the pair encoder: embeddings, a stack of
// pre-layer-norm blocks, a final layer norm, and the 3-way head applied to
// the position-0 state. Doubles throughout.
struct EncoderParams {
  EncoderConfig cfg;
  Tensor tok_emb;           // vocab_size x dim
  Tensor pos_emb;           // max_len x dim
  std::vector<LayerParams> layers;
  Tensor lnf_g, lnf_b;      // 1 x dim
  Tensor head_w;            // dim x 3
  Tensor head_b;            // 1 x 3
};

// Named tensors in declaration order (checkpoint layout, optimizer state and
// coordinate sampling all follow this order).
std::vector<std::pair<std::string, Tensor*>> tensor_entries(EncoderParams& p);
std::vector<std::pair<std::string, const Tensor*>> tensor_entries(const EncoderParams& p);

// Weights ~ N(0, 1/sqrt(dim)), norm gains 1, all biases 0. Deterministic per
// seed.
EncoderParams init_params(const EncoderConfig& cfg, std::uint64_t seed);
EncoderParams zeros_like(const EncoderParams& p);

struct LayerCache {
  Tensor xhat1, a;          // T x dim (layer-norm normalized values / output)
  std::vector<double> rstd1;
  Tensor q, k, v;           // T x dim
  Tensor probs;             // (heads*T) x T attention weights, zero at padding
  Tensor ctx;               // T x dim
  Tensor attn_mask;         // dropout keep-mask (empty when inactive)
  Tensor xhat2;             // T x dim
  std::vector<double> rstd2;
  Tensor bln;               // T x dim (second layer-norm output)
  Tensor h1, act;           // T x ffn_dim
  Tensor ffn_mask;
};

struct RowCache {
  std::vector<int> ids;
  std::vector<LayerCache> layers;
  std::vector<double> xhat_f;  // final layer norm at position 0
  double rstd_f = 0.0;
  std::vector<double> u;       // normalized position-0 state fed to the head
};

struct ForwardCache {
  EncoderConfig cfg;
  bool train_mode = false;
  std::vector<RowCache> rows;
};

struct ForwardResult {
  std::vector<std::array<double, 3>> logits;
  ForwardCache cache;
};

// Pre-LN blocks: x + Attn(LN(x)), then x + FFN(LN(x)); attention ignores
// [PAD] keys entirely, so appending padding cannot change the logits. The
// classifier head reads the final-LN state at position 0. `dropout_rng` is
// only consumed when train_mode is set and cfg.dropout_rate > 0.
ForwardResult forward(const EncoderParams& params, const std::vector<InputSequence>& batch,
                      bool train_mode, Rng* dropout_rng = nullptr);

// Exact reverse-mode gradient of sum_i logits_i . grad_logits_i with respect
// to every parameter.
EncoderParams backward(const EncoderParams& params, const ForwardCache& cache,
                       const std::vector<std::array<double, 3>>& grad_logits);

// Per-row argmax, ties toward the smaller label.
std::vector<int> predict(const EncoderParams& params, const std::vector<InputSequence>& batch);

// Single-file checkpoint: magic + config echo + named arrays in declaration
// order, little-endian 64-bit floats.
void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_checkpoint(const std::filesystem::path& path);
EncoderParams load_checkpoint(const std::filesystem::path& path, const EncoderConfig& expected);

}  // namespace pclmatch
