#include "pclmatch/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pclmatch/losses.hpp"

namespace pclmatch {

namespace {

constexpr double kFdStep = 1e-5;

double batch_ls_value(const EncoderParams& params, const std::vector<InputSequence>& batch,
                      const std::vector<int>& labels, double alpha) {
  const auto fwd = forward(params, batch, /*train_mode=*/false);
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    sum += label_smoothing_loss(fwd.logits[i], labels[i], alpha).value;
  }
  return sum / static_cast<double>(batch.size());
}

}  // namespace

GradCheckResult grad_check(const EncoderParams& params, const std::vector<InputSequence>& batch,
                           const std::vector<int>& labels, double alpha, int coords,
                           std::uint64_t coord_seed) {
  // Analytic gradient of the mean loss.
  const auto fwd = forward(params, batch, /*train_mode=*/false);
  std::vector<std::array<double, 3>> grad_logits(batch.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto ls = label_smoothing_loss(fwd.logits[i], labels[i], alpha);
    for (int k = 0; k < 3; ++k) {
      grad_logits[i][static_cast<std::size_t>(k)] = ls.grad[static_cast<std::size_t>(k)] * inv_n;
    }
  }
  const EncoderParams analytic = backward(params, fwd.cache, grad_logits);

  // Probe random coordinates with central differences.
  EncoderParams probe = params;
  auto probe_entries = tensor_entries(probe);
  const auto analytic_entries = tensor_entries(analytic);

  Rng rng(coord_seed);
  GradCheckResult result;
  for (int c = 0; c < coords; ++c) {
    const auto t = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(probe_entries.size()) - 1));
    auto& values = probe_entries[t].second->v;
    const auto i = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(values.size()) - 1));

    const double saved = values[i];
    values[i] = saved + kFdStep;
    const double up = batch_ls_value(probe, batch, labels, alpha);
    values[i] = saved - kFdStep;
    const double down = batch_ls_value(probe, batch, labels, alpha);
    values[i] = saved;

    const double numeric = (up - down) / (2.0 * kFdStep);
    const double a = analytic_entries[t].second->v[i];
    const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
    result.max_rel_err = std::max(result.max_rel_err, rel);
    ++result.coords_checked;
  }
  return result;
}

GradCheckResult grad_check_random_config(std::uint64_t seed, int coords_per_config,
                                         int config_count) {
  GradCheckResult total;
  for (int c = 0; c < config_count; ++c) {
    Rng rng(derive_seed(seed, "gradcheck", static_cast<std::uint64_t>(c)));
    EncoderConfig cfg;
    cfg.vocab_size = 32;
    cfg.heads = 2;
    cfg.dim = 2 * static_cast<int>(rng.uniform_int(4, 8));  // 8..16
    cfg.layers = static_cast<int>(rng.uniform_int(1, 2));
    cfg.ffn_dim = static_cast<int>(rng.uniform_int(16, 32));
    cfg.max_len = 16;
    cfg.dropout_rate = 0.0;

    EncoderParams params = init_params(cfg, rng.next_u64());

    std::vector<InputSequence> batch;
    std::vector<int> labels;
    const int rows = static_cast<int>(rng.uniform_int(2, 3));
    for (int r = 0; r < rows; ++r) {
      std::vector<int> s1;
      std::vector<int> s2;
      const auto len1 = rng.uniform_int(1, 4);
      const auto len2 = rng.uniform_int(1, 6);
      for (std::int64_t t = 0; t < len1; ++t) {
        s1.push_back(static_cast<int>(rng.uniform_int(Vocab::kNumSpecials, cfg.vocab_size - 1)));
      }
      for (std::int64_t t = 0; t < len2; ++t) {
        s2.push_back(static_cast<int>(rng.uniform_int(Vocab::kNumSpecials, cfg.vocab_size - 1)));
      }
      auto seq = assemble_input(s1, s2, cfg.max_len);
      if (r == 0) {
        // Exercise the padding mask path in one row.
        seq.ids.resize(static_cast<std::size_t>(cfg.max_len), Vocab::kPad);
        seq.length = cfg.max_len;
      }
      batch.push_back(std::move(seq));
      labels.push_back(static_cast<int>(rng.uniform_int(0, 2)));
    }

    const auto one = grad_check(params, batch, labels, /*alpha=*/0.1, coords_per_config,
                                rng.next_u64());
    total.max_rel_err = std::max(total.max_rel_err, one.max_rel_err);
    total.coords_checked += one.coords_checked;
  }
  return total;
}

}  // namespace pclmatch
