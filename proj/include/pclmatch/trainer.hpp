#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pclmatch/corpus.hpp"
#include "pclmatch/encoder.hpp"
#include "pclmatch/losses.hpp"

namespace pclmatch {

enum class OptimizerKind { kSgd, kAdam };
enum class LossKind { kLabelSmoothing, kPcl };

OptimizerKind optimizer_kind_from_string(std::string_view s);
std::string_view to_string(OptimizerKind kind);
LossKind loss_kind_from_string(std::string_view s);
std::string_view to_string(LossKind kind);

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int patience = 3;
  std::uint64_t seed = 42;
  LossKind loss_kind = LossKind::kPcl;
  PclConfig loss;
  EncoderConfig encoder;
  TokenizeMode tokenize_mode = TokenizeMode::kChar;
  std::string model_tag = "tiny";

  void validate() const;
};

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  std::int64_t step = 0;
  EncoderParams m;  // first moment (adam only)
  EncoderParams v;  // second moment
};

OptimizerState init_optimizer(const EncoderParams& params, const TrainConfig& cfg);

// In-place parameter update; throws on non-finite gradients, reporting the
// step index.
void optimizer_step(EncoderParams& params, const EncoderParams& grads, OptimizerState& state,
                    const TrainConfig& cfg);

// 3x3 counts, rows = gold label, columns = predicted label.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, 3>, 3> m{};

  void add(int gold, int predicted);
  std::int64_t total() const;
  std::int64_t trace() const;
};

// All values are percentage points in [0, 100]. The 0/0 precision/recall/F1
// case is defined as 0.
struct MetricsReport {
  std::array<double, 3> precision{};
  std::array<double, 3> recall{};
  std::array<double, 3> f1{};
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

MetricsReport metrics_from_confusion(const ConfusionMatrix& confusion);
MetricsReport metrics_from_predictions(const std::vector<int>& gold,
                                       const std::vector<int>& predicted);
std::string render_confusion(const ConfusionMatrix& confusion);
std::string metrics_record_json(const MetricsReport& report);

MetricsReport evaluate(const EncoderParams& params, const std::vector<Example>& examples,
                       const Vocab& vocab, TokenizeMode mode, int batch_size = 64);
MetricsReport evaluate_sequences(const EncoderParams& params,
                                 const std::vector<InputSequence>& sequences,
                                 const std::vector<int>& labels, int batch_size = 64);

struct EpochRecord {
  int epoch = 0;           // 1-based
  double train_loss = 0.0; // mean per-batch corrected loss
  double dev_macro_f1 = 0.0;
  double dev_accuracy = 0.0;
};

struct TrainResult {
  EncoderParams params;  // best-dev checkpoint
  Vocab vocab;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_dev_macro_f1 = 0.0;
};

// Per-optimizer-step hook: 1-based step index, parameters after the update,
// and the batch loss just consumed.
using StepObserver = std::function<void(std::int64_t step, const EncoderParams& params,
                                        const BatchLoss& batch)>;
using EpochObserver = std::function<void(const EpochRecord& record)>;

// Fine-tuning loop: vocab from the train split, per-epoch seeded shuffling,
// best-dev-macro-F1 model selection with early stopping. Global correction
// scope uses the train split's label counts.
TrainResult train(const TrainConfig& cfg, const std::vector<Example>& train_set,
                  const std::vector<Example>& dev_set, const StepObserver& on_step = {},
                  const EpochObserver& on_epoch = {});

struct AblationRow {
  std::string model_tag;
  std::string loss_tag;  // ls | pcl-additive | pcl-multiplicative
  std::uint64_t seed = 0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  double run_seconds = 0.0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<std::string> loss_tags;
  std::vector<std::uint64_t> seeds;
};

// Applies a loss tag to a base config (everything else untouched).
TrainConfig config_for_loss_tag(const TrainConfig& base, const std::string& tag);

// Trains every loss tag x seed combination (identical data and encoder) and
// reports test-split metrics per run. `jobs` > 1 fans runs out across
// threads; each run keeps isolated state, so results are independent of the
// schedule.
AblationResult ablate(const TrainConfig& base, const std::vector<Example>& train_set,
                      const std::vector<Example>& dev_set, const std::vector<Example>& test_set,
                      const std::vector<std::string>& loss_tags,
                      const std::vector<std::uint64_t>& seeds, int jobs = 1,
                      const std::function<void(const AblationRow&)>& on_row = {});

double mean_metric(const AblationResult& result, const std::string& loss_tag, bool accuracy);

// Markdown table with per-loss means and baseline-relative deltas rendered
// as "70.03 (+2.09)".
std::string render_ablation_markdown(const AblationResult& result,
                                     const std::string& baseline_tag);
std::string format_with_delta(double value, std::optional<double> baseline);

}  // namespace pclmatch
