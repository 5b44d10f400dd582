#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "pclmatch/corpus.hpp"

namespace pclmatch {

// Correction branch applied on top of the label-smoothing loss, selected by
// the (true label, predicted label) pair. Config files use the compact
// tokens C1/C2/C3.
enum class Condition {
  kBonus,    // C1: prediction erred toward the nearer label; loss is reduced
  kPenalty,  // C2: prediction erred toward the farther label; loss is increased
  kNeutral,  // C3: no correction
};

std::string_view to_config_token(Condition c);
Condition condition_from_token(std::string_view token);

// table[true_label][predicted_label] -> Condition
using ConditionTable = std::array<std::array<Condition, 3>, 3>;

ConditionTable default_condition_table();

// Rejects tables that break the fixed anchor cells: the diagonal is neutral,
// (2->0) and (1->0) are penalties, (1->2) is a bonus, and (0->2) must be
// strictly harsher than (0->1).
void validate_condition_table(const ConditionTable& table);

Condition classify_condition(int y, int y_hat, const ConditionTable& table);

enum class CorrectionMode { kAdditive, kMultiplicative };
enum class CorrectionScope { kGlobal, kBatch };

CorrectionMode correction_mode_from_string(std::string_view s);
CorrectionScope correction_scope_from_string(std::string_view s);
std::string_view to_string(CorrectionMode mode);
std::string_view to_string(CorrectionScope scope);

struct PclConfig {
  double alpha = 0.1;    // label-smoothing factor, in [0, 1)
  double epsilon = 0.1;  // correction scaling ratio, >= 0
  CorrectionMode mode = CorrectionMode::kAdditive;
  CorrectionScope scope = CorrectionScope::kGlobal;
  bool clamp_nonnegative = false;
  ConditionTable table = default_condition_table();

  void validate() const;
};

// Dataset-derived correction constants. Both are fixed for a given label
// distribution and do not depend on model parameters.
struct PropensityTerms {
  LabelCounts counts;
  double epsilon = 0.0;
  double pcl_plus = 0.0;   // penalty constant: epsilon * n0 / (n1 + n2)
  double pcl_minus = 0.0;  // bonus constant:   epsilon * (n0 + n2) / n1
};

PropensityTerms propensity_terms(const LabelCounts& counts, double epsilon);

// q(k) = (1 - alpha) * [k == y] + alpha / 3
std::array<double, 3> smoothed_targets(int y, double alpha);

struct LsResult {
  double value = 0.0;
  std::array<double, 3> grad{};  // softmax(logits) - q
};

// Cross-entropy against the smoothed target distribution, max-shifted for
// stability. Throws on non-finite logits.
LsResult label_smoothing_loss(const std::array<double, 3>& logits, int y, double alpha);

// Argmax with ties broken toward the smallest label index.
int argmax_label(const std::array<double, 3>& logits);

struct PerSampleLoss {
  double ls_value = 0.0;
  Condition condition = Condition::kNeutral;
  double corrected_value = 0.0;
  std::array<double, 3> grad_logits{};
};

// Correction applied with the prediction taken from argmax(logits).
PerSampleLoss pcl_loss(const std::array<double, 3>& logits, int y, const PropensityTerms& terms,
                       const PclConfig& cfg);

// Same, but with an explicitly supplied predicted label (used to probe the
// correction at a forced prediction).
PerSampleLoss pcl_loss_at(const std::array<double, 3>& logits, int y, int y_hat,
                          const PropensityTerms& terms, const PclConfig& cfg);

struct BatchLoss {
  double value = 0.0;                               // mean corrected loss
  std::vector<PerSampleLoss> per_sample;            // diagnostics, unscaled
  std::vector<std::array<double, 3>> grad_logits;   // gradient of the mean
};

// Mean corrected loss over the batch, summed in index order. Global scope
// uses the supplied dataset counts; batch scope re-derives counts from the
// batch labels and fails if the bonus denominator (label-1 count) is zero.
BatchLoss batch_loss(const std::vector<std::array<double, 3>>& logits,
                     const std::vector<int>& labels, const PclConfig& cfg,
                     const LabelCounts* global_counts);

}  // namespace pclmatch
