#include "pclmatch/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pclmatch {

namespace {

void check_label(int y, const char* what) {
  if (y < 0 || y > 2) {
    throw std::invalid_argument(std::string(what) + " out of range: " + std::to_string(y));
  }
}

// Harshness rank of a branch: bonus < neutral < penalty.
int severity(Condition c) {
  switch (c) {
    case Condition::kBonus: return -1;
    case Condition::kNeutral: return 0;
    case Condition::kPenalty: return 1;
  }
  return 0;
}

}  // namespace

std::string_view to_config_token(Condition c) {
  switch (c) {
    case Condition::kBonus: return "C1";
    case Condition::kPenalty: return "C2";
    case Condition::kNeutral: return "C3";
  }
  return "C3";
}

Condition condition_from_token(std::string_view token) {
  if (token == "C1") return Condition::kBonus;
  if (token == "C2") return Condition::kPenalty;
  if (token == "C3") return Condition::kNeutral;
  throw std::invalid_argument("unknown condition token: \"" + std::string(token) +
                              "\" (expected C1|C2|C3)");
}

ConditionTable default_condition_table() {
  constexpr auto B = Condition::kBonus;
  constexpr auto P = Condition::kPenalty;
  constexpr auto N = Condition::kNeutral;
  // Rows: true label. Columns: predicted label. Errors that land on label 0
  // or jump the full ordinal range are penalized; errors toward the nearer
  // label earn the bonus.
  return ConditionTable{{
      {{N, B, P}},  // true 0
      {{P, N, B}},  // true 1
      {{P, B, N}},  // true 2
  }};
}

void validate_condition_table(const ConditionTable& table) {
  for (int k = 0; k < 3; ++k) {
    if (table[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)] != Condition::kNeutral) {
      throw std::invalid_argument("condition table: diagonal entry t" + std::to_string(k) + "p" +
                                  std::to_string(k) + " must be C3");
    }
  }
  if (table[2][0] != Condition::kPenalty) {
    throw std::invalid_argument("condition table: t2p0 must be C2 (penalty)");
  }
  if (table[1][0] != Condition::kPenalty) {
    throw std::invalid_argument("condition table: t1p0 must be C2 (penalty)");
  }
  if (table[1][2] != Condition::kBonus) {
    throw std::invalid_argument("condition table: t1p2 must be C1 (bonus)");
  }
  if (severity(table[0][2]) <= severity(table[0][1])) {
    throw std::invalid_argument("condition table: t0p2 must be harsher than t0p1");
  }
}

Condition classify_condition(int y, int y_hat, const ConditionTable& table) {
  check_label(y, "true label");
  check_label(y_hat, "predicted label");
  return table[static_cast<std::size_t>(y)][static_cast<std::size_t>(y_hat)];
}

CorrectionMode correction_mode_from_string(std::string_view s) {
  if (s == "additive") return CorrectionMode::kAdditive;
  if (s == "multiplicative") return CorrectionMode::kMultiplicative;
  throw std::invalid_argument("unknown correction mode: \"" + std::string(s) +
                              "\" (expected additive|multiplicative)");
}

CorrectionScope correction_scope_from_string(std::string_view s) {
  if (s == "global") return CorrectionScope::kGlobal;
  if (s == "batch") return CorrectionScope::kBatch;
  throw std::invalid_argument("unknown correction scope: \"" + std::string(s) +
                              "\" (expected global|batch)");
}

std::string_view to_string(CorrectionMode mode) {
  return mode == CorrectionMode::kAdditive ? "additive" : "multiplicative";
}

std::string_view to_string(CorrectionScope scope) {
  return scope == CorrectionScope::kGlobal ? "global" : "batch";
}

void PclConfig::validate() const {
  if (!(alpha >= 0.0) || alpha >= 1.0) {
    throw std::invalid_argument("loss.alpha must lie in [0, 1)");
  }
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("loss.epsilon must be a finite value >= 0");
  }
  validate_condition_table(table);
}

PropensityTerms propensity_terms(const LabelCounts& counts, double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("epsilon must be a finite value >= 0");
  }
  if (counts.n1 + counts.n2 <= 0) {
    throw std::invalid_argument(
        "pcl_plus undefined: count(label 1) + count(label 2) is zero");
  }
  if (counts.n1 <= 0) {
    throw std::invalid_argument("pcl_minus undefined: count(label 1) is zero");
  }
  PropensityTerms terms;
  terms.counts = counts;
  terms.epsilon = epsilon;
  terms.pcl_plus = epsilon * static_cast<double>(counts.n0) /
                   static_cast<double>(counts.n1 + counts.n2);
  terms.pcl_minus = epsilon * static_cast<double>(counts.n0 + counts.n2) /
                    static_cast<double>(counts.n1);
  return terms;
}

std::array<double, 3> smoothed_targets(int y, double alpha) {
  check_label(y, "label");
  if (!(alpha >= 0.0) || alpha >= 1.0) {
    throw std::invalid_argument("alpha must lie in [0, 1)");
  }
  std::array<double, 3> q{alpha / 3.0, alpha / 3.0, alpha / 3.0};
  q[static_cast<std::size_t>(y)] += 1.0 - alpha;
  return q;
}

LsResult label_smoothing_loss(const std::array<double, 3>& logits, int y, double alpha) {
  check_label(y, "label");
  for (double x : logits) {
    if (!std::isfinite(x)) throw std::invalid_argument("label_smoothing_loss: non-finite logit");
  }
  const double m = std::max({logits[0], logits[1], logits[2]});
  std::array<double, 3> shifted{logits[0] - m, logits[1] - m, logits[2] - m};
  const double lse =
      std::log(std::exp(shifted[0]) + std::exp(shifted[1]) + std::exp(shifted[2]));
  std::array<double, 3> logp{shifted[0] - lse, shifted[1] - lse, shifted[2] - lse};

  double sum_logp = logp[0] + logp[1] + logp[2];
  LsResult out;
  out.value = -(1.0 - alpha) * logp[static_cast<std::size_t>(y)] - (alpha / 3.0) * sum_logp;
  const auto q = smoothed_targets(y, alpha);
  for (int k = 0; k < 3; ++k) {
    out.grad[static_cast<std::size_t>(k)] =
        std::exp(logp[static_cast<std::size_t>(k)]) - q[static_cast<std::size_t>(k)];
  }
  return out;
}

int argmax_label(const std::array<double, 3>& logits) {
  int best = 0;
  for (int k = 1; k < 3; ++k) {
    if (logits[static_cast<std::size_t>(k)] > logits[static_cast<std::size_t>(best)]) best = k;
  }
  return best;
}

PerSampleLoss pcl_loss_at(const std::array<double, 3>& logits, int y, int y_hat,
                          const PropensityTerms& terms, const PclConfig& cfg) {
  check_label(y_hat, "predicted label");
  if (terms.epsilon != cfg.epsilon) {
    throw std::invalid_argument("propensity terms were built with a different epsilon");
  }
  if (cfg.mode == CorrectionMode::kMultiplicative && terms.pcl_minus >= 1.0) {
    throw std::invalid_argument(
        "multiplicative mode requires pcl_minus < 1 (the bonus factor would negate the loss)");
  }

  const LsResult ls = label_smoothing_loss(logits, y, cfg.alpha);
  PerSampleLoss out;
  out.ls_value = ls.value;
  out.condition = classify_condition(y, y_hat, cfg.table);
  out.grad_logits = ls.grad;

  if (cfg.mode == CorrectionMode::kAdditive) {
    switch (out.condition) {
      case Condition::kBonus: out.corrected_value = ls.value - terms.pcl_minus; break;
      case Condition::kPenalty: out.corrected_value = ls.value + terms.pcl_plus; break;
      case Condition::kNeutral: out.corrected_value = ls.value; break;
    }
    // The correction is a constant inside the argmax region, so the gradient
    // stays exactly the label-smoothing gradient.
  } else {
    double factor = 1.0;
    switch (out.condition) {
      case Condition::kBonus: factor = 1.0 - terms.pcl_minus; break;
      case Condition::kPenalty: factor = 1.0 + terms.pcl_plus; break;
      case Condition::kNeutral: factor = 1.0; break;
    }
    if (factor == 1.0) {
      out.corrected_value = ls.value;
    } else {
      out.corrected_value = ls.value * factor;
      for (auto& g : out.grad_logits) g *= factor;
    }
  }

  if (cfg.clamp_nonnegative && out.corrected_value < 0.0) {
    out.corrected_value = 0.0;
    out.grad_logits = {0.0, 0.0, 0.0};
  }
  return out;
}

PerSampleLoss pcl_loss(const std::array<double, 3>& logits, int y, const PropensityTerms& terms,
                       const PclConfig& cfg) {
  for (double x : logits) {
    if (!std::isfinite(x)) throw std::invalid_argument("pcl_loss: non-finite logit");
  }
  return pcl_loss_at(logits, y, argmax_label(logits), terms, cfg);
}

BatchLoss batch_loss(const std::vector<std::array<double, 3>>& logits,
                     const std::vector<int>& labels, const PclConfig& cfg,
                     const LabelCounts* global_counts) {
  if (logits.empty()) throw std::invalid_argument("batch_loss: empty batch");
  if (logits.size() != labels.size()) {
    throw std::invalid_argument("batch_loss: logits/labels size mismatch");
  }

  LabelCounts counts;
  if (cfg.scope == CorrectionScope::kGlobal) {
    if (global_counts == nullptr) {
      throw std::invalid_argument("batch_loss: global scope requires dataset label counts");
    }
    counts = *global_counts;
  } else {
    for (int y : labels) {
      check_label(y, "label");
      if (y == 0) ++counts.n0;
      else if (y == 1) ++counts.n1;
      else ++counts.n2;
    }
  }
  const PropensityTerms terms = propensity_terms(counts, cfg.epsilon);

  BatchLoss out;
  out.per_sample.reserve(logits.size());
  out.grad_logits.resize(logits.size());
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    PerSampleLoss per = pcl_loss(logits[i], labels[i], terms, cfg);
    sum += per.corrected_value;
    for (int k = 0; k < 3; ++k) {
      out.grad_logits[i][static_cast<std::size_t>(k)] =
          per.grad_logits[static_cast<std::size_t>(k)] * inv_n;
    }
    out.per_sample.push_back(per);
  }
  out.value = sum * inv_n;
  return out;
}

}  // namespace pclmatch
