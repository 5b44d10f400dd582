#include "pclmatch/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace pclmatch {

OptimizerKind optimizer_kind_from_string(std::string_view s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw std::invalid_argument("unknown optimizer: \"" + std::string(s) + "\" (expected sgd|adam)");
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kSgd ? "sgd" : "adam";
}

LossKind loss_kind_from_string(std::string_view s) {
  if (s == "ls") return LossKind::kLabelSmoothing;
  if (s == "pcl") return LossKind::kPcl;
  throw std::invalid_argument("unknown loss kind: \"" + std::string(s) + "\" (expected ls|pcl)");
}

std::string_view to_string(LossKind kind) {
  return kind == LossKind::kLabelSmoothing ? "ls" : "pcl";
}

void TrainConfig::validate() const {
  if (epochs <= 0) throw std::invalid_argument("train.epochs must be positive");
  if (batch_size <= 0) throw std::invalid_argument("train.batch_size must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train.learning_rate must be positive");
  if (patience < 1) throw std::invalid_argument("train.patience must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("train.adam_eps must be positive");
  loss.validate();
}

OptimizerState init_optimizer(const EncoderParams& params, const TrainConfig& cfg) {
  OptimizerState state;
  state.kind = cfg.optimizer;
  state.step = 0;
  if (cfg.optimizer == OptimizerKind::kAdam) {
    state.m = zeros_like(params);
    state.v = zeros_like(params);
  }
  return state;
}

void optimizer_step(EncoderParams& params, const EncoderParams& grads, OptimizerState& state,
                    const TrainConfig& cfg) {
  ++state.step;
  const auto grad_entries = tensor_entries(grads);
  for (const auto& [name, g] : grad_entries) {
    for (double x : g->v) {
      if (!std::isfinite(x)) {
        throw std::runtime_error("non-finite gradient in " + name + " at optimizer step " +
                                 std::to_string(state.step));
      }
    }
  }

  auto param_entries = tensor_entries(params);
  if (state.kind == OptimizerKind::kSgd) {
    for (std::size_t t = 0; t < param_entries.size(); ++t) {
      auto& pv = param_entries[t].second->v;
      const auto& gv = grad_entries[t].second->v;
      for (std::size_t i = 0; i < pv.size(); ++i) pv[i] -= cfg.learning_rate * gv[i];
    }
    return;
  }

  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  auto m_entries = tensor_entries(state.m);
  auto v_entries = tensor_entries(state.v);
  for (std::size_t t = 0; t < param_entries.size(); ++t) {
    auto& pv = param_entries[t].second->v;
    const auto& gv = grad_entries[t].second->v;
    auto& mv = m_entries[t].second->v;
    auto& vv = v_entries[t].second->v;
    for (std::size_t i = 0; i < pv.size(); ++i) {
      mv[i] = b1 * mv[i] + (1.0 - b1) * gv[i];
      vv[i] = b2 * vv[i] + (1.0 - b2) * gv[i] * gv[i];
      const double mhat = mv[i] / bc1;
      const double vhat = vv[i] / bc2;
      pv[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

void ConfusionMatrix::add(int gold, int predicted) {
  if (gold < 0 || gold > 2 || predicted < 0 || predicted > 2) {
    throw std::invalid_argument("confusion matrix labels must lie in {0,1,2}");
  }
  ++m[static_cast<std::size_t>(gold)][static_cast<std::size_t>(predicted)];
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (const auto& row : m) {
    for (auto x : row) n += x;
  }
  return n;
}

std::int64_t ConfusionMatrix::trace() const { return m[0][0] + m[1][1] + m[2][2]; }

MetricsReport metrics_from_confusion(const ConfusionMatrix& confusion) {
  MetricsReport report;
  report.confusion = confusion;
  const auto& m = confusion.m;
  double f1_sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const double tp = static_cast<double>(m[kk][kk]);
    double fp = 0.0;
    double fn = 0.0;
    for (int j = 0; j < 3; ++j) {
      if (j == k) continue;
      fp += static_cast<double>(m[static_cast<std::size_t>(j)][kk]);
      fn += static_cast<double>(m[kk][static_cast<std::size_t>(j)]);
    }
    const double precision = (tp + fp) > 0.0 ? tp / (tp + fp) : 0.0;
    const double recall = (tp + fn) > 0.0 ? tp / (tp + fn) : 0.0;
    const double f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    report.precision[kk] = 100.0 * precision;
    report.recall[kk] = 100.0 * recall;
    report.f1[kk] = 100.0 * f1;
    f1_sum += report.f1[kk];
  }
  report.macro_f1 = f1_sum / 3.0;
  const auto total = confusion.total();
  report.accuracy = total > 0 ? 100.0 * static_cast<double>(confusion.trace()) /
                                    static_cast<double>(total)
                              : 0.0;
  return report;
}

MetricsReport metrics_from_predictions(const std::vector<int>& gold,
                                       const std::vector<int>& predicted) {
  if (gold.size() != predicted.size()) {
    throw std::invalid_argument("metrics: gold/predicted size mismatch");
  }
  if (gold.empty()) throw std::invalid_argument("metrics: empty prediction list");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gold.size(); ++i) cm.add(gold[i], predicted[i]);
  return metrics_from_confusion(cm);
}

std::string render_confusion(const ConfusionMatrix& confusion) {
  std::ostringstream out;
  out << "            pred 0    pred 1    pred 2\n";
  for (int g = 0; g < 3; ++g) {
    out << "gold " << g << "  ";
    for (int p = 0; p < 3; ++p) {
      out << std::setw(10) << confusion.m[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
    }
    out << '\n';
  }
  return out.str();
}

std::string metrics_record_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["macro_f1"] = r.macro_f1;
  j["accuracy"] = r.accuracy;
  j["per_class_precision"] = {r.precision[0], r.precision[1], r.precision[2]};
  j["per_class_recall"] = {r.recall[0], r.recall[1], r.recall[2]};
  j["per_class_f1"] = {r.f1[0], r.f1[1], r.f1[2]};
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (int g = 0; g < 3; ++g) {
    rows.push_back({r.confusion.m[static_cast<std::size_t>(g)][0],
                    r.confusion.m[static_cast<std::size_t>(g)][1],
                    r.confusion.m[static_cast<std::size_t>(g)][2]});
  }
  j["confusion"] = rows;
  return j.dump();
}

namespace {

std::vector<InputSequence> encode_examples(const std::vector<Example>& examples,
                                           const Vocab& vocab, TokenizeMode mode, int max_len) {
  std::vector<InputSequence> sequences;
  sequences.reserve(examples.size());
  for (const auto& ex : examples) {
    const auto s1 = vocab.encode(tokenize(ex.query, mode));
    const auto s2 = vocab.encode(tokenize(ex.title, mode));
    sequences.push_back(assemble_input(s1, s2, max_len));
  }
  return sequences;
}

}  // namespace

MetricsReport evaluate_sequences(const EncoderParams& params,
                                 const std::vector<InputSequence>& sequences,
                                 const std::vector<int>& labels, int batch_size) {
  if (sequences.empty()) throw std::invalid_argument("evaluate: empty input");
  if (sequences.size() != labels.size()) {
    throw std::invalid_argument("evaluate: sequences/labels size mismatch");
  }
  std::vector<int> predictions;
  predictions.reserve(sequences.size());
  for (std::size_t start = 0; start < sequences.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(sequences.size(), start + static_cast<std::size_t>(batch_size));
    const std::vector<InputSequence> chunk(sequences.begin() + static_cast<std::ptrdiff_t>(start),
                                           sequences.begin() + static_cast<std::ptrdiff_t>(end));
    const auto preds = predict(params, chunk);
    predictions.insert(predictions.end(), preds.begin(), preds.end());
  }
  return metrics_from_predictions(labels, predictions);
}

MetricsReport evaluate(const EncoderParams& params, const std::vector<Example>& examples,
                       const Vocab& vocab, TokenizeMode mode, int batch_size) {
  if (examples.empty()) throw std::invalid_argument("evaluate: empty example list");
  const auto sequences = encode_examples(examples, vocab, mode, params.cfg.max_len);
  std::vector<int> labels;
  labels.reserve(examples.size());
  for (const auto& ex : examples) labels.push_back(ex.label);
  return evaluate_sequences(params, sequences, labels, batch_size);
}

TrainResult train(const TrainConfig& cfg, const std::vector<Example>& train_set,
                  const std::vector<Example>& dev_set, const StepObserver& on_step,
                  const EpochObserver& on_epoch) {
  cfg.validate();
  if (train_set.empty() || dev_set.empty()) {
    throw std::invalid_argument("train: empty train or dev split");
  }

  TrainResult result;
  result.vocab = Vocab::from_examples(train_set, cfg.tokenize_mode);

  EncoderConfig enc_cfg = cfg.encoder;
  enc_cfg.vocab_size = result.vocab.size();
  enc_cfg.validate();

  const auto train_seqs = encode_examples(train_set, result.vocab, cfg.tokenize_mode, enc_cfg.max_len);
  const auto dev_seqs = encode_examples(dev_set, result.vocab, cfg.tokenize_mode, enc_cfg.max_len);
  std::vector<int> train_labels;
  train_labels.reserve(train_set.size());
  for (const auto& ex : train_set) train_labels.push_back(ex.label);
  std::vector<int> dev_labels;
  dev_labels.reserve(dev_set.size());
  for (const auto& ex : dev_set) dev_labels.push_back(ex.label);

  const LabelCounts global_counts = label_counts(train_set);

  EncoderParams params = init_params(enc_cfg, derive_seed(cfg.seed, "init"));
  OptimizerState opt = init_optimizer(params, cfg);
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));

  EncoderParams best_params = params;
  double best_f1 = -1.0;
  int best_epoch = 0;
  int epochs_without_improvement = 0;

  std::vector<std::size_t> order(train_seqs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::int64_t batches = 0;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<InputSequence> batch;
      std::vector<int> labels;
      batch.reserve(end - start);
      labels.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train_seqs[order[i]]);
        labels.push_back(train_labels[order[i]]);
      }

      auto fwd = forward(params, batch, /*train_mode=*/true, &dropout_rng);

      BatchLoss bl;
      if (cfg.loss_kind == LossKind::kLabelSmoothing) {
        // Plain label smoothing: same reduction, no correction of any kind.
        bl.per_sample.reserve(batch.size());
        bl.grad_logits.resize(batch.size());
        const double inv_n = 1.0 / static_cast<double>(batch.size());
        double sum = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
          const LsResult ls = label_smoothing_loss(fwd.logits[i], labels[i], cfg.loss.alpha);
          sum += ls.value;
          PerSampleLoss per;
          per.ls_value = ls.value;
          per.condition = Condition::kNeutral;
          per.corrected_value = ls.value;
          per.grad_logits = ls.grad;
          bl.per_sample.push_back(per);
          for (int k = 0; k < 3; ++k) {
            bl.grad_logits[i][static_cast<std::size_t>(k)] = ls.grad[static_cast<std::size_t>(k)] * inv_n;
          }
        }
        bl.value = sum * inv_n;
      } else {
        bl = batch_loss(fwd.logits, labels, cfg.loss, &global_counts);
      }

      const EncoderParams grads = backward(params, fwd.cache, bl.grad_logits);
      optimizer_step(params, grads, opt, cfg);
      loss_sum += bl.value;
      ++batches;
      if (on_step) on_step(opt.step, params, bl);
    }

    const MetricsReport dev = evaluate_sequences(params, dev_seqs, dev_labels);
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(batches);
    record.dev_macro_f1 = dev.macro_f1;
    record.dev_accuracy = dev.accuracy;
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);

    if (dev.macro_f1 > best_f1) {
      best_f1 = dev.macro_f1;
      best_epoch = epoch;
      best_params = params;
      epochs_without_improvement = 0;
    } else {
      ++epochs_without_improvement;
      if (epochs_without_improvement >= cfg.patience) break;
    }
  }

  result.params = std::move(best_params);
  result.best_epoch = best_epoch;
  result.best_dev_macro_f1 = best_f1;
  return result;
}

TrainConfig config_for_loss_tag(const TrainConfig& base, const std::string& tag) {
  TrainConfig cfg = base;
  if (tag == "ls") {
    cfg.loss_kind = LossKind::kLabelSmoothing;
  } else if (tag == "pcl-additive") {
    cfg.loss_kind = LossKind::kPcl;
    cfg.loss.mode = CorrectionMode::kAdditive;
  } else if (tag == "pcl-multiplicative") {
    cfg.loss_kind = LossKind::kPcl;
    cfg.loss.mode = CorrectionMode::kMultiplicative;
  } else {
    throw std::invalid_argument("unknown loss tag: \"" + tag +
                                "\" (expected ls|pcl-additive|pcl-multiplicative)");
  }
  return cfg;
}

AblationResult ablate(const TrainConfig& base, const std::vector<Example>& train_set,
                      const std::vector<Example>& dev_set, const std::vector<Example>& test_set,
                      const std::vector<std::string>& loss_tags,
                      const std::vector<std::uint64_t>& seeds, int jobs,
                      const std::function<void(const AblationRow&)>& on_row) {
  if (loss_tags.empty() || seeds.empty()) {
    throw std::invalid_argument("ablate: need at least one loss tag and one seed");
  }
  if (test_set.empty()) throw std::invalid_argument("ablate: empty test split");
  for (const auto& tag : loss_tags) (void)config_for_loss_tag(base, tag);  // validate early

  struct Task {
    std::string tag;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const auto& tag : loss_tags) {
    for (auto seed : seeds) tasks.push_back(Task{tag, seed});
  }

  AblationResult result;
  result.loss_tags = loss_tags;
  result.seeds = seeds;
  result.rows.resize(tasks.size());

  std::mutex row_mutex;
  std::size_t next_task = 0;
  std::mutex task_mutex;

  auto worker = [&]() {
    while (true) {
      std::size_t index;
      {
        std::lock_guard<std::mutex> lock(task_mutex);
        if (next_task >= tasks.size()) return;
        index = next_task++;
      }
      const Task& task = tasks[index];
      TrainConfig cfg = config_for_loss_tag(base, task.tag);
      cfg.seed = task.seed;

      const auto t0 = std::chrono::steady_clock::now();
      TrainResult trained = train(cfg, train_set, dev_set);
      const MetricsReport test =
          evaluate(trained.params, test_set, trained.vocab, cfg.tokenize_mode);
      const auto t1 = std::chrono::steady_clock::now();

      AblationRow row;
      row.model_tag = cfg.model_tag;
      row.loss_tag = task.tag;
      row.seed = task.seed;
      row.macro_f1 = test.macro_f1;
      row.accuracy = test.accuracy;
      row.run_seconds = std::chrono::duration<double>(t1 - t0).count();
      {
        std::lock_guard<std::mutex> lock(row_mutex);
        result.rows[index] = row;
        if (on_row) on_row(row);
      }
    }
  };

  const int worker_count = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (worker_count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(worker_count));
    for (int i = 0; i < worker_count; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return result;
}

double mean_metric(const AblationResult& result, const std::string& loss_tag, bool accuracy) {
  double sum = 0.0;
  std::int64_t n = 0;
  for (const auto& row : result.rows) {
    if (row.loss_tag != loss_tag) continue;
    sum += accuracy ? row.accuracy : row.macro_f1;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("no ablation rows for loss tag: " + loss_tag);
  return sum / static_cast<double>(n);
}

std::string format_with_delta(double value, std::optional<double> baseline) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << value;
  if (baseline) {
    const double delta = value - *baseline;
    out << " (" << (delta >= 0.0 ? "+" : "") << delta << ")";
  }
  return out.str();
}

std::string render_ablation_markdown(const AblationResult& result,
                                     const std::string& baseline_tag) {
  const bool has_baseline =
      std::find(result.loss_tags.begin(), result.loss_tags.end(), baseline_tag) !=
      result.loss_tags.end();
  const std::optional<double> base_f1 =
      has_baseline ? std::optional<double>(mean_metric(result, baseline_tag, false)) : std::nullopt;
  const std::optional<double> base_acc =
      has_baseline ? std::optional<double>(mean_metric(result, baseline_tag, true)) : std::nullopt;

  std::ostringstream out;
  out << "| Model | Loss | Seeds | F1 Score | Accuracy |\n";
  out << "|-------|------|-------|----------|----------|\n";
  for (const auto& tag : result.loss_tags) {
    const double f1 = mean_metric(result, tag, false);
    const double acc = mean_metric(result, tag, true);
    std::string model_tag;
    std::int64_t n = 0;
    for (const auto& row : result.rows) {
      if (row.loss_tag == tag) {
        model_tag = row.model_tag;
        ++n;
      }
    }
    const bool is_baseline = tag == baseline_tag;
    out << "| " << model_tag << " | " << tag << " | " << n << " | "
        << format_with_delta(f1, is_baseline ? std::nullopt : base_f1) << " | "
        << format_with_delta(acc, is_baseline ? std::nullopt : base_acc) << " |\n";
  }
  return out.str();
}

}  // namespace pclmatch
