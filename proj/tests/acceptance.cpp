// Acceptance suite: one check per shipped guarantee, one PASS/FAIL line each.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pclmatch/cli.hpp"
#include "pclmatch/config.hpp"
#include "pclmatch/corpus.hpp"
#include "pclmatch/encoder.hpp"
#include "pclmatch/gradcheck.hpp"
#include "pclmatch/losses.hpp"
#include "pclmatch/pretrain.hpp"
#include "pclmatch/rng.hpp"
#include "pclmatch/trainer.hpp"

using namespace pclmatch;

namespace {

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& what) {
  if (!cond) throw CheckFailure(what);
}

void require_close(double a, double b, double tol, const std::string& what) {
  if (!(std::abs(a - b) <= tol)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << ": " << a << " vs " << b << " (tol " << tol << ")";
    throw CheckFailure(msg.str());
  }
}

bool bits_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::uint64_t params_fingerprint(const EncoderParams& p) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& [name, t] : tensor_entries(p)) {
    for (double d : t->v) {
      std::uint64_t bits;
      std::memcpy(&bits, &d, 8);
      h ^= bits;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("pclmatch_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// 1. Propensity constants at the 2:5:1 ratio.
void criterion_propensity_constants() {
  const double expected_plus = 1.0 / 30.0;
  const double expected_minus = 3.0 / 50.0;
  for (std::int64_t scale : {1, 1000, 977}) {
    const LabelCounts counts{2 * scale, 5 * scale, 1 * scale};
    const auto terms = propensity_terms(counts, 0.1);
    require_close(terms.pcl_plus, expected_plus, 1e-12, "pcl_plus");
    require_close(terms.pcl_minus, expected_minus, 1e-12, "pcl_minus");
  }
}

// ---------------------------------------------------------------------------
// 2. Condition table: default sweep plus anchors under accepted user tables.
void criterion_condition_table() {
  const auto table = default_condition_table();
  const Condition expected[3][3] = {
      {Condition::kNeutral, Condition::kBonus, Condition::kPenalty},
      {Condition::kPenalty, Condition::kNeutral, Condition::kBonus},
      {Condition::kPenalty, Condition::kBonus, Condition::kNeutral},
  };
  for (int y = 0; y < 3; ++y) {
    for (int p = 0; p < 3; ++p) {
      require(classify_condition(y, p, table) ==
                  expected[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)],
              "default table sweep at (" + std::to_string(y) + "," + std::to_string(p) + ")");
    }
  }

  auto severity = [](Condition c) {
    return c == Condition::kBonus ? -1 : (c == Condition::kNeutral ? 0 : 1);
  };
  const Condition all[3] = {Condition::kBonus, Condition::kPenalty, Condition::kNeutral};
  int accepted = 0;
  for (Condition c01 : all) {
    for (Condition c02 : all) {
      for (Condition c21 : all) {
        auto candidate = default_condition_table();
        candidate[0][1] = c01;
        candidate[0][2] = c02;
        candidate[2][1] = c21;
        bool ok = true;
        try {
          validate_condition_table(candidate);
        } catch (const std::exception&) {
          ok = false;
        }
        if (!ok) continue;
        ++accepted;
        // The four anchored behaviors hold in every accepted table.
        require(classify_condition(2, 0, candidate) == Condition::kPenalty, "t2p0 anchor");
        require(classify_condition(1, 2, candidate) == Condition::kBonus, "t1p2 anchor");
        require(classify_condition(1, 0, candidate) == Condition::kPenalty, "t1p0 anchor");
        require(severity(classify_condition(0, 2, candidate)) >
                    severity(classify_condition(0, 1, candidate)),
                "t0p2 harsher than t0p1");
      }
    }
  }
  require(accepted > 0, "validation accepts at least one variant table");
}

// ---------------------------------------------------------------------------
// 3. Epsilon 0 degeneracy: per-sample bit equality and byte-identical runs.
void criterion_epsilon_zero() {
  const LabelCounts counts{2, 5, 1};
  const auto terms = propensity_terms(counts, 0.0);
  Rng rng(301);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::array<double, 3> logits{rng.normal(0, 3), rng.normal(0, 3), rng.normal(0, 3)};
    const int y = static_cast<int>(rng.uniform_int(0, 2));
    const auto ls = label_smoothing_loss(logits, y, 0.1);
    for (auto mode : {CorrectionMode::kAdditive, CorrectionMode::kMultiplicative}) {
      PclConfig cfg;
      cfg.epsilon = 0.0;
      cfg.mode = mode;
      const auto out = pcl_loss(logits, y, terms, cfg);
      require(bits_equal(out.corrected_value, ls.value), "epsilon=0 value bits");
      for (int k = 0; k < 3; ++k) {
        require(bits_equal(out.grad_logits[static_cast<std::size_t>(k)],
                           ls.grad[static_cast<std::size_t>(k)]),
                "epsilon=0 gradient bits");
      }
    }
  }

  // Full training runs, compared byte for byte through the checkpoint format.
  SyntheticSpec spec;
  spec.train_size = 1600;
  spec.dev_size = 320;
  spec.test_size = 40;
  spec.s1_len = 4;
  spec.s1_jitter = 1;
  spec.s2_len = 7;
  spec.s2_jitter = 2;
  spec.vocab_size = 400;
  const auto data = generate_synthetic(spec, 17);

  TrainConfig base;
  base.epochs = 2;
  base.batch_size = 32;
  base.patience = 5;
  base.seed = 23;
  base.tokenize_mode = TokenizeMode::kWhitespace;
  base.encoder.dim = 32;
  base.encoder.layers = 1;
  base.encoder.heads = 2;
  base.encoder.ffn_dim = 64;
  base.encoder.max_len = 16;

  auto ls_cfg = base;
  ls_cfg.loss_kind = LossKind::kLabelSmoothing;
  auto pcl_cfg = base;
  pcl_cfg.loss_kind = LossKind::kPcl;
  pcl_cfg.loss.epsilon = 0.0;

  const auto a = train(ls_cfg, data.train, data.dev);
  const auto b = train(pcl_cfg, data.train, data.dev);

  const auto dir = scratch_dir();
  save_checkpoint(a.params, dir / "ls.bin");
  save_checkpoint(b.params, dir / "pcl_eps0.bin");
  require(read_file(dir / "ls.bin") == read_file(dir / "pcl_eps0.bin"),
          "checkpoints byte-identical");
  require(a.history.size() == b.history.size(), "history length");
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    require(bits_equal(a.history[i].train_loss, b.history[i].train_loss),
            "history loss bits");
    require(bits_equal(a.history[i].dev_macro_f1, b.history[i].dev_macro_f1),
            "history dev F1 bits");
  }
}

// ---------------------------------------------------------------------------
// 4. Full-model gradient check against central differences.
void criterion_gradients() {
  const auto result = grad_check_random_config(/*seed=*/404, /*coords_per_config=*/70,
                                               /*config_count=*/3);
  require(result.coords_checked >= 200, "checked at least 200 coordinates");
  std::cout << "    max relative error " << result.max_rel_err << " over "
            << result.coords_checked << " coordinates\n";
  require(result.max_rel_err < 1e-5, "max relative error below 1e-5");
}

// ---------------------------------------------------------------------------
// 5. Additive corrections never touch the trajectory.
void criterion_additive_inertness() {
  SyntheticSpec spec;
  spec.train_size = 1920;  // 60 steps/epoch at batch 32
  spec.dev_size = 200;
  spec.test_size = 40;
  spec.s1_len = 4;
  spec.s1_jitter = 1;
  spec.s2_len = 7;
  spec.s2_jitter = 2;
  spec.vocab_size = 400;
  const auto data = generate_synthetic(spec, 29);

  TrainConfig base;
  base.epochs = 1;
  base.batch_size = 32;
  base.patience = 5;
  base.seed = 31;
  base.tokenize_mode = TokenizeMode::kWhitespace;
  base.encoder.dim = 16;
  base.encoder.layers = 1;
  base.encoder.heads = 2;
  base.encoder.ffn_dim = 32;
  base.encoder.max_len = 16;

  auto ls_cfg = base;
  ls_cfg.loss_kind = LossKind::kLabelSmoothing;
  auto pcl_cfg = base;
  pcl_cfg.loss_kind = LossKind::kPcl;
  pcl_cfg.loss.mode = CorrectionMode::kAdditive;
  pcl_cfg.loss.epsilon = 0.1;
  pcl_cfg.loss.clamp_nonnegative = false;

  std::vector<std::uint64_t> ls_traj;
  std::vector<double> ls_losses;
  train(ls_cfg, data.train, data.dev,
        [&](std::int64_t, const EncoderParams& p, const BatchLoss& bl) {
          ls_traj.push_back(params_fingerprint(p));
          ls_losses.push_back(bl.value);
        });

  const auto terms = propensity_terms(label_counts(data.train), pcl_cfg.loss.epsilon);
  std::vector<std::uint64_t> pcl_traj;
  std::vector<double> pcl_losses;
  std::vector<double> net_corrections;
  train(pcl_cfg, data.train, data.dev,
        [&](std::int64_t, const EncoderParams& p, const BatchLoss& bl) {
          pcl_traj.push_back(params_fingerprint(p));
          pcl_losses.push_back(bl.value);
          double net = 0.0;
          for (const auto& per : bl.per_sample) {
            if (per.condition == Condition::kPenalty) net += terms.pcl_plus;
            if (per.condition == Condition::kBonus) net -= terms.pcl_minus;
          }
          net_corrections.push_back(net / static_cast<double>(bl.per_sample.size()));
        });

  require(ls_traj.size() >= 50, "at least 50 optimizer steps");
  require(ls_traj.size() == pcl_traj.size(), "same step count");
  for (std::size_t i = 0; i < ls_traj.size(); ++i) {
    require(ls_traj[i] == pcl_traj[i], "parameter trajectory identical at step " +
                                           std::to_string(i + 1));
  }
  int differing = 0;
  for (std::size_t i = 0; i < ls_losses.size(); ++i) {
    const bool corrected = std::abs(net_corrections[i]) > 1e-12;
    const bool differs = !bits_equal(ls_losses[i], pcl_losses[i]);
    require(differs == corrected,
            "loss values differ exactly when a nonzero net correction was applied (step " +
                std::to_string(i + 1) + ")");
    differing += differs;
  }
  std::cout << "    " << ls_traj.size() << " steps, " << differing
            << " with differing recorded loss\n";
  require(differing > 0, "corrections observed on misclassified batches");
}

// ---------------------------------------------------------------------------
// 6. Ordering: wrong-by-two costs exactly pcl_plus + pcl_minus more.
void criterion_ordering() {
  const auto terms = propensity_terms(LabelCounts{2, 5, 1}, 0.1);
  PclConfig cfg;
  cfg.epsilon = 0.1;
  cfg.mode = CorrectionMode::kAdditive;
  Rng rng(606);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::array<double, 3> logits{rng.normal(0, 3), rng.normal(0, 3), rng.normal(0, 3)};
    const auto far = pcl_loss_at(logits, 0, 2, terms, cfg);
    const auto near = pcl_loss_at(logits, 0, 1, terms, cfg);
    const double gap = far.corrected_value - near.corrected_value;
    require_close(gap, terms.pcl_plus + terms.pcl_minus, 1e-12, "correction gap");
    require(gap > 0.0, "farther misclassification costs more");
  }
}

// ---------------------------------------------------------------------------
// 7. Metrics against an independent recount.
void criterion_metrics_oracle() {
  Rng rng(707);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = rng.uniform_int(1, 200);
    std::vector<int> gold;
    std::vector<int> pred;
    for (std::int64_t i = 0; i < n; ++i) {
      gold.push_back(static_cast<int>(rng.uniform_int(0, 2)));
      pred.push_back(static_cast<int>(rng.uniform_int(0, 2)));
    }

    // Brute-force recount straight from the pairs.
    double f1_sum = 0.0;
    std::int64_t correct = 0;
    std::array<double, 3> f1{};
    for (int k = 0; k < 3; ++k) {
      std::int64_t tp = 0;
      std::int64_t fp = 0;
      std::int64_t fn = 0;
      for (std::size_t i = 0; i < gold.size(); ++i) {
        tp += gold[i] == k && pred[i] == k;
        fp += gold[i] != k && pred[i] == k;
        fn += gold[i] == k && pred[i] != k;
      }
      const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0;
      const double r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0;
      f1[static_cast<std::size_t>(k)] = p + r > 0 ? 100.0 * 2 * p * r / (p + r) : 0.0;
      f1_sum += f1[static_cast<std::size_t>(k)];
    }
    for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == pred[i];

    const auto report = metrics_from_predictions(gold, pred);
    require_close(report.macro_f1, f1_sum / 3.0, 1e-9, "macro F1 vs recount");
    require_close(report.accuracy,
                  100.0 * static_cast<double>(correct) / static_cast<double>(gold.size()), 1e-9,
                  "accuracy vs recount");
    for (int k = 0; k < 3; ++k) {
      require_close(report.f1[static_cast<std::size_t>(k)], f1[static_cast<std::size_t>(k)],
                    1e-9, "per-class F1 vs recount");
    }
  }

  const auto hand = metrics_from_predictions({0, 0, 1, 1, 1, 2}, {0, 1, 1, 1, 0, 2});
  require_close(hand.macro_f1, 650.0 / 9.0, 1e-9, "six-example macro F1 (72.22)");
  require_close(hand.accuracy, 200.0 / 3.0, 1e-9, "six-example accuracy (66.67)");
}

// ---------------------------------------------------------------------------
// 8. Desk-scale loss ablation with the non-degradation gate.
void criterion_ablation() {
  SyntheticSpec spec;
  spec.train_size = 18000;
  spec.dev_size = 2000;
  spec.test_size = 1000;
  spec.ratio = {2, 5, 1};
  spec.s1_len = 5;
  spec.s1_jitter = 2;
  spec.s2_len = 10;
  spec.s2_jitter = 3;
  spec.vocab_size = 2000;
  const auto data = generate_synthetic(spec, 808);
  require(label_counts(data.train) == LabelCounts{4500, 11250, 2250}, "train ratio exact");

  TrainConfig base;  // default tiny encoder: dim 64, 2 layers, 2 heads, ffn 256
  base.epochs = 3;
  base.patience = 3;
  base.batch_size = 32;
  base.tokenize_mode = TokenizeMode::kWhitespace;
  base.encoder.max_len = 24;
  base.loss.epsilon = 0.1;

  const std::vector<std::string> tags{"ls", "pcl-multiplicative"};
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const int jobs = std::max(1u, std::min(2u, std::thread::hardware_concurrency()));

  const auto result = ablate(base, data.train, data.dev, data.test, tags, seeds, jobs,
                             [](const AblationRow& row) {
                               std::cout << "    " << row.loss_tag << " seed " << row.seed
                                         << ": macro_f1 " << row.macro_f1 << ", accuracy "
                                         << row.accuracy << " (" << row.run_seconds << "s)\n";
                             });

  require(result.rows.size() == tags.size() * seeds.size(), "one row per (loss, seed)");
  for (const auto& row : result.rows) {
    require(row.run_seconds < 600.0, "run under 10 minutes on one core (" + row.loss_tag +
                                         " seed " + std::to_string(row.seed) + " took " +
                                         std::to_string(row.run_seconds) + "s)");
  }

  const auto dir = scratch_dir() / "ablation";
  write_ablation_report(result, "ls", dir);
  require(std::filesystem::exists(dir / "ablation_report.md"), "report file written");
  const auto report = read_file(dir / "ablation_report.md");
  require(report.find("(") != std::string::npos && report.find(")") != std::string::npos,
          "delta annotations present");
  std::cout << report;

  const double ls_f1 = mean_metric(result, "ls", false);
  const double pcl_f1 = mean_metric(result, "pcl-multiplicative", false);
  const double ls_acc = mean_metric(result, "ls", true);
  const double pcl_acc = mean_metric(result, "pcl-multiplicative", true);
  std::cout << "    observed deltas: F1 " << (pcl_f1 - ls_f1) << ", accuracy "
            << (pcl_acc - ls_acc) << "\n";
  require(pcl_f1 >= ls_f1 - 1.0, "pcl-multiplicative mean macro F1 within 1.0 of ls (" +
                                     std::to_string(pcl_f1) + " vs " + std::to_string(ls_f1) +
                                     ")");
}

// ---------------------------------------------------------------------------
// 9. Masking suite.
void criterion_masking() {
  Rng gen(909);

  // Build a lexicon of two-character words.
  KnowledgeLexicon lexicon;
  std::vector<std::string> lexicon_words;
  for (int w = 0; w < 12; ++w) {
    const std::string word = "k" + std::to_string(w) + " k" + std::to_string(w + 100);
    lexicon_words.push_back(word);
    lexicon.add(word, TokenizeMode::kWhitespace);
  }

  Vocab vocab;
  for (int t = 0; t < 600; ++t) vocab.add("t" + std::to_string(t));
  for (int w = 0; w < 12; ++w) {
    vocab.add("k" + std::to_string(w));
    vocab.add("k" + std::to_string(w + 100));
  }

  auto random_sentence = [&](Rng& rng) {
    std::vector<std::string> sentence;
    const auto len = rng.uniform_int(8, 24);
    for (std::int64_t i = 0; i < len; ++i) {
      if (rng.bernoulli(0.15)) {
        const auto w = rng.uniform_int(0, 11);
        sentence.push_back("k" + std::to_string(w));
        sentence.push_back("k" + std::to_string(w + 100));
      } else {
        sentence.push_back("t" + std::to_string(rng.uniform_int(0, 599)));
      }
    }
    return sentence;
  };

  // Whole-word atomicity, budget bounds and reconstruction over 1e5 instances.
  MaskingConfig cfg;
  cfg.rate = 0.15;
  cfg.boost = 4.0;
  for (int i = 0; i < 100000; ++i) {
    const auto sentence = random_sentence(gen);
    const auto spans = segment_words(sentence, lexicon);
    const auto selected = select_mask_spans(spans, cfg.rate, cfg.boost, gen);
    const auto ids = vocab.encode(sentence);
    const auto inst = apply_corruption(ids, selected, vocab.size(), gen);

    const std::set<std::size_t> positions(inst.mask_positions.begin(),
                                          inst.mask_positions.end());
    std::size_t max_span = 0;
    for (const auto& span : spans) {
      max_span = std::max(max_span, span.length());
      std::size_t inside = 0;
      for (std::size_t p = span.start; p < span.end; ++p) inside += positions.count(p);
      if (inside != 0 && inside != span.length()) {
        throw CheckFailure("partial span at instance " + std::to_string(i));
      }
    }
    const auto budget =
        static_cast<std::size_t>(std::ceil(cfg.rate * static_cast<double>(sentence.size())));
    require(!positions.empty(), "at least one masked token");
    require(positions.size() <= budget + max_span - 1, "budget overshoot bound");

    auto restored = inst.ids;
    for (std::size_t k = 0; k < inst.mask_positions.size(); ++k) {
      restored[inst.mask_positions[k]] = inst.originals[k];
    }
    require(restored == ids, "reconstruction restores the input");
  }

  // Corruption branch frequencies over 1e5 spans within +-0.01.
  {
    Rng rng(911);
    std::int64_t masked = 0;
    std::int64_t randomized = 0;
    std::int64_t kept = 0;
    const std::vector<int> ids{10, 11};
    const std::vector<WordSpan> spans{{0, 2, false, 1.0}};
    for (int i = 0; i < 100000; ++i) {
      const auto inst = apply_corruption(ids, spans, vocab.size(), rng);
      if (inst.ids[0] == Vocab::kMask && inst.ids[1] == Vocab::kMask) {
        ++masked;
      } else if (inst.ids == ids) {
        ++kept;
      } else {
        ++randomized;
      }
    }
    require_close(static_cast<double>(masked) / 100000.0, 0.8, 0.01, "mask branch frequency");
    require_close(static_cast<double>(randomized) / 100000.0, 0.1, 0.01,
                  "random branch frequency");
    require_close(static_cast<double>(kept) / 100000.0, 0.1, 0.01, "keep branch frequency");
  }

  // Knowledge uplift: 100 tokens, 20% knowledge coverage, boost 5.
  {
    std::vector<WordSpan> spans;
    std::size_t pos = 0;
    for (int w = 0; w < 10; ++w) {  // 10 knowledge spans x 2 tokens = 20 tokens
      spans.push_back(WordSpan{pos, pos + 2, true, 1.0});
      pos += 2;
    }
    for (int t = 0; t < 80; ++t) {
      spans.push_back(WordSpan{pos, pos + 1, false, 1.0});
      ++pos;
    }

    Rng rng(912);
    std::int64_t knowledge_tokens = 0;
    std::int64_t total_tokens = 0;
    for (int i = 0; i < 10000; ++i) {
      const auto selected = select_mask_spans(spans, 0.15, 5.0, rng);
      for (const auto& span : selected) {
        total_tokens += static_cast<std::int64_t>(span.length());
        if (span.is_knowledge) knowledge_tokens += static_cast<std::int64_t>(span.length());
      }
    }
    const double share = static_cast<double>(knowledge_tokens) / static_cast<double>(total_tokens);
    // One-sided binomial test against p0 = 0.2 (the unboosted coverage).
    const double p0 = 0.2;
    const double z = (static_cast<double>(knowledge_tokens) - p0 * static_cast<double>(total_tokens)) /
                     std::sqrt(p0 * (1 - p0) * static_cast<double>(total_tokens));
    std::cout << "    knowledge share " << share << " over " << total_tokens
              << " masked tokens, z = " << z << "\n";
    require(z > 2.326, "uplift significant at p < 0.01");

    // Independent weighted-sampling oracle reproduces the share.
    Rng oracle_rng(913);
    std::int64_t oracle_knowledge = 0;
    std::int64_t oracle_total = 0;
    for (int i = 0; i < 10000; ++i) {
      std::vector<double> weights;
      std::vector<std::size_t> lengths;
      std::vector<bool> knowledge;
      for (const auto& span : spans) {
        weights.push_back(span.is_knowledge ? 5.0 : 1.0);
        lengths.push_back(span.length());
        knowledge.push_back(span.is_knowledge);
      }
      std::size_t covered = 0;
      const std::size_t budget = 15;  // ceil(0.15 * 100)
      while (covered < budget && !weights.empty()) {
        const std::size_t pick = oracle_rng.weighted_index(weights);
        covered += lengths[pick];
        oracle_total += static_cast<std::int64_t>(lengths[pick]);
        if (knowledge[pick]) oracle_knowledge += static_cast<std::int64_t>(lengths[pick]);
        weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(pick));
        lengths.erase(lengths.begin() + static_cast<std::ptrdiff_t>(pick));
        knowledge.erase(knowledge.begin() + static_cast<std::ptrdiff_t>(pick));
      }
    }
    const double oracle_share =
        static_cast<double>(oracle_knowledge) / static_cast<double>(oracle_total);
    require_close(share, oracle_share, 0.03, "module share vs oracle share");
  }

  // Per-epoch divergence and order-label balance.
  {
    Rng rng(914);
    std::vector<Document> docs;
    for (int d = 0; d < 400; ++d) {
      Document doc;
      for (int s = 0; s < 3; ++s) doc.push_back(random_sentence(rng));
      docs.push_back(doc);
    }
    MaskingConfig mcfg;
    mcfg.base_seed = 915;
    const auto e0 = generate_epoch_instances(docs, lexicon, vocab, mcfg, 0);
    const auto e1 = generate_epoch_instances(docs, lexicon, vocab, mcfg, 1);
    require(e0.size() == e1.size(), "same instance count per epoch");
    bool diverged = false;
    std::int64_t sop_count = 0;
    std::int64_t sop_kept = 0;
    for (std::size_t i = 0; i < e0.size(); ++i) {
      if (e0[i].kind == PretrainInstance::Kind::kMasked &&
          e0[i].masked.mask_positions != e1[i].masked.mask_positions) {
        diverged = true;
      }
      if (e0[i].kind == PretrainInstance::Kind::kSop) {
        ++sop_count;
        sop_kept += e0[i].sop.order_label;
      }
      if (e1[i].kind == PretrainInstance::Kind::kSop) {
        ++sop_count;
        sop_kept += e1[i].sop.order_label;
      }
    }
    require(diverged, "masks re-drawn between epochs");
    const double balance = static_cast<double>(sop_kept) / static_cast<double>(sop_count);
    require_close(balance, 0.5, 0.02, "order labels balanced");
  }
}

// ---------------------------------------------------------------------------
// 10. Corpus suite.
void criterion_corpus() {
  // Assembly layout on randomized lengths.
  Rng rng(1001);
  for (int trial = 0; trial < 1000; ++trial) {
    const int max_len = static_cast<int>(rng.uniform_int(5, 64));
    const int len1 = static_cast<int>(rng.uniform_int(1, 24));
    const int len2 = static_cast<int>(rng.uniform_int(1, 24));
    std::vector<int> s1(static_cast<std::size_t>(len1));
    std::vector<int> s2(static_cast<std::size_t>(len2));
    for (auto& x : s1) x = static_cast<int>(rng.uniform_int(5, 999));
    for (auto& x : s2) x = static_cast<int>(rng.uniform_int(5, 999));
    const auto seq = assemble_input(s1, s2, max_len);

    if (len1 + len2 + 3 <= max_len) {
      require(seq.length == len1 + len2 + 3, "length = |S1| + |S2| + 3");
    } else {
      require(seq.length == max_len, "truncated to max_len");
    }
    require(seq.ids[0] == Vocab::kCls, "[CLS] at position 0");
    int cls = 0;
    int sep = 0;
    for (int id : seq.ids) {
      cls += id == Vocab::kCls;
      sep += id == Vocab::kSep;
    }
    require(cls == 1 && sep == 2, "exactly one [CLS] and two [SEP]");
    const int s1_len = seq.s1_span.second - seq.s1_span.first;
    require(seq.ids[static_cast<std::size_t>(s1_len) + 1] == Vocab::kSep,
            "[SEP] at |S1|+1");
    require(seq.ids.back() == Vocab::kSep, "[SEP] at the end");
  }

  // JSONL round-trip.
  const auto dir = scratch_dir();
  std::vector<Example> examples;
  for (int i = 0; i < 200; ++i) {
    examples.push_back(Example{i, "查询 " + std::to_string(i), "标题 " + std::to_string(i * 7),
                               static_cast<int>(rng.uniform_int(0, 2))});
  }
  save_dataset(examples, dir / "roundtrip.jsonl");
  require(load_dataset(dir / "roundtrip.jsonl") == examples, "JSONL round-trip");

  // Synthetic ratio exactness.
  SyntheticSpec spec;
  spec.train_size = 8000;
  spec.dev_size = 800;
  spec.test_size = 400;
  spec.s1_len = 5;
  spec.s2_len = 10;
  const auto data = generate_synthetic(spec, 1002);
  require(label_counts(data.train) == LabelCounts{2000, 5000, 1000}, "8k split ratio exact");
  require(label_counts(data.dev) == LabelCounts{200, 500, 100}, "dev ratio exact");

  // Stats reproduce the configured targets.
  const auto stats = dataset_stats(data.train, TokenizeMode::kWhitespace);
  require(std::abs(stats.avg_s1_len - spec.s1_len) / spec.s1_len < 0.10,
          "avg S1 within 10% of target");
  require(std::abs(stats.avg_s2_len - spec.s2_len) / spec.s2_len < 0.10,
          "avg S2 within 10% of target");
  require_close(stats.avg_token_len, stats.avg_s1_len + stats.avg_s2_len + 3.0, 1e-9,
                "assembled average includes the specials");
  require_close(stats.ratio[0], 2.0, 1e-12, "ratio r0");
  require_close(stats.ratio[1], 5.0, 1e-12, "ratio r1");
  require_close(stats.ratio[2], 1.0, 1e-12, "ratio r2");
}

struct Criterion {
  int id;
  std::string name;
  std::function<void()> fn;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "propensity constants (2:5:1, eps=0.1 -> 1/30, 3/50)", criterion_propensity_constants},
      {2, "condition table sweep and anchored pairs", criterion_condition_table},
      {3, "eps=0 degeneracy: bitwise and full-run equality", criterion_epsilon_zero},
      {4, "full-model gradient check vs central differences", criterion_gradients},
      {5, "additive-mode corrections are gradient-inert", criterion_additive_inertness},
      {6, "ordering: 0->2 exceeds 0->1 by pcl_plus + pcl_minus", criterion_ordering},
      {7, "metrics match an independent recount", criterion_metrics_oracle},
      {8, "desk-scale ablation with non-degradation gate", criterion_ablation},
      {9, "masking suite (atomicity, budget, branches, uplift, epochs)", criterion_masking},
      {10, "corpus suite (assembly, round-trip, ratio, stats)", criterion_corpus},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criterion.fn();
      const auto seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cout << "[PASS] criterion " << criterion.id << ": " << criterion.name << " ("
                << seconds << "s)\n";
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "[FAIL] criterion " << criterion.id << ": " << criterion.name << " -- "
                << e.what() << "\n";
    }
  }
  if (failures > 0) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}
