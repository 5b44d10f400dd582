#include "pclmatch/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pclmatch/gradcheck.hpp"
#include "pclmatch/pretrain.hpp"

namespace pclmatch {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : text) {
    if (c == sep) {
      parts.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  parts.push_back(current);
  return parts;
}

std::array<double, 3> parse_triple(const std::string& text, char sep, const std::string& what) {
  const auto parts = split(text, sep);
  if (parts.size() != 3) {
    throw std::invalid_argument(what + " must have exactly three components: \"" + text + "\"");
  }
  std::array<double, 3> out{};
  for (int k = 0; k < 3; ++k) {
    try {
      std::size_t used = 0;
      out[static_cast<std::size_t>(k)] = std::stod(parts[static_cast<std::size_t>(k)], &used);
      if (used != parts[static_cast<std::size_t>(k)].size()) throw std::invalid_argument("");
    } catch (...) {
      throw std::invalid_argument(what + ": bad component \"" + parts[static_cast<std::size_t>(k)] +
                                  "\"");
    }
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : split(text, ',')) {
    if (part.empty()) throw std::invalid_argument("empty entry in seed list");
    try {
      seeds.push_back(std::stoull(part));
    } catch (...) {
      throw std::invalid_argument("bad seed value: \"" + part + "\"");
    }
  }
  return seeds;
}

void require_file(const std::string& path, const std::string& field) {
  if (path.empty()) throw std::invalid_argument(field + " is required");
  if (!fs::exists(path)) throw std::invalid_argument(field + ": no such file: " + path);
}

void ensure_out_dir(const std::string& out_dir) {
  if (out_dir.empty()) throw std::invalid_argument("out_dir is required");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out_dir + ": " + ec.message());
}

// Config assembly shared by train/eval/ablate: defaults, then the config
// file, then PCLMATCH_OUT_DIR, then command-line overrides (flags win).
struct ConfigCli {
  std::string config_path;
  std::vector<std::pair<std::string, CLI::Option*>> key_options;
  std::vector<std::string> values;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Run config file (flat key = value lines)");
    values.resize(RunConfig::known_keys().size());
    std::size_t idx = 0;
    for (const auto& key : RunConfig::known_keys()) {
      auto* opt = cmd->add_option("--" + key, values[idx], "Override config key " + key);
      key_options.emplace_back(key, opt);
      ++idx;
    }
  }

  RunConfig build() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg.apply(parse_config_file(config_path));
    if (const char* env_out = std::getenv("PCLMATCH_OUT_DIR"); env_out != nullptr && *env_out) {
      cfg.out_dir = env_out;
    }
    std::size_t idx = 0;
    for (const auto& [key, opt] : key_options) {
      if (opt->count() > 0) cfg.set(key, values[idx]);
      ++idx;
    }
    return cfg;
  }
};

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << text;
}

void write_history(const fs::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  for (const auto& rec : history) {
    nlohmann::ordered_json j;
    j["epoch"] = rec.epoch;
    j["train_loss"] = rec.train_loss;
    j["dev_macro_f1"] = rec.dev_macro_f1;
    j["dev_accuracy"] = rec.dev_accuracy;
    out << j.dump() << '\n';
  }
}

int cmd_gen_data(const std::string& out_dir, int train_size, int dev_size, int test_size,
                 const std::string& ratio, int s1_len, int s2_len, int s1_jitter, int s2_jitter,
                 const std::string& overlap, int vocab_size, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.train_size = train_size;
  spec.dev_size = dev_size;
  spec.test_size = test_size;
  spec.ratio = parse_triple(ratio, ':', "--ratio");
  spec.s1_len = s1_len;
  spec.s2_len = s2_len;
  spec.s1_jitter = s1_jitter;
  spec.s2_jitter = s2_jitter;
  spec.overlap = parse_triple(overlap, ',', "--overlap");
  spec.vocab_size = vocab_size;

  ensure_out_dir(out_dir);
  const SyntheticData data = generate_synthetic(spec, seed);
  save_dataset(data.train, fs::path(out_dir) / "train.jsonl");
  save_dataset(data.dev, fs::path(out_dir) / "dev.jsonl");
  save_dataset(data.test, fs::path(out_dir) / "test_public.jsonl");

  const auto counts = label_counts(data.train);
  std::cout << "wrote " << data.train.size() << "/" << data.dev.size() << "/" << data.test.size()
            << " examples to " << out_dir << " (train label counts " << counts.n0 << ":"
            << counts.n1 << ":" << counts.n2 << ")\n";
  return 0;
}

int cmd_stats(const std::string& data_path, const std::string& mode_name,
              const std::string& json_out) {
  require_file(data_path, "--data");
  const auto mode = tokenize_mode_from_string(mode_name);
  const auto examples = load_dataset(data_path);
  const auto report = dataset_stats(examples, mode);
  std::cout << render_stats_table(report);
  std::cout << stats_record_json(report) << '\n';
  if (!json_out.empty()) write_text_file(json_out, stats_record_json(report) + "\n");
  return 0;
}

int cmd_train(const ConfigCli& cli_cfg) {
  RunConfig cfg = cli_cfg.build();
  if (cfg.out_dir.empty()) cfg.out_dir = "runs/train";
  cfg.validate();
  require_file(cfg.train_path, "data.train");
  require_file(cfg.dev_path, "data.dev");
  ensure_out_dir(cfg.out_dir);

  const auto train_set = load_dataset(cfg.train_path);
  const auto dev_set = load_dataset(cfg.dev_path);

  cfg.write(fs::path(cfg.out_dir) / "config_echo.cfg");

  const auto result = train(cfg.train, train_set, dev_set, {}, [](const EpochRecord& rec) {
    std::cout << "epoch " << rec.epoch << "  train_loss " << rec.train_loss << "  dev_macro_f1 "
              << rec.dev_macro_f1 << "  dev_accuracy " << rec.dev_accuracy << '\n';
  });

  result.vocab.save(fs::path(cfg.out_dir) / "vocab.txt");
  save_checkpoint(result.params, fs::path(cfg.out_dir) / "checkpoint.bin");
  write_history(fs::path(cfg.out_dir) / "history.jsonl", result.history);

  const auto dev_metrics =
      evaluate(result.params, dev_set, result.vocab, cfg.train.tokenize_mode);
  write_metrics_report(dev_metrics, cfg.out_dir);
  std::cout << "best epoch " << result.best_epoch << "  dev macro-F1 "
            << result.best_dev_macro_f1 << "\noutputs in " << cfg.out_dir << '\n';
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& vocab_path,
             const std::string& data_path, const std::string& mode_name,
             const std::string& out_dir) {
  require_file(checkpoint_path, "--checkpoint");
  require_file(vocab_path, "--vocab");
  require_file(data_path, "--data");
  const auto mode = tokenize_mode_from_string(mode_name);

  const auto params = load_checkpoint(checkpoint_path);
  const auto vocab = Vocab::load(vocab_path);
  if (vocab.size() != params.cfg.vocab_size) {
    throw std::runtime_error("vocab size " + std::to_string(vocab.size()) +
                             " does not match checkpoint vocab size " +
                             std::to_string(params.cfg.vocab_size));
  }
  const auto examples = load_dataset(data_path);
  const auto report = evaluate(params, examples, vocab, mode);

  std::cout << "macro_f1 " << report.macro_f1 << "  accuracy " << report.accuracy << '\n';
  std::cout << render_confusion(report.confusion);
  if (!out_dir.empty()) {
    ensure_out_dir(out_dir);
    write_metrics_report(report, out_dir);
  }
  return 0;
}

int cmd_ablate(const ConfigCli& cli_cfg, const std::string& seeds_text,
               const std::string& losses_text, int jobs) {
  RunConfig cfg = cli_cfg.build();
  if (cfg.out_dir.empty()) cfg.out_dir = "runs/ablation";
  cfg.validate();
  require_file(cfg.train_path, "data.train");
  require_file(cfg.dev_path, "data.dev");
  require_file(cfg.test_path, "data.test");
  ensure_out_dir(cfg.out_dir);

  const auto seeds = parse_seeds(seeds_text);
  std::vector<std::string> tags;
  for (const auto& tag : split(losses_text, ',')) {
    if (!tag.empty()) tags.push_back(tag);
  }
  if (tags.empty()) throw std::invalid_argument("--losses must name at least one loss");

  const auto train_set = load_dataset(cfg.train_path);
  const auto dev_set = load_dataset(cfg.dev_path);
  const auto test_set = load_dataset(cfg.test_path);

  cfg.write(fs::path(cfg.out_dir) / "config_echo.cfg");

  const auto result =
      ablate(cfg.train, train_set, dev_set, test_set, tags, seeds, jobs,
             [](const AblationRow& row) {
               std::cout << row.loss_tag << " seed " << row.seed << "  macro_f1 " << row.macro_f1
                         << "  accuracy " << row.accuracy << "  (" << row.run_seconds << "s)\n";
             });

  write_ablation_report(result, tags.front(), cfg.out_dir);
  std::cout << render_ablation_markdown(result, tags.front());
  std::cout << "outputs in " << cfg.out_dir << '\n';
  return 0;
}

int cmd_mask_instances(const std::string& docs_path, const std::string& lexicon_path,
                       const std::string& mode_name, double rate, double boost, int epoch,
                       std::uint64_t seed, const std::string& out_path) {
  require_file(docs_path, "--docs");
  const auto mode = tokenize_mode_from_string(mode_name);

  // Documents are blank-line separated; each line is a sentence.
  std::ifstream in(docs_path);
  if (!in) throw std::runtime_error("cannot open docs file: " + docs_path);
  std::vector<Document> documents;
  Document current;
  Vocab vocab;
  std::string line;
  while (std::getline(in, line)) {
    const auto tokens = tokenize(line, mode);
    if (tokens.empty()) {
      if (!current.empty()) documents.push_back(std::move(current));
      current = {};
      continue;
    }
    for (const auto& t : tokens) vocab.add(t);
    current.push_back(tokens);
  }
  if (!current.empty()) documents.push_back(std::move(current));
  if (documents.empty()) throw std::invalid_argument("docs file contains no sentences");

  KnowledgeLexicon lexicon;
  if (!lexicon_path.empty()) {
    require_file(lexicon_path, "--lexicon");
    lexicon = KnowledgeLexicon::from_file(lexicon_path, mode);
  }

  MaskingConfig cfg;
  cfg.rate = rate;
  cfg.boost = boost;
  cfg.base_seed = derive_seed(seed, "mask");

  const auto instances = generate_epoch_instances(documents, lexicon, vocab, cfg, epoch);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write instances file: " + out_path);
  for (const auto& inst : instances) out << instance_record_json(inst) << '\n';
  std::cout << "wrote " << instances.size() << " instances to " << out_path << '\n';
  return 0;
}

int cmd_grad_check(std::uint64_t seed, int configs, int coords) {
  const auto result = grad_check_random_config(seed, coords, configs);
  std::cout << "checked " << result.coords_checked << " coordinates, max relative error "
            << result.max_rel_err << '\n';
  return result.max_rel_err < 1e-5 ? 0 : 1;
}

}  // namespace

void write_metrics_report(const MetricsReport& report, const fs::path& out_dir) {
  ensure_out_dir(out_dir.string());
  write_text_file(out_dir / "metrics.json", metrics_record_json(report) + "\n");
  write_text_file(out_dir / "confusion.txt", render_confusion(report.confusion));
}

void write_ablation_report(const AblationResult& result, const std::string& baseline_tag,
                           const fs::path& out_dir) {
  ensure_out_dir(out_dir.string());
  std::ofstream rows(out_dir / "ablation_rows.jsonl");
  if (!rows) throw std::runtime_error("cannot write ablation rows in " + out_dir.string());
  for (const auto& row : result.rows) {
    nlohmann::ordered_json j;
    j["model"] = row.model_tag;
    j["loss"] = row.loss_tag;
    j["seed"] = row.seed;
    j["macro_f1"] = row.macro_f1;
    j["accuracy"] = row.accuracy;
    rows << j.dump() << '\n';
  }
  write_text_file(out_dir / "ablation_report.md",
                  render_ablation_markdown(result, baseline_tag));
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"pclmatch: propensity-corrected loss toolkit for ordinal sentence-pair matching"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic imbalanced pair dataset");
  std::string gen_out = "data";
  int gen_train = 8000, gen_dev = 1000, gen_test = 500;
  std::string gen_ratio = "2:5:1";
  int gen_s1 = 10, gen_s2 = 25, gen_j1 = 2, gen_j2 = 3;
  std::string gen_overlap = "0.05,0.40,0.80";
  int gen_vocab = 2000;
  std::uint64_t gen_seed = 42;
  gen->add_option("--out-dir", gen_out, "Output directory");
  gen->add_option("--train-size", gen_train, "Train split size");
  gen->add_option("--dev-size", gen_dev, "Dev split size");
  gen->add_option("--test-size", gen_test, "Public test split size");
  gen->add_option("--ratio", gen_ratio, "Label ratio r0:r1:r2");
  gen->add_option("--s1-len", gen_s1, "Target mean query length");
  gen->add_option("--s2-len", gen_s2, "Target mean title length");
  gen->add_option("--s1-jitter", gen_j1, "Query length jitter");
  gen->add_option("--s2-jitter", gen_j2, "Title length jitter");
  gen->add_option("--overlap", gen_overlap, "Per-label title/query token overlap o0,o1,o2");
  gen->add_option("--vocab-size", gen_vocab, "Synthetic vocabulary size");
  gen->add_option("--seed", gen_seed, "Root seed");

  // stats
  auto* stats = app.add_subcommand("stats", "Dataset statistics (lengths and label ratio)");
  std::string stats_data;
  std::string stats_mode = "char";
  std::string stats_json;
  stats->add_option("--data", stats_data, "Dataset file (.jsonl)")->required();
  stats->add_option("--mode", stats_mode, "Tokenize mode: char|whitespace");
  stats->add_option("--json-out", stats_json, "Also write the machine-readable record here");

  // train
  auto* tr = app.add_subcommand("train", "Fine-tune the pair encoder");
  ConfigCli train_cfg;
  train_cfg.attach(tr);

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string eval_ckpt, eval_vocab, eval_data, eval_out;
  std::string eval_mode = "char";
  ev->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  ev->add_option("--vocab", eval_vocab, "Vocab file saved by train")->required();
  ev->add_option("--data", eval_data, "Dataset file (.jsonl)")->required();
  ev->add_option("--mode", eval_mode, "Tokenize mode: char|whitespace");
  ev->add_option("--out", eval_out, "Optional directory for metrics.json / confusion.txt");

  // ablate
  auto* ab = app.add_subcommand("ablate", "Loss-function ablation grid");
  ConfigCli ablate_cfg;
  ablate_cfg.attach(ab);
  std::string ab_seeds = "1,2,3";
  std::string ab_losses = "ls,pcl-multiplicative";
  int ab_jobs = 1;
  ab->add_option("--seeds", ab_seeds, "Comma-separated seeds");
  ab->add_option("--losses", ab_losses,
                 "Comma-separated loss tags (ls|pcl-additive|pcl-multiplicative); first is the "
                 "baseline");
  ab->add_option("--jobs", ab_jobs, "Concurrent runs");

  // mask-instances
  auto* mi = app.add_subcommand("mask-instances",
                                "Generate whole-word/knowledge-masked and sentence-order "
                                "pretraining instances");
  std::string mi_docs, mi_lexicon, mi_out = "instances.jsonl";
  std::string mi_mode = "char";
  double mi_rate = 0.15, mi_boost = 4.0;
  int mi_epoch = 0;
  std::uint64_t mi_seed = 42;
  mi->add_option("--docs", mi_docs, "Documents file (sentences per line, blank line = new doc)")
      ->required();
  mi->add_option("--lexicon", mi_lexicon, "Lexicon file (surface form [tab weight] per line)");
  mi->add_option("--mode", mi_mode, "Tokenize mode: char|whitespace");
  mi->add_option("--rate", mi_rate, "Mask rate");
  mi->add_option("--boost", mi_boost, "Knowledge span weight boost");
  mi->add_option("--epoch", mi_epoch, "Epoch index (masks are re-drawn per epoch)");
  mi->add_option("--seed", mi_seed, "Root seed");
  mi->add_option("--out", mi_out, "Output instances file");

  // grad-check
  auto* gc = app.add_subcommand("grad-check",
                                "Verify analytic gradients against central finite differences");
  std::uint64_t gc_seed = 7;
  int gc_configs = 3;
  int gc_coords = 80;
  gc->add_option("--seed", gc_seed, "Seed for configs, batches and coordinates");
  gc->add_option("--configs", gc_configs, "Number of random small configs");
  gc->add_option("--coords", gc_coords, "Coordinates checked per config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen_data(gen_out, gen_train, gen_dev, gen_test, gen_ratio, gen_s1, gen_s2,
                          gen_j1, gen_j2, gen_overlap, gen_vocab, gen_seed);
    }
    if (stats->parsed()) return cmd_stats(stats_data, stats_mode, stats_json);
    if (tr->parsed()) return cmd_train(train_cfg);
    if (ev->parsed()) return cmd_eval(eval_ckpt, eval_vocab, eval_data, eval_mode, eval_out);
    if (ab->parsed()) return cmd_ablate(ablate_cfg, ab_seeds, ab_losses, ab_jobs);
    if (mi->parsed()) {
      return cmd_mask_instances(mi_docs, mi_lexicon, mi_mode, mi_rate, mi_boost, mi_epoch,
                                mi_seed, mi_out);
    }
    if (gc->parsed()) return cmd_grad_check(gc_seed, gc_configs, gc_coords);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cerr << "error: no subcommand given\n" << app.help();
  return 2;
}

}  // namespace pclmatch
