#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "pclmatch/corpus.hpp"
#include "pclmatch/rng.hpp"

namespace pclmatch {

// Multi-token surface forms (entities/events) worth masking preferentially.
// File format: one surface form per line, optional tab-separated weight.
class KnowledgeLexicon {
 public:
  void add(const std::string& surface, TokenizeMode mode, double weight = 1.0);
  static KnowledgeLexicon from_file(const std::filesystem::path& path, TokenizeMode mode);

  // Longest entry matching tokens[pos..]; returns (length, weight) or
  // (0, 0) when nothing matches.
  std::pair<std::size_t, double> longest_match(const std::vector<std::string>& tokens,
                                               std::size_t pos) const;

  std::size_t size() const { return entries_; }

 private:
  struct Entry {
    std::vector<std::string> tokens;
    double weight;
  };
  // Grouped by first token, longest first.
  std::unordered_map<std::string, std::vector<Entry>> by_first_;
  std::size_t entries_ = 0;
};

struct WordSpan {
  std::size_t start = 0;  // half-open token range
  std::size_t end = 0;
  bool is_knowledge = false;
  double weight = 1.0;  // lexicon priority, 1.0 for plain words

  std::size_t length() const { return end - start; }
  bool operator==(const WordSpan&) const = default;
};

// Greedy longest-match segmentation: lexicon hits become knowledge spans,
// everything else falls back to single-token spans.
std::vector<WordSpan> segment_words(const std::vector<std::string>& tokens,
                                    const KnowledgeLexicon& lexicon);

// Samples spans without replacement, weight = boost * priority for knowledge
// spans and 1 otherwise, until covering ceil(rate * total tokens) tokens (the
// final span may overshoot). Always selects at least one span.
std::vector<WordSpan> select_mask_spans(const std::vector<WordSpan>& spans, double rate,
                                        double boost, Rng& rng);

struct MaskedInstance {
  std::vector<int> ids;                  // after corruption
  std::vector<std::size_t> mask_positions;  // all positions of selected spans
  std::vector<int> originals;            // original ids at those positions
  int epoch = 0;
};

// Whole-span corruption: one draw per span decides mask / random / keep for
// every token in it (defaults 0.8 / 0.1 / 0.1). Random replacements draw
// non-special ids. Throws if a span covers a special token.
MaskedInstance apply_corruption(const std::vector<int>& ids,
                                const std::vector<WordSpan>& selected, int vocab_size, Rng& rng,
                                double mask_prob = 0.8, double random_prob = 0.1);

struct SopInstance {
  std::vector<int> segment_a;
  std::vector<int> segment_b;
  int order_label = 1;  // 1 = original order, 0 = swapped
};

struct PretrainInstance {
  enum class Kind { kMasked, kSop };
  Kind kind = Kind::kMasked;
  MaskedInstance masked;
  SopInstance sop;
};

struct MaskingConfig {
  double rate = 0.15;
  double boost = 4.0;
  double mask_prob = 0.8;
  double random_prob = 0.1;
  std::uint64_t base_seed = 0;
};

// A document is a list of sentences; a sentence is a list of tokens.
using Document = std::vector<std::vector<std::string>>;

// Masks are re-drawn per epoch from hash(base_seed, epoch); consecutive
// sentence pairs become order-prediction instances, swapped with
// probability 1/2. Output order is canonical in (document, sentence) order.
std::vector<PretrainInstance> generate_epoch_instances(const std::vector<Document>& documents,
                                                       const KnowledgeLexicon& lexicon,
                                                       const Vocab& vocab,
                                                       const MaskingConfig& cfg, int epoch);

std::string instance_record_json(const PretrainInstance& inst);

}  // namespace pclmatch
