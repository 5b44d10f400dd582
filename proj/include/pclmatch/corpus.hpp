#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace pclmatch {

// One query-title pair with an ordinal relevance label in {0, 1, 2}.
struct Example {
  std::int64_t id = 0;
  std::string query;  // S1
  std::string title;  // S2
  int label = 0;

  bool operator==(const Example&) const = default;
};

enum class TokenizeMode { kChar, kWhitespace };

TokenizeMode tokenize_mode_from_string(std::string_view s);
std::string_view to_string(TokenizeMode mode);

// kChar emits one token per non-whitespace Unicode code point (UTF-8 aware),
// kWhitespace splits on runs of whitespace.
std::vector<std::string> tokenize(std::string_view text, TokenizeMode mode);

// Token table with fixed special ids. Non-special tokens start at id 5 and
// are assigned in insertion order.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumSpecials = 5;

  Vocab();

  // Inserts the token if absent; returns its id. Specials map to their
  // reserved ids.
  int add(const std::string& token);
  // Id lookup; unknown tokens map to kUnk.
  int id_of(const std::string& token) const;
  const std::string& token_of(int id) const;
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;

  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  static Vocab from_examples(const std::vector<Example>& examples, TokenizeMode mode);

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Assembled classifier input: [CLS] S1 [SEP] S2 [SEP].
struct InputSequence {
  std::vector<int> ids;
  int length = 0;
  std::pair<int, int> s1_span{0, 0};  // half-open token index range into ids
  std::pair<int, int> s2_span{0, 0};
};

// Builds the [CLS] S1 [SEP] S2 [SEP] layout. When the pair exceeds max_len,
// tokens are dropped one at a time from the longer sentence (ties drop from
// S2, which dominates overflow in query-title data), never below one token
// per sentence. Throws if both sentences are empty or max_len < 5.
InputSequence assemble_input(std::span<const int> s1_ids, std::span<const int> s2_ids,
                             int max_len);

struct LabelCounts {
  std::int64_t n0 = 0;
  std::int64_t n1 = 0;
  std::int64_t n2 = 0;

  std::int64_t total() const { return n0 + n1 + n2; }
  std::int64_t operator[](int label) const;
  bool operator==(const LabelCounts&) const = default;
};

LabelCounts label_counts(const std::vector<Example>& examples);

struct StatsReport {
  double avg_s1_len = 0.0;
  double avg_s2_len = 0.0;
  double avg_token_len = 0.0;          // includes the 3 special tokens
  std::array<double, 3> ratio{};       // normalized so the minimum count is 1;
                                       // raw counts when degenerate
  bool degenerate = false;             // some class has zero examples
  LabelCounts counts;
};

StatsReport dataset_stats(const std::vector<Example>& examples, TokenizeMode mode);
std::string render_stats_table(const StatsReport& report);
std::string stats_record_json(const StatsReport& report);

// Line-delimited records: {"id":..,"query":"..","title":"..","label":"0|1|2"}.
std::vector<Example> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::vector<Example>& examples, const std::filesystem::path& path);

// Desk-scale imbalanced pair generator. Labels follow `ratio` exactly up to
// rounding; the title of a label-l pair reuses a fraction overlap[l] of the
// query's tokens, so the label is recoverable from surface overlap.
struct SyntheticSpec {
  int train_size = 8000;
  int dev_size = 1000;
  int test_size = 500;
  std::array<double, 3> ratio{2.0, 5.0, 1.0};
  int s1_len = 10;       // target mean query length (tokens)
  int s2_len = 25;       // target mean title length
  int s1_jitter = 2;     // lengths drawn uniformly from target +- jitter
  int s2_jitter = 3;
  std::array<double, 3> overlap{0.05, 0.40, 0.80};
  int vocab_size = 2000;
};

struct SyntheticData {
  std::vector<Example> train;
  std::vector<Example> dev;
  std::vector<Example> test;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Exact class counts for `size` examples at the requested ratio
// (largest-remainder apportionment; each count is within 1 of size*r_k/sum r).
std::array<std::int64_t, 3> apportion_labels(std::int64_t size, const std::array<double, 3>& ratio);

}  // namespace pclmatch
