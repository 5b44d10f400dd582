#include "pclmatch/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "pclmatch/rng.hpp"

namespace pclmatch {

namespace {

using ordered_json = nlohmann::ordered_json;

bool is_space_codepoint(char32_t cp) {
  switch (cp) {
    case U' ':
    case U'\t':
    case U'\n':
    case U'\r':
    case U'\v':
    case U'\f':
    case 0x00A0:  // no-break space
    case 0x3000:  // ideographic space
      return true;
    default:
      return false;
  }
}

// Decodes the UTF-8 sequence starting at `i`, returning (codepoint, length).
// Malformed bytes are passed through as single-byte tokens.
std::pair<char32_t, std::size_t> decode_utf8(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  char32_t cp = b0;
  if ((b0 & 0x80U) == 0) {
    return {cp, 1};
  } else if ((b0 & 0xE0U) == 0xC0U) {
    len = 2;
    cp = b0 & 0x1FU;
  } else if ((b0 & 0xF0U) == 0xE0U) {
    len = 3;
    cp = b0 & 0x0FU;
  } else if ((b0 & 0xF8U) == 0xF0U) {
    len = 4;
    cp = b0 & 0x07U;
  } else {
    return {cp, 1};
  }
  if (i + len > s.size()) return {b0, 1};
  for (std::size_t k = 1; k < len; ++k) {
    const auto bk = static_cast<unsigned char>(s[i + k]);
    if ((bk & 0xC0U) != 0x80U) return {b0, 1};
    cp = (cp << 6) | (bk & 0x3FU);
  }
  return {cp, len};
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

int parse_label_field(const nlohmann::json& v, std::size_t line_no) {
  std::string text;
  if (v.is_string()) {
    text = v.get<std::string>();
  } else if (v.is_number_integer()) {
    text = std::to_string(v.get<std::int64_t>());
  } else {
    throw std::runtime_error("line " + std::to_string(line_no) +
                             ": label must be a digit string");
  }
  if (text == "0") return 0;
  if (text == "1") return 1;
  if (text == "2") return 2;
  throw std::runtime_error("line " + std::to_string(line_no) + ": unknown label \"" + text +
                           "\"");
}

}  // namespace

TokenizeMode tokenize_mode_from_string(std::string_view s) {
  if (s == "char") return TokenizeMode::kChar;
  if (s == "whitespace") return TokenizeMode::kWhitespace;
  throw std::invalid_argument("unknown tokenize mode: \"" + std::string(s) +
                              "\" (expected char|whitespace)");
}

std::string_view to_string(TokenizeMode mode) {
  return mode == TokenizeMode::kChar ? "char" : "whitespace";
}

std::vector<std::string> tokenize(std::string_view text, TokenizeMode mode) {
  std::vector<std::string> tokens;
  if (mode == TokenizeMode::kChar) {
    std::size_t i = 0;
    while (i < text.size()) {
      const auto [cp, len] = decode_utf8(text, i);
      if (!is_space_codepoint(cp)) tokens.emplace_back(text.substr(i, len));
      i += len;
    }
  } else {
    std::size_t i = 0;
    while (i < text.size()) {
      const auto [cp, len] = decode_utf8(text, i);
      if (is_space_codepoint(cp)) {
        i += len;
        continue;
      }
      std::size_t start = i;
      while (i < text.size()) {
        const auto [cp2, len2] = decode_utf8(text, i);
        if (is_space_codepoint(cp2)) break;
        i += len2;
      }
      tokens.emplace_back(text.substr(start, i - start));
    }
  }
  return tokens;
}

Vocab::Vocab() {
  id_to_token_ = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  for (int i = 0; i < kNumSpecials; ++i) token_to_id_[id_to_token_[i]] = i;
}

int Vocab::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  const int id = size();
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(token);
  return id;
}

int Vocab::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("token id out of range: " + std::to_string(id));
  return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(const std::string& token) const {
  return token_to_id_.count(token) != 0;
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id_of(t));
  return ids;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocab file: " + path.string());
  for (int id = kNumSpecials; id < size(); ++id) out << id_to_token_[static_cast<std::size_t>(id)] << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocab file: " + path.string());
  Vocab v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (v.contains(line)) {
      throw std::runtime_error("vocab file line " + std::to_string(line_no) +
                               ": duplicate token \"" + line + "\"");
    }
    v.add(line);
  }
  return v;
}

Vocab Vocab::from_examples(const std::vector<Example>& examples, TokenizeMode mode) {
  Vocab v;
  for (const auto& ex : examples) {
    for (const auto& t : tokenize(ex.query, mode)) v.add(t);
    for (const auto& t : tokenize(ex.title, mode)) v.add(t);
  }
  return v;
}

namespace {

// Drops one token at a time from the longer sentence (ties from s2) until the
// pair fits the budget, keeping at least one token on each side.
void truncate_pair(std::vector<int>& s1, std::vector<int>& s2, std::size_t budget) {
  while (s1.size() + s2.size() > budget) {
    if (s1.size() > s2.size() && s1.size() > 1) {
      s1.pop_back();
    } else if (s2.size() > 1) {
      s2.pop_back();
    } else {
      s1.pop_back();
    }
  }
}

}  // namespace

InputSequence assemble_input(std::span<const int> s1_ids, std::span<const int> s2_ids,
                             int max_len) {
  if (max_len < 5) throw std::invalid_argument("assemble_input: max_len must be >= 5");
  if (s1_ids.empty() && s2_ids.empty()) {
    throw std::invalid_argument("assemble_input: both sentences are empty");
  }
  for (int id : s1_ids) {
    if (id == Vocab::kPad || id == Vocab::kCls || id == Vocab::kSep || id == Vocab::kMask) {
      throw std::invalid_argument("assemble_input: marker token id inside s1");
    }
  }
  for (int id : s2_ids) {
    if (id == Vocab::kPad || id == Vocab::kCls || id == Vocab::kSep || id == Vocab::kMask) {
      throw std::invalid_argument("assemble_input: marker token id inside s2");
    }
  }

  std::vector<int> s1(s1_ids.begin(), s1_ids.end());
  std::vector<int> s2(s2_ids.begin(), s2_ids.end());
  truncate_pair(s1, s2, static_cast<std::size_t>(max_len) - 3);

  InputSequence seq;
  seq.ids.reserve(s1.size() + s2.size() + 3);
  seq.ids.push_back(Vocab::kCls);
  seq.ids.insert(seq.ids.end(), s1.begin(), s1.end());
  seq.ids.push_back(Vocab::kSep);
  seq.ids.insert(seq.ids.end(), s2.begin(), s2.end());
  seq.ids.push_back(Vocab::kSep);
  seq.length = static_cast<int>(seq.ids.size());
  seq.s1_span = {1, 1 + static_cast<int>(s1.size())};
  seq.s2_span = {2 + static_cast<int>(s1.size()), seq.length - 1};
  return seq;
}

std::int64_t LabelCounts::operator[](int label) const {
  switch (label) {
    case 0: return n0;
    case 1: return n1;
    case 2: return n2;
    default: throw std::out_of_range("label out of range: " + std::to_string(label));
  }
}

LabelCounts label_counts(const std::vector<Example>& examples) {
  LabelCounts counts;
  for (const auto& ex : examples) {
    switch (ex.label) {
      case 0: ++counts.n0; break;
      case 1: ++counts.n1; break;
      case 2: ++counts.n2; break;
      default: throw std::invalid_argument("label out of range: " + std::to_string(ex.label));
    }
  }
  return counts;
}

StatsReport dataset_stats(const std::vector<Example>& examples, TokenizeMode mode) {
  if (examples.empty()) throw std::invalid_argument("dataset_stats: empty example list");
  StatsReport report;
  double sum1 = 0.0;
  double sum2 = 0.0;
  for (const auto& ex : examples) {
    sum1 += static_cast<double>(tokenize(ex.query, mode).size());
    sum2 += static_cast<double>(tokenize(ex.title, mode).size());
  }
  const auto n = static_cast<double>(examples.size());
  report.avg_s1_len = sum1 / n;
  report.avg_s2_len = sum2 / n;
  report.avg_token_len = (sum1 + sum2) / n + 3.0;  // [CLS] + 2x[SEP]
  report.counts = label_counts(examples);

  const std::array<std::int64_t, 3> c{report.counts.n0, report.counts.n1, report.counts.n2};
  const std::int64_t min_count = std::min({c[0], c[1], c[2]});
  if (min_count == 0) {
    report.degenerate = true;
    for (int k = 0; k < 3; ++k) report.ratio[static_cast<std::size_t>(k)] = static_cast<double>(c[static_cast<std::size_t>(k)]);
  } else {
    report.degenerate = false;
    for (int k = 0; k < 3; ++k) {
      report.ratio[static_cast<std::size_t>(k)] =
          static_cast<double>(c[static_cast<std::size_t>(k)]) / static_cast<double>(min_count);
    }
  }
  return report;
}

std::string render_stats_table(const StatsReport& r) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "Avg. S1 tokens   " << r.avg_s1_len << "\n";
  out << "Avg. S2 tokens   " << r.avg_s2_len << "\n";
  out << "Avg. input len   " << r.avg_token_len << "\n";
  out << "Label counts     " << r.counts.n0 << " : " << r.counts.n1 << " : " << r.counts.n2
      << "\n";
  if (r.degenerate) {
    out << "Label ratio      (degenerate: zero-count class, raw counts reported)\n";
  } else {
    out << "Label ratio      " << r.ratio[0] << " : " << r.ratio[1] << " : " << r.ratio[2]
        << "\n";
  }
  return out.str();
}

std::string stats_record_json(const StatsReport& r) {
  ordered_json j;
  j["avg_s1_len"] = r.avg_s1_len;
  j["avg_s2_len"] = r.avg_s2_len;
  j["avg_token_len"] = r.avg_token_len;
  j["ratio"] = {r.ratio[0], r.ratio[1], r.ratio[2]};
  j["degenerate"] = r.degenerate;
  j["counts"] = {r.counts.n0, r.counts.n1, r.counts.n2};
  return j.dump();
}

std::vector<Example> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path.string());
  std::vector<Example> examples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": malformed record (" +
                               e.what() + ")");
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("query") || !j.contains("title") ||
        !j.contains("label")) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": record must have id/query/title/label fields");
    }
    Example ex;
    if (j["id"].is_number_integer()) {
      ex.id = j["id"].get<std::int64_t>();
    } else if (j["id"].is_string()) {
      try {
        ex.id = std::stoll(j["id"].get<std::string>());
      } catch (...) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": non-integer id");
      }
    } else {
      throw std::runtime_error("line " + std::to_string(line_no) + ": non-integer id");
    }
    if (!j["query"].is_string() || !j["title"].is_string()) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": query and title must be strings");
    }
    ex.query = j["query"].get<std::string>();
    ex.title = j["title"].get<std::string>();
    if (trim(ex.query).empty() || trim(ex.title).empty()) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": query and title must be non-empty");
    }
    ex.label = parse_label_field(j["label"], line_no);
    examples.push_back(std::move(ex));
  }
  return examples;
}

void save_dataset(const std::vector<Example>& examples, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path.string());
  for (const auto& ex : examples) {
    ordered_json j;
    j["id"] = ex.id;
    j["query"] = ex.query;
    j["title"] = ex.title;
    j["label"] = std::to_string(ex.label);
    out << j.dump() << '\n';
  }
}

std::array<std::int64_t, 3> apportion_labels(std::int64_t size, const std::array<double, 3>& ratio) {
  double total = 0.0;
  for (double r : ratio) {
    if (!(r > 0.0)) throw std::invalid_argument("ratio components must be positive");
    total += r;
  }
  if (size <= 0) throw std::invalid_argument("split size must be positive");

  std::array<std::int64_t, 3> counts{};
  std::array<double, 3> frac{};
  std::int64_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = static_cast<double>(size) * ratio[static_cast<std::size_t>(k)] / total;
    counts[static_cast<std::size_t>(k)] = static_cast<std::int64_t>(std::floor(exact));
    frac[static_cast<std::size_t>(k)] = exact - std::floor(exact);
    assigned += counts[static_cast<std::size_t>(k)];
  }
  // Hand out the remainder by largest fractional part, lower label on ties.
  while (assigned < size) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (frac[static_cast<std::size_t>(k)] > frac[static_cast<std::size_t>(best)]) best = k;
    }
    ++counts[static_cast<std::size_t>(best)];
    frac[static_cast<std::size_t>(best)] = -1.0;
    ++assigned;
  }
  return counts;
}

namespace {

std::string synth_token(Rng& rng, int vocab_size) {
  return "w" + std::to_string(rng.uniform_int(0, vocab_size - 1));
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<Example> generate_split(const SyntheticSpec& spec, std::int64_t size, Rng& rng) {
  const auto counts = apportion_labels(size, spec.ratio);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(size));
  for (int k = 0; k < 3; ++k) {
    labels.insert(labels.end(), static_cast<std::size_t>(counts[static_cast<std::size_t>(k)]), k);
  }
  rng.shuffle(labels);

  std::vector<Example> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int label = labels[i];
    const auto len1 = rng.uniform_int(std::max<std::int64_t>(1, spec.s1_len - spec.s1_jitter),
                                      spec.s1_len + spec.s1_jitter);
    const auto len2 = rng.uniform_int(std::max<std::int64_t>(1, spec.s2_len - spec.s2_jitter),
                                      spec.s2_len + spec.s2_jitter);

    std::vector<std::string> s1;
    s1.reserve(static_cast<std::size_t>(len1));
    for (std::int64_t t = 0; t < len1; ++t) s1.push_back(synth_token(rng, spec.vocab_size));

    const auto n_shared = std::clamp<std::int64_t>(
        std::llround(spec.overlap[static_cast<std::size_t>(label)] * static_cast<double>(len2)),
        0, len2);
    std::vector<std::size_t> positions(static_cast<std::size_t>(len2));
    for (std::size_t p = 0; p < positions.size(); ++p) positions[p] = p;
    rng.shuffle(positions);

    std::vector<std::string> s2(static_cast<std::size_t>(len2));
    for (std::int64_t p = 0; p < len2; ++p) {
      const std::size_t pos = positions[static_cast<std::size_t>(p)];
      if (p < n_shared) {
        s2[pos] = s1[static_cast<std::size_t>(rng.uniform_int(0, len1 - 1))];
      } else {
        s2[pos] = synth_token(rng, spec.vocab_size);
      }
    }

    Example ex;
    ex.id = static_cast<std::int64_t>(i);
    ex.query = join_tokens(s1);
    ex.title = join_tokens(s2);
    ex.label = label;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  for (double ov : spec.overlap) {
    if (ov < 0.0 || ov > 1.0) {
      throw std::invalid_argument("overlap values must lie in [0, 1]");
    }
  }
  if (spec.vocab_size < 2) throw std::invalid_argument("vocab_size must be >= 2");

  SyntheticData data;
  Rng rng_train(derive_seed(seed, "data", 0));
  Rng rng_dev(derive_seed(seed, "data", 1));
  Rng rng_test(derive_seed(seed, "data", 2));
  data.train = generate_split(spec, spec.train_size, rng_train);
  data.dev = generate_split(spec, spec.dev_size, rng_dev);
  data.test = generate_split(spec, spec.test_size, rng_test);
  return data;
}

}  // namespace pclmatch
