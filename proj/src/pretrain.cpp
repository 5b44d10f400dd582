#include "pclmatch/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace pclmatch {

void KnowledgeLexicon::add(const std::string& surface, TokenizeMode mode, double weight) {
  auto tokens = tokenize(surface, mode);
  if (tokens.empty()) throw std::invalid_argument("lexicon entry is empty: \"" + surface + "\"");
  if (!(weight > 0.0)) {
    throw std::invalid_argument("lexicon entry \"" + surface + "\" has nonpositive weight");
  }
  auto& bucket = by_first_[tokens.front()];
  bucket.push_back(Entry{std::move(tokens), weight});
  std::stable_sort(bucket.begin(), bucket.end(),
                   [](const Entry& a, const Entry& b) { return a.tokens.size() > b.tokens.size(); });
  ++entries_;
}

KnowledgeLexicon KnowledgeLexicon::from_file(const std::filesystem::path& path,
                                             TokenizeMode mode) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open lexicon file: " + path.string());
  KnowledgeLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string surface = line;
    double weight = 1.0;
    if (const auto tab = line.find('\t'); tab != std::string::npos) {
      surface = line.substr(0, tab);
      try {
        weight = std::stod(line.substr(tab + 1));
      } catch (...) {
        throw std::runtime_error("lexicon line " + std::to_string(line_no) +
                                 ": malformed weight");
      }
    }
    try {
      lex.add(surface, mode, weight);
    } catch (const std::exception& e) {
      throw std::runtime_error("lexicon line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return lex;
}

std::pair<std::size_t, double> KnowledgeLexicon::longest_match(
    const std::vector<std::string>& tokens, std::size_t pos) const {
  const auto it = by_first_.find(tokens[pos]);
  if (it == by_first_.end()) return {0, 0.0};
  for (const Entry& e : it->second) {
    if (pos + e.tokens.size() > tokens.size()) continue;
    bool match = true;
    for (std::size_t k = 1; k < e.tokens.size(); ++k) {
      if (tokens[pos + k] != e.tokens[k]) {
        match = false;
        break;
      }
    }
    if (match) return {e.tokens.size(), e.weight};
  }
  return {0, 0.0};
}

std::vector<WordSpan> segment_words(const std::vector<std::string>& tokens,
                                    const KnowledgeLexicon& lexicon) {
  std::vector<WordSpan> spans;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const auto [len, weight] = lexicon.longest_match(tokens, i);
    if (len > 0) {
      spans.push_back(WordSpan{i, i + len, true, weight});
      i += len;
    } else {
      spans.push_back(WordSpan{i, i + 1, false, 1.0});
      ++i;
    }
  }
  return spans;
}

std::vector<WordSpan> select_mask_spans(const std::vector<WordSpan>& spans, double rate,
                                        double boost, Rng& rng) {
  if (spans.empty()) throw std::invalid_argument("select_mask_spans: empty span list");
  if (!(rate > 0.0) || rate >= 1.0) throw std::invalid_argument("mask rate must lie in (0, 1)");
  if (boost < 1.0) throw std::invalid_argument("knowledge boost must be >= 1");

  std::size_t total_tokens = 0;
  for (const auto& s : spans) total_tokens += s.length();
  const auto budget = static_cast<std::size_t>(
      std::ceil(rate * static_cast<double>(total_tokens)));

  std::vector<std::size_t> pool(spans.size());
  std::vector<double> weights(spans.size());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    pool[i] = i;
    weights[i] = spans[i].is_knowledge ? boost * spans[i].weight : 1.0;
  }

  std::vector<WordSpan> selected;
  std::size_t covered = 0;
  while (covered < std::max<std::size_t>(budget, 1) && !pool.empty()) {
    const std::size_t pick = rng.weighted_index(weights);
    const WordSpan& span = spans[pool[pick]];
    selected.push_back(span);
    covered += span.length();
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  std::sort(selected.begin(), selected.end(),
            [](const WordSpan& a, const WordSpan& b) { return a.start < b.start; });
  return selected;
}

MaskedInstance apply_corruption(const std::vector<int>& ids,
                                const std::vector<WordSpan>& selected, int vocab_size, Rng& rng,
                                double mask_prob, double random_prob) {
  if (vocab_size <= Vocab::kNumSpecials) {
    throw std::invalid_argument("apply_corruption: vocab has no non-special ids");
  }
  if (mask_prob < 0.0 || random_prob < 0.0 || mask_prob + random_prob > 1.0) {
    throw std::invalid_argument("apply_corruption: invalid branch probabilities");
  }
  MaskedInstance inst;
  inst.ids = ids;
  for (const auto& span : selected) {
    if (span.start >= span.end || span.end > ids.size()) {
      throw std::invalid_argument("apply_corruption: span out of bounds");
    }
    for (std::size_t p = span.start; p < span.end; ++p) {
      if (ids[p] < Vocab::kNumSpecials) {
        throw std::invalid_argument("apply_corruption: span covers a special token at position " +
                                    std::to_string(p));
      }
    }
    // One draw decides the fate of the whole span.
    const double u = rng.uniform();
    for (std::size_t p = span.start; p < span.end; ++p) {
      inst.mask_positions.push_back(p);
      inst.originals.push_back(ids[p]);
      if (u < mask_prob) {
        inst.ids[p] = Vocab::kMask;
      } else if (u < mask_prob + random_prob) {
        inst.ids[p] = static_cast<int>(rng.uniform_int(Vocab::kNumSpecials, vocab_size - 1));
      }
      // else: keep the original id, position still recorded.
    }
  }
  return inst;
}

std::vector<PretrainInstance> generate_epoch_instances(const std::vector<Document>& documents,
                                                       const KnowledgeLexicon& lexicon,
                                                       const Vocab& vocab,
                                                       const MaskingConfig& cfg, int epoch) {
  Rng rng(derive_seed(cfg.base_seed, "epoch", static_cast<std::uint64_t>(epoch)));
  std::vector<PretrainInstance> out;
  for (const Document& doc : documents) {
    for (const auto& sentence : doc) {
      if (sentence.empty()) continue;
      const auto spans = segment_words(sentence, lexicon);
      const auto selected = select_mask_spans(spans, cfg.rate, cfg.boost, rng);
      PretrainInstance inst;
      inst.kind = PretrainInstance::Kind::kMasked;
      inst.masked = apply_corruption(vocab.encode(sentence), selected,
                                     vocab.size(), rng, cfg.mask_prob, cfg.random_prob);
      inst.masked.epoch = epoch;
      out.push_back(std::move(inst));
    }
    for (std::size_t s = 0; s + 1 < doc.size(); ++s) {
      if (doc[s].empty() || doc[s + 1].empty()) continue;
      PretrainInstance inst;
      inst.kind = PretrainInstance::Kind::kSop;
      const bool swap = rng.bernoulli(0.5);
      const auto& first = swap ? doc[s + 1] : doc[s];
      const auto& second = swap ? doc[s] : doc[s + 1];
      inst.sop.segment_a = vocab.encode(first);
      inst.sop.segment_b = vocab.encode(second);
      inst.sop.order_label = swap ? 0 : 1;
      out.push_back(std::move(inst));
    }
  }
  return out;
}

std::string instance_record_json(const PretrainInstance& inst) {
  nlohmann::ordered_json j;
  if (inst.kind == PretrainInstance::Kind::kMasked) {
    j["kind"] = "masked";
    j["ids"] = inst.masked.ids;
    j["mask_positions"] = inst.masked.mask_positions;
    j["originals"] = inst.masked.originals;
    j["epoch"] = inst.masked.epoch;
  } else {
    j["kind"] = "sop";
    j["segment_a"] = inst.sop.segment_a;
    j["segment_b"] = inst.sop.segment_b;
    j["order_label"] = inst.sop.order_label;
  }
  return j.dump();
}

}  // namespace pclmatch
