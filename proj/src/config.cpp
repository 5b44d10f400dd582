#include "pclmatch/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pclmatch {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw std::invalid_argument("invalid value for " + key + ": \"" + value + "\"");
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  std::int64_t out = 0;
  const auto* begin = value.data();
  const auto* end = value.data() + value.size();
  const auto res = std::from_chars(begin, end, out);
  if (res.ec != std::errc{} || res.ptr != end) bad_value(key, value);
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* begin = value.data();
  const auto* end = value.data() + value.size();
  const auto res = std::from_chars(begin, end, out);
  if (res.ec != std::errc{} || res.ptr != end) bad_value(key, value);
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t consumed = 0;
    const double out = std::stod(value, &consumed);
    if (consumed != value.size()) bad_value(key, value);
    return out;
  } catch (const std::invalid_argument&) {
    bad_value(key, value);
  } catch (const std::out_of_range&) {
    bad_value(key, value);
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  bad_value(key, value);
}

std::string format_double(double x) {
  std::ostringstream out;
  out.precision(17);
  out << x;
  return out.str();
}

}  // namespace

ConfigEntries parse_config_text(std::string_view text, const std::string& source_name) {
  ConfigEntries entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(source_name + " line " + std::to_string(line_no) +
                                  ": expected \"key = value\"");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument(source_name + " line " + std::to_string(line_no) +
                                  ": empty key");
    }
    entries.emplace_back(key, value);
  }
  return entries;
}

ConfigEntries parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "seed") {
    seed = parse_u64(key, value);
    train.seed = seed;
  } else if (key == "out_dir") {
    out_dir = value;
  } else if (key == "data.train") {
    train_path = value;
  } else if (key == "data.dev") {
    dev_path = value;
  } else if (key == "data.test") {
    test_path = value;
  } else if (key == "data.lexicon") {
    lexicon_path = value;
  } else if (key == "data.tokenize_mode") {
    try {
      train.tokenize_mode = tokenize_mode_from_string(value);
    } catch (const std::exception&) {
      bad_value(key, value);
    }
  } else if (key == "loss.kind") {
    try {
      train.loss_kind = loss_kind_from_string(value);
    } catch (const std::exception&) {
      bad_value(key, value);
    }
  } else if (key == "loss.alpha") {
    train.loss.alpha = parse_double(key, value);
  } else if (key == "loss.epsilon") {
    train.loss.epsilon = parse_double(key, value);
  } else if (key == "loss.mode") {
    try {
      train.loss.mode = correction_mode_from_string(value);
    } catch (const std::exception&) {
      bad_value(key, value);
    }
  } else if (key == "loss.scope") {
    try {
      train.loss.scope = correction_scope_from_string(value);
    } catch (const std::exception&) {
      bad_value(key, value);
    }
  } else if (key == "loss.clamp_nonnegative") {
    train.loss.clamp_nonnegative = parse_bool(key, value);
  } else if (key.rfind("loss.table.", 0) == 0) {
    const std::string cell = key.substr(std::string("loss.table.").size());
    if (cell.size() != 4 || cell[0] != 't' || cell[2] != 'p' || cell[1] < '0' || cell[1] > '2' ||
        cell[3] < '0' || cell[3] > '2') {
      throw std::invalid_argument("unknown config key: " + key +
                                  " (condition cells are loss.table.t<0-2>p<0-2>)");
    }
    Condition cond = Condition::kNeutral;
    try {
      cond = condition_from_token(value);
    } catch (const std::exception&) {
      bad_value(key, value);
    }
    train.loss.table[static_cast<std::size_t>(cell[1] - '0')]
                    [static_cast<std::size_t>(cell[3] - '0')] = cond;
  } else if (key == "encoder.dim") {
    train.encoder.dim = static_cast<int>(parse_int(key, value));
  } else if (key == "encoder.layers") {
    train.encoder.layers = static_cast<int>(parse_int(key, value));
  } else if (key == "encoder.heads") {
    train.encoder.heads = static_cast<int>(parse_int(key, value));
  } else if (key == "encoder.ffn_dim") {
    train.encoder.ffn_dim = static_cast<int>(parse_int(key, value));
  } else if (key == "encoder.max_len") {
    train.encoder.max_len = static_cast<int>(parse_int(key, value));
  } else if (key == "encoder.dropout") {
    train.encoder.dropout_rate = parse_double(key, value);
  } else if (key == "train.epochs") {
    train.epochs = static_cast<int>(parse_int(key, value));
  } else if (key == "train.batch_size") {
    train.batch_size = static_cast<int>(parse_int(key, value));
  } else if (key == "train.learning_rate") {
    train.learning_rate = parse_double(key, value);
  } else if (key == "train.optimizer") {
    try {
      train.optimizer = optimizer_kind_from_string(value);
    } catch (const std::exception&) {
      bad_value(key, value);
    }
  } else if (key == "train.adam_beta1") {
    train.adam_beta1 = parse_double(key, value);
  } else if (key == "train.adam_beta2") {
    train.adam_beta2 = parse_double(key, value);
  } else if (key == "train.adam_eps") {
    train.adam_eps = parse_double(key, value);
  } else if (key == "train.patience") {
    train.patience = static_cast<int>(parse_int(key, value));
  } else if (key == "train.model_tag") {
    train.model_tag = value;
  } else {
    throw std::invalid_argument("unknown config key: " + key);
  }
}

void RunConfig::apply(const ConfigEntries& entries) {
  for (const auto& [key, value] : entries) set(key, value);
}

ConfigEntries RunConfig::to_entries() const {
  ConfigEntries e;
  e.emplace_back("seed", std::to_string(seed));
  e.emplace_back("out_dir", out_dir);
  e.emplace_back("data.train", train_path);
  e.emplace_back("data.dev", dev_path);
  e.emplace_back("data.test", test_path);
  e.emplace_back("data.lexicon", lexicon_path);
  e.emplace_back("data.tokenize_mode", std::string(to_string(train.tokenize_mode)));
  e.emplace_back("loss.kind", std::string(to_string(train.loss_kind)));
  e.emplace_back("loss.alpha", format_double(train.loss.alpha));
  e.emplace_back("loss.epsilon", format_double(train.loss.epsilon));
  e.emplace_back("loss.mode", std::string(to_string(train.loss.mode)));
  e.emplace_back("loss.scope", std::string(to_string(train.loss.scope)));
  e.emplace_back("loss.clamp_nonnegative", train.loss.clamp_nonnegative ? "true" : "false");
  for (int t = 0; t < 3; ++t) {
    for (int p = 0; p < 3; ++p) {
      e.emplace_back("loss.table.t" + std::to_string(t) + "p" + std::to_string(p),
                     std::string(to_config_token(
                         train.loss.table[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)])));
    }
  }
  e.emplace_back("encoder.dim", std::to_string(train.encoder.dim));
  e.emplace_back("encoder.layers", std::to_string(train.encoder.layers));
  e.emplace_back("encoder.heads", std::to_string(train.encoder.heads));
  e.emplace_back("encoder.ffn_dim", std::to_string(train.encoder.ffn_dim));
  e.emplace_back("encoder.max_len", std::to_string(train.encoder.max_len));
  e.emplace_back("encoder.dropout", format_double(train.encoder.dropout_rate));
  e.emplace_back("train.epochs", std::to_string(train.epochs));
  e.emplace_back("train.batch_size", std::to_string(train.batch_size));
  e.emplace_back("train.learning_rate", format_double(train.learning_rate));
  e.emplace_back("train.optimizer", std::string(to_string(train.optimizer)));
  e.emplace_back("train.adam_beta1", format_double(train.adam_beta1));
  e.emplace_back("train.adam_beta2", format_double(train.adam_beta2));
  e.emplace_back("train.adam_eps", format_double(train.adam_eps));
  e.emplace_back("train.patience", std::to_string(train.patience));
  e.emplace_back("train.model_tag", train.model_tag);
  return e;
}

RunConfig RunConfig::from_entries(const ConfigEntries& entries) {
  RunConfig cfg;
  cfg.apply(entries);
  return cfg;
}

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [key, value] : RunConfig().to_entries()) out.push_back(key);
    return out;
  }();
  return keys;
}

void RunConfig::validate() const { train.validate(); }

std::string RunConfig::render() const {
  std::ostringstream out;
  for (const auto& [key, value] : to_entries()) out << key << " = " << value << '\n';
  return out.str();
}

void RunConfig::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path.string());
  out << render();
}

}  // namespace pclmatch
