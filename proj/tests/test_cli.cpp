#include "pclmatch/cli.hpp"

#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"

using namespace pclmatch;

namespace {

int run(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.push_back("pclmatch");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const auto& a : full) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

void gen_tiny_data(const std::string& dir, const std::string& seed = "5") {
  REQUIRE(run({"gen-data", "--out-dir", dir, "--train-size", "160", "--dev-size", "40",
               "--test-size", "40", "--s1-len", "4", "--s1-jitter", "1", "--s2-len", "6",
               "--s2-jitter", "2", "--vocab-size", "100", "--seed", seed}) == 0);
}

std::vector<std::string> tiny_train_flags(const std::string& data_dir,
                                          const std::string& out_dir) {
  return {"train",
          "--data.train", data_dir + "/train.jsonl",
          "--data.dev", data_dir + "/dev.jsonl",
          "--data.tokenize_mode", "whitespace",
          "--encoder.dim", "16",
          "--encoder.layers", "1",
          "--encoder.heads", "2",
          "--encoder.ffn_dim", "32",
          "--encoder.max_len", "20",
          "--train.epochs", "1",
          "--train.batch_size", "32",
          "--out_dir", out_dir};
}

}  // namespace

TEST_CASE("cli: usage errors exit with status 2") {
  CHECK(run({"no-such-command"}) == 2);
  CHECK(run({}) == 2);
  CHECK(run({"stats", "--bogus-flag", "x"}) == 2);
  CHECK(run({"--help"}) == 0);
}

TEST_CASE("cli: gen-data is reproducible and stats reads it back") {
  testutil::TempDir dir;
  const auto a = (dir.path() / "a").string();
  const auto b = (dir.path() / "b").string();
  gen_tiny_data(a);
  gen_tiny_data(b);
  for (const char* name : {"train.jsonl", "dev.jsonl", "test_public.jsonl"}) {
    CHECK(testutil::read_file(dir.path() / "a" / name) ==
          testutil::read_file(dir.path() / "b" / name));
  }

  const auto c = (dir.path() / "c").string();
  gen_tiny_data(c, "6");
  CHECK(testutil::read_file(dir.path() / "a" / "train.jsonl") !=
        testutil::read_file(dir.path() / "c" / "train.jsonl"));

  CHECK(run({"stats", "--data", a + "/train.jsonl", "--mode", "whitespace", "--json-out",
             (dir.path() / "stats.json").string()}) == 0);
  const auto record = testutil::read_file(dir.path() / "stats.json");
  CHECK(record.find("\"ratio\":[2.0,5.0,1.0]") != std::string::npos);
}

TEST_CASE("cli: bad config values exit 1 and name the field") {
  testutil::TempDir dir;
  gen_tiny_data((dir.path() / "d").string());
  auto flags = tiny_train_flags((dir.path() / "d").string(), (dir.path() / "out").string());
  flags.push_back("--loss.alpha");
  flags.push_back("2.0");
  CHECK(run(flags) == 1);

  // Unknown key in a config file.
  testutil::write_file(dir.file("bad.cfg"), "nonsense.key = 1\n");
  CHECK(run({"train", "--config", dir.file("bad.cfg").string()}) == 1);

  // Missing data path.
  CHECK(run({"train", "--out_dir", (dir.path() / "out2").string()}) == 1);
}

TEST_CASE("cli: train writes artifacts and the echoed config reproduces the run") {
  testutil::TempDir dir;
  const auto data = (dir.path() / "d").string();
  gen_tiny_data(data);

  const auto out1 = (dir.path() / "run1").string();
  REQUIRE(run(tiny_train_flags(data, out1)) == 0);
  for (const char* name :
       {"checkpoint.bin", "vocab.txt", "history.jsonl", "config_echo.cfg", "metrics.json",
        "confusion.txt"}) {
    CHECK(std::filesystem::exists(std::filesystem::path(out1) / name));
  }

  const auto out2 = (dir.path() / "run2").string();
  REQUIRE(run({"train", "--config", out1 + "/config_echo.cfg", "--out_dir", out2}) == 0);
  for (const char* name : {"checkpoint.bin", "vocab.txt", "history.jsonl", "metrics.json"}) {
    CHECK(testutil::read_file(std::filesystem::path(out1) / name) ==
          testutil::read_file(std::filesystem::path(out2) / name));
  }
}

TEST_CASE("cli: eval consumes a trained checkpoint") {
  testutil::TempDir dir;
  const auto data = (dir.path() / "d").string();
  gen_tiny_data(data);
  const auto out = (dir.path() / "run").string();
  REQUIRE(run(tiny_train_flags(data, out)) == 0);

  const auto eval_out = (dir.path() / "eval").string();
  CHECK(run({"eval", "--checkpoint", out + "/checkpoint.bin", "--vocab", out + "/vocab.txt",
             "--data", data + "/test_public.jsonl", "--mode", "whitespace", "--out",
             eval_out}) == 0);
  CHECK(std::filesystem::exists(std::filesystem::path(eval_out) / "metrics.json"));
  CHECK(std::filesystem::exists(std::filesystem::path(eval_out) / "confusion.txt"));

  CHECK(run({"eval", "--checkpoint", out + "/checkpoint.bin", "--vocab", out + "/vocab.txt",
             "--data", data + "/missing.jsonl"}) == 1);
}

TEST_CASE("cli: mask-instances writes one record per instance") {
  testutil::TempDir dir;
  testutil::write_file(dir.file("docs.txt"), "北京很大\n上海也很大\n\n天气不错\n");
  testutil::write_file(dir.file("lex.txt"), "北京\n上海\n");
  const auto out = dir.file("inst.jsonl").string();
  REQUIRE(run({"mask-instances", "--docs", dir.file("docs.txt").string(), "--lexicon",
               dir.file("lex.txt").string(), "--epoch", "0", "--seed", "3", "--out", out}) == 0);
  const auto text = testutil::read_file(out);
  CHECK(text.find("\"kind\":\"masked\"") != std::string::npos);
  CHECK(text.find("\"kind\":\"sop\"") != std::string::npos);

  // 3 sentences -> 3 masked instances; 1 adjacent pair -> 1 order instance.
  int lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == 4);

  // Same seed, same output.
  const auto out2 = dir.file("inst2.jsonl").string();
  REQUIRE(run({"mask-instances", "--docs", dir.file("docs.txt").string(), "--lexicon",
               dir.file("lex.txt").string(), "--epoch", "0", "--seed", "3", "--out", out2}) ==
          0);
  CHECK(testutil::read_file(out2) == text);
}

TEST_CASE("cli: grad-check passes at the documented threshold") {
  CHECK(run({"grad-check", "--seed", "7", "--configs", "2", "--coords", "25"}) == 0);
}

TEST_CASE("cli: PCLMATCH_OUT_DIR steers the output directory, flags still win") {
  testutil::TempDir dir;
  const auto data = (dir.path() / "d").string();
  gen_tiny_data(data);

  const auto env_out = (dir.path() / "from_env").string();
  setenv("PCLMATCH_OUT_DIR", env_out.c_str(), 1);
  auto flags = tiny_train_flags(data, "");
  flags.pop_back();  // drop the --out_dir value
  flags.pop_back();  // and the flag itself
  REQUIRE(run(flags) == 0);
  CHECK(std::filesystem::exists(std::filesystem::path(env_out) / "checkpoint.bin"));

  const auto flag_out = (dir.path() / "from_flag").string();
  REQUIRE(run(tiny_train_flags(data, flag_out)) == 0);
  CHECK(std::filesystem::exists(std::filesystem::path(flag_out) / "checkpoint.bin"));
  unsetenv("PCLMATCH_OUT_DIR");
}

TEST_CASE("cli: ablate emits rows and a delta report") {
  testutil::TempDir dir;
  const auto data = (dir.path() / "d").string();
  gen_tiny_data(data);
  const auto out = (dir.path() / "ab").string();
  auto flags = std::vector<std::string>{
      "ablate",
      "--data.train", data + "/train.jsonl",
      "--data.dev", data + "/dev.jsonl",
      "--data.test", data + "/test_public.jsonl",
      "--data.tokenize_mode", "whitespace",
      "--encoder.dim", "16",
      "--encoder.layers", "1",
      "--encoder.heads", "2",
      "--encoder.ffn_dim", "32",
      "--encoder.max_len", "20",
      "--train.epochs", "1",
      "--seeds", "1,2",
      "--losses", "ls,pcl-multiplicative",
      "--jobs", "2",
      "--out_dir", out};
  REQUIRE(run(flags) == 0);
  const auto report = testutil::read_file(std::filesystem::path(out) / "ablation_report.md");
  CHECK(report.find("| ls |") != std::string::npos);
  CHECK(report.find("| pcl-multiplicative |") != std::string::npos);
  CHECK(report.find("(") != std::string::npos);
  const auto rows = testutil::read_file(std::filesystem::path(out) / "ablation_rows.jsonl");
  int lines = 0;
  for (char c : rows) lines += c == '\n';
  CHECK(lines == 4);
}
