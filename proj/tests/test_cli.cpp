#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "durflow_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run durflow(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
  const std::string cmd = std::string(DURFLOW_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return Run{WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::map<std::string, std::string> read_config(const fs::path& path) {
  std::map<std::string, std::string> kv;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

// Corpora and checkpoints shared by the sample and eval tests.
class Trained : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = scratch() / "trained";
    for (const char* style : {"read", "spont"}) {
      const std::string s = style;
      ASSERT_EQ(durflow("gen --style " + s + " --seed 3 --num-sentences 40 --out " + dir_.string()).code, 0);
      for (const char* model : {"det", "fm"}) {
        auto r = durflow("train --model " + std::string(model) + " --steps 30 --seed 3 --corpus " +
                         (dir_ / (s + "-train.corpus")).string() + " --out " + dir_.string());
        ASSERT_EQ(r.code, 0) << r.err;
      }
    }
  }
  static fs::path file(const std::string& name) { return dir_ / name; }
  static inline fs::path dir_;
};

}  // namespace

TEST(CliGen, SameSeedByteIdentical) {
  const auto a = scratch() / "gen_a", b = scratch() / "gen_b";
  ASSERT_EQ(durflow("gen --style read --seed 7 --out " + a.string()).code, 0);
  ASSERT_EQ(durflow("gen --style read --seed 7 --out " + b.string()).code, 0);
  for (const char* name : {"read-train.corpus", "read-validation.corpus"}) {
    const auto x = slurp(a / name);
    EXPECT_FALSE(x.empty());
    EXPECT_EQ(x, slurp(b / name)) << name;
  }
  EXPECT_TRUE(fs::exists(a / "gen.config"));
}

TEST(CliGen, SpontaneousSummaryCountsPausesAndFillers) {
  auto r = durflow("gen --style spont --seed 1 --num-sentences 200 --out " + (scratch() / "gen_spont").string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto first = lines(r.out).front();
  auto count = [&](const std::string& key) {
    const auto at = first.find(key + "=");
    return std::stoul(first.substr(at + key.size() + 1));
  };
  EXPECT_GT(count("pauses"), 0u);
  EXPECT_GT(count("fillers"), 0u);
}

TEST(CliGen, InvalidStyleIsUsageError) {
  auto r = durflow("gen --style whispered --out " + (scratch() / "bad").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << r.err;
  EXPECT_EQ(durflow("gen --steps many").code, 1);
  EXPECT_EQ(durflow("frobnicate").code, 1);
  EXPECT_EQ(durflow("").code, 1);
}

TEST(CliConfig, FlagsOverrideFileOverrideDefaults) {
  const auto dir = scratch() / "config";
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "# test config\nseed=11\nnum_sentences=5\ntemperature=0.5\n";
  }
  auto r = durflow("gen --config " + (dir / "run.cfg").string() + " --seed 12 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  auto kv = read_config(dir / "gen.config");
  EXPECT_EQ(kv.at("seed"), "12");
  EXPECT_EQ(kv.at("num_sentences"), "5");
  EXPECT_EQ(kv.at("temperature"), "0.5");
  EXPECT_EQ(kv.at("nfe"), "10");
  EXPECT_EQ(kv.at("style"), "read");

  // The echoed config reproduces the run.
  const auto again = scratch() / "config_again";
  ASSERT_EQ(durflow("gen --config " + (dir / "gen.config").string() + " --out " + again.string()).code, 0);
  EXPECT_EQ(slurp(dir / "read-train.corpus"), slurp(again / "read-train.corpus"));

  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "seed=1\nflavour=mint\n";
  }
  auto bad = durflow("gen --config " + (dir / "bad.cfg").string() + " --out " + dir.string());
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find(":2"), std::string::npos) << bad.err;
}

TEST(CliTrain, SameSeedSameLossTrajectory) {
  const auto dir = scratch() / "train";
  ASSERT_EQ(durflow("gen --style read --seed 2 --num-sentences 20 --out " + dir.string()).code, 0);
  const std::string corpus = (dir / "read-train.corpus").string();
  const auto a = dir / "a", b = dir / "b";
  ASSERT_EQ(durflow("train --model fm --steps 6 --seed 4 --corpus " + corpus + " --out " + a.string()).code, 0);
  ASSERT_EQ(durflow("train --model fm --steps 6 --seed 4 --corpus " + corpus + " --out " + b.string()).code, 0);
  const auto log = slurp(a / "fm-read-loss.csv");
  EXPECT_EQ(lines(log).size(), 7u);
  EXPECT_EQ(lines(log).front(), "step,lr,loss");
  EXPECT_EQ(log, slurp(b / "fm-read-loss.csv"));
  EXPECT_EQ(slurp(a / "fm-read.ckpt"), slurp(b / "fm-read.ckpt"));
  EXPECT_TRUE(fs::exists(a / "train.config"));
}

TEST(CliTrain, MissingCorpusIsRuntimeError) {
  auto r = durflow("train --corpus " + (scratch() / "nope.corpus").string() + " --out " + scratch().string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.corpus"), std::string::npos) << r.err;
}

TEST_F(Trained, DetRealisationsIdentical) {
  const auto out = scratch() / "sample_det";
  auto r = durflow("sample --checkpoint " + file("det-read.ckpt").string() + " --corpus " +
                   file("read-validation.corpus").string() + " --realisations 3 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = lines(slurp(out / "durations.txt"));
  ASSERT_EQ(rows.size(), 1u + 300u);
  EXPECT_EQ(rows[0].rfind("#durations nfe=10 temperature=0.667 seed=0 model=det-", 0), 0u) << rows[0];
  for (std::size_t s = 0; s < 100; ++s) {
    EXPECT_EQ(rows[1 + 3 * s], rows[2 + 3 * s]);
    EXPECT_EQ(rows[1 + 3 * s], rows[3 + 3 * s]);
  }
}

TEST_F(Trained, FmTemperatureZeroRealisationsIdentical) {
  const auto out = scratch() / "sample_t0";
  ASSERT_EQ(durflow("sample --checkpoint " + file("fm-spont.ckpt").string() + " --corpus " +
                    file("spont-validation.corpus").string() + " --temperature 0 --out " + out.string())
                .code,
            0);
  auto rows = lines(slurp(out / "durations.txt"));
  ASSERT_EQ(rows.size(), 1u + 500u);  // five realisations by default
  for (std::size_t s = 0; s < 100; ++s) {
    for (std::size_t r = 1; r < 5; ++r) EXPECT_EQ(rows[1 + 5 * s], rows[1 + 5 * s + r]);
  }
}

TEST_F(Trained, FmFixedSeedReproducible) {
  const auto a = scratch() / "sample_a", b = scratch() / "sample_b", c = scratch() / "sample_c";
  const std::string args =
      "sample --checkpoint " + file("fm-read.ckpt").string() + " --corpus " + file("read-validation.corpus").string();
  ASSERT_EQ(durflow(args + " --seed 5 --out " + a.string()).code, 0);
  ASSERT_EQ(durflow(args + " --seed 5 --out " + b.string()).code, 0);
  ASSERT_EQ(durflow(args + " --seed 6 --out " + c.string()).code, 0);
  EXPECT_EQ(slurp(a / "durations.txt"), slurp(b / "durations.txt"));
  EXPECT_NE(slurp(a / "durations.txt"), slurp(c / "durations.txt"));
  auto rows = lines(slurp(a / "durations.txt"));
  std::set<std::string> distinct(rows.begin() + 1, rows.begin() + 6);
  EXPECT_GT(distinct.size(), 1u);
}

TEST_F(Trained, ModelKindMismatchIsRuntimeError) {
  auto r = durflow("sample --model det --checkpoint " + file("fm-read.ckpt").string() + " --corpus " +
                   file("read-validation.corpus").string() + " --out " + (scratch() / "mismatch").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("fm"), std::string::npos) << r.err;
}

TEST_F(Trained, EvalNamesMissingCheckpoint) {
  auto r = durflow("eval --checkpoint " + file("det-read.ckpt").string() + " --checkpoint " +
                   (scratch() / "ghost-fm.ckpt").string() + " --corpus " + file("read-validation.corpus").string() +
                   " --out " + (scratch() / "eval_missing").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("ghost-fm.ckpt"), std::string::npos) << r.err;
  auto only_det = durflow("eval --checkpoint " + file("det-read.ckpt").string() + " --corpus " +
                          file("read-validation.corpus").string() + " --out " + (scratch() / "eval_det").string());
  EXPECT_EQ(only_det.code, 2);
}

TEST_F(Trained, EvalGridReproducibleWithFlatDetRows) {
  std::string args = "eval --repetitions 1";
  for (const char* ck : {"det-read.ckpt", "fm-read.ckpt", "det-spont.ckpt", "fm-spont.ckpt"}) {
    args += " --checkpoint " + file(ck).string();
  }
  for (const char* corpus : {"read-validation.corpus", "spont-validation.corpus"}) {
    args += " --corpus " + file(corpus).string();
  }
  const auto a = scratch() / "eval_a", b = scratch() / "eval_b";
  auto r = durflow(args + " --out " + a.string());
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(durflow(args + " --out " + b.string()).code, 0);
  for (const char* name : {"residual.csv", "dist.csv", "bench.csv"}) EXPECT_TRUE(fs::exists(a / name)) << name;
  EXPECT_EQ(slurp(a / "residual.csv"), slurp(b / "residual.csv"));
  EXPECT_EQ(slurp(a / "dist.csv"), slurp(b / "dist.csv"));

  auto rows = lines(slurp(a / "residual.csv"));
  EXPECT_EQ(rows.size(), 1u + 4u * 7u);  // each checkpoint scored on its own corpus style
  std::map<std::string, std::set<std::string>> det_values;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.rfind("det,", 0) != 0) continue;
    const auto corpus = row.substr(4, row.find(',', 4) - 4);
    det_values[corpus].insert(row.substr(row.rfind(',') + 1));
  }
  ASSERT_EQ(det_values.size(), 2u);
  for (const auto& [corpus, values] : det_values) EXPECT_EQ(values.size(), 1u) << corpus;

  auto bench = lines(slurp(a / "bench.csv"));
  EXPECT_EQ(bench.front(), "model,nfe,median_ms,ms_per_nfe");
  EXPECT_EQ(bench.size(), 1u + 4u * 8u);
}
