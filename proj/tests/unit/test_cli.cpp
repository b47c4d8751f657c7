#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <unistd.h>

#include "catse/wav.hpp"
#include "catse/weights.hpp"
#include "catse_cli/cli.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "catse");
  std::ostringstream out, err;
  const int code = catse::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("catse_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string make_weights(catse::Variant v) {
    auto file = path(std::string(catse::to_string(v)) + ".ckpt");
    catse::save_weights(catse::initialize_weights(oracle::small_config(v, 8, 8), 1), file);
    return file;
  }

  fs::path dir_;
};

std::string tree_bytes(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += fs::relative(f, root).string() + "\n" + catse::read_file(f);
  return all;
}

}  // namespace

TEST_F(Cli, SynthIsDeterministic) {
  auto a = run({"synth", "--out", path("a"), "--scenes", "3", "--classes", "8", "--seed", "7"});
  auto b = run({"synth", "--out", path("b"), "--scenes", "3", "--classes", "8", "--seed", "7"});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out.rfind("config {", 0), 0u);
  EXPECT_EQ(tree_bytes(path("a")), tree_bytes(path("b")));
}

TEST_F(Cli, EvalAllPrintsFourColumns) {
  ASSERT_EQ(run({"synth", "--out", path("d"), "--scenes", "2", "--classes", "8", "--seed", "1"}).code, 0);
  auto w = make_weights(catse::Variant::pctcn);
  auto r = run({"eval", "--weights", w, "--data", path("d"), "--targets", "all"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* col : {"1 target", "2 targets", "3 targets", "Avg."}) EXPECT_NE(r.out.find(col), std::string::npos);
  EXPECT_NE(r.out.find("config {"), std::string::npos);
}

TEST_F(Cli, StreamContracts) {
  std::mt19937_64 rng(1);
  catse::write_wav(path("in.wav"), oracle::random_waveform(16000 + 30, rng, 0.1));
  auto pc = make_weights(catse::Variant::pctcn);
  auto ec = make_weights(catse::Variant::ecatse);
  EXPECT_EQ(run({"stream", "--weights", pc, "--in", path("in.wav"), "--out", path("o.wav"), "--hint", "3",
                 "--oracle", "1,3"}).code, catse::cli::kExitUsage);
  EXPECT_EQ(run({"stream", "--weights", ec, "--in", path("in.wav"), "--out", path("o.wav"), "--hint", "3"}).code,
            catse::cli::kExitUsage);
  EXPECT_EQ(run({"stream", "--weights", pc, "--in", path("in.wav"), "--out", path("o.wav"), "--hint", "dog"}).code,
            catse::cli::kExitUsage);
  auto ok = run({"stream", "--weights", ec, "--in", path("in.wav"), "--out", path("o.wav"), "--hint", "3,7",
                 "--oracle", "1,3,7"});
  ASSERT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(catse::read_wav(path("o.wav")).samples.size(), 16030u);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, catse::cli::kExitUsage);
  EXPECT_EQ(run({"train", "--bogus"}).code, catse::cli::kExitUsage);
  EXPECT_EQ(run({"eval", "--weights", path("missing.ckpt"), "--data", path("nowhere")}).code, catse::cli::kExitData);
  catse::write_file_atomic(path("junk.ckpt"), "not a checkpoint");
  EXPECT_EQ(run({"bench", "--weights", path("junk.ckpt")}).code, catse::cli::kExitData);
  ASSERT_EQ(run({"synth", "--out", path("d"), "--scenes", "1", "--classes", "8"}).code, 0);
  EXPECT_EQ(run({"train", "--model", "pctcn", "--lambda", "0.3", "--data", path("d"), "--out", path("x")}).code,
            catse::cli::kExitUsage);
}

TEST_F(Cli, TrainWritesLoadableCheckpoint) {
  ASSERT_EQ(run({"synth", "--out", path("d"), "--scenes", "2", "--classes", "8", "--seed", "3"}).code, 0);
  auto r = run({"train", "--model", "icatse", "--data", path("d"), "--epochs", "1", "--hidden", "4", "--seed",
                "2", "--out", path("m.ckpt"), "--holdout", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"L_c\""), std::string::npos);
  auto w = catse::load_weights(path("m.ckpt"), catse::LoadMode::training);
  EXPECT_EQ(w.config.variant, catse::Variant::icatse);
  auto b = run({"bench", "--weights", path("m.ckpt"), "--seconds", "0.2"});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_NE(b.out.find("hop_p99_us"), std::string::npos);
}
