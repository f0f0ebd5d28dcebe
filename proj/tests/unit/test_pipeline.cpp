#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include "codespot/pipeline/pipeline.hpp"
#include "codespot/pipeline/pipeline_config.hpp"
#include "codespot/util/binary_io.hpp"
#include "test_support.hpp"

namespace codespot::pipeline {
namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CODESPOT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

PipelineConfig tiny_config(const fs::path& run_dir) {
  auto c = default_config();
  for (const char* kv : {"model.context_len=16", "model.d_model=8", "model.n_heads=2", "model.n_layers=1",
                         "corpus.code_docs=20", "corpus.general_docs=20", "pretrain.steps=20",
                         "finetune.steps=3", "ablation.random_seeds=2", "ablation.k_list=1,10",
                         "ablation.max_eval_docs=4"}) {
    const std::string s(kv);
    const auto eq = s.find('=');
    c.set(s.substr(0, eq), s.substr(eq + 1));
  }
  c.run_dir = run_dir;
  return c;
}

TEST(Config, DefaultFileMatchesBuiltInDefaults) {
  const auto from_file = load_config(CODESPOT_CONFIG_DIR "/default.ini");
  EXPECT_EQ(from_file.to_ini(), default_config().to_ini());
  EXPECT_EQ(from_file.ablation.k_list, (std::vector<double>{0.0025, 0.01, 0.09, 0.25}));
  EXPECT_EQ(from_file.holdout, "py_like");
  EXPECT_EQ(from_file.ablation.random_seeds, 10U);
}

TEST(Config, RoundTripsThroughIni) {
  auto c = default_config();
  c.set("pretrain.learning_rate", "0.0125");
  c.set("languages.include", "c_like,rpn_like");
  c.set("importance.normalize", "true");
  c.set("finetune.gradient_mode", "final_batch");
  const auto back = parse_config(c.to_ini());
  EXPECT_EQ(back.to_ini(), c.to_ini());
  EXPECT_EQ(back.pretrain.train.learning_rate, 0.0125);
  EXPECT_EQ(back.include, (std::vector<std::string>{"c_like", "rpn_like"}));
  EXPECT_TRUE(back.normalize);
}

TEST(Config, Errors) {
  EXPECT_ERROR_KIND(parse_config("[model]\nwidth = 3\n"), ErrorKind::kConfig);
  EXPECT_ERROR_KIND(parse_config("[model]\nd_model = lots\n"), ErrorKind::kConfig);
  auto c = default_config();
  EXPECT_ERROR_KIND(c.set("nosection", "1"), ErrorKind::kConfig);
  c.set("languages.holdout", "c_like");
  EXPECT_ERROR_KIND(c.validate(), ErrorKind::kConfig);
  for (const char* k : {"0", "100.5", "-1"}) {
    auto d = default_config();
    d.set("ablation.k_list", k);
    SCOPED_TRACE(k);
    EXPECT_ERROR_KIND(d.validate(), ErrorKind::kConfig);
  }
  auto e = default_config();
  e.set("ablation.k_list", "100");
  EXPECT_NO_THROW(e.validate());
  auto g = default_config();
  g.set("languages.include", "c_like,fortran_like");
  EXPECT_ERROR_KIND(g.validate(), ErrorKind::kConfig);
  EXPECT_ERROR_KIND(load_config("/nonexistent/x.ini"), ErrorKind::kConfig);
}

TEST(Config, OverridesAndEnvironment) {
  testing::ScratchDir dir("config_env");
  write_text_file(dir.path() / "c.ini", "[output]\nrun_dir = from_file\n[finetune]\nsteps = 7\n");
  ::unsetenv(kRunDirEnv);
  auto c = load_config(dir.path() / "c.ini", {"finetune.steps=9"});
  EXPECT_EQ(c.run_dir, "from_file");
  EXPECT_EQ(c.finetune.steps, 9U);
  ::setenv(kRunDirEnv, "/tmp/from_env", 1);
  EXPECT_EQ(load_config(dir.path() / "c.ini").run_dir, "/tmp/from_env");
  ::unsetenv(kRunDirEnv);
  EXPECT_ERROR_KIND(load_config(dir.path() / "c.ini", {"finetune.steps"}), ErrorKind::kConfig);
}

TEST(Corpora, HoldoutIncludedInPretraining) {
  const auto c = tiny_config("unused");
  const auto corpora = build_corpora(c, 20, 20);
  EXPECT_EQ(corpora.code.size(), 4U);
  EXPECT_TRUE(corpora.code.contains("py_like"));
  const auto all = pretraining_corpus(corpora);
  std::size_t expected = corpora.general.train.documents.size();
  for (const auto& [name, s] : corpora.code) expected += s.train.documents.size();
  EXPECT_EQ(all.documents.size(), expected);
}

TEST(Stages, SmallRunIsReproducible) {
  testing::ScratchDir a("stages_a");
  testing::ScratchDir b("stages_b");
  for (const auto* dir : {&a, &b}) {
    const auto c = tiny_config(dir->path());
    EXPECT_TRUE(cmd_pretrain(c).ok);
    const auto spot = cmd_spot(c);
    EXPECT_TRUE(spot.ok);
    cmd_ablate(c);
    cmd_report(c);
  }
  RunLayout la(a.path()), lb(b.path());
  for (const fs::path rel : {"checkpoints/base.ckpt", "maps/total.imap", "maps/c_like.imap",
                             "reports/ablation.json", "reports/ablation_table.csv", "reports/summary.json"}) {
    ASSERT_TRUE(fs::exists(a.path() / rel)) << rel;
    EXPECT_EQ(read_text_file(a.path() / rel), read_text_file(b.path() / rel)) << rel;
  }
  EXPECT_TRUE(fs::exists(la.spot_mask(1.0)));
  EXPECT_EQ(read_text_file(la.spot_mask(10.0)), read_text_file(lb.spot_mask(10.0)));
}

TEST(Stages, SpotWithoutCheckpointFails) {
  testing::ScratchDir dir("stages_missing");
  EXPECT_ERROR_KIND(cmd_spot(tiny_config(dir.path())), ErrorKind::kIo);
}

TEST(Cli, ExitCodes) {
  testing::ScratchDir dir("cli");
  const std::string fixture = CODESPOT_DATA_DIR "/table1_fixture.csv";
  EXPECT_EQ(run_cli("ablate --fixture " + fixture + " --fixture-out " + dir.path().string()), 0);
  EXPECT_TRUE(fs::exists(dir.path() / "fixture_table.csv"));
  EXPECT_TRUE(fs::exists(dir.path() / "fixture_closure.json"));

  std::string text = read_text_file(fixture);
  text.replace(text.find(",5.44"), 5, ",5.60");
  write_text_file(dir.path() / "bad.csv", text);
  EXPECT_EQ(run_cli("ablate --fixture " + (dir.path() / "bad.csv").string() + " --fixture-out " +
                    dir.path().string()), 1);

  EXPECT_EQ(run_cli("-c " CODESPOT_CONFIG_DIR "/default.ini -s ablation.k_list=0 -r " +
                    dir.path().string() + " pretrain"), 2);
  EXPECT_EQ(run_cli("-c " CODESPOT_CONFIG_DIR "/default.ini -s model.colour=red pretrain"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("-c /nonexistent.ini pretrain"), 2);
  EXPECT_EQ(run_cli("-c " CODESPOT_CONFIG_DIR "/default.ini -r " + (dir.path() / "empty").string() + " spot"), 1);
}

}  // namespace
}  // namespace codespot::pipeline
