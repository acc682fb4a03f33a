#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ctpoir/report.hpp"
#include "ctpoir/volume_io.hpp"
#include "oracles.hpp"

using namespace ctpoir;

namespace {

class Cli : public ::testing::Test {
 protected:
  // Runs the tool with `args`, output captured in dir/log.txt.
  int run(const std::string& args) {
    const std::string cmd = std::string(CTPOIR_CLI_PATH) + " " + args + " > " + (dir / "log.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string log() const { return slurp(dir / "log.txt"); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }

  std::string q(const fs::path& p) const { return "'" + p.string() + "'"; }

  // A small phantom with decoys; shared by every test in the suite.
  static void SetUpTestSuite() {
    shared_ = new oracle::TempDir("ctpoir-cli");
    const std::string cmd = std::string(CTPOIR_CLI_PATH) + " --seed 4 phantom --preset decoys --dicom --out-dir '" +
                            (*shared_ / "ph").string() + "' > /dev/null 2>&1";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
  }
  static void TearDownTestSuite() {
    delete shared_;
    shared_ = nullptr;
  }
  static fs::path ph() { return *shared_ / "ph"; }

  oracle::TempDir dir;

 private:
  static inline oracle::TempDir* shared_ = nullptr;
};

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("analyze"), 2);
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("analyze " + q(dir / "missing.json") + " --out-dir " + q(dir / "o")), 2);
  EXPECT_EQ(run("--config " + q(dir / "none.json") + " phantom --out-dir " + q(dir / "o")), 2);
  std::ofstream(dir / "bad.json") << "{not json";
  EXPECT_EQ(run("--config " + q(dir / "bad.json") + " phantom --out-dir " + q(dir / "o")), 2);
  EXPECT_EQ(run("segment " + q(ph() / "volume.json") + " --out " + q(dir / "m.json")), 2);
}

TEST_F(Cli, PhantomOutputs) {
  for (const char* f : {"spec.json", "volume.json", "volume.raw", "lung.json", "infected.json", "decoys.json"})
    EXPECT_TRUE(fs::exists(ph() / f)) << f;
  EXPECT_TRUE(fs::exists(ph() / "dicom" / "IM00000.dcm"));
  const auto spec = nlohmann::json::parse(slurp(ph() / "spec.json"));
  EXPECT_EQ(spec.at("seed"), 4);
  EXPECT_TRUE(spec.contains("tube"));
}

TEST_F(Cli, ConvertMatchesInternalVolume) {
  ASSERT_EQ(run("convert " + q(ph() / "dicom") + " --out " + q(dir / "v.json")), 0) << log();
  EXPECT_EQ(read_internal(dir / "v.json"), read_internal(ph() / "volume.json"));
}

TEST_F(Cli, PipelineFailureExitsThree) {
  std::ofstream(dir / "scores.csv") << "region_id,score\n";
  EXPECT_EQ(run("analyze " + q(ph() / "volume.json") + " --out-dir " + q(dir / "o") + " --filter sidecar --scores " +
                q(dir / "scores.csv")),
            3)
      << log();
  EXPECT_NE(log().find("[filter]"), std::string::npos);
}

TEST_F(Cli, AnalyzeIsByteIdenticalAcrossThreadCounts) {
  ASSERT_EQ(run("--threads 1 analyze " + q(ph() / "volume.json") + " --out-dir " + q(dir / "t1")), 0) << log();
  ASSERT_EQ(run("analyze " + q(ph() / "volume.json") + " --out-dir " + q(dir / "t8") + " --threads 8"), 0) << log();
  for (const char* f : {"report.json", "lung.json", "lung.raw", "infected.json", "infected.raw"}) {
    const auto a = slurp(dir / "t1" / f), b = slurp(dir / "t8" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, b) << f;
  }
}

TEST_F(Cli, AnalyzeWithGroundTruthMasks) {
  ASSERT_EQ(run("analyze " + q(ph() / "volume.json") + " --out-dir " + q(dir / "o") + " --lung-mask " +
                q(ph() / "lung.json") + " --infected-mask " + q(ph() / "infected.json") + " --filter none"),
            0)
      << log();
  const auto report = report_from_json(nlohmann::json::parse(slurp(dir / "o" / "report.json")));
  const auto lung = read_mask(ph() / "lung.json"), inf = read_mask(ph() / "infected.json");
  EXPECT_NEAR(report.poir_fraction, double(inf.count()) / double(lung.count()), 1e-12);
}

TEST_F(Cli, ConfigSuppliesAnalysisSettings) {
  std::ofstream(dir / "cfg.json") << R"({"threads": 2, "analysis": {"infected": {"threshold_hu": -200},
                                       "filter": {"mode": "none"}}})";
  ASSERT_EQ(run("--config " + q(dir / "cfg.json") + " analyze " + q(ph() / "volume.json") + " --out-dir " +
                q(dir / "o")),
            0)
      << log();
  const auto report = report_from_json(nlohmann::json::parse(slurp(dir / "o" / "report.json")));
  EXPECT_EQ(report.pipeline.infected_threshold_hu, -200);
  EXPECT_EQ(report.pipeline.filter, "none");
}

TEST_F(Cli, StagewiseCommands) {
  const auto vol = q(ph() / "volume.json");
  ASSERT_EQ(run("bootstrap " + vol + " --out-dir " + q(dir / "boot")), 0) << log();
  EXPECT_TRUE(fs::exists(dir / "boot" / "infected.raw"));

  ASSERT_EQ(run("segment " + vol + " --builtin-threshold -200 --out " + q(dir / "lung.json") + " --probmap-out " +
                q(dir / "lung_prob.json")),
            0)
      << log();
  ASSERT_EQ(run("segment " + vol + " --probmaps " + q(dir / "lung_prob.json") + " --out " + q(dir / "lung2.json")), 0)
      << log();
  EXPECT_EQ(read_mask(dir / "lung.json"), read_mask(dir / "lung2.json"));

  ASSERT_EQ(run("patches " + q(dir / "boot" / "infected.json") + " " + vol + " --out-dir " + q(dir / "patches")), 0)
      << log();
  EXPECT_TRUE(fs::exists(dir / "patches" / "regions.csv"));

  ASSERT_EQ(run("filter " + q(dir / "boot" / "infected.json") + " " + vol + " --builtin --out " +
                q(dir / "kept.json") + " --scores-out " + q(dir / "scores.csv")),
            0)
      << log();
  ASSERT_EQ(run("filter " + q(dir / "boot" / "infected.json") + " " + vol + " --scores " + q(dir / "scores.csv") +
                " --out " + q(dir / "kept2.json")),
            0)
      << log();
  EXPECT_EQ(read_mask(dir / "kept.json"), read_mask(dir / "kept2.json"));

  ASSERT_EQ(run("overlay " + vol + " --lung " + q(dir / "lung.json") + " --infected " + q(dir / "kept.json") +
                " --out-dir " + q(dir / "ov")),
            0)
      << log();
  EXPECT_TRUE(fs::exists(dir / "ov" / "slice_0000.ppm"));
}

TEST_F(Cli, EvaluatePrintsTable) {
  const auto gt = dir / "gt", pred = dir / "pred";
  // Cases differ in lesion count so the true PoIR varies.
  auto spec = nlohmann::json::parse(slurp(ph() / "spec.json"));
  spec.erase("tube");
  spec["blur_bands"] = nlohmann::json::array();
  for (int k = 1; k <= 3; ++k) {
    const auto id = "case" + std::to_string(k);
    spec["lesions"].erase(spec["lesions"].size() - 1);
    std::ofstream(dir / (id + ".spec.json")) << spec.dump();
    ASSERT_EQ(run("--seed " + std::to_string(k) + " phantom --spec " + q(dir / (id + ".spec.json")) + " --out-dir " +
                  q(dir / id)),
              0)
        << log();
    fs::create_directories(gt / id);
    fs::create_directories(pred / "threshold" / id);
    for (const char* f : {"lung.json", "lung.raw", "infected.json", "infected.raw"})
      fs::copy_file(dir / id / f, gt / id / f);
    ASSERT_EQ(run("analyze " + q(dir / id / "volume.json") + " --out-dir " + q(pred / "threshold" / id) +
                  " --infected-threshold -200"),
              0)
        << log();
    fs::remove(pred / "threshold" / id / "report.json");
  }
  ASSERT_EQ(run("evaluate --pred-dir " + q(pred) + " --gt-dir " + q(gt) + " --out " + q(dir / "summary.json")), 0)
      << log();
  EXPECT_NE(log().find("intact lung"), std::string::npos);
  EXPECT_NE(log().find("Pearson r"), std::string::npos);
  const auto s = summary_from_json(nlohmann::json::parse(slurp(dir / "summary.json")));
  ASSERT_EQ(s.rows.size(), 2u);
  EXPECT_GT(s.rows[0].m_dice, 0.9);
}
