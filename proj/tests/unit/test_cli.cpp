#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "../support/fixtures.hpp"
#include "dogiqa/cli.hpp"
#include "dogiqa/harness.hpp"
#include "dogiqa/maskproc.hpp"

using namespace dogiqa;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run dogiqa_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_files(const std::filesystem::path& dir) {
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST(CliSegment, WritesSkipsAndForces) {
  fixtures::TempDir dir("cli_segment");
  const auto corpus = fixtures::write_corpus(dir.path(), 5);
  const auto masks = dir.path() / "masks";
  const auto cache = (dir.path() / "cache").string();
  const std::vector<std::string> base{"segment", "--manifest", corpus.manifest.string(), "--raw-masks-dir",
                                      corpus.masks_dir.string(), "--masks-dir", masks.string(),
                                      "--cache-dir", cache};

  auto r = dogiqa_cli(base);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_files(masks), 5u);
  EXPECT_NE(r.out.find("segmented 5, skipped 0, failed 0; c_max = 6"), std::string::npos) << r.out;
  EXPECT_EQ(read_json(dir.path() / "cache" / kCmaxFileName)["c_max"], 6);

  const auto first = std::filesystem::last_write_time(masks / mask_file_name(corpus.images[0].id));
  r = dogiqa_cli(base);
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("segmented 0, skipped 5"), std::string::npos) << r.out;
  EXPECT_EQ(std::filesystem::last_write_time(masks / mask_file_name(corpus.images[0].id)), first);

  auto forced = base;
  forced.push_back("--force");
  r = dogiqa_cli(forced);
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("segmented 5, skipped 0"), std::string::npos);
}

TEST(CliSegment, UnreadableImageFailsOnlyThatImage) {
  fixtures::TempDir dir("cli_segment_bad");
  const auto corpus = fixtures::write_corpus(dir.path(), 5);
  std::ofstream(dir.path() / corpus.images[3].id, std::ios::trunc) << "garbage";
  const auto masks = dir.path() / "masks";
  const auto r = dogiqa_cli({"segment", "--manifest", corpus.manifest.string(), "--raw-masks-dir",
                             corpus.masks_dir.string(), "--masks-dir", masks.string(), "--cache-dir",
                             (dir.path() / "cache").string()});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_EQ(count_files(masks), 4u);
  EXPECT_NE(r.err.find(corpus.images[3].id), std::string::npos);
}

TEST(CliEvaluate, WholeOnlyBrightnessRecoversLevels) {
  fixtures::TempDir dir("cli_eval_whole");
  const auto corpus = fixtures::write_level_corpus(dir.path(), 12, 7);
  const auto report_path = dir.path() / "report.json";
  const auto r = dogiqa_cli({"evaluate", "--manifest", corpus.manifest.string(), "--scorer-url",
                             "mock:brightness", "--crop-mode", "whole", "--cache-dir",
                             (dir.path() / "cache").string(), "--out", report_path.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("SRCC: 1.000 PLCC: 1.000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("images: 12 ok, 0 failed"), std::string::npos);
  const auto report = read_json(report_path);
  EXPECT_EQ(report["config"]["crop_mode"], "whole");
  EXPECT_EQ(report["config"]["c_max_source"], "unused");
}

TEST(CliEvaluate, MissingCmaxIsAConfigError) {
  fixtures::TempDir dir("cli_eval_nocmax");
  const auto corpus = fixtures::write_corpus(dir.path(), 3);
  const auto r = dogiqa_cli({"evaluate", "--manifest", corpus.manifest.string(), "--masks-dir",
                             corpus.masks_dir.string(), "--scorer-url", "mock:brightness", "--cache-dir",
                             (dir.path() / "cache").string(), "--out", (dir.path() / "r.json").string()});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("c_max"), std::string::npos);
}

TEST(CliEvaluate, CmaxFromFlagDiscoveryAndSegmentRecord) {
  fixtures::TempDir dir("cli_eval_cmax");
  const auto corpus = fixtures::write_corpus(dir.path(), 5);
  const auto cache = (dir.path() / "cache").string();
  const std::vector<std::string> base{"evaluate", "--manifest", corpus.manifest.string(), "--masks-dir",
                                      corpus.masks_dir.string(), "--scorer-url", "mock:brightness",
                                      "--cache-dir", cache, "--out", (dir.path() / "r.json").string()};

  auto args = base;
  args.insert(args.end(), {"--cmax", "10"});
  ASSERT_EQ(dogiqa_cli(args).code, 0);
  EXPECT_EQ(read_json(dir.path() / "r.json")["provenance"]["c_max"], 10);

  args = base;
  args.push_back("--discover-cmax");
  const auto r = dogiqa_cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("discovered c_max = 6"), std::string::npos);

  // The discovery pass persisted c_max, so a plain run now succeeds.
  ASSERT_EQ(dogiqa_cli(base).code, 0);
  const auto report = read_json(dir.path() / "r.json");
  EXPECT_EQ(report["provenance"]["c_max"], 6);
  EXPECT_EQ(report["config"]["c_max_source"], "persisted");
}

TEST(CliEvaluate, FivePointStandardIsEchoed) {
  fixtures::TempDir dir("cli_eval_k5");
  const auto corpus = fixtures::write_level_corpus(dir.path(), 6, 5);
  const auto r = dogiqa_cli({"evaluate", "--manifest", corpus.manifest.string(), "--scorer-url",
                             "mock:brightness", "--crop-mode", "whole", "--k", "5", "--cache-dir",
                             (dir.path() / "cache").string(), "--out", (dir.path() / "r.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = read_json(dir.path() / "r.json");
  EXPECT_EQ(report["config"]["k_levels"], 5);
  EXPECT_EQ(report["config"]["label_preset"], "preset-k5");
  EXPECT_EQ(report["provenance"]["word_standard"],
            nlohmann::json::array({"Excellent", "Good", "Fair", "Poor", "Bad"}));
  const auto system = report["provenance"]["system_prompt"].get<std::string>();
  EXPECT_NE(system.find("5: Excellent, 4: Good, 3: Fair, 2: Poor, 1: Bad."), std::string::npos) << system;
  EXPECT_EQ(system.find("7:"), std::string::npos);
  EXPECT_NE(report["provenance"]["user_prompt"].get<std::string>().find("[1, 2, 3, 4, 5]"), std::string::npos);
}

TEST(CliEvaluate, ConfigFileWithFlagOverride) {
  fixtures::TempDir dir("cli_eval_config");
  const auto corpus = fixtures::write_level_corpus(dir.path(), 6, 7);
  const auto cfg_path = dir.path() / "run.json";
  std::ofstream(cfg_path) << nlohmann::json{{"manifest", corpus.manifest.string()},
                                            {"scorer_url", "mock:brightness"},
                                            {"crop_mode", "whole"},
                                            {"k_levels", 9},
                                            {"cache_dir", (dir.path() / "cache").string()},
                                            {"bearer_token", "hidden"}}
                                 .dump();
  const auto r = dogiqa_cli({"evaluate", "--config", cfg_path.string(), "--k", "7", "--out",
                             (dir.path() / "r.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = read_json(dir.path() / "r.json");
  EXPECT_EQ(report["config"]["k_levels"], 7);
  EXPECT_EQ(report.dump().find("hidden"), std::string::npos);
}

TEST(CliEvaluate, ConstantScorerHasUndefinedMetrics) {
  fixtures::TempDir dir("cli_eval_const");
  const auto corpus = fixtures::write_level_corpus(dir.path(), 6, 7);
  const auto r = dogiqa_cli({"evaluate", "--manifest", corpus.manifest.string(), "--scorer-url",
                             "mock:constant:4", "--crop-mode", "whole", "--cache-dir",
                             (dir.path() / "cache").string(), "--out", (dir.path() / "r.json").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("SRCC: n/a PLCC: n/a"), std::string::npos) << r.out;
}

TEST(CliEvaluate, UnreachableScorerExitsWithBackendCode) {
  fixtures::TempDir dir("cli_eval_down");
  const auto corpus = fixtures::write_level_corpus(dir.path(), 3, 7);
  const auto r = dogiqa_cli({"evaluate", "--manifest", corpus.manifest.string(), "--scorer-url",
                             "http://127.0.0.1:9", "--retries", "0", "--crop-mode", "whole", "--cache-dir",
                             (dir.path() / "cache").string(), "--out", (dir.path() / "r.json").string()});
  EXPECT_EQ(r.code, cli::kExitBackend);
}

TEST(CliScore, WarmsCacheForEvaluate) {
  fixtures::TempDir dir("cli_score");
  const auto corpus = fixtures::write_corpus(dir.path(), 4);
  const auto cache = (dir.path() / "cache").string();
  auto r = dogiqa_cli({"score", "--manifest", corpus.manifest.string(), "--masks-dir",
                       corpus.masks_dir.string(), "--scorer-url", "mock:brightness", "--cache-dir", cache});
  ASSERT_EQ(r.code, 0) << r.err;
  r = dogiqa_cli({"evaluate", "--manifest", corpus.manifest.string(), "--masks-dir", corpus.masks_dir.string(),
                  "--scorer-url", "mock:brightness", "--cache-dir", cache, "--cmax", "5", "--out",
                  (dir.path() / "r.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_json(dir.path() / "r.json")["provenance"]["cache"]["misses"], 0);
}

TEST(CliQuantizeBound, TwoPointAndTable) {
  fixtures::TempDir dir("cli_qb");
  std::ofstream(dir.path() / "two.csv") << "image_path,mos\na,0\nb,100\n";
  auto r = dogiqa_cli({"quantize-bound", "--mos-csv", (dir.path() / "two.csv").string(), "--k", "7"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "K\tSRCC\tPLCC\t(SRCC+PLCC)/2\n7\t1.000\t1.000\t1.000\n");

  std::ofstream(dir.path() / "many.csv") << "mos\n1\n2\n3\n5\n8\n13\n21\n";
  r = dogiqa_cli({"quantize-bound", "--manifest", (dir.path() / "many.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) ++n;
  EXPECT_EQ(n, 5);
  EXPECT_EQ(r.out.rfind("K\tSRCC", 0), 0u);
}

TEST(CliQuantizeBound, NearDegenerateWarnsAndConstantFails) {
  fixtures::TempDir dir("cli_qb_degenerate");
  std::ofstream(dir.path() / "near.csv") << "mos\n50\n50.0000000001\n50\n";
  auto r = dogiqa_cli({"quantize-bound", "--mos-csv", (dir.path() / "near.csv").string(), "--k", "7"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning"), std::string::npos);

  std::ofstream(dir.path() / "flat.csv") << "mos\n3\n3\n";
  r = dogiqa_cli({"quantize-bound", "--mos-csv", (dir.path() / "flat.csv").string()});
  EXPECT_EQ(r.code, cli::kExitConfig);
}

TEST(CliReport, ExportsFromSavedReport) {
  fixtures::TempDir dir("cli_report");
  const auto corpus = fixtures::write_level_corpus(dir.path(), 5, 7);
  ASSERT_EQ(dogiqa_cli({"evaluate", "--manifest", corpus.manifest.string(), "--scorer-url", "mock:brightness",
                        "--crop-mode", "whole", "--cache-dir", (dir.path() / "cache").string(), "--out",
                        (dir.path() / "r.json").string()})
                .code,
            0);
  const auto r = dogiqa_cli({"report", (dir.path() / "r.json").string(), "--csv",
                             (dir.path() / "images.csv").string(), "--scatter",
                             (dir.path() / "scatter.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("images: 5 ok, 0 failed"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "images.csv"));
  std::ifstream scatter(dir.path() / "scatter.csv");
  std::string header;
  std::getline(scatter, header);
  EXPECT_EQ(header, "mos,s_dog");
}

TEST(CliArgs, BadValuesAreConfigErrors) {
  EXPECT_EQ(dogiqa_cli({}).code, cli::kExitConfig);
  EXPECT_EQ(dogiqa_cli({"evaluate", "--crop-mode", "diagonal"}).code, cli::kExitConfig);
  EXPECT_EQ(dogiqa_cli({"evaluate", "--k", "1"}).code, cli::kExitConfig);
  EXPECT_EQ(dogiqa_cli({"evaluate", "--scorer-url", "mock:brightness"}).code, cli::kExitConfig);
}
