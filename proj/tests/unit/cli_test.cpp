#include "cli.hpp"
#include "pqtds/io.hpp"
#include "pqtds/pq.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pqtds;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "pqtds");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_tsv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, '\t')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  ADD_FAILURE() << "no column " << name;
  return 0;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("pqtds_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    bench::Scenario s;
    s.name = "small";
    s.seed = 7;
    s.n_train = 1200;
    s.n_test = 800;
    s.marginal.dim = 6;
    s.concept_spec.literals = {1, 2};
    s.shift.kind = bench::ShiftSpec::Kind::subcube;
    s.shift.weight = 0.5;
    s.shift.pattern = {{0, 1}, {2, -1}};
    scenario_ = (dir_ / "small.cfg").string();
    std::ofstream(scenario_) << bench::format_scenario(s);
    scn_ = s;
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string out(const std::string& sub) const { return (dir_ / sub).string(); }

  fs::path dir_;
  std::string scenario_;
  bench::Scenario scn_;
};

}  // namespace

TEST_F(CliTest, PqRunWritesArtifactsAndSelectorReloads) {
  const auto r = invoke({"pq-run", "--scenario", scenario_, "--out", out("o"), "--degree", "2", "--save-data",
                         "--emit-plot-data", "--n-eval", "1000"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("config: command=pq-run"), std::string::npos);
  for (const char* f : {"small_pq_s7.run.json", "small_pq_s7.selector.txt", "small_pq_s7.classifier.txt",
                        "small_pq_s7.train.csv", "small_pq_s7.test.csv", "small_pq_s7.log", "results.tsv"})
    EXPECT_TRUE(fs::exists(dir_ / "o" / f)) << f;
  for (const auto& e : fs::directory_iterator(dir_ / "o"))
    EXPECT_EQ(e.path().filename().string().find(".tmp."), std::string::npos);

  const Sample train = io::load_csv((dir_ / "o" / "small_pq_s7.train.csv").string());
  const Sample test = io::load_csv((dir_ / "o" / "small_pq_s7.test.csv").string());
  const auto split = split_training(train, scn_.seed);
  std::ifstream sel(dir_ / "o" / "small_pq_s7.selector.txt");
  const auto rec = io::read_selector(sel, split.reference);
  std::ifstream cls(dir_ / "o" / "small_pq_s7.classifier.txt");
  const Classifier h = io::read_classifier(cls);
  EXPECT_EQ(h.kind(), Classifier::Kind::poly_threshold);

  std::ostringstream again;
  io::write_selector(again, rec.selector, rec.config);
  EXPECT_EQ(again.str(), slurp(dir_ / "o" / "small_pq_s7.selector.txt"));
  std::size_t kept = 0;
  for (std::size_t i = 0; i < test.size(); ++i) kept += rec.selector(test.point(i));
  EXPECT_GT(kept, 0u);

  const auto rows = read_tsv(dir_ / "o" / "results.tsv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1][column(rows[0], "status")], "ok");
  EXPECT_EQ(rows[1][column(rows[0], "mode")], "pq");
}

TEST_F(CliTest, RowsAreReproducible) {
  const std::vector<std::string> base = {"pq-run", "--scenario", scenario_, "--degree", "1", "--n-eval", "500"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", out("a")});
  b.insert(b.end(), {"--out", out("b")});
  ASSERT_EQ(invoke(a).code, 0);
  ASSERT_EQ(invoke(b).code, 0);
  auto ra = read_tsv(dir_ / "a" / "results.tsv"), rb = read_tsv(dir_ / "b" / "results.tsv");
  const std::size_t secs = column(ra[0], "seconds");
  ra[1][secs] = rb[1][secs] = "";
  EXPECT_EQ(ra, rb);
  EXPECT_EQ(slurp(dir_ / "a" / "small_pq_s7.selector.txt"), slurp(dir_ / "b" / "small_pq_s7.selector.txt"));
}

TEST_F(CliTest, OracleCheckPasses) {
  const auto r = invoke({"oracle-check", "--d", "10"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST_F(CliTest, TdsAcceptsWithoutShift) {
  bench::Scenario s = scn_;
  s.shift = {};
  s.n_train = s.n_test = 6000;
  const std::string path = (dir_ / "clean.cfg").string();
  std::ofstream(path) << bench::format_scenario(s);
  const auto r =
      invoke({"tds-run", "--scenario", path, "--out", out("t"), "--theta", "0", "--slack-R", "2", "--degree", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_tsv(dir_ / "t" / "results.tsv");
  EXPECT_EQ(rows[1][column(rows[0], "decision")], "ACCEPT");
}

TEST_F(CliTest, SweepProducesOneRowPerTrial) {
  const auto r = invoke({"bench-sweep", "--scenario", scenario_, "--out", out("s"), "--grid", "eta=0.2,0.4",
                         "--seeds", "1,2,3", "--n-eval", "500", "--workers", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto trials = read_tsv(dir_ / "s" / "sweep_trials.tsv");
  EXPECT_EQ(trials.size(), 7u);
  const auto summary = read_tsv(dir_ / "s" / "sweep_summary.tsv");
  ASSERT_EQ(summary.size(), 3u);
  EXPECT_EQ(summary[1][column(summary[0], "trials")], "3");
  EXPECT_EQ(summary[1][column(summary[0], "eta")], "0.2");
  EXPECT_EQ(summary[2][column(summary[0], "eta")], "0.4");
}

TEST_F(CliTest, IcfRejectionShrinksWithSlack) {
  const auto r = invoke({"bench-sweep", "--mode", "icf", "--scenario", scenario_, "--out", out("i"), "--grid",
                         "slack-R=1.5,2,4", "--seeds", "7", "--n-eval", "500"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_tsv(dir_ / "i" / "sweep_trials.tsv");
  ASSERT_EQ(rows.size(), 4u);
  const std::size_t c = column(rows[0], "rejection_train");
  double prev = 2.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double v = std::stod(rows[i][c]);
    EXPECT_LE(v, prev + 1e-12) << i;
    prev = v;
  }
}

TEST_F(CliTest, EmptyGridIsEmptySweep) {
  const auto r = invoke({"bench-sweep", "--scenario", scenario_, "--out", out("e"), "--grid", "eta="});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_tsv(dir_ / "e" / "sweep_trials.tsv").size(), 1u);
}

TEST_F(CliTest, ValidationErrorsExitTwoAndWriteNothing) {
  EXPECT_EQ(invoke({"pq-run", "--scenario", scenario_, "--out", out("v1"), "--eta", "1.5"}).code, 2);
  EXPECT_EQ(invoke({"pq-run", "--scenario", scenario_, "--out", out("v2"), "--eps", "0"}).code, 2);
  EXPECT_EQ(invoke({"tds-run", "--scenario", scenario_, "--out", out("v3"), "--slack-R", "1"}).code, 2);
  EXPECT_EQ(invoke({"icf-run", "--scenario", scenario_, "--out", out("v4"), "--hyper-A", "0.5"}).code, 2);
  EXPECT_EQ(invoke({"pq-run", "--scenario", out("missing.cfg"), "--out", out("v5")}).code, 2);
  EXPECT_EQ(invoke({"bench-sweep", "--scenario", scenario_, "--out", out("v6"), "--grid", "bogus=1"}).code, 2);
  EXPECT_EQ(invoke({"pq-run", "--scenario", scenario_, "--unknown"}).code, 2);
  EXPECT_EQ(invoke({"oracle-check", "--d", "40"}).code, 2);
  for (const char* d : {"v1", "v2", "v3", "v4", "v5", "v6"}) EXPECT_FALSE(fs::exists(dir_ / d)) << d;
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST_F(CliTest, MalformedScenarioExitsTwo) {
  const std::string bad = (dir_ / "bad.cfg").string();
  std::ofstream(bad) << "[scenario]\nnot_a_key = 3\n";
  EXPECT_EQ(invoke({"pq-run", "--scenario", bad, "--out", out("m")}).code, 2);
}

TEST_F(CliTest, AppendRefusesForeignTable) {
  fs::create_directories(dir_ / "f");
  std::ofstream(dir_ / "f" / "results.tsv") << "a\tb\n1\t2\n";
  EXPECT_EQ(invoke({"pq-run", "--scenario", scenario_, "--out", out("f"), "--n-eval", "200"}).code, 2);
}
