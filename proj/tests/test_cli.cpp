#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#ifndef FOL_CLI_PATH
#error "FOL_CLI_PATH must name the fol executable"
#endif

namespace {

struct Run {
  std::string out;
  int code = -1;
};

/// Runs the CLI with `args`, optionally prefixed by environment assignments.
Run fol_cli(const std::string& args, const std::string& env = "") {
  Run r;
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + FOL_CLI_PATH + "\" " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("fol_cli_" + name)).string();
}

}  // namespace

TEST(Spectrum, FlatWeightEigenvaluesAreSquares) {
  const auto r = fol_cli("spectrum --n 1 --a 0 --K 6");
  ASSERT_EQ(r.code, 0);
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 9u);
  for (int k = 0; k <= 6; ++k) {
    std::istringstream row(ls[static_cast<std::size_t>(k) + 2]);
    int d = -1;
    std::size_t mult = 0;
    double lam = -1.0;
    row >> d >> mult >> lam;
    EXPECT_EQ(d, k);
    EXPECT_EQ(mult, 1u);
    EXPECT_DOUBLE_EQ(lam, k * k);
  }
}

TEST(Spectrum, OrderFlagDerivesWeightExponent) {
  const auto r = fol_cli("spectrum --n 1 --s 0.75 --K 4");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("a = -0.5,"), std::string::npos);
}

TEST(Spectrum, WritesBasisJson) {
  const auto path = temp_path("basis.json");
  ASSERT_EQ(fol_cli("spectrum --n 2 --a 0.2 --K 3 --out " + path).code, 0);
  std::ifstream f(path);
  const auto j = nlohmann::json::parse(f);
  EXPECT_EQ(j.at("K").get<int>(), 3);
  std::filesystem::remove(path);
}

TEST(ExitCodes, ParameterUsageAndIoFailuresAreDistinct) {
  EXPECT_EQ(fol_cli("spectrum --n 1 --a 1.5").code, 2);
  EXPECT_EQ(fol_cli("spectrum --n 1 --a 0 --s 0.5").code, 12);
  EXPECT_EQ(fol_cli("no-such-command").code, 12);
  EXPECT_EQ(fol_cli("").code, 12);
  EXPECT_EQ(fol_cli("gap --n 1 --a 0 --m 1").code, 2);
  EXPECT_EQ(fol_cli("epi calibrate --n 1 --a 0 --corpus 10").code, 2);
  EXPECT_EQ(fol_cli("solve --n 2 --a 0").code, 2);
  EXPECT_EQ(fol_cli("classify --checkpoint /nonexistent/ckpt.bin").code, 11);
  EXPECT_EQ(fol_cli("--config /nonexistent/fol.cfg spectrum").code, 11);
  EXPECT_EQ(fol_cli("--help").code, 0);
}

TEST(EpiCheck, RegularCorpusEmitsOnePassingRecordPerTrace) {
  const auto r = fol_cli("epi check --theorem regular --n 1 --a 0 --corpus 1000 --seed 7");
  ASSERT_EQ(r.code, 0);
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 1000u);
  for (const auto& l : ls) {
    const auto j = nlohmann::json::parse(l);
    for (const char* key : {"theorem", "n", "a", "m", "W_z", "W_zeta", "bound", "margin", "pass", "truncation_budget"})
      ASSERT_TRUE(j.contains(key)) << key;
    EXPECT_TRUE(j["pass"].get<bool>());
    EXPECT_NEAR(j["constant"].get<double>(), 1.0 / 7.0, 1e-15);
  }
}

TEST(EpiCheck, SameSeedGivesIdenticalOutput) {
  const std::string cmd = "epi check --theorem negative_2m --n 1 --a 0.3 --corpus 50 --seed 3 --eps 0.05";
  const auto a = fol_cli(cmd), b = fol_cli(cmd);
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, fol_cli("epi check --theorem negative_2m --n 1 --a 0.3 --corpus 50 --seed 4 --eps 0.05").out);
}

TEST(EpiCheck, LogTheoremCalibratesWhenEpsilonOmitted) {
  const auto r = fol_cli("epi check --theorem log --n 1 --a 0 --corpus 20 --seed 2");
  ASSERT_EQ(r.code, 0);
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 20u);
  const double eps = nlohmann::json::parse(ls[0])["constant"].get<double>();
  EXPECT_GE(eps, std::ldexp(1.0, -12));
}

TEST(EpiCheck, OversizedEpsilonFailsChecks) {
  // ε near 1 breaks the log inequality on nontrivial traces: exit 1, records still written
  const auto r = fol_cli("epi check --theorem log --n 1 --a 0 --corpus 200 --seed 5 --eps 0.99");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(lines(r.out).size(), 200u);
}

TEST(EpiCalibrate, ReportsUsableEpsilons) {
  const auto r = fol_cli("epi calibrate --n 1 --a 0 --corpus 100 --seed 1");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_GE(j["eps_log"].get<double>(), std::ldexp(1.0, -12));
  EXPECT_GE(j["eps_neg2m"].get<double>(), std::ldexp(1.0, -12));
  EXPECT_EQ(j["corpus_size"].get<int>(), 100);
}

TEST(Gap, HalfLaplacianWidths) {
  const auto r = fol_cli("gap --n 1 --a 0");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_DOUBLE_EQ(j["center"].get<double>(), 1.5);
  EXPECT_NEAR(j["left_width"].get<double>(), 0.5, 1e-12);
  EXPECT_NEAR(j["right_width"].get<double>(), 0.5, 1e-12);
}

TEST(Gap, AroundTwoMUsesClosedFormLeftWidth) {
  const auto r = fol_cli("gap --n 1 --a 0 --m 1 --eps-pos 0.1 --eps-neg 0.01");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["left_width"].get<double>(), 4.0 * 0.01 / 1.01, 1e-15);
}

TEST(SolveAndClassify, CheckpointRoundTripThroughClassify) {
  const auto ck = temp_path("ck.bin"), csv = temp_path("slice.csv");
  const auto s = fol_cli("solve --n 1 --a 0 --datum profile --nx 64 --checkpoint " + ck + " --csv " + csv);
  ASSERT_EQ(s.code, 0);
  const auto js = nlohmann::json::parse(s.out);
  EXPECT_TRUE(js["converged"].get<bool>());
  EXPECT_TRUE(js["kkt_ok"].get<bool>());
  EXPECT_EQ(js["free_boundary_points"].get<int>(), 1);
  EXPECT_LT(js["sup_error"].get<double>(), 1e-2);
  std::ifstream f(csv);
  std::string header;
  std::getline(f, header);
  EXPECT_EQ(header, "x,v,phi,flux,contact");

  const auto c = fol_cli("classify --checkpoint " + ck);
  ASSERT_EQ(c.code, 0);
  const auto jc = nlohmann::json::parse(c.out);
  ASSERT_EQ(jc.size(), 1u);
  EXPECT_EQ(jc[0]["type"].get<std::string>(), "regular");
  EXPECT_NEAR(jc[0]["lambda_hat"].get<double>(), 1.5, 0.05);
  std::filesystem::remove(ck);
  std::filesystem::remove(csv);
}

TEST(SolveAndClassify, DegreeTwoDatumIsSingularAtChosenPoint) {
  const auto r = fol_cli("classify --n 1 --a 0 --datum h2m --nx 64 --x0 0");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["type"].get<std::string>(), "singular");
  EXPECT_EQ(j[0]["m"].get<int>(), 1);
}

TEST(SolveAndClassify, RejectsPointOfWrongDimension) {
  EXPECT_EQ(fol_cli("classify --n 1 --a 0 --nx 32 --x0 0 0").code, 3);
}

TEST(Config, KeyValueFileSuppliesDefaultsAndFlagsWin) {
  const auto cfg = temp_path("run.cfg");
  {
    std::ofstream f(cfg);
    f << "# spectrum settings\n n = 1\na=0\nK = 3\n";
  }
  const auto r = fol_cli("--config " + cfg + " spectrum");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(lines(r.out).size(), 6u);
  const auto over = fol_cli("--config " + cfg + " spectrum --K 5");
  ASSERT_EQ(over.code, 0);
  EXPECT_EQ(lines(over.out).size(), 8u);
  {
    std::ofstream f(cfg);
    f << "no separator here\n";
  }
  EXPECT_EQ(fol_cli("--config " + cfg + " spectrum").code, 3);
  std::filesystem::remove(cfg);
}

TEST(Determinism, ThreadCountDoesNotChangeOutput) {
  const std::string cmd = "epi check --theorem regular --n 2 --a 0.1 --corpus 8 --seed 9";
  const auto serial = fol_cli(cmd, "FOL_THREADS=1"), wide = fol_cli(cmd, "FOL_THREADS=4");
  ASSERT_EQ(serial.code, 0);
  ASSERT_EQ(wide.code, 0);
  EXPECT_EQ(lines(serial.out).size(), 8u);
  EXPECT_EQ(serial.out, wide.out);
}
