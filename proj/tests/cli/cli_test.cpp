#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"

namespace polysafe::cli {
namespace {

namespace fs = std::filesystem;

const std::string kDataDir = POLYSAFE_DATA_DIR;

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("polysafe_cli_" + std::string(
                                  ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int Run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run(args, out_, err_);
  }
  std::string Out(const std::string& sub) const { return (dir_ / sub).string(); }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(CliTest, MissingProblem) {
  EXPECT_EQ(Run({"verify", kDataDir + "/missing.json", "--out", Out("v")}), kExitError);
  EXPECT_FALSE(err_.str().empty());
}

TEST_F(CliTest, BadFlags) {
  EXPECT_EQ(Run({"verify"}), kExitError);
  EXPECT_EQ(Run({"simulate", kDataDir + "/two_state.json", "--attack", "sideways", "--out",
                 Out("s")}),
            kExitError);
  EXPECT_EQ(Run({"simulate", kDataDir + "/two_state.json", "--n-traj", "many"}), kExitError);
  EXPECT_EQ(Run({"frobnicate"}), kExitError);
}

TEST_F(CliTest, VerifyNegativeAtZeroGamma) {
  EXPECT_EQ(Run({"verify", kDataDir + "/two_state.json", "--gamma", "0", "--max-escalation",
                 "0", "--out", Out("v")}),
            kExitNegative);
  EXPECT_TRUE(fs::exists(Out("v/certificate.json")));
  EXPECT_TRUE(fs::exists(Out("v/trace.json")));
  EXPECT_TRUE(fs::exists(Out("v/manifest.json")));
  EXPECT_NE(err_.str().find("trace level=0 round=1 phase=multiplier"), std::string::npos);
}

TEST_F(CliTest, VerifyInflatedSet) {
  EXPECT_EQ(Run({"verify", kDataDir + "/two_state.json", "--gamma", "0.19", "--out", Out("v")}),
            kExitOk);
  const auto audit = nlohmann::json::parse(Slurp(Out("v/audit.json")));
  EXPECT_EQ(audit.at("verdict"), "pass");
  const auto manifest = nlohmann::json::parse(Slurp(Out("v/manifest.json")));
  EXPECT_EQ(manifest.at("command"), "verify");
  EXPECT_TRUE(manifest.contains("problem_hash"));
  EXPECT_TRUE(manifest.contains("version"));
}

TEST_F(CliTest, SynthesizeCheckAndTamper) {
  ASSERT_EQ(Run({"synthesize", kDataDir + "/two_state.json", "--deg-hs", "4", "--out",
                 Out("s")}),
            kExitOk);
  const std::string cert_path = Out("s/certificate.json");
  auto cert = nlohmann::ordered_json::parse(Slurp(cert_path));
  EXPECT_TRUE(cert.contains("h_s"));
  EXPECT_LE(cert.at("epsilon").get<double>(), 0.0);

  EXPECT_EQ(Run({"check", kDataDir + "/two_state.json", cert_path, "--out", Out("c")}), kExitOk);

  // A flatter V lets {V <= 1} leave the safe set.
  auto tampered = cert;
  tampered["V"] = "0.8881*x1^2 + 0.1*x2^2";
  std::ofstream(Out("tampered.json")) << tampered.dump(2);
  EXPECT_EQ(Run({"check", kDataDir + "/two_state.json", Out("tampered.json"), "--out", Out("t")}),
            kExitNegative);

  auto missing = cert;
  missing["grams"].erase("cond2");
  std::ofstream(Out("missing.json")) << missing.dump(2);
  EXPECT_EQ(Run({"check", kDataDir + "/two_state.json", Out("missing.json"), "--out", Out("m")}),
            kExitError);
  EXPECT_NE(err_.str().find("cond2"), std::string::npos);
}

TEST_F(CliTest, SynthesizeMinVolume) {
  ASSERT_EQ(Run({"synthesize", kDataDir + "/two_state.json", "--min-volume", "--out", Out("s")}),
            kExitOk);
  const auto cert = nlohmann::json::parse(Slurp(Out("s/certificate.json")));
  EXPECT_TRUE(cert.contains("P"));
  EXPECT_TRUE(cert.contains("lambda5"));
  EXPECT_EQ(nlohmann::json::parse(Slurp(Out("s/audit.json"))).at("verdict"), "pass");
}

TEST_F(CliTest, SynthesizeWithoutActuation) {
  EXPECT_EQ(Run({"synthesize", kDataDir + "/two_state_no_actuation.json", "--max-escalation",
                 "0", "--out", Out("s")}),
            kExitNegative);
}

TEST_F(CliTest, ReferenceCertificate) {
  const std::string ref = kDataDir + "/two_state_reference_certificate.json";
  EXPECT_EQ(Run({"check", kDataDir + "/two_state.json", ref, "--out", Out("a")}), kExitError);
  EXPECT_EQ(Run({"check", kDataDir + "/two_state.json", ref, "--complete", "--out", Out("b")}),
            kExitOk);
}

TEST_F(CliTest, Simulate) {
  ASSERT_EQ(Run({"synthesize", kDataDir + "/two_state.json", "--out", Out("s")}), kExitOk);
  EXPECT_EQ(Run({"simulate", kDataDir + "/two_state.json", "--certificate",
                 Out("s/certificate.json"), "--n-traj", "6", "--horizon", "2", "--out",
                 Out("sim")}),
            kExitOk);
  const std::string cloud = Slurp(Out("sim/cloud.csv"));
  EXPECT_EQ(cloud.substr(0, cloud.find('\n')), "traj,t,x1,x2,a1,a2,s,V");
  EXPECT_TRUE(fs::exists(Out("sim/summary.csv")));
  EXPECT_NE(Slurp(Out("sim/plot.svg")).find("<svg"), std::string::npos);
}

TEST_F(CliTest, SimulateReportsBlowUp) {
  std::ofstream(Out("unstable.json")) << R"({
    "state_vars": ["x"], "attack_vars": ["a"], "f": ["x^3 + a"],
    "safe_set": "1 - x^2", "initial_set": "0.25 - x^2", "attack_set": "1 - a^2"
  })";
  EXPECT_EQ(Run({"simulate", Out("unstable.json"), "--attack", "random", "--n-traj", "4",
                 "--horizon", "20", "--out", Out("sim")}),
            kExitOk);
  const std::string summary = Slurp(Out("sim/summary.csv"));
  EXPECT_NE(summary.find(",1\n"), std::string::npos) << summary;
}

TEST_F(CliTest, ExportSdpaIsDeterministic) {
  const std::string cert = kDataDir + "/two_state_reference_certificate.json";
  ASSERT_EQ(Run({"export-sdpa", kDataDir + "/two_state.json", "--certificate", cert,
                 "--synthesize", "--phase", "multiplier", "--out", Out("e1")}),
            kExitOk);
  ASSERT_EQ(Run({"export-sdpa", kDataDir + "/two_state.json", "--certificate", cert,
                 "--synthesize", "--phase", "multiplier", "--out", Out("e2")}),
            kExitOk);
  const std::string a = Slurp(Out("e1/multiplier.dat-s"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, Slurp(Out("e2/multiplier.dat-s")));

  // Solve the exported file, re-import the result, lift and audit it.
  ASSERT_EQ(Run({"solve-sdpa", Out("e1/multiplier.dat-s"), "--out", Out("sol")}), kExitOk);
  EXPECT_EQ(Run({"export-sdpa", kDataDir + "/two_state.json", "--certificate", cert,
                 "--synthesize", "--phase", "multiplier", "--solution", Out("sol/solution.sol"),
                 "--out", Out("lift")}),
            kExitOk);
  EXPECT_EQ(nlohmann::json::parse(Slurp(Out("lift/audit.json"))).at("verdict"), "pass");
}

TEST_F(CliTest, RerunReproducesBytes) {
  ASSERT_EQ(Run({"synthesize", kDataDir + "/two_state.json", "--out", Out("a")}), kExitOk);
  ASSERT_EQ(Run({"rerun", Out("a/manifest.json"), "--out", Out("b")}), kExitOk);
  EXPECT_EQ(Slurp(Out("a/certificate.json")), Slurp(Out("b/certificate.json")));
  EXPECT_EQ(Slurp(Out("a/trace.json")), Slurp(Out("b/trace.json")));
}

}  // namespace
}  // namespace polysafe::cli
