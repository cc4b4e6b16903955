#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vtrack/artifacts.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("vtrack_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

int vtrack(const std::string& args) {
  const std::string cmd = std::string(VTRACK_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  const auto text = slurp(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

TEST(Cli, SimulateWritesTruthRows) {
  const auto out = scratch("simulate");
  ASSERT_EQ(vtrack("simulate --scenario moving-pillar --out " + out.string()), 0);
  // 21 s at dt 0.05 gives 421 samples plus the header.
  EXPECT_EQ(line_count(out / "truth.csv"), 422u);
  EXPECT_EQ(slurp(out / "truth.csv").substr(0, 12), "t,x,y,vx,vy\n");
  EXPECT_EQ(line_count(out / "measurements.csv"), 422u);
  fs::remove_all(out);
}

TEST(Cli, ManifestHashesArtifacts) {
  const auto out = scratch("manifest");
  ASSERT_EQ(vtrack("simulate --scenario moving-pillar --seed 9 --out " + out.string()), 0);
  const auto manifest = json::parse(slurp(out / "run_manifest.json"));
  EXPECT_EQ(manifest["command"], "simulate");
  EXPECT_EQ(manifest["seed"], 9);
  EXPECT_EQ(manifest["config_sha256"].get<std::string>().size(), 64u);
  EXPECT_EQ(manifest["config_sha256"], vtrack::sha256_hex(manifest["config"].dump()));
  for (const auto& [name, digest] : manifest["artifacts"].items()) {
    EXPECT_EQ(digest, vtrack::sha256_hex(slurp(out / name))) << name;
  }
  EXPECT_TRUE(manifest["artifacts"].contains("truth.csv"));
  EXPECT_TRUE(manifest.contains("wall_time_ms"));
  fs::remove_all(out);
}

TEST(Cli, RerunsAreByteIdentical) {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  ASSERT_EQ(vtrack("track --scenario moving-platform-turn --filters kf,imm --out " + a.string()), 0);
  ASSERT_EQ(vtrack("track --scenario moving-platform-turn --filters kf,imm --out " + b.string()), 0);
  for (const char* f : {"metrics.json", "trajectory_kf.csv", "trajectory_imm.csv", "plot.svg"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, TrackOrdersImmBelowKalman) {
  const auto out = scratch("track");
  ASSERT_EQ(vtrack("track --scenario moving-platform-turn --filters kf,imm --out " + out.string()), 0);
  const auto metrics = json::parse(slurp(out / "metrics.json"));
  const double kf = metrics["filters"]["kf"]["max_error_m"];
  const double imm = metrics["filters"]["imm"]["max_error_m"];
  EXPECT_LT(imm, kf);
  EXPECT_NEAR(metrics["filters"]["imm"]["max_error_cm"].get<double>(), 100 * imm, 1e-12);
  const auto header = slurp(out / "trajectory_imm.csv").substr(0, 60);
  EXPECT_EQ(header.rfind("t,x_est,y_est,vx_est,vy_est,x_true,y_true,mu_cv", 0), 0u) << header;
  EXPECT_EQ(slurp(out / "plot.svg").rfind("<svg", 0), 0u);
  fs::remove_all(out);
}

TEST(Cli, DetectLowLightCorpus) {
  const auto out = scratch("detect");
  ASSERT_EQ(vtrack("detect --corpus low-light --out " + out.string()), 0);
  const auto summary = json::parse(slurp(out / "detection_summary.json"));
  EXPECT_EQ(summary["success"], 7);
  EXPECT_EQ(summary["failure"], 0);
  EXPECT_EQ(line_count(out / "detections.jsonl"), 700u);
  fs::remove_all(out);
}

TEST(Cli, ConfigErrorsExitTwoAndWriteNothing) {
  const auto out = scratch("config_error");
  EXPECT_EQ(vtrack("simulate --scenario moving-pillar --set sensor.bogus=1 --out " + out.string()), 2);
  EXPECT_EQ(vtrack("simulate --scenario /nonexistent.json --out " + out.string()), 2);
  EXPECT_EQ(vtrack("simulate --scenario moving-pillar"), 2);
  EXPECT_EQ(vtrack("launch --scenario moving-pillar --out " + out.string()), 2);
  EXPECT_EQ(vtrack("track --scenario moving-pillar --filters ukf --out " + out.string()), 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, RuntimeErrorsExitThreeAndWriteNothing) {
  const auto out = scratch("runtime_error");
  // Camera below the ground plane: every target is behind it.
  EXPECT_EQ(vtrack("simulate --scenario moving-pillar --write-frames --set camera.pose.translation=[0,0,-10] --out " +
                   out.string()),
            3);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, FailedRunLeavesExistingDirectoryUntouched) {
  const auto out = scratch("existing");
  ASSERT_EQ(vtrack("simulate --scenario moving-pillar --out " + out.string()), 0);
  const auto before = slurp(out / "truth.csv");
  EXPECT_EQ(vtrack("simulate --scenario moving-pillar --write-frames --set camera.pose.translation=[0,0,-10] --out " +
                   out.string()),
            3);
  EXPECT_EQ(slurp(out / "truth.csv"), before);
  EXPECT_FALSE(fs::exists(out / "frames"));
  for (const auto& entry : fs::directory_iterator(out)) {
    EXPECT_EQ(entry.path().filename().string().find(".tmp"), std::string::npos) << entry.path();
  }
  fs::remove_all(out);
}

TEST(Cli, BenchIsDeterministic) {
  const auto a = scratch("bench_a"), b = scratch("bench_b");
  const std::string args = "bench --scenario moving-platform-turn --runs 5 --frames 3 --out ";
  ASSERT_EQ(vtrack(args + a.string()), 0);
  ASSERT_EQ(vtrack(args + b.string()), 0);
  EXPECT_EQ(slurp(a / "metrics.json"), slurp(b / "metrics.json"));
  const auto manifest = json::parse(slurp(a / "run_manifest.json"));
  EXPECT_TRUE(manifest.contains("throughput"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, VersionFlag) { EXPECT_EQ(vtrack("--version"), 0); }

}  // namespace
