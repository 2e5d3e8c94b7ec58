#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "qflow/cli.hpp"
#include "qflow/config.hpp"
#include "qflow/errors.hpp"
#include "qflow/report_io.hpp"

using namespace qflow;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::string& path, const std::string& text) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

// Strips the wall_seconds column (the one timing-dependent field).
std::string strip_wall_column(const std::string& csv) {
  std::string out;
  std::istringstream ss(csv);
  std::string line;
  while (std::getline(ss, line)) {
    const auto last_comma = line.rfind(',');
    out += line.substr(0, last_comma);
    out += '\n';
  }
  return out;
}

const char* kTinyTrainConfig =
    "run.seed = 3\n"
    "run.total_env_steps = 900\n"
    "run.parallel_envs = 3\n"
    "run.eval_every = 300\n"
    "run.eval_episodes = 2\n"
    "run.warmup_transitions = 300\n"
    "env.kind = chain\n"
    "env.num_actuators = 2\n"
    "env.horizon = 20\n"
    "train.batch_size = 16\n"
    "train.critic_hidden = 12\n"
    "train.critic_layers = 2\n"
    "train.policy_hidden = 12\n"
    "train.policy_layers = 2\n"
    "train.flow_hidden = 12\n"
    "train.flow_layers = 2\n";

}  // namespace

TEST_SUITE("config_cli") {

TEST_CASE("defaults mirror the published hyperparameters") {
  RunConfig config;
  config.finalize();
  CHECK(config.train.discount == 0.99);
  CHECK(config.train.batch_size == 256);
  CHECK(config.train.buffer_capacity == 1000000);
  CHECK(config.train.learning_rate == 3e-4);
  CHECK(config.train.critic_hidden == 256);
  CHECK(config.train.critic_layers == 3);
  CHECK(config.train.bn_decay == 0.99);
  CHECK(config.train.bn_epsilon == 1e-5);
  CHECK(config.train.flow.ascent_steps == 20);
  CHECK(config.train.flow.eta == 0.01);
  CHECK(config.train.flow.ode_steps == 20);
  CHECK(config.train.flow.ode_dt == 0.05);
}

TEST_CASE("unknown keys are rejected with the offending name") {
  RunConfig config;
  CHECK_THROWS_WITH_AS(apply_key(config, "flow.etaa", "0.1"),
                       doctest::Contains("flow.etaa"), ConfigError);
}

TEST_CASE("schedule invariant is validated at load") {
  RunConfig config;
  apply_key(config, "flow.ode_dt", "0.04");
  CHECK_THROWS_AS(config.finalize(), ConfigError);
  apply_key(config, "flow.ode_steps", "25");
  CHECK_NOTHROW(config.finalize());
}

TEST_CASE("overrides are applied after the file and appear in the snapshot") {
  RunConfig config;
  apply_override(config, "flow.eta=0.02");
  config.finalize();
  CHECK(config.train.flow.eta == 0.02);
  const std::string snapshot = snapshot_text(config);
  CHECK(snapshot.find("flow.eta = 0.02") != std::string::npos);
  CHECK_THROWS_AS(apply_override(config, "flow.eta:0.02"), ConfigError);
}

TEST_CASE("snapshot text round-trips to an identical configuration") {
  RunConfig config;
  apply_key(config, "env.kind", "redundant");
  apply_key(config, "env.num_actuators", "16");
  apply_key(config, "run.seed", "99");
  apply_key(config, "flow.eta", "0.005");
  config.finalize();
  const std::string snap1 = snapshot_text(config);
  RunConfig reparsed = parse_config_text(snap1);
  reparsed.finalize();
  CHECK(snapshot_text(reparsed) == snap1);
}

TEST_CASE("missing config file exits with the I/O code and names the path") {
  const char* argv[] = {"qflow", "train", "--config", "/nonexistent/qflow.cfg"};
  CHECK(run_cli(4, argv) == 3);
}

TEST_CASE("unknown analyze kind exits with the config code") {
  spit("test_out/cfg/basic.cfg", "run.seed = 1\n");
  const char* argv[] = {"qflow", "analyze", "nonsense", "--config", "test_out/cfg/basic.cfg"};
  CHECK(run_cli(5, argv) == 1);
  std::filesystem::remove_all("test_out");
}

TEST_CASE("correlation without a checkpoint is a config error") {
  spit("test_out/cfg/corr.cfg", "run.seed = 1\nrun.outdir = test_out/corr\n");
  const char* argv[] = {"qflow", "analyze", "correlation", "--config", "test_out/cfg/corr.cfg"};
  CHECK(run_cli(5, argv) == 1);
  std::filesystem::remove_all("test_out");
}

TEST_CASE("train command writes the run directory contract") {
  std::filesystem::remove_all("test_out");
  spit("test_out/cfg/train.cfg",
       std::string(kTinyTrainConfig) + "run.outdir = test_out/run_a\n");
  const char* argv[] = {"qflow", "train", "--config", "test_out/cfg/train.cfg"};
  REQUIRE(run_cli(4, argv) == 0);

  CHECK(std::filesystem::exists("test_out/run_a/config_resolved.txt"));
  CHECK(std::filesystem::exists("test_out/run_a/metrics.csv"));
  CHECK(std::filesystem::exists("test_out/run_a/train_summary.json"));
  CHECK(std::filesystem::exists("test_out/run_a/ckpt_900/manifest.json"));
  CHECK(std::filesystem::exists("test_out/run_a/ckpt_900/params.bin"));

  const std::string csv = slurp("test_out/run_a/metrics.csv");
  CHECK(csv.rfind(kMetricsCsvHeader, 0) == 0);
  std::filesystem::remove_all("test_out");
}

TEST_CASE("override shows up in the resolved snapshot file") {
  std::filesystem::remove_all("test_out");
  spit("test_out/cfg/train.cfg",
       std::string(kTinyTrainConfig) + "run.outdir = test_out/run_b\n");
  const char* argv[] = {"qflow",      "train",           "--config", "test_out/cfg/train.cfg",
                        "--override", "flow.eta=0.02"};
  REQUIRE(run_cli(6, argv) == 0);
  const std::string resolved = slurp("test_out/run_b/config_resolved.txt");
  CHECK(resolved.find("flow.eta = 0.02") != std::string::npos);
  std::filesystem::remove_all("test_out");
}

TEST_CASE("rerunning from the resolved snapshot reproduces the metrics bit-exactly") {
  std::filesystem::remove_all("test_out");
  spit("test_out/cfg/train.cfg",
       std::string(kTinyTrainConfig) + "run.outdir = test_out/run_c\n");
  const char* argv1[] = {"qflow", "train", "--config", "test_out/cfg/train.cfg"};
  REQUIRE(run_cli(4, argv1) == 0);
  const std::string first_csv = slurp("test_out/run_c/metrics.csv");

  // rerun from the snapshot into a second directory
  const char* argv2[] = {"qflow",      "train",
                         "--config",   "test_out/run_c/config_resolved.txt",
                         "--override", "run.outdir=test_out/run_d"};
  REQUIRE(run_cli(6, argv2) == 0);
  const std::string second_csv = slurp("test_out/run_d/metrics.csv");

  CHECK(strip_wall_column(first_csv) == strip_wall_column(second_csv));
  CHECK(first_csv != "");
  std::filesystem::remove_all("test_out");
}

TEST_CASE("eval command round-trips a checkpoint and rejects zero episodes") {
  std::filesystem::remove_all("test_out");
  spit("test_out/cfg/train.cfg",
       std::string(kTinyTrainConfig) + "run.outdir = test_out/run_e\n");
  const char* train_argv[] = {"qflow", "train", "--config", "test_out/cfg/train.cfg"};
  REQUIRE(run_cli(4, train_argv) == 0);

  const char* eval_argv[] = {"qflow",      "eval",       "--checkpoint", "test_out/run_e/ckpt_900",
                             "--episodes", "2",          "--seed",       "5"};
  REQUIRE(run_cli(8, eval_argv) == 0);
  const std::string first = slurp("test_out/run_e/ckpt_900/eval_ep2_seed5.json");
  REQUIRE(run_cli(8, eval_argv) == 0);  // same seed twice: identical output
  const std::string second = slurp("test_out/run_e/ckpt_900/eval_ep2_seed5.json");
  CHECK(first == second);
  CHECK(first.find("mean_return") != std::string::npos);

  const char* bad_argv[] = {"qflow", "eval", "--checkpoint", "test_out/run_e/ckpt_900",
                            "--episodes", "0"};
  CHECK(run_cli(6, bad_argv) == 1);

  // corrupt manifest: nonzero exit naming the problem
  spit("test_out/run_e/ckpt_900/manifest.json", "{ not json");
  CHECK(run_cli(8, eval_argv) == 3);
  std::filesystem::remove_all("test_out");
}

TEST_CASE("a numeric blow-up halts with exit code 2 and a diagnostic snapshot") {
  std::filesystem::remove_all("test_out");
  // an absurd learning rate reliably overflows the first post-warmup update
  spit("test_out/cfg/nan.cfg",
       std::string(kTinyTrainConfig) +
           "run.outdir = test_out/run_nan\ntrain.learning_rate = 1e200\n");
  const char* argv[] = {"qflow", "train", "--config", "test_out/cfg/nan.cfg"};
  CHECK(run_cli(4, argv) == 2);
  bool snapshot_found = false;
  for (const auto& entry : std::filesystem::directory_iterator("test_out/run_nan"))
    if (entry.path().filename().string().rfind("ckpt_diagnostic_", 0) == 0) snapshot_found = true;
  CHECK(snapshot_found);
  std::filesystem::remove_all("test_out");
}

TEST_CASE("analyze variance emits the documented schema") {
  std::filesystem::remove_all("test_out");
  spit("test_out/cfg/var.cfg",
       "run.outdir = test_out/var\n"
       "analysis.dims = 2,4\n"
       "analysis.samples = 20000\n");
  const char* argv[] = {"qflow", "analyze", "variance", "--config", "test_out/cfg/var.cfg"};
  REQUIRE(run_cli(5, argv) == 0);
  const std::string csv = slurp("test_out/var/analysis/variance.csv");
  CHECK(csv.rfind("dim,empirical_variance,theoretical,loglog_slope", 0) == 0);
  CHECK(std::filesystem::exists("test_out/var/analysis/variance_summary.json"));
  std::filesystem::remove_all("test_out");
}

TEST_CASE("analyze monotonicity quadratic reports a pass") {
  std::filesystem::remove_all("test_out");
  spit("test_out/cfg/mono.cfg",
       "run.outdir = test_out/mono\n"
       "analysis.monotonicity_mode = quadratic\n"
       "analysis.states = 8\n"
       "analysis.action_samples = 32\n"
       "analysis.action_dim = 2\n");
  const char* argv[] = {"qflow", "analyze", "monotonicity", "--config", "test_out/cfg/mono.cfg"};
  REQUIRE(run_cli(5, argv) == 0);
  const std::string summary = slurp("test_out/mono/analysis/monotonicity_summary.json");
  CHECK(summary.find("\"pass\": true") != std::string::npos);
  std::filesystem::remove_all("test_out");
}

}  // TEST_SUITE
