// Drives the surgsim executable end to end.
#include "surgsim/bench.hpp"
#include "surgsim/ppo.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace surgsim;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string output;  // stdout and stderr
};

Run run(const std::string& args) {
  const std::string cmd = std::string("\"") + SURGSIM_CLI + "\" " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

fs::path scratch() {
  const fs::path d = fs::temp_directory_path() / "surgsim_test_cli";
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("missing scene file names the path") {
  for (const char* sub : {"bench", "train", "eval --checkpoint x.ckpt"}) {
    CAPTURE(sub);
    const Run r = run(std::string(sub) + " --scene /nope/missing.scene");
    CHECK(r.status != 0);
    CHECK(r.output.find("/nope/missing.scene") != std::string::npos);
  }
}

TEST_CASE("argument errors") {
  CHECK(run("bench --steps 0").status != 0);
  CHECK(run("bench --mode gpu").status != 0);
  CHECK(run("").status != 0);
  CHECK(run("train --set ppo.nonsense=1 --steps 16").status != 0);
  const Run r = run("bench --set substeps=abc --steps 1");
  CHECK(r.status != 0);
  CHECK(r.output.find("substeps") != std::string::npos);
}

TEST_CASE("bench writes a csv report") {
  const fs::path csv = scratch() / "bench.csv";
  const Run r = run("bench --num-envs 1,2 --steps 2 --warmup 0 --runs 2 --csv " + csv.string());
  CAPTURE(r.output);
  REQUIRE(r.status == 0);
  std::ifstream in(csv);
  const BenchReport rep = read_bench_csv(in, csv.string());
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].envs == 1);
  CHECK(rep.rows[1].envs == 2);
  CHECK(rep.rows[0].tets == 1170);
  CHECK(rep.rows[1].runs == 2);
}

TEST_CASE("train records the horizon and eval reads the checkpoint") {
  const fs::path out = scratch() / "run32";
  fs::remove_all(out);
  const Run t = run("train --num-envs 32 --steps 1024 --set ppo.hidden=16,16 --out " + out.string());
  CAPTURE(t.output);
  REQUIRE(t.status == 0);
  const std::string log = slurp(out / "train_log.csv");
  CHECK(log.find("# horizon=32\n") != std::string::npos);
  CHECK(log.find("# num_envs=32\n") != std::string::npos);
  CHECK(fs::exists(out / "policy.ckpt"));
  CHECK(fs::exists(out / "reward_curve.csv"));
  CHECK(slurp(out / "config.txt").find("hidden=16,16") != std::string::npos);
  std::ifstream in(out / "train_log.csv");
  const TrainStats s = read_train_log(in, "log");
  REQUIRE(s.records.size() == 1);
  CHECK(s.records[0].env_steps == 1024);

  const std::string ckpt = (out / "policy.ckpt").string();
  CHECK(run("eval --checkpoint " + ckpt + " --episodes 0").status != 0);
  const fs::path eval_csv = out / "eval.csv";
  const Run e = run("eval --checkpoint " + ckpt + " --episodes 2 --num-envs 2 --csv " + eval_csv.string());
  CAPTURE(e.output);
  REQUIRE(e.status == 0);
  CHECK(slurp(eval_csv).rfind("episodes,successes,success_rate,mean_reward,mean_length\n2,", 0) == 0);

  const Run missing = run("eval --checkpoint " + (out / "nothing.ckpt").string());
  CHECK(missing.status != 0);
  CHECK(missing.output.find("nothing.ckpt") != std::string::npos);
}

TEST_CASE("train rejects an environment count that does not divide the rollout") {
  const Run r = run("train --num-envs 3 --steps 64 --out " + (scratch() / "bad").string());
  CHECK(r.status != 0);
  CHECK(r.output.find("divisible") != std::string::npos);
}
