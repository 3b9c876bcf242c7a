// surgsim: benchmark, train and evaluate the batched reach-task simulator.
//
//   surgsim bench --mode sim --num-envs 1,4,8,16,32,64,80 --steps 1000 --csv bench.csv
//   surgsim bench --num-envs 1 --tets 1170,1431,2880,9729,52359
//   surgsim train --num-envs 8 --out runs/reach
//   surgsim eval  --checkpoint runs/reach/policy.ckpt --episodes 100

#include "surgsim/bench.hpp"
#include "surgsim/ppo.hpp"
#include "surgsim/scene.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

using namespace surgsim;

namespace {

constexpr int kExitDiverged = 3;

struct Common {
  std::string scene;
  std::vector<std::string> sets;
  std::uint64_t seed = 1;
  bool parallel = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--scene", c.scene, "Scene file (default: built-in slab scene)");
  app->add_option("--set", c.sets, "Override key=value; keys prefixed 'ppo.' configure the trainer")
      ->take_all();
  app->add_option("--seed", c.seed, "Base seed");
  app->add_flag("--parallel", c.parallel, "Parallel constraint projection (not bitwise reproducible)");
}

// Applies --set overrides to the scene and trainer configs.
void resolve(const Common& c, SceneConfig& scene, PPOConfig* ppo) {
  if (!c.scene.empty()) scene = load_scene_config(c.scene);
  for (const std::string& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ParseError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    if (key.rfind("ppo.", 0) == 0) {
      if (!ppo) throw ParseError("'" + key + "' has no effect for this command");
      apply_ppo_override(*ppo, key.substr(4), kv.substr(eq + 1));
    } else {
      apply_scene_override(scene, kv);
    }
  }
  scene.validate();
}

ExecutionMode execution(const Common& c) { return c.parallel ? ExecutionMode::Parallel : ExecutionMode::Deterministic; }

std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  return out;
}

int bench(const Common& c, const std::string& mode, const std::vector<std::size_t>& envs,
          const std::vector<std::size_t>& tets, long steps, int warmup, int runs, const std::string& csv) {
  BenchOptions opt;
  resolve(c, opt.scene, &opt.ppo);
  opt.mode = parse_bench_mode(mode);
  opt.env_counts = envs;
  opt.tet_counts = tets;
  opt.steps = steps;
  opt.warmup = warmup;
  opt.execution = execution(c);
  opt.seeds.clear();
  for (int i = 0; i < runs; ++i) opt.seeds.push_back(c.seed + static_cast<std::uint64_t>(i));

  std::printf("%6s %7s %4s %14s %12s\n", "envs", "tets", "mode", "steps/s", "std");
  const BenchReport report = run_benchmark(opt, [](const BenchRow& r) {
    if (r.available) {
      std::printf("%6zu %7zu %4s %14.1f %12.1f\n", r.envs, r.tets, to_string(r.mode).c_str(), r.mean_sps, r.std_sps);
    } else {
      std::printf("%6zu %7zu %4s %14s %12s\n", r.envs, r.tets, to_string(r.mode).c_str(), "-", "-");
    }
    std::fflush(stdout);
  });
  if (!csv.empty()) {
    auto out = open_out(csv);
    write_bench_csv(out, report);
  }
  return 0;
}

int train_cmd(const Common& c, std::size_t num_envs, long steps, const std::string& out_dir, const std::string& csv) {
  SceneConfig scene_cfg;
  PPOConfig ppo;
  ppo.seed = c.seed;
  resolve(c, scene_cfg, &ppo);
  if (steps > 0) ppo.total_steps = steps;
  const auto scene = build_scene(scene_cfg);
  EnvBatch envs(scene, num_envs, execution(c));

  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  {
    auto cfg = open_out(dir / "config.txt");
    cfg << format_scene_config(scene_cfg) << "# ppo\n" << format_ppo_config(ppo);
  }
  std::printf("training: %zu envs, horizon %d, %ld updates, %zu tets\n", num_envs, ppo.horizon(num_envs),
              ppo.update_count(), scene->mesh.tets.size());

  ActorCritic policy;
  const TrainStats stats = train(envs, ppo, &policy, [](const TrainRecord& r) {
    if (r.update % 10 == 0 || r.update == 1) {
      std::printf("update %4ld  steps %7ld  reward %8.2f  length %6.1f  %7.0f steps/s\n", r.update, r.env_steps,
                  r.mean_episode_reward, r.mean_episode_length, r.steps_per_sec);
      std::fflush(stdout);
    }
  });

  save_checkpoint((dir / "policy.ckpt").string(), policy);
  {
    auto log = open_out(csv.empty() ? dir / "train_log.csv" : std::filesystem::path(csv));
    write_train_log(log, stats, ppo);
  }
  {
    auto curve = open_out(dir / "reward_curve.csv");
    curve << "env_steps,mean_episode_reward\n";
    for (const TrainRecord& r : stats.records) curve << r.env_steps << ',' << r.mean_episode_reward << '\n';
  }
  const TrainRecord& last = stats.records.back();
  std::printf("done: %ld steps in %.1f s, final mean reward %.2f; wrote %s\n", last.env_steps, stats.wall_seconds,
              last.mean_episode_reward, dir.string().c_str());
  if (last.diverged > 0) {
    std::fprintf(stderr, "error: %ld episodes diverged during training; outputs kept in %s\n", last.diverged,
                 dir.string().c_str());
    return kExitDiverged;
  }
  return 0;
}

int eval_cmd(const Common& c, const std::string& checkpoint, int episodes, std::size_t num_envs,
             const std::string& csv) {
  SceneConfig scene_cfg;
  resolve(c, scene_cfg, nullptr);
  const ActorCritic net = load_checkpoint(checkpoint);
  EnvBatch envs(build_scene(scene_cfg), num_envs, execution(c));
  const EvalResult r = run_eval(net, envs, episodes, c.seed);
  std::printf("episodes %d  success rate %.3f  mean reward %.3f  mean length %.1f\n", r.episodes,
              r.success_rate, r.mean_reward, r.mean_length);
  if (!csv.empty()) {
    auto out = open_out(csv);
    out << "episodes,successes,success_rate,mean_reward,mean_length\n"
        << r.episodes << ',' << r.successes << ',' << r.success_rate << ',' << r.mean_reward << ','
        << r.mean_length << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batched soft-tissue reach-task simulator"};
  app.require_subcommand(1);

  Common common;

  auto* b = app.add_subcommand("bench", "Measure environment throughput");
  add_common(b, common);
  std::string mode = "sim", bench_csv;
  std::vector<std::size_t> bench_envs{1, 4, 8, 16, 32, 64, 80}, bench_tets;
  long bench_steps = 1000;
  int warmup = 100, runs = 5;
  b->add_option("--mode", mode, "sim (stepping only) or rl (rollout and update loop)")
      ->check(CLI::IsMember({"sim", "rl"}));
  b->add_option("--num-envs", bench_envs, "Environment counts")->delimiter(',');
  b->add_option("--tets", bench_tets, "Generate slabs with about these tet counts")->delimiter(',');
  b->add_option("--steps", bench_steps, "Timed batch steps per run")->check(CLI::PositiveNumber);
  b->add_option("--warmup", warmup, "Untimed steps before each run")->check(CLI::NonNegativeNumber);
  b->add_option("--runs", runs, "Runs per row, seeds seed..seed+runs-1")->check(CLI::PositiveNumber);
  b->add_option("--csv", bench_csv, "Write the report as CSV");

  auto* t = app.add_subcommand("train", "Train the reach policy with PPO");
  add_common(t, common);
  std::size_t train_envs = 1;
  long train_steps = 0;
  std::string out_dir = "runs/train", train_csv;
  t->add_option("--num-envs", train_envs, "Environments stepped as one batch")->check(CLI::PositiveNumber);
  t->add_option("--steps", train_steps, "Total environment steps (default 500000)")->check(CLI::PositiveNumber);
  t->add_option("--out", out_dir, "Output directory for checkpoint and logs");
  t->add_option("--csv", train_csv, "Training log path (default <out>/train_log.csv)");

  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint with the mean action");
  add_common(e, common);
  std::string checkpoint, eval_csv;
  int episodes = 100;
  std::size_t eval_envs = 1;
  e->add_option("--checkpoint", checkpoint, "Policy checkpoint")->required();
  e->add_option("--episodes", episodes, "Episodes to run")->check(CLI::PositiveNumber);
  e->add_option("--num-envs", eval_envs, "Environments stepped as one batch")->check(CLI::PositiveNumber);
  e->add_option("--csv", eval_csv, "Write the result as CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (b->parsed()) return bench(common, mode, bench_envs, bench_tets, bench_steps, warmup, runs, bench_csv);
    if (t->parsed()) return train_cmd(common, train_envs, train_steps, out_dir, train_csv);
    if (e->parsed()) return eval_cmd(common, checkpoint, episodes, eval_envs, eval_csv);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
