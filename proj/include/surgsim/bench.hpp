#pragma once

#include "surgsim/ppo.hpp"
#include "surgsim/scene.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace surgsim {

enum class BenchMode { SimOnly, RlSetup };

std::string to_string(BenchMode mode);  // "sim" / "rl"
BenchMode parse_bench_mode(const std::string& text);

struct BenchOptions {
  BenchMode mode = BenchMode::SimOnly;
  std::vector<std::size_t> env_counts{1};
  // Slab sizes to generate; empty runs the base scene as configured.
  std::vector<std::size_t> tet_counts;
  long steps = 1000;  // timed batch steps per run (rl: environment steps per environment)
  int warmup = 100;   // untimed batch steps before each run
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  SceneConfig scene;
  PPOConfig ppo;  // rl mode only
  ExecutionMode execution = ExecutionMode::Deterministic;

  void validate() const;
};

struct BenchRow {
  std::size_t envs = 0;
  std::size_t tets = 0;
  BenchMode mode = BenchMode::SimOnly;
  double mean_sps = 0.0;  // environment steps per second, summed over the batch
  double std_sps = 0.0;   // sample standard deviation over runs
  int runs = 0;
  bool available = true;  // false when the configuration could not be allocated
};

struct BenchReport {
  std::vector<BenchRow> rows;
};

// Rows ordered by tet count, then environment count.
BenchReport run_benchmark(const BenchOptions& options,
                          const std::function<void(const BenchRow&)>& on_row = {});

// One run: throughput in environment steps per second.
double measure_sim_throughput(std::shared_ptr<const Scene> scene, std::size_t envs, long steps, int warmup,
                              std::uint64_t seed, ExecutionMode mode = ExecutionMode::Deterministic);

void write_bench_csv(std::ostream& out, const BenchReport& report);
BenchReport read_bench_csv(std::istream& in, const std::string& source);

}  // namespace surgsim
