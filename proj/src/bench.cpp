#include "surgsim/bench.hpp"

#include "surgsim/textio.hpp"
#include "surgsim/types.hpp"

#include <chrono>
#include <cmath>
#include <new>
#include <numeric>
#include <random>
#include <stdexcept>

namespace surgsim {

std::string to_string(BenchMode mode) { return mode == BenchMode::SimOnly ? "sim" : "rl"; }

BenchMode parse_bench_mode(const std::string& text) {
  if (text == "sim") return BenchMode::SimOnly;
  if (text == "rl") return BenchMode::RlSetup;
  throw ParseError("unknown benchmark mode '" + text + "' (expected sim or rl)");
}

void BenchOptions::validate() const {
  if (steps < 1) throw std::invalid_argument("benchmark steps must be >= 1");
  if (warmup < 0) throw std::invalid_argument("benchmark warm-up must be >= 0");
  if (env_counts.empty()) throw std::invalid_argument("at least one environment count is required");
  for (std::size_t n : env_counts) {
    if (n == 0) throw std::invalid_argument("environment counts must be >= 1");
  }
  for (std::size_t t : tet_counts) {
    if (t == 0) throw std::invalid_argument("tet counts must be >= 1");
  }
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
}

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

double rl_throughput(std::shared_ptr<const Scene> scene, std::size_t envs, long steps, PPOConfig ppo,
                     std::uint64_t seed, ExecutionMode mode) {
  // Keep the rollout size close to the configured one while dividing evenly.
  const int per_env = std::max(1, ppo.steps_before_update / static_cast<int>(envs));
  ppo.steps_before_update = per_env * static_cast<int>(envs);
  ppo.minibatch = std::min(ppo.minibatch, ppo.steps_before_update);
  const long timed_updates = std::max<long>(1, (steps * static_cast<long>(envs) + ppo.steps_before_update - 1) /
                                                   ppo.steps_before_update);
  ppo.total_steps = (timed_updates + 1) * ppo.steps_before_update;
  ppo.seed = seed;
  EnvBatch batch(scene, envs, mode);
  Trainer trainer(batch, ppo);
  trainer.iterate();  // warm-up update, not timed
  const long start_steps = trainer.env_steps();
  const auto t0 = clock_type::now();
  while (!trainer.done()) trainer.iterate();
  return static_cast<double>(trainer.env_steps() - start_steps) / seconds_since(t0);
}

}  // namespace

double measure_sim_throughput(std::shared_ptr<const Scene> scene, std::size_t envs, long steps, int warmup,
                              std::uint64_t seed, ExecutionMode mode) {
  if (steps < 1) throw std::invalid_argument("benchmark steps must be >= 1");
  EnvBatch batch(scene, envs, mode);
  batch.reset_all(seed);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::vector<double> actions(envs * kActionDim);
  auto step = [&] {
    for (double& a : actions) a = uniform(rng);
    batch.step(actions);
  };
  for (int i = 0; i < warmup; ++i) step();
  const auto t0 = clock_type::now();
  for (long i = 0; i < steps; ++i) step();
  return static_cast<double>(steps) * static_cast<double>(envs) / seconds_since(t0);
}

BenchReport run_benchmark(const BenchOptions& options, const std::function<void(const BenchRow&)>& on_row) {
  options.validate();
  std::vector<SceneConfig> scenes;
  if (options.tet_counts.empty()) {
    scenes.push_back(options.scene);
  } else {
    for (std::size_t target : options.tet_counts) {
      SceneConfig c = options.scene;
      c.mesh_path.reset();
      c.slab = slab_for_tet_count(c.slab, target);
      scenes.push_back(c);
    }
  }

  BenchReport report;
  for (const SceneConfig& cfg : scenes) {
    const std::shared_ptr<const Scene> scene = build_scene(cfg);
    for (std::size_t n : options.env_counts) {
      BenchRow row;
      row.envs = n;
      row.tets = scene->mesh.tets.size();
      row.mode = options.mode;
      std::vector<double> sps;
      try {
        for (std::uint64_t seed : options.seeds) {
          sps.push_back(options.mode == BenchMode::SimOnly
                            ? measure_sim_throughput(scene, n, options.steps, options.warmup, seed, options.execution)
                            : rl_throughput(scene, n, options.steps, options.ppo, seed, options.execution));
        }
      } catch (const std::bad_alloc&) {
        row.available = false;
      }
      if (row.available) {
        row.runs = static_cast<int>(sps.size());
        row.mean_sps = std::accumulate(sps.begin(), sps.end(), 0.0) / row.runs;
        double ss = 0.0;
        for (double s : sps) ss += (s - row.mean_sps) * (s - row.mean_sps);
        row.std_sps = row.runs > 1 ? std::sqrt(ss / (row.runs - 1)) : 0.0;
      }
      report.rows.push_back(row);
      if (on_row) on_row(row);
    }
  }
  return report;
}

namespace {

const char* kBenchHeader = "envs,tets,mode,mean_sps,std_sps,runs,available";

}  // namespace

void write_bench_csv(std::ostream& out, const BenchReport& report) {
  out << kBenchHeader << '\n';
  for (const BenchRow& r : report.rows) {
    out << r.envs << ',' << r.tets << ',' << to_string(r.mode) << ',';
    if (r.available) {
      out << format_double(r.mean_sps) << ',' << format_double(r.std_sps);
    } else {
      out << "-,-";
    }
    out << ',' << r.runs << ',' << (r.available ? 1 : 0) << '\n';
  }
}

BenchReport read_bench_csv(std::istream& in, const std::string& source) {
  BenchReport report;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kBenchHeader) throw ParseError(source, lineno, "unexpected column header");
      header = true;
      continue;
    }
    try {
      const auto cells = split(line, ',');
      if (cells.size() != 7) throw ParseError("expected 7 columns, got " + std::to_string(cells.size()));
      BenchRow r;
      r.envs = static_cast<std::size_t>(parse_long(cells[0]));
      r.tets = static_cast<std::size_t>(parse_long(cells[1]));
      r.mode = parse_bench_mode(cells[2]);
      r.runs = static_cast<int>(parse_long(cells[5]));
      r.available = parse_long(cells[6]) != 0;
      if (r.available) {
        r.mean_sps = parse_double(cells[3]);
        r.std_sps = parse_double(cells[4]);
      }
      report.rows.push_back(r);
    } catch (const ParseError& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  if (!header) throw ParseError(source, lineno, "missing column header");
  return report;
}

}  // namespace surgsim
