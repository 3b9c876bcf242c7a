#include "support.hpp"

#include "surgsim/bench.hpp"

#include <doctest.h>

#include <sstream>

using namespace surgsim;

namespace {

BenchOptions quick() {
  BenchOptions o;
  o.steps = 2;
  o.warmup = 1;
  o.seeds = {1, 2};
  o.scene.slab = SlabSpec{2, 1, 1, Vec3::Zero(), Vec3(0.02, 0.01, 0.01)};
  o.scene.env.target = Vec3(0.01, 0.02, 0.005);
  return o;
}

}  // namespace

TEST_CASE("bench mode names") {
  CHECK(to_string(BenchMode::SimOnly) == "sim");
  CHECK(to_string(BenchMode::RlSetup) == "rl");
  CHECK(parse_bench_mode("sim") == BenchMode::SimOnly);
  CHECK(parse_bench_mode("rl") == BenchMode::RlSetup);
  CHECK_THROWS_AS(parse_bench_mode("gpu"), ParseError);
}

TEST_CASE("argument checks") {
  BenchOptions o = quick();
  o.steps = 0;
  CHECK_THROWS_AS(run_benchmark(o), std::invalid_argument);
  o = quick();
  o.env_counts = {};
  CHECK_THROWS_AS(run_benchmark(o), std::invalid_argument);
  o = quick();
  o.env_counts = {0};
  CHECK_THROWS_AS(run_benchmark(o), std::invalid_argument);
  o = quick();
  o.seeds.clear();
  CHECK_THROWS_AS(run_benchmark(o), std::invalid_argument);
  CHECK_THROWS_AS(measure_sim_throughput(build_scene(quick().scene), 1, 0, 0, 1), std::invalid_argument);
}

TEST_CASE("one row per environment count") {
  BenchOptions o = quick();
  o.env_counts = {1, 4, 8, 16, 32, 64, 80};
  std::size_t streamed = 0;
  const BenchReport r = run_benchmark(o, [&](const BenchRow&) { ++streamed; });
  REQUIRE(r.rows.size() == 7);
  CHECK(streamed == 7);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(r.rows[i].envs == o.env_counts[i]);
    CHECK(r.rows[i].tets == 12);
    CHECK(r.rows[i].mode == BenchMode::SimOnly);
    CHECK(r.rows[i].available);
    CHECK(r.rows[i].runs == 2);
    CHECK(r.rows[i].mean_sps > 0.0);
    CHECK(r.rows[i].std_sps >= 0.0);
  }
}

TEST_CASE("one row per mesh size") {
  BenchOptions o = quick();
  o.scene = SceneConfig{};
  o.steps = 1;
  o.warmup = 0;
  o.seeds = {1};
  o.tet_counts = {1170, 1431, 2880, 9729, 52359};
  const BenchReport r = run_benchmark(o);
  REQUIRE(r.rows.size() == 5);
  CHECK(r.rows[0].tets == 1170);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(r.rows[i].envs == 1);
    CHECK(std::abs(double(r.rows[i].tets) - double(o.tet_counts[i])) / double(o.tet_counts[i]) < 0.05);
    if (i > 0) CHECK(r.rows[i].tets > r.rows[i - 1].tets);
  }
}

TEST_CASE("rl mode runs rollout and update") {
  BenchOptions o = quick();
  o.mode = BenchMode::RlSetup;
  o.env_counts = {3};
  o.steps = 8;
  o.seeds = {1};
  o.ppo.steps_before_update = 16;
  o.ppo.network.hidden = {16};
  const BenchReport r = run_benchmark(o);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].mode == BenchMode::RlSetup);
  CHECK(r.rows[0].mean_sps > 0.0);
}

TEST_CASE("bench csv round trip") {
  BenchReport r;
  r.rows.push_back({1, 1170, BenchMode::SimOnly, 612.25, 3.5, 5, true});
  r.rows.push_back({80, 52359, BenchMode::RlSetup, 0.0, 0.0, 0, false});
  std::stringstream io;
  write_bench_csv(io, r);
  const std::string text = io.str();
  CHECK(text.rfind("envs,tets,mode,mean_sps,std_sps,runs,available\n", 0) == 0);
  CHECK(text.find("80,52359,rl,-,-,0,0") != std::string::npos);
  const BenchReport back = read_bench_csv(io, "bench.csv");
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0].envs == 1);
  CHECK(back.rows[0].tets == 1170);
  CHECK(back.rows[0].mean_sps == 612.25);
  CHECK(back.rows[0].std_sps == 3.5);
  CHECK(back.rows[0].runs == 5);
  CHECK(back.rows[0].available);
  CHECK(back.rows[1].mode == BenchMode::RlSetup);
  CHECK(!back.rows[1].available);

  std::stringstream bad("envs,tets\n1,2\n");
  CHECK_THROWS_AS(read_bench_csv(bad, "bad"), ParseError);
  std::stringstream short_row("envs,tets,mode,mean_sps,std_sps,runs,available\n1,2,sim\n");
  CHECK_THROWS_AS(read_bench_csv(short_row, "short"), ParseError);
}
