#include "support.hpp"

#include "surgsim/ppo.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

using namespace surgsim;

namespace {

NetworkSpec small_spec(bool shared = false) {
  NetworkSpec s;
  s.hidden = {8, 5};
  s.shared_trunk = shared;
  s.log_std_init = -0.3;
  return s;
}

std::shared_ptr<const Scene> default_scene() {
  static const auto scene = build_scene(SceneConfig{});
  return scene;
}

PPOConfig short_config() {
  PPOConfig c;
  c.total_steps = 1024;
  c.steps_before_update = 256;
  c.minibatch = 64;
  c.network.hidden = {32, 32};
  c.seed = 17;
  return c;
}

// A minibatch near the behaviour policy of `net`, with offsets that push some
// samples well past the clip boundaries.
Minibatch random_batch(const ActorCritic& net, int m, double logp_offset, double value_offset, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Minibatch b;
  b.observations = Eigen::MatrixXd::NullaryExpr(net.spec().obs_dim, m, [&] { return n(rng); });
  ActorCritic::Cache cache;
  net.forward(b.observations, cache);
  b.actions = cache.mean + Eigen::MatrixXd::NullaryExpr(net.spec().act_dim, m, [&] { return 0.7 * n(rng); });
  const Eigen::VectorXd logp = net.log_prob(cache.mean, b.actions);
  b.log_probs = logp + Eigen::VectorXd::NullaryExpr(m, [&] { return logp_offset * n(rng); });
  b.values = cache.value + Eigen::VectorXd::NullaryExpr(m, [&] { return value_offset * n(rng); });
  b.advantages = Eigen::VectorXd::NullaryExpr(m, [&] { return n(rng); });
  b.returns = cache.value + Eigen::VectorXd::NullaryExpr(m, [&] { return n(rng); });
  return b;
}

void check_loss_gradient(ActorCritic net, const Minibatch& batch, const PPOConfig& config, double eps) {
  const PPOLoss base = ppo_loss(net, batch, config, eps);
  Eigen::VectorXd& p = net.parameters();
  const double h = 1e-6;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    const double up = ppo_loss(net, batch, config, eps).total;
    p[i] = keep - h;
    const double down = ppo_loss(net, batch, config, eps).total;
    p[i] = keep;
    worst = std::max(worst, std::abs((up - down) / (2 * h) - base.grad[i]));
  }
  CHECK(worst < 1e-6 * std::max(1.0, base.grad.lpNorm<Eigen::Infinity>()));
}

}  // namespace

TEST_CASE("linear schedule") {
  CHECK(linear_schedule(2.5e-4, 0, 500000) == 2.5e-4);
  CHECK(linear_schedule(2.5e-4, 500000, 500000) == 0.0);
  CHECK(linear_schedule(2.5e-4, 250000, 500000) == doctest::Approx(1.25e-4).epsilon(1e-15));
  CHECK(linear_schedule(0.1, 600000, 500000) == 0.0);
  CHECK(linear_schedule(0.1, -5, 500000) == 0.1);
}

TEST_CASE("gae examples") {
  SUBCASE("single terminal step") {
    const std::vector<double> r{1.0}, v{0.0};
    const std::vector<std::uint8_t> term{1};
    const GaeResult g = compute_gae(r, v, 123.0, term, 0.995, 0.95);
    CHECK(g.advantages[0] == 1.0);
    CHECK(g.returns[0] == 1.0);
  }
  SUBCASE("two steps ending in a terminal") {
    const std::vector<double> r{0.0, 1.0}, v{0.5, 0.5};
    const std::vector<std::uint8_t> term{0, 1};
    const GaeResult g = compute_gae(r, v, 0.0, term, 0.995, 0.95);
    // delta = [-0.0025, 0.5]; A0 = -0.0025 + 0.995 * 0.95 * 0.5
    CHECK(g.advantages[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g.advantages[0] == doctest::Approx(0.470125).epsilon(1e-14));
    CHECK(g.returns[0] == doctest::Approx(0.970125).epsilon(1e-14));
  }
  SUBCASE("lambda 0 gives the one-step residual") {
    const std::vector<double> r{0.3, -1.0, 2.0}, v{0.1, 0.4, -0.2};
    const std::vector<std::uint8_t> term{0, 0, 0};
    const GaeResult g = compute_gae(r, v, 0.7, term, 0.9, 0.0);
    CHECK(g.advantages[0] == 0.3 + 0.9 * 0.4 - 0.1);
    CHECK(g.advantages[1] == -1.0 + 0.9 * -0.2 - 0.4);
    CHECK(g.advantages[2] == 2.0 + 0.9 * 0.7 - -0.2);
  }
}

TEST_CASE("gae with lambda 1 equals discounted Monte Carlo returns") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t T = 1 + trial % 13;
    std::vector<double> r(T), v(T);
    for (std::size_t i = 0; i < T; ++i) {
      r[i] = n(rng);
      v[i] = n(rng);
    }
    const bool terminal = trial % 2 == 0;
    std::vector<std::uint8_t> term(T, 0);
    term[T - 1] = terminal ? 1 : 0;
    const double boot = n(rng), gamma = 0.97;
    const GaeResult g = compute_gae(r, v, boot, term, gamma, 1.0);
    for (std::size_t t = 0; t < T; ++t) {
      double ret = 0.0, disc = 1.0;
      for (std::size_t k = t; k < T; ++k) {
        ret += disc * r[k];
        disc *= gamma;
      }
      if (!terminal) ret += disc * boot;
      CHECK(g.returns[t] == doctest::Approx(ret).epsilon(1e-12));
      CHECK(g.advantages[t] == doctest::Approx(ret - v[t]).epsilon(1e-12));
    }
  }
}

TEST_CASE("gae bootstraps truncated steps from the terminal observation value") {
  const std::vector<double> r{1.0, 1.0, 1.0}, v{0.0, 0.0, 0.0}, next{5.0, 7.0, 9.0};
  const std::vector<std::uint8_t> term{0, 0, 1}, end{1, 0, 1};
  const GaeResult g = compute_gae(r, v, next, term, end, 0.5, 1.0);
  CHECK(g.advantages[2] == 1.0);  // terminal: no bootstrap
  CHECK(g.advantages[1] == 1.0 + 0.5 * 7.0 + 0.5 * 1.0);  // carries into step 2
  CHECK(g.advantages[0] == 1.0 + 0.5 * 5.0);  // truncated: bootstrap, recursion cut
  CHECK_THROWS_AS(compute_gae(r, v, std::vector<double>{1.0}, term, end, 0.5, 1.0), std::invalid_argument);
}

TEST_CASE("rollout buffer runs gae per environment") {
  RolloutBuffer b(3, 2, NetworkSpec{});
  // env 0: rewards 1,2,3 ; env 1: rewards 10,20,30 (terminates at t=1)
  for (int t = 0; t < 3; ++t) {
    b.rewards[2 * t] = t + 1;
    b.rewards[2 * t + 1] = 10.0 * (t + 1);
  }
  b.terminated[3] = 1;
  b.finish(1.0, 1.0);
  CHECK(b.returns[0] == 6.0);
  CHECK(b.returns[4] == 3.0);
  CHECK(b.returns[1] == 30.0);
  CHECK(b.returns[3] == 20.0);
  CHECK(b.returns[5] == 30.0);
}

TEST_CASE("update schedule arithmetic") {
  PPOConfig c;
  CHECK(c.horizon(1) == 1024);
  CHECK(c.horizon(32) == 32);
  CHECK(c.horizon(8) == 128);
  CHECK(c.update_count() == 489);
  CHECK(c.update_count() * c.steps_before_update >= c.total_steps);
  CHECK((c.update_count() - 1) * c.steps_before_update < c.total_steps);
  CHECK_THROWS_AS(c.horizon(3), ValidationError);
  CHECK_THROWS_AS(c.horizon(0), ValidationError);
}

TEST_CASE("ppo config overrides") {
  PPOConfig c;
  apply_ppo_override(c, "gamma", "0.9");
  apply_ppo_override(c, "hidden", "64,32");
  apply_ppo_override(c, "shared_trunk", "1");
  CHECK(c.gamma == 0.9);
  CHECK(c.network.hidden == std::vector<int>{64, 32});
  CHECK(c.network.shared_trunk);
  CHECK_THROWS_AS(apply_ppo_override(c, "gama", "0.9"), ParseError);
  CHECK_THROWS_AS(apply_ppo_override(c, "epochs", "four"), ParseError);
  c.clip_range = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK_NOTHROW(PPOConfig{}.validate());
  CHECK(format_ppo_config(PPOConfig{}).find("gamma=0.995\n") != std::string::npos);
}

TEST_CASE("network gradients match finite differences") {
  for (bool shared : {false, true}) {
    CAPTURE(shared);
    ActorCritic net(small_spec(shared), 3);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    const int B = 7;
    const Eigen::MatrixXd obs = Eigen::MatrixXd::NullaryExpr(6, B, [&] { return n(rng); });
    // Scalar probe L = sum W_mean .* mean + sum w_v .* value + c . log_std
    const Eigen::MatrixXd wm = Eigen::MatrixXd::NullaryExpr(3, B, [&] { return n(rng); });
    const Eigen::VectorXd wv = Eigen::VectorXd::NullaryExpr(B, [&] { return n(rng); });
    const Eigen::VectorXd ws = Eigen::VectorXd::NullaryExpr(3, [&] { return n(rng); });
    auto probe = [&](const ActorCritic& a) {
      ActorCritic::Cache c;
      a.forward(obs, c);
      return (c.mean.array() * wm.array()).sum() + c.value.dot(wv) + a.log_std().dot(ws);
    };
    ActorCritic::Cache cache;
    net.forward(obs, cache);
    Eigen::VectorXd grad;
    net.backward(cache, wm, wv, ws, grad);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < net.parameters().size(); ++i) {
      const double keep = net.parameters()[i];
      net.parameters()[i] = keep + h;
      const double up = probe(net);
      net.parameters()[i] = keep - h;
      const double down = probe(net);
      net.parameters()[i] = keep;
      CHECK(std::abs((up - down) / (2 * h) - grad[i]) < 1e-6);
    }
  }
}

TEST_CASE("initialisation") {
  const ActorCritic net(NetworkSpec{}, 1);
  // 6-128-128 twice, mean 128->3, value 128->1, log-std 3
  const std::size_t trunk = 6 * 128 + 128 + 128 * 128 + 128;
  CHECK(net.parameter_count() == 2 * trunk + 128 * 3 + 3 + 128 + 1 + 3);
  for (double s : net.log_std()) CHECK(s == 0.0);
  ActorCritic::Cache c;
  net.forward(Eigen::MatrixXd::Random(6, 10), c);
  CHECK(c.mean.cwiseAbs().maxCoeff() < 0.1);
  CHECK(ActorCritic(NetworkSpec{}, 1).parameters() == net.parameters());
  CHECK(ActorCritic(NetworkSpec{}, 2).parameters() != net.parameters());
  CHECK(net.entropy() == doctest::Approx(1.5 * (1.0 + std::log(2.0 * 3.14159265358979323846))));
}

TEST_CASE("log-probability of a diagonal Gaussian") {
  const ActorCritic net(small_spec(), 1);
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(3, 1), act(3, 1);
  act << 0.5, -1.0, 0.0;
  const double s = std::exp(-0.3);
  double want = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double z = act(k, 0) / s;
    want += -0.5 * z * z - std::log(s) - 0.5 * std::log(2.0 * 3.14159265358979323846);
  }
  CHECK(net.log_prob(mean, act)[0] == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("clipped surrogate") {
  SUBCASE("ratio one is the mean advantage") {
    const Eigen::ArrayXd ratio = Eigen::ArrayXd::Ones(4);
    Eigen::ArrayXd adv(4);
    adv << 1.0, -2.0, 0.5, 3.0;
    const Surrogate s = clipped_surrogate(ratio, adv, 0.1);
    CHECK(s.value.mean() == doctest::Approx(adv.mean()));
    CHECK((s.d_log_ratio - adv).abs().maxCoeff() == 0.0);
  }
  SUBCASE("large ratio with positive advantage is clipped") {
    Eigen::ArrayXd ratio(1), adv(1);
    ratio << 1.3;
    adv << 2.0;
    const Surrogate s = clipped_surrogate(ratio, adv, 0.1);
    CHECK(s.value[0] == doctest::Approx(1.1 * 2.0).epsilon(1e-15));
    CHECK(s.d_log_ratio[0] == 0.0);
  }
  SUBCASE("large ratio with negative advantage keeps the gradient") {
    Eigen::ArrayXd ratio(1), adv(1);
    ratio << 1.3;
    adv << -2.0;
    const Surrogate s = clipped_surrogate(ratio, adv, 0.1);
    CHECK(s.value[0] == doctest::Approx(-2.6));
    CHECK(s.d_log_ratio[0] == doctest::Approx(-2.6));
  }
  SUBCASE("small ratio with negative advantage is clipped") {
    Eigen::ArrayXd ratio(1), adv(1);
    ratio << 0.5;
    adv << -1.0;
    const Surrogate s = clipped_surrogate(ratio, adv, 0.1);
    CHECK(s.value[0] == doctest::Approx(-0.9));
    CHECK(s.d_log_ratio[0] == 0.0);
  }
}

TEST_CASE("ppo loss composition") {
  const ActorCritic net(small_spec(), 5);
  const Minibatch b = random_batch(net, 16, 0.0, 0.0, 1);
  PPOConfig c;
  c.network = small_spec();
  SUBCASE("entropy coefficient zero") {
    const PPOLoss l = ppo_loss(net, b, c, 0.1);
    CHECK(l.total == l.policy + 0.5 * l.value);
    CHECK(l.entropy == doctest::Approx(net.entropy()));
  }
  SUBCASE("identical policy") {
    const PPOLoss l = ppo_loss(net, b, c, 0.1);
    CHECK(l.policy == doctest::Approx(-b.advantages.mean()).epsilon(1e-12));
    CHECK(l.clip_fraction == 0.0);
    CHECK(std::abs(l.approx_kl) < 1e-14);
    CHECK(l.value == doctest::Approx((b.returns - b.values).squaredNorm() / 16).epsilon(1e-12));
  }
  SUBCASE("entropy bonus") {
    c.ent_coef = 0.01;
    const PPOLoss l = ppo_loss(net, b, c, 0.1);
    CHECK(l.total == doctest::Approx(l.policy + 0.5 * l.value - 0.01 * l.entropy).epsilon(1e-14));
  }
}

TEST_CASE("ppo loss gradient matches finite differences") {
  PPOConfig c;
  c.network = small_spec();
  SUBCASE("smooth region") {
    const ActorCritic net(small_spec(), 6);
    c.clip_range_vf = 100.0;
    c.ent_coef = 0.02;
    check_loss_gradient(net, random_batch(net, 24, 0.05, 0.0, 2), c, 10.0);
  }
  SUBCASE("clipped samples") {
    const ActorCritic net(small_spec(), 7);
    const Minibatch b = random_batch(net, 24, 0.6, 0.6, 3);
    const PPOLoss l = ppo_loss(net, b, c, 0.1);
    CHECK(l.clip_fraction > 0.3);
    check_loss_gradient(net, b, c, 0.1);
  }
  SUBCASE("shared trunk") {
    c.network = small_spec(true);
    const ActorCritic net(c.network, 8);
    check_loss_gradient(net, random_batch(net, 24, 0.3, 0.3, 4), c, 0.2);
  }
}

TEST_CASE("advantage normalisation") {
  const std::vector<double> a{1.0, 2.0, 3.0, 4.0};
  const auto n = normalize_advantages(a);
  const double sd = std::sqrt(5.0 / 3.0);
  CHECK(n[0] == doctest::Approx(-1.5 / (sd + 1e-8)).epsilon(1e-14));
  double sum = 0.0;
  for (double v : n) sum += v;
  CHECK(std::abs(sum) < 1e-14);
  CHECK(normalize_advantages(std::vector<double>{7.0}) == std::vector<double>{7.0});
  const auto flat = normalize_advantages(std::vector<double>{2.0, 2.0, 2.0});
  for (double v : flat) CHECK(v == 0.0);
}

TEST_CASE("ppo update clips the global gradient norm") {
  PPOConfig c;
  c.network = small_spec();
  c.minibatch = 8;
  c.max_grad_norm = 0.5;
  ActorCritic net(c.network, 2);
  Adam opt(net.parameter_count());
  RolloutBuffer buf(8, 4, c.network);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  const Minibatch b = random_batch(net, 32, 0.2, 0.2, 9);
  buf.observations = b.observations;
  buf.actions = b.actions;
  for (int i = 0; i < 32; ++i) {
    buf.log_probs[i] = b.log_probs[i];
    buf.values[i] = b.values[i];
    buf.advantages[i] = 50.0 * b.advantages[i];
    buf.returns[i] = 100.0 * b.returns[i];
  }
  buf.filled = 32;
  const Eigen::VectorXd before = net.parameters();
  const UpdateStats s = ppo_update(net, opt, buf, c, 0.0, rng);
  CHECK(s.grad_norm > 0.5);
  CHECK(s.max_clipped_grad_norm <= 0.5 * (1.0 + 1e-6));
  CHECK(s.learning_rate == c.learning_rate);
  CHECK(s.clip_range == c.clip_range);
  CHECK(opt.steps() == 16);
  CHECK(net.parameters() != before);

  buf.returns[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(ppo_update(net, opt, buf, c, 0.0, rng), std::runtime_error);
  buf.filled = 31;
  CHECK_THROWS_AS(ppo_update(net, opt, buf, c, 0.0, rng), std::logic_error);
}

TEST_CASE("adam first step moves each parameter by the learning rate") {
  Adam opt(3);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(3), g(3);
  g << 2.0, -0.5, 0.0;
  opt.step(p, g, 0.1);
  CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-5));
  CHECK(p[1] == doctest::Approx(0.1).epsilon(1e-4));
  CHECK(p[2] == 0.0);
}

TEST_CASE("checkpoint round trip and shape checks") {
  const ActorCritic net(small_spec(), 11);
  std::stringstream io;
  net.save(io);
  const ActorCritic back = ActorCritic::load(io, "mem");
  CHECK(back.parameters() == net.parameters());
  CHECK(back.spec().hidden == net.spec().hidden);
  CHECK(back.spec().shared_trunk == net.spec().shared_trunk);

  const auto dir = std::filesystem::temp_directory_path() / "surgsim_test_ppo";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "net.ckpt").string();
  save_checkpoint(path, net);
  NetworkSpec expected = small_spec();
  CHECK(load_checkpoint(path, &expected).parameters() == net.parameters());
  expected.hidden = {128, 128};
  CHECK_THROWS_WITH_AS(load_checkpoint(path, &expected), doctest::Contains("6x8x5->3"), ValidationError);
  CHECK_THROWS_WITH_AS(load_checkpoint(path, &expected), doctest::Contains("6x128x128->3"), ValidationError);
  CHECK_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string()), std::runtime_error);

  std::stringstream bad("surgsim-policy 1\nobs_dim 6\nact_dim 3\nhidden 8 5\nshared_trunk 0\nparams 3\n1\n2\n3\n");
  CHECK_THROWS_AS(ActorCritic::load(bad, "bad"), ParseError);
  std::stringstream junk("not a checkpoint\n");
  CHECK_THROWS_AS(ActorCritic::load(junk, "junk"), ParseError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("short training runs are reproducible") {
  const PPOConfig c = short_config();
  EnvBatch a(default_scene(), 2), b(default_scene(), 2);
  ActorCritic pa, pb;
  const TrainStats sa = train(a, c, &pa);
  const TrainStats sb = train(b, c, &pb);
  CHECK(sa.horizon == 128);
  REQUIRE(sa.records.size() == 4);
  REQUIRE(sb.records.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(same_outcome(sa.records[i], sb.records[i]));
  CHECK(pa.parameters() == pb.parameters());
  CHECK(sa.records.back().env_steps == 1024);
  CHECK(sa.records[0].stats.learning_rate == c.learning_rate);
  CHECK(sa.records[1].stats.learning_rate == doctest::Approx(0.75 * c.learning_rate));

  PPOConfig other = c;
  other.seed = 18;
  EnvBatch d(default_scene(), 2);
  const TrainStats sd = train(d, other);
  CHECK(!same_outcome(sa.records.back(), sd.records.back()));
}

TEST_CASE("training log round trip") {
  PPOConfig c = short_config();
  c.total_steps = 512;
  EnvBatch envs(default_scene(), 4);
  const TrainStats s = train(envs, c);
  std::stringstream io;
  write_train_log(io, s, c);
  const std::string text = io.str();
  CHECK(text.rfind("# num_envs=4\n# horizon=64\n", 0) == 0);
  const TrainStats back = read_train_log(io, "log");
  CHECK(back.num_envs == 4);
  CHECK(back.horizon == 64);
  REQUIRE(back.records.size() == s.records.size());
  for (std::size_t i = 0; i < s.records.size(); ++i) {
    CHECK(same_outcome(back.records[i], s.records[i]));
    CHECK(back.records[i].wall_seconds == s.records[i].wall_seconds);
  }
  std::stringstream bad("update,env_steps\n1,2\n");
  CHECK_THROWS_AS(read_train_log(bad, "bad"), ParseError);
  std::stringstream empty("");
  CHECK_THROWS_AS(read_train_log(empty, "empty"), ParseError);
}

TEST_CASE("evaluation") {
  EnvBatch envs(default_scene(), 4);
  const ActorCritic untrained(NetworkSpec{}, 3);
  CHECK_THROWS_AS(run_eval(untrained, envs, 0, 1), std::invalid_argument);
  const EvalResult r = run_eval(untrained, envs, 4, 1);
  CHECK(r.episodes == 4);
  CHECK(r.success_rate < 0.1);
  CHECK(r.mean_length == 200.0);
  CHECK(r.mean_reward < 0.0);

  NetworkSpec wrong = NetworkSpec{};
  wrong.obs_dim = 5;
  CHECK_THROWS_AS(run_eval(ActorCritic(wrong, 1), envs, 1, 1), ValidationError);
}
