#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace surgsim {

struct NetworkSpec {
  int obs_dim = 6;
  int act_dim = 3;
  std::vector<int> hidden{128, 128};
  // false: the value head gets its own trunk of the same shape.
  bool shared_trunk = false;
  double log_std_init = 0.0;
};

// Tanh trunk(s) feeding a Gaussian mean head and a scalar value head.
// The log-stddev is a free parameter vector, independent of the state.
// All weights live in one flat vector so the optimiser and gradient
// clipping see a single tensor.
class ActorCritic {
 public:
  using Matrix = Eigen::MatrixXd;
  using Vector = Eigen::VectorXd;

  // Activations of one batched forward pass, kept for backward().
  struct Cache {
    std::vector<Matrix> layer;   // layer[0] = input, layer[i] = tanh output of trunk layer i
    std::vector<Matrix> vlayer;  // value trunk outputs, empty when shared
    Matrix mean;                // act_dim x B
    Vector value;               // B
  };

  ActorCritic() = default;
  // Orthogonal initialisation: trunk gain sqrt(2), mean head 0.01, value head 1, biases 0.
  ActorCritic(const NetworkSpec& spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }
  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }

  // obs: obs_dim x B, one column per sample.
  void forward(const Matrix& obs, Cache& cache) const;

  // Accumulates into grad (same layout as parameters()) the gradient of a
  // loss with partials d_mean (act_dim x B), d_value (B) and d_log_std.
  void backward(const Cache& cache, const Matrix& d_mean, const Vector& d_value, const Vector& d_log_std,
                Vector& grad) const;

  Eigen::Map<const Vector> log_std() const;

  // log N(a; mean, exp(log_std)^2) per column.
  Vector log_prob(const Matrix& mean, const Matrix& actions) const;
  // Differential entropy of the diagonal Gaussian, identical for every state.
  double entropy() const;

  void save(std::ostream& out) const;
  // Throws ParseError. `expected`, when given, must match the stored shapes.
  static ActorCritic load(std::istream& in, const std::string& source, const NetworkSpec* expected = nullptr);

 private:
  struct Layer {
    std::size_t w = 0, b = 0;  // offsets into params_
    int rows = 0, cols = 0;
  };
  Eigen::Map<const Matrix> weight(const Layer& l) const;
  Eigen::Map<const Vector> bias(const Layer& l) const;
  void layout();

  NetworkSpec spec_;
  std::vector<Layer> trunk_;
  std::vector<Layer> value_trunk_;  // empty when shared
  Layer mean_head_, value_head_;
  std::size_t log_std_offset_ = 0;
  Vector params_;
};

// Adam with decoupled step size; moments sized to the parameter vector.
class Adam {
 public:
  Adam() = default;
  explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-5);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);
  long steps() const { return t_; }

 private:
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-5;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

}  // namespace surgsim
