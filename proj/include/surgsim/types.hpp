#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace surgsim {

using Vec3 = Eigen::Vector3d;

// Malformed input text (mesh, scene, checkpoint, CSV).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : std::runtime_error(what), line_(0) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Input that parses but violates a model invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A non-finite coordinate appeared during integration.
class SimulationDiverged : public std::runtime_error {
 public:
  SimulationDiverged(std::size_t step, std::size_t lane)
      : std::runtime_error("simulation diverged at step " + std::to_string(step) + " (instance " +
                           std::to_string(lane) + ")"),
        step_(step),
        lane_(lane) {}
  std::size_t step() const { return step_; }
  std::size_t lane() const { return lane_; }

 private:
  std::size_t step_;
  std::size_t lane_;
};

// Deterministic: fixed sequential reduction order, bitwise reproducible.
// Parallel: constraint projection split over worker chunks; sums reassociate.
enum class ExecutionMode { Deterministic, Parallel };

}  // namespace surgsim
