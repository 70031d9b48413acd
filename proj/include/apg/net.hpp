#pragma once

#include "apg/tape.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace apg {

enum class HeadKind {
  Gaussian,      // mean (tanh-squashed to per-component bounds) + log-std
  ScalarNonneg,  // ReLU output
};

struct MLPSpec {
  int input_dim = 0;
  std::vector<int> hidden;  // widths; all hidden layers use GeLU
  int output_dim = 0;       // action dim for Gaussian, value dim otherwise
  HeadKind head = HeadKind::ScalarNonneg;
  Eigen::VectorXd bound_lo;  // Gaussian head squash targets, length output_dim
  Eigen::VectorXd bound_hi;

  // Layer sizes including the head layer; Gaussian heads emit 2*output_dim
  // pre-activations (mean block then log-std block).
  std::vector<int> layer_dims() const;
  int param_count() const;
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kLogStdInit = -1.5;

// Flat trainable parameters plus the shape manifest they were built for.
struct ParameterVector {
  Eigen::VectorXd data;
  std::vector<int> manifest;  // layer_dims() of the owning spec
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;

  bool operator==(const ParameterVector& o) const {
    return manifest == o.manifest && seed == o.seed && iteration == o.iteration &&
           data == o.data;
  }
};

// Per-layer scaled-uniform init (limit sqrt(6/(fan_in+fan_out))), biases zero,
// layer k drawn from a generator seeded with seed + k.
ParameterVector init_params(const MLPSpec& spec, std::uint64_t seed);

struct GaussianOut {
  Tape::Index mean = -1;     // squashed to bounds
  Tape::Index log_std = -1;  // clamped to [kLogStdMin, kLogStdMax]
};

// Forward through the stack, recording on the tape. Scalar-nonneg head
// returns its output in `mean` and leaves log_std at -1.
GaussianOut mlp_forward(Tape& tape, int bank, const MLPSpec& spec, Tape::Index input);

// value = clamp(mean + exp(log_std) .* z, bounds); pathwise differentiable.
Tape::Index gaussian_sample(Tape& tape, const MLPSpec& spec, const GaussianOut& out,
                            const Eigen::VectorXd& z);

// Tape-free forward for environment sampling and evaluation.
struct EvalOut {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_std;
};
EvalOut mlp_eval(const MLPSpec& spec, const ParameterVector& params,
                 const Eigen::VectorXd& input);
Eigen::VectorXd gaussian_sample_eval(const MLPSpec& spec, const EvalOut& out,
                                     std::mt19937_64& rng);

// Fixed diagonal feature scaling applied to the driving state before any
// network input, identical on tape and eval paths.
const Eigen::VectorXd& state_input_scaling();

// Checkpoint: "APGN" magic, version, manifest, seed, iteration, raw
// little-endian 64-bit parameter array.
void save_params(const ParameterVector& p, const std::string& path);
ParameterVector load_params(const std::string& path);

}  // namespace apg
