#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "convsim/binary_io.hpp"
#include "convsim/rng.hpp"

namespace convsim {

// Hidden widths shared by every actor and critic.
inline constexpr std::array<int, 3> kHiddenSizes = {64, 128, 64};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weight.rows() == b.weight.rows() &&
           a.weight.cols() == b.weight.cols() && a.weight == b.weight &&
           a.bias == b.bias;
  }
};

// Fully connected net with tanh hidden layers and a linear output layer.
// The same type holds gradients and Adam moments.
struct MlpParams {
  std::vector<DenseLayer> layers;

  int input_size() const { return static_cast<int>(layers.front().weight.cols()); }
  int output_size() const { return static_cast<int>(layers.back().weight.rows()); }
  std::vector<int> layer_sizes() const;
  std::size_t parameter_count() const;

  static MlpParams zeros(std::span<const int> sizes);
  static MlpParams zeros_like(const MlpParams& other);

  bool same_shape(const MlpParams& other) const;
  bool all_finite() const;

  // Flat view in layer order, weight (column-major) then bias.
  double& flat(std::size_t i);
  double flat(std::size_t i) const;

  MlpParams& operator+=(const MlpParams& other);
  MlpParams& operator*=(double s);

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
MlpParams init_params(int input, int output, RandomStream& rng,
                      std::span<const int> hidden = kHiddenSizes);

// Per-layer activations for a batch; columns are samples. activations[0] is
// the input and activations.back() the linear output.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> activations;
  const Eigen::MatrixXd& output() const { return activations.back(); }
};

ForwardTrace forward_batch(const MlpParams& params,
                           const Eigen::MatrixXd& inputs);
Eigen::VectorXd forward(const MlpParams& params, std::span<const double> input);

// Gradient of sum_b <upstream[:, b], output[:, b]> with respect to every
// weight and bias.
MlpParams backward_batch(const MlpParams& params, const ForwardTrace& trace,
                         const Eigen::MatrixXd& upstream);
MlpParams backward(const MlpParams& params, std::span<const double> input,
                   std::span<const double> upstream);

class ActionDistribution {
 public:
  ActionDistribution() = default;
  // Softmax computed through log-sum-exp.
  static ActionDistribution from_logits(std::span<const double> logits);

  int size() const { return static_cast<int>(probs_.size()); }
  double prob(int a) const { return probs_.at(a); }
  double log_prob(int a) const { return log_probs_.at(a); }
  const std::vector<double>& probs() const { return probs_; }
  double entropy() const;
  int argmax() const;

 private:
  std::vector<double> probs_;
  std::vector<double> log_probs_;
};

ActionDistribution forward_actor(const MlpParams& params,
                                 std::span<const double> obs);
double forward_critic(const MlpParams& params, std::span<const double> obs);

struct AdamState {
  MlpParams m;
  MlpParams v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const MlpParams& params);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// Bias-corrected Adam. Throws TrainingError on non-finite gradients.
void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state,
               double lr);

struct ActionSample {
  int index = 0;
  double log_prob = 0.0;
};

ActionSample sample_action(const ActionDistribution& dist, RandomStream& rng);

void write_params(BinaryWriter& out, const MlpParams& params);
MlpParams read_params(BinaryReader& in);
void write_adam(BinaryWriter& out, const AdamState& state);
AdamState read_adam(BinaryReader& in);

}  // namespace convsim
