#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "convsim/binary_io.hpp"
#include "convsim/rng.hpp"
#include "convsim/tinynet.hpp"

namespace convsim {

struct TrainerConfig {
  double gamma = 0.9;
  double clip_epsilon = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double actor_lr = 1e-3;
  double critic_lr = 5e-4;
  int update_passes = 4;
  // Standardize advantages per buffer (skipped for single-step buffers).
  bool normalize_advantages = true;

  void validate() const;
};

// Parallel per-step sequences for one model's experience in an epoch.
class RolloutBuffer {
 public:
  RolloutBuffer() = default;
  explicit RolloutBuffer(int obs_size) : obs_size_(obs_size) {}

  // Throws TrainingError on non-finite inputs.
  void store(std::span<const double> obs, int action, double log_prob,
             double reward, double value);
  // Marks the most recent step as the end of an episode.
  void mark_terminal();
  void clear();

  int obs_size() const { return obs_size_; }
  std::size_t size() const { return actions_.size(); }
  bool empty() const { return actions_.empty(); }

  std::span<const double> observation(std::size_t i) const {
    return {obs_.data() + i * obs_size_, static_cast<std::size_t>(obs_size_)};
  }
  const std::vector<double>& observations_flat() const { return obs_; }
  const std::vector<int>& actions() const { return actions_; }
  const std::vector<double>& log_probs() const { return log_probs_; }
  const std::vector<double>& rewards() const { return rewards_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<std::uint8_t>& terminals() const { return terminals_; }

  void write(BinaryWriter& out) const;
  static RolloutBuffer read(BinaryReader& in);
  friend bool operator==(const RolloutBuffer&, const RolloutBuffer&) = default;

 private:
  int obs_size_ = 0;
  std::vector<double> obs_;
  std::vector<int> actions_;
  std::vector<double> log_probs_;
  std::vector<double> rewards_;
  std::vector<double> values_;
  std::vector<std::uint8_t> terminals_;
};

struct AdvantageSet {
  std::vector<double> returns;     // discounted reward-to-go targets
  std::vector<double> advantages;  // returns - value estimates (optionally standardized)
};

// Reward-to-go within each terminal-delimited episode, bootstrapping zero.
AdvantageSet compute_returns_advantages(const RolloutBuffer& buffer,
                                        const TrainerConfig& config);

// Actor + critic with their optimizer state.
struct PolicyModel {
  MlpParams actor;
  MlpParams critic;
  AdamState actor_opt;
  AdamState critic_opt;

  static PolicyModel create(int obs_size, int num_actions, RandomStream& rng);

  struct Decision {
    int action = 0;
    double log_prob = 0.0;
    double value = 0.0;
  };
  Decision act(std::span<const double> obs, RandomStream& rng) const;

  void write(BinaryWriter& out) const;
  static PolicyModel read(BinaryReader& in);
  friend bool operator==(const PolicyModel&, const PolicyModel&) = default;
};

struct LossBreakdown {
  double total = 0.0;    // quantity minimized: -(clip - c1*value + c2*entropy)
  double clip = 0.0;     // mean clipped surrogate
  double value = 0.0;    // mean squared value error
  double entropy = 0.0;  // mean policy entropy
  double mean_ratio = 0.0;
};

struct PpoGradients {
  MlpParams actor;
  MlpParams critic;
  LossBreakdown loss;
};

LossBreakdown ppo_loss(const PolicyModel& model, const RolloutBuffer& buffer,
                       const AdvantageSet& advantages,
                       const TrainerConfig& config);

// Gradients of LossBreakdown::total with respect to both networks.
PpoGradients ppo_gradients(const PolicyModel& model,
                           const RolloutBuffer& buffer,
                           const AdvantageSet& advantages,
                           const TrainerConfig& config);

// Per-sample clipped surrogate min(r*A, clip(r, 1-eps, 1+eps)*A).
double clipped_surrogate(double ratio, double advantage, double epsilon);

struct TrainStats {
  std::size_t steps = 0;
  LossBreakdown loss;  // evaluated before the final update pass
};

// K full-batch passes, then clears the buffer. Empty buffers are a no-op.
TrainStats train_on_epoch(PolicyModel& model, RolloutBuffer& buffer,
                          const TrainerConfig& config);

}  // namespace convsim
