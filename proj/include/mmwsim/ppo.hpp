#pragma once

#include <random>
#include <vector>

#include "mmwsim/nn.hpp"

namespace mmw {

struct PpoConfig {
  double gamma = 0.999;
  double eps_clip = 0.2;
  double c_entropy = 0.05;
  int batch_t = 5;
  double learning_rate = 1e-3;
  double lr_decay = 0.9;
  int lr_decay_every = 20;
};

/// T complete steps plus the value of the state after the last one.
struct RolloutBatch {
  std::vector<std::vector<double>> obs;
  std::vector<std::vector<char>> mask;
  std::vector<int> action;
  std::vector<double> reward;
  std::vector<double> value;     // v(s[0..T-1]) under the rollout policy
  std::vector<double> logp_old;  // log pi_old(a|s), never recomputed
  double value_after = 0.0;      // v(s[T]), GAE bootstrap

  int size() const { return static_cast<int>(action.size()); }
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // critic targets: A + v
};

/// TD errors with v(s[t+1]) and their discounted tail sums.
GaeResult compute_gae(const RolloutBatch& batch, double gamma);

/// Clipped-surrogate actor loss with entropy bonus (negated for descent).
/// probs/logp are recomputed under the current parameters; logp_old comes
/// from the batch.
double actor_loss(const MlpNet& net, const RolloutBatch& batch,
                  const std::vector<double>& advantages, const PpoConfig& cfg);

/// MSE against discounted targets bootstrapped with v_boot (constant).
double critic_loss(const MlpNet& net, const RolloutBatch& batch, double gamma, double v_boot);

/// Total loss (actor + critic) and, when grad != nullptr, its exact gradient.
/// advantages and critic targets are treated as constants.
double ppo_loss_and_grad(const MlpNet& net, const RolloutBatch& batch,
                         const std::vector<double>& advantages,
                         const std::vector<double>& critic_targets, const PpoConfig& cfg,
                         std::vector<double>* grad);

/// Step-wise PPO trainer: act/observe alternate; one optimization pass per
/// full batch, after which the acting policy becomes the updated one.
class PpoTrainer {
 public:
  PpoTrainer(MlpArch arch, const PpoConfig& cfg, std::uint64_t seed);
  PpoTrainer(MlpNet net, const PpoConfig& cfg, std::uint64_t seed);

  /// Samples an action from the masked policy; buffers obs/value/log-prob.
  int act(const std::vector<double>& scaled_obs, const std::vector<char>& mask);

  /// Records the step outcome; triggers an update when the batch is full.
  /// next_obs is needed only for the bootstrap at batch boundaries.
  void observe(double scaled_reward, const std::vector<double>& next_obs);

  /// Frozen action sampling (no buffering, no updates).
  int act_frozen(const std::vector<double>& scaled_obs, const std::vector<char>& mask);
  /// Ticks the learning-rate schedule; call once per training iteration.
  void end_iteration() {
    if (cfg_.lr_decay_every > 0 && ++iterations_ % cfg_.lr_decay_every == 0) opt_.decay_now();
  }

  void set_frozen(bool f) { frozen_ = f; }
  const MlpNet& net() const { return net_; }
  MlpNet& net() { return net_; }
  long updates() const { return updates_; }

 private:
  int sample_masked(const std::vector<double>& obs, const std::vector<char>& mask,
                    double* logp, double* value);
  void update(const std::vector<double>& next_obs);

  MlpNet net_;
  PpoConfig cfg_;
  AdamOptimizer opt_;
  RolloutBatch buf_;
  bool frozen_ = false;
  long updates_ = 0;
  long iterations_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace mmw
