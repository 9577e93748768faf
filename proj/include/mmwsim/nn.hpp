#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace mmw {

/// Fixed MLP topology: tanh trunk(s) feeding a policy-logit head and a
/// scalar value head, either sharing one trunk or fully disjoint.
struct MlpArch {
  int input = 0;
  std::vector<int> hidden;
  int n_actions = 0;
  bool shared_trunk = true;

  long param_count() const;
  bool operator==(const MlpArch&) const = default;
};

/// Per-sample forward activations kept for the backward pass.
struct MlpWorkspace {
  std::vector<std::vector<double>> h_actor;   // post-activation per trunk layer
  std::vector<std::vector<double>> h_critic;  // used only when trunks are disjoint
  std::vector<double> input;
};

class MlpNet {
 public:
  MlpNet(MlpArch arch);

  void init_params(std::mt19937_64& rng);  // uniform +-sqrt(1/fan_in)
  const MlpArch& arch() const { return arch_; }
  std::vector<double>& params() { return w_; }
  const std::vector<double>& params() const { return w_; }

  /// Computes policy logits and the value estimate. Rejects non-finite input.
  void forward(const std::vector<double>& x, std::vector<double>& logits, double& value,
               MlpWorkspace* ws = nullptr) const;

  /// Reverse-mode gradient of a scalar loss given dL/dlogits and dL/dvalue
  /// for the sample whose activations are in ws; accumulates into grad.
  void backward(const MlpWorkspace& ws, const std::vector<double>& dlogits, double dvalue,
                std::vector<double>& grad) const;

  void save(std::ostream& out) const;
  static MlpNet load(std::istream& in);
  void save_file(const std::string& path) const;
  static MlpNet load_file(const std::string& path);

 private:
  struct Layer {
    long w_off, b_off;
    int in, out;
  };
  void trunk_forward(const std::vector<Layer>& layers, const std::vector<double>& x,
                     std::vector<std::vector<double>>& h) const;
  void head_forward(const Layer& head, const std::vector<double>& h,
                    std::vector<double>& out) const;

  MlpArch arch_;
  std::vector<Layer> actor_trunk_, critic_trunk_;
  Layer policy_head_, value_head_;
  std::vector<double> w_;
};

/// Renormalized softmax over the unmasked support; masked entries are
/// exactly zero. All-false mask is a hard fault.
std::vector<double> masked_softmax(const std::vector<double>& logits,
                                   const std::vector<char>& mask);

/// Adam with bias correction and a step-count learning-rate decay.
class AdamOptimizer {
 public:
  AdamOptimizer(long n_params, double lr, double decay, int decay_every);

  void step(std::vector<double>& params, const std::vector<double>& grads);
  /// Applies one multiplicative learning-rate decay immediately.
  void decay_now();
  double learning_rate() const { return lr_; }
  long steps() const { return steps_; }

 private:
  std::vector<double> m_, v_;
  long steps_ = 0;
  double lr_;
  double decay_;
  int decay_every_;
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
};

}  // namespace mmw
