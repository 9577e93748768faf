#include "mmwsim/ppo.hpp"

#include <cmath>
#include <stdexcept>

namespace mmw {

namespace {
constexpr double kLogProbFloor = -40.0;  // numeric guard against -inf

double safe_log(double p) { return std::max(std::log(std::max(p, 1e-300)), kLogProbFloor); }
}  // namespace

GaeResult compute_gae(const RolloutBatch& batch, double gamma) {
  const int T = batch.size();
  if (static_cast<int>(batch.reward.size()) != T || static_cast<int>(batch.value.size()) != T)
    throw std::invalid_argument("incomplete rollout batch");
  GaeResult out;
  out.advantages.resize(T);
  out.returns.resize(T);
  double tail = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    double v_next = (t + 1 < T) ? batch.value[t + 1] : batch.value_after;
    double delta = batch.reward[t] + gamma * v_next - batch.value[t];
    tail = delta + gamma * tail;
    out.advantages[t] = tail;
    out.returns[t] = tail + batch.value[t];
  }
  return out;
}

namespace {

struct SampleEval {
  std::vector<double> probs;
  double logp;
  double rho;
  double entropy;
  double value;
  MlpWorkspace ws;
};

SampleEval eval_sample(const MlpNet& net, const RolloutBatch& batch, int t) {
  SampleEval e;
  std::vector<double> logits;
  net.forward(batch.obs[t], logits, e.value, &e.ws);
  e.probs = masked_softmax(logits, batch.mask[t]);
  e.logp = safe_log(e.probs[batch.action[t]]);
  e.rho = std::exp(e.logp - batch.logp_old[t]);
  e.entropy = 0.0;
  for (std::size_t i = 0; i < e.probs.size(); ++i)
    if (batch.mask[t][i] && e.probs[i] > 0) e.entropy -= e.probs[i] * std::log(e.probs[i]);
  return e;
}

// surrogate value and its derivative w.r.t. rho (subgradient at the kink)
double surrogate(double rho, double adv, double eps, double* drho) {
  double clipped = std::min(std::max(rho, 1.0 - eps), 1.0 + eps);
  double a = rho * adv, b = clipped * adv;
  if (a <= b) {
    *drho = adv;
    return a;
  }
  *drho = (clipped == rho) ? adv : 0.0;
  return b;
}

std::vector<double> critic_targets_of(const RolloutBatch& batch, double gamma, double v_boot) {
  const int T = batch.size();
  std::vector<double> y(T);
  double tail = v_boot;
  for (int t = T - 1; t >= 0; --t) {
    tail = batch.reward[t] + gamma * tail;
    y[t] = tail;
  }
  return y;
}

}  // namespace

double actor_loss(const MlpNet& net, const RolloutBatch& batch,
                  const std::vector<double>& advantages, const PpoConfig& cfg) {
  const int T = batch.size();
  double sur = 0.0, ent = 0.0;
  for (int t = 0; t < T; ++t) {
    SampleEval e = eval_sample(net, batch, t);
    double drho;
    sur += surrogate(e.rho, advantages[t], cfg.eps_clip, &drho);
    ent += e.entropy;
  }
  return -sur / T - cfg.c_entropy * ent / T;
}

double critic_loss(const MlpNet& net, const RolloutBatch& batch, double gamma, double v_boot) {
  const int T = batch.size();
  auto y = critic_targets_of(batch, gamma, v_boot);
  double loss = 0.0;
  for (int t = 0; t < T; ++t) {
    std::vector<double> logits;
    double v;
    net.forward(batch.obs[t], logits, v);
    loss += (v - y[t]) * (v - y[t]);
  }
  return loss / T;
}

double ppo_loss_and_grad(const MlpNet& net, const RolloutBatch& batch,
                         const std::vector<double>& advantages,
                         const std::vector<double>& critic_targets, const PpoConfig& cfg,
                         std::vector<double>* grad) {
  const int T = batch.size();
  if (static_cast<int>(advantages.size()) != T || static_cast<int>(critic_targets.size()) != T)
    throw std::invalid_argument("advantage/target size mismatch");
  if (grad) grad->assign(net.params().size(), 0.0);

  double sur = 0.0, ent = 0.0, cl = 0.0;
  for (int t = 0; t < T; ++t) {
    SampleEval e = eval_sample(net, batch, t);
    double drho;
    sur += surrogate(e.rho, advantages[t], cfg.eps_clip, &drho);
    ent += e.entropy;
    double verr = e.value - critic_targets[t];
    cl += verr * verr;
    if (!grad) continue;

    // dL/dlogit_i = (1/T) * [ -dsur - c_e * dH + critic chain (via value head) ]
    const int a = batch.action[t];
    std::vector<double> dlogits(e.probs.size(), 0.0);
    double g_sur = drho * e.rho;  // d sur / d logp(a)
    for (std::size_t i = 0; i < e.probs.size(); ++i) {
      if (!batch.mask[t][i]) continue;
      double dlogp_a = (static_cast<int>(i) == a ? 1.0 : 0.0) - e.probs[i];
      double dH = -e.probs[i] * (std::log(std::max(e.probs[i], 1e-300)) + e.entropy);
      dlogits[i] = (-g_sur * dlogp_a - cfg.c_entropy * dH) / T;
    }
    double dvalue = 2.0 * verr / T;
    net.backward(e.ws, dlogits, dvalue, *grad);
  }
  return -sur / T - cfg.c_entropy * ent / T + cl / T;
}

PpoTrainer::PpoTrainer(MlpNet net, const PpoConfig& cfg, std::uint64_t seed)
    : net_(std::move(net)),
      cfg_(cfg),
      opt_(net_.params().size(), cfg.learning_rate, cfg.lr_decay, 0),
      rng_(seed) {}

PpoTrainer::PpoTrainer(MlpArch arch, const PpoConfig& cfg, std::uint64_t seed)
    : PpoTrainer(
          [&] {
            MlpNet n(std::move(arch));
            std::mt19937_64 r(seed ^ 0x9e3779b97f4a7c15ull);
            n.init_params(r);
            return n;
          }(),
          cfg, seed) {}

int PpoTrainer::sample_masked(const std::vector<double>& obs, const std::vector<char>& mask,
                              double* logp, double* value) {
  std::vector<double> logits;
  double v;
  net_.forward(obs, logits, v);
  auto probs = masked_softmax(logits, mask);
  double x = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
  int chosen = -1;
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!mask[i]) continue;
    acc += probs[i];
    chosen = static_cast<int>(i);
    if (x < acc) break;
  }
  if (logp) *logp = safe_log(probs[chosen]);
  if (value) *value = v;
  return chosen;
}

int PpoTrainer::act_frozen(const std::vector<double>& scaled_obs, const std::vector<char>& mask) {
  // The policy is stochastic by construction; frozen evaluation samples from it.
  return sample_masked(scaled_obs, mask, nullptr, nullptr);
}

int PpoTrainer::act(const std::vector<double>& scaled_obs, const std::vector<char>& mask) {
  if (frozen_) return act_frozen(scaled_obs, mask);
  double logp, value;
  int a = sample_masked(scaled_obs, mask, &logp, &value);
  buf_.obs.push_back(scaled_obs);
  buf_.mask.push_back(mask);
  buf_.action.push_back(a);
  buf_.value.push_back(value);
  buf_.logp_old.push_back(logp);
  return a;
}

void PpoTrainer::observe(double scaled_reward, const std::vector<double>& next_obs) {
  if (frozen_) return;
  buf_.reward.push_back(scaled_reward);
  if (buf_.size() >= cfg_.batch_t && static_cast<int>(buf_.reward.size()) == buf_.size())
    update(next_obs);
}

void PpoTrainer::update(const std::vector<double>& next_obs) {
  std::vector<double> logits;
  net_.forward(next_obs, logits, buf_.value_after);

  GaeResult gae = compute_gae(buf_, cfg_.gamma);
  // critic bootstrap: v(s[T]) after the batch, held constant
  auto targets = critic_targets_of(buf_, cfg_.gamma, buf_.value_after);

  std::vector<double> grad;
  double loss = ppo_loss_and_grad(net_, buf_, gae.advantages, targets, cfg_, &grad);
  if (!std::isfinite(loss)) throw std::runtime_error("non-finite PPO loss");
  opt_.step(net_.params(), grad);
  ++updates_;

  buf_ = RolloutBatch{};
}

}  // namespace mmw
