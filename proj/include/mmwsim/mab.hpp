#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mmwsim/config.hpp"
#include "mmwsim/env.hpp"
#include "mmwsim/pomdp.hpp"

namespace mmw {

/// Dirichlet counts over MCS outcomes, indexed (mcs, arm, context).
class DirichletPriors {
 public:
  DirichletPriors(int n_mcs_levels, int n_arms, int n_contexts);

  double& at(int m, int arm, int ctx) { return a_[idx(m, arm, ctx)]; }
  double at(int m, int arm, int ctx) const { return a_[idx(m, arm, ctx)]; }
  int levels() const { return levels_; }
  int arms() const { return arms_; }
  int contexts() const { return ctx_; }
  const std::vector<double>& raw() const { return a_; }
  std::vector<double>& raw() { return a_; }

  /// One Dirichlet draw for (arm, ctx), scored against the rate vector.
  double sample_score(int arm, int ctx, const std::vector<double>& rates,
                      std::mt19937_64& rng) const;
  /// Posterior-mean score, used when the controller is frozen.
  double mean_score(int arm, int ctx, const std::vector<double>& rates) const;

 private:
  long idx(int m, int arm, int ctx) const {
    return (static_cast<long>(m) * arms_ + arm) * ctx_ + ctx;
  }
  int levels_, arms_, ctx_;
  std::vector<double> a_;
};

/// Running per-UE service and arrival estimates driving empirical maxweight.
struct EmpiricalStats {
  std::vector<double> d_hat;
  std::vector<long> n_rx;
  std::vector<double> z_hat;
  long slots = 0;
};

struct MabOptions {
  bool no_relay = false;
  int fixed_cb = 0;  // 1-based; 0 = learn
  bool no_track = false;
  bool frozen = false;
};

/// Empirical MAB controller: maxweight destination, Thompson-sampled relay
/// and codebook, heuristic tracking, randomized/delayed posterior updates.
class MabController {
 public:
  MabController(const ScenarioConfig& cfg, std::uint64_t seed, MabOptions opts = {});

  Action act(const ObservableState& s);
  void learn(const ObservableState& s, const Action& a, const SlotResult& res);
  void set_frozen(bool f) { opts_.frozen = f; }

  bool in_init_phase() const;
  const EmpiricalStats& stats() const { return stats_; }
  const DirichletPriors& relay_priors() const { return relay_; }
  const DirichletPriors& codebook_priors() const { return cb_; }
  DirichletPriors& relay_priors() { return relay_; }
  EmpiricalStats& stats_mut() { return stats_; }

  // Sub-decisions, exposed for testing.
  int schedule_dest(const ObservableState& s) const;
  int select_relay(int dest, const ObservableState& s);
  int select_codebook(int rx);
  int decide_tracking(const ObservableState& s, int dest, int rx) const;

  void save(std::ostream& out) const;
  void load(std::istream& in);
  void save_file(const std::string& path) const;
  void load_file(const std::string& path);

 private:
  std::vector<int> allowed_templates() const;
  void update_service_estimate(const Action& a, const SlotResult& res);
  void posterior_update(const Action& a, const SlotResult& res);

  ScenarioConfig cfg_;
  MabOptions opts_;
  int u_, k_, m_;
  std::vector<double> rates_;  // R_0..R_M
  DirichletPriors relay_;      // (M+1, relay u, dest)
  DirichletPriors cb_;         // (M+1, codebook k, rx)
  EmpiricalStats stats_;

  // init-explore bookkeeping
  std::vector<long> template_visits_;
  std::vector<int> templates_;
  long init_needed_;

  // previous-slot memory for delayed updates and tracking continuation
  std::optional<Action> prev_action_;
  bool prev_main_valid_ = false;
  int prev_main_mcs_ = 0;
  double prev_main_ceff_ = 0.0;

  std::mt19937_64 rng_;
};

}  // namespace mmw
