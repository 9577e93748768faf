#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mmwsim/config.hpp"
#include "mmwsim/env.hpp"
#include "mmwsim/mab.hpp"
#include "mmwsim/pomdp.hpp"
#include "mmwsim/ppo.hpp"

namespace mmw {

/// Uniform controller surface driven by the runner.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual Action act(const ObservableState& s) = 0;
  virtual void learn(const ObservableState& s, const Action& a, const SlotResult& res,
                     const ObservableState& s_next) = 0;
  /// Called once at the end of each training iteration (no-op by default).
  virtual void end_iteration() {}
  virtual void set_frozen(bool f) = 0;
  virtual void save_file(const std::string& path) const = 0;
  virtual void load_file(const std::string& path) = 0;
  virtual std::string name() const = 0;
};

class MabPolicy : public Controller {
 public:
  MabPolicy(const ScenarioConfig& cfg, std::uint64_t seed, MabOptions opts = {});
  Action act(const ObservableState& s) override;
  void learn(const ObservableState& s, const Action& a, const SlotResult& res,
             const ObservableState& s_next) override;
  void set_frozen(bool f) override;
  void save_file(const std::string& path) const override;
  void load_file(const std::string& path) override;
  std::string name() const override;
  MabController& inner() { return mab_; }

 private:
  MabController mab_;
  MabOptions opts_;
};

class PpoPolicy : public Controller {
 public:
  PpoPolicy(const ScenarioConfig& cfg, std::uint64_t seed);
  Action act(const ObservableState& s) override;
  void learn(const ObservableState& s, const Action& a, const SlotResult& res,
             const ObservableState& s_next) override;
  void end_iteration() override;
  void set_frozen(bool f) override;
  void save_file(const std::string& path) const override;
  void load_file(const std::string& path) override;
  std::string name() const override { return "ppo"; }
  PpoTrainer& trainer() { return trainer_; }

 private:
  ScenarioConfig cfg_;
  RewardScaler scaler_;
  PpoTrainer trainer_;
  bool frozen_ = false;
};

struct IterationMetrics {
  int iteration = 0;
  double avg_delay_ms = 0;           // over packets delivered this iteration
  double rate_gbps = 0;              // delivered payload / wall time
  double blockage_pct = 0;           // scheduled-rx-blocked slot fraction
  double mean_queue_len = 0;         // time-averaged, summed over UEs
  std::vector<double> ue_delay_ms;   // per destination UE
  std::vector<double> ue_queue_len;  // time-averaged per UE
  long delivered_packets = 0;
};

struct RunSummary {
  std::vector<IterationMetrics> iterations;
  std::map<int, long> delay_histogram;  // delay in slots -> packets
  double overall_delay_ms = 0;
  double overall_rate_gbps = 0;
  double overall_blockage_pct = 0;
};

/// Factory keyed by CLI controller names (ppo, mab, mab-no-relay,
/// mab-fixed-cb=<k>, mab-no-track).
std::unique_ptr<Controller> make_controller(const std::string& kind, const ScenarioConfig& cfg,
                                            std::uint64_t seed);

class Runner {
 public:
  Runner(const ScenarioConfig& cfg, std::uint64_t seed);

  /// Runs `iterations` training iterations of cfg.slots_per_iteration slots,
  /// applying any scheduled scenario changes at iteration boundaries.
  /// checkpoint_every=0 disables checkpoints.
  RunSummary train(Controller& ctl, int iterations, const std::string& out_dir,
                   int checkpoint_every = 0);

  /// Evaluates a frozen controller over independent realizations (fresh
  /// environment seeds, shared controller state).
  RunSummary test(Controller& ctl, int realizations, int slots_per_realization);

 private:
  IterationMetrics run_iteration(Environment& env, Controller& ctl, int iteration, int slots,
                                 std::map<int, long>& histogram);

  ScenarioConfig cfg_;
  std::uint64_t seed_;
};

void emit_metrics(const RunSummary& s, const std::string& path);
void emit_delay_cdf(const RunSummary& s, double t_slot_s, const std::string& path);

}  // namespace mmw
