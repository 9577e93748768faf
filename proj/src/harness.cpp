#include "mmwsim/harness.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace mmw {

namespace {
std::vector<char> bool_mask(const ObservableState& s, int u, int k) {
  return feasibility_mask(s, u, k);
}
}  // namespace

MabPolicy::MabPolicy(const ScenarioConfig& cfg, std::uint64_t seed, MabOptions opts)
    : mab_(cfg, seed, opts), opts_(opts) {}

Action MabPolicy::act(const ObservableState& s) { return mab_.act(s); }

void MabPolicy::learn(const ObservableState& s, const Action& a, const SlotResult& res,
                      const ObservableState&) {
  mab_.learn(s, a, res);
}

void MabPolicy::set_frozen(bool f) { mab_.set_frozen(f); }
void MabPolicy::save_file(const std::string& path) const { mab_.save_file(path); }
void MabPolicy::load_file(const std::string& path) { mab_.load_file(path); }

std::string MabPolicy::name() const {
  if (opts_.no_relay) return "mab-no-relay";
  if (opts_.no_track) return "mab-no-track";
  if (opts_.fixed_cb > 0) return "mab-fixed-cb=" + std::to_string(opts_.fixed_cb);
  return "mab";
}

PpoPolicy::PpoPolicy(const ScenarioConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      scaler_(cfg.scale_x_gbps, cfg.t_slot_s, cfg.pkg_bits),
      trainer_(MlpArch{4 * cfg.n_ues(), cfg.nn_hidden,
                       action_space_size(cfg.n_ues(), cfg.n_codebooks()), cfg.nn_shared_trunk},
               PpoConfig{cfg.gamma, cfg.eps_clip, cfg.c_entropy, cfg.batch_t,
                         cfg.learning_rate, cfg.lr_decay, cfg.lr_decay_every},
               seed) {}

Action PpoPolicy::act(const ObservableState& s) {
  const int u = cfg_.n_ues(), k = cfg_.n_codebooks();
  const std::vector<double> obs = scale_observation(s, cfg_.n_block_tilde).flat();
  const std::vector<char> mask = bool_mask(s, u, k);
  const int idx = frozen_ ? trainer_.act_frozen(obs, mask) : trainer_.act(obs, mask);
  return decode_action(idx, u, k);
}

void PpoPolicy::learn(const ObservableState&, const Action&, const SlotResult& res,
                      const ObservableState& s_next) {
  if (frozen_) return;
  const double r = reward(res.delivered, scaler_);
  trainer_.observe(r, scale_observation(s_next, cfg_.n_block_tilde).flat());
}

void PpoPolicy::end_iteration() {
  if (!frozen_) trainer_.end_iteration();
}

void PpoPolicy::set_frozen(bool f) {
  frozen_ = f;
  trainer_.set_frozen(f);
}

void PpoPolicy::save_file(const std::string& path) const { trainer_.net().save_file(path); }

void PpoPolicy::load_file(const std::string& path) {
  MlpNet loaded = MlpNet::load_file(path);
  if (!(loaded.arch() == trainer_.net().arch()))
    throw std::runtime_error("checkpoint topology does not match this scenario: " + path);
  trainer_.net() = std::move(loaded);
}

std::unique_ptr<Controller> make_controller(const std::string& kind, const ScenarioConfig& cfg,
                                            std::uint64_t seed) {
  if (kind == "ppo") return std::make_unique<PpoPolicy>(cfg, seed);
  if (kind == "mab") return std::make_unique<MabPolicy>(cfg, seed);
  if (kind == "mab-no-relay") {
    MabOptions o;
    o.no_relay = true;
    return std::make_unique<MabPolicy>(cfg, seed, o);
  }
  if (kind == "mab-no-track") {
    MabOptions o;
    o.no_track = true;
    return std::make_unique<MabPolicy>(cfg, seed, o);
  }
  const std::string fixed_prefix = "mab-fixed-cb=";
  if (kind.rfind(fixed_prefix, 0) == 0) {
    MabOptions o;
    o.fixed_cb = std::stoi(kind.substr(fixed_prefix.size()));
    if (o.fixed_cb < 1 || o.fixed_cb > cfg.n_codebooks())
      throw std::invalid_argument("fixed codebook index out of range: " + kind);
    return std::make_unique<MabPolicy>(cfg, seed, o);
  }
  throw std::invalid_argument("unknown controller: " + kind);
}

Runner::Runner(const ScenarioConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {}

IterationMetrics Runner::run_iteration(Environment& env, Controller& ctl, int iteration,
                                       int slots, std::map<int, long>& histogram) {
  const ScenarioConfig& cfg = env.config();
  const int u = cfg.n_ues();
  IterationMetrics m;
  m.iteration = iteration;
  m.ue_delay_ms.assign(u, 0.0);
  m.ue_queue_len.assign(u, 0.0);

  std::vector<double> ue_delay_sum(u, 0.0);
  std::vector<long> ue_delivered(u, 0);
  std::vector<double> ue_queue_sum(u, 0.0);
  double delay_sum_slots = 0.0;
  long delivered = 0;
  long blocked_slots = 0;

  for (int t = 0; t < slots; ++t) {
    const ObservableState s = env.observe();
    const Action a = ctl.act(s);
    const SlotResult res = env.execute_slot(a);
    const ObservableState s_next = env.observe();
    ctl.learn(s, a, res, s_next);

    for (const auto& [d, n] : res.delay_counts) {
      histogram[d] += n;
      delay_sum_slots += static_cast<double>(d) * n;
      ue_delay_sum[a.main_dest - 1] += static_cast<double>(d) * n;
      ue_delivered[a.main_dest - 1] += n;
      delivered += n;
    }
    for (const auto& [d, n] : res.d2d_delay_counts) {
      histogram[d] += n;
      delay_sum_slots += static_cast<double>(d) * n;
      ue_delay_sum[res.d2d_rx - 1] += static_cast<double>(d) * n;
      ue_delivered[res.d2d_rx - 1] += n;
      delivered += n;
    }
    if (res.main_rx_blocked) blocked_slots++;
    for (int i = 0; i < u; ++i) ue_queue_sum[i] += static_cast<double>(env.queue_len(i + 1));
  }

  const double slot_ms = cfg.t_slot_s * 1e3;
  m.delivered_packets = delivered;
  m.avg_delay_ms = delivered > 0 ? delay_sum_slots / delivered * slot_ms : 0.0;
  m.rate_gbps = static_cast<double>(delivered) * cfg.pkg_bits /
                (static_cast<double>(slots) * cfg.t_slot_s) / 1e9;
  m.blockage_pct = 100.0 * blocked_slots / slots;
  double qtot = 0.0;
  for (int i = 0; i < u; ++i) {
    m.ue_delay_ms[i] = ue_delivered[i] > 0 ? ue_delay_sum[i] / ue_delivered[i] * slot_ms : 0.0;
    m.ue_queue_len[i] = ue_queue_sum[i] / slots;
    qtot += m.ue_queue_len[i];
  }
  m.mean_queue_len = qtot;
  return m;
}

static void finish_summary(RunSummary& s, double t_slot_s, double pkg_bits, long total_slots) {
  long delivered = 0;
  double delay_sum = 0.0;
  for (const auto& [d, n] : s.delay_histogram) {
    delivered += n;
    delay_sum += static_cast<double>(d) * n;
  }
  s.overall_delay_ms = delivered > 0 ? delay_sum / delivered * t_slot_s * 1e3 : 0.0;
  s.overall_rate_gbps =
      total_slots > 0
          ? static_cast<double>(delivered) * pkg_bits / (total_slots * t_slot_s) / 1e9
          : 0.0;
  double blocked = 0.0, weight = 0.0;
  for (const auto& it : s.iterations) {
    blocked += it.blockage_pct;
    weight += 1.0;
  }
  s.overall_blockage_pct = weight > 0 ? blocked / weight : 0.0;
}

RunSummary Runner::train(Controller& ctl, int iterations, const std::string& out_dir,
                         int checkpoint_every) {
  ScenarioConfig live = cfg_;
  Environment env(live, seed_);
  RunSummary summary;
  for (int it = 0; it < iterations; ++it) {
    auto delta = live.changes.find(it);
    if (delta != live.changes.end() && it > 0) {
      for (const auto& [key, value] : delta->second) live.set_key(key, value);
      live.validate();
      env.reconfigure(live);
    }
    summary.iterations.push_back(
        run_iteration(env, ctl, it, live.slots_per_iteration, summary.delay_histogram));
    ctl.end_iteration();
    if (checkpoint_every > 0 && !out_dir.empty() &&
        ((it + 1) % checkpoint_every == 0 || it + 1 == iterations)) {
      ctl.save_file(out_dir + "/checkpoint_" + std::to_string(it + 1) + ".bin");
    }
  }
  finish_summary(summary, live.t_slot_s, static_cast<double>(live.pkg_bits),
                 static_cast<long>(iterations) * live.slots_per_iteration);
  return summary;
}

RunSummary Runner::test(Controller& ctl, int realizations, int slots_per_realization) {
  ctl.set_frozen(true);
  RunSummary summary;
  for (int r = 0; r < realizations; ++r) {
    Environment env(cfg_, seed_ + 7919 * static_cast<std::uint64_t>(r + 1));
    summary.iterations.push_back(
        run_iteration(env, ctl, r, slots_per_realization, summary.delay_histogram));
  }
  finish_summary(summary, cfg_.t_slot_s, static_cast<double>(cfg_.pkg_bits),
                 static_cast<long>(realizations) * slots_per_realization);
  return summary;
}

void emit_metrics(const RunSummary& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open metrics file for writing: " + path);
  const std::size_t u = s.iterations.empty() ? 0 : s.iterations.front().ue_delay_ms.size();
  f << "iteration\tavg_delay_ms\trate_gbps\tblockage_pct\tmean_queue_len\tdelivered_packets";
  for (std::size_t i = 1; i <= u; ++i) f << "\tue" << i << "_delay_ms";
  for (std::size_t i = 1; i <= u; ++i) f << "\tue" << i << "_queue_len";
  f << "\n";
  f.precision(6);
  f << std::fixed;
  for (const auto& m : s.iterations) {
    f << m.iteration << '\t' << m.avg_delay_ms << '\t' << m.rate_gbps << '\t' << m.blockage_pct
      << '\t' << m.mean_queue_len << '\t' << m.delivered_packets;
    for (double v : m.ue_delay_ms) f << '\t' << v;
    for (double v : m.ue_queue_len) f << '\t' << v;
    f << "\n";
  }
  if (!f) throw std::runtime_error("metrics write failed: " + path);
}

void emit_delay_cdf(const RunSummary& s, double t_slot_s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open CDF file for writing: " + path);
  long total = 0;
  for (const auto& [d, n] : s.delay_histogram) total += n;
  f << "delay_ms\tcdf\n";
  f.precision(9);
  f << std::fixed;
  long acc = 0;
  for (const auto& [d, n] : s.delay_histogram) {
    acc += n;
    f << d * t_slot_s * 1e3 << '\t'
      << (total > 0 ? static_cast<double>(acc) / total : 0.0) << "\n";
  }
  if (!f) throw std::runtime_error("CDF write failed: " + path);
}

}  // namespace mmw
