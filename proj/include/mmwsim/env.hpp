#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <vector>

#include "mmwsim/config.hpp"
#include "mmwsim/pomdp.hpp"

namespace mmw {

struct SlotTiming {
  double t_slot_s;
  double t_meas_s;
};

/// FIFO of packets compressed as (arrival_slot, count) runs. Arrivals of a
/// slot form one run, so memory stays bounded even for exploding queues.
class PacketQueue {
 public:
  long size() const { return total_; }
  void push(long arrival_slot, long count);
  /// Dequeues up to n packets from the head; appends (delay_slots, count)
  /// groups for each distinct arrival slot, delay = now - arrival (arrivals
  /// enter at the end of their slot, so same-slot delivery is impossible).
  long pop(long n, long now_slot, std::vector<std::pair<int, long>>& delays);

 private:
  std::deque<std::pair<long, long>> groups_;
  long total_ = 0;
};

struct MobilityState {
  double px = 0, py = 0;          // meters
  double heading = 0;             // radians
  double speed = 0;               // m/s
  double rot_rate = 0;            // rad/s, signed
  double orientation = 0;         // radians
  double cx = 0, cy = 0;          // region center
  double r_move = 5.0;            // region radius
  int slots_since_refresh = 0;
};

/// (N_block+1)-state Markov chain: H slots of blockage remain; a fresh
/// excess loss is drawn once per blockage event and held for its duration.
struct BlockageChain {
  int H = 0;
  long l_block = 1000000;  // slots since last observed blockage onset
  std::vector<double> p;   // entry probabilities, index 0..N_block
  double pl_block_db = 0;  // current event's excess loss
};

struct Codebook {
  int id;        // 1-based
  int n_beams;
  double azimuth_beamwidth_rad;
  double elevation_beamwidth_rad;
};

struct ChannelModel {
  double fc_ghz;
  double bandwidth_hz;
  double shadow_sigma_db;
  double margin_db;
  double p_tx_ap_dbm;
  double p_tx_ue_dbm;
  double noise_power_dbm;
};

struct LinkOutcome {
  double rss_dbm = 0;
  int mcs = 0;
  double rate_bps = 0;
  double eff_coeff = 0;
  long packets = 0;     // capacity floor(rate * eff * t_slot / S_pkg)
  bool blocked = false;
};

struct PendingRelay {
  int tx_id;   // relay UE (main rx of the relay slot)
  int rx_id;   // destination UE (d2d rx)
  long packets_at_relay;  // d_main of the relay slot, capped by the queue
  double r_main_bps;
  double c_eff_main;
  int m_main;
};

struct SlotResult {
  std::vector<long> delivered;  // d_u[t]
  std::vector<long> arrivals;   // z_u[t]
  LinkOutcome main;
  std::optional<LinkOutcome> d2d;
  int d2d_tx = 0, d2d_rx = 0;   // valid when d2d outcome present
  std::vector<std::pair<int, long>> delay_counts;      // direct (delay_slots, packets)
  std::vector<std::pair<int, long>> d2d_delay_counts;  // relayed deliveries
  bool main_rx_blocked = false;
};

// Free-function pieces of the link model, exposed for direct testing.
double path_loss_los_db(double d_m, double fc_ghz);
double antenna_gain_dbi(double b_azi_rad, double b_ele_rad);
double effective_coefficient_normal(int n_beams_tx, int n_beams_rx, int n_arr_tx,
                                    int n_arr_rx, const SlotTiming& timing);
double effective_coefficient_track(int n_beams_tx, int n_beams_rx, double phi_track_rad,
                                   const SlotTiming& timing);
int tracking_subset_size(double phi_track_rad, int n_beams);
int select_mcs(double rss_dbm, const std::vector<McsRow>& table);
/// Advances one Markov step; returns true when the chain is blocked during
/// the slot. A finished countdown re-samples in the same step, so back-to-back
/// blockage events are possible.
bool step_blockage(BlockageChain& c, double pl_lo, double pl_hi, std::mt19937_64& rng);
void step_mobility(MobilityState& m, const SlotTiming& timing, double v_min, double v_max,
                   double rot_min_rad, double rot_max_rad, int period, std::mt19937_64& rng);
/// Fraction of the DT phase lost to beam misalignment. The pointing error at
/// each endpoint starts at a residual drawn in +-1/4 beamwidth and drifts at
/// the endpoint's angular rate; outage begins once either error exceeds half
/// its beamwidth.
double outage_coefficient(double bw_tx_rad, double bw_rx_rad, double omega_tx,
                          double omega_rx, double dt_phase_s, std::mt19937_64& rng);

/// Ground-truth simulation of the mmWave downlink. Owns all randomness.
class Environment {
 public:
  Environment(const ScenarioConfig& cfg, std::uint64_t seed);

  /// Rebuilds topology/blockage/traffic from a new config while keeping
  /// queues, flags and the slot counter (scenario-change protocol).
  void reconfigure(const ScenarioConfig& cfg);

  ObservableState observe() const;
  SlotResult execute_slot(const Action& a);

  long slot() const { return t_; }
  int n_ues() const { return u_; }
  int n_codebooks() const { return static_cast<int>(codebooks_.size()); }
  const ScenarioConfig& config() const { return cfg_; }
  long queue_len(int u) const { return queues_.at(u - 1).size(); }
  long total_arrived(int u) const { return total_arrived_[u]; }
  long total_delivered(int u) const { return total_delivered_[u]; }
  long pending_relay_packets() const { return pending_ ? pending_->packets_at_relay : 0; }
  const BlockageChain& main_chain(int u) const { return block_main_[u]; }
  const MobilityState& mobility(int dev) const { return mobility_[dev]; }  // 0 = AP
  double c_normal(int cb) const { return c_normal_[cb - 1]; }
  double c_track(int cb) const { return c_track_[cb - 1]; }

 private:
  struct LinkPhysics {
    double rss_dbm;
    bool blocked;
  };
  LinkPhysics link_rss(int tx_dev, int rx_dev, int cb_id, bool tracking_slot);
  double device_angular_rate(int self, int other) const;
  int pair_index(int a, int b) const;  // unordered UE pair -> chain index

  ScenarioConfig cfg_;
  SlotTiming timing_;
  ChannelModel channel_;
  std::vector<Codebook> codebooks_;
  std::vector<double> c_normal_, c_track_;
  std::vector<double> lambda_;
  int u_;
  long t_ = 0;

  std::vector<PacketQueue> queues_;
  std::vector<MobilityState> mobility_;       // index 0 = AP, 1..U = UEs
  std::vector<BlockageChain> block_main_;     // per UE
  std::vector<BlockageChain> block_d2d_;      // per unordered UE pair
  std::vector<bool> b_d2d_, b_track_;
  std::optional<PendingRelay> pending_;
  std::vector<double> last_beam_dir_;         // AP->UE angle at last alignment
  std::vector<long> total_arrived_, total_delivered_;

  std::mt19937_64 rng_;
};

}  // namespace mmw
