#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mmw {

/// One row of the RSS->MCS table. Row 0 (rate 0, threshold -inf) is implicit.
struct McsRow {
  double min_rss_dbm;
  double rate_bps;
};

/// Full scenario description: channel, hardware, blockage/mobility models,
/// topology, traffic, controller hyperparameters and the run plan.
/// Defaults reproduce the five-UE reference scenario.
struct ScenarioConfig {
  // Timing
  double t_slot_s = 10e-3;
  double t_meas_s = 10e-6;
  double phi_track_rad = 0.5235987755982988;  // pi/6

  // Traffic
  long pkg_bits = 2312 * 8;
  double total_traffic_gbps = 1.0;
  std::vector<double> traffic_frac = {1.0 / 7, 3.0 / 7, 1.0 / 7, 1.0 / 7, 1.0 / 7};

  // Channel
  double fc_ghz = 60.0;
  double bandwidth_hz = 2.16e9;
  double shadow_sigma_db = 2.0;
  double margin_db = 10.0;
  double p_tx_ap_dbm = 15.0;
  double p_tx_ue_dbm = 10.0;

  // Hardware
  int n_arr_ap = 4;
  int n_arr_ue = 4;
  std::vector<int> codebook_beams = {24, 32, 64, 128, 256, 512};
  double b_ele_deg = 75.0;

  // Blockage
  int block_n_min = 2;
  int block_n_max = 6;
  double pl_block_lo_db = 10.0;
  double pl_block_hi_db = 30.0;
  // Per-UE per-duration entry probability: p_{u,n} = ue_block_p[u] for
  // n in [block_n_min, block_n_max], p_{u,1} = 0, p_{u,0} = remainder.
  std::vector<double> ue_block_p = {0.0026, 0.0026, 0.1, 0.0026, 0.0026};
  double d2d_block_p = 0.0026;

  // Mobility
  double v_min_mps = 0.0;
  double v_max_mps = 10.0;
  double rot_min_dps = 0.0;
  double rot_max_dps = 10.0;
  int mobility_period_slots = 20;
  double r_move_m = 5.0;

  // Topology (AP at origin; UE u at ue_dist[u] meters, ue_angle_deg[u] from x-axis)
  std::vector<double> ue_dist = {10, 10, 15, 25, 30};
  std::vector<double> ue_angle_deg = {5, 85, 45, 10, 80};

  // RSS->MCS table, rows for m = 1..M (ascending). Row 0 implicit.
  std::vector<McsRow> mcs_table = {
      {-65.5, 385.00e6},  {-64.0, 770.00e6},  {-62.5, 962.50e6},
      {-61.3, 1155.00e6}, {-60.4, 1251.25e6}, {-59.7, 1540.00e6},
      {-46.5, 1925.00e6}, {-45.0, 2310.00e6}, {-44.2, 2502.50e6},
      {-43.4, 3080.00e6}, {-42.7, 3850.00e6}, {-42.0, 4620.00e6}};

  // PPO hyperparameters
  double gamma = 0.999;
  double eps_clip = 0.2;
  double c_entropy = 0.05;
  int batch_t = 5;
  double learning_rate = 1e-3;
  double lr_decay = 0.9;
  int lr_decay_every = 20;
  double scale_x_gbps = 2.0;
  int n_block_tilde = 10;
  std::vector<int> nn_hidden = {128, 128, 128};
  bool nn_shared_trunk = true;

  // MAB hyperparameters
  int mab_init_n = 5;

  // Run plan
  int iterations = 240;
  int slots_per_iteration = 1500;
  int realizations_curve = 20;
  int realizations_final = 200;
  std::uint64_t seed = 1;
  int checkpoint_every = 1;

  // Scenario-change schedule: iteration -> raw key/value deltas applied
  // at that iteration boundary without resetting the controller.
  std::map<int, std::vector<std::pair<std::string, std::string>>> changes;

  int n_ues() const { return static_cast<int>(ue_dist.size()); }
  int n_codebooks() const { return static_cast<int>(codebook_beams.size()); }
  int n_mcs() const { return static_cast<int>(mcs_table.size()); }  // M
  double lambda_total() const {
    return total_traffic_gbps * 1e9 * t_slot_s / static_cast<double>(pkg_bits);
  }
  double lambda_ue(int u) const { return lambda_total() * traffic_frac.at(u); }
  double noise_power_dbm() const;

  /// Applies one key/value pair (same keys as the config file). Throws
  /// std::invalid_argument on unknown key or malformed value.
  void set_key(const std::string& key, const std::string& value);

  /// Validates cross-field invariants; throws std::invalid_argument.
  void validate() const;
};

/// Parses a plain-text key/value scenario file. Unset keys keep the
/// reference-scenario defaults; an empty file is the reference scenario.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(const std::string& text, const std::string& origin = "<string>");

}  // namespace mmw
