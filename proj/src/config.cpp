#include "mmwsim/config.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mmw {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("malformed number '" + s + "'");
  return v;
}

long to_long(const std::string& s) {
  std::size_t pos = 0;
  long v = std::stol(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("malformed integer '" + s + "'");
  return v;
}

std::vector<double> to_dlist(const std::string& s) {
  std::vector<double> out;
  for (const auto& p : split(s, ',')) out.push_back(to_double(p));
  return out;
}

std::vector<int> to_ilist(const std::string& s) {
  std::vector<int> out;
  for (const auto& p : split(s, ',')) out.push_back(static_cast<int>(to_long(p)));
  return out;
}

}  // namespace

double ScenarioConfig::noise_power_dbm() const {
  return -174.0 + 10.0 * std::log10(bandwidth_hz) + 10.0;
}

void ScenarioConfig::set_key(const std::string& key, const std::string& value) {
  if (key == "t_slot_s") t_slot_s = to_double(value);
  else if (key == "t_meas_s") t_meas_s = to_double(value);
  else if (key == "phi_track_rad") phi_track_rad = to_double(value);
  else if (key == "pkg_bits") pkg_bits = to_long(value);
  else if (key == "total_traffic_gbps") total_traffic_gbps = to_double(value);
  else if (key == "traffic_frac") traffic_frac = to_dlist(value);
  else if (key == "fc_ghz") fc_ghz = to_double(value);
  else if (key == "bandwidth_hz") bandwidth_hz = to_double(value);
  else if (key == "shadow_sigma_db") shadow_sigma_db = to_double(value);
  else if (key == "margin_db") margin_db = to_double(value);
  else if (key == "p_tx_ap_dbm") p_tx_ap_dbm = to_double(value);
  else if (key == "p_tx_ue_dbm") p_tx_ue_dbm = to_double(value);
  else if (key == "n_arr_ap") n_arr_ap = static_cast<int>(to_long(value));
  else if (key == "n_arr_ue") n_arr_ue = static_cast<int>(to_long(value));
  else if (key == "codebook_beams") codebook_beams = to_ilist(value);
  else if (key == "b_ele_deg") b_ele_deg = to_double(value);
  else if (key == "block_n_min") block_n_min = static_cast<int>(to_long(value));
  else if (key == "block_n_max") block_n_max = static_cast<int>(to_long(value));
  else if (key == "pl_block_lo_db") pl_block_lo_db = to_double(value);
  else if (key == "pl_block_hi_db") pl_block_hi_db = to_double(value);
  else if (key == "ue_block_p") ue_block_p = to_dlist(value);
  else if (key == "d2d_block_p") d2d_block_p = to_double(value);
  else if (key == "v_min_mps") v_min_mps = to_double(value);
  else if (key == "v_max_mps") v_max_mps = to_double(value);
  else if (key == "rot_min_dps") rot_min_dps = to_double(value);
  else if (key == "rot_max_dps") rot_max_dps = to_double(value);
  else if (key == "mobility_period_slots") mobility_period_slots = static_cast<int>(to_long(value));
  else if (key == "r_move_m") r_move_m = to_double(value);
  else if (key == "ue_dist") ue_dist = to_dlist(value);
  else if (key == "ue_angle_deg") ue_angle_deg = to_dlist(value);
  else if (key == "mcs_table_clear") mcs_table.clear();
  else if (key == "mcs_row") {
    auto parts = to_dlist(value);
    if (parts.size() != 2) throw std::invalid_argument("mcs_row wants 'min_rss,rate_bps'");
    mcs_table.push_back({parts[0], parts[1]});
  } else if (key == "gamma") gamma = to_double(value);
  else if (key == "eps_clip") eps_clip = to_double(value);
  else if (key == "c_entropy") c_entropy = to_double(value);
  else if (key == "batch_t") batch_t = static_cast<int>(to_long(value));
  else if (key == "learning_rate") learning_rate = to_double(value);
  else if (key == "lr_decay") lr_decay = to_double(value);
  else if (key == "lr_decay_every") lr_decay_every = static_cast<int>(to_long(value));
  else if (key == "scale_x_gbps") scale_x_gbps = to_double(value);
  else if (key == "n_block_tilde") n_block_tilde = static_cast<int>(to_long(value));
  else if (key == "nn_hidden") nn_hidden = to_ilist(value);
  else if (key == "nn_shared_trunk") nn_shared_trunk = to_long(value) != 0;
  else if (key == "mab_init_n") mab_init_n = static_cast<int>(to_long(value));
  else if (key == "iterations") iterations = static_cast<int>(to_long(value));
  else if (key == "slots_per_iteration") slots_per_iteration = static_cast<int>(to_long(value));
  else if (key == "realizations_curve") realizations_curve = static_cast<int>(to_long(value));
  else if (key == "realizations_final") realizations_final = static_cast<int>(to_long(value));
  else if (key == "seed") seed = static_cast<std::uint64_t>(to_long(value));
  else if (key == "checkpoint_every") checkpoint_every = static_cast<int>(to_long(value));
  else if (key.rfind("change.", 0) == 0) {
    // change.<iteration>.<key> = <value>
    auto rest = key.substr(7);
    auto dot = rest.find('.');
    if (dot == std::string::npos) throw std::invalid_argument("change key wants change.<iter>.<key>");
    int iter = static_cast<int>(to_long(rest.substr(0, dot)));
    changes[iter].emplace_back(rest.substr(dot + 1), value);
  } else {
    throw std::invalid_argument("unknown key '" + key + "'");
  }
}

void ScenarioConfig::validate() const {
  const int u = n_ues();
  if (u < 1) throw std::invalid_argument("need at least one UE");
  if (t_meas_s <= 0 || t_meas_s >= t_slot_s)
    throw std::invalid_argument("t_meas must be in (0, t_slot)");
  if (phi_track_rad <= 0 || phi_track_rad > 2 * 3.14159265358979323846 + 1e-12)
    throw std::invalid_argument("phi_track must be in (0, 2*pi]");
  if (static_cast<int>(ue_angle_deg.size()) != u || static_cast<int>(traffic_frac.size()) != u ||
      static_cast<int>(ue_block_p.size()) != u)
    throw std::invalid_argument("per-UE lists must all have the same length");
  double frac_sum = std::accumulate(traffic_frac.begin(), traffic_frac.end(), 0.0);
  if (std::abs(frac_sum - 1.0) > 1e-9)
    throw std::invalid_argument("traffic fractions must sum to 1");
  for (double f : traffic_frac)
    if (f < 0) throw std::invalid_argument("traffic fractions must be nonnegative");
  if (codebook_beams.empty()) throw std::invalid_argument("need at least one codebook");
  for (int n : codebook_beams)
    if (n < 1) throw std::invalid_argument("codebook beam count must be >= 1");
  if (block_n_min < 1 || block_n_max < block_n_min)
    throw std::invalid_argument("blockage duration range invalid");
  for (double p : ue_block_p) {
    double leave = p * (block_n_max - block_n_min + 1);
    if (p < 0 || leave > 1.0 + 1e-12)
      throw std::invalid_argument("blockage entry probabilities out of range");
  }
  {
    double leave = d2d_block_p * (block_n_max - block_n_min + 1);
    if (d2d_block_p < 0 || leave > 1.0 + 1e-12)
      throw std::invalid_argument("d2d blockage probability out of range");
  }
  if (v_min_mps < 0 || v_max_mps < v_min_mps)
    throw std::invalid_argument("speed range invalid");
  if (rot_min_dps < 0 || rot_max_dps < rot_min_dps)
    throw std::invalid_argument("rotation range invalid");
  if (mcs_table.empty()) throw std::invalid_argument("MCS table must be nonempty");
  for (std::size_t i = 1; i < mcs_table.size(); ++i) {
    if (mcs_table[i].rate_bps <= mcs_table[i - 1].rate_bps ||
        mcs_table[i].min_rss_dbm <= mcs_table[i - 1].min_rss_dbm)
      throw std::invalid_argument("MCS table rows must be strictly increasing");
  }
  if (mcs_table.front().rate_bps <= 0)
    throw std::invalid_argument("MCS rates must be positive");
  if (slots_per_iteration < 1) throw std::invalid_argument("slots_per_iteration must be >= 1");
  if (batch_t < 1) throw std::invalid_argument("batch_t must be >= 1");
  if (gamma < 0 || gamma > 1) throw std::invalid_argument("gamma must be in [0,1]");
  if (eps_clip <= 0) throw std::invalid_argument("eps_clip must be positive");
  if (scale_x_gbps <= 0) throw std::invalid_argument("scale_x_gbps must be positive");
  if (n_block_tilde <= block_n_max)
    throw std::invalid_argument("n_block_tilde must exceed block_n_max");
  if (pkg_bits <= 0) throw std::invalid_argument("pkg_bits must be positive");
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& origin) {
  ScenarioConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    try {
      cfg.set_key(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

}  // namespace mmw
