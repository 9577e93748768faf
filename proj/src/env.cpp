#include "mmwsim/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mmw {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kMinDistM = 0.1;  // devices can graze each other; keep PL finite

double wrap_angle(double a) {
  while (a > kPi) a -= 2 * kPi;
  while (a < -kPi) a += 2 * kPi;
  return a;
}
}  // namespace

void PacketQueue::push(long arrival_slot, long count) {
  if (count <= 0) return;
  groups_.push_back({arrival_slot, count});
  total_ += count;
}

long PacketQueue::pop(long n, long now_slot, std::vector<std::pair<int, long>>& delays) {
  long taken = 0;
  while (n > 0 && !groups_.empty()) {
    auto& g = groups_.front();
    long take = std::min(n, g.second);
    // Arrivals are enqueued at the end of their slot, so a packet delivered in
    // the next slot has spent one slot in the system.
    delays.emplace_back(static_cast<int>(now_slot - g.first), take);
    g.second -= take;
    n -= take;
    taken += take;
    if (g.second == 0) groups_.pop_front();
  }
  total_ -= taken;
  return taken;
}

double path_loss_los_db(double d_m, double fc_ghz) {
  if (d_m <= 0) throw std::invalid_argument("coincident devices: distance must be positive");
  return 28.0 + 22.0 * std::log10(d_m) + 20.0 * std::log10(fc_ghz);
}

double antenna_gain_dbi(double b_azi_rad, double b_ele_rad) {
  return 10.0 * std::log10(16.0 * kPi / (6.67 * b_azi_rad * b_ele_rad));
}

double effective_coefficient_normal(int n_beams_tx, int n_beams_rx, int n_arr_tx,
                                    int n_arr_rx, const SlotTiming& timing) {
  double scans = std::ceil(static_cast<double>(n_beams_tx) / n_arr_tx) *
                 std::ceil(static_cast<double>(n_beams_rx) / n_arr_rx);
  double c = 1.0 - scans * timing.t_meas_s / timing.t_slot_s;
  if (c <= 0) throw std::invalid_argument("codebook infeasible: beam training exceeds the slot");
  return c;
}

int tracking_subset_size(double phi_track_rad, int n_beams) {
  return static_cast<int>(std::ceil(phi_track_rad / (2 * kPi) * n_beams));
}

double effective_coefficient_track(int n_beams_tx, int n_beams_rx, double phi_track_rad,
                                   const SlotTiming& timing) {
  double scans = static_cast<double>(tracking_subset_size(phi_track_rad, n_beams_tx)) *
                 tracking_subset_size(phi_track_rad, n_beams_rx);
  double c = 1.0 - scans * timing.t_meas_s / timing.t_slot_s;
  if (c <= 0) throw std::invalid_argument("codebook infeasible: tracking sweep exceeds the slot");
  return c;
}

int select_mcs(double rss_dbm, const std::vector<McsRow>& table) {
  int m = 0;
  for (std::size_t i = 0; i < table.size(); ++i)
    if (rss_dbm >= table[i].min_rss_dbm) m = static_cast<int>(i) + 1;
  return m;
}

bool step_blockage(BlockageChain& c, double pl_lo, double pl_hi, std::mt19937_64& rng) {
  if (c.H > 0) {
    --c.H;
    ++c.l_block;
    if (c.H > 0) return true;
    // countdown finished: fall through and re-sample immediately, so the
    // stationary blocked fraction matches the excursion model
  } else {
    ++c.l_block;
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double x = unif(rng);
  double acc = 0.0;
  for (std::size_t n = 1; n < c.p.size(); ++n) {
    acc += c.p[n];
    if (x < acc) {
      c.H = static_cast<int>(n);
      c.l_block = 0;
      c.pl_block_db = std::uniform_real_distribution<double>(pl_lo, pl_hi)(rng);
      return true;
    }
  }
  return false;
}

void step_mobility(MobilityState& m, const SlotTiming& timing, double v_min, double v_max,
                   double rot_min_rad, double rot_max_rad, int period, std::mt19937_64& rng) {
  auto resample = [&](bool need_inward) {
    std::uniform_real_distribution<double> uh(0.0, 2 * kPi);
    std::uniform_real_distribution<double> uv(v_min, v_max);
    std::uniform_real_distribution<double> ur(rot_min_rad, rot_max_rad);
    for (int tries = 0;; ++tries) {
      m.heading = uh(rng);
      m.speed = uv(rng);
      if (!need_inward) break;
      double nx = m.px + m.speed * timing.t_slot_s * std::cos(m.heading);
      double ny = m.py + m.speed * timing.t_slot_s * std::sin(m.heading);
      if (std::hypot(nx - m.cx, ny - m.cy) <= m.r_move || m.speed == 0) break;
      if (tries > 1000) {  // pathological region; stop instead of looping
        m.speed = 0;
        break;
      }
    }
    m.rot_rate = ur(rng) * (std::uniform_int_distribution<int>(0, 1)(rng) ? 1.0 : -1.0);
    m.slots_since_refresh = 0;
  };

  if (m.slots_since_refresh >= period) resample(false);
  double nx = m.px + m.speed * timing.t_slot_s * std::cos(m.heading);
  double ny = m.py + m.speed * timing.t_slot_s * std::sin(m.heading);
  if (std::hypot(nx - m.cx, ny - m.cy) > m.r_move) {
    resample(true);
    nx = m.px + m.speed * timing.t_slot_s * std::cos(m.heading);
    ny = m.py + m.speed * timing.t_slot_s * std::sin(m.heading);
  }
  m.px = nx;
  m.py = ny;
  m.orientation = wrap_angle(m.orientation + m.rot_rate * timing.t_slot_s);
  ++m.slots_since_refresh;
}

double outage_coefficient(double bw_tx_rad, double bw_rx_rad, double omega_tx,
                          double omega_rx, double dt_phase_s, std::mt19937_64& rng) {
  auto exit_time = [&](double bw, double omega) {
    std::uniform_real_distribution<double> ue(-bw / 4.0, bw / 4.0);
    double residual = std::abs(ue(rng));
    if (omega <= 0) return std::numeric_limits<double>::infinity();
    return (bw / 2.0 - residual) / omega;
  };
  double tau = std::min(exit_time(bw_tx_rad, omega_tx), exit_time(bw_rx_rad, omega_rx));
  if (dt_phase_s <= 0) return 0.0;
  double out = 1.0 - tau / dt_phase_s;
  return std::clamp(out, 0.0, 1.0);
}

Environment::Environment(const ScenarioConfig& cfg, std::uint64_t seed) : rng_(seed) {
  u_ = cfg.n_ues();
  queues_.resize(u_);
  b_d2d_.assign(u_, false);
  b_track_.assign(u_, false);
  last_beam_dir_.assign(u_, 0.0);
  total_arrived_.assign(u_, 0);
  total_delivered_.assign(u_, 0);
  reconfigure(cfg);
  // initial positions and beam directions
  mobility_.assign(u_ + 1, MobilityState{});
  mobility_[0].r_move = cfg.r_move_m;
  for (int u = 0; u < u_; ++u) {
    double ang = cfg.ue_angle_deg[u] * kPi / 180.0;
    auto& m = mobility_[u + 1];
    m.px = m.cx = cfg.ue_dist[u] * std::cos(ang);
    m.py = m.cy = cfg.ue_dist[u] * std::sin(ang);
    m.r_move = cfg.r_move_m;
    m.slots_since_refresh = cfg.mobility_period_slots;  // sample on first step
    last_beam_dir_[u] = ang;
  }
  mobility_[0].slots_since_refresh = cfg.mobility_period_slots;
}

void Environment::reconfigure(const ScenarioConfig& cfg) {
  cfg.validate();
  if (cfg.n_ues() != u_ && !queues_.empty() && t_ > 0)
    throw std::invalid_argument("scenario change cannot alter the number of UEs");
  cfg_ = cfg;
  timing_ = {cfg.t_slot_s, cfg.t_meas_s};
  channel_ = {cfg.fc_ghz,     cfg.bandwidth_hz, cfg.shadow_sigma_db, cfg.margin_db,
              cfg.p_tx_ap_dbm, cfg.p_tx_ue_dbm, cfg.noise_power_dbm()};
  codebooks_.clear();
  c_normal_.clear();
  c_track_.clear();
  double b_ele = cfg.b_ele_deg * kPi / 180.0;
  for (int k = 0; k < cfg.n_codebooks(); ++k) {
    int n = cfg.codebook_beams[k];
    codebooks_.push_back({k + 1, n, 2 * kPi / n, b_ele});
    c_normal_.push_back(effective_coefficient_normal(n, cfg.codebook_beams[0], cfg.n_arr_ap,
                                                     cfg.n_arr_ue, timing_));
    c_track_.push_back(effective_coefficient_track(n, cfg.codebook_beams[0],
                                                   cfg.phi_track_rad, timing_));
  }
  lambda_.resize(u_);
  for (int u = 0; u < u_; ++u) lambda_[u] = cfg.lambda_ue(u);

  auto entry_probs = [&](double p_each) {
    std::vector<double> p(cfg.block_n_max + 1, 0.0);
    double leave = 0.0;
    for (int n = cfg.block_n_min; n <= cfg.block_n_max; ++n) {
      p[n] = p_each;
      leave += p_each;
    }
    p[0] = 1.0 - leave;
    return p;
  };
  bool fresh = block_main_.empty();
  block_main_.resize(u_);
  block_d2d_.resize(u_ * (u_ - 1) / 2);
  for (int u = 0; u < u_; ++u) {
    block_main_[u].p = entry_probs(cfg.ue_block_p[u]);
    if (fresh) block_main_[u].H = 0;
    block_main_[u].H = std::min(block_main_[u].H, cfg.block_n_max);
  }
  for (auto& c : block_d2d_) {
    c.p = entry_probs(cfg.d2d_block_p);
    if (fresh) c.H = 0;
    c.H = std::min(c.H, cfg.block_n_max);
  }
  // Topology deltas move the mobility regions (device teleports with its region)
  if (!mobility_.empty()) {
    for (int u = 0; u < u_; ++u) {
      double ang = cfg.ue_angle_deg[u] * kPi / 180.0;
      auto& m = mobility_[u + 1];
      m.px = m.cx = cfg.ue_dist[u] * std::cos(ang);
      m.py = m.cy = cfg.ue_dist[u] * std::sin(ang);
      m.r_move = cfg.r_move_m;
      last_beam_dir_[u] = ang;
    }
    mobility_[0].r_move = cfg.r_move_m;
  }
}

ObservableState Environment::observe() const {
  ObservableState s;
  s.q.resize(u_);
  for (int u = 0; u < u_; ++u) s.q[u] = queues_[u].size();
  s.b_d2d.assign(b_d2d_.begin(), b_d2d_.end());
  s.b_track.assign(b_track_.begin(), b_track_.end());
  s.l_block.resize(u_);
  for (int u = 0; u < u_; ++u) s.l_block[u] = block_main_[u].l_block;
  return s;
}

int Environment::pair_index(int a, int b) const {
  if (a > b) std::swap(a, b);
  // 0-based UE ids; pairs (0,1),(0,2),...,(0,U-1),(1,2),...
  return a * (2 * u_ - a - 1) / 2 + (b - a - 1);
}

double Environment::device_angular_rate(int self, int other) const {
  const auto& a = mobility_[self];
  const auto& b = mobility_[other];
  double dx = b.px - a.px, dy = b.py - a.py;
  double d = std::max(std::hypot(dx, dy), kMinDistM);
  double rvx = b.speed * std::cos(b.heading) - a.speed * std::cos(a.heading);
  double rvy = b.speed * std::sin(b.heading) - a.speed * std::sin(a.heading);
  double v_perp = std::abs(dx * rvy - dy * rvx) / d;  // cross / |r|
  return std::abs(a.rot_rate) + v_perp / d;
}

Environment::LinkPhysics Environment::link_rss(int tx_dev, int rx_dev, int cb_id,
                                               bool tracking_slot) {
  const auto& tx = mobility_[tx_dev];
  const auto& rx = mobility_[rx_dev];
  double d = std::max(std::hypot(rx.px - tx.px, rx.py - tx.py), kMinDistM);
  double pl = path_loss_los_db(d, channel_.fc_ghz);
  pl += std::normal_distribution<double>(0.0, channel_.shadow_sigma_db)(rng_);

  bool blocked;
  if (tx_dev == 0) {
    blocked = block_main_[rx_dev - 1].H > 0;
    if (blocked) pl += block_main_[rx_dev - 1].pl_block_db;
  } else {
    const auto& c = block_d2d_[pair_index(tx_dev - 1, rx_dev - 1)];
    blocked = c.H > 0;
    if (blocked) pl += c.pl_block_db;
  }

  const Codebook& tx_cb = codebooks_[cb_id - 1];
  const Codebook& rx_cb = codebooks_[0];  // UEs always use the widest codebook
  double g_tx = antenna_gain_dbi(tx_cb.azimuth_beamwidth_rad, tx_cb.elevation_beamwidth_rad);
  double g_rx = antenna_gain_dbi(rx_cb.azimuth_beamwidth_rad, rx_cb.elevation_beamwidth_rad);
  double p_tx = (tx_dev == 0) ? channel_.p_tx_ap_dbm : channel_.p_tx_ue_dbm;
  double rss = p_tx + g_tx + g_rx - pl - channel_.margin_db;

  if (tracking_slot && tx_dev == 0) {
    // the tracking sweep only covers beams near the last aligned direction
    double cur = std::atan2(rx.py - tx.py, rx.px - tx.px);
    if (std::abs(wrap_angle(cur - last_beam_dir_[rx_dev - 1])) > cfg_.phi_track_rad / 2.0)
      rss = -1e9;  // best pair fell outside the tracked sector
  }
  return {rss, blocked};
}

SlotResult Environment::execute_slot(const Action& a) {
  ObservableState s = observe();
  if (a.main_dest < 1 || a.main_dest > u_ || a.main_rx < 1 || a.main_rx > u_ ||
      a.cb < 1 || a.cb > n_codebooks() || (a.track != 0 && a.track != 1))
    throw std::invalid_argument("action out of range");
  if (!action_feasible(a, s))
    throw std::invalid_argument("infeasible action rejected at slot " + std::to_string(t_));

  SlotResult res;
  res.delivered.assign(u_, 0);
  res.arrivals.assign(u_, 0);

  // 1. blockage chains advance
  for (auto& c : block_main_) step_blockage(c, cfg_.pl_block_lo_db, cfg_.pl_block_hi_db, rng_);
  for (auto& c : block_d2d_) step_blockage(c, cfg_.pl_block_lo_db, cfg_.pl_block_hi_db, rng_);

  bool tracking_slot = false;
  for (bool b : b_track_) tracking_slot = tracking_slot || b;

  // 2. main link: BA outcome, MCS, effective coefficient, capacity
  auto phys = link_rss(0, a.main_rx, a.cb, tracking_slot);
  LinkOutcome main;
  main.rss_dbm = phys.rss_dbm;
  main.blocked = phys.blocked;
  main.mcs = select_mcs(phys.rss_dbm, cfg_.mcs_table);
  main.rate_bps = main.mcs == 0 ? 0.0 : cfg_.mcs_table[main.mcs - 1].rate_bps;
  {
    double base = tracking_slot ? c_track_[a.cb - 1] : c_normal_[a.cb - 1];
    const Codebook& ap_cb = codebooks_[a.cb - 1];
    double outage = outage_coefficient(
        ap_cb.azimuth_beamwidth_rad, codebooks_[0].azimuth_beamwidth_rad,
        device_angular_rate(0, a.main_rx), device_angular_rate(a.main_rx, 0),
        base * timing_.t_slot_s, rng_);
    main.eff_coeff = (1.0 - outage) * base;
  }
  main.packets = static_cast<long>(
      std::floor(main.rate_bps * main.eff_coeff * timing_.t_slot_s / cfg_.pkg_bits));
  res.main = main;
  res.main_rx_blocked = main.blocked;

  // 3. D2D leg of a relay decided last slot
  if (pending_) {
    int tx = pending_->tx_id, rx = pending_->rx_id;
    auto d2d_phys = link_rss(tx, rx, 1, false);
    LinkOutcome d2d;
    d2d.rss_dbm = d2d_phys.rss_dbm;
    d2d.blocked = d2d_phys.blocked;
    d2d.mcs = select_mcs(d2d_phys.rss_dbm, cfg_.mcs_table);
    d2d.rate_bps = d2d.mcs == 0 ? 0.0 : cfg_.mcs_table[d2d.mcs - 1].rate_bps;
    double outage = outage_coefficient(
        codebooks_[0].azimuth_beamwidth_rad, codebooks_[0].azimuth_beamwidth_rad,
        device_angular_rate(tx, rx), device_angular_rate(rx, tx),
        c_normal_[0] * timing_.t_slot_s, rng_);
    d2d.eff_coeff = (1.0 - outage) * c_normal_[0];
    d2d.packets = static_cast<long>(
        std::floor(d2d.rate_bps * d2d.eff_coeff * timing_.t_slot_s / cfg_.pkg_bits));
    res.d2d = d2d;
    res.d2d_tx = tx;
    res.d2d_rx = rx;
    long deliverable = std::min(pending_->packets_at_relay, d2d.packets);
    long got = queues_[rx - 1].pop(deliverable, t_, res.d2d_delay_counts);
    res.delivered[rx - 1] = got;
    total_delivered_[rx - 1] += got;
  }

  // 4. main-link departures and relay hand-off
  if (a.main_dest == a.main_rx) {
    long got = queues_[a.main_dest - 1].pop(main.packets, t_, res.delay_counts);
    res.delivered[a.main_dest - 1] += got;
    total_delivered_[a.main_dest - 1] += got;
    pending_.reset();
  } else {
    // packets stay in the AP queue; only the D2D-forwarded min ever departs
    long at_relay = std::min(main.packets, queues_[a.main_dest - 1].size());
    pending_ = PendingRelay{a.main_rx, a.main_dest, at_relay,
                            main.rate_bps, main.eff_coeff, main.mcs};
  }

  // 5. flag evolution
  std::fill(b_d2d_.begin(), b_d2d_.end(), false);
  if (a.main_dest != a.main_rx) {
    b_d2d_[a.main_dest - 1] = true;
    b_d2d_[a.main_rx - 1] = true;
  } else {
    pending_.reset();
  }
  std::fill(b_track_.begin(), b_track_.end(), false);
  if (a.track == 1) b_track_[a.main_rx - 1] = true;

  // full alignment this slot fixes the beam direction used by a next-slot sweep
  {
    const auto& rxm = mobility_[a.main_rx];
    last_beam_dir_[a.main_rx - 1] = std::atan2(rxm.py - mobility_[0].py,
                                               rxm.px - mobility_[0].px);
  }

  // 6. arrivals
  for (int u = 0; u < u_; ++u) {
    long z = lambda_[u] > 0 ? std::poisson_distribution<long>(lambda_[u])(rng_) : 0;
    res.arrivals[u] = z;
    queues_[u].push(t_, z);
    total_arrived_[u] += z;
  }

  // 7. mobility advances to the next slot
  double rot_min = cfg_.rot_min_dps * kPi / 180.0;
  double rot_max = cfg_.rot_max_dps * kPi / 180.0;
  for (auto& m : mobility_)
    step_mobility(m, timing_, cfg_.v_min_mps, cfg_.v_max_mps, rot_min, rot_max,
                  cfg_.mobility_period_slots, rng_);

  ++t_;
  return res;
}

}  // namespace mmw
