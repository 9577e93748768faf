#include "mmwsim/mab.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace mmw {

namespace {
constexpr std::uint32_t kMagic = 0x4d414243;  // "MABC"
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("controller checkpoint: truncated stream");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64v(std::ostream& out, const std::vector<double>& v) {
  write_u32(out, static_cast<std::uint32_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_f64v(std::istream& in) {
  std::uint32_t n = read_u32(in);
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("controller checkpoint: truncated stream");
  return v;
}

void write_i64v(std::ostream& out, const std::vector<long>& v) {
  std::vector<double> tmp(v.begin(), v.end());
  write_f64v(out, tmp);
}

std::vector<long> read_i64v(std::istream& in) {
  std::vector<double> tmp = read_f64v(in);
  return std::vector<long>(tmp.begin(), tmp.end());
}
}  // namespace

DirichletPriors::DirichletPriors(int n_mcs_levels, int n_arms, int n_contexts)
    : levels_(n_mcs_levels),
      arms_(n_arms),
      ctx_(n_contexts),
      a_(static_cast<std::size_t>(n_mcs_levels) * n_arms * n_contexts, 1.0) {
  if (n_mcs_levels <= 0 || n_arms <= 0 || n_contexts <= 0)
    throw std::invalid_argument("DirichletPriors: dimensions must be positive");
}

double DirichletPriors::sample_score(int arm, int ctx, const std::vector<double>& rates,
                                     std::mt19937_64& rng) const {
  if (static_cast<int>(rates.size()) != levels_)
    throw std::invalid_argument("DirichletPriors::sample_score: rates size mismatch");
  double sum = 0.0;
  std::vector<double> g(levels_);
  for (int m = 0; m < levels_; ++m) {
    std::gamma_distribution<double> gd(at(m, arm, ctx), 1.0);
    g[m] = gd(rng);
    sum += g[m];
  }
  if (sum <= 0.0) return 0.0;
  double score = 0.0;
  for (int m = 0; m < levels_; ++m) score += rates[m] * g[m] / sum;
  return score;
}

double DirichletPriors::mean_score(int arm, int ctx, const std::vector<double>& rates) const {
  if (static_cast<int>(rates.size()) != levels_)
    throw std::invalid_argument("DirichletPriors::mean_score: rates size mismatch");
  double sum = 0.0, score = 0.0;
  for (int m = 0; m < levels_; ++m) sum += at(m, arm, ctx);
  for (int m = 0; m < levels_; ++m) score += rates[m] * at(m, arm, ctx) / sum;
  return score;
}

MabController::MabController(const ScenarioConfig& cfg, std::uint64_t seed, MabOptions opts)
    : cfg_(cfg),
      opts_(opts),
      u_(cfg.n_ues()),
      k_(cfg.n_codebooks()),
      m_(cfg.n_mcs()),
      relay_(cfg.n_mcs() + 1, cfg.n_ues(), cfg.n_ues()),
      cb_(cfg.n_mcs() + 1, cfg.n_codebooks(), cfg.n_ues()),
      init_needed_(cfg.mab_init_n),
      rng_(seed) {
  if (opts_.fixed_cb < 0 || opts_.fixed_cb > k_)
    throw std::invalid_argument("MabController: fixed_cb out of range");
  rates_.resize(m_ + 1, 0.0);
  for (int m = 0; m < m_; ++m) rates_[m + 1] = cfg_.mcs_table[m].rate_bps;
  stats_.d_hat.assign(u_, 0.0);
  stats_.n_rx.assign(u_, 0);
  stats_.z_hat.assign(u_, 0.0);
  templates_ = allowed_templates();
  template_visits_.assign(action_space_size(u_, k_), 0);
}

std::vector<int> MabController::allowed_templates() const {
  std::vector<int> out;
  const int total = action_space_size(u_, k_);
  for (int idx = 0; idx < total; ++idx) {
    Action a = decode_action(idx, u_, k_);
    if (opts_.no_relay && a.main_rx != a.main_dest) continue;
    if (opts_.no_track && a.track) continue;
    if (opts_.fixed_cb > 0 && a.cb != opts_.fixed_cb) continue;
    out.push_back(idx);
  }
  return out;
}

bool MabController::in_init_phase() const {
  if (opts_.frozen) return false;
  for (int idx : templates_)
    if (template_visits_[idx] < init_needed_) return true;
  return false;
}

int MabController::schedule_dest(const ObservableState& s) const {
  int best = -1;
  double best_w = -1.0;
  for (int u = 1; u <= u_; ++u) {
    if (s.b_d2d[u - 1]) continue;
    double w = static_cast<double>(s.q[u - 1]) * std::max(stats_.d_hat[u - 1], 1e-12);
    if (w > best_w) {
      best_w = w;
      best = u;
    }
  }
  if (best < 0) best = 1;  // all UEs busy on D2D cannot happen with U>=3
  return best;
}

int MabController::select_relay(int dest, const ObservableState& s) {
  if (opts_.no_relay) return dest;
  int best = dest;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int r = 1; r <= u_; ++r) {
    if (s.b_d2d[r - 1]) continue;
    // The two-slot cost of relaying is already priced into the posterior:
    // delayed second-hop updates are randomized with half the effective
    // coefficient, so scores are comparable across direct and relay arms.
    double score = opts_.frozen ? relay_.mean_score(r - 1, dest - 1, rates_)
                                : relay_.sample_score(r - 1, dest - 1, rates_, rng_);
    if (score > best_score) {
      best_score = score;
      best = r;
    }
  }
  return best;
}

int MabController::select_codebook(int rx) {
  if (opts_.fixed_cb > 0) return opts_.fixed_cb;
  int best = 1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int k = 1; k <= k_; ++k) {
    double score = opts_.frozen ? cb_.mean_score(k - 1, rx - 1, rates_)
                                : cb_.sample_score(k - 1, rx - 1, rates_, rng_);
    if (score > best_score) {
      best_score = score;
      best = k;
    }
  }
  return best;
}

int MabController::decide_tracking(const ObservableState& s, int dest, int rx) const {
  if (opts_.no_track || dest != rx) return 0;
  // Predict next-slot backlogs and keep the beam only if the same user
  // would win the weight comparison again.
  int best = -1;
  double best_w = -1.0;
  for (int u = 1; u <= u_; ++u) {
    double q_next = static_cast<double>(s.q[u - 1]);
    if (u == rx) q_next = std::max(q_next - stats_.d_hat[u - 1], 0.0);
    q_next += stats_.z_hat[u - 1];
    double w = q_next * std::max(stats_.d_hat[u - 1], 1e-12);
    if (w > best_w) {
      best_w = w;
      best = u;
    }
  }
  return (best == rx && best_w > 0.0) ? 1 : 0;
}

Action MabController::act(const ObservableState& s) {
  const bool forced_track = prev_action_ && prev_action_->track == 1;
  Action a{};
  if (forced_track) {
    const int tracked = prev_action_->main_rx;
    a.main_dest = tracked;
    a.main_rx = tracked;
    a.cb = select_codebook(tracked);
    // While estimates are still being seeded, never chain tracking slots:
    // the weight comparison is meaningless with unobserved users at zero.
    a.track = in_init_phase() ? 0 : decide_tracking(s, tracked, tracked);
  } else if (in_init_phase()) {
    long best_visits = std::numeric_limits<long>::max();
    std::vector<int> candidates;
    for (int idx : templates_) {
      Action cand = decode_action(idx, u_, k_);
      if (!action_feasible(cand, s)) continue;
      if (template_visits_[idx] < best_visits) {
        best_visits = template_visits_[idx];
        candidates.clear();
      }
      if (template_visits_[idx] == best_visits) candidates.push_back(idx);
    }
    if (candidates.empty()) throw std::logic_error("MabController: no feasible template");
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    a = decode_action(candidates[pick(rng_)], u_, k_);
  } else {
    a.main_dest = schedule_dest(s);
    a.main_rx = select_relay(a.main_dest, s);
    a.cb = select_codebook(a.main_rx);
    a.track = decide_tracking(s, a.main_dest, a.main_rx);
  }
  if (!action_feasible(a, s))
    throw std::logic_error("MabController: produced infeasible action");
  if (!opts_.frozen) template_visits_[encode_action(a, u_, k_)]++;
  return a;
}

void MabController::update_service_estimate(const Action& a, const SlotResult& res) {
  const bool relayed = a.main_dest != a.main_rx;
  // Receive event on the main hop.
  {
    const int u = a.main_rx;
    double sample = static_cast<double>(res.main.packets);
    if (relayed) sample *= 0.5;
    const long n = stats_.n_rx[u - 1];
    stats_.d_hat[u - 1] = (stats_.d_hat[u - 1] * n + sample) / (n + 1);
    stats_.n_rx[u - 1] = n + 1;
  }
  // Receive event on a completed device-to-device leg.
  if (res.d2d) {
    const int u = res.d2d_rx;
    const double sample = 0.5 * static_cast<double>(res.d2d->packets);
    const long n = stats_.n_rx[u - 1];
    stats_.d_hat[u - 1] = (stats_.d_hat[u - 1] * n + sample) / (n + 1);
    stats_.n_rx[u - 1] = n + 1;
  }
  // Arrival-rate running means.
  const long t = stats_.slots;
  for (int u = 0; u < u_; ++u)
    stats_.z_hat[u] = (stats_.z_hat[u] * t + res.arrivals[u]) / (t + 1);
  stats_.slots = t + 1;
}

void MabController::posterior_update(const Action& a, const SlotResult& res) {
  std::bernoulli_distribution keep_main(std::clamp(res.main.eff_coeff, 0.0, 1.0));
  const int m_main = keep_main(rng_) ? res.main.mcs : 0;
  const bool relayed = a.main_dest != a.main_rx;

  cb_.at(m_main, a.cb - 1, a.main_rx - 1) += 1.0;

  if (!relayed) relay_.at(m_main, a.main_rx - 1, a.main_dest - 1) += 1.0;

  if (res.d2d && prev_main_valid_) {
    // End-to-end payoff of the relay arm is capped by the slower hop; the
    // second-hop observation arrives one slot late, and the two-slot cost
    // halves the effective coefficient entering the randomization.
    int m_slow = res.d2d->mcs;
    double c_slow = res.d2d->eff_coeff;
    if (rates_[prev_main_mcs_] <= rates_[m_slow]) {
      m_slow = prev_main_mcs_;
      c_slow = prev_main_ceff_;
    }
    std::bernoulli_distribution keep(std::clamp(0.5 * c_slow, 0.0, 1.0));
    relay_.at(keep(rng_) ? m_slow : 0, res.d2d_tx - 1, res.d2d_rx - 1) += 1.0;
  }
}

void MabController::learn(const ObservableState& s, const Action& a, const SlotResult& res) {
  (void)s;
  if (!opts_.frozen) {
    posterior_update(a, res);
    update_service_estimate(a, res);
  }
  // Slot bookkeeping must continue even when frozen: the environment's
  // tracking/D2D constraints derive from the action actually taken.
  prev_main_valid_ = a.main_dest != a.main_rx;
  prev_main_mcs_ = res.main.mcs;
  prev_main_ceff_ = res.main.eff_coeff;
  prev_action_ = a;
}

void MabController::save(std::ostream& out) const {
  write_u32(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(u_));
  write_u32(out, static_cast<std::uint32_t>(k_));
  write_u32(out, static_cast<std::uint32_t>(m_));
  write_f64v(out, relay_.raw());
  write_f64v(out, cb_.raw());
  write_f64v(out, stats_.d_hat);
  write_i64v(out, stats_.n_rx);
  write_f64v(out, stats_.z_hat);
  write_u32(out, static_cast<std::uint32_t>(stats_.slots));
  write_i64v(out, template_visits_);
  write_u32(out, prev_action_ ? 1u : 0u);
  if (prev_action_) {
    write_u32(out, static_cast<std::uint32_t>(prev_action_->main_dest));
    write_u32(out, static_cast<std::uint32_t>(prev_action_->main_rx));
    write_u32(out, static_cast<std::uint32_t>(prev_action_->cb));
    write_u32(out, static_cast<std::uint32_t>(prev_action_->track));
  }
  write_u32(out, prev_main_valid_ ? 1u : 0u);
  write_u32(out, static_cast<std::uint32_t>(prev_main_mcs_));
  write_f64v(out, {prev_main_ceff_});
  if (!out) throw std::runtime_error("controller checkpoint: write failed");
}

void MabController::load(std::istream& in) {
  if (read_u32(in) != kMagic) throw std::runtime_error("controller checkpoint: bad magic");
  if (read_u32(in) != kVersion) throw std::runtime_error("controller checkpoint: bad version");
  if (read_u32(in) != static_cast<std::uint32_t>(u_) ||
      read_u32(in) != static_cast<std::uint32_t>(k_) ||
      read_u32(in) != static_cast<std::uint32_t>(m_))
    throw std::runtime_error("controller checkpoint: dimension mismatch");
  relay_.raw() = read_f64v(in);
  cb_.raw() = read_f64v(in);
  stats_.d_hat = read_f64v(in);
  stats_.n_rx = read_i64v(in);
  stats_.z_hat = read_f64v(in);
  stats_.slots = read_u32(in);
  template_visits_ = read_i64v(in);
  if (read_u32(in)) {
    Action a{};
    a.main_dest = static_cast<int>(read_u32(in));
    a.main_rx = static_cast<int>(read_u32(in));
    a.cb = static_cast<int>(read_u32(in));
    a.track = static_cast<int>(read_u32(in));
    prev_action_ = a;
  } else {
    prev_action_.reset();
  }
  prev_main_valid_ = read_u32(in) != 0;
  prev_main_mcs_ = static_cast<int>(read_u32(in));
  prev_main_ceff_ = read_f64v(in).at(0);
}

void MabController::save_file(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  save(f);
}

void MabController::load_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint for reading: " + path);
  load(f);
}

}  // namespace mmw
