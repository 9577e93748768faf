#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mmwsim/config.hpp"
#include "mmwsim/env.hpp"
#include "mmwsim/pomdp.hpp"

using namespace mmw;

namespace {
constexpr double kPi = 3.14159265358979323846;

ScenarioConfig reference() { return ScenarioConfig{}; }

// Serve the longest queue directly with a mid-size codebook; always feasible
// because it never starts D2D or tracking.
Action longest_queue_action(const ObservableState& s) {
  int best = 1;
  for (int u = 2; u <= static_cast<int>(s.q.size()); ++u)
    if (s.q[u - 1] > s.q[best - 1]) best = u;
  return Action{best, best, 3, 0};
}
}  // namespace

TEST_CASE("LOS path loss at 10 m, 60 GHz") {
  CHECK(path_loss_los_db(10.0, 60.0) == doctest::Approx(85.563).epsilon(1e-4));
}

TEST_CASE("antenna gains for 64- and 24-beam codebooks") {
  double b_ele = 75.0 * kPi / 180.0;
  CHECK(antenna_gain_dbi(2 * kPi / 64, b_ele) == doctest::Approx(17.68).epsilon(1e-3));
  CHECK(antenna_gain_dbi(2 * kPi / 24, b_ele) == doctest::Approx(13.42).epsilon(1e-3));
}

TEST_CASE("noise power matches the reference scenario") {
  CHECK(reference().noise_power_dbm() == doctest::Approx(-70.655).epsilon(1e-3));
}

TEST_CASE("link budget chains to -49.46 dBm and 21.19 dB SNR") {
  double b_ele = 75.0 * kPi / 180.0;
  double rss = 15.0 + antenna_gain_dbi(2 * kPi / 64, b_ele) +
               antenna_gain_dbi(2 * kPi / 24, b_ele) - path_loss_los_db(10.0, 60.0) - 10.0;
  CHECK(rss == doctest::Approx(-49.46).epsilon(1e-3));
  CHECK(rss - reference().noise_power_dbm() == doctest::Approx(21.19).epsilon(1e-3));
}

TEST_CASE("effective coefficients reproduce the hand table") {
  SlotTiming timing{10e-3, 10e-6};
  const std::vector<int> beams = {24, 32, 64, 128, 256, 512};
  const std::vector<double> normal = {0.964, 0.952, 0.904, 0.808, 0.616, 0.232};
  const std::vector<double> track = {0.996, 0.994, 0.988, 0.978, 0.956, 0.914};
  for (std::size_t k = 0; k < beams.size(); ++k) {
    double cn = effective_coefficient_normal(beams[k], 24, 4, 4, timing);
    double ct = effective_coefficient_track(beams[k], 24, kPi / 6, timing);
    CHECK(cn == doctest::Approx(normal[k]).epsilon(1e-12));
    CHECK(ct == doctest::Approx(track[k]).epsilon(1e-12));
    CHECK(ct >= cn);
    CHECK(cn > 0.0);
    CHECK(ct <= 1.0);
  }
  CHECK(effective_coefficient_normal(64, 24, 4, 4, SlotTiming{10e-3, 0.0}) == 1.0);
}

TEST_CASE("tracking subset sizes") {
  CHECK(tracking_subset_size(kPi / 6, 64) == 6);
  CHECK(tracking_subset_size(kPi / 6, 24) == 2);
  CHECK(tracking_subset_size(kPi / 6, 512) == 43);
}

TEST_CASE("MCS selection agrees with a brute-force scan") {
  auto table = reference().mcs_table;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> rss(-80.0, -30.0);
  for (int i = 0; i < 2000; ++i) {
    double x = rss(rng);
    int m = select_mcs(x, table);
    int expect = 0;
    for (int r = 0; r < static_cast<int>(table.size()); ++r)
      if (x >= table[r].min_rss_dbm) expect = r + 1;
    CHECK(m == expect);
  }
  CHECK(select_mcs(-1e9, table) == 0);
}

TEST_CASE("blockage chain countdown and degenerate entry laws") {
  std::mt19937_64 rng(2);
  BlockageChain c;
  c.p = {0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0};
  c.H = 3;
  CHECK(step_blockage(c, 10, 30, rng));
  CHECK(c.H == 2);

  BlockageChain never;
  never.p = {1.0, 0, 0, 0, 0, 0, 0};
  for (int i = 0; i < 1000; ++i) {
    CHECK_FALSE(step_blockage(never, 10, 30, rng));
    CHECK(never.H == 0);
  }
}

TEST_CASE("blockage chains hit their stationary blocked fractions") {
  auto run = [](double p_each) {
    std::mt19937_64 rng(3);
    BlockageChain c;
    c.p.assign(7, 0.0);
    double leave = 0;
    for (int n = 2; n <= 6; ++n) {
      c.p[n] = p_each;
      leave += p_each;
    }
    c.p[0] = 1.0 - leave;
    long blocked = 0, total = 1000000;
    for (long t = 0; t < total; ++t)
      if (step_blockage(c, 10, 30, rng)) ++blocked;
    return static_cast<double>(blocked) / total;
  };
  CHECK(run(0.1) == doctest::Approx(0.8).epsilon(0.025));
  CHECK(run(0.0026) == doctest::Approx(0.05).epsilon(0.4));  // 0.05 +- 0.02 abs
  CHECK(std::abs(run(0.0026) - 0.05) < 0.02);
}

TEST_CASE("mobility: static device stays put, 10 m/s moves 0.1 m per slot") {
  SlotTiming timing{10e-3, 10e-6};
  std::mt19937_64 rng(4);
  MobilityState m;
  m.px = m.cx = 1.0;
  m.py = m.cy = 2.0;
  m.speed = 0;
  m.rot_rate = 0;
  m.orientation = 0.7;
  m.r_move = 100.0;
  m.slots_since_refresh = 0;
  step_mobility(m, timing, 0, 0, 0, 0, 1000, rng);
  CHECK(m.px == 1.0);
  CHECK(m.py == 2.0);
  CHECK(m.orientation == 0.7);
  CHECK(m.slots_since_refresh == 1);

  m.speed = 10.0;
  m.heading = 0.0;
  step_mobility(m, timing, 0, 10, 0, 0, 1000, rng);
  CHECK(m.px == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(m.py == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("outage coefficient limits and beamwidth monotonicity") {
  std::mt19937_64 rng(5);
  CHECK(outage_coefficient(0.1, 0.1, 0.0, 0.0, 9e-3, rng) == 0.0);
  CHECK(outage_coefficient(0.1, 0.1, 1e9, 1e9, 9e-3, rng) == doctest::Approx(1.0).epsilon(1e-6));
  for (int i = 0; i < 200; ++i) {
    std::mt19937_64 a(100 + i), b(100 + i);  // identical residual draws
    double omega = 0.05 + 0.01 * i;
    double narrow = outage_coefficient(0.02, 0.02, omega, omega, 9e-3, a);
    double wide = outage_coefficient(0.2, 0.2, omega, omega, 9e-3, b);
    CHECK(narrow >= wide);
  }
}

TEST_CASE("per-slot queue recursion, conservation and capacity law") {
  ScenarioConfig cfg = reference();
  Environment env(cfg, 42);
  int u_n = env.n_ues();
  for (int t = 0; t < 3000; ++t) {
    ObservableState before = env.observe();
    Action a = longest_queue_action(before);
    SlotResult res = env.execute_slot(a);
    ObservableState after = env.observe();
    for (int u = 0; u < u_n; ++u) {
      // q[t+1] = {q[t] - d[t]}^+ + z[t]; departures never exceed the backlog.
      CHECK(res.delivered[u] <= before.q[u]);
      CHECK(after.q[u] == before.q[u] - res.delivered[u] + res.arrivals[u]);
    }
    long cap = static_cast<long>(
        std::floor(res.main.rate_bps * res.main.eff_coeff * cfg.t_slot_s / cfg.pkg_bits));
    CHECK(res.main.packets == cap);
    for (const auto& [delay, count] : res.delay_counts) {
      CHECK(delay >= 1);
      CHECK(count > 0);
    }
  }
  for (int u = 1; u <= u_n; ++u)
    CHECK(env.total_arrived(u) == env.total_delivered(u) + env.queue_len(u));
}

TEST_CASE("relay slot defers departures to the D2D completion") {
  ScenarioConfig cfg = reference();
  Environment env(cfg, 7);
  // Build up queues first.
  for (int t = 0; t < 50; ++t) env.execute_slot(Action{1, 1, 1, 0});

  ObservableState s = env.observe();
  REQUIRE(s.q[2] > 0);
  long q3_before = s.q[2];
  SlotResult relay_slot = env.execute_slot(Action{3, 4, 3, 0});  // dest 3 via relay 4
  CHECK(relay_slot.delivered[2] == 0);  // nothing departs on the relay hop
  long staged = env.pending_relay_packets();
  CHECK(staged <= std::min(relay_slot.main.packets, q3_before));

  ObservableState s2 = env.observe();
  CHECK(s2.b_d2d[2]);
  CHECK(s2.b_d2d[3]);
  SlotResult d2d_slot = env.execute_slot(Action{1, 1, 3, 0});
  REQUIRE(d2d_slot.d2d.has_value());
  CHECK(d2d_slot.d2d_rx == 3);
  CHECK(d2d_slot.d2d_tx == 4);
  CHECK(d2d_slot.delivered[2] == std::min(staged, d2d_slot.d2d->packets));
}

TEST_CASE("tracking flag lands exactly on the scheduled receiver") {
  Environment env(reference(), 8);
  env.execute_slot(Action{2, 2, 4, 1});
  ObservableState s = env.observe();
  int trues = 0;
  for (int u = 0; u < env.n_ues(); ++u)
    if (s.b_track[u]) ++trues;
  CHECK(trues == 1);
  CHECK(s.b_track[1]);
}

TEST_CASE("infeasible and out-of-range actions are rejected") {
  Environment env(reference(), 9);
  CHECK_THROWS_AS(env.execute_slot(Action{0, 1, 1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(env.execute_slot(Action{1, 2, 1, 1}), std::invalid_argument);  // track relay
  env.execute_slot(Action{3, 4, 3, 0});  // D2D pair {3,4} now active
  CHECK_THROWS_AS(env.execute_slot(Action{3, 3, 1, 0}), std::invalid_argument);
}

TEST_CASE("zero offered load produces no arrivals") {
  ScenarioConfig cfg = reference();
  cfg.total_traffic_gbps = 0.0;
  Environment env(cfg, 10);
  for (int t = 0; t < 200; ++t) {
    SlotResult res = env.execute_slot(Action{1, 1, 1, 0});
    for (long z : res.arrivals) CHECK(z == 0);
  }
}

TEST_CASE("arrival rates match the traffic split") {
  ScenarioConfig cfg = reference();
  CHECK(cfg.lambda_total() == doctest::Approx(540.6574).epsilon(1e-4));
  CHECK(cfg.lambda_ue(1) == doctest::Approx(3.0 / 7 * 540.6574).epsilon(1e-4));
  Environment env(cfg, 11);
  std::vector<long> sum(cfg.n_ues(), 0);
  const int slots = 20000;
  for (int t = 0; t < slots; ++t) {
    SlotResult res = env.execute_slot(Action{1, 1, 1, 0});
    for (int u = 0; u < cfg.n_ues(); ++u) sum[u] += res.arrivals[u];
  }
  for (int u = 0; u < cfg.n_ues(); ++u)
    CHECK(static_cast<double>(sum[u]) / slots ==
          doctest::Approx(cfg.lambda_ue(u)).epsilon(0.03));
}

TEST_CASE("slot execution is reproducible under a fixed seed") {
  ScenarioConfig cfg = reference();
  Environment a(cfg, 123), b(cfg, 123);
  for (int t = 0; t < 1000; ++t) {
    Action act = longest_queue_action(a.observe());
    SlotResult ra = a.execute_slot(act);
    SlotResult rb = b.execute_slot(act);
    CHECK(ra.main.rss_dbm == rb.main.rss_dbm);
    CHECK(ra.delivered == rb.delivered);
    CHECK(ra.arrivals == rb.arrivals);
  }
}
