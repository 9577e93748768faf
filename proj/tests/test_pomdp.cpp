#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "mmwsim/pomdp.hpp"

using namespace mmw;

namespace {
ObservableState blank_state(int u) {
  ObservableState s;
  s.q.assign(u, 0);
  s.b_d2d.assign(u, false);
  s.b_track.assign(u, false);
  s.l_block.assign(u, 1000);
  return s;
}
}  // namespace

TEST_CASE("action space size and encode/decode bijection") {
  CHECK(action_space_size(5, 6) == 180);
  for (int i = 0; i < 180; ++i) {
    Action a = decode_action(i, 5, 6);
    CHECK(encode_action(a, 5, 6) == i);
    if (a.track == 1) CHECK(a.main_dest == a.main_rx);
  }
  Action first = decode_action(0, 5, 6);
  CHECK(first.main_dest == 1);
  CHECK(first.main_rx == 1);
  CHECK(first.cb == 1);
  CHECK(first.track == 0);
  CHECK_THROWS_AS(decode_action(180, 5, 6), std::invalid_argument);
  CHECK_THROWS_AS(encode_action(Action{1, 2, 1, 1}, 5, 6), std::invalid_argument);
}

TEST_CASE("unconstrained mask is all-true") {
  auto mask = feasibility_mask(blank_state(5), 5, 6);
  CHECK(static_cast<int>(mask.size()) == 180);
  int count = 0;
  for (char m : mask) count += m;
  CHECK(count == 180);
}

TEST_CASE("active D2D pair {2,4} leaves 54 + 18 feasible actions") {
  ObservableState s = blank_state(5);
  s.b_d2d[1] = true;
  s.b_d2d[3] = true;
  auto mask = feasibility_mask(s, 5, 6);
  int track0 = 0, track1 = 0;
  for (int i = 0; i < 180; ++i) {
    if (!mask[i]) continue;
    Action a = decode_action(i, 5, 6);
    CHECK(a.main_dest != 2);
    CHECK(a.main_dest != 4);
    CHECK(a.main_rx != 2);
    CHECK(a.main_rx != 4);
    (a.track == 0 ? track0 : track1)++;
  }
  CHECK(track0 == 54);
  CHECK(track1 == 18);
}

TEST_CASE("forced tracking restricts to the tracked UE") {
  ObservableState s = blank_state(5);
  s.b_track[2] = true;
  auto mask = feasibility_mask(s, 5, 6);
  int count = 0;
  for (int i = 0; i < 180; ++i) {
    if (!mask[i]) continue;
    Action a = decode_action(i, 5, 6);
    CHECK(a.main_dest == 3);
    CHECK(a.main_rx == 3);
    ++count;
  }
  CHECK(count == 12);  // codebook and track stay free choices
}

TEST_CASE("masked actions always pass the feasibility check") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    ObservableState s = blank_state(5);
    int kind = static_cast<int>(rng() % 3);
    if (kind == 1) {
      int a = static_cast<int>(rng() % 5), b = static_cast<int>(rng() % 5);
      if (a != b) {
        s.b_d2d[a] = true;
        s.b_d2d[b] = true;
      }
    } else if (kind == 2) {
      s.b_track[rng() % 5] = true;
    }
    auto mask = feasibility_mask(s, 5, 6);
    for (int i = 0; i < 180; ++i)
      if (mask[i]) CHECK(action_feasible(decode_action(i, 5, 6), s));
  }
}

TEST_CASE("reward normalizer and scaled reward") {
  RewardScaler sc(2.0, 10e-3, 18496);
  CHECK(sc.n_p == doctest::Approx(1081.31).epsilon(1e-4));
  CHECK(reward({0, 0, 0, 0, 0}, sc) == 0.0);
  CHECK(reward({100, 200, 140, 50, 50}, sc) == doctest::Approx(540.0 / sc.n_p).epsilon(1e-12));
  CHECK(reward({100, 200, 140, 50, 50}, sc) == doctest::Approx(0.4994).epsilon(1e-3));
  // Depends only on the sum, not on which UE received the packets.
  CHECK(reward({540, 0, 0, 0, 0}, sc) == reward({0, 0, 0, 0, 540}, sc));
  CHECK_THROWS_AS(reward({-1, 0, 0, 0, 0}, sc), std::invalid_argument);
}

TEST_CASE("observation scaling") {
  ObservableState s = blank_state(5);
  s.q = {10, 5, 0, 0, 0};
  s.l_block = {3, 25, 0, 10, 11};
  ScaledObservation o = scale_observation(s, 10);
  CHECK(o.q_scaled == std::vector<double>{1.0, 0.5, 0.0, 0.0, 0.0});
  CHECK(o.p_block[0] == doctest::Approx(7.0 / 11).epsilon(1e-12));
  CHECK(o.p_block[1] == 0.0);  // clamp floor
  CHECK(o.p_block[2] == doctest::Approx(10.0 / 11).epsilon(1e-12));
  CHECK(o.p_block[3] == 0.0);
  CHECK(o.p_block[4] == 0.0);

  ObservableState zero = blank_state(5);
  ScaledObservation oz = scale_observation(zero, 10);
  for (double v : oz.q_scaled) CHECK(v == 0.0);

  auto flat = o.flat();
  CHECK(flat.size() == 20);
  CHECK(flat[0] == 1.0);
  CHECK(flat[15] == doctest::Approx(7.0 / 11).epsilon(1e-12));
}
