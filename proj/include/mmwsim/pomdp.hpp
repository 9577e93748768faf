#pragma once

#include <vector>

namespace mmw {

/// POMDP observation quadruple.
struct ObservableState {
  std::vector<long> q;
  std::vector<bool> b_d2d;
  std::vector<bool> b_track;
  std::vector<long> l_block;
};

/// Controller action. All ids are 1-based; track=1 requires dest == rx.
struct Action {
  int main_dest;
  int main_rx;
  int cb;
  int track;
};

struct ScaledObservation {
  std::vector<double> q_scaled;
  std::vector<double> b_d2d;
  std::vector<double> b_track;
  std::vector<double> p_block;

  std::vector<double> flat() const;
};

/// Reward normalizer: N_p(x) packets correspond to an x-Gbps link filling
/// one slot.
struct RewardScaler {
  double n_p;
  RewardScaler(double x_gbps, double t_slot_s, long pkg_bits)
      : n_p(x_gbps * 1e9 * t_slot_s / static_cast<double>(pkg_bits)) {}
};

int action_space_size(int n_ues, int n_codebooks);
int encode_action(const Action& a, int n_ues, int n_codebooks);
Action decode_action(int index, int n_ues, int n_codebooks);

/// True entries are the feasible action indices given D2D and tracking
/// constraints. Never all-false.
std::vector<char> feasibility_mask(const ObservableState& s, int n_ues, int n_codebooks);
bool action_feasible(const Action& a, const ObservableState& s);

double reward(const std::vector<long>& departures, const RewardScaler& scaler);
ScaledObservation scale_observation(const ObservableState& s, int n_block_tilde);

}  // namespace mmw
