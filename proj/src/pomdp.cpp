#include "mmwsim/pomdp.hpp"

#include <algorithm>
#include <stdexcept>

namespace mmw {

std::vector<double> ScaledObservation::flat() const {
  std::vector<double> out;
  out.reserve(q_scaled.size() * 4);
  out.insert(out.end(), q_scaled.begin(), q_scaled.end());
  out.insert(out.end(), b_d2d.begin(), b_d2d.end());
  out.insert(out.end(), b_track.begin(), b_track.end());
  out.insert(out.end(), p_block.begin(), p_block.end());
  return out;
}

int action_space_size(int n_ues, int n_codebooks) {
  return n_ues * n_ues * n_codebooks + n_ues * n_codebooks;
}

int encode_action(const Action& a, int n_ues, int n_codebooks) {
  if (a.main_dest < 1 || a.main_dest > n_ues || a.main_rx < 1 || a.main_rx > n_ues ||
      a.cb < 1 || a.cb > n_codebooks || (a.track != 0 && a.track != 1))
    throw std::invalid_argument("action fields out of range");
  if (a.track == 1 && a.main_dest != a.main_rx)
    throw std::invalid_argument("tracking a relay is not allowed");
  if (a.track == 0)
    return ((a.main_dest - 1) * n_ues + (a.main_rx - 1)) * n_codebooks + (a.cb - 1);
  return n_ues * n_ues * n_codebooks + (a.main_dest - 1) * n_codebooks + (a.cb - 1);
}

Action decode_action(int index, int n_ues, int n_codebooks) {
  const int base = n_ues * n_ues * n_codebooks;
  if (index < 0 || index >= action_space_size(n_ues, n_codebooks))
    throw std::invalid_argument("action index out of range");
  if (index < base) {
    int cb = index % n_codebooks;
    int rest = index / n_codebooks;
    return Action{rest / n_ues + 1, rest % n_ues + 1, cb + 1, 0};
  }
  int i = index - base;
  int dest = i / n_codebooks + 1;
  return Action{dest, dest, i % n_codebooks + 1, 1};
}

bool action_feasible(const Action& a, const ObservableState& s) {
  if (a.track == 1 && a.main_dest != a.main_rx) return false;
  if (s.b_d2d[a.main_dest - 1] || s.b_d2d[a.main_rx - 1]) return false;
  for (std::size_t u = 0; u < s.b_track.size(); ++u) {
    if (s.b_track[u]) {
      int id = static_cast<int>(u) + 1;
      if (a.main_dest != id || a.main_rx != id) return false;
    }
  }
  return true;
}

std::vector<char> feasibility_mask(const ObservableState& s, int n_ues, int n_codebooks) {
  const int n = action_space_size(n_ues, n_codebooks);
  std::vector<char> mask(n, 0);
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (action_feasible(decode_action(i, n_ues, n_codebooks), s)) {
      mask[i] = 1;
      ++count;
    }
  }
  if (count == 0) throw std::logic_error("feasibility mask is all-false");
  return mask;
}

double reward(const std::vector<long>& departures, const RewardScaler& scaler) {
  long sum = 0;
  for (long d : departures) {
    if (d < 0) throw std::invalid_argument("negative departure count");
    sum += d;
  }
  return static_cast<double>(sum) / scaler.n_p;
}

ScaledObservation scale_observation(const ObservableState& s, int n_block_tilde) {
  ScaledObservation out;
  const std::size_t u = s.q.size();
  out.q_scaled.resize(u, 0.0);
  long qmax = *std::max_element(s.q.begin(), s.q.end());
  if (qmax > 0)
    for (std::size_t i = 0; i < u; ++i)
      out.q_scaled[i] = static_cast<double>(s.q[i]) / static_cast<double>(qmax);
  out.b_d2d.resize(u);
  out.b_track.resize(u);
  out.p_block.resize(u);
  for (std::size_t i = 0; i < u; ++i) {
    out.b_d2d[i] = s.b_d2d[i] ? 1.0 : 0.0;
    out.b_track[i] = s.b_track[i] ? 1.0 : 0.0;
    double p = (static_cast<double>(n_block_tilde) - static_cast<double>(s.l_block[i])) /
               (static_cast<double>(n_block_tilde) + 1.0);
    out.p_block[i] = std::max(p, 0.0);
  }
  return out;
}

}  // namespace mmw
