#include "mmwsim/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mmw {

namespace {
constexpr std::uint32_t kMagic = 0x4d4d5750;  // "MMWP"
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("truncated checkpoint header");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
}
}  // namespace

long MlpArch::param_count() const {
  auto trunk = [&] {
    long n = 0;
    int prev = input;
    for (int h : hidden) {
      n += static_cast<long>(prev) * h + h;
      prev = h;
    }
    return n;
  };
  int last = hidden.empty() ? input : hidden.back();
  long heads = static_cast<long>(last) * n_actions + n_actions + last + 1;
  return (shared_trunk ? trunk() : 2 * trunk()) + heads;
}

MlpNet::MlpNet(MlpArch arch) : arch_(std::move(arch)) {
  if (arch_.input < 1 || arch_.n_actions < 1)
    throw std::invalid_argument("MLP needs positive input and action dimensions");
  long off = 0;
  auto add_trunk = [&](std::vector<Layer>& t) {
    int prev = arch_.input;
    for (int h : arch_.hidden) {
      t.push_back({off, off + static_cast<long>(prev) * h, prev, h});
      off += static_cast<long>(prev) * h + h;
      prev = h;
    }
  };
  add_trunk(actor_trunk_);
  if (!arch_.shared_trunk) add_trunk(critic_trunk_);
  int last = arch_.hidden.empty() ? arch_.input : arch_.hidden.back();
  policy_head_ = {off, off + static_cast<long>(last) * arch_.n_actions, last, arch_.n_actions};
  off += static_cast<long>(last) * arch_.n_actions + arch_.n_actions;
  value_head_ = {off, off + last, last, 1};
  off += last + 1;
  w_.assign(off, 0.0);
}

void MlpNet::init_params(std::mt19937_64& rng) {
  auto init_layer = [&](const Layer& l) {
    double bound = std::sqrt(1.0 / l.in);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (long i = 0; i < static_cast<long>(l.in) * l.out; ++i) w_[l.w_off + i] = u(rng);
    for (int i = 0; i < l.out; ++i) w_[l.b_off + i] = 0.0;
  };
  for (const auto& l : actor_trunk_) init_layer(l);
  for (const auto& l : critic_trunk_) init_layer(l);
  init_layer(policy_head_);
  init_layer(value_head_);
}

void MlpNet::trunk_forward(const std::vector<Layer>& layers, const std::vector<double>& x,
                           std::vector<std::vector<double>>& h) const {
  h.resize(layers.size());
  const std::vector<double>* in = &x;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const Layer& l = layers[li];
    h[li].resize(l.out);
    for (int o = 0; o < l.out; ++o) {
      double z = w_[l.b_off + o];
      const double* row = &w_[l.w_off + static_cast<long>(o) * l.in];
      for (int i = 0; i < l.in; ++i) z += row[i] * (*in)[i];
      h[li][o] = std::tanh(z);
    }
    in = &h[li];
  }
}

void MlpNet::head_forward(const Layer& head, const std::vector<double>& h,
                          std::vector<double>& out) const {
  out.resize(head.out);
  for (int o = 0; o < head.out; ++o) {
    double z = w_[head.b_off + o];
    const double* row = &w_[head.w_off + static_cast<long>(o) * head.in];
    for (int i = 0; i < head.in; ++i) z += row[i] * h[i];
    out[o] = z;
  }
}

void MlpNet::forward(const std::vector<double>& x, std::vector<double>& logits, double& value,
                     MlpWorkspace* ws) const {
  if (static_cast<int>(x.size()) != arch_.input)
    throw std::invalid_argument("input dimension mismatch");
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite network input");

  MlpWorkspace local;
  MlpWorkspace& w = ws ? *ws : local;
  w.input = x;
  trunk_forward(actor_trunk_, x, w.h_actor);
  const auto& top_a = actor_trunk_.empty() ? x : w.h_actor.back();
  head_forward(policy_head_, top_a, logits);
  if (arch_.shared_trunk) {
    std::vector<double> v;
    head_forward(value_head_, top_a, v);
    value = v[0];
  } else {
    trunk_forward(critic_trunk_, x, w.h_critic);
    const auto& top_c = critic_trunk_.empty() ? x : w.h_critic.back();
    std::vector<double> v;
    head_forward(value_head_, top_c, v);
    value = v[0];
  }
}

void MlpNet::backward(const MlpWorkspace& ws, const std::vector<double>& dlogits, double dvalue,
                      std::vector<double>& grad) const {
  if (grad.size() != w_.size()) throw std::invalid_argument("gradient buffer size mismatch");

  auto head_backward = [&](const Layer& head, const std::vector<double>& h_in,
                           const std::vector<double>& dout, std::vector<double>& dh) {
    dh.assign(head.in, 0.0);
    for (int o = 0; o < head.out; ++o) {
      double g = dout[o];
      if (g == 0.0) continue;
      grad[head.b_off + o] += g;
      double* wrow_g = &grad[head.w_off + static_cast<long>(o) * head.in];
      const double* wrow = &w_[head.w_off + static_cast<long>(o) * head.in];
      for (int i = 0; i < head.in; ++i) {
        wrow_g[i] += g * h_in[i];
        dh[i] += g * wrow[i];
      }
    }
  };

  auto trunk_backward = [&](const std::vector<Layer>& layers,
                            const std::vector<std::vector<double>>& h,
                            std::vector<double> dtop) {
    for (int li = static_cast<int>(layers.size()) - 1; li >= 0; --li) {
      const Layer& l = layers[li];
      const auto& h_out = h[li];
      const auto& h_in = li == 0 ? ws.input : h[li - 1];
      std::vector<double> dprev(l.in, 0.0);
      for (int o = 0; o < l.out; ++o) {
        double g = dtop[o] * (1.0 - h_out[o] * h_out[o]);  // tanh'
        if (g == 0.0) continue;
        grad[l.b_off + o] += g;
        double* wrow_g = &grad[l.w_off + static_cast<long>(o) * l.in];
        const double* wrow = &w_[l.w_off + static_cast<long>(o) * l.in];
        for (int i = 0; i < l.in; ++i) {
          wrow_g[i] += g * h_in[i];
          dprev[i] += g * wrow[i];
        }
      }
      dtop = std::move(dprev);
    }
  };

  const auto& top_a = actor_trunk_.empty() ? ws.input : ws.h_actor.back();
  std::vector<double> dtop_a;
  head_backward(policy_head_, top_a, dlogits, dtop_a);
  if (arch_.shared_trunk) {
    std::vector<double> dtop_v;
    head_backward(value_head_, top_a, {dvalue}, dtop_v);
    for (std::size_t i = 0; i < dtop_a.size(); ++i) dtop_a[i] += dtop_v[i];
    trunk_backward(actor_trunk_, ws.h_actor, std::move(dtop_a));
  } else {
    trunk_backward(actor_trunk_, ws.h_actor, std::move(dtop_a));
    const auto& top_c = critic_trunk_.empty() ? ws.input : ws.h_critic.back();
    std::vector<double> dtop_v;
    head_backward(value_head_, top_c, {dvalue}, dtop_v);
    trunk_backward(critic_trunk_, ws.h_critic, std::move(dtop_v));
  }
}

void MlpNet::save(std::ostream& out) const {
  write_u32(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, arch_.shared_trunk ? 1 : 0);
  write_u32(out, static_cast<std::uint32_t>(arch_.input));
  write_u32(out, static_cast<std::uint32_t>(arch_.hidden.size()));
  for (int h : arch_.hidden) write_u32(out, static_cast<std::uint32_t>(h));
  write_u32(out, static_cast<std::uint32_t>(arch_.n_actions));
  static_assert(sizeof(double) == 8);
  out.write(reinterpret_cast<const char*>(w_.data()),
            static_cast<std::streamsize>(w_.size() * 8));
  if (!out) throw std::runtime_error("checkpoint write failed");
}

MlpNet MlpNet::load(std::istream& in) {
  if (read_u32(in) != kMagic) throw std::runtime_error("not a network checkpoint");
  if (read_u32(in) != kVersion) throw std::runtime_error("unsupported checkpoint version");
  MlpArch arch;
  arch.shared_trunk = read_u32(in) != 0;
  arch.input = static_cast<int>(read_u32(in));
  std::uint32_t nh = read_u32(in);
  for (std::uint32_t i = 0; i < nh; ++i) arch.hidden.push_back(static_cast<int>(read_u32(in)));
  arch.n_actions = static_cast<int>(read_u32(in));
  MlpNet net(arch);
  in.read(reinterpret_cast<char*>(net.w_.data()),
          static_cast<std::streamsize>(net.w_.size() * 8));
  if (!in) throw std::runtime_error("truncated checkpoint payload");
  return net;
}

void MlpNet::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  save(out);
}

MlpNet MlpNet::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint '" + path + "'");
  return load(in);
}

std::vector<double> masked_softmax(const std::vector<double>& logits,
                                   const std::vector<char>& mask) {
  if (logits.size() != mask.size()) throw std::invalid_argument("mask/logits size mismatch");
  double max_l = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i] && logits[i] > max_l) max_l = logits[i];
  if (max_l == -std::numeric_limits<double>::infinity())
    throw std::logic_error("masked_softmax: all-false mask");
  std::vector<double> p(logits.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    p[i] = std::exp(logits[i] - max_l);
    z += p[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] /= z;
  return p;
}

AdamOptimizer::AdamOptimizer(long n_params, double lr, double decay, int decay_every)
    : m_(n_params, 0.0), v_(n_params, 0.0), lr_(lr), decay_(decay), decay_every_(decay_every) {
  if (lr <= 0) throw std::invalid_argument("learning rate must be positive");
}

void AdamOptimizer::step(std::vector<double>& params, const std::vector<double>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("optimizer/parameter size mismatch");
  for (double g : grads)
    if (!std::isfinite(g)) throw std::runtime_error("non-finite gradient");
  ++steps_;
  double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
  double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grads[i];
    v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grads[i] * grads[i];
    params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + kEps);
  }
  if (decay_every_ > 0 && steps_ % decay_every_ == 0) lr_ *= decay_;
}

void AdamOptimizer::decay_now() { lr_ *= decay_; }

}  // namespace mmw
