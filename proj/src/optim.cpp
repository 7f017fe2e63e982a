#include "rrgen/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace rrgen {

uint64_t Rng::next_u64() {
  // splitmix64
  state_ += 0x9e3779b97f4a7c15ull;
  uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform(), u2 = uniform();
  while (u1 <= 1e-300) u1 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

size_t Rng::uniform_int(size_t n) {
  return n == 0 ? 0 : static_cast<size_t>(next_u64() % n);
}

void sgd_step(std::vector<Parameter>& params, const SgdConfig& cfg) {
  double sq = 0.0;
  for (auto& p : params) {
    for (double g : p.tensor.grad_ref()) {
      if (!std::isfinite(g))
        throw std::runtime_error("sgd_step: non-finite gradient in parameter '" +
                                 p.name + "'");
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  const double clip = (cfg.max_grad_norm > 0.0 && norm > cfg.max_grad_norm)
                          ? cfg.max_grad_norm / norm
                          : 1.0;
  for (auto& p : params) {
    auto& v = p.tensor.value();
    auto& g = p.tensor.grad_ref();
    for (size_t i = 0; i < v.size(); ++i)
      v[i] -= cfg.learn_rate * (g[i] * clip + cfg.weight_decay * v[i]);
  }
}

void zero_grads(std::vector<Parameter>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

double lr_at_step(double base_lr, size_t step, size_t total_steps, double warmup_frac) {
  if (total_steps == 0) return base_lr;
  const double warm = warmup_frac * static_cast<double>(total_steps);
  const double s = static_cast<double>(step);
  if (warm > 0.0 && s < warm) return base_lr * (s + 1.0) / warm;
  const double rest = static_cast<double>(total_steps) - warm;
  if (rest <= 0.0) return base_lr;
  return base_lr * std::max(0.0, 1.0 - (s - warm) / rest);
}

}  // namespace rrgen
