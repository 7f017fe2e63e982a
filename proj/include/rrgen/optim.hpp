#pragma once

#include <cstdint>
#include <vector>

#include "rrgen/tensor.hpp"

namespace rrgen {

// Deterministic generator with hand-rolled gaussian so checkpoints are
// byte-identical across standard library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  uint64_t next_u64();
  double uniform();                       // [0,1)
  double gaussian();                      // Box-Muller
  size_t uniform_int(size_t n);           // [0,n)
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_int(i)]);
  }

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct SgdConfig {
  double learn_rate = 1e-2;
  double max_grad_norm = 1.0;
  double weight_decay = 0.0;
};

// Global-norm clipping, then p <- p - lr * (g + wd * p).
// Throws std::runtime_error naming the parameter on non-finite gradients.
void sgd_step(std::vector<Parameter>& params, const SgdConfig& cfg);

void zero_grads(std::vector<Parameter>& params);

// Linear warmup over warmup_frac of total_steps, then linear decay to zero.
double lr_at_step(double base_lr, size_t step, size_t total_steps, double warmup_frac);

}  // namespace rrgen
