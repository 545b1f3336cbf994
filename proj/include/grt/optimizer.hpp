#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "grt/param_store.hpp"

namespace grt {

struct OptimConfig {
  double lr0 = 0.05;
  double momentum = 0.9;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double lr_min = 0.0;
};

// Epoch-granular cosine annealing, no restarts.
inline double cosine_lr(std::size_t epoch, const OptimConfig& cfg) {
  const double t = static_cast<double>(epoch) / static_cast<double>(cfg.epochs);
  return cfg.lr_min +
         0.5 * (cfg.lr0 - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

// Classical SGD with momentum: v <- mu*v + g; p <- p - lr*v.
template <typename T>
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum) : momentum_(momentum) {}

  void step(ParamStore<T>& store, double lr) {
    for (auto& [name, p] : store) {
      auto [it, inserted] =
          velocity_.try_emplace(name, ValueGrid<T>::zeros(p.value.shape));
      auto& v = it->second;
      for (std::size_t i = 0; i < p.value.numel(); ++i) {
        v.data[i] = static_cast<T>(momentum_) * v.data[i] + p.grad.data[i];
        p.value.data[i] -= static_cast<T>(lr) * v.data[i];
      }
    }
  }

  void reset() { velocity_.clear(); }

 private:
  double momentum_;
  std::map<std::string, ValueGrid<T>> velocity_;
};

}  // namespace grt
