#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "grt/rng.hpp"
#include "grt/value_grid.hpp"

namespace grt {

// Named learnable tensors plus a gradient slot per tensor. Names are
// hierarchical ("encoder1.gtb.qkv.w") and stable across runs, which is what
// checkpoints and the optimizer key on. std::map keeps iteration order
// deterministic.
template <typename T>
class ParamStore {
 public:
  struct Param {
    ValueGrid<T> value;
    ValueGrid<T> grad;
  };

  ValueGrid<T>& create(const std::string& name, std::vector<std::size_t> shape) {
    auto [it, inserted] = items_.try_emplace(
        name, Param{ValueGrid<T>::zeros(shape), ValueGrid<T>::zeros(shape)});
    if (!inserted) {
      throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    }
    return it->second.value;
  }

  bool contains(const std::string& name) const { return items_.count(name) > 0; }

  Param& at(const std::string& name) {
    auto it = items_.find(name);
    if (it == items_.end()) {
      throw std::invalid_argument("ParamStore: unknown parameter " + name);
    }
    return it->second;
  }
  const Param& at(const std::string& name) const {
    return const_cast<ParamStore*>(this)->at(name);
  }

  ValueGrid<T>& value(const std::string& name) { return at(name).value; }
  ValueGrid<T>& grad(const std::string& name) { return at(name).grad; }

  void zero_grads() {
    for (auto& [name, p] : items_) p.grad.fill(T(0));
  }

  std::size_t size() const { return items_.size(); }
  std::size_t total_parameters() const {
    std::size_t n = 0;
    for (const auto& [name, p] : items_) n += p.value.numel();
    return n;
  }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::map<std::string, Param> items_;
};

// Fan-in-scaled uniform init, the default for every trainable matrix.
template <typename T>
void init_fan_in_uniform(ValueGrid<T>& w, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (T& v : w.data) v = static_cast<T>(u(rng));
}

}  // namespace grt
