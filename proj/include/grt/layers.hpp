#pragma once

#include <string>

#include "grt/param_store.hpp"
#include "grt/tape.hpp"

namespace grt {

enum class WeightInit { FanIn, Zero };

// Fully connected layer bound to named parameters in a ParamStore. Biases
// are always present and zero-initialized.
template <typename T>
struct FcLayer {
  std::string w_name;
  std::string b_name;
  std::size_t din = 0;
  std::size_t dout = 0;

  static FcLayer create(ParamStore<T>& store, const std::string& prefix,
                        std::size_t din, std::size_t dout, Rng& rng,
                        WeightInit init = WeightInit::FanIn) {
    FcLayer fc{prefix + ".w", prefix + ".b", din, dout};
    auto& w = store.create(fc.w_name, {din, dout});
    if (init == WeightInit::FanIn) init_fan_in_uniform(w, din, rng);
    store.create(fc.b_name, {dout});
    return fc;
  }

  typename Tape<T>::Ref forward(Tape<T>& tape, ParamStore<T>& store,
                                typename Tape<T>::Ref x) const {
    return tape.fully_connected(x, tape.param(store, w_name),
                                tape.param(store, b_name));
  }
};

template <typename T>
struct LayerNormLayer {
  std::string scale_name;
  std::string shift_name;
  std::size_t dim = 0;
  T eps = T(1e-5);

  static LayerNormLayer create(ParamStore<T>& store, const std::string& prefix,
                               std::size_t dim) {
    LayerNormLayer ln{prefix + ".scale", prefix + ".shift", dim};
    auto& s = store.create(ln.scale_name, {dim});
    s.fill(T(1));
    store.create(ln.shift_name, {dim});
    return ln;
  }

  typename Tape<T>::Ref forward(Tape<T>& tape, ParamStore<T>& store,
                                typename Tape<T>::Ref x) const {
    return tape.layer_norm(x, tape.param(store, scale_name),
                           tape.param(store, shift_name), eps);
  }
};

}  // namespace grt
