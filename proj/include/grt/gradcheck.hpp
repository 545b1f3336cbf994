#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <type_traits>
#include <vector>

#include "grt/param_store.hpp"
#include "grt/rng.hpp"
#include "grt/tape.hpp"

namespace grt {

struct GradCheckEntry {
  std::string name;
  double max_err = 0.0;
  std::size_t coords_checked = 0;
};

struct GradCheckReport {
  bool pass = false;
  double tolerance = 0.0;
  double max_err = 0.0;
  std::string worst_param;
  std::vector<GradCheckEntry> entries;

  std::vector<std::string> offending() const {
    std::vector<std::string> out;
    for (const auto& e : entries) {
      if (e.max_err > tolerance) out.push_back(e.name);
    }
    return out;
  }
};

// Central finite differences per parameter coordinate against the analytic
// reverse-mode gradient. Tensors larger than max_coords are sub-sampled
// deterministically. Error metric: |a - n| / max(1, |a|, |n|).
template <typename BuildFn>
GradCheckReport grad_check(ParamStore<double>& store, BuildFn&& build,
                           double tolerance, double step = 1e-5,
                           std::size_t max_coords = 64,
                           std::uint64_t seed = 0) {
  static_assert(std::is_invocable_r_v<typename Tape<double>::Ref, BuildFn,
                                      Tape<double>&, ParamStore<double>&>,
                "build must map (tape, params) to a scalar loss ref");

  auto eval = [&]() -> double {
    Tape<double> tape;
    tape.record = false;
    auto loss = build(tape, store);
    return tape.value(loss).data[0];
  };

  store.zero_grads();
  {
    Tape<double> tape;
    auto loss = build(tape, store);
    tape.backward(loss);
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (auto& [name, p] : store) {
    GradCheckEntry entry;
    entry.name = name;
    const std::size_t n = p.value.numel();
    std::vector<std::size_t> coords;
    if (n <= max_coords) {
      coords.resize(n);
      for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    } else {
      auto rng = make_rng(seed, hash_mix(std::hash<std::string>{}(name)));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      std::vector<char> taken(n, 0);
      while (coords.size() < max_coords) {
        const std::size_t i = pick(rng);
        if (!taken[i]) {
          taken[i] = 1;
          coords.push_back(i);
        }
      }
    }
    for (std::size_t i : coords) {
      const double orig = p.value.data[i];
      p.value.data[i] = orig + step;
      const double up = eval();
      p.value.data[i] = orig - step;
      const double down = eval();
      p.value.data[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p.grad.data[i];
      const double err = std::abs(analytic - numeric) /
                         std::max({1.0, std::abs(analytic), std::abs(numeric)});
      entry.max_err = std::max(entry.max_err, err);
    }
    entry.coords_checked = coords.size();
    if (entry.max_err > report.max_err) {
      report.max_err = entry.max_err;
      report.worst_param = name;
    }
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.max_err <= tolerance;
  return report;
}

}  // namespace grt
