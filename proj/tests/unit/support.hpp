#pragma once

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ftscope/autodiff.hpp"
#include "ftscope/rng.hpp"
#include "ftscope/tensor.hpp"

namespace ftscope::test {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.mutable_data()) v = rng.uniform(lo, hi);
  return t;
}

/// Scalar-valued function of several leaves, built on the given tape.
using GraphFn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckResult {
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
};

/// Relative error with a small floor so exact zeros compare sanely.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

/// Central differences (step h) against backward() on every input element, or
/// on `per_input` randomly chosen elements per input when nonzero.
inline GradCheckResult grad_check(const GraphFn& fn, const std::vector<Tensor>& inputs, double h = 1e-5,
                                  std::size_t per_input = 0, std::uint64_t seed = 7) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& t : inputs) leaves.push_back(tape.parameter(t));
    const Gradients g = tape.backward(fn(tape, leaves));
    for (const auto& v : leaves) analytic.push_back(g[v]);
  }
  auto eval = [&](const std::vector<Tensor>& xs) {
    Tape tape(false);
    std::vector<Var> leaves;
    for (const auto& t : xs) leaves.push_back(tape.constant(t));
    return fn(tape, leaves).value().item();
  };
  GradCheckResult r;
  Rng rng(seed);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<std::size_t> coords;
    if (per_input == 0 || per_input >= inputs[i].size()) {
      for (std::size_t k = 0; k < inputs[i].size(); ++k) coords.push_back(k);
    } else {
      for (std::size_t k = 0; k < per_input; ++k) coords.push_back(rng.below(inputs[i].size()));
    }
    for (std::size_t k : coords) {
      std::vector<Tensor> plus = inputs, minus = inputs;
      plus[i].mutable_data()[k] += h;
      minus[i].mutable_data()[k] -= h;
      const double numeric = (eval(plus) - eval(minus)) / (2.0 * h);
      const double e = rel_err(analytic[i][k], numeric);
      ++r.checked;
      if (e > r.worst) {
        r.worst = e;
        r.where = "input " + std::to_string(i) + " element " + std::to_string(k) + ": analytic " +
                  std::to_string(analytic[i][k]) + " numeric " + std::to_string(numeric);
      }
    }
  }
  return r;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ftscope_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ftscope::test
