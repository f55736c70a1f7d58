#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "ftscope/model.hpp"
#include "ftscope/ops.hpp"
#include "support.hpp"

namespace ftscope::test {

/// Worst relative error between backward() and central differences over
/// `per_tensor` random coordinates of every parameter tensor (0 means all).
inline double model_gradient_error(const ModelCheckpoint& model, const Tensor& batch, bool aux, std::size_t per_tensor,
                            std::string* where) {
  const bool softmax = model.spec.head.kind == HeadKind::softmax;
  const std::size_t n = batch.dim(0), k = model.spec.head.classes;
  const std::vector<int> labels{1, 0};
  Tensor targets({n, k});
  for (std::size_t i = 0; i < n * k; ++i) targets.mutable_data()[i] = static_cast<double>((i * 7 + 3) % 2);
  auto loss_of = [&](Tape& tape, const ModelGraph& graph) {
    const auto out = graph.run(tape.constant(batch), aux);
    auto one = [&](Var p) { return softmax ? ops::cross_entropy(p, labels) : ops::multilabel_bce(p, targets); };
    std::vector<Var> terms{one(out.probs)};
    std::vector<double> w{1.0};
    for (std::size_t a = 0; a < out.aux_probs.size(); ++a) {
      terms.push_back(one(out.aux_probs[a]));
      w.push_back(model.spec.aux_heads[a].loss_weight);
    }
    return ops::weighted_sum(terms, w);
  };
  std::set<std::string> all;
  for (const auto& name : model.params.names()) all.insert(name);
  Tape tape;
  ModelGraph graph(tape, model, all);
  const Gradients g = tape.backward(loss_of(tape, graph));

  auto eval = [&](const ModelCheckpoint& m) {
    Tape t(false);
    ModelGraph gr(t, m);
    return loss_of(t, gr).value().item();
  };
  constexpr double h = 1e-5;
  Rng rng(11);
  double worst = 0.0;
  for (const auto& name : model.params.names()) {
    const Tensor analytic = g[graph.param(name)];
    const std::size_t count = per_tensor == 0 ? analytic.size() : per_tensor;
    for (std::size_t s = 0; s < count; ++s) {
      const std::size_t i = per_tensor == 0 ? s : rng.below(analytic.size());
      ModelCheckpoint plus = model, minus = model;
      plus.params.at(name).mutable_data()[i] += h;
      minus.params.at(name).mutable_data()[i] -= h;
      const double numeric = (eval(plus) - eval(minus)) / (2 * h);
      const double e = rel_err(analytic[i], numeric);
      if (e > worst) {
        worst = e;
        *where = name + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic[i]) + " numeric " +
                 std::to_string(numeric);
      }
    }
  }
  return worst;
}

// Zero-initialized biases put dead units exactly on the ReLU kink, where central
// differences and the one-sided derivative disagree; random biases avoid that.
inline ModelCheckpoint with_random_biases(ModelCheckpoint m, std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& info : param_layout(m.spec)) {
    if (info.role != ParamRole::conv_bias && info.role != ParamRole::dense_bias) continue;
    for (double& v : m.params.at(info.name).mutable_data()) v = rng.uniform(-0.1, 0.1);
  }
  return m;
}

}  // namespace ftscope::test
