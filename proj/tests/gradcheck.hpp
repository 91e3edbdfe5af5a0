#pragma once

// Central finite-difference oracle. Test-only: it evaluates the forward pass
// through fresh graphs and never consults the backward closures it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "readnet/num/graph.hpp"
#include "readnet/num/params.hpp"

namespace readnet::testing {

/// Elementwise |analytic - numeric| / max(|analytic|, |numeric|, floor).
/// The floor keeps exactly-zero gradients from dividing by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

using LossFn = std::function<num::Var(num::Graph&, const std::vector<num::Var>&)>;

/// Returns the worst relative error over every input element.
inline double gradcheck(const LossFn& loss_fn, const std::vector<num::Tensor>& inputs, double h = 1e-5) {
  std::vector<num::Tensor> analytic;
  {
    num::Graph g;
    std::vector<num::Var> vars;
    for (const auto& t : inputs) vars.push_back(g.variable(t));
    g.backward(loss_fn(g, vars));
    for (const auto& v : vars) analytic.push_back(v.grad());
  }
  auto evaluate = [&](const std::vector<num::Tensor>& values) {
    num::Graph g;
    std::vector<num::Var> vars;
    for (const auto& t : values) vars.push_back(g.constant(t));
    return loss_fn(g, vars).value().item();
  };
  double worst = 0.0;
  auto perturbed = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x = inputs[k][i];
      perturbed[k][i] = x + h;
      const double up = evaluate(perturbed);
      perturbed[k][i] = x - h;
      const double down = evaluate(perturbed);
      perturbed[k][i] = x;
      worst = std::max(worst, relative_error(analytic[k][i], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

/// Same check for every trainable parameter in a store, with `loss_fn`
/// rebuilding the forward pass from the store on each call.
inline double gradcheck_store(num::ParameterStore& store, const std::function<num::Var(num::Graph&)>& loss_fn,
                              double h = 1e-5) {
  store.zero_grad();
  {
    num::Graph g;
    g.backward(loss_fn(g));
  }
  std::vector<num::Tensor> analytic;
  for (auto* p : store.all()) analytic.push_back(p->grad);
  store.zero_grad();
  auto evaluate = [&] {
    num::Graph g;
    return loss_fn(g).value().item();
  };
  double worst = 0.0;
  auto params = store.all();
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->trainable) continue;
    auto& value = params[k]->value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double x = value[i];
      value[i] = x + h;
      const double up = evaluate();
      value[i] = x - h;
      const double down = evaluate();
      value[i] = x;
      worst = std::max(worst, relative_error(analytic[k][i], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

}  // namespace readnet::testing
