#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "coqan/params.hpp"
#include "coqan/tape.hpp"

namespace coqan::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<parameter>[index]"
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

// Compares the tape gradient of a scalar loss against central differences
// for every parameter of `store` (or at most `max_coords` evenly spaced
// coordinates per parameter when nonzero). Parameters matching `skip` are
// left out.
inline GradCheckResult grad_check_params(ParameterStore<double>& store,
                                         const std::function<Var<double>(Tape<double>&)>& loss,
                                         double eps = 1e-5, std::size_t max_coords = 0,
                                         const std::function<bool(const std::string&)>& skip = {}) {
  store.zero_grad();
  {
    Tape<double> tape;
    Var<double> l = loss(tape);
    tape.backward(l);
  }
  auto eval = [&] {
    Tape<double> tape;
    return loss(tape).value()(0, 0);
  };
  GradCheckResult res;
  for (std::size_t pi = 0; pi < store.size(); ++pi) {
    auto& p = store[pi];
    if (skip && skip(p.name)) continue;
    const auto n = static_cast<std::size_t>(p.value.size());
    const std::size_t stride = (max_coords == 0 || n <= max_coords) ? 1 : n / max_coords;
    for (std::size_t k = 0; k < n; k += stride) {
      double& x = p.value.data()[k];
      const double saved = x;
      x = saved + eps;
      const double up = eval();
      x = saved - eps;
      const double down = eval();
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double e = relative_error(p.grad.data()[k], numeric);
      ++res.checked;
      if (e > res.max_rel_error) {
        res.max_rel_error = e;
        res.worst = p.name + "[" + std::to_string(k) + "]";
        res.worst_analytic = p.grad.data()[k];
        res.worst_numeric = numeric;
      }
    }
  }
  return res;
}

// Checks an op given as fn(tape, input vars) -> output of any shape. The
// output is reduced to a scalar with a fixed random projection; returns the
// maximum relative error over every input coordinate.
inline double grad_check(
    const std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>& fn,
    const std::vector<Matrix<double>>& inputs, double eps = 1e-5, std::uint64_t seed = 17) {
  ParameterStore<double> store;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto& p = store.declare("input" + std::to_string(i),
                            {static_cast<std::size_t>(inputs[i].rows()),
                             static_cast<std::size_t>(inputs[i].cols())},
                            Group::other, InitKind::gaussian);
    p.value = inputs[i];
  }
  Matrix<double> proj;
  auto loss = [&](Tape<double>& t) {
    std::vector<Var<double>> vars;
    for (std::size_t i = 0; i < store.size(); ++i) vars.push_back(t.param(store[i]));
    Var<double> out = fn(t, vars);
    if (proj.rows() != out.rows() || proj.cols() != out.cols()) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      proj.resize(out.rows(), out.cols());
      for (Eigen::Index k = 0; k < proj.size(); ++k) proj.data()[k] = normal(rng);
    }
    return weighted_sum(out, proj);
  };
  return grad_check_params(store, loss, eps).max_rel_error;
}

}  // namespace coqan::nn
