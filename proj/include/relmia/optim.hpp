#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "relmia/errors.hpp"
#include "relmia/matrix.hpp"
#include "relmia/rng.hpp"
#include "relmia/tape.hpp"

namespace relmia {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m;  // first moments
  std::vector<Matrix> v;  // second moments
  std::uint64_t step = 0;

  static AdamState like(const std::vector<Matrix>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& p : params) {
      s.m.emplace_back(p.rows, p.cols);
      s.v.emplace_back(p.rows, p.cols);
    }
    return s;
  }
};

// Bias-corrected adaptive-moment update, in place. `names` is only used for
// diagnostics when a gradient goes non-finite.
inline void adam_step(std::vector<Matrix>& params, const std::vector<const Matrix*>& grads,
                      AdamState& state, const AdamConfig& cfg,
                      const std::vector<std::string>* names = nullptr) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& w = params[p];
    const Matrix& g = *grads[p];
    if (!w.same_shape(g))
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    Matrix& m = state.m[p];
    Matrix& v = state.v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.data[i];
      if (!std::isfinite(gi)) {
        const std::string name = names ? (*names)[p] : ("#" + std::to_string(p));
        throw NumericError("adam_step: non-finite gradient in parameter '" + name +
                           "' at element " + std::to_string(i));
      }
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
      v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      w.data[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

// Builds a scalar loss from parameter variables registered on the given tape,
// in the same order as the parameter list.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Compares analytic gradients against central finite differences. Returns the
// maximum relative error |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
// over the checked coordinates; non-finite values report as infinity.
// max_coords == 0 checks every coordinate, otherwise a seeded sample.
inline double grad_check(const LossBuilder& fn, const std::vector<Matrix>& params,
                         double step = 1e-5, std::size_t max_coords = 0,
                         std::uint64_t seed = 1) {
  auto eval = [&](const std::vector<Matrix>& p) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(p.size());
    for (const auto& m : p) vars.push_back(tape.input(m));
    const Var loss = fn(tape, vars);
    return tape.value(loss)(0, 0);
  };

  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& m : params) vars.push_back(tape.input(m));
  tape.backward(fn(tape, vars));

  std::size_t total = 0;
  for (const auto& m : params) total += m.size();
  std::vector<std::pair<std::size_t, std::size_t>> coords;  // (param, element)
  if (max_coords == 0 || total <= max_coords) {
    coords.reserve(total);
    for (std::size_t p = 0; p < params.size(); ++p)
      for (std::size_t i = 0; i < params[p].size(); ++i) coords.emplace_back(p, i);
  } else {
    Rng rng(seed);
    for (std::size_t k = 0; k < max_coords; ++k) {
      std::size_t flat = rng.index(total);
      std::size_t p = 0;
      while (flat >= params[p].size()) {
        flat -= params[p].size();
        ++p;
      }
      coords.emplace_back(p, flat);
    }
  }

  double worst = 0.0;
  std::vector<Matrix> work = params;
  for (const auto& [p, i] : coords) {
    const double orig = work[p].data[i];
    work[p].data[i] = orig + step;
    const double up = eval(work);
    work[p].data[i] = orig - step;
    const double down = eval(work);
    work[p].data[i] = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double analytic = tape.grad(vars[p]).data[i];
    if (!std::isfinite(numeric) || !std::isfinite(analytic))
      return std::numeric_limits<double>::infinity();
    const double err = std::abs(analytic - numeric) /
                       std::max(1e-8, std::abs(analytic) + std::abs(numeric));
    if (err > worst) worst = err;
  }
  return worst;
}

}  // namespace relmia
