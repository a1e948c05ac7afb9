#include "aspd/optim.hpp"

#include <algorithm>
#include <cmath>

namespace aspd {

void adam_step(ParamSet& params, const GradMap& grads, AdamState& state) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ContractError("gradient for unknown parameter '" + name + "'");
    if (it->second.shape() != g.shape()) {
      throw DimensionError("adam: gradient " + shape_str(g.shape()) + " for parameter '" + name +
                           "' of shape " + shape_str(it->second.shape()));
    }
    for (auto* moments : {&state.m, &state.v}) {
      auto mit = moments->find(name);
      if (mit == moments->end()) {
        moments->emplace(name, Tensor::zeros(g.shape()));
      } else if (mit->second.shape() != g.shape()) {
        throw DimensionError("adam: moment shape mismatch for '" + name + "'");
      }
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);

  for (const auto& [name, g] : grads) {
    const Tensor& p = params.at(name);
    const Tensor& m = state.m.at(name);
    const Tensor& v = state.v.at(name);
    std::vector<double> np(p.size()), nm(p.size()), nv(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      nm[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      nv[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = nm[i] / c1;
      const double vhat = nv[i] / c2;
      np[i] = p[i] - state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
    params[name] = Tensor(p.shape(), std::move(np));
    state.m[name] = Tensor(p.shape(), std::move(nm));
    state.v[name] = Tensor(p.shape(), std::move(nv));
  }
}

double grad_check(const ScalarFn& f, const Tensor& theta, double eps) {
  Tape tape;
  Var x = tape.input(theta);
  Var y = f(tape, x);
  tape.backward(y);
  const Tensor analytic = tape.grad(x);

  auto eval = [&](const std::vector<double>& values) {
    Tape t;
    Var xv = t.constant(Tensor(theta.shape(), values));
    const double r = f(t, xv).value().item();
    if (!std::isfinite(r)) throw NumericError("grad_check: non-finite function value");
    return r;
  };

  std::vector<double> work(theta.data().begin(), theta.data().end());
  double worst = 0.0;
  for (std::size_t i = 0; i < work.size(); ++i) {
    const double orig = work[i];
    work[i] = orig + eps;
    const double fp = eval(work);
    work[i] = orig - eps;
    const double fm = eval(work);
    work[i] = orig;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace aspd
