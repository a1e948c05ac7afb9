#include "aspd/params.hpp"

#include <cmath>

namespace aspd {

Var Binder::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  auto p = params_.find(name);
  if (p == params_.end()) throw ContractError("missing parameter '" + name + "'");
  Var v = trainable_ ? tape_.watch(name, p->second) : tape_.constant(p->second);
  bound_.emplace(name, v);
  return v;
}

void Binder::bind(const std::string& name, Var v) {
  auto p = params_.find(name);
  if (p != params_.end() && p->second.shape() != v.shape()) {
    throw DimensionError("binding '" + name + "' with shape " + shape_str(v.shape()) + ", expected " +
                         shape_str(p->second.shape()));
  }
  if (!bound_.emplace(name, v).second) throw ContractError("parameter '" + name + "' already bound");
}

void add_dense(ParamSet& params, const std::string& prefix, std::size_t in, std::size_t out,
               Rng& rng, bool zero_init) {
  std::vector<double> w(in * out, 0.0);
  if (!zero_init) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    for (double& v : w) v = rng.uniform(-bound, bound);
  }
  params[prefix + ".weight"] = Tensor({in, out}, std::move(w));
  params[prefix + ".bias"] = Tensor::zeros({out});
}

Var dense(Binder& bind, const std::string& prefix, Var x) {
  return linear(x, bind(prefix + ".weight"), bind(prefix + ".bias"));
}

void copy_prefixed(const ParamSet& src, const std::string& prefix, ParamSet& dst) {
  for (const auto& [name, t] : src) {
    if (name.rfind(prefix, 0) == 0) dst[name] = t;
  }
}

std::size_t parameter_count(const ParamSet& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

}  // namespace aspd
