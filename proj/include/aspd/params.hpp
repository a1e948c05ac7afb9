#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "aspd/optim.hpp"
#include "aspd/rng.hpp"
#include "aspd/tensor.hpp"

namespace aspd {

// Exposes a ParamSet on a tape. Trainable sets are watched (their gradients
// come back from Tape::backward); frozen sets enter as constants, so
// gradients still flow through them to their inputs but never into them.
class Binder {
 public:
  Binder(Tape& tape, const ParamSet& params, bool trainable)
      : tape_(tape), params_(params), trainable_(trainable) {}

  Var operator()(const std::string& name);
  // Routes `name` to an existing node instead of the stored tensor (used to
  // differentiate with respect to one parameter in isolation).
  void bind(const std::string& name, Var v);
  Tape& tape() const { return tape_; }
  bool has(const std::string& name) const { return params_.count(name) != 0; }

 private:
  Tape& tape_;
  const ParamSet& params_;
  bool trainable_;
  std::map<std::string, Var> bound_;
};

// Adds `<prefix>.weight` (in×out, He-uniform, or zeros) and `<prefix>.bias`
// (zeros).
void add_dense(ParamSet& params, const std::string& prefix, std::size_t in, std::size_t out,
               Rng& rng, bool zero_init = false);

// x·W + b using `<prefix>.weight` / `<prefix>.bias`.
Var dense(Binder& bind, const std::string& prefix, Var x);

// Copies every entry of `src` whose name starts with `prefix` into `dst`.
void copy_prefixed(const ParamSet& src, const std::string& prefix, ParamSet& dst);

std::size_t parameter_count(const ParamSet& params);

}  // namespace aspd
