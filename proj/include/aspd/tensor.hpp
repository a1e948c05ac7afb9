#pragma once

// Dense 64-bit arrays and a define-by-run tape for reverse-mode gradients.
//
// A Tensor is an immutable row-major value; copies share storage. A Tape
// records every operation applied to tracked nodes (Var) in execution order
// and replays them backwards. Nodes that do not depend on a watched
// parameter or a grad-requiring input are computed but never recorded, so
// inference through a tape costs the same as plain evaluation.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aspd/error.hpp"

namespace aspd {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

// Keeps large tensor buffers on the reusable heap instead of fresh mmap
// regions, which avoids page-faulting megabytes on every layer. Process-wide;
// call once at startup. No-op outside glibc.
void tune_allocator();
std::size_t shape_size(const Shape& shape);

class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  // Builds an r×c matrix from nested rows, e.g. {{1, 2}, {3, 4}}.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_->size(); }
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return rank() < 2 ? 1 : dim(1); }

  std::span<const double> data() const { return *data_; }
  const double* ptr() const { return data_->data(); }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  // Same storage, new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const;

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
};

// Row-major rows×cols table of indices (k-NN graphs, grouping indices).
struct IndexMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint32_t> data;

  std::uint32_t operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const std::uint32_t> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  // Keeps only the listed rows, in the given order.
  IndexMatrix select_rows(std::span<const std::size_t> which) const;
};

enum class OpKind {
  kLeaf,
  kLinear,
  kActivation,
  kGatherGroup,
  kGatherRows,
  kReduceGroup,
  kGroupMax,
  kGroupSubRows,
  kConcatCols,
  kHadamard,
  kAdd,
  kSub,
  kScale,
  kReshape,
  kSliceRows,
  kMeanRows,
  kBroadcastRows,
  kSum,
  kCrossEntropy,
  kChamfer,
  kOffsetLoss,
};

class Tape;

// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

using GradMap = std::map<std::string, Tensor>;

class Tape {
 public:
  // Called with the recorded node's id and its output gradient; accumulates
  // into the node's inputs via grad_buffer()/accumulate().
  using BackwardFn =
      std::function<void(Tape&, std::size_t self, std::span<const double> grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf whose gradient is requested; used for inputs under gradient checks.
  Var input(Tensor value);
  // Named parameter leaf; backward() reports a gradient for every watched id.
  Var watch(const std::string& param_id, Tensor value);

  Var record(OpKind kind, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool any_requires_grad(std::initializer_list<Var> vars) const;
  std::size_t size() const { return nodes_.size(); }
  OpKind kind(std::size_t id) const { return nodes_[id].kind; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }

  // Gradient accumulation buffer for a node (zero-initialized on first use).
  std::vector<double>& grad_buffer(std::size_t id);
  void accumulate(std::size_t id, std::span<const double> g);

  // Reverse sweep from a scalar loss. Returns a gradient for every watched
  // parameter (zeros when the loss does not depend on it).
  GradMap backward(Var loss);
  // Gradient of the last backward() w.r.t. any grad-requiring node.
  Tensor grad(Var v) const;

  void check(Var v) const;

 private:
  struct Node {
    OpKind kind = OpKind::kLeaf;
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::deque<Node> nodes_;  // stable addresses: value() references survive later records
  std::vector<std::vector<double>> grads_;
  std::vector<std::pair<std::string, std::size_t>> params_;
};

enum class Activation { kRelu, kSigmoid, kTanh };

// Parses "relu" | "sigmoid" | "tanh"; anything else is a ConfigError.
Activation parse_activation(const std::string& name);

enum class Reduce { kMax, kMean };

// out = X·Wt + bias, X: r×a, Wt: a×b, bias: b.
Var linear(Var x, Var wt, Var bias);
Var linear(Var x, Var wt);
Var activation(Var x, Activation kind);
inline Var relu(Var x) { return activation(x, Activation::kRelu); }
inline Var sigmoid(Var x) { return activation(x, Activation::kSigmoid); }

// out[i,j,:] = X[idx(i,j),:]; gradient scatter-adds into X rows.
Var gather_group(Var x, const IndexMatrix& idx);
// out[i,:] = X[rows[i],:].
Var gather_rows(Var x, std::span<const std::size_t> rows);
// m×k×c -> m×c; max backward routes to the first argmax.
Var reduce_group(Var x, Reduce kind);
// Fused reduce_group(gather_group(X, idx), kMax) without the m×k×c buffer.
Var group_max(Var x, const IndexMatrix& idx);
// out[i,j,:] = G[i,j,:] - V[i,:] for G: m×k×c, V: m×c.
Var group_sub_rows(Var g, Var v);
Var concat_cols(Var a, Var b);
Var hadamard(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var reshape(Var a, Shape shape);
// Rows [begin, end) of a matrix.
Var slice_rows(Var a, std::size_t begin, std::size_t end);
// m×c -> 1×c column means.
Var mean_rows(Var a);
// 1×c -> m×c by repeating the row.
Var broadcast_rows(Var a, std::size_t m);
Var sum(Var a);

}  // namespace aspd
