#include "aspd/tensor.hpp"

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>

namespace aspd {

void tune_allocator() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// Eigen's product kernels choose between packet (fused multiply-add) and
// scalar code from the runtime alignment of each operand, so the same
// product on differently placed buffers can differ in the last bit. Every
// product therefore runs on buffers aligned to the widest packet; RowMat
// storage is allocated that way.
constexpr std::uintptr_t kPacketBytes = EIGEN_MAX_ALIGN_BYTES;

bool packet_aligned(const double* p) { return reinterpret_cast<std::uintptr_t>(p) % kPacketBytes == 0; }

// View of an r×c buffer on an aligned address, copying into `scratch` when
// the buffer itself is not aligned.
ConstMap aligned_view(const double* p, std::size_t r, std::size_t c, RowMat& scratch) {
  if (packet_aligned(p)) return ConstMap(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  scratch = ConstMap(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return ConstMap(scratch.data(), scratch.rows(), scratch.cols());
}

// dst (+)= product, evaluated into aligned storage first when dst is not.
template <class Product>
void store_product(double* dst, std::size_t r, std::size_t c, const Product& product, bool accumulate) {
  MutMap out(dst, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  if (packet_aligned(dst)) {
    if (accumulate) {
      out.noalias() += product;
    } else {
      out.noalias() = product;
    }
    return;
  }
  RowMat tmp(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  if (accumulate) {
    tmp = out;
    tmp.noalias() += product;
  } else {
    tmp.noalias() = product;
  }
  out = tmp;
}

Tape& tape_of(std::initializer_list<Var> vars) {
  Tape* tape = nullptr;
  for (const Var& v : vars) {
    if (v.tape == nullptr) throw TapeError("variable is not attached to a tape");
    if (tape != nullptr && tape != v.tape) throw TapeError("operands live on different tapes");
    tape = v.tape;
  }
  for (const Var& v : vars) tape->check(v);
  return *tape;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + shape_str(t.shape()));
  }
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() : shape_{0}, data_(std::make_shared<const std::vector<double>>()) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)) {
  if (shape_size(shape_) != data.size()) {
    throw DimensionError("tensor shape " + shape_str(shape_) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw DimensionError("axis out of range for " + shape_str(shape_));
  return shape_[axis];
}

double Tensor::at(std::size_t r, std::size_t c) const { return (*data_)[r * cols() + c]; }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on non-scalar " + shape_str(shape_));
  return (*data_)[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != size()) {
    throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

bool Tensor::all_finite() const {
  // v·0 is NaN exactly when v is not finite; independent lanes vectorize.
  const std::vector<double>& d = *data_;
  double lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= d.size(); i += 8) {
    for (std::size_t l = 0; l < 8; ++l) lanes[l] += d[i + l] * 0.0;
  }
  for (; i < d.size(); ++i) lanes[0] += d[i] * 0.0;
  double total = 0.0;
  for (double l : lanes) total += l;
  return total == 0.0;
}

IndexMatrix IndexMatrix::select_rows(std::span<const std::size_t> which) const {
  IndexMatrix out{which.size(), cols, {}};
  out.data.reserve(which.size() * cols);
  for (std::size_t r : which) {
    if (r >= rows) throw IndexError("row " + std::to_string(r) + " out of range");
    auto src = row(r);
    out.data.insert(out.data.end(), src.begin(), src.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const {
  if (tape == nullptr) throw TapeError("variable is not attached to a tape");
  return tape->value(*this);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{OpKind::kLeaf, std::move(value), {}, {}, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::input(Tensor value) {
  nodes_.push_back(Node{OpKind::kLeaf, std::move(value), {}, {}, true});
  return Var{this, nodes_.size() - 1};
}

Var Tape::watch(const std::string& param_id, Tensor value) {
  Var v = input(std::move(value));
  params_.emplace_back(param_id, v.id);
  return v;
}

Var Tape::record(OpKind kind, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  if (!value.all_finite()) throw NumericError("non-finite value produced by tape operation");
  bool needs = false;
  for (std::size_t id : inputs) {
    if (id >= nodes_.size()) throw TapeError("input node precedes tape start");
    needs = needs || nodes_[id].requires_grad;
  }
  if (!needs) {
    nodes_.push_back(Node{kind, std::move(value), {}, {}, false});
  } else {
    nodes_.push_back(Node{kind, std::move(value), std::move(inputs), std::move(backward), true});
  }
  return Var{this, nodes_.size() - 1};
}

void Tape::check(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) throw TapeError("node is not on this tape");
}

const Tensor& Tape::value(Var v) const {
  check(v);
  return nodes_[v.id].value;
}

bool Tape::requires_grad(Var v) const {
  check(v);
  return nodes_[v.id].requires_grad;
}

bool Tape::any_requires_grad(std::initializer_list<Var> vars) const {
  return std::any_of(vars.begin(), vars.end(), [&](Var v) { return requires_grad(v); });
}

std::vector<double>& Tape::grad_buffer(std::size_t id) {
  if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
  auto& g = grads_[id];
  if (g.empty()) g.assign(nodes_[id].value.size(), 0.0);
  return g;
}

void Tape::accumulate(std::size_t id, std::span<const double> g) {
  auto& buf = grad_buffer(id);
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

GradMap Tape::backward(Var loss) {
  check(loss);
  if (nodes_[loss.id].value.size() != 1) {
    throw ContractError("backward needs a scalar loss, got " +
                        shape_str(nodes_[loss.id].value.shape()));
  }
  grads_.assign(nodes_.size(), {});
  if (nodes_[loss.id].requires_grad) {
    grad_buffer(loss.id)[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.backward || grads_[i].empty()) continue;
      node.backward(*this, i, grads_[i]);
    }
  }
  GradMap out;
  for (const auto& [name, id] : params_) {
    const Tensor& v = nodes_[id].value;
    if (grads_[id].empty()) {
      out.emplace(name, Tensor::zeros(v.shape()));
    } else {
      out.emplace(name, Tensor(v.shape(), grads_[id]));
    }
  }
  return out;
}

Tensor Tape::grad(Var v) const {
  check(v);
  const Tensor& value = nodes_[v.id].value;
  if (v.id >= grads_.size() || grads_[v.id].empty()) return Tensor::zeros(value.shape());
  return Tensor(value.shape(), grads_[v.id]);
}

// ---------------------------------------------------------------------------
// Operations

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + name + "'");
}

namespace {

Var linear_impl(Var x, Var wt, const Var* bias) {
  Tape& tape = bias ? tape_of({x, wt, *bias}) : tape_of({x, wt});
  const Tensor& xv = x.value();
  const Tensor& wv = wt.value();
  require_rank(xv, 2, "linear");
  require_rank(wv, 2, "linear");
  const std::size_t r = xv.rows(), a = xv.cols(), b = wv.cols();
  if (wv.rows() != a) {
    throw DimensionError("linear: inner dims " + shape_str(xv.shape()) + " · " +
                         shape_str(wv.shape()));
  }
  std::vector<double> y(r * b, 0.0);
  if (r > 0 && a > 0 && b > 0) {
    RowMat xs, ws;
    store_product(y.data(), r, b, aligned_view(xv.ptr(), r, a, xs) * aligned_view(wv.ptr(), a, b, ws), false);
  }
  std::vector<std::size_t> inputs{x.id, wt.id};
  if (bias) {
    const Tensor& bv = bias->value();
    if (bv.size() != b || bv.rank() > 2 || (bv.rank() == 2 && bv.rows() != 1)) {
      throw DimensionError("linear: bias " + shape_str(bv.shape()) + " vs weight " +
                           shape_str(wv.shape()));
    }
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < b; ++j) y[i * b + j] += bv[j];
    }
    inputs.push_back(bias->id);
  }
  const std::size_t xid = x.id, wid = wt.id;
  const std::size_t bid = bias ? bias->id : SIZE_MAX;
  return tape.record(
      OpKind::kLinear, Tensor({r, b}, std::move(y)), std::move(inputs),
      [xid, wid, bid, r, a, b](Tape& t, std::size_t, std::span<const double> g) {
        const bool gx = t.requires_grad(xid);
        const bool gw = t.requires_grad(wid);
        const bool gb = bid != SIZE_MAX && t.requires_grad(bid);
        const std::size_t nnz = static_cast<std::size_t>(
            std::count_if(g.begin(), g.end(), [](double v) { return v != 0.0; }));
        if (nnz == 0) return;
        if (gb) {
          auto& db = t.grad_buffer(bid);
          for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < b; ++j) db[j] += g[i * b + j];
          }
        }
        ConstMap xm(t.value(xid).ptr(), r, a);
        ConstMap wm(t.value(wid).ptr(), a, b);
        // Gradients behind a max pool are mostly zero; walk the nonzeros.
        if (nnz * 5 < g.size()) {
          if (gx) {
            MutMap dx(t.grad_buffer(xid).data(), r, a);
            for (std::size_t i = 0; i < r; ++i) {
              for (std::size_t j = 0; j < b; ++j) {
                const double v = g[i * b + j];
                if (v != 0.0) dx.row(i).noalias() += v * wm.col(j).transpose();
              }
            }
          }
          if (gw) {
            RowMat dwt = RowMat::Zero(b, a);
            for (std::size_t i = 0; i < r; ++i) {
              for (std::size_t j = 0; j < b; ++j) {
                const double v = g[i * b + j];
                if (v != 0.0) dwt.row(j).noalias() += v * xm.row(i);
              }
            }
            MutMap(t.grad_buffer(wid).data(), a, b) += dwt.transpose();
          }
          return;
        }
        RowMat gs, ws, xs;
        const ConstMap ga = aligned_view(g.data(), r, b, gs);
        if (gx) store_product(t.grad_buffer(xid).data(), r, a, ga * aligned_view(wm.data(), a, b, ws).transpose(), true);
        if (gw) store_product(t.grad_buffer(wid).data(), a, b, aligned_view(xm.data(), r, a, xs).transpose() * ga, true);
      });
}

std::size_t checked_index(std::uint32_t i, std::size_t n) {
  if (i >= n) {
    throw IndexError("index " + std::to_string(i) + " out of range for " + std::to_string(n) +
                     " rows");
  }
  return i;
}

}  // namespace

Var linear(Var x, Var wt, Var bias) { return linear_impl(x, wt, &bias); }

Var linear(Var x, Var wt) { return linear_impl(x, wt, nullptr); }

Var activation(Var x, Activation kind) {
  Tape& tape = tape_of({x});
  const Tensor& xv = x.value();
  std::vector<double> y(xv.size());
  const double* in = xv.ptr();
  switch (kind) {
    case Activation::kRelu:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = in[i] > 0.0 ? in[i] : 0.0;
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-in[i]));
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(in[i]);
      break;
  }
  const std::size_t xid = x.id;
  return tape.record(OpKind::kActivation, Tensor(xv.shape(), std::move(y)), {xid},
                     [xid, kind](Tape& t, std::size_t self, std::span<const double> g) {
                       const Tensor& xv = t.value(xid);
                       const Tensor& yv = t.value(self);
                       auto& gx = t.grad_buffer(xid);
                       const std::size_t size = g.size();
                       switch (kind) {
                         case Activation::kRelu:
                           for (std::size_t i = 0; i < size; ++i) gx[i] += xv[i] > 0.0 ? g[i] : 0.0;
                           break;
                         case Activation::kSigmoid:
                           for (std::size_t i = 0; i < size; ++i) gx[i] += g[i] * yv[i] * (1.0 - yv[i]);
                           break;
                         case Activation::kTanh:
                           for (std::size_t i = 0; i < size; ++i) gx[i] += g[i] * (1.0 - yv[i] * yv[i]);
                           break;
                       }
                     });
}

Var gather_group(Var x, const IndexMatrix& idx) {
  Tape& tape = tape_of({x});
  const Tensor& xv = x.value();
  require_rank(xv, 2, "gather_group");
  const std::size_t n = xv.rows(), c = xv.cols();
  const std::size_t m = idx.rows, k = idx.cols;
  std::vector<double> y(m * k * c);
  for (std::size_t e = 0; e < m * k; ++e) {
    const std::size_t src = checked_index(idx.data[e], n);
    std::copy_n(xv.ptr() + src * c, c, y.data() + e * c);
  }
  const std::size_t xid = x.id;
  return tape.record(OpKind::kGatherGroup, Tensor({m, k, c}, std::move(y)), {xid},
                     [xid, idx, c](Tape& t, std::size_t, std::span<const double> g) {
                       auto& gx = t.grad_buffer(xid);
                       for (std::size_t e = 0; e < idx.data.size(); ++e) {
                         const std::size_t src = idx.data[e];
                         for (std::size_t ch = 0; ch < c; ++ch) gx[src * c + ch] += g[e * c + ch];
                       }
                     });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  Tape& tape = tape_of({x});
  const Tensor& xv = x.value();
  require_rank(xv, 2, "gather_rows");
  const std::size_t n = xv.rows(), c = xv.cols();
  std::vector<double> y(rows.size() * c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) throw IndexError("gather_rows: row " + std::to_string(rows[i]) + " >= " + std::to_string(n));
    std::copy_n(xv.ptr() + rows[i] * c, c, y.data() + i * c);
  }
  const std::size_t xid = x.id;
  std::vector<std::size_t> saved(rows.begin(), rows.end());
  return tape.record(OpKind::kGatherRows, Tensor({rows.size(), c}, std::move(y)), {xid},
                     [xid, saved = std::move(saved), c](Tape& t, std::size_t, std::span<const double> g) {
                       auto& gx = t.grad_buffer(xid);
                       for (std::size_t i = 0; i < saved.size(); ++i) {
                         for (std::size_t ch = 0; ch < c; ++ch) gx[saved[i] * c + ch] += g[i * c + ch];
                       }
                     });
}

Var reduce_group(Var x, Reduce kind) {
  Tape& tape = tape_of({x});
  const Tensor& xv = x.value();
  require_rank(xv, 3, "reduce_group");
  const std::size_t m = xv.dim(0), k = xv.dim(1), c = xv.dim(2);
  if (k == 0) throw DimensionError("reduce_group: empty group");
  std::vector<double> y(m * c);
  std::vector<double> argmax;  // doubles so compare/select vectorizes
  if (kind == Reduce::kMax) argmax.resize(m * c);
  // Walk each group row by row so the inner loop is contiguous; strict >
  // keeps the first maximum.
  for (std::size_t i = 0; i < m; ++i) {
    const double* base = xv.ptr() + i * k * c;
    double* out = y.data() + i * c;
    std::copy_n(base, c, out);
    if (kind == Reduce::kMax) {
      Eigen::Map<Eigen::ArrayXd> best(out, static_cast<Eigen::Index>(c));
      Eigen::Map<Eigen::ArrayXd> arg(argmax.data() + i * c, static_cast<Eigen::Index>(c));
      arg.setZero();
      for (std::size_t j = 1; j < k; ++j) {
        Eigen::Map<const Eigen::ArrayXd> row(base + j * c, static_cast<Eigen::Index>(c));
        arg = (row > best).select(static_cast<double>(j), arg);
        best = best.max(row);
      }
    } else {
      for (std::size_t j = 1; j < k; ++j) {
        const double* row = base + j * c;
        for (std::size_t ch = 0; ch < c; ++ch) out[ch] += row[ch];
      }
      for (std::size_t ch = 0; ch < c; ++ch) out[ch] /= static_cast<double>(k);
    }
  }
  const std::size_t xid = x.id;
  return tape.record(
      OpKind::kReduceGroup, Tensor({m, c}, std::move(y)), {xid},
      [xid, kind, argmax = std::move(argmax), m, k, c](Tape& t, std::size_t, std::span<const double> g) {
        auto& gx = t.grad_buffer(xid);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double v = g[i * c + ch];
            if (kind == Reduce::kMax) {
              gx[(i * k + static_cast<std::size_t>(argmax[i * c + ch])) * c + ch] += v;
            } else {
              for (std::size_t j = 0; j < k; ++j) gx[(i * k + j) * c + ch] += v / static_cast<double>(k);
            }
          }
        }
      });
}

Var group_max(Var x, const IndexMatrix& idx) {
  Tape& tape = tape_of({x});
  const Tensor& xv = x.value();
  require_rank(xv, 2, "group_max");
  const std::size_t n = xv.rows(), c = xv.cols();
  const std::size_t m = idx.rows, k = idx.cols;
  if (k == 0) throw DimensionError("group_max: empty group");
  std::vector<double> y(m * c);
  // Source rows kept as doubles so the compare/select pair vectorizes;
  // strict > keeps the first maximum.
  std::vector<double> src(m * c);
  for (std::size_t i = 0; i < m; ++i) {
    Eigen::Map<Eigen::ArrayXd> out(y.data() + i * c, static_cast<Eigen::Index>(c));
    Eigen::Map<Eigen::ArrayXd> arg(src.data() + i * c, static_cast<Eigen::Index>(c));
    const std::size_t first = checked_index(idx(i, 0), n);
    out = Eigen::Map<const Eigen::ArrayXd>(xv.ptr() + first * c, static_cast<Eigen::Index>(c));
    arg.setConstant(static_cast<double>(first));
    for (std::size_t j = 1; j < k; ++j) {
      const std::size_t r = checked_index(idx(i, j), n);
      Eigen::Map<const Eigen::ArrayXd> row(xv.ptr() + r * c, static_cast<Eigen::Index>(c));
      arg = (row > out).select(static_cast<double>(r), arg);
      out = out.max(row);
    }
  }
  const std::size_t xid = x.id;
  return tape.record(OpKind::kGroupMax, Tensor({m, c}, std::move(y)), {xid},
                     [xid, src = std::move(src), c](Tape& t, std::size_t, std::span<const double> g) {
                       auto& gx = t.grad_buffer(xid);
                       for (std::size_t e = 0; e < src.size(); ++e) {
                         if (g[e] != 0.0) gx[static_cast<std::size_t>(src[e]) * c + e % c] += g[e];
                       }
                     });
}

Var group_sub_rows(Var g, Var v) {
  Tape& tape = tape_of({g, v});
  const Tensor& gv = g.value();
  const Tensor& vv = v.value();
  require_rank(gv, 3, "group_sub_rows");
  require_rank(vv, 2, "group_sub_rows");
  const std::size_t m = gv.dim(0), k = gv.dim(1), c = gv.dim(2);
  if (vv.rows() != m || vv.cols() != c) {
    throw DimensionError("group_sub_rows: " + shape_str(gv.shape()) + " vs " + shape_str(vv.shape()));
  }
  std::vector<double> y(gv.size());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        y[(i * k + j) * c + ch] = gv[(i * k + j) * c + ch] - vv[i * c + ch];
      }
    }
  }
  const std::size_t gid = g.id, vid = v.id;
  return tape.record(OpKind::kGroupSubRows, Tensor(gv.shape(), std::move(y)), {gid, vid},
                     [gid, vid, m, k, c](Tape& t, std::size_t, std::span<const double> gr) {
                       if (t.requires_grad(gid)) t.accumulate(gid, gr);
                       if (t.requires_grad(vid)) {
                         auto& gvb = t.grad_buffer(vid);
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t j = 0; j < k; ++j) {
                             for (std::size_t ch = 0; ch < c; ++ch) gvb[i * c + ch] -= gr[(i * k + j) * c + ch];
                           }
                         }
                       }
                     });
}

Var concat_cols(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 2, "concat_cols");
  require_rank(bv, 2, "concat_cols");
  const std::size_t m = av.rows();
  if (bv.rows() != m) {
    throw DimensionError("concat_cols: row mismatch " + shape_str(av.shape()) + " vs " +
                         shape_str(bv.shape()));
  }
  const std::size_t ca = av.cols(), cb = bv.cols(), c = ca + cb;
  std::vector<double> y(m * c);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(av.ptr() + i * ca, ca, y.data() + i * c);
    std::copy_n(bv.ptr() + i * cb, cb, y.data() + i * c + ca);
  }
  const std::size_t aid = a.id, bid = b.id;
  return tape.record(OpKind::kConcatCols, Tensor({m, c}, std::move(y)), {aid, bid},
                     [aid, bid, m, ca, cb](Tape& t, std::size_t, std::span<const double> g) {
                       const std::size_t c = ca + cb;
                       if (t.requires_grad(aid)) {
                         auto& ga = t.grad_buffer(aid);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < ca; ++j) ga[i * ca + j] += g[i * c + j];
                       }
                       if (t.requires_grad(bid)) {
                         auto& gb = t.grad_buffer(bid);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < cb; ++j) gb[i * cb + j] += g[i * c + ca + j];
                       }
                     });
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

Var hadamard(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "hadamard");
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  const std::size_t aid = a.id, bid = b.id;
  return tape.record(OpKind::kHadamard, Tensor(av.shape(), std::move(y)), {aid, bid},
                     [aid, bid](Tape& t, std::size_t, std::span<const double> g) {
                       const Tensor& av = t.value(aid);
                       const Tensor& bv = t.value(bid);
                       if (t.requires_grad(aid)) {
                         auto& ga = t.grad_buffer(aid);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                       }
                       if (t.requires_grad(bid)) {
                         auto& gb = t.grad_buffer(bid);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                       }
                     });
}

namespace {

Var add_scaled(Var a, Var b, double sign, OpKind kind, const char* op) {
  Tape& tape = tape_of({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, op);
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + sign * bv[i];
  const std::size_t aid = a.id, bid = b.id;
  return tape.record(kind, Tensor(av.shape(), std::move(y)), {aid, bid},
                     [aid, bid, sign](Tape& t, std::size_t, std::span<const double> g) {
                       if (t.requires_grad(aid)) t.accumulate(aid, g);
                       if (t.requires_grad(bid)) {
                         auto& gb = t.grad_buffer(bid);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
                       }
                     });
}

}  // namespace

Var add(Var a, Var b) { return add_scaled(a, b, 1.0, OpKind::kAdd, "add"); }

Var sub(Var a, Var b) { return add_scaled(a, b, -1.0, OpKind::kSub, "sub"); }

Var scale(Var a, double s) {
  Tape& tape = tape_of({a});
  const Tensor& av = a.value();
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = s * av[i];
  const std::size_t aid = a.id;
  return tape.record(OpKind::kScale, Tensor(av.shape(), std::move(y)), {aid},
                     [aid, s](Tape& t, std::size_t, std::span<const double> g) {
                       auto& ga = t.grad_buffer(aid);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
                     });
}

Var reshape(Var a, Shape shape) {
  Tape& tape = tape_of({a});
  Tensor y = a.value().reshaped(std::move(shape));
  const std::size_t aid = a.id;
  return tape.record(OpKind::kReshape, std::move(y), {aid},
                     [aid](Tape& t, std::size_t, std::span<const double> g) { t.accumulate(aid, g); });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  Tape& tape = tape_of({a});
  const Tensor& av = a.value();
  require_rank(av, 2, "slice_rows");
  if (begin > end || end > av.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of " + shape_str(av.shape()));
  }
  const std::size_t c = av.cols();
  std::vector<double> y(av.ptr() + begin * c, av.ptr() + end * c);
  const std::size_t aid = a.id;
  return tape.record(OpKind::kSliceRows, Tensor({end - begin, c}, std::move(y)), {aid},
                     [aid, begin, c](Tape& t, std::size_t, std::span<const double> g) {
                       auto& ga = t.grad_buffer(aid);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[begin * c + i] += g[i];
                     });
}

Var mean_rows(Var a) {
  Tape& tape = tape_of({a});
  const Tensor& av = a.value();
  require_rank(av, 2, "mean_rows");
  const std::size_t m = av.rows(), c = av.cols();
  if (m == 0) throw DimensionError("mean_rows: no rows");
  std::vector<double> y(c, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < c; ++j) y[j] += av[i * c + j];
  for (double& v : y) v /= static_cast<double>(m);
  const std::size_t aid = a.id;
  return tape.record(OpKind::kMeanRows, Tensor({1, c}, std::move(y)), {aid},
                     [aid, m, c](Tape& t, std::size_t, std::span<const double> g) {
                       auto& ga = t.grad_buffer(aid);
                       const double inv = 1.0 / static_cast<double>(m);
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j] * inv;
                     });
}

Var broadcast_rows(Var a, std::size_t m) {
  Tape& tape = tape_of({a});
  const Tensor& av = a.value();
  if (av.rank() != 2 || av.rows() != 1) {
    throw DimensionError("broadcast_rows: expected 1×c, got " + shape_str(av.shape()));
  }
  const std::size_t c = av.cols();
  std::vector<double> y(m * c);
  for (std::size_t i = 0; i < m; ++i) std::copy_n(av.ptr(), c, y.data() + i * c);
  const std::size_t aid = a.id;
  return tape.record(OpKind::kBroadcastRows, Tensor({m, c}, std::move(y)), {aid},
                     [aid, m, c](Tape& t, std::size_t, std::span<const double> g) {
                       auto& ga = t.grad_buffer(aid);
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < c; ++j) ga[j] += g[i * c + j];
                     });
}

Var sum(Var a) {
  Tape& tape = tape_of({a});
  const Tensor& av = a.value();
  double s = 0.0;
  for (double v : av.data()) s += v;
  const std::size_t aid = a.id;
  return tape.record(OpKind::kSum, Tensor::scalar(s), {aid},
                     [aid](Tape& t, std::size_t, std::span<const double> g) {
                       auto& ga = t.grad_buffer(aid);
                       for (double& v : ga) v += g[0];
                     });
}

}  // namespace aspd
