#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "relmia/matrix.hpp"

namespace relmia {

// Handle to a tape variable.
struct Var {
  std::uint32_t id = 0xffffffffu;
  bool valid() const { return id != 0xffffffffu; }
};

// Reverse-mode differentiation over dense matrices.
//
// The tape records primitive operations in the order they are built, which is
// already a topological order; every variable is produced by exactly one
// record. backward() walks the records in reverse, accumulating adjoints.
//
// Numerical guards: sigmoid clamps its input at +/-40, segment softmax
// subtracts the per-segment maximum before exponentiating.
class Tape {
 public:
  // Tracked leaf. Constants use the same entry point; an adjoint that is never
  // read costs nothing but a zero buffer.
  Var input(Matrix value) { return push(Op::kLeaf, {}, {}, std::move(value)); }
  Var constant(Matrix value) { return input(std::move(value)); }

  Var matmul(Var a, Var b) {
    const Matrix &A = val(a), &B = val(b);
    check_shape(A.cols == B.rows, "tape matmul: inner dimensions differ");
    return push(Op::kMatMul, a, b, relmia::matmul(A, B));
  }

  Var add(Var a, Var b) {
    const Matrix &A = val(a), &B = val(b);
    check_shape(A.same_shape(B), "tape add: shape mismatch");
    Matrix out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
    return push(Op::kAdd, a, b, std::move(out));
  }

  // m (n x d) plus a broadcast row vector (1 x d)
  Var add_rowvec(Var m, Var bias) {
    const Matrix &A = val(m), &B = val(bias);
    check_shape(B.rows == 1 && B.cols == A.cols, "tape add_rowvec: bias must be 1 x cols");
    Matrix out = A;
    for (std::size_t i = 0; i < A.rows; ++i) {
      double* orow = out.row(i);
      for (std::size_t j = 0; j < A.cols; ++j) orow[j] += B.data[j];
    }
    return push(Op::kAddRowVec, m, bias, std::move(out));
  }

  Var mul(Var a, Var b) {
    const Matrix &A = val(a), &B = val(b);
    check_shape(A.same_shape(B), "tape mul: shape mismatch");
    Matrix out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= B.data[i];
    return push(Op::kMul, a, b, std::move(out));
  }

  Var scale(Var a, double c) {
    Matrix out = val(a);
    for (double& v : out.data) v *= c;
    Var r = push(Op::kScale, a, {}, std::move(out));
    nodes_.back().c = c;
    return r;
  }

  Var concat_cols(Var a, Var b) {
    const Matrix &A = val(a), &B = val(b);
    check_shape(A.rows == B.rows, "tape concat_cols: row counts differ");
    Matrix out(A.rows, A.cols + B.cols);
    for (std::size_t i = 0; i < A.rows; ++i) {
      double* orow = out.row(i);
      const double* arow = A.row(i);
      const double* brow = B.row(i);
      for (std::size_t j = 0; j < A.cols; ++j) orow[j] = arow[j];
      for (std::size_t j = 0; j < B.cols; ++j) orow[A.cols + j] = brow[j];
    }
    return push(Op::kConcat, a, b, std::move(out));
  }

  Var gather_rows(Var a, std::vector<std::uint32_t> idx) {
    const Matrix& A = val(a);
    for (auto i : idx)
      check_shape(i < A.rows, "tape gather_rows: index out of range");
    Matrix out(idx.size(), A.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double* src = A.row(idx[i]);
      double* dst = out.row(i);
      for (std::size_t j = 0; j < A.cols; ++j) dst[j] = src[j];
    }
    Var r = push(Op::kGather, a, {}, std::move(out));
    nodes_.back().idx = std::move(idx);
    return r;
  }

  // Rows summed into their segment; segments may be empty (zero rows out).
  Var segment_sum(Var a, std::vector<std::uint32_t> seg, std::size_t n_segments) {
    const Matrix& A = val(a);
    check_shape(seg.size() == A.rows, "tape segment_sum: one segment id per row");
    for (auto s : seg)
      check_shape(s < n_segments, "tape segment_sum: segment id out of range");
    Matrix out(n_segments, A.cols);
    for (std::size_t i = 0; i < A.rows; ++i) {
      double* dst = out.row(seg[i]);
      const double* src = A.row(i);
      for (std::size_t j = 0; j < A.cols; ++j) dst[j] += src[j];
    }
    Var r = push(Op::kSegmentSum, a, {}, std::move(out));
    nodes_.back().idx = std::move(seg);
    nodes_.back().n_seg = n_segments;
    return r;
  }

  // Column-wise softmax within each segment. Rows of one segment need not be
  // contiguous.
  Var segment_softmax(Var a, std::vector<std::uint32_t> seg, std::size_t n_segments) {
    const Matrix& A = val(a);
    check_shape(seg.size() == A.rows, "tape segment_softmax: one segment id per row");
    for (auto s : seg)
      check_shape(s < n_segments, "tape segment_softmax: segment id out of range");
    Matrix out(A.rows, A.cols);
    std::vector<double> mx(n_segments * A.cols, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < A.rows; ++i) {
      const double* src = A.row(i);
      double* m = mx.data() + seg[i] * A.cols;
      for (std::size_t j = 0; j < A.cols; ++j)
        if (src[j] > m[j]) m[j] = src[j];
    }
    std::vector<double> sum(n_segments * A.cols, 0.0);
    for (std::size_t i = 0; i < A.rows; ++i) {
      const double* src = A.row(i);
      const double* m = mx.data() + seg[i] * A.cols;
      double* s = sum.data() + seg[i] * A.cols;
      double* o = out.row(i);
      for (std::size_t j = 0; j < A.cols; ++j) {
        o[j] = std::exp(src[j] - m[j]);
        s[j] += o[j];
      }
    }
    for (std::size_t i = 0; i < A.rows; ++i) {
      const double* s = sum.data() + seg[i] * A.cols;
      double* o = out.row(i);
      for (std::size_t j = 0; j < A.cols; ++j) o[j] /= s[j];
    }
    Var r = push(Op::kSegmentSoftmax, a, {}, std::move(out));
    nodes_.back().idx = std::move(seg);
    nodes_.back().n_seg = n_segments;
    return r;
  }

  Var sigmoid(Var a) {
    Matrix out = val(a);
    for (double& v : out.data) {
      const double x = v < -40.0 ? -40.0 : (v > 40.0 ? 40.0 : v);
      v = 1.0 / (1.0 + std::exp(-x));
    }
    return push(Op::kSigmoid, a, {}, std::move(out));
  }

  Var tanh(Var a) {
    Matrix out = val(a);
    for (double& v : out.data) v = std::tanh(v);
    return push(Op::kTanh, a, {}, std::move(out));
  }

  Var leaky_relu(Var a, double slope) {
    Matrix out = val(a);
    for (double& v : out.data)
      if (v < 0.0) v *= slope;
    Var r = push(Op::kLeakyRelu, a, {}, std::move(out));
    nodes_.back().c = slope;
    return r;
  }

  // Scalar sum of squared differences, ||a - b||^2.
  Var l2_diff(Var a, Var b) {
    const Matrix &A = val(a), &B = val(b);
    check_shape(A.same_shape(B), "tape l2_diff: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) {
      const double d = A.data[i] - B.data[i];
      s += d * d;
    }
    Matrix out(1, 1);
    out.data[0] = s;
    return push(Op::kL2Diff, a, b, std::move(out));
  }

  const Matrix& value(Var v) const { return val(v); }

  std::size_t size() const { return nodes_.size(); }

  // Adjoint of every variable with respect to a scalar loss.
  void backward(Var loss) {
    const Matrix& L = val(loss);
    if (L.rows != 1 || L.cols != 1)
      throw std::invalid_argument("tape backward: loss must be a 1x1 scalar");
    grads_.clear();
    grads_.resize(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i)
      grads_[i] = Matrix(values_[i].rows, values_[i].cols);
    grads_[loss.id].data[0] = 1.0;

    for (std::size_t n = nodes_.size(); n-- > 0;) {
      const Node& node = nodes_[n];
      const Matrix& g = grads_[n];
      switch (node.op) {
        case Op::kLeaf:
          break;
        case Op::kMatMul:
          matmul_nt_acc(grads_[node.a.id], g, values_[node.b.id]);
          matmul_tn_acc(grads_[node.b.id], values_[node.a.id], g);
          break;
        case Op::kAdd: {
          Matrix& ga = grads_[node.a.id];
          Matrix& gb = grads_[node.b.id];
          for (std::size_t i = 0; i < g.size(); ++i) {
            ga.data[i] += g.data[i];
            gb.data[i] += g.data[i];
          }
          break;
        }
        case Op::kAddRowVec: {
          Matrix& ga = grads_[node.a.id];
          Matrix& gb = grads_[node.b.id];
          for (std::size_t i = 0; i < g.rows; ++i) {
            const double* grow = g.row(i);
            double* arow = ga.row(i);
            for (std::size_t j = 0; j < g.cols; ++j) {
              arow[j] += grow[j];
              gb.data[j] += grow[j];
            }
          }
          break;
        }
        case Op::kMul: {
          Matrix& ga = grads_[node.a.id];
          Matrix& gb = grads_[node.b.id];
          const Matrix& A = values_[node.a.id];
          const Matrix& B = values_[node.b.id];
          for (std::size_t i = 0; i < g.size(); ++i) {
            ga.data[i] += g.data[i] * B.data[i];
            gb.data[i] += g.data[i] * A.data[i];
          }
          break;
        }
        case Op::kScale: {
          Matrix& ga = grads_[node.a.id];
          for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += node.c * g.data[i];
          break;
        }
        case Op::kConcat: {
          Matrix& ga = grads_[node.a.id];
          Matrix& gb = grads_[node.b.id];
          for (std::size_t i = 0; i < g.rows; ++i) {
            const double* grow = g.row(i);
            double* arow = ga.row(i);
            double* brow = gb.row(i);
            for (std::size_t j = 0; j < ga.cols; ++j) arow[j] += grow[j];
            for (std::size_t j = 0; j < gb.cols; ++j) brow[j] += grow[ga.cols + j];
          }
          break;
        }
        case Op::kGather: {
          Matrix& ga = grads_[node.a.id];
          for (std::size_t i = 0; i < g.rows; ++i) {
            double* arow = ga.row(node.idx[i]);
            const double* grow = g.row(i);
            for (std::size_t j = 0; j < g.cols; ++j) arow[j] += grow[j];
          }
          break;
        }
        case Op::kSegmentSum: {
          Matrix& ga = grads_[node.a.id];
          for (std::size_t i = 0; i < ga.rows; ++i) {
            double* arow = ga.row(i);
            const double* grow = g.row(node.idx[i]);
            for (std::size_t j = 0; j < g.cols; ++j) arow[j] += grow[j];
          }
          break;
        }
        case Op::kSegmentSoftmax: {
          Matrix& ga = grads_[node.a.id];
          const Matrix& Y = values_[n];
          std::vector<double> dot(node.n_seg * Y.cols, 0.0);
          for (std::size_t i = 0; i < Y.rows; ++i) {
            const double* y = Y.row(i);
            const double* gy = g.row(i);
            double* d = dot.data() + node.idx[i] * Y.cols;
            for (std::size_t j = 0; j < Y.cols; ++j) d[j] += y[j] * gy[j];
          }
          for (std::size_t i = 0; i < Y.rows; ++i) {
            const double* y = Y.row(i);
            const double* gy = g.row(i);
            const double* d = dot.data() + node.idx[i] * Y.cols;
            double* a = ga.row(i);
            for (std::size_t j = 0; j < Y.cols; ++j) a[j] += y[j] * (gy[j] - d[j]);
          }
          break;
        }
        case Op::kSigmoid: {
          Matrix& ga = grads_[node.a.id];
          const Matrix& Y = values_[n];
          for (std::size_t i = 0; i < g.size(); ++i)
            ga.data[i] += g.data[i] * Y.data[i] * (1.0 - Y.data[i]);
          break;
        }
        case Op::kTanh: {
          Matrix& ga = grads_[node.a.id];
          const Matrix& Y = values_[n];
          for (std::size_t i = 0; i < g.size(); ++i)
            ga.data[i] += g.data[i] * (1.0 - Y.data[i] * Y.data[i]);
          break;
        }
        case Op::kLeakyRelu: {
          Matrix& ga = grads_[node.a.id];
          const Matrix& X = values_[node.a.id];
          for (std::size_t i = 0; i < g.size(); ++i)
            ga.data[i] += g.data[i] * (X.data[i] > 0.0 ? 1.0 : node.c);
          break;
        }
        case Op::kL2Diff: {
          Matrix& ga = grads_[node.a.id];
          Matrix& gb = grads_[node.b.id];
          const Matrix& A = values_[node.a.id];
          const Matrix& B = values_[node.b.id];
          const double g0 = g.data[0];
          for (std::size_t i = 0; i < A.size(); ++i) {
            const double d = 2.0 * g0 * (A.data[i] - B.data[i]);
            ga.data[i] += d;
            gb.data[i] -= d;
          }
          break;
        }
      }
    }
  }

  const Matrix& grad(Var v) const {
    if (grads_.size() != values_.size())
      throw std::logic_error("tape grad: backward() has not run");
    return grads_[v.id];
  }

  void clear() {
    values_.clear();
    grads_.clear();
    nodes_.clear();
  }

 private:
  enum class Op {
    kLeaf,
    kMatMul,
    kAdd,
    kAddRowVec,
    kMul,
    kScale,
    kConcat,
    kGather,
    kSegmentSum,
    kSegmentSoftmax,
    kSigmoid,
    kTanh,
    kLeakyRelu,
    kL2Diff,
  };

  struct Node {
    Op op = Op::kLeaf;
    Var a, b;
    double c = 0.0;
    std::vector<std::uint32_t> idx;
    std::size_t n_seg = 0;
  };

  const Matrix& val(Var v) const {
    if (!v.valid() || v.id >= values_.size())
      throw std::logic_error("tape: invalid variable handle");
    return values_[v.id];
  }

  Var push(Op op, Var a, Var b, Matrix out) {
    values_.push_back(std::move(out));
    nodes_.push_back(Node{op, a, b, 0.0, {}, 0});
    return Var{static_cast<std::uint32_t>(values_.size() - 1)};
  }

  std::vector<Matrix> values_;
  std::vector<Matrix> grads_;
  std::vector<Node> nodes_;
};

}  // namespace relmia
