#include "zrnmt/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace zrnmt {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                              b.shape_str());
}

void softmax_row(const double* x, double* y, int n) {
  double mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    y[i] = std::exp(x[i] - mx);
    s += y[i];
  }
  const double inv = 1.0 / s;
  for (int i = 0; i < n; ++i) y[i] *= inv;
}

void log_softmax_row(const double* x, double* y, int n) {
  double mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(x[i] - mx);
  const double lse = mx + std::log(s);
  for (int i = 0; i < n; ++i) y[i] = x[i] - lse;
}

}  // namespace

int Tape::push(Node n) {
  compute(n);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::set_leaf(Var v, Tensor t) {
  Node& n = nodes_[v.id];
  if (n.op != Op::kLeaf) throw std::invalid_argument("set_leaf: node is not a leaf");
  n.value = std::move(t);
}

Tensor& Tape::leaf_value(Var v) {
  Node& n = nodes_[v.id];
  if (n.op != Op::kLeaf) throw std::invalid_argument("leaf_value: node is not a leaf");
  return n.value;
}

Var Tape::add(Var a, Var b) { return Var{push({Op::kAdd, {a.id, b.id}, {}, {}})}; }
Var Tape::sub(Var a, Var b) { return Var{push({Op::kSub, {a.id, b.id}, {}, {}})}; }
Var Tape::mul(Var a, Var b) { return Var{push({Op::kMul, {a.id, b.id}, {}, {}})}; }
Var Tape::matmul(Var a, Var b) { return Var{push({Op::kMatmul, {a.id, b.id}, {}, {}})}; }
Var Tape::add_row(Var m, Var r) { return Var{push({Op::kAddRow, {m.id, r.id}, {}, {}})}; }

Var Tape::scale(Var a, double c) {
  Node n{Op::kScale, {a.id}, {}, {}};
  n.c0 = c;
  return Var{push(std::move(n))};
}

Var Tape::affine(Var a, double mul, double shift) {
  Node n{Op::kAffine, {a.id}, {}, {}};
  n.c0 = mul;
  n.c1 = shift;
  return Var{push(std::move(n))};
}

Var Tape::tanh(Var a) { return Var{push({Op::kTanh, {a.id}, {}, {}})}; }
Var Tape::sigmoid(Var a) { return Var{push({Op::kSigmoid, {a.id}, {}, {}})}; }
Var Tape::exp(Var a) { return Var{push({Op::kExp, {a.id}, {}, {}})}; }
Var Tape::log(Var a) { return Var{push({Op::kLog, {a.id}, {}, {}})}; }
Var Tape::softmax_rows(Var a) { return Var{push({Op::kSoftmaxRows, {a.id}, {}, {}})}; }
Var Tape::log_softmax_rows(Var a) { return Var{push({Op::kLogSoftmaxRows, {a.id}, {}, {}})}; }

Var Tape::pick(Var a, int r, int c) {
  Node n{Op::kPick, {a.id}, {}, {}};
  n.aux0 = r;
  n.aux1 = c;
  return Var{push(std::move(n))};
}

Var Tape::pick_row(Var a, int r) {
  Node n{Op::kPickRow, {a.id}, {}, {}};
  n.aux0 = r;
  return Var{push(std::move(n))};
}

Var Tape::concat_cols(Var a, Var b) { return Var{push({Op::kConcatCols, {a.id, b.id}, {}, {}})}; }

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty input list");
  Node n{Op::kConcatRows, {}, {}, {}};
  n.inputs.reserve(parts.size());
  for (Var p : parts) n.inputs.push_back(p.id);
  return Var{push(std::move(n))};
}

Var Tape::mean_rows(Var a) { return Var{push({Op::kMeanRows, {a.id}, {}, {}})}; }
Var Tape::sum_all(Var a) { return Var{push({Op::kSumAll, {a.id}, {}, {}})}; }
Var Tape::transpose(Var a) { return Var{push({Op::kTranspose, {a.id}, {}, {}})}; }

void Tape::compute(Node& n) {
  switch (n.op) {
    case Op::kLeaf:
      return;
    case Op::kAdd: {
      const Tensor& a = val(n.inputs[0]);
      const Tensor& b = val(n.inputs[1]);
      if (!a.same_shape(b)) shape_error("add", a, b);
      n.value = a;
      for (std::size_t i = 0; i < b.v.size(); ++i) n.value.v[i] += b.v[i];
      return;
    }
    case Op::kSub: {
      const Tensor& a = val(n.inputs[0]);
      const Tensor& b = val(n.inputs[1]);
      if (!a.same_shape(b)) shape_error("sub", a, b);
      n.value = a;
      for (std::size_t i = 0; i < b.v.size(); ++i) n.value.v[i] -= b.v[i];
      return;
    }
    case Op::kMul: {
      const Tensor& a = val(n.inputs[0]);
      const Tensor& b = val(n.inputs[1]);
      if (!a.same_shape(b)) shape_error("mul", a, b);
      n.value = a;
      for (std::size_t i = 0; i < b.v.size(); ++i) n.value.v[i] *= b.v[i];
      return;
    }
    case Op::kMatmul: {
      n.value = zrnmt::matmul(val(n.inputs[0]), val(n.inputs[1]));
      return;
    }
    case Op::kAddRow: {
      const Tensor& a = val(n.inputs[0]);
      const Tensor& r = val(n.inputs[1]);
      if (r.rows != 1 || r.cols != a.cols) shape_error("add_row", a, r);
      n.value = a;
      for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) n.value(i, j) += r.v[j];
      return;
    }
    case Op::kScale: {
      n.value = val(n.inputs[0]);
      for (double& x : n.value.v) x *= n.c0;
      return;
    }
    case Op::kAffine: {
      n.value = val(n.inputs[0]);
      for (double& x : n.value.v) x = n.c0 * x + n.c1;
      return;
    }
    case Op::kTanh: {
      n.value = val(n.inputs[0]);
      for (double& x : n.value.v) x = std::tanh(x);
      return;
    }
    case Op::kSigmoid: {
      n.value = val(n.inputs[0]);
      for (double& x : n.value.v) x = 1.0 / (1.0 + std::exp(-x));
      return;
    }
    case Op::kExp: {
      n.value = val(n.inputs[0]);
      for (double& x : n.value.v) x = std::exp(x);
      return;
    }
    case Op::kLog: {
      n.value = val(n.inputs[0]);
      for (double& x : n.value.v) x = std::log(x);
      return;
    }
    case Op::kSoftmaxRows: {
      const Tensor& a = val(n.inputs[0]);
      n.value = Tensor(a.rows, a.cols);
      for (int i = 0; i < a.rows; ++i)
        softmax_row(&a.v[static_cast<std::size_t>(i) * a.cols],
                    &n.value.v[static_cast<std::size_t>(i) * a.cols], a.cols);
      return;
    }
    case Op::kLogSoftmaxRows: {
      const Tensor& a = val(n.inputs[0]);
      n.value = Tensor(a.rows, a.cols);
      for (int i = 0; i < a.rows; ++i)
        log_softmax_row(&a.v[static_cast<std::size_t>(i) * a.cols],
                        &n.value.v[static_cast<std::size_t>(i) * a.cols], a.cols);
      return;
    }
    case Op::kPick: {
      const Tensor& a = val(n.inputs[0]);
      if (n.aux0 < 0 || n.aux0 >= a.rows || n.aux1 < 0 || n.aux1 >= a.cols)
        throw std::invalid_argument("pick: index out of range for " + a.shape_str());
      n.value = Tensor::scalar(a(n.aux0, n.aux1));
      return;
    }
    case Op::kPickRow: {
      const Tensor& a = val(n.inputs[0]);
      if (n.aux0 < 0 || n.aux0 >= a.rows)
        throw std::invalid_argument("pick_row: row " + std::to_string(n.aux0) +
                                    " out of range for " + a.shape_str());
      n.value = Tensor(1, a.cols);
      for (int j = 0; j < a.cols; ++j) n.value.v[j] = a(n.aux0, j);
      return;
    }
    case Op::kConcatCols: {
      const Tensor& a = val(n.inputs[0]);
      const Tensor& b = val(n.inputs[1]);
      if (a.rows != b.rows) shape_error("concat_cols", a, b);
      n.value = Tensor(a.rows, a.cols + b.cols);
      for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < a.cols; ++j) n.value(i, j) = a(i, j);
        for (int j = 0; j < b.cols; ++j) n.value(i, a.cols + j) = b(i, j);
      }
      return;
    }
    case Op::kConcatRows: {
      const Tensor& first = val(n.inputs[0]);
      int total = 0;
      for (int id : n.inputs) {
        const Tensor& p = val(id);
        if (p.cols != first.cols) shape_error("concat_rows", first, p);
        total += p.rows;
      }
      n.value = Tensor(total, first.cols);
      int r = 0;
      for (int id : n.inputs) {
        const Tensor& p = val(id);
        for (int i = 0; i < p.rows; ++i, ++r)
          for (int j = 0; j < p.cols; ++j) n.value(r, j) = p(i, j);
      }
      return;
    }
    case Op::kMeanRows: {
      const Tensor& a = val(n.inputs[0]);
      n.value = Tensor(1, a.cols);
      for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) n.value.v[j] += a(i, j);
      for (double& x : n.value.v) x /= a.rows;
      return;
    }
    case Op::kSumAll: {
      const Tensor& a = val(n.inputs[0]);
      double s = 0.0;
      for (double x : a.v) s += x;
      n.value = Tensor::scalar(s);
      return;
    }
    case Op::kTranspose: {
      const Tensor& a = val(n.inputs[0]);
      n.value = Tensor(a.cols, a.rows);
      for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) n.value(j, i) = a(i, j);
      return;
    }
  }
}

void Tape::forward() {
  for (Node& n : nodes_) {
    if (n.op != Op::kLeaf) compute(n);
  }
}

void Tape::backward(Var root) {
  Node& r = nodes_[root.id];
  if (r.value.rows != 1 || r.value.cols != 1)
    throw std::invalid_argument("backward: root must be scalar, got " + r.value.shape_str());

  for (Node& n : nodes_) {
    n.grad = Tensor(n.value.rows, n.value.cols);
  }
  r.grad.v[0] = 1.0;

  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.op == Op::kLeaf) continue;
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kAdd: {
        axpy(nodes_[n.inputs[0]].grad, 1.0, g);
        axpy(nodes_[n.inputs[1]].grad, 1.0, g);
        break;
      }
      case Op::kSub: {
        axpy(nodes_[n.inputs[0]].grad, 1.0, g);
        axpy(nodes_[n.inputs[1]].grad, -1.0, g);
        break;
      }
      case Op::kMul: {
        Node& a = nodes_[n.inputs[0]];
        Node& b = nodes_[n.inputs[1]];
        for (std::size_t i = 0; i < g.v.size(); ++i) {
          a.grad.v[i] += g.v[i] * b.value.v[i];
          b.grad.v[i] += g.v[i] * a.value.v[i];
        }
        break;
      }
      case Op::kMatmul: {
        Node& a = nodes_[n.inputs[0]];
        Node& b = nodes_[n.inputs[1]];
        matmul_a_bt_acc(a.grad, g, b.value);   // dA += G * B^T
        matmul_at_b_acc(b.grad, a.value, g);   // dB += A^T * G
        break;
      }
      case Op::kAddRow: {
        Node& a = nodes_[n.inputs[0]];
        Node& rv = nodes_[n.inputs[1]];
        axpy(a.grad, 1.0, g);
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) rv.grad.v[j] += g(i, j);
        break;
      }
      case Op::kScale: {
        axpy(nodes_[n.inputs[0]].grad, n.c0, g);
        break;
      }
      case Op::kAffine: {
        axpy(nodes_[n.inputs[0]].grad, n.c0, g);
        break;
      }
      case Op::kTanh: {
        Node& a = nodes_[n.inputs[0]];
        for (std::size_t i = 0; i < g.v.size(); ++i)
          a.grad.v[i] += g.v[i] * (1.0 - n.value.v[i] * n.value.v[i]);
        break;
      }
      case Op::kSigmoid: {
        Node& a = nodes_[n.inputs[0]];
        for (std::size_t i = 0; i < g.v.size(); ++i)
          a.grad.v[i] += g.v[i] * n.value.v[i] * (1.0 - n.value.v[i]);
        break;
      }
      case Op::kExp: {
        Node& a = nodes_[n.inputs[0]];
        for (std::size_t i = 0; i < g.v.size(); ++i) a.grad.v[i] += g.v[i] * n.value.v[i];
        break;
      }
      case Op::kLog: {
        Node& a = nodes_[n.inputs[0]];
        for (std::size_t i = 0; i < g.v.size(); ++i) a.grad.v[i] += g.v[i] / a.value.v[i];
        break;
      }
      case Op::kSoftmaxRows: {
        // dX_row = Y_row * (G_row - <G_row, Y_row>)
        Node& a = nodes_[n.inputs[0]];
        for (int i = 0; i < g.rows; ++i) {
          const double* y = &n.value.v[static_cast<std::size_t>(i) * g.cols];
          const double* gr = &g.v[static_cast<std::size_t>(i) * g.cols];
          double dot = 0.0;
          for (int j = 0; j < g.cols; ++j) dot += gr[j] * y[j];
          double* ag = &a.grad.v[static_cast<std::size_t>(i) * g.cols];
          for (int j = 0; j < g.cols; ++j) ag[j] += y[j] * (gr[j] - dot);
        }
        break;
      }
      case Op::kLogSoftmaxRows: {
        // dX_row = G_row - softmax(X_row) * sum(G_row)
        Node& a = nodes_[n.inputs[0]];
        for (int i = 0; i < g.rows; ++i) {
          const double* y = &n.value.v[static_cast<std::size_t>(i) * g.cols];
          const double* gr = &g.v[static_cast<std::size_t>(i) * g.cols];
          double gs = 0.0;
          for (int j = 0; j < g.cols; ++j) gs += gr[j];
          double* ag = &a.grad.v[static_cast<std::size_t>(i) * g.cols];
          for (int j = 0; j < g.cols; ++j) ag[j] += gr[j] - std::exp(y[j]) * gs;
        }
        break;
      }
      case Op::kPick: {
        nodes_[n.inputs[0]].grad(n.aux0, n.aux1) += g.v[0];
        break;
      }
      case Op::kPickRow: {
        Node& a = nodes_[n.inputs[0]];
        for (int j = 0; j < g.cols; ++j) a.grad(n.aux0, j) += g.v[j];
        break;
      }
      case Op::kConcatCols: {
        Node& a = nodes_[n.inputs[0]];
        Node& b = nodes_[n.inputs[1]];
        for (int i = 0; i < g.rows; ++i) {
          for (int j = 0; j < a.value.cols; ++j) a.grad(i, j) += g(i, j);
          for (int j = 0; j < b.value.cols; ++j) b.grad(i, j) += g(i, a.value.cols + j);
        }
        break;
      }
      case Op::kConcatRows: {
        int r0 = 0;
        for (int cid : n.inputs) {
          Node& p = nodes_[cid];
          for (int i = 0; i < p.value.rows; ++i, ++r0)
            for (int j = 0; j < g.cols; ++j) p.grad(i, j) += g(r0, j);
        }
        break;
      }
      case Op::kMeanRows: {
        Node& a = nodes_[n.inputs[0]];
        const double inv = 1.0 / a.value.rows;
        for (int i = 0; i < a.value.rows; ++i)
          for (int j = 0; j < g.cols; ++j) a.grad(i, j) += g.v[j] * inv;
        break;
      }
      case Op::kSumAll: {
        Node& a = nodes_[n.inputs[0]];
        for (double& x : a.grad.v) x += g.v[0];
        break;
      }
      case Op::kTranspose: {
        Node& a = nodes_[n.inputs[0]];
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) a.grad(j, i) += g(i, j);
        break;
      }
    }
  }
}

}  // namespace zrnmt
