#ifndef ZRNMT_TAPE_HPP
#define ZRNMT_TAPE_HPP

#include <cstdint>
#include <vector>

#include "zrnmt/tensor.hpp"

namespace zrnmt {

// Reverse-mode autodiff over Tensor-valued nodes. Graphs are built
// define-by-run: creating an op node computes its value immediately, so
// creation order is a topological order and backward() is a single reverse
// sweep. A Tape owns its nodes; Var is a handle into one Tape.
enum class Op : std::uint8_t {
  kLeaf,
  kAdd,          // a + b, same shape
  kSub,          // a - b, same shape
  kMul,          // elementwise a * b
  kMatmul,       // (m x k) * (k x n)
  kAddRow,       // matrix + row vector broadcast over rows
  kScale,        // c0 * a
  kAffine,       // c0 * a + c1 elementwise
  kTanh,
  kSigmoid,
  kExp,
  kLog,
  kSoftmaxRows,     // softmax per row
  kLogSoftmaxRows,  // log softmax per row
  kPick,            // single entry (aux0, aux1) as 1x1
  kPickRow,         // row aux0 as 1 x cols (embedding lookup)
  kConcatCols,      // [a b] along columns, equal rows
  kConcatRows,      // n-ary row stack, equal cols
  kMeanRows,        // column means as 1 x cols
  kSumAll,          // sum of all entries as 1x1
  kTranspose,
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
public:
  struct Node {
    Op op;
    std::vector<int> inputs;
    Tensor value;
    Tensor grad;
    int aux0 = 0, aux1 = 0;
    double c0 = 0.0, c1 = 0.0;
  };

  Var leaf(Tensor value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var matmul(Var a, Var b);
  Var add_row(Var m, Var r);
  Var scale(Var a, double c);
  Var affine(Var a, double mul, double shift);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);
  Var pick(Var a, int r, int c);
  Var pick_row(Var a, int r);
  Var concat_cols(Var a, Var b);
  Var concat_rows(const std::vector<Var>& parts);
  Var mean_rows(Var a);
  Var sum_all(Var a);
  Var transpose(Var a);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
  void set_leaf(Var v, Tensor t);
  // Mutable access to a leaf's value, for in-place perturbation (finite
  // differences) followed by forward().
  Tensor& leaf_value(Var v);

  // Recompute every non-leaf value from current leaf values, in creation
  // order; each node is evaluated exactly once.
  void forward();

  // Accumulate d(root)/d(node) into every node's grad. Root must be scalar.
  void backward(Var root);

  std::size_t node_count() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

private:
  int push(Node n);
  void compute(Node& n);
  const Tensor& val(int id) const { return nodes_[id].value; }

  std::vector<Node> nodes_;
};

}  // namespace zrnmt

#endif
