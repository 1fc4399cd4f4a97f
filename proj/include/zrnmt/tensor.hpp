#ifndef ZRNMT_TENSOR_HPP
#define ZRNMT_TENSOR_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace zrnmt {

// Dense 2-D tensor of doubles, row-major. Scalars are 1x1, row vectors 1xn.
// Everything in the models is rank <= 2 so higher ranks are not supported.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0)
      : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

  static Tensor scalar(double x) {
    Tensor t(1, 1);
    t.v[0] = x;
    return t;
  }
  static Tensor row(std::vector<double> d) {
    Tensor t;
    t.rows = 1;
    t.cols = static_cast<int>(d.size());
    t.v = std::move(d);
    return t;
  }

  double& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

  // Value of a 1x1 tensor.
  double item() const;

  std::size_t size() const { return v.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const;

  void fill(double x) { std::fill(v.begin(), v.end(), x); }
  bool all_finite() const;
  double sum_squares() const;
};

// a += s * b, shapes must match.
void axpy(Tensor& a, double s, const Tensor& b);

// c = a * b for (m x k) * (k x n). Throws on inner-dimension mismatch.
Tensor matmul(const Tensor& a, const Tensor& b);

// c += a * b and c += a^T * b / a * b^T accumulators used by backward passes.
void matmul_acc(Tensor& c, const Tensor& a, const Tensor& b);
void matmul_at_b_acc(Tensor& c, const Tensor& a, const Tensor& b);
void matmul_a_bt_acc(Tensor& c, const Tensor& a, const Tensor& b);

}  // namespace zrnmt

#endif
