#include "zrnmt/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace zrnmt {

std::string Tensor::shape_str() const {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

double Tensor::item() const {
  if (rows != 1 || cols != 1) throw std::invalid_argument("item: tensor is " + shape_str());
  return v[0];
}

bool Tensor::all_finite() const {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double Tensor::sum_squares() const {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

void axpy(Tensor& a, double s, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("axpy: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += s * b.v[i];
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows) {
    throw std::invalid_argument("matmul: inner dims " + a.shape_str() + " vs " + b.shape_str());
  }
  Tensor c(a.rows, b.cols);
  matmul_acc(c, a, b);
  return c;
}

void matmul_acc(Tensor& c, const Tensor& a, const Tensor& b) {
  const int m = a.rows, k = a.cols, n = b.cols;
  for (int i = 0; i < m; ++i) {
    const double* ar = &a.v[static_cast<std::size_t>(i) * k];
    double* cr = &c.v[static_cast<std::size_t>(i) * n];
    for (int p = 0; p < k; ++p) {
      const double aip = ar[p];
      if (aip == 0.0) continue;
      const double* br = &b.v[static_cast<std::size_t>(p) * n];
      for (int j = 0; j < n; ++j) cr[j] += aip * br[j];
    }
  }
}

// c (k x n) += a^T (k x m)^T... a is (m x k), b is (m x n).
void matmul_at_b_acc(Tensor& c, const Tensor& a, const Tensor& b) {
  const int m = a.rows, k = a.cols, n = b.cols;
  for (int i = 0; i < m; ++i) {
    const double* ar = &a.v[static_cast<std::size_t>(i) * k];
    const double* br = &b.v[static_cast<std::size_t>(i) * n];
    for (int p = 0; p < k; ++p) {
      const double aip = ar[p];
      if (aip == 0.0) continue;
      double* cr = &c.v[static_cast<std::size_t>(p) * n];
      for (int j = 0; j < n; ++j) cr[j] += aip * br[j];
    }
  }
}

// c (m x k) += a (m x n) * b^T where b is (k x n).
void matmul_a_bt_acc(Tensor& c, const Tensor& a, const Tensor& b) {
  const int m = a.rows, n = a.cols, k = b.rows;
  for (int i = 0; i < m; ++i) {
    const double* ar = &a.v[static_cast<std::size_t>(i) * n];
    double* cr = &c.v[static_cast<std::size_t>(i) * k];
    for (int p = 0; p < k; ++p) {
      const double* br = &b.v[static_cast<std::size_t>(p) * n];
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += ar[j] * br[j];
      cr[p] += s;
    }
  }
}

}  // namespace zrnmt
