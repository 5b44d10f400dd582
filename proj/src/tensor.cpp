#include "pclmatch/tensor.hpp"

namespace pclmatch {

void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  if (a.cols != b.rows) throw std::invalid_argument("gemm_nn: inner dimensions differ");
  if (c.rows != a.rows || c.cols != b.cols) {
    c = Tensor(a.rows, b.cols);
  } else if (!accumulate) {
    c.fill(0.0);
  }

  const int m = a.rows;
  const int k = a.cols;
  const int n = b.cols;
  for (int i = 0; i < m; ++i) {
    const double* __restrict__ arow = a.row(i);
    double* __restrict__ crow = c.row(i);
    for (int kk = 0; kk < k; ++kk) {
      const double aval = arow[kk];
      const double* __restrict__ brow = b.row(kk);
      for (int j = 0; j < n; ++j) crow[j] += aval * brow[j];
    }
  }
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  if (a.rows != b.rows) throw std::invalid_argument("gemm_tn: leading dimensions differ");
  if (c.rows != a.cols || c.cols != b.cols) {
    c = Tensor(a.cols, b.cols);
  } else if (!accumulate) {
    c.fill(0.0);
  }

  const int m = a.rows;
  const int k = a.cols;
  const int n = b.cols;
  for (int t = 0; t < m; ++t) {
    const double* __restrict__ arow = a.row(t);
    const double* __restrict__ brow = b.row(t);
    for (int i = 0; i < k; ++i) {
      const double aval = arow[i];
      double* __restrict__ crow = c.row(i);
      for (int j = 0; j < n; ++j) crow[j] += aval * brow[j];
    }
  }
}

void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  if (a.cols != b.cols) throw std::invalid_argument("gemm_nt: inner dimensions differ");
  if (c.rows != a.rows || c.cols != b.rows) {
    c = Tensor(a.rows, b.rows);
  } else if (!accumulate) {
    c.fill(0.0);
  }

  const int m = a.rows;
  const int k = a.cols;
  const int n = b.rows;
  for (int i = 0; i < m; ++i) {
    const double* __restrict__ arow = a.row(i);
    double* __restrict__ crow = c.row(i);
    for (int j = 0; j < n; ++j) {
      const double* __restrict__ brow = b.row(j);
      double acc = 0.0;
      for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      crow[j] += acc;
    }
  }
}

}  // namespace pclmatch
