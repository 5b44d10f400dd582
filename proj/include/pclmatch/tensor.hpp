#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pclmatch {

// Dense row-major matrix of doubles. Vectors are stored as 1 x n.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

  double* row(int r) { return v.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols); }
  const double* row(int r) const {
    return v.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols);
  }
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)]; }
  double at(int r, int c) const {
    return v[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)];
  }
  std::size_t size() const { return v.size(); }
  void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

// C = A * B (or C += with accumulate), A: m x k, B: k x n.
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate = false);
// C = A^T * B (A: m x k interpreted transposed -> k x m result rows), C: k x n.
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate = false);
// C = A * B^T, A: m x k, B: n x k, C: m x n.
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate = false);

inline void check_shape(const Tensor& t, int rows, int cols, const char* name) {
  if (t.rows != rows || t.cols != cols) {
    throw std::invalid_argument(std::string(name) + ": expected " + std::to_string(rows) + "x" +
                                std::to_string(cols) + ", got " + std::to_string(t.rows) + "x" +
                                std::to_string(t.cols));
  }
}

}  // namespace pclmatch
