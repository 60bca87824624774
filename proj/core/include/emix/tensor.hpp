#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace emix {

/// Dense row-major matrix of 64-bit floats. The only tensor shape in the
/// project; vectors are 1xN or Nx1.
struct Tensor2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}
  Tensor2(int r, int c, std::vector<double> d);

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return data.size(); }

  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;

  static Tensor2 row(const std::vector<double>& v);
  static Tensor2 col(const std::vector<double>& v);
  static Tensor2 scalar(double v);
};

/// Throws std::runtime_error if t contains NaN/Inf.
void check_finite(const Tensor2& t, const std::string& where);

Tensor2 matmul(const Tensor2& a, const Tensor2& b);
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);  // a^T * b
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);  // a * b^T

}  // namespace emix
