#include "emix/tensor.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace emix {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

Tensor2::Tensor2(int r, int c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
  if (data.size() != static_cast<size_t>(r) * c)
    throw std::invalid_argument("Tensor2: data length does not match shape");
}

bool Tensor2::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor2 Tensor2::row(const std::vector<double>& v) {
  return Tensor2(1, static_cast<int>(v.size()), v);
}

Tensor2 Tensor2::col(const std::vector<double>& v) {
  return Tensor2(static_cast<int>(v.size()), 1, v);
}

Tensor2 Tensor2::scalar(double v) { return Tensor2(1, 1, {v}); }

void check_finite(const Tensor2& t, const std::string& where) {
  if (!t.all_finite())
    throw std::runtime_error("non-finite value in " + where);
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
  Tensor2 out(a.rows, b.cols);
  MMap(out.data.data(), out.rows, out.cols) =
      CMap(a.data.data(), a.rows, a.cols) * CMap(b.data.data(), b.rows, b.cols);
  return out;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: shape mismatch");
  Tensor2 out(a.cols, b.cols);
  MMap(out.data.data(), out.rows, out.cols) =
      CMap(a.data.data(), a.rows, a.cols).transpose() * CMap(b.data.data(), b.rows, b.cols);
  return out;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: shape mismatch");
  Tensor2 out(a.rows, b.rows);
  MMap(out.data.data(), out.rows, out.cols) =
      CMap(a.data.data(), a.rows, a.cols) * CMap(b.data.data(), b.rows, b.cols).transpose();
  return out;
}

}  // namespace emix
