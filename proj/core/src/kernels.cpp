#include "nemo/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nemo/errors.hpp"

namespace nemo {

namespace {

thread_local KernelCounters counters;

std::string shape(const DenseMatrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

}  // namespace

KernelCounters& kernel_counters() noexcept { return counters; }
void reset_kernel_counters() noexcept { counters = {}; }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: " + shape(a) + " * " + shape(b));
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aik * brow[j];
    }
  }
  counters.dense_macs += a.rows() * a.cols() * b.cols();
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("matmul_tn: " + shape(a) + "^T * " + shape(b));
  DenseMatrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      auto o = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aki * brow[j];
    }
  }
  counters.dense_macs += a.rows() * a.cols() * b.cols();
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw DimensionError("matmul_nt: " + shape(a) + " * " + shape(b) + "^T");
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
      out(i, j) = s;
    }
  }
  counters.dense_macs += a.rows() * a.cols() * b.rows();
  return out;
}

DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d) {
  if (s.cols() != d.rows()) {
    throw DimensionError("spmm: " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) + " * " + shape(d));
  }
  DenseMatrix out(s.rows(), d.cols());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto o = out.row(r);
    auto cols = s.row_cols(r);
    auto vals = s.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      auto drow = d.row(cols[k]);
      for (std::size_t j = 0; j < d.cols(); ++j) o[j] += vals[k] * drow[j];
    }
  }
  counters.sparse_macs += s.nnz() * d.cols();
  return out;
}

DenseMatrix spmm_transposed(const SparseMatrix& s, const DenseMatrix& d) {
  if (s.rows() != d.rows()) {
    throw DimensionError("spmm_transposed: (" + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                         ")^T * " + shape(d));
  }
  DenseMatrix out(s.cols(), d.cols());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto drow = d.row(r);
    auto cols = s.row_cols(r);
    auto vals = s.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      auto o = out.row(cols[k]);
      for (std::size_t j = 0; j < d.cols(); ++j) o[j] += vals[k] * drow[j];
    }
  }
  counters.sparse_macs += s.nnz() * d.cols();
  return out;
}

double sigmoid(double x) noexcept {
  // Split on sign so exp never overflows; clamp keeps the result inside (0, 1)
  // once the exact value is no longer representable.
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  double y;
  if (x >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  return std::clamp(y, lo, hi);
}

DenseMatrix sigmoid(const DenseMatrix& x) {
  DenseMatrix out(x.rows(), x.cols());
  auto in = x.values();
  auto o = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = sigmoid(in[i]);
  return out;
}

}  // namespace nemo
