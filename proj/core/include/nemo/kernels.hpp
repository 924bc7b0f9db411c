#pragma once

#include <cstdint>

#include "nemo/dense_matrix.hpp"
#include "nemo/sparse_matrix.hpp"

namespace nemo {

/// Multiply-accumulate counters incremented by the kernels below. One instance
/// per thread, so concurrent runs do not interfere.
struct KernelCounters {
  std::uint64_t dense_macs = 0;
  std::uint64_t sparse_macs = 0;
};

KernelCounters& kernel_counters() noexcept;
void reset_kernel_counters() noexcept;

/// a * b. Adds a.rows * a.cols * b.cols to dense_macs.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// a^T * b without forming a^T.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a * b^T without forming b^T.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

/// s * d. Each nonzero of s is visited once and contributes d.cols MACs.
DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d);
/// s^T * d, scattered row by row; same MAC count as spmm.
DenseMatrix spmm_transposed(const SparseMatrix& s, const DenseMatrix& d);

double sigmoid(double x) noexcept;
DenseMatrix sigmoid(const DenseMatrix& x);

}  // namespace nemo
