#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "nemo/dense_matrix.hpp"
#include "nemo/sparse_matrix.hpp"

namespace testing_util {

inline nemo::DenseMatrix random_dense(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  nemo::DenseMatrix m(rows, cols);
  for (auto& v : m.values()) v = n(rng);
  return m;
}

inline nemo::SparseMatrix random_sparse(std::size_t rows, std::size_t cols, double density, std::uint64_t seed,
                                        bool binary = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<nemo::Triplet> t;
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      if (u(rng) < density) t.push_back({r, c, binary ? 1.0 : n(rng)});
    }
  }
  return nemo::SparseMatrix::from_triplets(rows, cols, std::move(t));
}

// Symmetric 0/1 adjacency with empty diagonal.
inline nemo::SparseMatrix random_symmetric(std::size_t n, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<nemo::Triplet> t;
  for (std::uint32_t a = 0; a < n; ++a) {
    for (std::uint32_t b = a + 1; b < n; ++b) {
      if (u(rng) < density) {
        t.push_back({a, b, 1.0});
        t.push_back({b, a, 1.0});
      }
    }
  }
  return nemo::SparseMatrix::from_triplets(n, n, std::move(t));
}

inline nemo::DenseMatrix naive_matmul(const nemo::DenseMatrix& a, const nemo::DenseMatrix& b) {
  nemo::DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

}  // namespace testing_util
