#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nemo/dense_matrix.hpp"
#include "nemo/sparse_matrix.hpp"

namespace nemo {

/// A learnable tensor and the gradient buffer written by Tape::backward.
struct Parameter {
  Parameter(std::string n, DenseMatrix v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  std::string name;
  DenseMatrix value;
  DenseMatrix grad;
};

/// Owns a model's parameters. Ids are stable indices, so a copy of the set is a
/// full snapshot that layer descriptions (which hold ids) can address unchanged.
class ParameterSet {
 public:
  using Id = std::size_t;

  /// Throws ContractError when the name is already registered.
  Id add(std::string name, DenseMatrix value);

  Parameter& operator[](Id id) { return params_.at(id); }
  const Parameter& operator[](Id id) const { return params_.at(id); }

  std::optional<Id> find(std::string_view name) const;
  std::span<Parameter> all() noexcept { return params_; }
  std::span<const Parameter> all() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const noexcept;

  void zero_grad();

 private:
  std::vector<Parameter> params_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const DenseMatrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so a reverse sweep
/// is a valid topological order. Rebuild per forward pass.
///
/// Sparse operands and parameters are referenced, not copied; they must outlive
/// the tape.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, const DenseMatrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(DenseMatrix value);
  Var parameter(Parameter& p);

  /// Zeroes the gradient of every parameter on this tape, then accumulates
  /// d(loss)/d(value) into them. The loss must be 1x1.
  void backward(Var loss);

  const DenseMatrix& value(Var v) const { return nodes_.at(v.id_).value; }
  const DenseMatrix& value_at(std::size_t id) const { return nodes_.at(id).value; }
  /// Gradient of the last backward pass w.r.t. any node (zero-sized if unreached).
  const DenseMatrix& grad(Var v) const { return nodes_.at(v.id_).grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var record(DenseMatrix value, Backprop backprop);
  void accumulate(std::size_t id, const DenseMatrix& g);
  void accumulate(Var v, const DenseMatrix& g) { accumulate(v.id_, g); }

 private:
  struct Node {
    DenseMatrix value;
    DenseMatrix grad;
    Parameter* param = nullptr;
    Backprop backprop;
  };
  std::vector<Node> nodes_;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double c);
/// x + bias, with bias a 1 x cols row broadcast over every row of x.
Var add_row(Var x, Var bias);
Var matmul(Var a, Var b);
Var spmm(const SparseMatrix& s, Var x);
Var spmm_transposed(const SparseMatrix& s, Var x);
Var sigmoid(Var x);
/// Row r multiplied by factors[r].
Var scale_rows(Var x, std::vector<double> factors);
Var gather_rows(Var x, std::vector<std::uint32_t> rows);
/// n x 1 column of per-row inner products.
Var row_dot(Var a, Var b);
/// scale * sum_k (targets[k] - scores[k])^2 for an n x 1 score column.
Var squared_error(Var scores, std::vector<double> targets, double scale = 1.0);
Var sum_squares(Var x);
Var sum(Var x);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double c, Var a) { return scale(a, c); }

enum class Activation { none, sigmoid };

/// Affine map x * W + b followed by an optional activation.
struct DenseLayer {
  ParameterSet::Id weight;
  ParameterSet::Id bias;
  Activation activation;
};

/// Registers `widths.size() - 1` layers named `<prefix>.<k>.weight/.bias`.
/// Weights are Glorot-uniform from `seed`, biases zero. `hidden` applies to all
/// layers except the last, which uses `last`.
std::vector<DenseLayer> make_mlp(ParameterSet& params, const std::string& prefix,
                                 std::span<const std::size_t> widths, Activation hidden, Activation last,
                                 std::uint64_t seed);

/// Records the layer chain on the tape. DimensionError if shapes do not chain.
Var mlp_forward(Tape& tape, ParameterSet& params, std::span<const DenseLayer> layers, Var x);
/// Tape-free evaluation of the same chain.
DenseMatrix mlp_apply(const ParameterSet& params, std::span<const DenseLayer> layers, const DenseMatrix& x);

}  // namespace nemo
