#include "nemo/autodiff.hpp"

#include <cmath>

#include "nemo/errors.hpp"
#include "nemo/kernels.hpp"
#include "nemo/random.hpp"

namespace nemo {

namespace {

std::string shape(const DenseMatrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw ContractError(std::string(op) + ": operands on different tapes");
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (!a.same_shape(b)) throw DimensionError(std::string(op) + ": " + shape(a) + " vs " + shape(b));
}

DenseMatrix scalar(double v) { return DenseMatrix(1, 1, v); }

}  // namespace

// ---- ParameterSet ---------------------------------------------------------

ParameterSet::Id ParameterSet::add(std::string name, DenseMatrix value) {
  if (find(name)) throw ContractError("parameter registered twice: " + name);
  params_.emplace_back(std::move(name), std::move(value));
  return params_.size() - 1;
}

std::optional<ParameterSet::Id> ParameterSet::find(std::string_view name) const {
  for (Id i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ParameterSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.grad = DenseMatrix(p.value.rows(), p.value.cols());
}

// ---- Tape -----------------------------------------------------------------

const DenseMatrix& Var::value() const {
  if (tape_ == nullptr) throw ContractError("Var: not attached to a tape");
  return tape_->value(*this);
}

Var Tape::constant(DenseMatrix value) { return record(std::move(value), nullptr); }

Var Tape::parameter(Parameter& p) {
  Var v = record(p.value, nullptr);
  nodes_.back().param = &p;
  return v;
}

Var Tape::record(DenseMatrix value, Backprop backprop) {
  nodes_.push_back(Node{std::move(value), DenseMatrix(), nullptr, std::move(backprop)});
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const DenseMatrix& g) {
  Node& n = nodes_.at(id);
  if (!g.same_shape(n.value)) throw DimensionError("backward: gradient " + shape(g) + " for node " + shape(n.value));
  if (n.grad.empty() && !n.value.empty()) {
    n.grad = g;
    return;
  }
  auto dst = n.grad.values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw ContractError("backward: loss belongs to another tape");
  const DenseMatrix& lv = nodes_.at(loss.id_).value;
  if (lv.rows() != 1 || lv.cols() != 1) throw ContractError("backward: loss must be 1x1, got " + shape(lv));

  for (auto& n : nodes_) {
    n.grad = DenseMatrix();
    if (n.param) n.param->grad = DenseMatrix(n.param->value.rows(), n.param->value.cols());
  }
  nodes_[loss.id_].grad = scalar(1.0);

  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    // Inputs always precede their consumer, so backprop only touches ids < i.
    if (n.backprop) n.backprop(*this, n.grad);
    if (n.param) {
      auto dst = n.param->grad.values();
      auto src = n.grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

// ---- Ops ------------------------------------------------------------------

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  DenseMatrix out = a.value();
  auto o = out.values();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), [ia, ib](Tape& t, const DenseMatrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  DenseMatrix out = a.value();
  auto o = out.values();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), [ia, ib](Tape& t, const DenseMatrix& g) {
    t.accumulate(ia, g);
    DenseMatrix neg = g;
    for (auto& v : neg.values()) v = -v;
    t.accumulate(ib, neg);
  });
}

Var scale(Var a, double c) {
  DenseMatrix out = a.value();
  for (auto& v : out.values()) v *= c;
  const auto ia = a.id();
  return a.tape()->record(std::move(out), [ia, c](Tape& t, const DenseMatrix& g) {
    DenseMatrix s = g;
    for (auto& v : s.values()) v *= c;
    t.accumulate(ia, s);
  });
}

Var add_row(Var x, Var bias) {
  require_same_tape(x, bias, "add_row");
  const DenseMatrix& xv = x.value();
  const DenseMatrix& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) throw DimensionError("add_row: " + shape(xv) + " + " + shape(bv));
  DenseMatrix out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv(0, c);
  }
  const auto ix = x.id(), ib = bias.id();
  return x.tape()->record(std::move(out), [ix, ib](Tape& t, const DenseMatrix& g) {
    t.accumulate(ix, g);
    DenseMatrix gb(1, g.cols());
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
    }
    t.accumulate(ib, gb);
  });
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  DenseMatrix out = matmul(a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), [ia, ib](Tape& t, const DenseMatrix& g) {
    t.accumulate(ia, matmul_nt(g, t.value_at(ib)));
    t.accumulate(ib, matmul_tn(t.value_at(ia), g));
  });
}

Var spmm(const SparseMatrix& s, Var x) {
  DenseMatrix out = spmm(s, x.value());
  const auto ix = x.id();
  const SparseMatrix* sp = &s;
  return x.tape()->record(std::move(out), [ix, sp](Tape& t, const DenseMatrix& g) {
    t.accumulate(ix, spmm_transposed(*sp, g));
  });
}

Var spmm_transposed(const SparseMatrix& s, Var x) {
  DenseMatrix out = spmm_transposed(s, x.value());
  const auto ix = x.id();
  const SparseMatrix* sp = &s;
  return x.tape()->record(std::move(out), [ix, sp](Tape& t, const DenseMatrix& g) {
    t.accumulate(ix, spmm(*sp, g));
  });
}

Var sigmoid(Var x) {
  const auto ix = x.id();
  Tape* tape = x.tape();
  const auto iy = tape->size();
  // Derivative is expressed through the output: y * (1 - y).
  return tape->record(sigmoid(x.value()), [ix, iy](Tape& t, const DenseMatrix& g) {
    auto y = t.value_at(iy).values();
    DenseMatrix gx(g.rows(), g.cols());
    auto o = gx.values();
    auto gv = g.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = gv[i] * y[i] * (1.0 - y[i]);
    t.accumulate(ix, gx);
  });
}

Var scale_rows(Var x, std::vector<double> factors) {
  const DenseMatrix& xv = x.value();
  if (factors.size() != xv.rows()) {
    throw DimensionError("scale_rows: " + std::to_string(factors.size()) + " factors for " + shape(xv));
  }
  DenseMatrix out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (auto& v : out.row(r)) v *= factors[r];
  }
  const auto ix = x.id();
  return x.tape()->record(std::move(out), [ix, f = std::move(factors)](Tape& t, const DenseMatrix& g) {
    DenseMatrix gx = g;
    for (std::size_t r = 0; r < gx.rows(); ++r) {
      for (auto& v : gx.row(r)) v *= f[r];
    }
    t.accumulate(ix, gx);
  });
}

Var gather_rows(Var x, std::vector<std::uint32_t> rows) {
  const DenseMatrix& xv = x.value();
  DenseMatrix out(rows.size(), xv.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= xv.rows()) {
      throw DimensionError("gather_rows: row " + std::to_string(rows[k]) + " of " + shape(xv));
    }
    auto src = xv.row(rows[k]);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  const auto ix = x.id();
  const auto nrows = xv.rows();
  return x.tape()->record(std::move(out), [ix, nrows, idx = std::move(rows)](Tape& t, const DenseMatrix& g) {
    DenseMatrix gx(nrows, g.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto dst = gx.row(idx[k]);
      auto src = g.row(k);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
    t.accumulate(ix, gx);
  });
}

Var row_dot(Var a, Var b) {
  require_same_tape(a, b, "row_dot");
  require_same_shape(a.value(), b.value(), "row_dot");
  const DenseMatrix& av = a.value();
  const DenseMatrix& bv = b.value();
  DenseMatrix out(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto x = av.row(r);
    auto y = bv.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) s += x[c] * y[c];
    out(r, 0) = s;
  }
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), [ia, ib](Tape& t, const DenseMatrix& g) {
    const DenseMatrix& av = t.value_at(ia);
    const DenseMatrix& bv = t.value_at(ib);
    DenseMatrix ga(av.rows(), av.cols());
    DenseMatrix gb(bv.rows(), bv.cols());
    for (std::size_t r = 0; r < av.rows(); ++r) {
      const double gr = g(r, 0);
      for (std::size_t c = 0; c < av.cols(); ++c) {
        ga(r, c) = gr * bv(r, c);
        gb(r, c) = gr * av(r, c);
      }
    }
    t.accumulate(ia, ga);
    t.accumulate(ib, gb);
  });
}

Var squared_error(Var scores, std::vector<double> targets, double scale) {
  const DenseMatrix& sv = scores.value();
  if (sv.cols() != 1 || sv.rows() != targets.size()) {
    throw DimensionError("squared_error: scores " + shape(sv) + " vs " + std::to_string(targets.size()) + " targets");
  }
  double loss = 0.0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const double r = targets[k] - sv(k, 0);
    loss += r * r;
  }
  const auto is = scores.id();
  return scores.tape()->record(scalar(scale * loss), [is, scale, tg = std::move(targets)](Tape& t, const DenseMatrix& g) {
    const DenseMatrix& sv = t.value_at(is);
    DenseMatrix gs(sv.rows(), 1);
    for (std::size_t k = 0; k < tg.size(); ++k) gs(k, 0) = g(0, 0) * scale * 2.0 * (sv(k, 0) - tg[k]);
    t.accumulate(is, gs);
  });
}

Var sum_squares(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v * v;
  const auto ix = x.id();
  return x.tape()->record(scalar(s), [ix](Tape& t, const DenseMatrix& g) {
    DenseMatrix gx = t.value_at(ix);
    for (auto& v : gx.values()) v *= 2.0 * g(0, 0);
    t.accumulate(ix, gx);
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const auto ix = x.id();
  const auto r = x.rows(), c = x.cols();
  return x.tape()->record(scalar(s), [ix, r, c](Tape& t, const DenseMatrix& g) {
    t.accumulate(ix, DenseMatrix(r, c, g(0, 0)));
  });
}

// ---- MLP ------------------------------------------------------------------

std::vector<DenseLayer> make_mlp(ParameterSet& params, const std::string& prefix,
                                 std::span<const std::size_t> widths, Activation hidden, Activation last,
                                 std::uint64_t seed) {
  if (widths.size() < 2) throw ContractError("make_mlp: need at least input and output width");
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const std::size_t in = widths[k], out = widths[k + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseMatrix w(in, out);
    for (auto& v : w.values()) v = dist(rng);
    const std::string base = prefix + "." + std::to_string(k);
    const auto wid = params.add(base + ".weight", std::move(w));
    const auto bid = params.add(base + ".bias", DenseMatrix(1, out));
    layers.push_back({wid, bid, k + 2 == widths.size() ? last : hidden});
  }
  return layers;
}

namespace {

void check_chain(const ParameterSet& params, std::span<const DenseLayer> layers, std::size_t in_cols) {
  std::size_t width = in_cols;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& w = params[layers[k].weight].value;
    const auto& b = params[layers[k].bias].value;
    if (w.rows() != width || b.rows() != 1 || b.cols() != w.cols()) {
      throw DimensionError("mlp layer " + std::to_string(k) + ": input width " + std::to_string(width) +
                           ", weight " + shape(w) + ", bias " + shape(b));
    }
    width = w.cols();
  }
}

}  // namespace

Var mlp_forward(Tape& tape, ParameterSet& params, std::span<const DenseLayer> layers, Var x) {
  check_chain(params, layers, x.cols());
  Var h = x;
  for (const auto& layer : layers) {
    h = add_row(matmul(h, tape.parameter(params[layer.weight])), tape.parameter(params[layer.bias]));
    if (layer.activation == Activation::sigmoid) h = sigmoid(h);
  }
  return h;
}

DenseMatrix mlp_apply(const ParameterSet& params, std::span<const DenseLayer> layers, const DenseMatrix& x) {
  check_chain(params, layers, x.cols());
  DenseMatrix h = x;
  for (const auto& layer : layers) {
    h = matmul(h, params[layer.weight].value);
    const auto& b = params[layer.bias].value;
    for (std::size_t r = 0; r < h.rows(); ++r) {
      auto row = h.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += b(0, c);
    }
    if (layer.activation == Activation::sigmoid) h = sigmoid(h);
  }
  return h;
}

}  // namespace nemo
