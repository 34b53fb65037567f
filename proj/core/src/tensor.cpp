#include "graphfair/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace graphfair::ad {

namespace {
std::string shape_str(std::size_t r, std::size_t c) {
  return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}
}  // namespace

std::size_t Tensor::rows() const { return tape_->node(*this).rows; }
std::size_t Tensor::cols() const { return tape_->node(*this).cols; }
bool Tensor::requires_grad() const { return tape_->node(*this).requires_grad; }
const std::vector<double>& Tensor::values() const { return tape_->node(*this).values; }
const std::vector<double>& Tensor::grad() const { return tape_->node(*this).grad; }

double Tensor::scalar() const {
  if (size() != 1) throw ValidationError("scalar(): tensor is not 1x1");
  return values()[0];
}

Tensor Tape::emplace(std::size_t rows, std::size_t cols, std::vector<double> values,
                     bool requires_grad, std::function<void(Tape&)> back) {
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.values = std::move(values);
  n.requires_grad = requires_grad;
  n.back = requires_grad ? std::move(back) : std::function<void(Tape&)>{};
  nodes_.push_back(std::move(n));
  return Tensor(this, nodes_.size() - 1);
}

void Tape::check_same_tape(Tensor a, const char* op) const {
  if (a.tape_ != this) throw ValidationError(std::string(op) + ": tensor from a different tape");
}

void Tape::ensure_grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.values.size()) n.grad.assign(n.values.size(), 0.0);
}

Tensor Tape::constant(Matrix m) {
  auto vals = std::move(m.data());
  return emplace(m.rows(), m.cols(), std::move(vals), false, {});
}

Tensor Tape::constant_scalar(double v) { return emplace(1, 1, {v}, false, {}); }

Tensor Tape::parameter(const Matrix& m) { return emplace(m.rows(), m.cols(), m.data(), true, {}); }

void Tape::backward(Tensor loss) {
  check_same_tape(loss, "backward");
  if (loss.size() != 1) throw ValidationError("backward: loss must be scalar (1x1)");
  for (std::size_t i = 0; i < nodes_.size(); ++i) ensure_grad(i);
  // only leaf gradients accumulate across calls; interior ones are scratch
  for (Node& n : nodes_)
    if (n.back || !n.requires_grad) std::fill(n.grad.begin(), n.grad.end(), 0.0);
  nodes_[loss.id_].grad[0] += 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (nodes_[i].back) nodes_[i].back(*this);
  }
}

void Tape::zero_grad() {
  for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

Matrix Tape::value_of(Tensor t) const {
  const Node& n = node(t);
  Matrix m(n.rows, n.cols);
  m.data() = n.values;
  return m;
}

Matrix Tape::grad_of(Tensor t) const {
  const Node& n = node(t);
  Matrix m(n.rows, n.cols);
  if (n.grad.size() == n.values.size()) m.data() = n.grad;
  return m;
}

// ---------------------------------------------------------------------------
// arithmetic

Tensor Tape::add(Tensor a, Tensor b) {
  check_same_tape(a, "add");
  check_same_tape(b, "add");
  const Node& na = node(a);
  const Node& nb = node(b);
  if (na.rows != nb.rows || na.cols != nb.cols)
    throw ValidationError("add: shape mismatch " + shape_str(na.rows, na.cols) + " vs " +
                          shape_str(nb.rows, nb.cols));
  std::vector<double> v(na.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = na.values[i] + nb.values[i];
  const std::size_t ia = a.id_, ib = b.id_, out = nodes_.size();
  return emplace(na.rows, na.cols, std::move(v), na.requires_grad || nb.requires_grad,
                 [ia, ib, out](Tape& tp) {
                   const auto& g = tp.nodes_[out].grad;
                   if (tp.nodes_[ia].requires_grad)
                     for (std::size_t i = 0; i < g.size(); ++i) tp.nodes_[ia].grad[i] += g[i];
                   if (tp.nodes_[ib].requires_grad)
                     for (std::size_t i = 0; i < g.size(); ++i) tp.nodes_[ib].grad[i] += g[i];
                 });
}

Tensor Tape::sub(Tensor a, Tensor b) {
  check_same_tape(a, "sub");
  check_same_tape(b, "sub");
  const Node& na = node(a);
  const Node& nb = node(b);
  if (na.rows != nb.rows || na.cols != nb.cols)
    throw ValidationError("sub: shape mismatch " + shape_str(na.rows, na.cols) + " vs " +
                          shape_str(nb.rows, nb.cols));
  std::vector<double> v(na.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = na.values[i] - nb.values[i];
  const std::size_t ia = a.id_, ib = b.id_, out = nodes_.size();
  return emplace(na.rows, na.cols, std::move(v), na.requires_grad || nb.requires_grad,
                 [ia, ib, out](Tape& tp) {
                   const auto& g = tp.nodes_[out].grad;
                   if (tp.nodes_[ia].requires_grad)
                     for (std::size_t i = 0; i < g.size(); ++i) tp.nodes_[ia].grad[i] += g[i];
                   if (tp.nodes_[ib].requires_grad)
                     for (std::size_t i = 0; i < g.size(); ++i) tp.nodes_[ib].grad[i] -= g[i];
                 });
}

Tensor Tape::mul(Tensor a, Tensor b) {
  check_same_tape(a, "mul");
  check_same_tape(b, "mul");
  const Node& na = node(a);
  const Node& nb = node(b);
  if (na.rows != nb.rows || na.cols != nb.cols)
    throw ValidationError("mul: shape mismatch " + shape_str(na.rows, na.cols) + " vs " +
                          shape_str(nb.rows, nb.cols));
  std::vector<double> v(na.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = na.values[i] * nb.values[i];
  const std::size_t ia = a.id_, ib = b.id_, out = nodes_.size();
  return emplace(na.rows, na.cols, std::move(v), na.requires_grad || nb.requires_grad,
                 [ia, ib, out](Tape& tp) {
                   const auto& g = tp.nodes_[out].grad;
                   const auto& va = tp.nodes_[ia].values;
                   const auto& vb = tp.nodes_[ib].values;
                   if (tp.nodes_[ia].requires_grad)
                     for (std::size_t i = 0; i < g.size(); ++i) tp.nodes_[ia].grad[i] += g[i] * vb[i];
                   if (tp.nodes_[ib].requires_grad)
                     for (std::size_t i = 0; i < g.size(); ++i) tp.nodes_[ib].grad[i] += g[i] * va[i];
                 });
}

Tensor Tape::scale(Tensor a, double c) {
  check_same_tape(a, "scale");
  const Node& na = node(a);
  std::vector<double> v(na.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = c * na.values[i];
  const std::size_t ia = a.id_, out = nodes_.size();
  return emplace(na.rows, na.cols, std::move(v), na.requires_grad, [ia, out, c](Tape& tp) {
    const auto& g = tp.nodes_[out].grad;
    for (std::size_t i = 0; i < g.size(); ++i) tp.nodes_[ia].grad[i] += c * g[i];
  });
}

Tensor Tape::matmul(Tensor a, Tensor b) {
  check_same_tape(a, "matmul");
  check_same_tape(b, "matmul");
  const Node& na = node(a);
  const Node& nb = node(b);
  if (na.cols != nb.rows)
    throw ValidationError("matmul: inner dimensions disagree " + shape_str(na.rows, na.cols) +
                          " * " + shape_str(nb.rows, nb.cols));
  const std::size_t n = na.rows, k = na.cols, m = nb.cols;
  std::vector<double> v(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = na.values.data() + i * k;
    double* orow = v.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aik = arow[p];
      if (aik == 0.0) continue;
      const double* brow = nb.values.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
    }
  }
  const std::size_t ia = a.id_, ib = b.id_, out = nodes_.size();
  return emplace(n, m, std::move(v), na.requires_grad || nb.requires_grad,
                 [ia, ib, out, n, k, m](Tape& tp) {
                   const auto& g = tp.nodes_[out].grad;
                   const auto& va = tp.nodes_[ia].values;
                   const auto& vb = tp.nodes_[ib].values;
                   if (tp.nodes_[ia].requires_grad) {
                     // dA = G * B^T
                     auto& ga = tp.nodes_[ia].grad;
                     for (std::size_t i = 0; i < n; ++i)
                       for (std::size_t p = 0; p < k; ++p) {
                         const double* grow = g.data() + i * m;
                         const double* brow = vb.data() + p * m;
                         double s = 0.0;
                         for (std::size_t j = 0; j < m; ++j) s += grow[j] * brow[j];
                         ga[i * k + p] += s;
                       }
                   }
                   if (tp.nodes_[ib].requires_grad) {
                     // dB = A^T * G
                     auto& gb = tp.nodes_[ib].grad;
                     for (std::size_t i = 0; i < n; ++i) {
                       const double* arow = va.data() + i * k;
                       const double* grow = g.data() + i * m;
                       for (std::size_t p = 0; p < k; ++p) {
                         const double aip = arow[p];
                         if (aip == 0.0) continue;
                         double* gbrow = gb.data() + p * m;
                         for (std::size_t j = 0; j < m; ++j) gbrow[j] += aip * grow[j];
                       }
                     }
                   }
                 });
}

Tensor Tape::matmul_nt(Tensor a, Tensor b) {
  check_same_tape(a, "matmul_nt");
  check_same_tape(b, "matmul_nt");
  const Node& na = node(a);
  const Node& nb = node(b);
  if (na.cols != nb.cols)
    throw ValidationError("matmul_nt: column counts disagree " + shape_str(na.rows, na.cols) +
                          " vs " + shape_str(nb.rows, nb.cols));
  const std::size_t n = na.rows, k = na.cols, m = nb.rows;
  std::vector<double> v(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = na.values.data() + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = nb.values.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      v[i * m + j] = s;
    }
  }
  const std::size_t ia = a.id_, ib = b.id_, out = nodes_.size();
  return emplace(n, m, std::move(v), na.requires_grad || nb.requires_grad,
                 [ia, ib, out, n, k, m](Tape& tp) {
                   const auto& g = tp.nodes_[out].grad;
                   const auto& va = tp.nodes_[ia].values;
                   const auto& vb = tp.nodes_[ib].values;
                   if (tp.nodes_[ia].requires_grad) {
                     // dA = G * B
                     auto& ga = tp.nodes_[ia].grad;
                     for (std::size_t i = 0; i < n; ++i) {
                       const double* grow = g.data() + i * m;
                       double* garow = ga.data() + i * k;
                       for (std::size_t j = 0; j < m; ++j) {
                         const double gij = grow[j];
                         if (gij == 0.0) continue;
                         const double* brow = vb.data() + j * k;
                         for (std::size_t p = 0; p < k; ++p) garow[p] += gij * brow[p];
                       }
                     }
                   }
                   if (tp.nodes_[ib].requires_grad) {
                     // dB = G^T * A
                     auto& gb = tp.nodes_[ib].grad;
                     for (std::size_t i = 0; i < n; ++i) {
                       const double* grow = g.data() + i * m;
                       const double* arow = va.data() + i * k;
                       for (std::size_t j = 0; j < m; ++j) {
                         const double gij = grow[j];
                         if (gij == 0.0) continue;
                         double* gbrow = gb.data() + j * k;
                         for (std::size_t p = 0; p < k; ++p) gbrow[p] += gij * arow[p];
                       }
                     }
                   }
                 });
}

Tensor Tape::add_row_bias(Tensor a, Tensor bias_row) {
  check_same_tape(a, "add_row_bias");
  check_same_tape(bias_row, "add_row_bias");
  const Node& na = node(a);
  const Node& nb = node(bias_row);
  if (nb.rows != 1 || nb.cols != na.cols)
    throw ValidationError("add_row_bias: bias must be 1x" + std::to_string(na.cols));
  std::vector<double> v(na.values.size());
  for (std::size_t i = 0; i < na.rows; ++i)
    for (std::size_t j = 0; j < na.cols; ++j)
      v[i * na.cols + j] = na.values[i * na.cols + j] + nb.values[j];
  const std::size_t ia = a.id_, ib = bias_row.id_, out = nodes_.size();
  const std::size_t rows = na.rows, cols = na.cols;
  return emplace(rows, cols, std::move(v), na.requires_grad || nb.requires_grad,
                 [ia, ib, out, rows, cols](Tape& tp) {
                   const auto& g = tp.nodes_[out].grad;
                   if (tp.nodes_[ia].requires_grad) {
                     auto& ga = tp.nodes_[ia].grad;
                     for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                   }
                   if (tp.nodes_[ib].requires_grad) {
                     auto& gb = tp.nodes_[ib].grad;
                     for (std::size_t i = 0; i < rows; ++i)
                       for (std::size_t j = 0; j < cols; ++j) gb[j] += g[i * cols + j];
                   }
                 });
}

Tensor Tape::repeat_row(Tensor row, std::size_t n) {
  check_same_tape(row, "repeat_row");
  const Node& nr = node(row);
  if (nr.rows != 1) throw ValidationError("repeat_row: input must have a single row");
  std::vector<double> v(n * nr.cols);
  for (std::size_t i = 0; i < n; ++i)
    std::copy(nr.values.begin(), nr.values.end(), v.begin() + i * nr.cols);
  const std::size_t ir = row.id_, out = nodes_.size(), cols = nr.cols;
  return emplace(n, cols, std::move(v), nr.requires_grad, [ir, out, n, cols](Tape& tp) {
    const auto& g = tp.nodes_[out].grad;
    auto& gr = tp.nodes_[ir].grad;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < cols; ++j) gr[j] += g[i * cols + j];
  });
}

// ---------------------------------------------------------------------------
// reductions

Tensor Tape::sum(Tensor a) {
  check_same_tape(a, "sum");
  const Node& na = node(a);
  double s = 0.0;
  for (double x : na.values) s += x;
  const std::size_t ia = a.id_, out = nodes_.size();
  return emplace(1, 1, {s}, na.requires_grad, [ia, out](Tape& tp) {
    const double g = tp.nodes_[out].grad[0];
    auto& ga = tp.nodes_[ia].grad;
    for (double& x : ga) x += g;
  });
}

Tensor Tape::row_sum(Tensor a) {
  check_same_tape(a, "row_sum");
  const Node& na = node(a);
  std::vector<double> v(na.rows, 0.0);
  for (std::size_t i = 0; i < na.rows; ++i) {
    const double* arow = na.values.data() + i * na.cols;
    double s = 0.0;
    for (std::size_t j = 0; j < na.cols; ++j) s += arow[j];
    v[i] = s;
  }
  const std::size_t ia = a.id_, out = nodes_.size(), rows = na.rows, cols = na.cols;
  return emplace(rows, 1, std::move(v), na.requires_grad, [ia, out, rows, cols](Tape& tp) {
    const auto& g = tp.nodes_[out].grad;
    auto& ga = tp.nodes_[ia].grad;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) ga[i * cols + j] += g[i];
  });
}

Tensor Tape::mask_sum(Tensor a, const Matrix& weights) {
  check_same_tape(a, "mask_sum");
  const Node& na = node(a);
  if (weights.rows() != na.rows || weights.cols() != na.cols)
    throw ValidationError("mask_sum: weight shape mismatch");
  double s = 0.0;
  const auto& w = weights.data();
  for (std::size_t i = 0; i < w.size(); ++i) s += na.values[i] * w[i];
  const std::size_t ia = a.id_, out = nodes_.size();
  // Weights are copied into the closure; they are data, not tape state.
  return emplace(1, 1, {s}, na.requires_grad, [ia, out, w](Tape& tp) {
    const double g = tp.nodes_[out].grad[0];
    auto& ga = tp.nodes_[ia].grad;
    for (std::size_t i = 0; i < w.size(); ++i) ga[i] += g * w[i];
  });
}

// ---------------------------------------------------------------------------
// nonlinearities

Tensor Tape::abs(Tensor a) {
  check_same_tape(a, "abs");
  const Node& na = node(a);
  std::vector<double> v(na.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::abs(na.values[i]);
  const std::size_t ia = a.id_, out = nodes_.size();
  return emplace(na.rows, na.cols, std::move(v), na.requires_grad, [ia, out](Tape& tp) {
    const auto& g = tp.nodes_[out].grad;
    const auto& va = tp.nodes_[ia].values;
    auto& ga = tp.nodes_[ia].grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      // subgradient at 0 is 0
      const double s = va[i] > 0.0 ? 1.0 : (va[i] < 0.0 ? -1.0 : 0.0);
      ga[i] += g[i] * s;
    }
  });
}

Tensor Tape::activation(Tensor a, Activation kind) {
  check_same_tape(a, "activation");
  const Node& na = node(a);
  const std::size_t rows = na.rows, cols = na.cols;
  const std::size_t ia = a.id_, out = nodes_.size();
  switch (kind) {
    case Activation::relu: {
      std::vector<double> v(na.values.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = na.values[i] > 0.0 ? na.values[i] : 0.0;
      return emplace(rows, cols, std::move(v), na.requires_grad, [ia, out](Tape& tp) {
        const auto& g = tp.nodes_[out].grad;
        const auto& va = tp.nodes_[ia].values;
        auto& ga = tp.nodes_[ia].grad;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (va[i] > 0.0) ga[i] += g[i];
      });
    }
    case Activation::sigmoid: {
      std::vector<double> v(na.values.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / (1.0 + std::exp(-na.values[i]));
      return emplace(rows, cols, std::move(v), na.requires_grad, [ia, out](Tape& tp) {
        const auto& g = tp.nodes_[out].grad;
        const auto& y = tp.nodes_[out].values;
        auto& ga = tp.nodes_[ia].grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
      });
    }
    case Activation::softmax_rows: {
      std::vector<double> v(na.values.size());
      for (std::size_t i = 0; i < rows; ++i) {
        const double* x = na.values.data() + i * cols;
        double mx = x[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < cols; ++j) z += std::exp(x[j] - mx);
        for (std::size_t j = 0; j < cols; ++j) v[i * cols + j] = std::exp(x[j] - mx) / z;
      }
      return emplace(rows, cols, std::move(v), na.requires_grad, [ia, out, rows, cols](Tape& tp) {
        const auto& g = tp.nodes_[out].grad;
        const auto& y = tp.nodes_[out].values;
        auto& ga = tp.nodes_[ia].grad;
        for (std::size_t i = 0; i < rows; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < cols; ++j) dot += g[i * cols + j] * y[i * cols + j];
          for (std::size_t j = 0; j < cols; ++j)
            ga[i * cols + j] += y[i * cols + j] * (g[i * cols + j] - dot);
        }
      });
    }
    case Activation::layernorm_rows: {
      if (cols < 2) throw ValidationError("layernorm_rows: row length must be >= 2");
      constexpr double kEps = 1e-5;
      std::vector<double> v(na.values.size());
      for (std::size_t i = 0; i < rows; ++i) {
        const double* x = na.values.data() + i * cols;
        double mu = 0.0;
        for (std::size_t j = 0; j < cols; ++j) mu += x[j];
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) var += (x[j] - mu) * (x[j] - mu);
        var /= static_cast<double>(cols);
        const double inv = 1.0 / std::sqrt(var + kEps);
        for (std::size_t j = 0; j < cols; ++j) v[i * cols + j] = (x[j] - mu) * inv;
      }
      return emplace(rows, cols, std::move(v), na.requires_grad, [ia, out, rows, cols](Tape& tp) {
        const auto& g = tp.nodes_[out].grad;
        const auto& y = tp.nodes_[out].values;
        const auto& x = tp.nodes_[ia].values;
        auto& ga = tp.nodes_[ia].grad;
        const double d = static_cast<double>(cols);
        for (std::size_t i = 0; i < rows; ++i) {
          const double* xr = x.data() + i * cols;
          const double* yr = y.data() + i * cols;
          const double* gr = g.data() + i * cols;
          double mu = 0.0;
          for (std::size_t j = 0; j < cols; ++j) mu += xr[j];
          mu /= d;
          double var = 0.0;
          for (std::size_t j = 0; j < cols; ++j) var += (xr[j] - mu) * (xr[j] - mu);
          var /= d;
          const double inv = 1.0 / std::sqrt(var + 1e-5);
          double gmean = 0.0, gydot = 0.0;
          for (std::size_t j = 0; j < cols; ++j) {
            gmean += gr[j];
            gydot += gr[j] * yr[j];
          }
          gmean /= d;
          gydot /= d;
          for (std::size_t j = 0; j < cols; ++j)
            ga[i * cols + j] += inv * (gr[j] - gmean - yr[j] * gydot);
        }
      });
    }
  }
  throw ValidationError("activation: unknown kind");
}

Tensor Tape::sigmoid_ce(Tensor logits, const Matrix& targets) {
  check_same_tape(logits, "sigmoid_ce");
  const Node& nl = node(logits);
  if (targets.rows() != nl.rows || targets.cols() != nl.cols)
    throw ValidationError("sigmoid_ce: target shape mismatch");
  // loss = softplus(z) - y*z, softplus evaluated stably
  std::vector<double> v(nl.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double z = nl.values[i];
    const double sp = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    v[i] = sp - targets.data()[i] * z;
  }
  const std::size_t il = logits.id_, out = nodes_.size();
  const std::vector<double> y = targets.data();
  return emplace(nl.rows, nl.cols, std::move(v), nl.requires_grad, [il, out, y](Tape& tp) {
    const auto& g = tp.nodes_[out].grad;
    const auto& z = tp.nodes_[il].values;
    auto& gl = tp.nodes_[il].grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-z[i]));
      gl[i] += g[i] * (p - y[i]);
    }
  });
}

// ---------------------------------------------------------------------------
// structure

Tensor Tape::concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ValidationError("concat_rows: no parts");
  const std::size_t rows = node(parts[0]).rows;
  std::size_t total_cols = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    check_same_tape(p, "concat_rows");
    if (node(p).rows != rows) throw ValidationError("concat_rows: row counts disagree");
    total_cols += node(p).cols;
    rg = rg || node(p).requires_grad;
  }
  std::vector<double> v(rows * total_cols);
  std::size_t off = 0;
  std::vector<std::size_t> ids, colws;
  for (const Tensor& p : parts) {
    const Node& np = node(p);
    for (std::size_t i = 0; i < rows; ++i)
      std::copy(np.values.begin() + i * np.cols, np.values.begin() + (i + 1) * np.cols,
                v.begin() + i * total_cols + off);
    off += np.cols;
    ids.push_back(p.id_);
    colws.push_back(np.cols);
  }
  const std::size_t out = nodes_.size();
  return emplace(rows, total_cols, std::move(v), rg,
                 [ids, colws, out, rows, total_cols](Tape& tp) {
                   const auto& g = tp.nodes_[out].grad;
                   std::size_t off = 0;
                   for (std::size_t p = 0; p < ids.size(); ++p) {
                     if (tp.nodes_[ids[p]].requires_grad) {
                       auto& gp = tp.nodes_[ids[p]].grad;
                       for (std::size_t i = 0; i < rows; ++i)
                         for (std::size_t j = 0; j < colws[p]; ++j)
                           gp[i * colws[p] + j] += g[i * total_cols + off + j];
                     }
                     off += colws[p];
                   }
                 });
}

Tensor Tape::gather_rows(Tensor a, std::vector<std::size_t> idx) {
  check_same_tape(a, "gather_rows");
  const Node& na = node(a);
  for (std::size_t i : idx)
    if (i >= na.rows) throw ValidationError("gather_rows: index out of range");
  const std::size_t cols = na.cols;
  const std::size_t n_rows = idx.size();  // read before the capture moves idx
  std::vector<double> v(n_rows * cols);
  for (std::size_t r = 0; r < n_rows; ++r)
    std::copy(na.values.begin() + idx[r] * cols, na.values.begin() + (idx[r] + 1) * cols,
              v.begin() + r * cols);
  const std::size_t ia = a.id_, out = nodes_.size();
  return emplace(n_rows, cols, std::move(v), na.requires_grad,
                 [ia, out, idx = std::move(idx), cols](Tape& tp) {
                   const auto& g = tp.nodes_[out].grad;
                   auto& ga = tp.nodes_[ia].grad;
                   for (std::size_t r = 0; r < idx.size(); ++r)
                     for (std::size_t j = 0; j < cols; ++j) ga[idx[r] * cols + j] += g[r * cols + j];
                 });
}

Tensor Tape::row_mean_aggregate(const std::vector<std::vector<int>>& neighbors, Tensor h) {
  check_same_tape(h, "row_mean_aggregate");
  const Node& nh = node(h);
  if (neighbors.size() != nh.rows)
    throw ValidationError("row_mean_aggregate: neighbor list count != row count");
  const std::size_t rows = nh.rows, cols = nh.cols;
  std::vector<double> v(rows * cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& nb = neighbors[i];
    if (nb.empty()) continue;  // isolated node -> zero vector
    const double inv = 1.0 / static_cast<double>(nb.size());
    double* orow = v.data() + i * cols;
    for (int u : nb) {
      const double* hrow = nh.values.data() + static_cast<std::size_t>(u) * cols;
      for (std::size_t j = 0; j < cols; ++j) orow[j] += inv * hrow[j];
    }
  }
  const std::size_t ih = h.id_, out = nodes_.size();
  // The neighbor structure is copied so the closure never outlives its input.
  return emplace(rows, cols, std::move(v), nh.requires_grad,
                 [ih, out, nbrs = neighbors, rows, cols](Tape& tp) {
                   const auto& g = tp.nodes_[out].grad;
                   auto& gh = tp.nodes_[ih].grad;
                   for (std::size_t i = 0; i < rows; ++i) {
                     const auto& nb = nbrs[i];
                     if (nb.empty()) continue;
                     const double inv = 1.0 / static_cast<double>(nb.size());
                     const double* grow = g.data() + i * cols;
                     for (int u : nb) {
                       double* ghrow = gh.data() + static_cast<std::size_t>(u) * cols;
                       for (std::size_t j = 0; j < cols; ++j) ghrow[j] += inv * grow[j];
                     }
                   }
                 });
}

}  // namespace graphfair::ad
