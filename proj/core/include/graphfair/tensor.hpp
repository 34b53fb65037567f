#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "graphfair/matrix.hpp"

namespace graphfair::ad {

class Tape;

// Lightweight handle to a node on a Tape. Copyable; the tape owns the data.
class Tensor {
 public:
  Tensor() = default;

  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return rows() * cols(); }
  bool requires_grad() const;

  const std::vector<double>& values() const;
  const std::vector<double>& grad() const;

  // Value of a 1x1 tensor.
  double scalar() const;

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class Activation { relu, sigmoid, softmax_rows, layernorm_rows };

// Records every operation in topological (creation) order so reverse-mode
// gradients can be accumulated in one backward sweep. Single-threaded:
// independent tapes may run on separate threads with no shared state.
//
// Gradient semantics: backward() accumulates into the grads of parameter
// leaves (interior grads are per-call scratch); a second backward() without
// zero_grad() doubles the leaf gradients exactly.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Matrix m);
  Tensor constant_scalar(double v);
  Tensor parameter(const Matrix& m);  // requires_grad leaf

  void backward(Tensor loss);
  void zero_grad();

  Matrix value_of(Tensor t) const;
  Matrix grad_of(Tensor t) const;

  std::size_t node_count() const { return nodes_.size(); }

  // -- arithmetic ----------------------------------------------------------
  Tensor add(Tensor a, Tensor b);
  Tensor sub(Tensor a, Tensor b);
  Tensor mul(Tensor a, Tensor b);  // elementwise
  Tensor scale(Tensor a, double c);
  Tensor matmul(Tensor a, Tensor b);
  Tensor matmul_nt(Tensor a, Tensor b);           // a * b^T
  Tensor add_row_bias(Tensor a, Tensor bias_row);  // (n x d) + (1 x d)
  Tensor repeat_row(Tensor row, std::size_t n);    // (1 x d) -> (n x d)

  // -- reductions ----------------------------------------------------------
  Tensor sum(Tensor a);                                // -> 1x1
  Tensor row_sum(Tensor a);                            // (n x d) -> (n x 1)
  Tensor mask_sum(Tensor a, const Matrix& weights);    // sum(a .* w) -> 1x1

  // -- nonlinearities ------------------------------------------------------
  Tensor abs(Tensor a);  // subgradient 0 at 0
  Tensor activation(Tensor a, Activation kind);
  Tensor relu(Tensor a) { return activation(a, Activation::relu); }
  Tensor sigmoid(Tensor a) { return activation(a, Activation::sigmoid); }
  Tensor softmax_rows(Tensor a) { return activation(a, Activation::softmax_rows); }
  Tensor layernorm_rows(Tensor a) { return activation(a, Activation::layernorm_rows); }

  // Elementwise binary cross-entropy of sigmoid(logits) against 0/1 targets,
  // computed in the numerically stable softplus form.
  Tensor sigmoid_ce(Tensor logits, const Matrix& targets);

  // -- structure -----------------------------------------------------------
  Tensor concat_rows(std::span<const Tensor> parts);  // feature-wise concat
  Tensor gather_rows(Tensor a, std::vector<std::size_t> idx);

  // For each node i, the mean of h over its neighbors; isolated nodes
  // aggregate to the zero vector. The neighbor structure is data, not a
  // differentiable input.
  Tensor row_mean_aggregate(const std::vector<std::vector<int>>& neighbors, Tensor h);

 private:
  struct Node {
    std::size_t rows, cols;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad;
    std::function<void(Tape&)> back;  // empty for leaves and pruned nodes
  };

  friend class Tensor;

  Tensor emplace(std::size_t rows, std::size_t cols, std::vector<double> values,
                 bool requires_grad, std::function<void(Tape&)> back);
  Node& node(Tensor t) { return nodes_[t.id_]; }
  const Node& node(Tensor t) const { return nodes_[t.id_]; }
  void check_same_tape(Tensor a, const char* op) const;
  void ensure_grad(std::size_t id);

  std::vector<Node> nodes_;
};

}  // namespace graphfair::ad
