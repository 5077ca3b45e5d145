#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "graphaf/tensor.hpp"

namespace graphaf {

class Tape;

// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode recording. Nodes are appended in evaluation order, so the
// creation order is a topological order and backward walks it in reverse.
// A tape is single-writer.
class Tape {
 public:
  // Accumulates into parents' gradients given this node's output gradient.
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  // Leaves that alias external storage; the tensor must outlive the tape and
  // stay unmodified while the tape is in use.
  Var constant_ref(const Tensor& value);
  Var variable_ref(const Tensor& value);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id_).requires_grad; }
  // Gradient after backward(); a zero tensor when the node was not reached.
  Tensor grad(Var v) const;

  // Seeds d(root)/d(root) = 1; root must hold exactly one element.
  void backward(Var root);
  std::size_t size() const { return nodes_.size(); }

  // Op implementation interface.
  Var record(Tensor value, std::initializer_list<Var> parents, Backward backward);
  Var record(Tensor value, const std::vector<Var>& parents, Backward backward);
  Tensor& grad_buffer(Var v);

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
    Backward backward;
    Tensor grad;
  };
  Var push(Node node);
  bool any_requires_grad(const Var* begin, const Var* end);

  std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

// Constant compressed-sparse-row matrix.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_index;
  std::vector<double> values;

  void push(std::size_t col, double value) {
    col_index.push_back(col);
    values.push_back(value);
  }
  void end_row() {
    row_ptr.push_back(col_index.size());
    ++rows;
  }
  Tensor dense() const;
};

struct BatchNormConfig {
  double momentum = 0.9;  // weight kept on the old running statistic
  double eps = 1e-5;
};

namespace ad {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// Throws NumericalError if any divisor entry is zero.
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double factor);
// Adds a 1 x c row to every row of an r x c matrix.
Var add_row(Var a, Var row);
Var exp(Var a);
// Throws NumericalError on non-positive entries.
Var log(Var a);
Var relu(Var a);
Var tanh(Var a);
Var clamp(Var a, double lo, double hi);
Var minimum(Var a, Var b);
// Sum / mean of all entries as a 1 x 1 tensor.
Var sum(Var a);
Var mean(Var a);
// axis 0 stacks rows, axis 1 stacks columns.
Var concat(const std::vector<Var>& parts, int axis);
Var slice(Var a, int axis, std::size_t begin, std::size_t end);
// Row k of the result is row index[k] of a; repeated indices allowed.
Var gather_rows(Var a, const std::vector<std::size_t>& index);
// Row s of the result sums rows [offsets[s], offsets[s+1]) of a.
Var segment_sum(Var a, const std::vector<std::size_t>& offsets);
// Constant sparse matrix times a.
Var spmm(std::shared_ptr<const SparseMatrix> m, Var a);
// Batch normalisation over rows. Training mode normalises by the batch
// statistics and updates the running ones; evaluation mode uses the
// running statistics.
Var batch_norm(Var x, Var gamma, Var beta, Tensor& running_mean, Tensor& running_var,
               bool training, BatchNormConfig cfg = {});
Var batch_norm_eval(Var x, Var gamma, Var beta, const Tensor& running_mean,
                    const Tensor& running_var, BatchNormConfig cfg = {});
// Elementwise log N(x; mu, alpha^2). Throws NumericalError unless alpha > 0.
Var gaussian_logpdf(Var x, Var mu, Var alpha);

}  // namespace ad

// Column means and unbiased variances of the rows of x, blended into the
// running statistics with `momentum` kept on the old values.
void update_running_stats(const Tensor& x, Tensor& running_mean, Tensor& running_var,
                          double momentum);

}  // namespace graphaf
