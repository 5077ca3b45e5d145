#include "graphaf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "graphaf/error.hpp"

namespace graphaf {

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.owned = std::move(value);
  return push(std::move(node));
}

Var Tape::variable(Tensor value) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = true;
  return push(std::move(node));
}

Var Tape::constant_ref(const Tensor& value) {
  Node node;
  node.external = &value;
  return push(std::move(node));
}

Var Tape::variable_ref(const Tensor& value) {
  Node node;
  node.external = &value;
  node.requires_grad = true;
  return push(std::move(node));
}

const Tensor& Tape::value(Var v) const {
  const Node& node = nodes_.at(v.id_);
  return node.external ? *node.external : node.owned;
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_.at(v.id_);
  if (node.has_grad) return node.grad;
  return Tensor(value(v).shape(), 0.0);
}

Tensor& Tape::grad_buffer(Var v) {
  Node& node = nodes_.at(v.id_);
  if (!node.has_grad) {
    node.grad = Tensor(value(v).shape(), 0.0);
    node.has_grad = true;
  }
  return node.grad;
}

bool Tape::any_requires_grad(const Var* begin, const Var* end) {
  bool any = false;
  for (const Var* p = begin; p != end; ++p) {
    if (p->tape_ != this) throw Error("operand recorded on a different tape");
    any = any || nodes_.at(p->id_).requires_grad;
  }
  return any;
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Backward backward) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = any_requires_grad(parents.begin(), parents.end());
  if (node.requires_grad) node.backward = std::move(backward);
  return push(std::move(node));
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, Backward backward) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = any_requires_grad(parents.data(), parents.data() + parents.size());
  if (node.requires_grad) node.backward = std::move(backward);
  return push(std::move(node));
}

void Tape::backward(Var root) {
  if (root.tape_ != this) throw Error("backward root recorded on a different tape");
  if (value(root).size() != 1) {
    throw ShapeError("backward root must be a single element, got " + value(root).shape_string());
  }
  grad_buffer(root).fill(1.0);
  for (std::size_t id = root.id_ + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.has_grad || !node.backward) continue;
    // Parents always have smaller ids, so node.grad is not reallocated here.
    node.backward(*this, node.grad);
  }
}

Tensor SparseMatrix::dense() const {
  Tensor out = Tensor::matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) out(r, col_index[k]) += values[k];
  }
  return out;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string("shape mismatch in ") + op + ": " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

void accumulate(Tape& tape, Var v, const Tensor& g) {
  if (!tape.requires_grad(v)) return;
  auto& buf = tape.grad_buffer(v);
  for (std::size_t k = 0; k < g.size(); ++k) buf[k] += g[k];
}

template <class F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = f(a[k]);
  return out;
}

}  // namespace

namespace ad {

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("shape mismatch in matmul: " + av.shape_string() + " vs " + bv.shape_string());
  }
  const std::size_t r = av.rows(), k = av.cols(), c = bv.cols();
  Tensor out = Tensor::matrix(r, c);
  gemm_accumulate(av.data(), bv.data(), out.data(), r, k, c);
  return a.tape().record(std::move(out), {a, b}, [a, b, r, k, c](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) {
      gemm_a_bt_accumulate(g.data(), t.value(b).data(), t.grad_buffer(a).data(), r, k, c);
    }
    if (t.requires_grad(b)) {
      gemm_at_b_accumulate(t.value(a).data(), g.data(), t.grad_buffer(b).data(), r, k, c);
    }
  });
}

Var add(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "add");
  Tensor out(av.shape());
  for (std::size_t k = 0; k < av.size(); ++k) out[k] = av[k] + bv[k];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    accumulate(t, a, g);
    accumulate(t, b, g);
  });
}

Var sub(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "sub");
  Tensor out(av.shape());
  for (std::size_t k = 0; k < av.size(); ++k) out[k] = av[k] - bv[k];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    accumulate(t, a, g);
    if (t.requires_grad(b)) {
      auto& buf = t.grad_buffer(b);
      for (std::size_t k = 0; k < g.size(); ++k) buf[k] -= g[k];
    }
  });
}

Var mul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "mul");
  Tensor out(av.shape());
  for (std::size_t k = 0; k < av.size(); ++k) out[k] = av[k] * bv[k];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (t.requires_grad(a)) {
      auto& buf = t.grad_buffer(a);
      for (std::size_t k = 0; k < g.size(); ++k) buf[k] += g[k] * bv[k];
    }
    if (t.requires_grad(b)) {
      auto& buf = t.grad_buffer(b);
      for (std::size_t k = 0; k < g.size(); ++k) buf[k] += g[k] * av[k];
    }
  });
}

Var div(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "div");
  Tensor out(av.shape());
  for (std::size_t k = 0; k < av.size(); ++k) {
    if (bv[k] == 0.0) throw NumericalError("division by zero at element " + std::to_string(k));
    out[k] = av[k] / bv[k];
  }
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (t.requires_grad(a)) {
      auto& buf = t.grad_buffer(a);
      for (std::size_t k = 0; k < g.size(); ++k) buf[k] += g[k] / bv[k];
    }
    if (t.requires_grad(b)) {
      auto& buf = t.grad_buffer(b);
      for (std::size_t k = 0; k < g.size(); ++k) buf[k] -= g[k] * av[k] / (bv[k] * bv[k]);
    }
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double factor) {
  Tensor out = map(a.value(), [factor](double x) { return x * factor; });
  return a.tape().record(std::move(out), {a}, [a, factor](Tape& t, const Tensor& g) {
    auto& buf = t.grad_buffer(a);
    for (std::size_t k = 0; k < g.size(); ++k) buf[k] += g[k] * factor;
  });
}

Var add_row(Var a, Var row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.size() != av.cols()) {
    throw ShapeError("shape mismatch in add_row: " + av.shape_string() + " vs " + rv.shape_string());
  }
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = av[i * c + j] + rv[j];
  }
  return a.tape().record(std::move(out), {a, row}, [a, row, r, c](Tape& t, const Tensor& g) {
    accumulate(t, a, g);
    if (t.requires_grad(row)) {
      auto& buf = t.grad_buffer(row);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) buf[j] += g[i * c + j];
      }
    }
  });
}

Var exp(Var a) {
  Tensor out = map(a.value(), [](double x) { return std::exp(x); });
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(a);
    auto& buf = t.grad_buffer(a);
    for (std::size_t k = 0; k < g.size(); ++k) buf[k] += g[k] * std::exp(av[k]);
  });
}

Var log(Var a) {
  const Tensor& av = a.value();
  for (std::size_t k = 0; k < av.size(); ++k) {
    if (!(av[k] > 0.0)) {
      throw NumericalError("log of non-positive value " + std::to_string(av[k]) + " at element " +
                           std::to_string(k));
    }
  }
  Tensor out = map(av, [](double x) { return std::log(x); });
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(a);
    auto& buf = t.grad_buffer(a);
    for (std::size_t k = 0; k < g.size(); ++k) buf[k] += g[k] / av[k];
  });
}

Var relu(Var a) {
  Tensor out = map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; });
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(a);
    auto& buf = t.grad_buffer(a);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (av[k] > 0.0) buf[k] += g[k];
    }
  });
}

Var tanh(Var a) {
  Tensor out = map(a.value(), [](double x) { return std::tanh(x); });
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(a);
    auto& buf = t.grad_buffer(a);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double y = std::tanh(av[k]);
      buf[k] += g[k] * (1.0 - y * y);
    }
  });
}

Var clamp(Var a, double lo, double hi) {
  Tensor out = map(a.value(), [lo, hi](double x) { return std::clamp(x, lo, hi); });
  return a.tape().record(std::move(out), {a}, [a, lo, hi](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(a);
    auto& buf = t.grad_buffer(a);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (av[k] >= lo && av[k] <= hi) buf[k] += g[k];
    }
  });
}

Var minimum(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "minimum");
  Tensor out(av.shape());
  for (std::size_t k = 0; k < av.size(); ++k) out[k] = std::min(av[k], bv[k]);
  // Ties route the gradient to a.
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    const bool ga = t.requires_grad(a), gb = t.requires_grad(b);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (av[k] <= bv[k]) {
        if (ga) t.grad_buffer(a)[k] += g[k];
      } else if (gb) {
        t.grad_buffer(b)[k] += g[k];
      }
    }
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double x : a.value().values()) total += x;
  return a.tape().record(Tensor::scalar(total), {a}, [a](Tape& t, const Tensor& g) {
    auto& buf = t.grad_buffer(a);
    const double s = g[0];
    for (std::size_t k = 0; k < buf.size(); ++k) buf[k] += s;
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  if (axis != 0 && axis != 1) throw ShapeError("concat axis must be 0 or 1");
  std::vector<std::size_t> rows, cols;
  for (const auto& p : parts) {
    rows.push_back(p.value().rows());
    cols.push_back(p.value().cols());
  }
  std::size_t out_rows = 0, out_cols = 0;
  if (axis == 0) {
    out_cols = cols[0];
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (cols[k] != out_cols) {
        throw ShapeError("shape mismatch in concat: " + parts[0].value().shape_string() + " vs " +
                         parts[k].value().shape_string());
      }
      out_rows += rows[k];
    }
  } else {
    out_rows = rows[0];
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (rows[k] != out_rows) {
        throw ShapeError("shape mismatch in concat: " + parts[0].value().shape_string() + " vs " +
                         parts[k].value().shape_string());
      }
      out_cols += cols[k];
    }
  }
  Tensor out = Tensor::matrix(out_rows, out_cols);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t i = 0; i < rows[k]; ++i) {
      for (std::size_t j = 0; j < cols[k]; ++j) {
        if (axis == 0) {
          out(offset + i, j) = pv[i * cols[k] + j];
        } else {
          out(i, offset + j) = pv[i * cols[k] + j];
        }
      }
    }
    offset += axis == 0 ? rows[k] : cols[k];
  }
  Tape& tape = parts[0].tape();
  return tape.record(std::move(out), parts, [parts, rows, cols, axis, out_cols](Tape& t, const Tensor& g) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (t.requires_grad(parts[k])) {
        auto& buf = t.grad_buffer(parts[k]);
        for (std::size_t i = 0; i < rows[k]; ++i) {
          for (std::size_t j = 0; j < cols[k]; ++j) {
            buf[i * cols[k] + j] += axis == 0 ? g[(offset + i) * out_cols + j]
                                              : g[i * out_cols + offset + j];
          }
        }
      }
      offset += axis == 0 ? rows[k] : cols[k];
    }
  });
}

Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  if (axis != 0 && axis != 1) throw ShapeError("slice axis must be 0 or 1");
  const std::size_t extent = axis == 0 ? r : c;
  if (begin > end || end > extent) {
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + av.shape_string());
  }
  const std::size_t out_r = axis == 0 ? end - begin : r;
  const std::size_t out_c = axis == 1 ? end - begin : c;
  Tensor out = Tensor::matrix(out_r, out_c);
  for (std::size_t i = 0; i < out_r; ++i) {
    for (std::size_t j = 0; j < out_c; ++j) {
      out(i, j) = axis == 0 ? av[(begin + i) * c + j] : av[i * c + begin + j];
    }
  }
  return a.tape().record(std::move(out), {a}, [a, axis, begin, out_r, out_c, c](Tape& t, const Tensor& g) {
    auto& buf = t.grad_buffer(a);
    for (std::size_t i = 0; i < out_r; ++i) {
      for (std::size_t j = 0; j < out_c; ++j) {
        const std::size_t src = axis == 0 ? (begin + i) * c + j : i * c + begin + j;
        buf[src] += g[i * out_c + j];
      }
    }
  });
}

Var gather_rows(Var a, const std::vector<std::size_t>& index) {
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out = Tensor::matrix(index.size(), c);
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= r) throw ShapeError("gather_rows index out of range");
    std::copy_n(av.data() + index[k] * c, c, out.data() + k * c);
  }
  return a.tape().record(std::move(out), {a}, [a, index, c](Tape& t, const Tensor& g) {
    auto& buf = t.grad_buffer(a);
    for (std::size_t k = 0; k < index.size(); ++k) {
      double* dst = buf.data() + index[k] * c;
      const double* src = g.data() + k * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Var segment_sum(Var a, const std::vector<std::size_t>& offsets) {
  const Tensor& av = a.value();
  const std::size_t c = av.cols();
  if (offsets.empty() || offsets.back() > av.rows()) throw ShapeError("segment_sum offsets out of range");
  const std::size_t segments = offsets.size() - 1;
  Tensor out = Tensor::matrix(segments, c);
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) {
      for (std::size_t j = 0; j < c; ++j) out(s, j) += av[i * c + j];
    }
  }
  return a.tape().record(std::move(out), {a}, [a, offsets, segments, c](Tape& t, const Tensor& g) {
    auto& buf = t.grad_buffer(a);
    for (std::size_t s = 0; s < segments; ++s) {
      for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) {
        for (std::size_t j = 0; j < c; ++j) buf[i * c + j] += g[s * c + j];
      }
    }
  });
}

Var spmm(std::shared_ptr<const SparseMatrix> matrix, Var a) {
  const SparseMatrix& m = *matrix;
  const Tensor& av = a.value();
  if (m.cols != av.rows()) {
    throw ShapeError("shape mismatch in spmm: [" + std::to_string(m.rows) + "x" +
                     std::to_string(m.cols) + "] vs " + av.shape_string());
  }
  const std::size_t c = av.cols();
  Tensor out = Tensor::matrix(m.rows, c);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double* dst = out.data() + r * c;
    for (std::size_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
      const double w = m.values[k];
      const double* src = av.data() + m.col_index[k] * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += w * src[j];
    }
  }
  return a.tape().record(std::move(out), {a}, [matrix, a, c](Tape& t, const Tensor& g) {
    const SparseMatrix& m = *matrix;
    auto& buf = t.grad_buffer(a);
    for (std::size_t r = 0; r < m.rows; ++r) {
      const double* src = g.data() + r * c;
      for (std::size_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
        const double w = m.values[k];
        double* dst = buf.data() + m.col_index[k] * c;
        for (std::size_t j = 0; j < c; ++j) dst[j] += w * src[j];
      }
    }
  });
}

namespace {

void check_bn_shapes(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  if (gamma.size() != x.cols() || beta.size() != x.cols()) {
    throw ShapeError("shape mismatch in batch_norm: " + x.shape_string() + " vs " +
                     gamma.shape_string() + "/" + beta.shape_string());
  }
}

}  // namespace

Var batch_norm_eval(Var x, Var gamma, Var beta, const Tensor& running_mean,
                    const Tensor& running_var, BatchNormConfig cfg) {
  const Tensor& xv = x.value();
  check_bn_shapes(xv, gamma.value(), beta.value());
  const std::size_t r = xv.rows(), c = xv.cols();
  if (running_mean.size() != c || running_var.size() != c) {
    throw ShapeError("batch_norm running statistics do not match " + xv.shape_string());
  }
  std::vector<double> inv_std(c);
  for (std::size_t j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt(running_var[j] + cfg.eps);
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  Tensor out = Tensor::matrix(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      out(i, j) = (xv(i, j) - running_mean[j]) * inv_std[j] * gv[j] + bv[j];
    }
  }
  Tensor mean_copy = running_mean;
  return x.tape().record(std::move(out), {x, gamma, beta},
                         [x, gamma, beta, inv_std, mean_copy, r, c](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(x);
    const Tensor& gv = t.value(gamma);
    if (t.requires_grad(x)) {
      auto& buf = t.grad_buffer(x);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) buf[i * c + j] += g[i * c + j] * gv[j] * inv_std[j];
      }
    }
    if (t.requires_grad(gamma)) {
      auto& buf = t.grad_buffer(gamma);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          buf[j] += g[i * c + j] * (xv[i * c + j] - mean_copy[j]) * inv_std[j];
        }
      }
    }
    if (t.requires_grad(beta)) {
      auto& buf = t.grad_buffer(beta);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) buf[j] += g[i * c + j];
      }
    }
  });
}

Var batch_norm(Var x, Var gamma, Var beta, Tensor& running_mean, Tensor& running_var,
               bool training, BatchNormConfig cfg) {
  if (!training) return batch_norm_eval(x, gamma, beta, running_mean, running_var, cfg);
  const Tensor& xv = x.value();
  check_bn_shapes(xv, gamma.value(), beta.value());
  const std::size_t r = xv.rows(), c = xv.cols();
  if (r == 0) throw ShapeError("batch_norm on an empty batch");
  std::vector<double> mu(c, 0.0), var(c, 0.0), inv_std(c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) mu[j] += xv(i, j);
  }
  for (auto& m : mu) m /= static_cast<double>(r);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double d = xv(i, j) - mu[j];
      var[j] += d * d;
    }
  }
  for (auto& v : var) v /= static_cast<double>(r);
  for (std::size_t j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + cfg.eps);
  Tensor xhat = Tensor::matrix(r, c);
  Tensor out = Tensor::matrix(r, c);
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      xhat(i, j) = (xv(i, j) - mu[j]) * inv_std[j];
      out(i, j) = xhat(i, j) * gv[j] + bv[j];
    }
  }
  update_running_stats(xv, running_mean, running_var, cfg.momentum);
  return x.tape().record(std::move(out), {x, gamma, beta},
                         [x, gamma, beta, xhat, inv_std, r, c](Tape& t, const Tensor& g) {
    const Tensor& gv = t.value(gamma);
    if (t.requires_grad(x)) {
      auto& buf = t.grad_buffer(x);
      const double n = static_cast<double>(r);
      for (std::size_t j = 0; j < c; ++j) {
        double sum_d = 0.0, sum_dx = 0.0;
        for (std::size_t i = 0; i < r; ++i) {
          const double d = g[i * c + j] * gv[j];
          sum_d += d;
          sum_dx += d * xhat[i * c + j];
        }
        for (std::size_t i = 0; i < r; ++i) {
          const double d = g[i * c + j] * gv[j];
          buf[i * c + j] += inv_std[j] / n * (n * d - sum_d - xhat[i * c + j] * sum_dx);
        }
      }
    }
    if (t.requires_grad(gamma)) {
      auto& buf = t.grad_buffer(gamma);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) buf[j] += g[i * c + j] * xhat[i * c + j];
      }
    }
    if (t.requires_grad(beta)) {
      auto& buf = t.grad_buffer(beta);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) buf[j] += g[i * c + j];
      }
    }
  });
}

Var gaussian_logpdf(Var x, Var mu, Var alpha) {
  const Tensor& xv = x.value();
  const Tensor& mv = mu.value();
  const Tensor& av = alpha.value();
  require_same_shape(xv, mv, "gaussian_logpdf");
  require_same_shape(xv, av, "gaussian_logpdf");
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  Tensor out(xv.shape());
  for (std::size_t k = 0; k < xv.size(); ++k) {
    if (!(av[k] > 0.0)) {
      throw NumericalError("gaussian_logpdf: non-positive scale " + std::to_string(av[k]) +
                           " at element " + std::to_string(k));
    }
    const double z = (xv[k] - mv[k]) / av[k];
    out[k] = -kHalfLog2Pi - std::log(av[k]) - 0.5 * z * z;
  }
  return x.tape().record(std::move(out), {x, mu, alpha}, [x, mu, alpha](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(x);
    const Tensor& mv = t.value(mu);
    const Tensor& av = t.value(alpha);
    const bool gx = t.requires_grad(x), gm = t.requires_grad(mu), ga = t.requires_grad(alpha);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double d = xv[k] - mv[k];
      const double inv = 1.0 / av[k];
      const double dz = d * inv * inv;  // d / alpha^2
      if (gx) t.grad_buffer(x)[k] -= g[k] * dz;
      if (gm) t.grad_buffer(mu)[k] += g[k] * dz;
      if (ga) t.grad_buffer(alpha)[k] += g[k] * (-inv + d * dz * inv);
    }
  });
}

}  // namespace ad

void update_running_stats(const Tensor& x, Tensor& running_mean, Tensor& running_var,
                          double momentum) {
  const std::size_t r = x.rows(), c = x.cols();
  if (r == 0) return;
  for (std::size_t j = 0; j < c; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < r; ++i) mu += x(i, j);
    mu /= static_cast<double>(r);
    double var = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
      const double d = x(i, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(r > 1 ? r - 1 : 1);
    running_mean[j] = momentum * running_mean[j] + (1.0 - momentum) * mu;
    running_var[j] = momentum * running_var[j] + (1.0 - momentum) * var;
  }
}

}  // namespace graphaf
