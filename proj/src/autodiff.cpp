#include "skiptag/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace skiptag::ad {

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

[[noreturn]] void shape_fail(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

Eigen::Index broadcast_dim(Eigen::Index a, Eigen::Index b, const char* op, const Matrix& ma,
                           const Matrix& mb) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  shape_fail(op, ma, mb);
}

Matrix expand(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return m.replicate(rows / m.rows(), cols / m.cols());
}

// Sums a broadcast gradient back down to the operand's shape.
Matrix reduce_to(const Matrix& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  Matrix r = g;
  if (rows == 1 && r.rows() != 1) r = r.colwise().sum().eval();
  if (cols == 1 && r.cols() != 1) r = r.rowwise().sum().eval();
  return r;
}

thread_local bool grad_disabled = false;

void accumulate(Node& input, const Matrix& g) {
  if (input.requires_grad) input.grad += g;
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(grad_disabled) { grad_disabled = true; }
NoGradGuard::~NoGradGuard() { grad_disabled = previous_; }

Value Value::constant(Matrix data) {
  auto node = std::make_shared<Node>();
  node->grad = Matrix::Zero(data.rows(), data.cols());
  node->data = std::move(data);
  return Value(std::move(node));
}

Value Value::parameter(Matrix data) {
  Value v = constant(std::move(data));
  v.node_->requires_grad = true;
  return v;
}

Value Value::scalar(double x, bool requires_grad) {
  Matrix m(1, 1);
  m(0, 0) = x;
  return requires_grad ? parameter(std::move(m)) : constant(std::move(m));
}

Value Value::row(std::span<const double> xs, bool requires_grad) {
  Matrix m(1, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = xs[i];
  return requires_grad ? parameter(std::move(m)) : constant(std::move(m));
}

Value Value::from_op(Matrix data, const char* op, std::vector<Value> inputs,
                     std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  bool needs = false;
  if (!grad_disabled)
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  node->grad = needs ? Matrix::Zero(data.rows(), data.cols()) : Matrix::Zero(0, 0);
  node->data = std::move(data);
  node->op = op;
  // Constant subgraphs are folded: no provenance is recorded.
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node_);
    node->backward_fn = std::move(backward_fn);
  }
  return Value(std::move(node));
}

double Value::item() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("item: value is " + shape_str(data()));
  return data()(0, 0);
}

void Value::zero_grad() { node_->grad.setZero(); }

void Value::backward() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("backward: root must be 1x1, got " +
                                                   shape_str(data()));
  if (!requires_grad()) return;

  // Iterative post-order DFS; graphs over long sentences are deep.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : order)
    if (!n->is_leaf()) n->grad.setZero();
  node_->grad(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

Value matmul(const Value& a, const Value& b) {
  if (a.cols() != b.rows()) shape_fail("matmul", a.data(), b.data());
  // Row-vector operands take the matrix-vector kernels; the runtime-sized
  // general product would pick the blocked matrix-matrix path.
  Matrix out(a.rows(), b.cols());
  if (a.rows() == 1) out.row(0).noalias() = a.data().row(0) * b.data();
  else out.noalias() = a.data() * b.data();
  return Value::from_op(std::move(out), "matmul", {a, b}, [](Node& self) {
    Node& l = *self.inputs[0];
    Node& r = *self.inputs[1];
    if (l.requires_grad) {
      if (self.grad.rows() == 1) l.grad.row(0).noalias() += self.grad.row(0) * r.data.transpose();
      else l.grad.noalias() += self.grad * r.data.transpose();
    }
    if (!r.requires_grad) return;
    if (l.data.rows() == 1) {
      for (Eigen::Index i = 0; i < r.grad.rows(); ++i) r.grad.row(i) += l.data(0, i) * self.grad.row(0);
    } else {
      r.grad.noalias() += l.data.transpose() * self.grad;
    }
  });
}

Value add(const Value& a, const Value& b) {
  const auto rows = broadcast_dim(a.rows(), b.rows(), "add", a.data(), b.data());
  const auto cols = broadcast_dim(a.cols(), b.cols(), "add", a.data(), b.data());
  Matrix out = (a.rows() == rows && a.cols() == cols && b.rows() == rows && b.cols() == cols)
                   ? Matrix(a.data() + b.data())
                   : Matrix(expand(a.data(), rows, cols) + expand(b.data(), rows, cols));
  return Value::from_op(std::move(out), "add", {a, b}, [](Node& self) {
    for (auto& in : self.inputs)
      if (in->requires_grad) in->grad += reduce_to(self.grad, in->data.rows(), in->data.cols());
  });
}

Value sub(const Value& a, const Value& b) {
  const auto rows = broadcast_dim(a.rows(), b.rows(), "sub", a.data(), b.data());
  const auto cols = broadcast_dim(a.cols(), b.cols(), "sub", a.data(), b.data());
  Matrix out = expand(a.data(), rows, cols) - expand(b.data(), rows, cols);
  return Value::from_op(std::move(out), "sub", {a, b}, [](Node& self) {
    Node& l = *self.inputs[0];
    Node& r = *self.inputs[1];
    if (l.requires_grad) l.grad += reduce_to(self.grad, l.data.rows(), l.data.cols());
    if (r.requires_grad) r.grad -= reduce_to(self.grad, r.data.rows(), r.data.cols());
  });
}

Value mul(const Value& a, const Value& b) {
  const auto rows = broadcast_dim(a.rows(), b.rows(), "mul", a.data(), b.data());
  const auto cols = broadcast_dim(a.cols(), b.cols(), "mul", a.data(), b.data());
  Matrix out = expand(a.data(), rows, cols).cwiseProduct(expand(b.data(), rows, cols));
  return Value::from_op(std::move(out), "mul", {a, b}, [rows, cols](Node& self) {
    Node& l = *self.inputs[0];
    Node& r = *self.inputs[1];
    if (l.requires_grad) {
      Matrix g = self.grad.cwiseProduct(expand(r.data, rows, cols));
      l.grad += reduce_to(g, l.data.rows(), l.data.cols());
    }
    if (r.requires_grad) {
      Matrix g = self.grad.cwiseProduct(expand(l.data, rows, cols));
      r.grad += reduce_to(g, r.data.rows(), r.data.cols());
    }
  });
}

Value sigmoid(const Value& x) {
  Matrix out = x.data().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  return Value::from_op(std::move(out), "sigmoid", {x}, [](Node& self) {
    accumulate(*self.inputs[0],
               self.grad.cwiseProduct(self.data.cwiseProduct((1.0 - self.data.array()).matrix())));
  });
}

Value tanh(const Value& x) {
  Matrix out = x.data().array().tanh().matrix();
  return Value::from_op(std::move(out), "tanh", {x}, [](Node& self) {
    accumulate(*self.inputs[0],
               self.grad.cwiseProduct((1.0 - self.data.array().square()).matrix()));
  });
}

Value min_with_const(const Value& x, double c) {
  Matrix out = x.data().cwiseMin(c);
  return Value::from_op(std::move(out), "min_with_const", {x}, [c](Node& self) {
    Node& in = *self.inputs[0];
    Matrix g = (in.data.array() < c).select(self.grad, 0.0);
    accumulate(in, g);
  });
}

Value scale(const Value& x, double c) {
  return Value::from_op(x.data() * c, "scale", {x},
                        [c](Node& self) { accumulate(*self.inputs[0], self.grad * c); });
}

Value shift(const Value& x, double c) {
  Matrix out = (x.data().array() + c).matrix();
  return Value::from_op(std::move(out), "shift", {x},
                        [](Node& self) { accumulate(*self.inputs[0], self.grad); });
}

Value concat_cols(std::span<const Value> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const auto rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_fail("concat_cols", parts[0].data(), p.data());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.data();
    at += p.cols();
  }
  return Value::from_op(std::move(out), "concat_cols", {parts.begin(), parts.end()},
                        [](Node& self) {
                          Eigen::Index at = 0;
                          for (auto& in : self.inputs) {
                            const auto n = in->data.cols();
                            if (in->requires_grad) in->grad += self.grad.middleCols(at, n);
                            at += n;
                          }
                        });
}

Value concat_rows(std::span<const Value> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const auto cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_fail("concat_rows", parts[0].data(), p.data());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.data();
    at += p.rows();
  }
  return Value::from_op(std::move(out), "concat_rows", {parts.begin(), parts.end()},
                        [](Node& self) {
                          Eigen::Index at = 0;
                          for (auto& in : self.inputs) {
                            const auto n = in->data.rows();
                            if (in->requires_grad) in->grad += self.grad.middleRows(at, n);
                            at += n;
                          }
                        });
}

Value sum(const Value& x) {
  Matrix out(1, 1);
  out(0, 0) = x.data().sum();
  return Value::from_op(std::move(out), "sum", {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (in.requires_grad) in.grad.array() += self.grad(0, 0);
  });
}

Value log_sum_exp(const Value& x) {
  if (x.data().size() == 0) throw ShapeError("log_sum_exp: empty input");
  const double m = x.data().maxCoeff();
  Matrix out(1, 1);
  out(0, 0) = m + std::log((x.data().array() - m).exp().sum());
  return Value::from_op(std::move(out), "log_sum_exp", {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (in.requires_grad)
      in.grad += ((in.data.array() - self.data(0, 0)).exp() * self.grad(0, 0)).matrix();
  });
}

Value log_sum_exp_cols(const Value& x) {
  if (x.rows() == 0) throw ShapeError("log_sum_exp_cols: empty input");
  const Matrix& d = x.data();
  Matrix out(1, d.cols());
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    const double m = d.col(j).maxCoeff();
    out(0, j) = m + std::log((d.col(j).array() - m).exp().sum());
  }
  return Value::from_op(std::move(out), "log_sum_exp_cols", {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    for (Eigen::Index j = 0; j < in.data.cols(); ++j)
      in.grad.col(j).array() += (in.data.col(j).array() - self.data(0, j)).exp() * self.grad(0, j);
  });
}

Value transpose(const Value& x) {
  return Value::from_op(x.data().transpose(), "transpose", {x}, [](Node& self) {
    accumulate(*self.inputs[0], self.grad.transpose());
  });
}

Value slice_cols(const Value& x, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > x.cols())
    throw ShapeError("slice_cols: range out of bounds for " + shape_str(x.data()));
  return Value::from_op(x.data().middleCols(begin, count), "slice_cols", {x},
                        [begin, count](Node& self) {
                          Node& in = *self.inputs[0];
                          if (in.requires_grad) in.grad.middleCols(begin, count) += self.grad;
                        });
}

Value row_of(const Value& x, Eigen::Index r) {
  if (r < 0 || r >= x.rows()) throw ShapeError("row_of: row out of bounds for " +
                                               shape_str(x.data()));
  return Value::from_op(x.data().row(r), "row_of", {x}, [r](Node& self) {
    Node& in = *self.inputs[0];
    if (in.requires_grad) in.grad.row(r) += self.grad;
  });
}

Value gather_rows(const Value& x, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows())
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " out of bounds for " +
                       shape_str(x.data()));
    out.row(static_cast<Eigen::Index>(i)) = x.data().row(rows[i]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return Value::from_op(std::move(out), "gather_rows", {x}, [idx = std::move(idx)](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    for (std::size_t i = 0; i < idx.size(); ++i)
      in.grad.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

Value pick(const Value& x, Eigen::Index r, Eigen::Index c) {
  if (r < 0 || r >= x.rows() || c < 0 || c >= x.cols())
    throw ShapeError("pick: index out of bounds for " + shape_str(x.data()));
  Matrix out(1, 1);
  out(0, 0) = x.data()(r, c);
  return Value::from_op(std::move(out), "pick", {x}, [r, c](Node& self) {
    Node& in = *self.inputs[0];
    if (in.requires_grad) in.grad(r, c) += self.grad(0, 0);
  });
}

double round_half_up(double x) { return x >= 0.5 ? 1.0 : 0.0; }

Value binarize(const Value& x) {
  const Matrix& d = x.data();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double v = d.data()[i];
    if (!(v >= 0.0 && v <= 1.0))
      throw std::domain_error("binarize: input " + std::to_string(v) + " outside [0,1]");
  }
  Matrix out = d.unaryExpr([](double v) { return round_half_up(v); });
  return Value::from_op(std::move(out), "binarize", {x},
                        [](Node& self) { accumulate(*self.inputs[0], self.grad); });
}

}  // namespace skiptag::ad
