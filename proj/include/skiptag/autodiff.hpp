#pragma once

// Reverse-mode automatic differentiation over dense double matrices.
//
// Every value is stored as a row-major matrix: scalars are 1x1 and vectors
// are 1xN rows. Graphs are built per sequence (define-by-run) and released
// when the last handle to the root goes away. Parameters are long-lived leaf
// nodes whose gradients accumulate across graphs until zero_grad().

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace skiptag::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Node {
  Matrix data;
  Matrix grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Pushes this node's grad into its inputs' grads.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return inputs.empty(); }
};

// While alive on a thread, new ops on that thread record no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class Value {
 public:
  Value() = default;

  static Value constant(Matrix data);
  static Value parameter(Matrix data);
  static Value scalar(double x, bool requires_grad = false);
  static Value row(std::span<const double> xs, bool requires_grad = false);

  // Internal: wraps a freshly computed node.
  static Value from_op(Matrix data, const char* op, std::vector<Value> inputs,
                       std::function<void(Node&)> backward_fn);

  bool defined() const { return node_ != nullptr; }
  const Matrix& data() const { return node_->data; }
  Matrix& mutable_data() { return node_->data; }
  // Empty for op results that do not require a gradient.
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad; }
  Eigen::Index rows() const { return node_->data.rows(); }
  Eigen::Index cols() const { return node_->data.cols(); }
  bool requires_grad() const { return node_->requires_grad; }
  const char* op() const { return node_->op; }
  double item() const;

  void zero_grad();

  // Accumulates d(this)/d(leaf) into every reachable requires_grad leaf.
  // Intermediate gradients are reset first, so repeated calls add up only
  // on leaves. Throws ShapeError unless this is 1x1.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Value(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

// Standard matrix product.
Value matmul(const Value& a, const Value& b);

// Elementwise arithmetic with broadcasting: each dimension must agree or be 1.
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);

Value sigmoid(const Value& x);
Value tanh(const Value& x);
// min(x, c) elementwise; gradient passes where x < c.
Value min_with_const(const Value& x, double c);
Value scale(const Value& x, double c);
// x + c elementwise.
Value shift(const Value& x, double c);

Value concat_cols(std::span<const Value> parts);
Value concat_rows(std::span<const Value> parts);

// Sum of all elements -> 1x1.
Value sum(const Value& x);
// log(sum(exp(x))) over all elements -> 1x1.
Value log_sum_exp(const Value& x);
// Per-column log-sum-exp over rows -> 1 x cols.
Value log_sum_exp_cols(const Value& x);

Value transpose(const Value& x);
Value slice_cols(const Value& x, Eigen::Index begin, Eigen::Index count);
Value row_of(const Value& x, Eigen::Index r);
Value gather_rows(const Value& x, std::span<const int> rows);
Value pick(const Value& x, Eigen::Index r, Eigen::Index c);

// Straight-through binarizer: forward rounds to {0,1} with 0.5 -> 1,
// backward is the identity. Inputs outside [0,1] throw std::domain_error.
Value binarize(const Value& x);

double round_half_up(double x);

inline Value operator+(const Value& a, const Value& b) { return add(a, b); }
inline Value operator-(const Value& a, const Value& b) { return sub(a, b); }
inline Value operator*(const Value& a, const Value& b) { return mul(a, b); }

}  // namespace skiptag::ad
