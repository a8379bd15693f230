#include <doctest.h>

#include "support/oracles.hpp"

#include <cmath>

using namespace skiptag;
using namespace skiptag::ad;
using skiptag::testing::gradient_check;
using skiptag::testing::random_matrix;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double x : row) m(r, c++) = x;
    ++r;
  }
  return m;
}

}  // namespace

TEST_CASE("matmul values") {
  const Value a = Value::constant(mat({{1, 2}, {3, 4}}));
  const Value b = Value::constant(mat({{1}, {1}}));
  const Value p = matmul(a, b);
  CHECK(p.data() == mat({{3}, {7}}));
  const Value x = Value::constant(mat({{5, -2}, {0.5, 9}}));
  CHECK(matmul(Value::constant(Matrix::Identity(2, 2)), x).data() == x.data());
  CHECK_THROWS_AS(matmul(a, Value::constant(Matrix::Zero(3, 1))), ShapeError);
}

TEST_CASE("matmul gradient against finite differences") {
  std::mt19937_64 rng(3);
  Value a = Value::parameter(random_matrix(3, 4, rng));
  Value b = Value::parameter(random_matrix(4, 2, rng));
  Value w = Value::constant(random_matrix(3, 2, rng));
  CHECK(gradient_check([&] { return sum(matmul(a, b) * w); }, {a, b}) <= 1e-6);
  // row-vector operands take a separate code path
  Value r = Value::parameter(random_matrix(1, 4, rng));
  Value wr = Value::constant(random_matrix(1, 2, rng));
  CHECK(gradient_check([&] { return sum(matmul(r, b) * wr); }, {r, b}) <= 1e-6);
}

TEST_CASE("elementwise values") {
  CHECK(sigmoid(Value::scalar(0.0)).item() == 0.5);
  CHECK(min_with_const(Value::scalar(0.6) + Value::scalar(0.7), 1.0).item() == 1.0);
  CHECK(min_with_const(Value::scalar(0.2), 1.0).item() == 0.2);
  const Value v = Value::constant(mat({{1, 2, 0, 1}}));
  CHECK(log_sum_exp(v).item() == doctest::Approx(std::log(2 * std::exp(1.0) + std::exp(2.0) + 1.0)));
  CHECK(log_sum_exp(v).item() == doctest::Approx(2.62652).epsilon(1e-5));
  CHECK(scale(v, 2.0).data() == mat({{2, 4, 0, 2}}));
  CHECK(shift(v, -1.0).data() == mat({{0, 1, -1, 0}}));
  CHECK(sum(v).item() == 4.0);
}

TEST_CASE("broadcasting") {
  const Value m = Value::constant(mat({{1, 2}, {3, 4}}));
  const Value r = Value::constant(mat({{10, 20}}));
  const Value s = Value::scalar(2.0);
  CHECK((m + r).data() == mat({{11, 22}, {13, 24}}));
  CHECK((m - s).data() == mat({{-1, 0}, {1, 2}}));
  CHECK((s * m).data() == mat({{2, 4}, {6, 8}}));
  CHECK_THROWS_AS(m + Value::constant(Matrix::Zero(3, 2)), ShapeError);
}

TEST_CASE("shape helpers") {
  const Value m = Value::constant(mat({{1, 2, 3}, {4, 5, 6}}));
  CHECK(transpose(m).data() == mat({{1, 4}, {2, 5}, {3, 6}}));
  CHECK(slice_cols(m, 1, 2).data() == mat({{2, 3}, {5, 6}}));
  CHECK(row_of(m, 1).data() == mat({{4, 5, 6}}));
  const int rows[] = {1, 1, 0};
  CHECK(gather_rows(m, rows).data() == mat({{4, 5, 6}, {4, 5, 6}, {1, 2, 3}}));
  CHECK(pick(m, 1, 2).item() == 6.0);
  const Value parts[] = {m, m};
  CHECK(concat_cols(parts).cols() == 6);
  CHECK(concat_rows(parts).rows() == 4);
  CHECK(log_sum_exp_cols(m).data()(0, 0) == doctest::Approx(std::log(std::exp(1.0) + std::exp(4.0))));
  CHECK_THROWS_AS(slice_cols(m, 2, 2), ShapeError);
}

TEST_CASE("binarize forward and straight-through gradient") {
  CHECK(binarize(Value::scalar(0.7)).item() == 1.0);
  CHECK(binarize(Value::scalar(0.3)).item() == 0.0);
  CHECK(binarize(Value::scalar(0.5)).item() == 1.0);
  CHECK(binarize(Value::scalar(0.0)).item() == 0.0);
  CHECK(binarize(Value::scalar(1.0)).item() == 1.0);
  CHECK_THROWS_AS(binarize(Value::scalar(1.2)), std::domain_error);
  CHECK_THROWS_AS(binarize(Value::scalar(-0.1)), std::domain_error);
  for (double x : {0.7, 0.3, 0.5}) {
    Value u = Value::scalar(x, true);
    binarize(u).backward();
    CHECK(u.grad()(0, 0) == 1.0);
  }
}

TEST_CASE("binarize gradient equals the identity graph") {
  std::mt19937_64 rng(5);
  Value w = Value::parameter(random_matrix(1, 3, rng));
  const Value x = Value::constant(random_matrix(1, 3, rng));
  const Value k = Value::constant(random_matrix(1, 2, rng));
  sum(binarize(sigmoid(sum(w * x))) * k).backward();
  const Matrix with = w.grad();
  w.zero_grad();
  sum(sigmoid(sum(w * x)) * k).backward();
  CHECK(with == w.grad());
}

TEST_CASE("backward semantics") {
  Value x = Value::parameter(mat({{1, -2, 3}}));
  sum(x).backward();
  CHECK(x.grad() == Matrix::Ones(1, 3));
  sum(x).backward();
  CHECK(x.grad() == Matrix::Constant(1, 3, 2.0));
  x.zero_grad();
  CHECK(x.grad() == Matrix::Zero(1, 3));
  CHECK_THROWS_AS(x.backward(), ShapeError);

  // zero then re-run is bit-identical
  std::mt19937_64 rng(11);
  Value w = Value::parameter(random_matrix(4, 3, rng));
  const Value in = Value::constant(random_matrix(2, 4, rng));
  auto loss = [&] { return log_sum_exp(ad::tanh(matmul(in, w))); };
  loss().backward();
  const Matrix first = w.grad();
  w.zero_grad();
  loss().backward();
  CHECK(w.grad() == first);
}

TEST_CASE("shared subexpressions accumulate every path") {
  Value x = Value::scalar(3.0, true);
  const Value y = x * x;
  (y + y * x).backward();  // d/dx (x^2 + x^3)
  CHECK(x.grad()(0, 0) == doctest::Approx(6.0 + 27.0));
}

TEST_CASE("constant subgraphs record no provenance") {
  const Value a = Value::constant(mat({{1, 2}}));
  const Value b = sigmoid(a + a);
  CHECK_FALSE(b.requires_grad());
  CHECK(b.node()->inputs.empty());
}

TEST_CASE("no-grad guard") {
  Value w = Value::parameter(mat({{1, 2}}));
  {
    NoGradGuard guard;
    CHECK_FALSE(sigmoid(w).requires_grad());
  }
  CHECK(sigmoid(w).requires_grad());
}

TEST_CASE("every differentiable op matches finite differences on 100 random cases") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 4);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int r = dim(rng);
    const int c = dim(rng);
    Value a = Value::parameter(random_matrix(r, c, rng));
    Value b = Value::parameter(random_matrix(r, c, rng));
    Value row = Value::parameter(random_matrix(1, c, rng));
    Value m = Value::parameter(random_matrix(c, dim(rng), rng));
    const Value weights = Value::constant(random_matrix(r, c, rng));
    const std::vector<Value> ps = {a, b, row, m};
    auto check = [&](const std::function<Value()>& f) { worst = std::max(worst, gradient_check(f, ps, 1e-4)); };
    check([&] { return sum(matmul(a, m) * sigmoid(matmul(b, m))); });
    check([&] { return sum((a + b) * weights); });
    check([&] { return sum((a - row) * weights); });
    check([&] { return sum(a * b * row); });
    check([&] { return sum(sigmoid(a) * weights); });
    check([&] { return sum(ad::tanh(a) * weights); });
    check([&] { return sum(min_with_const(a, 0.25) * weights); });
    check([&] { return sum(scale(a, -1.7) * weights) + sum(shift(b, 0.3) * weights); });
    const Value ab[] = {a, b};
    check([&] { return sum(concat_cols(ab) * concat_cols(ab)); });
    check([&] { return sum(concat_rows(ab) * concat_rows(ab)); });
    check([&] { return log_sum_exp(a * weights); });
    check([&] { return sum(log_sum_exp_cols(a + b) * row); });
    check([&] { return sum(transpose(a) * transpose(weights)); });
    check([&] { return sum(slice_cols(a, c - 1, 1) * slice_cols(b, 0, 1)); });
    check([&] { return sum(row_of(a, r - 1) * row); });
    const int idx[] = {r - 1, 0, r - 1};
    check([&] { return sum(gather_rows(a, idx) * gather_rows(b, idx)); });
    check([&] { return pick(a, r - 1, c - 1) * pick(b, 0, 0); });
  }
  CHECK(worst <= 1e-4);
}
