#include <doctest.h>

#include <random>

#include "graphfair/tensor.hpp"
#include "testutil.hpp"

using namespace graphfair;
using testutil::grad_check;
using testutil::rand_matrix;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("matmul identity returns the operand") {
  ad::Tape tape;
  std::mt19937_64 rng(1);
  Matrix m = rand_matrix(3, 4, rng);
  ad::Tensor out = tape.matmul(tape.constant(Matrix::identity(3)), tape.constant(m));
  CHECK(tape.value_of(out).data() == m.data());
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  ad::Tape tape;
  ad::Tensor a = tape.constant(Matrix(2, 3, 1.0));
  ad::Tensor b = tape.constant(Matrix(4, 2, 1.0));
  CHECK_THROWS_AS(tape.matmul(a, b), ValidationError);
}

TEST_CASE("gradient of sum(A*B) wrt A is ones * B^T") {
  std::mt19937_64 rng(2);
  Matrix a = rand_matrix(4, 3, rng), b = rand_matrix(3, 2, rng);
  ad::Tape tape;
  ad::Tensor at = tape.parameter(a);
  ad::Tensor bt = tape.constant(b);
  tape.backward(tape.sum(tape.matmul(at, bt)));
  const Matrix ga = tape.grad_of(at);
  const Matrix expected = matmul(Matrix(4, 2, 1.0), transpose(b));
  for (std::size_t i = 0; i < ga.size(); ++i)
    CHECK(ga.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-12));
}

TEST_CASE("matmul gradients match finite differences") {
  std::mt19937_64 rng(3);
  const Matrix a = rand_matrix(4, 3, rng), b = rand_matrix(3, 2, rng);
  auto res = grad_check(
      [](ad::Tape& t, const std::vector<ad::Tensor>& p) {
        return t.sum(t.sigmoid(t.matmul(p[0], p[1])));
      },
      {a, b});
  CHECK(res.ok);
  CHECK(res.max_rel < 1e-5);
}

TEST_CASE("relu clamps negatives") {
  ad::Tape tape;
  Matrix m(1, 3);
  m(0, 0) = -1.0;
  m(0, 1) = 0.0;
  m(0, 2) = 2.0;
  const Matrix out = tape.value_of(tape.relu(tape.constant(m)));
  CHECK(out(0, 0) == 0.0);
  CHECK(out(0, 1) == 0.0);
  CHECK(out(0, 2) == 2.0);
}

TEST_CASE("softmax of a constant row is uniform") {
  ad::Tape tape;
  const Matrix out = tape.value_of(tape.softmax_rows(tape.constant(Matrix(2, 4, 3.7))));
  for (double v : out.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("unknown activation kind is rejected") {
  ad::Tape tape;
  ad::Tensor x = tape.constant(Matrix(2, 2, 1.0));
  CHECK_THROWS_AS(tape.activation(x, static_cast<ad::Activation>(99)), ValidationError);
}

TEST_CASE("layernorm requires rows of length >= 2") {
  ad::Tape tape;
  CHECK_THROWS_AS(tape.layernorm_rows(tape.constant(Matrix(3, 1, 1.0))), ValidationError);
}

TEST_CASE("activation backward passes match finite differences") {
  std::mt19937_64 rng(4);
  const Matrix x = rand_matrix(3, 5, rng);
  for (auto kind : {ad::Activation::relu, ad::Activation::sigmoid, ad::Activation::softmax_rows,
                    ad::Activation::layernorm_rows}) {
    auto res = grad_check(
        [kind](ad::Tape& t, const std::vector<ad::Tensor>& p) {
          // weighting breaks symmetry so softmax/layernorm gradients are nontrivial
          Matrix w(3, 5);
          for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = 0.3 + 0.1 * double(i);
          return t.mask_sum(t.activation(p[0], kind), w);
        },
        {x});
    CAPTURE(static_cast<int>(kind));
    CHECK(res.ok);
    CHECK(res.max_rel < 1e-5);
  }
}

TEST_CASE("abs subgradient at zero is zero") {
  ad::Tape tape;
  Matrix m(1, 3);
  m(0, 0) = -2.0;
  m(0, 1) = 0.0;
  m(0, 2) = 3.0;
  ad::Tensor x = tape.parameter(m);
  tape.backward(tape.sum(tape.abs(x)));
  const Matrix g = tape.grad_of(x);
  CHECK(g(0, 0) == -1.0);
  CHECK(g(0, 1) == 0.0);
  CHECK(g(0, 2) == 1.0);
}

TEST_CASE("concat then split round-trips") {
  std::mt19937_64 rng(5);
  const Matrix a = rand_matrix(4, 2, rng), b = rand_matrix(4, 3, rng);
  ad::Tape tape;
  std::array<ad::Tensor, 2> parts{tape.constant(a), tape.constant(b)};
  const Matrix cat = tape.value_of(tape.concat_rows(std::span<const ad::Tensor>(parts)));
  REQUIRE(cat.cols() == 5);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(cat(i, j) == a(i, j));
    for (std::size_t j = 0; j < 3; ++j) CHECK(cat(i, 2 + j) == b(i, j));
  }
}

TEST_CASE("aggregate over a single neighbor copies its row") {
  std::mt19937_64 rng(6);
  const Matrix h = rand_matrix(3, 4, rng);
  std::vector<std::vector<int>> nbrs{{2}, {}, {0, 2}};
  ad::Tape tape;
  const Matrix out = tape.value_of(tape.row_mean_aggregate(nbrs, tape.constant(h)));
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(out(0, j) == h(2, j));
    CHECK(out(1, j) == 0.0);  // isolated node
    CHECK(out(2, j) == doctest::Approx(0.5 * (h(0, j) + h(2, j))).epsilon(1e-12));
  }
}

TEST_CASE("aggregation gradient matches finite differences on a 5-node graph") {
  std::mt19937_64 rng(7);
  const Matrix h = rand_matrix(5, 3, rng);
  std::vector<std::vector<int>> nbrs{{1, 2}, {0}, {0, 3, 4}, {2}, {2, 0}};
  Matrix w(5, 3);
  for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = 0.1 * double(i + 1);
  auto res = grad_check(
      [&](ad::Tape& t, const std::vector<ad::Tensor>& p) {
        return t.mask_sum(t.row_mean_aggregate(nbrs, p[0]), w);
      },
      {h});
  CHECK(res.ok);
  CHECK(res.max_rel < 1e-5);
}

TEST_CASE("backward of sum gives all-ones gradient; unused parameters stay zero") {
  std::mt19937_64 rng(8);
  ad::Tape tape;
  ad::Tensor x = tape.parameter(rand_matrix(3, 3, rng));
  ad::Tensor unused = tape.parameter(rand_matrix(2, 2, rng));
  tape.backward(tape.sum(x));
  const Matrix gx = tape.grad_of(x);
  const Matrix gu = tape.grad_of(unused);
  for (double v : gx.data()) CHECK(v == 1.0);
  for (double v : gu.data()) CHECK(v == 0.0);
}

TEST_CASE("backward on a non-scalar loss is rejected") {
  ad::Tape tape;
  ad::Tensor x = tape.parameter(Matrix(2, 2, 1.0));
  CHECK_THROWS_AS(tape.backward(x), ValidationError);
}

TEST_CASE("composite sigmoid(matmul) chain matches finite differences") {
  std::mt19937_64 rng(9);
  const Matrix a = rand_matrix(3, 4, rng), b = rand_matrix(4, 2, rng);
  auto res = grad_check(
      [](ad::Tape& t, const std::vector<ad::Tensor>& p) {
        return t.sum(t.sigmoid(t.matmul(p[0], t.relu(p[1]))));
      },
      {a, b});
  CHECK(res.ok);
}

TEST_CASE("two backward calls without reset double the gradients exactly") {
  std::mt19937_64 rng(10);
  ad::Tape tape;
  ad::Tensor x = tape.parameter(rand_matrix(2, 3, rng));
  ad::Tensor loss = tape.sum(tape.sigmoid(x));
  tape.backward(loss);
  const Matrix g1 = tape.grad_of(x);
  tape.backward(loss);
  const Matrix g2 = tape.grad_of(x);
  for (std::size_t i = 0; i < g1.size(); ++i)
    CHECK(g2.data()[i] == doctest::Approx(2.0 * g1.data()[i]).epsilon(1e-15));
  tape.zero_grad();
  tape.backward(loss);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(tape.grad_of(x).data()[i] == g1.data()[i]);
}

TEST_CASE("sigmoid_ce matches manual cross entropy and its gradient") {
  std::mt19937_64 rng(11);
  const Matrix z = rand_matrix(4, 2, rng, -3.0, 3.0);
  Matrix y(4, 2);
  std::uniform_int_distribution<int> bit(0, 1);
  for (double& v : y.data()) v = bit(rng);
  {
    ad::Tape tape;
    const Matrix ce = tape.value_of(tape.sigmoid_ce(tape.constant(z), y));
    for (std::size_t i = 0; i < ce.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-z.data()[i]));
      const double manual = -(y.data()[i] * std::log(p) + (1.0 - y.data()[i]) * std::log1p(-p));
      CHECK(ce.data()[i] == doctest::Approx(manual).epsilon(1e-10));
    }
  }
  auto res = grad_check(
      [&](ad::Tape& t, const std::vector<ad::Tensor>& p) {
        return t.sum(t.sigmoid_ce(p[0], y));
      },
      {z});
  CHECK(res.ok);
}

TEST_CASE("gather, repeat_row, row_sum and bias gradients match finite differences") {
  std::mt19937_64 rng(12);
  const Matrix h = rand_matrix(5, 3, rng);
  const Matrix bias = rand_matrix(1, 3, rng);
  auto res = grad_check(
      [](ad::Tape& t, const std::vector<ad::Tensor>& p) {
        ad::Tensor g = t.gather_rows(p[0], {0, 2, 2, 4});
        ad::Tensor biased = t.add_row_bias(g, p[1]);
        ad::Tensor rep = t.repeat_row(t.gather_rows(biased, {1}), 4);
        return t.sum(t.row_sum(t.mul(biased, rep)));
      },
      {h, bias});
  CHECK(res.ok);
  CHECK(res.max_rel < 1e-5);
}

TEST_CASE("forward passes are deterministic") {
  std::mt19937_64 rng(13);
  const Matrix a = rand_matrix(6, 6, rng);
  auto run = [&] {
    ad::Tape tape;
    return tape.value_of(tape.softmax_rows(tape.matmul(tape.constant(a), tape.constant(a))));
  };
  CHECK(run().data() == run().data());
}

TEST_SUITE_END();
