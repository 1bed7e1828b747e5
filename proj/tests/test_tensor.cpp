#include <doctest.h>

#include <cmath>

#include "stgnrde/error.hpp"
#include "stgnrde/tensor.hpp"
#include "test_util.hpp"

using namespace stgnrde;
using testutil::fd_gap;
using testutil::random_values;

TEST_SUITE("tensor") {

TEST_CASE("matmul matches a triple loop") {
  auto av = random_values(6, 1), bv = random_values(12, 2);
  Tensor a = Tensor::from({2, 3}, av), b = Tensor::from({3, 4}, bv);
  Tensor c = matmul(a, b);
  REQUIRE(c.shape() == Shape{2, 4});
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += av[i * 3 + k] * bv[k * 4 + j];
      CHECK(c.at(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
}

TEST_CASE("shape mismatches raise DimensionError") {
  Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(matmul(a, b), DimensionError);
  CHECK_THROWS_AS(add(a, Tensor::zeros({3, 2})), DimensionError);
  CHECK_THROWS_AS(reshape(a, {4, 2}), DimensionError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0}), DimensionError);
}

TEST_CASE("non-finite values are rejected") {
  CHECK_THROWS_AS(Tensor::from({1}, {NAN}), NumericError);
  Tensor big = Tensor::full({1, 1}, 1e200);
  CHECK_THROWS_AS(mul(big, big), NumericError);
}

TEST_CASE("broadcast add over a leading 1") {
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from({1, 2}, {10, 20});
  Tensor c = add(a, b);
  CHECK(c.at(0, 0) == 11);
  CHECK(c.at(1, 1) == 24);
}

TEST_CASE("softmax rows sum to one and stay positive") {
  Tensor a = Tensor::from({2, 3}, {1000, 1001, 999, -3, 0, 2});
  Tensor s = softmax_rows(a);
  for (std::size_t r = 0; r < 2; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(s.at(r, c) > 0.0);
      sum += s.at(r, c);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("gradients of every op against central differences") {
  auto mk = [](Shape s, std::uint64_t seed) { return Tensor::from(s, random_values(shape_size(s), seed)); };
  using V = std::vector<Tensor>;
  CHECK(fd_gap({mk({3, 4}, 1), mk({4, 2}, 2)}, [](const V& x) { return sum(matmul(x[0], x[1])); }) < 1e-8);
  CHECK(fd_gap({mk({3, 4}, 3)}, [](const V& x) { return sum(mul(transpose(x[0]), transpose(x[0]))); }) < 1e-8);
  CHECK(fd_gap({mk({3, 4}, 4), mk({1, 4}, 5)}, [](const V& x) { return sum(mul(add(x[0], x[1]), x[0])); }) < 1e-8);
  CHECK(fd_gap({mk({3, 4}, 6), mk({3, 4}, 7)}, [](const V& x) { return mean(mul(sub(x[0], x[1]), x[0])); }) < 1e-8);
  CHECK(fd_gap({mk({3, 4}, 8)}, [](const V& x) { return sum(mul(tanh(x[0]), x[0])); }) < 1e-8);
  CHECK(fd_gap({mk({3, 4}, 9)}, [](const V& x) { return sum(mul(relu(x[0]), x[0])); }) < 1e-8);
  CHECK(fd_gap({mk({3, 4}, 10)}, [](const V& x) { return sum(mul(leaky_relu(x[0], 0.2), x[0])); }) < 1e-8);
  CHECK(fd_gap({mk({3, 4}, 11)}, [](const V& x) { return sum(abs(x[0])); }) < 1e-8);
  CHECK(fd_gap({mk({3, 4}, 12), mk({3, 4}, 13)},
               [](const V& x) { return sum(mul(softmax_rows(x[0]), x[1])); }) < 1e-8);
  CHECK(fd_gap({mk({2, 6}, 14)}, [](const V& x) { return sum(mul(reshape(x[0], {3, 4}), reshape(x[0], {3, 4}))); }) < 1e-8);
  for (Activation act : {Activation::none, Activation::relu, Activation::tanh}) {
    CHECK(fd_gap({mk({5, 3}, 15), mk({3, 4}, 16), mk({1, 4}, 17)}, [act](const V& x) {
            Tensor y = linear(x[0], x[1], x[2], act);
            return sum(mul(y, y));
          }) < 1e-8);
  }
  CHECK(fd_gap({mk({4, 6}, 18), mk({4, 3}, 19)}, [](const V& x) {
          Tensor y = row_matvec(x[0], x[1]);
          return sum(mul(y, y));
        }) < 1e-8);
  CHECK(fd_gap({mk({3, 3}, 20), mk({6, 2}, 21)}, [](const V& x) {
          Tensor y = graph_mix(x[0], x[1]);
          return sum(mul(y, y));
        }) < 1e-8);
  CHECK(fd_gap({mk({6, 3}, 22), mk({6, 2}, 23)}, [](const V& x) {
          Tensor y = block_mix(x[0], x[1]);
          return sum(mul(y, y));
        }) < 1e-8);
  CHECK(fd_gap({mk({6, 1}, 24), mk({6, 1}, 25)}, [](const V& x) {
          Tensor y = outer_sum_blocks(x[0], x[1], 3);
          return sum(mul(y, y));
        }) < 1e-8);
}

TEST_CASE("row_matvec, graph_mix, block_mix against loops") {
  auto gv = random_values(2 * 6, 30), xv = random_values(2 * 3, 31);
  Tensor y = row_matvec(Tensor::from({2, 6}, gv), Tensor::from({2, 3}, xv));
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t i = 0; i < 2; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 3; ++j) s += gv[r * 6 + i * 3 + j] * xv[r * 3 + j];
      CHECK(y.at(r, i) == doctest::Approx(s).epsilon(1e-14));
    }

  auto av = random_values(4, 32), bv = random_values(4 * 3, 33);
  Tensor g = graph_mix(Tensor::from({2, 2}, av), Tensor::from({4, 3}, bv));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t k = 0; k < 3; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < 2; ++j) s += av[i * 2 + j] * bv[(b * 2 + j) * 3 + k];
        CHECK(g.at(b * 2 + i, k) == doctest::Approx(s).epsilon(1e-14));
      }

  auto pv = random_values(4 * 2, 34);
  Tensor bm = block_mix(Tensor::from({4, 2}, pv), Tensor::from({4, 3}, bv));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t k = 0; k < 3; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < 2; ++j) s += pv[(b * 2 + i) * 2 + j] * bv[(b * 2 + j) * 3 + k];
        CHECK(bm.at(b * 2 + i, k) == doctest::Approx(s).epsilon(1e-14));
      }
}

TEST_CASE("backward accumulates until zero_grad and clears the tape") {
  Tensor w = Tensor::from({1}, {3.0}).set_requires_grad();
  backward(sum(mul(w, w)));
  CHECK(Tape::active().size() == 0);
  CHECK(w.grad()[0] == doctest::Approx(6.0));
  backward(sum(mul(w, w)));
  CHECK(w.grad()[0] == doctest::Approx(12.0));
  w.zero_grad();
  CHECK_FALSE(w.has_grad());
}

TEST_CASE("NoGradGuard leaves the tape empty") {
  Tensor w = Tensor::from({2}, {1.0, 2.0}).set_requires_grad();
  {
    NoGradGuard g;
    Tensor y = sum(mul(w, w));
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(Tape::active().size() == 0);
}

TEST_CASE("backward needs a scalar") {
  Tensor w = Tensor::from({2}, {1.0, 2.0}).set_requires_grad();
  Tensor y = mul(w, w);
  CHECK_THROWS_AS(backward(y), ContractError);
  Tape::active().clear();
}

TEST_CASE("non-leaf tensors cannot be mutated") {
  Tensor w = Tensor::from({2}, {1.0, 2.0}).set_requires_grad();
  Tensor y = mul(w, w);
  CHECK_THROWS_AS(y.mutable_data(), ContractError);
  Tape::active().clear();
}

}
