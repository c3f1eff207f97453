#include "lfbm/adam.hpp"
#include "lfbm/error.hpp"
#include "lfbm/finite_diff.hpp"
#include "lfbm/nn.hpp"
#include "lfbm/tensor.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace lfbm;

namespace {
Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}
}  // namespace

TEST_CASE("square gradient") {
  Tensor w = Tensor::parameter(row({1, 2}));
  backward(sum(w * w));
  CHECK(w.grad() == row({2, 4}));
}

TEST_CASE("matmul gradient against all-ones weight") {
  Tensor W = Tensor::constant(Matrix::Ones(2, 2));
  Tensor z = Tensor::parameter(row({3, 5}));
  backward(sum(matmul(z, W)));
  CHECK(z.grad() == row({2, 2}));
}

TEST_CASE("gradients accumulate until zero_grad") {
  Tensor w = Tensor::parameter(row({1.5}));
  backward(sum(scale(w, 3.0)));
  backward(sum(scale(w, 3.0)));
  CHECK(w.grad()(0, 0) == doctest::Approx(6.0));
  w.zero_grad();
  CHECK_FALSE(w.has_grad());
}

TEST_CASE("backward needs a scalar root") {
  Tensor w = Tensor::parameter(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(backward(w), ContractError);
}

TEST_CASE("shape mismatch is a contract error") {
  CHECK_THROWS_AS(add(Tensor::constant(Matrix::Ones(2, 2)), Tensor::constant(Matrix::Ones(3, 2))), ContractError);
  CHECK_THROWS_AS(matmul(Tensor::constant(Matrix::Ones(2, 3)), Tensor::constant(Matrix::Ones(2, 3))), ContractError);
}

TEST_CASE("log of zero raises a numeric error") {
  CHECK_THROWS_AS(log(Tensor::constant(Matrix::Zero(1, 1))), NumericError);
  Matrix m = Matrix::Ones(2, 2);
  m(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(check_finite(m, "m"), NumericError);
}

TEST_CASE("primitive gradients match finite differences") {
  std::mt19937_64 rng(5);
  const Matrix a0 = oracle::gaussian_matrix(3, 4, rng);
  const Matrix b0 = oracle::gaussian_matrix(1, 4, rng);
  const Matrix c0 = oracle::gaussian_matrix(4, 2, rng);
  const Matrix mask = (oracle::gaussian_matrix(3, 4, rng).array() > 0).cast<double>();
  const std::vector<int> ia = {0, 2}, ib = {1, 3};
  using Fn = std::function<Tensor(const Tensor&, const Tensor&, const Tensor&)>;
  const std::vector<std::pair<const char*, Fn>> cases = {
      {"add_bias", [](auto& a, auto& b, auto&) { return sum(square(add_bias(a, b))); }},
      {"mul_row", [](auto& a, auto& b, auto&) { return sum(mul_row(tanh(a), b)); }},
      {"matmul", [](auto& a, auto&, auto& c) { return sum(tanh(matmul(a, c))); }},
      {"exp", [](auto& a, auto&, auto&) { return mean(exp(scale(a, 0.5))); }},
      {"log", [](auto& a, auto&, auto&) { return sum(log(add_scalar(square(a), 1.0))); }},
      {"leaky_relu", [](auto& a, auto&, auto&) { return sum(square(leaky_relu(add_scalar(a, 0.01)))); }},
      {"masked_sum", [&](auto& a, auto&, auto&) { return sum(masked_sum_cols(square(a), mask)); }},
      {"sum_cols", [](auto& a, auto&, auto&) { return sum(square(sum_cols(a))); }},
      {"select_merge",
       [&](auto& a, auto&, auto&) {
         Tensor l = select_cols(a, ia), r = select_cols(a, ib);
         return sum(square(merge_cols(tanh(r), ia, mul(l, r), ib, 4)));
       }},
      {"sub_mul", [](auto& a, auto&, auto&) { return sum(mul(sub(a, tanh(a)), a)); }},
  };
  for (const auto& [name, fn] : cases) {
    CAPTURE(name);
    ParamGroup p;
    p.add("a", a0);
    p.add("b", b0);
    p.add("c", c0);
    backward(fn(p.at("a"), p.at("b"), p.at("c")));
    const Vector ad = p.flat_grad();
    auto fd = finite_diff_grad([&](const ParamGroup& q) { return fn(q.at("a"), q.at("b"), q.at("c")).item(); }, p);
    Vector fdv(ad.size());
    Eigen::Index k = 0;
    for (const auto& [pname, t] : p) {
      const Matrix& g = fd.at(pname);
      for (Eigen::Index i = 0; i < g.size(); ++i) fdv(k++) = g.data()[i];
    }
    CHECK((ad - fdv).norm() / std::max(fdv.norm(), 1e-8) < 1e-4);
  }
}

TEST_CASE("tanh mlp gradient matches finite differences") {
  std::mt19937_64 rng(7);
  ParamGroup p;
  Mlp net(p, "net", {3, 5, 2}, Activation::Tanh, Activation::Tanh, rng);
  const Matrix x = oracle::gaussian_matrix(4, 3, rng);
  auto f = [&](const ParamGroup& q) { return sum(net.forward(q, Tensor::constant(x))); };
  backward(f(p));
  const Vector ad = p.flat_grad();
  auto fd = finite_diff_grad([&](const ParamGroup& q) { return f(q).item(); }, p);
  Vector fdv(ad.size());
  Eigen::Index k = 0;
  for (const auto& [name, t] : p)
    for (Eigen::Index i = 0; i < fd.at(name).size(); ++i) fdv(k++) = fd.at(name).data()[i];
  CHECK((ad - fdv).norm() / fdv.norm() < 1e-4);
}

TEST_CASE("finite differences of simple functions") {
  ParamGroup p;
  p.add("w", Matrix::Constant(1, 1, 3.0));
  auto g = finite_diff_grad([](const ParamGroup& q) { return q.at("w").value()(0, 0) * q.at("w").value()(0, 0); }, p);
  CHECK(g.at("w")(0, 0) == doctest::Approx(6.0).epsilon(1e-6));
  ParamGroup s;
  s.add("v", row({0.3, -2, 7}));
  auto gs = finite_diff_grad([](const ParamGroup& q) { return q.at("v").value().sum(); }, s);
  CHECK((gs.at("v").array() - 1.0).abs().maxCoeff() < 1e-8);
  CHECK(s.at("v").value() == row({0.3, -2, 7}));
}

TEST_CASE("adam first step moves by about lr") {
  ParamGroup p;
  p.add("w", Matrix::Zero(1, 1));
  AdamState st(AdamOptions{0.1, 0.9, 0.999, 1e-8, 1.0});
  backward(sum(p.at("w")));
  adam_step(p, st);
  CHECK(st.t == 1);
  CHECK(p.at("w").value()(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  ParamGroup p;
  p.add("w", row({1, 2, 3}));
  AdamState st;
  backward(sum(scale(p.at("w"), 0.0)));
  adam_step(p, st);
  CHECK(st.t == 1);
  CHECK(p.at("w").value() == row({1, 2, 3}));
}

TEST_CASE("adam needs populated gradients") {
  ParamGroup p;
  p.add("w", row({1}));
  AdamState st;
  CHECK_THROWS_AS(adam_step(p, st), ContractError);
}

TEST_CASE("learning rate decays per completed epoch") {
  AdamState st(AdamOptions{0.01, 0.9, 0.999, 1e-8, 0.5});
  CHECK(st.effective_lr() == doctest::Approx(0.01));
  st.end_epoch();
  st.end_epoch();
  CHECK(st.effective_lr() == doctest::Approx(0.0025));
}
