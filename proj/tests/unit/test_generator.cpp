#include "lfbm/error.hpp"
#include "lfbm/finite_diff.hpp"
#include "lfbm/generator.hpp"
#include "lfbm/langevin.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

using namespace lfbm;

namespace {
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Generator small_gen(int d, int D, std::uint64_t seed, Activation out = Activation::Tanh, double sigma = 1.0) {
  GeneratorConfig c;
  c.latent_dim = d;
  c.data_dim = D;
  c.hidden = {6};
  c.sigma = sigma;
  c.output = out;
  return Generator(c, seed);
}

Generator zero_gen(int d, int D) {
  Generator g = small_gen(d, D, 1);
  for (auto& [name, t] : g.params()) t.mutable_value().setZero();
  return g;
}
}  // namespace

TEST_CASE("zero generator decodes to zero") {
  Generator g = zero_gen(3, 5);
  std::mt19937_64 rng(1);
  CHECK(decode(g, oracle::gaussian_matrix(4, 3, rng)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tanh output is odd at the origin") {
  GeneratorConfig c;
  c.latent_dim = 1;
  c.data_dim = 1;
  c.hidden = {};
  Generator g(c, 2);
  g.params().at("gen.w0").mutable_value()(0, 0) = 0.5;
  CHECK(decode(g, Matrix::Zero(1, 1))(0, 0) == 0.0);
}

TEST_CASE("likelihood values") {
  Generator g = zero_gen(2, 4);
  CHECK(log_likelihood(g, Matrix::Zero(1, 4), Matrix::Zero(1, 2))(0) == doctest::Approx(-2.0 * kLog2Pi));
  Generator g2 = zero_gen(2, 2);
  Matrix x(1, 2);
  x << 1.0, -1.0;
  CHECK(log_likelihood(g2, x, Matrix::Zero(1, 2))(0) == doctest::Approx(-1.0 - kLog2Pi));
}

TEST_CASE("masked likelihood") {
  std::mt19937_64 rng(3);
  Generator g = small_gen(2, 6, 4, Activation::Tanh, 0.7);
  const Matrix z = oracle::gaussian_matrix(3, 2, rng);
  const Matrix x = oracle::gaussian_matrix(3, 6, rng, 0.5);
  CHECK(masked_log_likelihood(g, x, z, Matrix::Ones(1, 6)) == log_likelihood(g, x, z));

  Matrix mask = Matrix::Zero(3, 6);
  mask.leftCols(3).setOnes();
  const Matrix gz = decode(g, z);
  const Vector got = masked_log_likelihood(g, x, z, mask);
  for (Eigen::Index i = 0; i < 3; ++i) {
    double brute = 0.0;
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double r = x(i, j) - gz(i, j);
      brute += -0.5 * r * r / 0.49 - std::log(0.7) - 0.5 * kLog2Pi;
    }
    CHECK(got(i) == doctest::Approx(brute).epsilon(1e-12));
  }

  Matrix xv = gz;
  xv.rightCols(3).array() += 5.0;
  const Vector hid = masked_log_likelihood(small_gen(2, 6, 4), xv, z, mask);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(hid(i) == doctest::Approx(-1.5 * kLog2Pi));
}

TEST_CASE("bad masks are rejected") {
  Generator g = small_gen(2, 3, 5);
  Matrix half = Matrix::Constant(1, 3, 0.5);
  CHECK_THROWS_AS(expand_mask(half, 2, 3), ContractError);
  CHECK_THROWS_AS(expand_mask(Matrix::Ones(1, 4), 2, 3), ContractError);
  CHECK_THROWS_AS(expand_mask(Matrix::Zero(1, 3), 2, 3), ContractError);
}

TEST_CASE("joint density decomposes") {
  FlowModel prior({2, 2, 4, 2.0}, 6);
  Generator g = zero_gen(2, 2);
  CHECK(joint_log_prob(prior, g, Matrix::Zero(1, 2), Matrix::Zero(1, 2))(0) == doctest::Approx(-2.0 * kLog2Pi));

  std::mt19937_64 rng(7);
  FlowModel fp({3, 2, 4, 2.0}, 8);
  oracle::randomize(fp.params(), 0.3, rng);
  Generator gen = small_gen(3, 5, 9);
  const Matrix z = oracle::gaussian_matrix(4, 3, rng);
  const Matrix x = oracle::gaussian_matrix(4, 5, rng, 0.3);
  CHECK(joint_log_prob(fp, gen, x, z) == flow_log_prob(fp, z) + log_likelihood(gen, x, z));
}

TEST_CASE("posterior score") {
  FlowModel prior({2, 2, 4, 2.0}, 10);
  Generator g = zero_gen(2, 3);
  std::mt19937_64 rng(11);
  const Matrix z = oracle::gaussian_matrix(4, 2, rng);
  CHECK((posterior_grad_z(prior, g, Matrix::Zero(4, 3), z) + z).cwiseAbs().maxCoeff() < 1e-12);

  FlowModel fp({2, 2, 4, 2.0}, 12);
  oracle::randomize(fp.params(), 0.3, rng);
  Generator gen = small_gen(2, 3, 13);
  oracle::randomize(gen.params(), 0.5, rng);
  const Matrix x = oracle::gaussian_matrix(4, 3, rng, 0.5);
  const Matrix ones = Matrix::Ones(1, 3);
  CHECK(posterior_grad_z(fp, gen, x, z, &ones) == posterior_grad_z(fp, gen, x, z));
  const Matrix g0 = posterior_grad_z(fp, gen, x, z);
  for (Eigen::Index i = 0; i < 4; ++i) {
    auto fn = [&](const Vector& v) { return joint_log_prob(fp, gen, x.row(i), Matrix(v.transpose()))(0); };
    const Vector fd = finite_diff_grad(fn, z.row(i).transpose());
    CHECK((g0.row(i).transpose() - fd).norm() / fd.norm() < 1e-4);
  }
}

TEST_CASE("decoder Jacobian matches finite differences") {
  std::mt19937_64 rng(14);
  Generator gen = small_gen(3, 4, 15);
  oracle::randomize(gen.params(), 0.7, rng);
  const Vector z = oracle::gaussian_matrix(1, 3, rng).row(0).transpose();
  auto fn = [&](const Vector& v) -> Vector { return decode(gen, Matrix(v.transpose())).row(0).transpose(); };
  const oracle::ColMatrix J = oracle::fd_jacobian(fn, z);
  for (int r = 0; r < 4; ++r) {
    Tensor zt = Tensor::parameter(Matrix(z.transpose()));
    backward(sum(select_cols(gen.frozen().decode(zt), std::vector<int>{r})));
    const Vector ad = zt.grad().row(0).transpose();
    CHECK((ad - J.row(r).transpose()).norm() / std::max(J.row(r).norm(), 1e-8) < 1e-4);
  }
}

TEST_CASE("zero Langevin steps returns the initialization") {
  FlowModel prior({2, 1, 4, 2.0}, 16);
  Generator g = small_gen(2, 3, 17);
  LangevinConfig c{0, 0.1, true, 5};
  PosteriorSample s = sample_posterior(prior, g, Matrix::Zero(10, 3), c);
  std::mt19937_64 rng(stream_seed(5, 3));
  std::normal_distribution<double> nd;
  const double a = nd(rng), b = nd(rng);
  CHECK(s.z(3, 0) == a);
  CHECK(s.z(3, 1) == b);
  CHECK(s.trace.empty());
}

TEST_CASE("noise-free chain descends to the posterior mode") {
  std::mt19937_64 rng(18);
  const oracle::LinearGaussian lg = oracle::random_linear_gaussian(2, 3, 1.0, rng);
  Generator g = oracle::affine_generator(lg);
  FlowModel prior({2, 1, 4, 2.0}, 0);
  Vector zs(2);
  zs << 0.7, -0.4;
  const Vector x = lg.A * zs + lg.b;
  PosteriorSample s = sample_posterior(prior, g, Matrix(x.transpose()), {3000, 0.05, false, 1});
  CHECK((s.z.row(0).transpose() - lg.posterior_mean(x)).norm() < 1e-8);
  CHECK(s.trace.size() == 3000u);
  CHECK(s.trace.back().mean_grad_norm < 1e-8);
}

TEST_CASE("chains are independent of batch composition") {
  FlowModel prior({2, 2, 4, 2.0}, 19);
  Generator g = small_gen(2, 3, 20);
  std::mt19937_64 rng(21);
  const Matrix x = oracle::gaussian_matrix(6, 3, rng, 0.5);
  LangevinConfig c{15, 0.1, true, 99};
  const Matrix all = sample_posterior(prior, g, x, c).z;
  const Matrix head = sample_posterior(prior, g, x.topRows(4), c).z;
  CHECK(all.topRows(4) == head);
  CHECK(sample_posterior(prior, g, x, c).z == all);
}

TEST_CASE("langevin config validation and trace output") {
  FlowModel prior({2, 1, 4, 2.0}, 22);
  Generator g = small_gen(2, 3, 23);
  CHECK_THROWS_AS(sample_posterior(prior, g, Matrix::Zero(2, 3), {5, 0.0, true, 0}), ConfigError);
  CHECK_THROWS_AS(sample_posterior(prior, g, Matrix::Zero(2, 3), {-1, 0.1, true, 0}), ConfigError);
  CHECK_THROWS_AS(sample_posterior(prior, g, Matrix::Zero(2, 4), {5, 0.1, true, 0}), ContractError);
  PosteriorSample s = sample_posterior(prior, g, Matrix::Zero(2, 3), {3, 0.1, true, 0});
  std::ostringstream os;
  write_trace_csv(os, s.trace);
  const std::string text = os.str();
  CHECK(text.rfind("step,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}
