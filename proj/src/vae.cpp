#include "lfbm/vae.hpp"

#include "lfbm/error.hpp"

#include <cmath>
#include <numbers>

namespace lfbm {

PosteriorNet::PosteriorNet(const PosteriorNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg_.data_dim < 1 || cfg_.latent_dim < 1) throw ContractError("PosteriorNet: dimensions must be positive");
  if (!(cfg_.logvar_min < cfg_.logvar_max)) throw ContractError("PosteriorNet: empty log-variance range");
  std::mt19937_64 rng(seed);
  std::vector<int> sizes{cfg_.data_dim};
  sizes.insert(sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  sizes.push_back(2 * cfg_.latent_dim);
  encoder_ = Mlp(params_, "enc", sizes, Activation::LeakyReLU, Activation::Identity, rng);
  flow_ = ArPosteriorFlow({cfg_.latent_dim, cfg_.flow_steps, cfg_.flow_hidden, 2.0}, params_, "post", rng);
}

PosteriorNet PosteriorNet::frozen() const {
  PosteriorNet out = *this;
  out.params_ = params_.detached();
  return out;
}

EncoderOutput PosteriorNet::encode(const Matrix& x) const {
  if (x.cols() != cfg_.data_dim) throw ContractError("encode: data dimension mismatch");
  const int d = cfg_.latent_dim;
  std::vector<int> mi(static_cast<std::size_t>(d)), vi(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    mi[static_cast<std::size_t>(j)] = j;
    vi[static_cast<std::size_t>(j)] = d + j;
  }
  Tensor out = encoder_.forward(params_, Tensor::constant(x));
  // smooth clamp into (logvar_min, logvar_max)
  const double mid = 0.5 * (cfg_.logvar_min + cfg_.logvar_max);
  const double half = 0.5 * (cfg_.logvar_max - cfg_.logvar_min);
  Tensor raw = select_cols(out, vi);
  Tensor logvar = add_scalar(scale(tanh(scale(add_scalar(raw, -mid), 1.0 / half)), half), mid);
  return {select_cols(out, mi), logvar};
}

std::pair<Tensor, Tensor> PosteriorNet::sample(const Matrix& x, const Matrix& eps) const {
  if (eps.rows() != x.rows() || eps.cols() != cfg_.latent_dim) throw ContractError("sample: noise shape mismatch");
  EncoderOutput e = encode(x);
  Tensor epst = Tensor::constant(eps);
  Tensor z0 = add(e.mean, mul(exp(scale(e.logvar, 0.5)), epst));
  const double c = -0.5 * std::log(2.0 * std::numbers::pi) * cfg_.latent_dim;
  Tensor log_q0 = add_scalar(scale(add(sum_cols(e.logvar), sum_cols(square(epst))), -0.5), c);
  auto [z, log_det] = flow_.apply(params_, z0);
  return {z, sub(log_q0, log_det)};
}

Tensor elbo(const FlowModel& prior, const Generator& gen, const PosteriorNet& post, const Matrix& x,
            const Matrix& eps) {
  auto [z, log_q] = post.sample(x, eps);
  return sub(add(gen.log_likelihood(x, z), prior.log_prob(z)), log_q);
}

Matrix elbo_samples(const FlowModel& prior, const Generator& gen, const PosteriorNet& post, const Matrix& x,
                    int samples, std::mt19937_64& rng) {
  if (samples < 1) throw ContractError("elbo_samples: need at least one sample");
  const FlowModel fp = prior.frozen();
  const Generator fg = gen.frozen();
  const PosteriorNet fq = post.frozen();
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(x.rows(), samples);
  for (int s = 0; s < samples; ++s) {
    Matrix eps(x.rows(), post.config().latent_dim);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(rng);
    out.col(s) = elbo(fp, fg, fq, x, eps).value().col(0);
  }
  return out;
}

}  // namespace lfbm
