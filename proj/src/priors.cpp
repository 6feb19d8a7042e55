#include "lfads/priors.hpp"

#include <cmath>

#include "lfads/errors.hpp"
#include "lfads/special_functions.hpp"

namespace lfads {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_finite(const Tensor& x, const char* who) {
  for (double v : x.values())
    if (!std::isfinite(v))
      throw ValueError(std::string(who) + ": non-finite value in input");
}

void check_last_dim(const Tensor& x, size_t dim, const char* who) {
  if (x.ndim() < 1 || x.shape().back() != dim)
    throw ShapeError(std::string(who) + ": input " + shape_str(x.shape()) +
                     " does not end in dim " + std::to_string(dim));
}

// Reduce an elementwise log-density to the contract's output: [b,T,dim] ->
// [b]; anything flatter -> rank-0 scalar.
Tensor reduce_log_density(const Tensor& ld) {
  if (ld.ndim() == 3) return reduce_sum(ld, {1, 2});
  return reduce_sum(ld);
}

}  // namespace

GaussianPosteriorParams make_posterior(const Tensor& raw) {
  if (raw.ndim() < 1 || raw.shape().back() % 2 != 0)
    throw ShapeError("make_posterior: raw width must be even (mean then logvar), got " +
                     shape_str(raw.shape()));
  size_t k = raw.shape().back() / 2;
  GaussianPosteriorParams post;
  post.mean = slice_last(raw, 0, k);
  post.logvar = clamp(slice_last(raw, k, k), -16.0, 16.0);
  return post;
}

Tensor sample(const GaussianPosteriorParams& post, Rng& rng, bool deterministic) {
  if (deterministic) return post.mean;
  std::vector<double> eps(post.mean.numel());
  for (double& e : eps) e = rng.normal();
  Tensor eps_t = Tensor::from(post.mean.shape(), std::move(eps));
  return add(post.mean, mul(exp(mul_scalar(post.logvar, 0.5)), eps_t));
}

std::vector<double> Prior::stationary_mean() const {
  return std::vector<double>(dim(), 0.0);
}

// ----- multivariate normal ----------------------------------------------------

MultivariateNormalPrior::MultivariateNormalPrior(size_t dim, double mean_init,
                                                 double logvar_init,
                                                 bool mean_trainable,
                                                 bool var_trainable)
    : dim_(dim) {
  if (dim < 1) throw ValueError("prior dim must be >= 1");
  std::vector<double> m(dim, mean_init), lv(dim, logvar_init);
  mean_ = mean_trainable ? Tensor::leaf({dim}, std::move(m))
                         : Tensor::from({dim}, std::move(m));
  logvar_ = var_trainable ? Tensor::leaf({dim}, std::move(lv))
                          : Tensor::from({dim}, std::move(lv));
}

Tensor MultivariateNormalPrior::log_prob(const Tensor& x) const {
  check_last_dim(x, dim_, "mvn log_prob");
  check_finite(x, "mvn log_prob");
  Tensor m = expand_last(mean_, x.shape());
  Tensor lv = expand_last(logvar_, x.shape());
  Tensor ld = -0.5 * kLog2Pi - 0.5 * lv - 0.5 * (square(x - m) * exp(neg(lv)));
  return reduce_log_density(ld);
}

std::vector<std::pair<std::string, Tensor>> MultivariateNormalPrior::params() {
  return {{"mean", mean_}, {"logvar", logvar_}};
}

std::vector<double> MultivariateNormalPrior::stationary_mean() const {
  return mean_.values();
}

// ----- AR(1) -------------------------------------------------------------------

AutoregressiveMultivariateNormalPrior::AutoregressiveMultivariateNormalPrior(
    size_t dim, double tau_init, double pvar_init, bool trainable)
    : dim_(dim) {
  if (dim < 1) throw ValueError("prior dim must be >= 1");
  if (!(tau_init > 0.0) || !(pvar_init > 0.0))
    throw ValueError("AR prior needs positive tau and process variance");
  std::vector<double> lt(dim, std::log(tau_init)), lp(dim, std::log(pvar_init));
  logtau_ = trainable ? Tensor::leaf({dim}, std::move(lt))
                      : Tensor::from({dim}, std::move(lt));
  logpvar_ = trainable ? Tensor::leaf({dim}, std::move(lp))
                       : Tensor::from({dim}, std::move(lp));
}

Tensor AutoregressiveMultivariateNormalPrior::log_prob(const Tensor& x) const {
  if (x.ndim() == 2) {
    Tensor batched = log_prob(reshape(x, {1, x.shape()[0], x.shape()[1]}));
    return reshape(batched, {});
  }
  if (x.ndim() != 3)
    throw ShapeError("AR log_prob needs a time axis: [T, dim] or [b, T, dim], got " +
                     shape_str(x.shape()));
  check_last_dim(x, dim_, "AR log_prob");
  check_finite(x, "AR log_prob");
  size_t b = x.shape()[0], T = x.shape()[1];

  // phi = exp(-1/tau); clamping 1/tau away from 0 keeps 1 - phi^2 positive.
  Tensor tinv = clamp(exp(neg(logtau_)), 1e-10, 1e10);
  Tensor phi = exp(neg(tinv));
  Tensor log_evar = logpvar_ + log(1.0 - square(phi));

  std::vector<Tensor> steps(T);
  for (size_t t = 0; t < T; ++t) steps[t] = slice_step(x, t);

  Shape row{b, dim_};
  Tensor lv0 = expand_last(logpvar_, row);
  Tensor ld0 = -0.5 * kLog2Pi - 0.5 * lv0 - 0.5 * (square(steps[0]) * exp(neg(lv0)));
  Tensor total = reduce_sum(ld0, {1});
  if (T > 1) {
    Tensor phi_e = expand_last(phi, row);
    Tensor lve = expand_last(log_evar, row);
    Tensor inv_evar = exp(neg(lve));
    for (size_t t = 1; t < T; ++t) {
      Tensor resid = steps[t] - steps[t - 1] * phi_e;
      Tensor ld = -0.5 * kLog2Pi - 0.5 * lve - 0.5 * (square(resid) * inv_evar);
      total = total + reduce_sum(ld, {1});
    }
  }
  return total;
}

std::vector<std::pair<std::string, Tensor>>
AutoregressiveMultivariateNormalPrior::params() {
  return {{"logtau", logtau_}, {"logpvar", logpvar_}};
}

std::vector<double> AutoregressiveMultivariateNormalPrior::phi() const {
  std::vector<double> out(dim_);
  for (size_t i = 0; i < dim_; ++i)
    out[i] = std::exp(-std::exp(-logtau_.values()[i]));
  return out;
}

std::vector<double> AutoregressiveMultivariateNormalPrior::process_var() const {
  std::vector<double> out(dim_);
  for (size_t i = 0; i < dim_; ++i) out[i] = std::exp(logpvar_.values()[i]);
  return out;
}

// ----- Student-t ---------------------------------------------------------------

MultivariateStudentTPrior::MultivariateStudentTPrior(size_t dim, double nu,
                                                     double scale_init)
    : dim_(dim), nu_(nu) {
  if (dim < 1) throw ValueError("prior dim must be >= 1");
  if (!(nu > 0.0) || !std::isfinite(nu))
    throw ValueError("Student-t nu must be positive and finite");
  if (!(scale_init > 0.0)) throw ValueError("Student-t scale must be positive");
  loc_ = Tensor::zeros({dim});
  logscale_ = Tensor::leaf({dim}, std::vector<double>(dim, std::log(scale_init)));
}

Tensor MultivariateStudentTPrior::log_prob(const Tensor& x) const {
  check_last_dim(x, dim_, "student-t log_prob");
  check_finite(x, "student-t log_prob");
  double c = lgamma_pos((nu_ + 1.0) / 2.0) - lgamma_pos(nu_ / 2.0) -
             0.5 * std::log(nu_ * 3.14159265358979323846);
  Tensor ls = expand_last(logscale_, x.shape());
  Tensor u = square(x - expand_last(loc_, x.shape())) * exp(-2.0 * ls);
  Tensor ld = c - ls - (0.5 * (nu_ + 1.0)) * log(1.0 + u / nu_);
  return reduce_log_density(ld);
}

std::vector<std::pair<std::string, Tensor>> MultivariateStudentTPrior::params() {
  return {{"loc", loc_}, {"logscale", logscale_}};
}

// ----- KL ----------------------------------------------------------------------

Tensor kl_gaussian_diag(const GaussianPosteriorParams& post,
                        const MultivariateNormalPrior& prior) {
  if (post.mean.ndim() != 2 || post.mean.shape()[1] != prior.dim())
    throw ShapeError("kl_gaussian_diag: posterior " + shape_str(post.mean.shape()) +
                     " vs prior dim " + std::to_string(prior.dim()));
  Tensor m = expand_last(prior.mean(), post.mean.shape());
  Tensor slv = expand_last(prior.logvar(), post.mean.shape());
  Tensor terms = exp(post.logvar - slv) + square(post.mean - m) * exp(neg(slv)) -
                 1.0 + slv - post.logvar;
  return 0.5 * reduce_sum(terms, {1});
}

Tensor kl_sampled(const GaussianPosteriorParams& post, const Tensor& z,
                  const Prior& prior) {
  if (z.ndim() != 3)
    throw ShapeError("kl_sampled: z must be [b, T, dim], got " + shape_str(z.shape()));
  if (z.shape() != post.mean.shape())
    throw ShapeError("kl_sampled: z " + shape_str(z.shape()) +
                     " does not match posterior " + shape_str(post.mean.shape()));
  check_last_dim(z, prior.dim(), "kl_sampled");
  Tensor lq = -0.5 * kLog2Pi - 0.5 * post.logvar -
              0.5 * (square(z - post.mean) * exp(neg(post.logvar)));
  return reduce_sum(lq, {1, 2}) - prior.log_prob(z);
}

}  // namespace lfads
