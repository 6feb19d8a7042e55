#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lfads/rng.hpp"
#include "lfads/tensor.hpp"

namespace lfads {

// Diagonal-Gaussian posterior over a latent: IC shape [b, dim], controller
// output shape [b, T, dim]. logvar is clamped to [-16, 16] at construction.
struct GaussianPosteriorParams {
  Tensor mean;
  Tensor logvar;
};

// Splits a raw encoder readout of width 2*dim (mean then logvar) along the
// last axis. Odd width throws.
GaussianPosteriorParams make_posterior(const Tensor& raw);

// Reparameterized sample mean + exp(0.5*logvar) * eps; deterministic mode
// returns the mean tensor itself. eps is drawn element by element in row-major
// order so the stream position is reproducible.
Tensor sample(const GaussianPosteriorParams& post, Rng& rng, bool deterministic);

// Prior over a latent vector (per-trial IC) or sequence (controller outputs).
// log_prob accepts [b, T, dim] -> per-trial [b]; [T, dim] -> scalar; and, for
// time-factorized priors, [dim] -> scalar. Built from taped ops so gradients
// reach both x and any trainable parameters.
class Prior {
 public:
  virtual ~Prior() = default;
  virtual std::string name() const = 0;
  virtual size_t dim() const = 0;
  virtual Tensor log_prob(const Tensor& x) const = 0;
  // Per-dimension mean of the stationary/marginal distribution, for driving
  // the generator on posterior-free forward-prediction steps.
  virtual std::vector<double> stationary_mean() const;
  // All parameter leaves (trainable ones have requires_grad set).
  virtual std::vector<std::pair<std::string, Tensor>> params() = 0;
};

// Independent N(mean_i, exp(logvar_i)); mean fixed at 0 by default.
class MultivariateNormalPrior : public Prior {
 public:
  explicit MultivariateNormalPrior(size_t dim, double mean_init = 0.0,
                                   double logvar_init = 0.0,
                                   bool mean_trainable = false,
                                   bool var_trainable = true);
  std::string name() const override { return "multivariate_normal"; }
  size_t dim() const override { return dim_; }
  Tensor log_prob(const Tensor& x) const override;
  std::vector<double> stationary_mean() const override;
  std::vector<std::pair<std::string, Tensor>> params() override;

  const Tensor& mean() const { return mean_; }
  const Tensor& logvar() const { return logvar_; }

 private:
  size_t dim_;
  Tensor mean_, logvar_;
};

// Independent stationary AR(1) chains: x_1 ~ N(0, pvar), x_t ~
// N(phi x_{t-1}, pvar (1 - phi^2)) with phi = exp(-1 / tau). tau and pvar are
// trainable through their logs.
class AutoregressiveMultivariateNormalPrior : public Prior {
 public:
  AutoregressiveMultivariateNormalPrior(size_t dim, double tau_init = 10.0,
                                        double pvar_init = 0.1,
                                        bool trainable = true);
  std::string name() const override { return "ar1_multivariate_normal"; }
  size_t dim() const override { return dim_; }
  Tensor log_prob(const Tensor& x) const override;
  std::vector<std::pair<std::string, Tensor>> params() override;

  std::vector<double> phi() const;
  std::vector<double> process_var() const;
  const Tensor& logtau() const { return logtau_; }
  const Tensor& logpvar() const { return logpvar_; }

 private:
  size_t dim_;
  Tensor logtau_, logpvar_;
};

// Independent Student-t with fixed nu, fixed location 0 and trainable
// log-scale; heavy tails let inferred inputs spike.
class MultivariateStudentTPrior : public Prior {
 public:
  MultivariateStudentTPrior(size_t dim, double nu, double scale_init = 1.0);
  std::string name() const override { return "multivariate_student_t"; }
  size_t dim() const override { return dim_; }
  Tensor log_prob(const Tensor& x) const override;
  std::vector<std::pair<std::string, Tensor>> params() override;

  double nu() const { return nu_; }
  const Tensor& loc() const { return loc_; }
  const Tensor& logscale() const { return logscale_; }

 private:
  size_t dim_;
  double nu_;
  Tensor loc_, logscale_;
};

// Analytic diagonal-Gaussian KL(q || p) summed over dims, one value per trial:
// posterior [b, dim] against an MVN prior -> [b].
Tensor kl_gaussian_diag(const GaussianPosteriorParams& post,
                        const MultivariateNormalPrior& prior);

// Single-sample pathwise estimate log q(z) - log p(z) per trial for
// time-factorized posteriors over [b, T, dim]; z must be the same sample that
// drives the generator.
Tensor kl_sampled(const GaussianPosteriorParams& post, const Tensor& z,
                  const Prior& prior);

}  // namespace lfads
