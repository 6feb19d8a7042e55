#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "lfads/dataset.hpp"
#include "lfads/errors.hpp"
#include "lfads/rng.hpp"

namespace lfads {

namespace {

std::array<double, 3> deriv(const std::array<double, 3>& s, double sigma,
                            double rho, double beta) {
  return {sigma * (s[1] - s[0]), s[0] * (rho - s[2]) - s[1],
          s[0] * s[1] - beta * s[2]};
}

void check_positive(const char* name, double v) {
  if (!(v > 0.0)) throw ValueError(std::string(name) + " must be positive");
}

}  // namespace

std::array<double, 3> lorenz_rk4_step(const std::array<double, 3>& s, double dt,
                                      double sigma, double rho, double beta) {
  auto k1 = deriv(s, sigma, rho, beta);
  std::array<double, 3> s2{s[0] + 0.5 * dt * k1[0], s[1] + 0.5 * dt * k1[1],
                           s[2] + 0.5 * dt * k1[2]};
  auto k2 = deriv(s2, sigma, rho, beta);
  std::array<double, 3> s3{s[0] + 0.5 * dt * k2[0], s[1] + 0.5 * dt * k2[1],
                           s[2] + 0.5 * dt * k2[2]};
  auto k3 = deriv(s3, sigma, rho, beta);
  std::array<double, 3> s4{s[0] + dt * k3[0], s[1] + dt * k3[1], s[2] + dt * k3[2]};
  auto k4 = deriv(s4, sigma, rho, beta);
  std::array<double, 3> out;
  for (int c = 0; c < 3; ++c)
    out[c] = s[c] + dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
  return out;
}

TrialDataset generate_lorenz(const LorenzConfig& cfg) {
  if (cfg.n_trials < 2) throw ValueError("n_trials must be >= 2 to split");
  if (cfg.t_bins < 1) throw ValueError("t_bins must be >= 1");
  if (cfg.n_neurons < 3) throw ValueError("n_neurons must be >= 3");
  check_positive("dt", cfg.dt);
  check_positive("base_rate", cfg.base_rate);
  check_positive("sigma", cfg.sigma);
  check_positive("rho", cfg.rho);
  check_positive("beta", cfg.beta);
  if (!(cfg.valid_frac > 0.0 && cfg.valid_frac < 1.0))
    throw ValueError("valid_frac must be in (0, 1)");
  size_t n_valid = static_cast<size_t>(std::lround(
      static_cast<double>(cfg.n_trials) * cfg.valid_frac));
  if (n_valid == 0 || n_valid >= cfg.n_trials)
    throw ValueError("valid_frac leaves an empty split");
  size_t n_train = cfg.n_trials - n_valid;

  size_t t_recon = cfg.t_bins + cfg.fp_bins;
  size_t n_recon = cfg.n_neurons + cfg.n_heldout;

  // Integrate: per-trial random start, burn onto the attractor, then one RK4
  // step per bin.
  std::vector<double> states(cfg.n_trials * t_recon * 3);
  for (size_t i = 0; i < cfg.n_trials; ++i) {
    Rng rng(derive_seed(cfg.seed, "lorenz-init", i));
    std::array<double, 3> s{rng.uniform(-15.0, 15.0), rng.uniform(-15.0, 15.0),
                            rng.uniform(-15.0, 15.0)};
    for (size_t b = 0; b < cfg.burn_steps; ++b)
      s = lorenz_rk4_step(s, cfg.dt, cfg.sigma, cfg.rho, cfg.beta);
    for (size_t t = 0; t < t_recon; ++t) {
      for (int c = 0; c < 3; ++c) states[(i * t_recon + t) * 3 + c] = s[c];
      s = lorenz_rk4_step(s, cfg.dt, cfg.sigma, cfg.rho, cfg.beta);
    }
  }

  // Standardize each state channel over the whole dataset.
  size_t n_bins = cfg.n_trials * t_recon;
  for (int c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (size_t k = 0; k < n_bins; ++k) mean += states[k * 3 + c];
    mean /= static_cast<double>(n_bins);
    double var = 0.0;
    for (size_t k = 0; k < n_bins; ++k) {
      double d = states[k * 3 + c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n_bins);
    double inv_sd = 1.0 / std::sqrt(var);
    for (size_t k = 0; k < n_bins; ++k)
      states[k * 3 + c] = (states[k * 3 + c] - mean) * inv_sd;
  }

  // Random readout, then bisect a global gain g so the mean of
  // exp(g * proj + b) hits base_rate. b = log(base_rate) - 1 starts the
  // bracket below the target (gain 0 gives base_rate / e).
  Rng wrng(derive_seed(cfg.seed, "lorenz-readout"));
  std::vector<double> w(n_recon * 3);
  for (double& v : w) v = wrng.normal();
  double b = std::log(cfg.base_rate) - 1.0;

  std::vector<double> proj(n_bins * n_recon);
  for (size_t k = 0; k < n_bins; ++k)
    for (size_t n = 0; n < n_recon; ++n) {
      double p = 0.0;
      for (int c = 0; c < 3; ++c) p += w[n * 3 + c] * states[k * 3 + c];
      proj[k * n_recon + n] = p;
    }

  auto mean_rate = [&](double g) {
    double acc = 0.0;
    for (double p : proj) acc += std::exp(g * p + b);
    return acc / static_cast<double>(proj.size());
  };
  double lo = 0.0, hi = 1.0;
  while (mean_rate(hi) < cfg.base_rate) {
    hi *= 2.0;
    if (hi > 64.0) throw ValueError("rate calibration failed to bracket");
  }
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    (mean_rate(mid) < cfg.base_rate ? lo : hi) = mid;
  }
  double gain = 0.5 * (lo + hi);

  // Rates and Poisson counts; per-trial spike streams.
  std::vector<double> rates(n_bins * n_recon), spikes(n_bins * n_recon);
  for (size_t i = 0; i < cfg.n_trials; ++i) {
    Rng srng(derive_seed(cfg.seed, "lorenz-spikes", i));
    for (size_t t = 0; t < t_recon; ++t)
      for (size_t n = 0; n < n_recon; ++n) {
        size_t at = (i * t_recon + t) * n_recon + n;
        rates[at] = std::exp(gain * proj[at] + b);
        spikes[at] = static_cast<double>(srng.poisson(rates[at]));
      }
  }

  TrialDataset ds;
  ds.n_train = n_train;
  ds.n_valid = n_valid;
  ds.t_enc = cfg.t_bins;
  ds.t_recon = t_recon;
  ds.n_enc = cfg.n_neurons;
  ds.n_recon = n_recon;
  ds.train_recon.assign(spikes.begin(),
                        spikes.begin() + static_cast<ptrdiff_t>(n_train * t_recon * n_recon));
  ds.valid_recon.assign(spikes.begin() + static_cast<ptrdiff_t>(n_train * t_recon * n_recon),
                        spikes.end());
  ds.train_truth.assign(rates.begin(),
                        rates.begin() + static_cast<ptrdiff_t>(n_train * t_recon * n_recon));
  ds.valid_truth.assign(rates.begin() + static_cast<ptrdiff_t>(n_train * t_recon * n_recon),
                        rates.end());
  auto slab = [&](size_t trial0, size_t trials) {
    std::vector<double> out(trials * cfg.t_bins * cfg.n_neurons);
    for (size_t i = 0; i < trials; ++i)
      for (size_t t = 0; t < cfg.t_bins; ++t)
        for (size_t n = 0; n < cfg.n_neurons; ++n)
          out[(i * cfg.t_bins + t) * cfg.n_neurons + n] =
              spikes[((trial0 + i) * t_recon + t) * n_recon + n];
    return out;
  };
  ds.train_encod = slab(0, n_train);
  ds.valid_encod = slab(n_train, n_valid);
  ds.validate();
  return ds;
}

}  // namespace lfads
