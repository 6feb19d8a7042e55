#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lfads/tensor.hpp"

namespace lfads {

// Reconstruction likelihood family. Raw network outputs for N observed
// dimensions arrive as [..., N * P] with the P parameter channels in blocks
// (params for all neurons, then the next param): e.g. Gaussian raw is
// [means..., logvars...]. Links (exp, sigmoid, clamping of log-scale raws to
// +-16) map any finite raw values to valid distribution parameters, so the
// NLL stays finite on in-support data.
class ObservationModel {
 public:
  virtual ~ObservationModel() = default;
  virtual std::string name() const = 0;
  virtual size_t n_params_per_output() const = 0;
  // Elementwise -log p(data | link(raw)), shape of data.
  virtual Tensor nll(const Tensor& raw, const Tensor& data) const = 0;
  // Distribution mean under link(raw), shape of data.
  virtual Tensor mean(const Tensor& raw) const = 0;
  // Model-owned trainable leaves (empty for most models).
  virtual std::vector<std::pair<std::string, Tensor>> params() { return {}; }

 protected:
  // Splits raw into per-parameter blocks and validates shapes.
  std::vector<Tensor> split_raw(const Tensor& raw, const Shape& data_shape) const;
};

// Counts: rate = exp(raw); accepts real k >= 0 via lgamma(k + 1).
class PoissonModel : public ObservationModel {
 public:
  std::string name() const override { return "poisson"; }
  size_t n_params_per_output() const override { return 1; }
  Tensor nll(const Tensor& raw, const Tensor& data) const override;
  Tensor mean(const Tensor& raw) const override;
};

// raw = (mean, logvar) per output; or mean only with a per-neuron trainable
// logvar owned by the model (tied mode).
class GaussianModel : public ObservationModel {
 public:
  GaussianModel() = default;                   // heteroscedastic, 2 raw params
  explicit GaussianModel(size_t tied_neurons); // tied per-neuron variance
  std::string name() const override { return "gaussian"; }
  size_t n_params_per_output() const override { return tied_ ? 1 : 2; }
  Tensor nll(const Tensor& raw, const Tensor& data) const override;
  Tensor mean(const Tensor& raw) const override;
  std::vector<std::pair<std::string, Tensor>> params() override;

 private:
  bool tied_ = false;
  Tensor logvar_;  // [tied_neurons] when tied
};

// raw = (log alpha, log beta); support x > 0.
class GammaModel : public ObservationModel {
 public:
  std::string name() const override { return "gamma"; }
  size_t n_params_per_output() const override { return 2; }
  Tensor nll(const Tensor& raw, const Tensor& data) const override;
  Tensor mean(const Tensor& raw) const override;
};

// Zero-inflated gamma: raw = (logit q, log alpha, log beta) with q the
// probability of a nonzero observation; zeros are an exact point mass. An
// optional location shifts the gamma component (support x == 0 or
// x > location).
class ZIGModel : public ObservationModel {
 public:
  explicit ZIGModel(double location = 0.0);
  std::string name() const override { return "zig"; }
  size_t n_params_per_output() const override { return 3; }
  Tensor nll(const Tensor& raw, const Tensor& data) const override;
  Tensor mean(const Tensor& raw) const override;
  double location() const { return location_; }

 private:
  double location_;
};

}  // namespace lfads
