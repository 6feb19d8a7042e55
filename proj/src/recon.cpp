#include "lfads/recon.hpp"

#include <cmath>
#include <limits>

#include "lfads/errors.hpp"

namespace lfads {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kClamp = 16.0;

void check_support(const Tensor& data, const char* who, double min_positive,
                   bool allow_zero) {
  const auto& v = data.values();
  for (size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]))
      throw ValueError(std::string(who) + ": data element " + std::to_string(i) +
                       " is not finite");
    bool ok = (allow_zero && v[i] == 0.0) || v[i] > min_positive;
    if (!ok)
      throw ValueError(std::string(who) + ": data element " + std::to_string(i) +
                       " = " + std::to_string(v[i]) + " is outside the support");
  }
}

// Constant {0,1} masks marking exact zeros in data.
std::pair<Tensor, Tensor> zero_masks(const Tensor& data) {
  std::vector<double> z(data.numel()), nz(data.numel());
  for (size_t i = 0; i < z.size(); ++i) {
    z[i] = data.values()[i] == 0.0 ? 1.0 : 0.0;
    nz[i] = 1.0 - z[i];
  }
  return {Tensor::from(data.shape(), std::move(z)),
          Tensor::from(data.shape(), std::move(nz))};
}

Tensor gamma_nll_terms(const Tensor& log_alpha, const Tensor& log_beta,
                       const Tensor& x) {
  Tensor alpha = exp(log_alpha);
  return neg(alpha * log_beta) - (alpha - 1.0) * log(x) + exp(log_beta) * x +
         lgamma(alpha);
}

}  // namespace

std::vector<Tensor> ObservationModel::split_raw(const Tensor& raw,
                                                const Shape& data_shape) const {
  size_t P = n_params_per_output();
  if (raw.ndim() != data_shape.size() || data_shape.empty())
    throw ShapeError(name() + " nll: raw " + shape_str(raw.shape()) +
                     " vs data rank " + std::to_string(data_shape.size()));
  size_t n = data_shape.back();
  for (size_t d = 0; d + 1 < data_shape.size(); ++d)
    if (raw.shape()[d] != data_shape[d])
      throw ShapeError(name() + " nll: raw " + shape_str(raw.shape()) +
                       " does not match data leading dims");
  if (raw.shape().back() != n * P)
    throw ShapeError(name() + " expects raw width " + std::to_string(n * P) +
                     " (= " + std::to_string(n) + " outputs x " + std::to_string(P) +
                     " params), got " + std::to_string(raw.shape().back()));
  std::vector<Tensor> blocks;
  blocks.reserve(P);
  for (size_t p = 0; p < P; ++p) blocks.push_back(slice_last(raw, p * n, n));
  return blocks;
}

// ----- Poisson -----------------------------------------------------------------

Tensor PoissonModel::nll(const Tensor& raw, const Tensor& data) const {
  auto blocks = split_raw(raw, data.shape());
  check_support(data, "poisson nll", 0.0, true);
  Tensor log_rate = clamp(blocks[0], -kClamp, kClamp);
  return exp(log_rate) - data * log_rate + lgamma(data + 1.0);
}

Tensor PoissonModel::mean(const Tensor& raw) const {
  return exp(clamp(raw, -kClamp, kClamp));
}

// ----- Gaussian ------------------------------------------------------------------

GaussianModel::GaussianModel(size_t tied_neurons) : tied_(true) {
  if (tied_neurons < 1) throw ValueError("tied gaussian needs >= 1 neuron");
  logvar_ = Tensor::leaf({tied_neurons}, std::vector<double>(tied_neurons, 0.0));
}

Tensor GaussianModel::nll(const Tensor& raw, const Tensor& data) const {
  auto blocks = split_raw(raw, data.shape());
  check_support(data, "gaussian nll",
                -std::numeric_limits<double>::infinity(), false);  // finite only
  Tensor mu = blocks[0];
  Tensor lv = tied_ ? clamp(expand_last(logvar_, data.shape()), -kClamp, kClamp)
                    : clamp(blocks[1], -kClamp, kClamp);
  return 0.5 * (square(data - mu) * exp(neg(lv)) + lv + kLog2Pi);
}

Tensor GaussianModel::mean(const Tensor& raw) const {
  if (tied_) return raw;
  size_t n = raw.shape().back();
  if (n % 2 != 0)
    throw ShapeError("gaussian mean: raw width " + std::to_string(n) + " is odd");
  return slice_last(raw, 0, n / 2);
}

std::vector<std::pair<std::string, Tensor>> GaussianModel::params() {
  if (!tied_) return {};
  return {{"logvar", logvar_}};
}

// ----- Gamma ---------------------------------------------------------------------

Tensor GammaModel::nll(const Tensor& raw, const Tensor& data) const {
  auto blocks = split_raw(raw, data.shape());
  check_support(data, "gamma nll", 0.0, false);
  Tensor la = clamp(blocks[0], -kClamp, kClamp);
  Tensor lb = clamp(blocks[1], -kClamp, kClamp);
  return gamma_nll_terms(la, lb, data);
}

Tensor GammaModel::mean(const Tensor& raw) const {
  size_t n = raw.shape().back();
  if (n % 2 != 0)
    throw ShapeError("gamma mean: raw width " + std::to_string(n) + " is odd");
  Tensor la = clamp(slice_last(raw, 0, n / 2), -kClamp, kClamp);
  Tensor lb = clamp(slice_last(raw, n / 2, n / 2), -kClamp, kClamp);
  return exp(la - lb);  // alpha / beta
}

// ----- zero-inflated Gamma ---------------------------------------------------------

ZIGModel::ZIGModel(double location) : location_(location) {
  if (location < 0.0) throw ValueError("zig location must be >= 0");
}

Tensor ZIGModel::nll(const Tensor& raw, const Tensor& data) const {
  auto blocks = split_raw(raw, data.shape());
  check_support(data, "zig nll", location_, true);
  Tensor logit_q = blocks[0];
  Tensor la = clamp(blocks[1], -kClamp, kClamp);
  Tensor lb = clamp(blocks[2], -kClamp, kClamp);
  auto [zmask, nzmask] = zero_masks(data);
  // x_safe keeps log() finite at the zero elements whose gamma term is then
  // masked away; -ln q and -ln(1-q) go through softplus for stability.
  Tensor x_safe = data - location_ + zmask * (1.0 + location_);
  Tensor zero_nll = softplus(logit_q);        // -ln(1 - q)
  Tensor nonzero_nll = softplus(neg(logit_q)) // -ln q
                       + gamma_nll_terms(la, lb, x_safe);
  return zmask * zero_nll + nzmask * nonzero_nll;
}

Tensor ZIGModel::mean(const Tensor& raw) const {
  size_t w = raw.shape().back();
  if (w % 3 != 0)
    throw ShapeError("zig mean: raw width " + std::to_string(w) + " is not 3n");
  size_t n = w / 3;
  Tensor q = sigmoid(slice_last(raw, 0, n));
  Tensor la = clamp(slice_last(raw, n, n), -kClamp, kClamp);
  Tensor lb = clamp(slice_last(raw, 2 * n, n), -kClamp, kClamp);
  return q * (exp(la - lb) + location_);
}

}  // namespace lfads
