#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lfads/augmentations.hpp"
#include "lfads/dataset.hpp"
#include "lfads/priors.hpp"
#include "lfads/recon.hpp"
#include "lfads/rng.hpp"
#include "lfads/tensor.hpp"

namespace lfads {

// Architecture and loss hyperparameters. Data dims (channel counts, window
// lengths) live on the batch, not here.
struct LFADSConfig {
  size_t encod_dim = 40;  // hidden size of both bidirectional encoders
  size_t ic_dim = 8;
  size_t ci_lag = 1;      // lag on the backward controller-input stream
  size_t con_dim = 24;
  size_t co_dim = 2;      // 0 disables the controller path entirely
  size_t gen_dim = 64;
  size_t fac_dim = 8;

  double dropout = 0.0;   // encod input + generator output, train phase only

  double kl_ic_scale = 1.0;
  double kl_co_scale = 1.0;
  double l2_gen_scale = 0.0;
  double l2_con_scale = 0.0;
  size_t kl_start_step = 0;
  size_t kl_increase_steps = 0;  // 0 = jump straight to full weight at start
  size_t l2_start_step = 0;
  size_t l2_increase_steps = 0;

  double cell_clip = 5.0;  // elementwise clamp on every GRU state update
};

// Throws ValueError on nonsense (zero dims other than co_dim, negative
// weights, dropout outside [0,1), non-positive clip).
void validate(const LFADSConfig& cfg);

// clamp((step - start) / increase, 0, 1); increase == 0 degenerates to a
// step function that switches on at `start`.
double ramp_weight(size_t step, size_t start, size_t increase);

// Split-gate GRU parameters. in_dim == 0 means the cell runs without input
// (the generator when co_dim == 0); the wx_* tensors are left undefined.
struct GruCell {
  size_t in_dim = 0;
  size_t hid_dim = 0;
  Tensor wx_r, wx_z, wx_n;  // [in, hid]
  Tensor wh_r, wh_z, wh_n;  // [hid, hid]
  Tensor b_r, b_z, b_n;     // [hid]
};

// wx ~ N(0, 1/(in+hid)) (fan-in of the concatenated gate input), wh from QR
// of a square standard normal, biases zero except the update gate's at +1.
GruCell make_gru(size_t in_dim, size_t hid_dim, Rng& rng);

// r = sigmoid(x wx_r + h wh_r + b_r), z likewise, n = tanh(x wx_n + (r*h)
// wh_n + b_n), h' = (1-z)*n + z*h, then clamp to [-clip, clip] when
// clip > 0. x, h are [b, in] / [b, hid]; pass a default Tensor for x when
// the cell has in_dim == 0.
Tensor gru_cell(const GruCell& cell, const Tensor& x, const Tensor& h,
                double clip);

struct Linear {
  Tensor w;  // [in, out]
  Tensor b;  // [out]; undefined when the map has no bias
};

Linear make_linear(size_t in_dim, size_t out_dim, Rng& rng, bool bias = true);
Tensor apply_linear(const Linear& lin, const Tensor& x);  // x [b, in]

// Named parameter leaves in construction order; the order fixes optimizer
// state, checkpoint layout, and flatten().
class ParamStore {
 public:
  Tensor add(std::string name, Tensor t);
  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }
  bool contains(const std::string& name) const;
  Tensor find(const std::string& name) const;  // ValueError when absent
  size_t total_elements() const;
  std::vector<double> flatten_values() const;
  void assign_values(const std::vector<double>& flat);
  void zero_grads();

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

struct ForwardOptions {
  bool sample_latents = false;  // false: posteriors collapse to their means
  bool train_dropout = false;   // dropout masks only drawn when true
  Rng* rng = nullptr;           // required if either flag is set
};

struct LFADSOutput {
  GaussianPosteriorParams ic_posterior;  // [b, ic_dim]
  Tensor ic_sample;                      // [b, ic_dim]
  // Controller-path tensors are default (undefined) when co_dim == 0.
  GaussianPosteriorParams co_posterior;  // [b, T_enc, co_dim]
  Tensor co_samples;                     // [b, T_enc, co_dim]
  Tensor factors;                        // [b, T_recon, fac_dim]
  Tensor output_params;                  // [b, T_recon, N_recon * P]
  Tensor output_means;                   // [b, T_recon, N_recon]
};

// Scalar snapshots of each loss term. kl_* and l2_* are raw (unramped,
// unscaled); l2 values already include the 1/2.
struct LossComponents {
  double total = 0.0;
  double recon = 0.0;
  double kl_ic = 0.0;
  double kl_co = 0.0;
  double l2_gen = 0.0;
  double l2_con = 0.0;
  double ramp_kl = 0.0;
  double ramp_l2 = 0.0;
};

struct LossResult {
  Tensor total;
  LossComponents components;
};

// Sequential VAE over trial windows: bidirectional encoders feed an initial
// condition posterior and per-step controller-input context; the controller
// emits inferred-input posteriors; the generator evolves from the IC and is
// read out through row-normalized factors into observation-model parameters.
// Steps past the encoded window run open loop on the controller prior mean.
class LFADS {
 public:
  LFADS(LFADSConfig cfg, size_t n_encod_data, size_t n_recon_data,
        std::shared_ptr<ObservationModel> observation,
        std::shared_ptr<MultivariateNormalPrior> ic_prior,
        std::shared_ptr<Prior> co_prior,  // may be null iff co_dim == 0
        AugmentationStack train_augs, uint64_t seed);

  const LFADSConfig& config() const { return cfg_; }
  size_t n_encod_data() const { return n_enc_; }
  size_t n_recon_data() const { return n_rec_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  ObservationModel& observation() { return *obs_; }
  MultivariateNormalPrior& ic_prior() { return *ic_prior_; }
  Prior* co_prior() { return co_prior_.get(); }
  const AugmentationStack& train_augs() const { return augs_; }

  LFADSOutput forward(const TrialBatch& batch, const ForwardOptions& opts) const;

  // total = mean over trials of masked NLL sums, plus ramped KL and L2
  // penalties. train_phase additionally applies the augmentation-stack loss
  // masks (requires their batch phase to have run on this batch).
  LossResult loss(const TrialBatch& batch, const LFADSOutput& out, size_t step,
                  bool train_phase) const;

  // Mean of output_means over n_samples stochastic passes (latents sampled,
  // dropout off). Run it outside any TapeScope.
  Tensor posterior_average(const TrialBatch& batch, size_t n_samples,
                           Rng& rng) const;

  // Projects each factor-readout row back to unit L2 norm; call after every
  // optimizer step.
  void renormalize_factor_rows();

 private:
  Tensor factor_readout(const Tensor& g) const;
  Tensor prior_driven_input(size_t b) const;

  LFADSConfig cfg_;
  size_t n_enc_ = 0, n_rec_ = 0;
  std::shared_ptr<ObservationModel> obs_;
  std::shared_ptr<MultivariateNormalPrior> ic_prior_;
  std::shared_ptr<Prior> co_prior_;
  AugmentationStack augs_;
  ParamStore store_;

  GruCell ic_enc_fwd_, ic_enc_bwd_;
  Tensor ic_enc_fwd_h0_, ic_enc_bwd_h0_;
  GruCell ci_enc_fwd_, ci_enc_bwd_;
  Tensor ci_enc_fwd_h0_, ci_enc_bwd_h0_;
  GruCell con_, gen_;
  Linear ic_to_gen_, ic_post_, co_post_;
  Tensor fac_w_;  // [fac_dim, gen_dim], rows unit norm
  Linear readout_;
};

}  // namespace lfads
