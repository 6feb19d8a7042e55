#include "lfads/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lfads/errors.hpp"

namespace lfads {

void validate(const LFADSConfig& cfg) {
  auto need_pos = [](size_t v, const char* name) {
    if (v == 0)
      throw ValueError(std::string("config field ") + name + " must be >= 1");
  };
  need_pos(cfg.encod_dim, "encod_dim");
  need_pos(cfg.ic_dim, "ic_dim");
  need_pos(cfg.con_dim, "con_dim");
  need_pos(cfg.gen_dim, "gen_dim");
  need_pos(cfg.fac_dim, "fac_dim");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0))
    throw ValueError("dropout must lie in [0, 1)");
  auto need_nonneg = [](double v, const char* name) {
    if (!(v >= 0.0))
      throw ValueError(std::string("config field ") + name +
                       " must be >= 0 and finite");
  };
  need_nonneg(cfg.kl_ic_scale, "kl_ic_scale");
  need_nonneg(cfg.kl_co_scale, "kl_co_scale");
  need_nonneg(cfg.l2_gen_scale, "l2_gen_scale");
  need_nonneg(cfg.l2_con_scale, "l2_con_scale");
  if (!(cfg.cell_clip > 0.0))
    throw ValueError("cell_clip must be > 0");
}

double ramp_weight(size_t step, size_t start, size_t increase) {
  if (increase == 0) return step >= start ? 1.0 : 0.0;
  const double r = (static_cast<double>(step) - static_cast<double>(start)) /
                   static_cast<double>(increase);
  return r < 0.0 ? 0.0 : (r > 1.0 ? 1.0 : r);
}

// ----- initializers ---------------------------------------------------------

// Q factor of a standard normal square matrix via modified Gram-Schmidt on
// columns; row-major out.
static std::vector<double> orthogonal_square(Rng& rng, size_t n) {
  std::vector<double> a = random_normal_vector(rng, n * n);
  std::vector<double> q(n * n, 0.0);
  std::vector<double> v(n);
  for (size_t j = 0; j < n; ++j) {
    for (size_t i = 0; i < n; ++i) v[i] = a[i * n + j];
    for (size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (size_t i = 0; i < n; ++i) dot += q[i * n + k] * v[i];
      for (size_t i = 0; i < n; ++i) v[i] -= dot * q[i * n + k];
    }
    double norm = 0.0;
    for (size_t i = 0; i < n; ++i) norm += v[i] * v[i];
    norm = std::sqrt(norm);
    if (norm < 1e-12) {  // essentially impossible; fall back to a basis vector
      std::fill(v.begin(), v.end(), 0.0);
      v[j] = 1.0;
      norm = 1.0;
    }
    for (size_t i = 0; i < n; ++i) q[i * n + j] = v[i] / norm;
  }
  return q;
}

GruCell make_gru(size_t in_dim, size_t hid_dim, Rng& rng) {
  GruCell c;
  c.in_dim = in_dim;
  c.hid_dim = hid_dim;
  if (in_dim > 0) {
    const double sd = std::sqrt(1.0 / static_cast<double>(in_dim + hid_dim));
    c.wx_r = Tensor::leaf({in_dim, hid_dim},
                          random_normal_vector(rng, in_dim * hid_dim, 0.0, sd));
    c.wx_z = Tensor::leaf({in_dim, hid_dim},
                          random_normal_vector(rng, in_dim * hid_dim, 0.0, sd));
    c.wx_n = Tensor::leaf({in_dim, hid_dim},
                          random_normal_vector(rng, in_dim * hid_dim, 0.0, sd));
  }
  c.wh_r = Tensor::leaf({hid_dim, hid_dim}, orthogonal_square(rng, hid_dim));
  c.wh_z = Tensor::leaf({hid_dim, hid_dim}, orthogonal_square(rng, hid_dim));
  c.wh_n = Tensor::leaf({hid_dim, hid_dim}, orthogonal_square(rng, hid_dim));
  c.b_r = Tensor::leaf({hid_dim}, std::vector<double>(hid_dim, 0.0));
  // +1 update-gate bias so fresh cells drift slowly toward new inputs
  c.b_z = Tensor::leaf({hid_dim}, std::vector<double>(hid_dim, 1.0));
  c.b_n = Tensor::leaf({hid_dim}, std::vector<double>(hid_dim, 0.0));
  return c;
}

Tensor gru_cell(const GruCell& c, const Tensor& x, const Tensor& h,
                double clip) {
  if (!h.defined() || h.ndim() != 2 || h.shape()[1] != c.hid_dim)
    throw ShapeError("gru state must be [batch, " + std::to_string(c.hid_dim) +
                     "], got " + (h.defined() ? shape_str(h.shape()) : "none"));
  const size_t b = h.shape()[0];
  if (c.in_dim > 0 &&
      (!x.defined() || x.ndim() != 2 || x.shape()[0] != b ||
       x.shape()[1] != c.in_dim))
    throw ShapeError("gru input must be [" + std::to_string(b) + ", " +
                     std::to_string(c.in_dim) + "], got " +
                     (x.defined() ? shape_str(x.shape()) : "none"));
  auto gate = [&](const Tensor& wx, const Tensor& wh, const Tensor& bias,
                  const Tensor& hin) {
    Tensor s = matmul(hin, wh);
    if (c.in_dim > 0) s = add(matmul(x, wx), s);
    return add(s, expand0(bias, b));
  };
  Tensor r = sigmoid(gate(c.wx_r, c.wh_r, c.b_r, h));
  Tensor z = sigmoid(gate(c.wx_z, c.wh_z, c.b_z, h));
  Tensor n = tanh(gate(c.wx_n, c.wh_n, c.b_n, mul(r, h)));
  Tensor hn = add(mul(rsub_scalar(1.0, z), n), mul(z, h));
  if (clip > 0.0) hn = clamp(hn, -clip, clip);
  return hn;
}

Linear make_linear(size_t in_dim, size_t out_dim, Rng& rng, bool bias) {
  Linear l;
  const double sd = std::sqrt(1.0 / static_cast<double>(in_dim));
  l.w = Tensor::leaf({in_dim, out_dim},
                     random_normal_vector(rng, in_dim * out_dim, 0.0, sd));
  if (bias) l.b = Tensor::leaf({out_dim}, std::vector<double>(out_dim, 0.0));
  return l;
}

Tensor apply_linear(const Linear& lin, const Tensor& x) {
  if (!x.defined() || x.ndim() != 2)
    throw ShapeError("linear map expects a [batch, in] input");
  Tensor y = matmul(x, lin.w);
  if (lin.b.defined()) y = add(y, expand0(lin.b, x.shape()[0]));
  return y;
}

// ----- ParamStore -----------------------------------------------------------

Tensor ParamStore::add(std::string name, Tensor t) {
  if (!t.defined() || !t.is_leaf() || !t.requires_grad())
    throw ValueError("parameter '" + name + "' must be a trainable leaf");
  if (contains(name))
    throw ValueError("duplicate parameter name '" + name + "'");
  entries_.emplace_back(std::move(name), t);
  return t;
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return true;
  return false;
}

Tensor ParamStore::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return e.second;
  throw ValueError("no parameter named '" + name + "'");
}

size_t ParamStore::total_elements() const {
  size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

std::vector<double> ParamStore::flatten_values() const {
  std::vector<double> out;
  out.reserve(total_elements());
  for (const auto& e : entries_) {
    const auto& v = e.second.values();
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

void ParamStore::assign_values(const std::vector<double>& flat) {
  if (flat.size() != total_elements())
    throw ShapeError("flat parameter vector has " +
                     std::to_string(flat.size()) + " elements, store holds " +
                     std::to_string(total_elements()));
  size_t off = 0;
  for (auto& e : entries_) {
    auto& v = const_cast<Tensor&>(e.second).values_mut();
    std::copy(flat.begin() + off, flat.begin() + off + v.size(), v.begin());
    off += v.size();
  }
}

void ParamStore::zero_grads() {
  for (auto& e : entries_) const_cast<Tensor&>(e.second).zero_grad();
}

// ----- model ----------------------------------------------------------------

static void register_gru(ParamStore& s, const std::string& prefix,
                         const GruCell& c) {
  if (c.in_dim > 0) {
    s.add(prefix + ".wx_r", c.wx_r);
    s.add(prefix + ".wx_z", c.wx_z);
    s.add(prefix + ".wx_n", c.wx_n);
  }
  s.add(prefix + ".wh_r", c.wh_r);
  s.add(prefix + ".wh_z", c.wh_z);
  s.add(prefix + ".wh_n", c.wh_n);
  s.add(prefix + ".b_r", c.b_r);
  s.add(prefix + ".b_z", c.b_z);
  s.add(prefix + ".b_n", c.b_n);
}

static void register_prior(ParamStore& s, const std::string& prefix,
                           Prior& prior) {
  for (auto& p : prior.params())
    if (p.second.requires_grad()) s.add(prefix + "." + p.first, p.second);
}

LFADS::LFADS(LFADSConfig cfg, size_t n_encod_data, size_t n_recon_data,
             std::shared_ptr<ObservationModel> observation,
             std::shared_ptr<MultivariateNormalPrior> ic_prior,
             std::shared_ptr<Prior> co_prior, AugmentationStack train_augs,
             uint64_t seed)
    : cfg_(cfg),
      n_enc_(n_encod_data),
      n_rec_(n_recon_data),
      obs_(std::move(observation)),
      ic_prior_(std::move(ic_prior)),
      co_prior_(std::move(co_prior)),
      augs_(std::move(train_augs)) {
  validate(cfg_);
  if (n_enc_ == 0 || n_rec_ == 0)
    throw ValueError("model needs at least one encoded and one reconstructed channel");
  if (!obs_) throw ValueError("model needs an observation model");
  if (!ic_prior_) throw ValueError("model needs an IC prior");
  if (ic_prior_->dim() != cfg_.ic_dim)
    throw ShapeError("IC prior dim " + std::to_string(ic_prior_->dim()) +
                     " does not match ic_dim " + std::to_string(cfg_.ic_dim));
  const bool con = cfg_.co_dim > 0;
  if (con) {
    if (!co_prior_)
      throw ValueError("co_dim > 0 requires a controller-output prior");
    if (co_prior_->dim() != cfg_.co_dim)
      throw ShapeError("CO prior dim " + std::to_string(co_prior_->dim()) +
                       " does not match co_dim " + std::to_string(cfg_.co_dim));
  }

  Rng rng(derive_seed(seed, "init"));

  ic_enc_fwd_ = make_gru(n_enc_, cfg_.encod_dim, rng);
  register_gru(store_, "ic_enc.fwd", ic_enc_fwd_);
  ic_enc_fwd_h0_ = store_.add(
      "ic_enc.fwd.h0",
      Tensor::leaf({cfg_.encod_dim}, std::vector<double>(cfg_.encod_dim, 0.0)));
  ic_enc_bwd_ = make_gru(n_enc_, cfg_.encod_dim, rng);
  register_gru(store_, "ic_enc.bwd", ic_enc_bwd_);
  ic_enc_bwd_h0_ = store_.add(
      "ic_enc.bwd.h0",
      Tensor::leaf({cfg_.encod_dim}, std::vector<double>(cfg_.encod_dim, 0.0)));

  if (con) {
    ci_enc_fwd_ = make_gru(n_enc_, cfg_.encod_dim, rng);
    register_gru(store_, "ci_enc.fwd", ci_enc_fwd_);
    ci_enc_fwd_h0_ = store_.add(
        "ci_enc.fwd.h0", Tensor::leaf({cfg_.encod_dim},
                                      std::vector<double>(cfg_.encod_dim, 0.0)));
    ci_enc_bwd_ = make_gru(n_enc_, cfg_.encod_dim, rng);
    register_gru(store_, "ci_enc.bwd", ci_enc_bwd_);
    ci_enc_bwd_h0_ = store_.add(
        "ci_enc.bwd.h0", Tensor::leaf({cfg_.encod_dim},
                                      std::vector<double>(cfg_.encod_dim, 0.0)));
    con_ = make_gru(2 * cfg_.encod_dim + cfg_.fac_dim, cfg_.con_dim, rng);
    register_gru(store_, "con", con_);
  }

  gen_ = make_gru(cfg_.co_dim, cfg_.gen_dim, rng);
  register_gru(store_, "gen", gen_);

  ic_to_gen_ = make_linear(cfg_.ic_dim, cfg_.gen_dim, rng);
  store_.add("ic_to_gen.w", ic_to_gen_.w);
  store_.add("ic_to_gen.b", ic_to_gen_.b);
  ic_post_ = make_linear(2 * cfg_.encod_dim, 2 * cfg_.ic_dim, rng);
  store_.add("ic_post.w", ic_post_.w);
  store_.add("ic_post.b", ic_post_.b);
  if (con) {
    co_post_ = make_linear(cfg_.con_dim, 2 * cfg_.co_dim, rng);
    store_.add("co_post.w", co_post_.w);
    store_.add("co_post.b", co_post_.b);
  }

  const double fac_sd = std::sqrt(1.0 / static_cast<double>(cfg_.gen_dim));
  fac_w_ = store_.add(
      "fac.w", Tensor::leaf({cfg_.fac_dim, cfg_.gen_dim},
                            random_normal_vector(
                                rng, cfg_.fac_dim * cfg_.gen_dim, 0.0, fac_sd)));
  renormalize_factor_rows();

  readout_ =
      make_linear(cfg_.fac_dim, n_rec_ * obs_->n_params_per_output(), rng);
  store_.add("readout.w", readout_.w);
  store_.add("readout.b", readout_.b);

  for (auto& p : obs_->params())
    if (p.second.requires_grad()) store_.add("obs." + p.first, p.second);
  register_prior(store_, "ic_prior", *ic_prior_);
  if (con) register_prior(store_, "co_prior", *co_prior_);
}

Tensor LFADS::factor_readout(const Tensor& g) const {
  return matmul(g, transpose(fac_w_));
}

// Open-loop generator input for steps past the encoded window. The MVN case
// reads the mean tensor directly so a trainable prior mean stays on the tape.
Tensor LFADS::prior_driven_input(size_t b) const {
  const auto* mvn =
      dynamic_cast<const MultivariateNormalPrior*>(co_prior_.get());
  if (mvn) return expand0(mvn->mean(), b);
  const std::vector<double> sm = co_prior_->stationary_mean();
  std::vector<double> tiled(b * sm.size());
  for (size_t i = 0; i < b; ++i)
    std::copy(sm.begin(), sm.end(), tiled.begin() + i * sm.size());
  return Tensor::from({b, sm.size()}, std::move(tiled));
}

static Tensor dropout_mask(Rng& rng, const Shape& shape, double rate) {
  const double keep = 1.0 - rate;
  std::vector<double> v(shape_numel(shape));
  for (auto& e : v) e = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return Tensor::from(shape, std::move(v));
}

LFADSOutput LFADS::forward(const TrialBatch& batch,
                           const ForwardOptions& opts) const {
  const Tensor& xe = batch.encod_data;
  const Tensor& xr = batch.recon_data;
  if (!xe.defined() || xe.ndim() != 3 || !xr.defined() || xr.ndim() != 3)
    throw ShapeError("forward expects rank-3 [trials, time, channels] data");
  const size_t b = xe.shape()[0];
  const size_t t_enc = xe.shape()[1];
  const size_t t_rec = xr.shape()[1];
  if (b == 0 || t_enc == 0)
    throw ShapeError("forward got an empty batch");
  if (xr.shape()[0] != b)
    throw ShapeError("encod batch " + std::to_string(b) + " != recon batch " +
                     std::to_string(xr.shape()[0]));
  if (xe.shape()[2] != n_enc_)
    throw ShapeError("encod data has " + std::to_string(xe.shape()[2]) +
                     " channels, model expects " + std::to_string(n_enc_));
  if (xr.shape()[2] != n_rec_)
    throw ShapeError("recon data has " + std::to_string(xr.shape()[2]) +
                     " channels, model expects " + std::to_string(n_rec_));
  if (t_rec < t_enc)
    throw ShapeError("recon window " + std::to_string(t_rec) +
                     " is shorter than encod window " + std::to_string(t_enc));

  const bool con = cfg_.co_dim > 0;
  const bool drop = opts.train_dropout && cfg_.dropout > 0.0;
  if ((opts.sample_latents || drop) && opts.rng == nullptr)
    throw ValueError("stochastic forward needs an rng");
  Rng fallback(0);  // untouched in deterministic mode
  Rng& rng = opts.rng ? *opts.rng : fallback;
  const bool det = !opts.sample_latents;
  const double clip = cfg_.cell_clip;

  // Draw order per trial batch: encod dropout mask, IC sample, then per step
  // the CO sample followed by the generator dropout mask.
  Tensor x = drop ? mul(xe, dropout_mask(rng, xe.shape(), cfg_.dropout)) : xe;
  std::vector<Tensor> xt(t_enc);
  for (size_t t = 0; t < t_enc; ++t) xt[t] = slice_step(x, t);

  Tensor hf = expand0(ic_enc_fwd_h0_, b);
  for (size_t t = 0; t < t_enc; ++t) hf = gru_cell(ic_enc_fwd_, xt[t], hf, clip);
  Tensor hb = expand0(ic_enc_bwd_h0_, b);
  for (size_t t = t_enc; t-- > 0;) hb = gru_cell(ic_enc_bwd_, xt[t], hb, clip);

  LFADSOutput out;
  out.ic_posterior = make_posterior(apply_linear(ic_post_, concat_last(hf, hb)));
  out.ic_sample = sample(out.ic_posterior, rng, det);
  Tensor g = apply_linear(ic_to_gen_, out.ic_sample);

  std::vector<Tensor> ci;
  if (con) {
    std::vector<Tensor> cf(t_enc), cb(t_enc);
    Tensor h = expand0(ci_enc_fwd_h0_, b);
    for (size_t t = 0; t < t_enc; ++t) {
      h = gru_cell(ci_enc_fwd_, xt[t], h, clip);
      cf[t] = h;
    }
    h = expand0(ci_enc_bwd_h0_, b);
    for (size_t t = t_enc; t-- > 0;) {
      h = gru_cell(ci_enc_bwd_, xt[t], h, clip);
      cb[t] = h;
    }
    // The backward stream is read ci_lag steps ahead so step t never sees
    // the target bin itself; past the window it contributes zeros.
    Tensor past_end = Tensor::zeros({b, cfg_.encod_dim});
    ci.resize(t_enc);
    for (size_t t = 0; t < t_enc; ++t) {
      const size_t s = t + cfg_.ci_lag;
      ci[t] = concat_last(cf[t], s < t_enc ? cb[s] : past_end);
    }
  }

  Tensor c = con ? Tensor::zeros({b, cfg_.con_dim}) : Tensor();
  Tensor fac_prev = factor_readout(g);
  std::vector<Tensor> facs(t_rec), raws(t_rec);
  std::vector<Tensor> co_means, co_logvars, co_zs;
  if (con && t_enc > 0) {
    co_means.reserve(t_enc);
    co_logvars.reserve(t_enc);
    co_zs.reserve(t_enc);
  }
  Tensor u_prior;
  for (size_t t = 0; t < t_rec; ++t) {
    Tensor u;
    if (con) {
      if (t < t_enc) {
        c = gru_cell(con_, concat_last(ci[t], fac_prev), c, clip);
        GaussianPosteriorParams post = make_posterior(apply_linear(co_post_, c));
        u = sample(post, rng, det);
        co_means.push_back(post.mean);
        co_logvars.push_back(post.logvar);
        co_zs.push_back(u);
      } else {
        if (!u_prior.defined()) u_prior = prior_driven_input(b);
        u = u_prior;
      }
    }
    g = gru_cell(gen_, u, g, clip);
    Tensor g_out =
        drop ? mul(g, dropout_mask(rng, {b, cfg_.gen_dim}, cfg_.dropout)) : g;
    facs[t] = factor_readout(g_out);
    fac_prev = facs[t];
    raws[t] = apply_linear(readout_, facs[t]);
  }

  if (con) {
    out.co_posterior.mean = stack_steps(co_means);
    out.co_posterior.logvar = stack_steps(co_logvars);
    out.co_samples = stack_steps(co_zs);
  }
  out.factors = stack_steps(facs);
  out.output_params = stack_steps(raws);
  out.output_means = obs_->mean(out.output_params);
  return out;
}

LossResult LFADS::loss(const TrialBatch& batch, const LFADSOutput& out,
                       size_t step, bool train_phase) const {
  Tensor nll = obs_->nll(out.output_params, batch.recon_data);
  nll = mul(nll, batch.sample_mask);
  if (train_phase) nll = augs_.apply_loss(nll, batch);
  Tensor recon = reduce_mean(reduce_sum(nll, {1, 2}), {});

  LossComponents comp;
  comp.ramp_kl = ramp_weight(step, cfg_.kl_start_step, cfg_.kl_increase_steps);
  comp.ramp_l2 = ramp_weight(step, cfg_.l2_start_step, cfg_.l2_increase_steps);
  comp.recon = recon.item();

  Tensor kl_ic = reduce_mean(kl_gaussian_diag(out.ic_posterior, *ic_prior_), {});
  comp.kl_ic = kl_ic.item();
  Tensor total = add(recon, mul_scalar(kl_ic, comp.ramp_kl * cfg_.kl_ic_scale));

  if (cfg_.co_dim > 0) {
    Tensor kl_co = reduce_mean(
        kl_sampled(out.co_posterior, out.co_samples, *co_prior_), {});
    comp.kl_co = kl_co.item();
    total = add(total, mul_scalar(kl_co, comp.ramp_kl * cfg_.kl_co_scale));
  }

  Tensor l2_gen = mul_scalar(
      add(add(reduce_sum(square(gen_.wh_r)), reduce_sum(square(gen_.wh_z))),
          reduce_sum(square(gen_.wh_n))),
      0.5);
  comp.l2_gen = l2_gen.item();
  total = add(total, mul_scalar(l2_gen, comp.ramp_l2 * cfg_.l2_gen_scale));
  if (cfg_.co_dim > 0) {
    Tensor l2_con = mul_scalar(
        add(add(reduce_sum(square(con_.wh_r)), reduce_sum(square(con_.wh_z))),
            reduce_sum(square(con_.wh_n))),
        0.5);
    comp.l2_con = l2_con.item();
    total = add(total, mul_scalar(l2_con, comp.ramp_l2 * cfg_.l2_con_scale));
  }

  comp.total = total.item();
  return {total, comp};
}

Tensor LFADS::posterior_average(const TrialBatch& batch, size_t n_samples,
                                Rng& rng) const {
  if (n_samples == 0)
    throw ValueError("posterior_average needs n_samples >= 1");
  ForwardOptions opts;
  opts.sample_latents = true;
  opts.rng = &rng;
  Shape shape;
  std::vector<double> acc;
  for (size_t s = 0; s < n_samples; ++s) {
    LFADSOutput out = forward(batch, opts);
    const auto& v = out.output_means.values();
    if (s == 0) {
      shape = out.output_means.shape();
      acc = v;
    } else {
      for (size_t i = 0; i < v.size(); ++i) acc[i] += v[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(n_samples);
  for (auto& a : acc) a *= inv;
  return Tensor::from(std::move(shape), std::move(acc));
}

void LFADS::renormalize_factor_rows() {
  auto& w = fac_w_.values_mut();
  const size_t rows = cfg_.fac_dim, cols = cfg_.gen_dim;
  for (size_t i = 0; i < rows; ++i) {
    double norm = 0.0;
    for (size_t j = 0; j < cols; ++j) norm += w[i * cols + j] * w[i * cols + j];
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (size_t j = 0; j < cols; ++j) w[i * cols + j] /= norm;
  }
}

}  // namespace lfads
