#include "lfads/augmentations.hpp"

#include <algorithm>
#include <cmath>

#include "lfads/errors.hpp"

namespace lfads {

namespace {

Tensor copy_tensor(const Tensor& t) { return Tensor::from(t.shape(), t.values()); }

// shifted[t] = src[t - s], zero where t - s falls outside [0, T).
void shift_time(std::vector<double>& data, size_t trials, size_t T, size_t n,
                const std::vector<int64_t>& shifts) {
  std::vector<double> row(T * n);
  for (size_t i = 0; i < trials; ++i) {
    double* trial = data.data() + i * T * n;
    std::copy_n(trial, T * n, row.begin());
    int64_t s = shifts[i];
    for (size_t t = 0; t < T; ++t) {
      int64_t src = static_cast<int64_t>(t) - s;
      if (src >= 0 && src < static_cast<int64_t>(T))
        std::copy_n(row.begin() + src * static_cast<int64_t>(n), n, trial + t * n);
      else
        std::fill_n(trial + t * n, n, 0.0);
    }
  }
}

}  // namespace

TrialBatch AugmentationStack::apply_batch(const TrialBatch& batch, Rng& rng) const {
  if (transforms_.empty()) return batch;
  TrialBatch out;
  out.indices = batch.indices;
  out.encod_data = copy_tensor(batch.encod_data);
  out.recon_data = copy_tensor(batch.recon_data);
  out.sample_mask = copy_tensor(batch.sample_mask);
  for (const auto& t : transforms_) t->apply_batch(out, rng);
  return out;
}

Tensor AugmentationStack::apply_loss(const Tensor& loss_elements,
                                     const TrialBatch& batch) const {
  if (loss_elements.shape() != batch.recon_data.shape())
    throw ShapeError("loss elements " + shape_str(loss_elements.shape()) +
                     " do not match recon data " +
                     shape_str(batch.recon_data.shape()));
  bool any = false;
  for (const auto& t : transforms_) any = any || t->has_loss_phase();
  if (!any) return loss_elements;
  std::vector<double> mask(loss_elements.numel(), 1.0);
  for (const auto& t : transforms_) t->apply_loss_mask(mask, batch);
  return mul(loss_elements, Tensor::from(loss_elements.shape(), std::move(mask)));
}

void AugmentationStack::clear_step() const {
  for (const auto& t : transforms_) t->clear_step();
}

// ----- coordinated dropout ---------------------------------------------------

CoordinatedDropout::CoordinatedDropout(double rate, bool rescale)
    : rate_(rate), rescale_(rescale) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ValueError("coordinated dropout rate must be in [0, 1), got " +
                     std::to_string(rate));
}

void CoordinatedDropout::apply_batch(TrialBatch& batch, Rng& rng) {
  if (rate_ == 0.0) return;
  encod_shape_ = batch.encod_data.shape();
  auto& x = batch.encod_data.values_mut();
  keep_.assign(x.size(), 1.0);
  double scale = rescale_ ? 1.0 / (1.0 - rate_) : 1.0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (rng.bernoulli(rate_)) {
      keep_[i] = 0.0;
      x[i] = 0.0;
    } else {
      x[i] *= scale;
    }
  }
}

void CoordinatedDropout::apply_loss_mask(std::vector<double>& mask,
                                         const TrialBatch& batch) {
  if (rate_ == 0.0) return;
  if (keep_.empty())
    throw ValueError("coordinated dropout loss phase before its batch phase");
  const Shape& rs = batch.recon_data.shape();
  if (encod_shape_.size() != 3 || rs.size() != 3)
    throw ShapeError("coordinated dropout expects [trials, T, neurons] batches");
  size_t b = encod_shape_[0], t_enc = encod_shape_[1], n_enc = encod_shape_[2];
  size_t t_rec = rs[1], n_rec = rs[2];
  if (rs[0] != b)
    throw ShapeError("encod and recon disagree on trial count");
  // Train exactly the dropped entries on the shared slab; everything outside
  // the slab keeps its mask.
  for (size_t i = 0; i < b; ++i)
    for (size_t t = 0; t < t_enc; ++t)
      for (size_t n = 0; n < n_enc; ++n)
        mask[(i * t_rec + t) * n_rec + n] *=
            1.0 - keep_[(i * t_enc + t) * n_enc + n];
}

// ----- selective backprop through time ---------------------------------------

SelectiveBackpropThruTime::SelectiveBackpropThruTime(size_t keep_every)
    : keep_every_(keep_every) {
  if (keep_every < 1) throw ValueError("keep_every must be >= 1");
}

SelectiveBackpropThruTime::SelectiveBackpropThruTime(std::vector<size_t> timesteps)
    : timesteps_(std::move(timesteps)) {
  if (timesteps_.empty()) throw ValueError("observed timestep list is empty");
  std::sort(timesteps_.begin(), timesteps_.end());
}

bool SelectiveBackpropThruTime::observed(size_t t) const {
  if (keep_every_) return t % keep_every_ == 0;
  return std::binary_search(timesteps_.begin(), timesteps_.end(), t);
}

void SelectiveBackpropThruTime::apply_batch(TrialBatch& batch, Rng&) {
  if (keep_every_ == 1) return;
  const Shape& es = batch.encod_data.shape();
  size_t b = es[0], t_enc = es[1], n_enc = es[2];
  auto& x = batch.encod_data.values_mut();
  for (size_t i = 0; i < b; ++i)
    for (size_t t = 0; t < t_enc; ++t)
      if (!observed(t))
        std::fill_n(x.begin() + static_cast<ptrdiff_t>((i * t_enc + t) * n_enc),
                    n_enc, 0.0);
}

void SelectiveBackpropThruTime::apply_loss_mask(std::vector<double>& mask,
                                                const TrialBatch& batch) {
  const Shape& rs = batch.recon_data.shape();
  size_t b = rs[0], t_rec = rs[1], n_rec = rs[2];
  for (size_t i = 0; i < b; ++i)
    for (size_t t = 0; t < t_rec; ++t)
      if (!observed(t))
        for (size_t n = 0; n < n_rec; ++n) mask[(i * t_rec + t) * n_rec + n] = 0.0;
}

// ----- temporal shift ---------------------------------------------------------

TemporalShift::TemporalShift(size_t max_shift, bool joint)
    : max_shift_(max_shift), joint_(joint) {}

void TemporalShift::apply_batch(TrialBatch& batch, Rng& rng) {
  const Shape& es = batch.encod_data.shape();
  size_t b = es[0];
  shifts_.resize(b);
  for (size_t i = 0; i < b; ++i)
    shifts_[i] = rng.uniform_int(-static_cast<int64_t>(max_shift_),
                                 static_cast<int64_t>(max_shift_));
  if (max_shift_ == 0) return;
  shift_time(batch.encod_data.values_mut(), b, es[1], es[2], shifts_);
  if (joint_) {
    const Shape& rs = batch.recon_data.shape();
    shift_time(batch.recon_data.values_mut(), b, rs[1], rs[2], shifts_);
  }
}

}  // namespace lfads
