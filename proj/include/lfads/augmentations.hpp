#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lfads/dataset.hpp"
#include "lfads/rng.hpp"
#include "lfads/tensor.hpp"

namespace lfads {

// One data transformation. The batch phase runs before the forward pass and
// may mutate the batch; the loss phase multiplies a {0,1} mask into the
// per-element reconstruction loss. A transform may carry state from its own
// batch phase to its loss phase within one training step; clear_step drops it.
class Augmentation {
 public:
  virtual ~Augmentation() = default;
  virtual std::string name() const = 0;
  virtual void apply_batch(TrialBatch& batch, Rng& rng) { (void)batch, (void)rng; }
  virtual bool has_loss_phase() const { return false; }
  // Multiplies this transform's contribution into mask (recon_data layout).
  virtual void apply_loss_mask(std::vector<double>& mask, const TrialBatch& batch) {
    (void)mask, (void)batch;
  }
  virtual void clear_step() {}
};

// Ordered list of transforms. Batch mutations compose in declared order; the
// loss mask is the elementwise product of every transform's mask.
class AugmentationStack {
 public:
  AugmentationStack() = default;
  explicit AugmentationStack(std::vector<std::shared_ptr<Augmentation>> transforms)
      : transforms_(std::move(transforms)) {}

  // Returns a transformed copy; the input batch is untouched.
  TrialBatch apply_batch(const TrialBatch& batch, Rng& rng) const;
  // Multiplies the composed loss-phase mask into loss_elements (recon shape).
  Tensor apply_loss(const Tensor& loss_elements, const TrialBatch& batch) const;
  void clear_step() const;

  size_t size() const { return transforms_.size(); }
  const std::vector<std::shared_ptr<Augmentation>>& transforms() const {
    return transforms_;
  }

 private:
  std::vector<std::shared_ptr<Augmentation>> transforms_;
};

// Drops encoder-input entries (no rescaling by default) and restricts the
// reconstruction gradient on the shared encod/recon slab to exactly the
// dropped entries. Entries outside the encod slab (held-out neurons, forward
// steps) always train. rate 0 disables both phases.
class CoordinatedDropout : public Augmentation {
 public:
  explicit CoordinatedDropout(double rate, bool rescale = false);
  std::string name() const override { return "coordinated_dropout"; }
  void apply_batch(TrialBatch& batch, Rng& rng) override;
  bool has_loss_phase() const override { return rate_ > 0.0; }
  void apply_loss_mask(std::vector<double>& mask, const TrialBatch& batch) override;
  void clear_step() override { keep_.clear(); }

  double rate() const { return rate_; }
  // This step's keep mask, encod layout; empty before the batch phase.
  const std::vector<double>& keep_mask() const { return keep_; }

 private:
  double rate_;
  bool rescale_;
  std::vector<double> keep_;
  Shape encod_shape_;
};

// Observed-timestep masking: unobserved timesteps are zeroed in encod_data and
// excluded from the loss, so training only sees/scores the observed set.
class SelectiveBackpropThruTime : public Augmentation {
 public:
  explicit SelectiveBackpropThruTime(size_t keep_every);
  explicit SelectiveBackpropThruTime(std::vector<size_t> timesteps);
  std::string name() const override { return "sbtt"; }
  void apply_batch(TrialBatch& batch, Rng& rng) override;
  bool has_loss_phase() const override { return keep_every_ != 1; }
  void apply_loss_mask(std::vector<double>& mask, const TrialBatch& batch) override;

  bool observed(size_t t) const;

 private:
  size_t keep_every_ = 0;  // 0 means explicit list
  std::vector<size_t> timesteps_;
};

// Per-trial uniform integer shift in [-max_shift, max_shift], zero-padded at
// the vacated edge. Joint mode shifts encod and recon together (alignment
// preserving); otherwise only encod shifts.
class TemporalShift : public Augmentation {
 public:
  explicit TemporalShift(size_t max_shift, bool joint = true);
  std::string name() const override { return "temporal_shift"; }
  void apply_batch(TrialBatch& batch, Rng& rng) override;
  void clear_step() override { shifts_.clear(); }

  const std::vector<int64_t>& shifts() const { return shifts_; }

 private:
  size_t max_shift_;
  bool joint_;
  std::vector<int64_t> shifts_;
};

}  // namespace lfads
