#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lfads/rng.hpp"
#include "lfads/tensor.hpp"

namespace lfads {

// ----- container file -------------------------------------------------------
// Single-file keyed binary container: 8-byte magic "LFDS0001", u32 entry
// count, then per entry u16 name length + name bytes, u8 dtype (1 = f64),
// u8 ndim, ndim x u64 dims, row-major f64 payload. Little-endian throughout.

struct LfdsEntry {
  std::string name;
  std::vector<size_t> shape;
  std::vector<double> values;
};

void write_lfds(const std::string& path, const std::vector<LfdsEntry>& entries);
std::vector<LfdsEntry> read_lfds(const std::string& path);

// ----- trial data ------------------------------------------------------------

// Trials x time x neurons arrays split into train/valid. encod_* is what the
// encoder sees; recon_* is what the loss reconstructs. recon may extend encod
// in time (forward prediction) and in neurons (co-smoothing): the held-in
// neurons are recon columns [0, n_enc), and encod equals that slab over the
// first t_enc steps. truth_* hold ground-truth rates when the data is
// synthetic and are empty otherwise.
struct TrialDataset {
  size_t n_train = 0, n_valid = 0;
  size_t t_enc = 0, t_recon = 0;
  size_t n_enc = 0, n_recon = 0;

  std::vector<double> train_encod, valid_encod;  // [n x t_enc x n_enc]
  std::vector<double> train_recon, valid_recon;  // [n x t_recon x n_recon]
  std::vector<double> train_truth, valid_truth;  // [n x t_recon x n_recon]

  bool has_truth() const { return !train_truth.empty(); }
  void validate() const;
};

void save_dataset(const std::string& path, const TrialDataset& ds);
TrialDataset load_dataset(const std::string& path);

enum class Split { train, valid };

struct TrialBatch {
  Tensor encod_data;   // [b, t_enc, n_enc]
  Tensor recon_data;   // [b, t_recon, n_recon]
  Tensor sample_mask;  // [b, t_recon, n_recon] {0,1} loss weights, default ones
  std::vector<size_t> indices;  // split-relative trial indices
};

// Every trial of the split exactly once; the last batch may be short. With
// shuffle the order is a deterministic function of the rng state.
std::vector<TrialBatch> batches(const TrialDataset& ds, Split split,
                                size_t batch_size, bool shuffle, Rng& rng);

// Ground-truth rates for the given split-relative trials, [b, t_recon,
// n_recon] row-major. Throws if the dataset has no truth arrays.
std::vector<double> truth_for(const TrialDataset& ds, Split split,
                              const std::vector<size_t>& indices);

// ----- synthetic Lorenz data -------------------------------------------------

struct LorenzConfig {
  size_t n_trials = 1000;
  size_t t_bins = 50;     // encoder-visible bins, one integration step each
  size_t fp_bins = 0;     // extra forward-prediction bins on recon only
  size_t n_neurons = 30;  // held-in neurons
  size_t n_heldout = 0;   // extra held-out neurons on recon only
  double dt = 0.01;
  double base_rate = 0.3;  // target mean spikes/bin
  double valid_frac = 0.2;
  size_t burn_steps = 500;
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
  uint64_t seed = 0;
};

std::array<double, 3> lorenz_rk4_step(const std::array<double, 3>& s, double dt,
                                      double sigma, double rho, double beta);

// Integrates trials of Lorenz dynamics, standardizes the state channels over
// the whole dataset, maps them through a random linear readout calibrated so
// the mean rate hits base_rate, and samples Poisson counts. First n_neurons
// columns are held-in, first t_bins steps are encoder-visible, first
// (1 - valid_frac) fraction of trials are the train split.
TrialDataset generate_lorenz(const LorenzConfig& cfg);

}  // namespace lfads
