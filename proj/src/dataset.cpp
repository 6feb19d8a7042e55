#include "lfads/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "lfads/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace lfads {

namespace {

constexpr char kMagic[8] = {'L', 'F', 'D', 'S', '0', '0', '0', '1'};
constexpr uint8_t kDtypeF64 = 1;
constexpr uint64_t kMaxElems = 1ull << 30;  // 8 GiB of f64, way past desk scale

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& path, const char* what) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated container (" + std::string(what) + "): " + path);
  return v;
}

std::string dims_str(const std::vector<size_t>& s) {
  std::string r = "[";
  for (size_t i = 0; i < s.size(); ++i) r += (i ? " x " : "") + std::to_string(s[i]);
  return r + "]";
}

}  // namespace

void write_lfds(const std::string& path, const std::vector<LfdsEntry>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kMagic, 8);
  put<uint32_t>(out, static_cast<uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.empty() || e.name.size() > 0xffff)
      throw ValueError("container entry name empty or too long");
    size_t numel = 1;
    for (size_t d : e.shape) numel *= d;
    if (numel != e.values.size())
      throw ShapeError("entry '" + e.name + "': shape " + dims_str(e.shape) +
                       " does not match " + std::to_string(e.values.size()) +
                       " values");
    put<uint16_t>(out, static_cast<uint16_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<uint8_t>(out, kDtypeF64);
    put<uint8_t>(out, static_cast<uint8_t>(e.shape.size()));
    for (size_t d : e.shape) put<uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(e.values.data()),
              static_cast<std::streamsize>(e.values.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<LfdsEntry> read_lfds(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("not an LFDS0001 container: " + path);
  uint32_t count = get<uint32_t>(in, path, "entry count");
  std::vector<LfdsEntry> entries;
  entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    LfdsEntry e;
    uint16_t name_len = get<uint16_t>(in, path, "name length");
    e.name.resize(name_len);
    in.read(e.name.data(), name_len);
    if (!in) throw IoError("truncated container (name): " + path);
    uint8_t dtype = get<uint8_t>(in, path, "dtype");
    if (dtype != kDtypeF64)
      throw IoError("entry '" + e.name + "': unsupported dtype " +
                    std::to_string(dtype) + " in " + path);
    uint8_t ndim = get<uint8_t>(in, path, "ndim");
    uint64_t numel = 1;
    for (uint8_t d = 0; d < ndim; ++d) {
      uint64_t dim = get<uint64_t>(in, path, "dim");
      if (dim != 0 && numel > kMaxElems / dim)
        throw IoError("entry '" + e.name + "': implausible array size in " + path);
      e.shape.push_back(static_cast<size_t>(dim));
      numel *= dim;
    }
    e.values.resize(numel);
    in.read(reinterpret_cast<char*>(e.values.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    if (!in) throw IoError("truncated container (payload of '" + e.name + "'): " + path);
    entries.push_back(std::move(e));
  }
  return entries;
}

// ----- trial data ------------------------------------------------------------

namespace {

void check_rank3(const char* name, const std::vector<size_t>& shape) {
  if (shape.size() != 3)
    throw ShapeError(std::string(name) + " must be rank 3, got " + dims_str(shape));
}

}  // namespace

void TrialDataset::validate() const {
  if (n_train == 0 || n_valid == 0)
    throw ValueError("dataset needs at least one train and one valid trial, got " +
                     std::to_string(n_train) + "/" + std::to_string(n_valid));
  if (t_recon < t_enc || n_recon < n_enc)
    throw ShapeError("recon window [" + std::to_string(t_recon) + " x " +
                     std::to_string(n_recon) + "] smaller than encod window [" +
                     std::to_string(t_enc) + " x " + std::to_string(n_enc) + "]");
  auto expect = [](const char* name, const std::vector<double>& v, size_t n) {
    if (v.size() != n)
      throw ShapeError(std::string(name) + " has " + std::to_string(v.size()) +
                       " values, expected " + std::to_string(n));
  };
  expect("train_encod", train_encod, n_train * t_enc * n_enc);
  expect("valid_encod", valid_encod, n_valid * t_enc * n_enc);
  expect("train_recon", train_recon, n_train * t_recon * n_recon);
  expect("valid_recon", valid_recon, n_valid * t_recon * n_recon);
  if (!train_truth.empty() || !valid_truth.empty()) {
    expect("train_truth", train_truth, n_train * t_recon * n_recon);
    expect("valid_truth", valid_truth, n_valid * t_recon * n_recon);
  }
  // Held-in slab identity: encod[i,t,n] == recon[i,t,n] for n < n_enc, t < t_enc.
  auto check_slab = [&](const char* which, const std::vector<double>& enc,
                        const std::vector<double>& rec, size_t trials) {
    for (size_t i = 0; i < trials; ++i)
      for (size_t t = 0; t < t_enc; ++t)
        for (size_t n = 0; n < n_enc; ++n) {
          double e = enc[(i * t_enc + t) * n_enc + n];
          double r = rec[(i * t_recon + t) * n_recon + n];
          if (e != r)
            throw ValueError(std::string(which) +
                             "_encod does not equal the held-in slab of recon at "
                             "trial " + std::to_string(i) + ", t " + std::to_string(t) +
                             ", neuron " + std::to_string(n));
        }
  };
  check_slab("train", train_encod, train_recon, n_train);
  check_slab("valid", valid_encod, valid_recon, n_valid);
}

void save_dataset(const std::string& path, const TrialDataset& ds) {
  ds.validate();
  std::vector<LfdsEntry> entries;
  auto add = [&](const char* name, std::vector<size_t> shape,
                 const std::vector<double>& v) {
    entries.push_back({name, std::move(shape), v});
  };
  add("train_encod_data", {ds.n_train, ds.t_enc, ds.n_enc}, ds.train_encod);
  add("valid_encod_data", {ds.n_valid, ds.t_enc, ds.n_enc}, ds.valid_encod);
  add("train_recon_data", {ds.n_train, ds.t_recon, ds.n_recon}, ds.train_recon);
  add("valid_recon_data", {ds.n_valid, ds.t_recon, ds.n_recon}, ds.valid_recon);
  if (ds.has_truth()) {
    add("train_truth", {ds.n_train, ds.t_recon, ds.n_recon}, ds.train_truth);
    add("valid_truth", {ds.n_valid, ds.t_recon, ds.n_recon}, ds.valid_truth);
  }
  write_lfds(path, entries);
}

TrialDataset load_dataset(const std::string& path) {
  auto entries = read_lfds(path);
  auto find = [&](const std::string& name) -> const LfdsEntry* {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  };
  auto require = [&](const std::string& name) -> const LfdsEntry& {
    const LfdsEntry* e = find(name);
    if (!e) throw IoError("dataset is missing required array '" + name + "': " + path);
    return *e;
  };

  const LfdsEntry& te = require("train_encod_data");
  const LfdsEntry& ve = require("valid_encod_data");
  const LfdsEntry& tr = require("train_recon_data");
  const LfdsEntry& vr = require("valid_recon_data");
  check_rank3("train_encod_data", te.shape);
  check_rank3("valid_encod_data", ve.shape);
  check_rank3("train_recon_data", tr.shape);
  check_rank3("valid_recon_data", vr.shape);

  TrialDataset ds;
  ds.n_train = te.shape[0];
  ds.n_valid = ve.shape[0];
  ds.t_enc = te.shape[1];
  ds.n_enc = te.shape[2];
  ds.t_recon = tr.shape[1];
  ds.n_recon = tr.shape[2];
  auto expect_shape = [&](const char* name, const std::vector<size_t>& got,
                          std::vector<size_t> want) {
    if (got != want)
      throw ShapeError(std::string(name) + " is " + dims_str(got) + ", expected " +
                       dims_str(want));
  };
  expect_shape("valid_encod_data", ve.shape, {ds.n_valid, ds.t_enc, ds.n_enc});
  expect_shape("train_recon_data", tr.shape, {ds.n_train, ds.t_recon, ds.n_recon});
  expect_shape("valid_recon_data", vr.shape, {ds.n_valid, ds.t_recon, ds.n_recon});
  ds.train_encod = te.values;
  ds.valid_encod = ve.values;
  ds.train_recon = tr.values;
  ds.valid_recon = vr.values;

  const LfdsEntry* tt = find("train_truth");
  const LfdsEntry* vt = find("valid_truth");
  if (tt || vt) {
    if (!tt || !vt)
      throw IoError("dataset has only one of train_truth/valid_truth: " + path);
    expect_shape("train_truth", tt->shape, {ds.n_train, ds.t_recon, ds.n_recon});
    expect_shape("valid_truth", vt->shape, {ds.n_valid, ds.t_recon, ds.n_recon});
    ds.train_truth = tt->values;
    ds.valid_truth = vt->values;
  }
  ds.validate();

  bool integral = true;
  for (const auto* arr : {&ds.train_recon, &ds.valid_recon}) {
    for (double v : *arr)
      if (v != std::floor(v) || v < 0.0) {
        integral = false;
        break;
      }
    if (!integral) break;
  }
  if (!integral)
    std::cerr << "note: " << path
              << " contains non-integer or negative values; count-based "
                 "observation models will reject it\n";
  return ds;
}

// ----- batching --------------------------------------------------------------

std::vector<TrialBatch> batches(const TrialDataset& ds, Split split,
                                size_t batch_size, bool shuffle, Rng& rng) {
  if (batch_size < 1) throw ValueError("batch_size must be >= 1");
  size_t n = split == Split::train ? ds.n_train : ds.n_valid;
  const std::vector<double>& enc = split == Split::train ? ds.train_encod : ds.valid_encod;
  const std::vector<double>& rec = split == Split::train ? ds.train_recon : ds.valid_recon;
  if (n == 0) throw ValueError("split has no trials");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  if (shuffle) {
    for (size_t i = n - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i)));
      std::swap(order[i], order[j]);
    }
  }

  size_t enc_stride = ds.t_enc * ds.n_enc;
  size_t rec_stride = ds.t_recon * ds.n_recon;
  std::vector<TrialBatch> out;
  for (size_t begin = 0; begin < n; begin += batch_size) {
    size_t b = std::min(batch_size, n - begin);
    std::vector<double> be(b * enc_stride), br(b * rec_stride);
    TrialBatch batch;
    batch.indices.assign(order.begin() + static_cast<ptrdiff_t>(begin),
                         order.begin() + static_cast<ptrdiff_t>(begin + b));
    for (size_t k = 0; k < b; ++k) {
      size_t idx = batch.indices[k];
      std::copy_n(enc.begin() + static_cast<ptrdiff_t>(idx * enc_stride), enc_stride,
                  be.begin() + static_cast<ptrdiff_t>(k * enc_stride));
      std::copy_n(rec.begin() + static_cast<ptrdiff_t>(idx * rec_stride), rec_stride,
                  br.begin() + static_cast<ptrdiff_t>(k * rec_stride));
    }
    batch.encod_data = Tensor::from({b, ds.t_enc, ds.n_enc}, std::move(be));
    batch.recon_data = Tensor::from({b, ds.t_recon, ds.n_recon}, std::move(br));
    batch.sample_mask = Tensor::full({b, ds.t_recon, ds.n_recon}, 1.0);
    out.push_back(std::move(batch));
  }
  return out;
}

std::vector<double> truth_for(const TrialDataset& ds, Split split,
                              const std::vector<size_t>& indices) {
  if (!ds.has_truth()) throw ValueError("dataset has no ground-truth rates");
  const std::vector<double>& truth =
      split == Split::train ? ds.train_truth : ds.valid_truth;
  size_t n = split == Split::train ? ds.n_train : ds.n_valid;
  size_t stride = ds.t_recon * ds.n_recon;
  std::vector<double> out(indices.size() * stride);
  for (size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= n)
      throw ValueError("trial index " + std::to_string(indices[k]) +
                       " out of range for split of " + std::to_string(n));
    std::copy_n(truth.begin() + static_cast<ptrdiff_t>(indices[k] * stride), stride,
                out.begin() + static_cast<ptrdiff_t>(k * stride));
  }
  return out;
}

}  // namespace lfads
