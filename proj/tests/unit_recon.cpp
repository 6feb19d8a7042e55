#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "doctest.h"
#include "lfads/errors.hpp"
#include "lfads/recon.hpp"
#include "lfads/rng.hpp"
#include "lfads/tensor.hpp"
#include "oracles.hpp"

using namespace lfads;

namespace {

constexpr double kPi = 3.14159265358979323846;

template <typename E>
void expect_throw_contains(const std::function<void()>& fn, const std::string& needle) {
  try {
    fn();
    FAIL_CHECK("expected an exception mentioning '" << needle << "'");
  } catch (const E& e) {
    CHECK(std::string(e.what()).find(needle) != std::string::npos);
  }
}

// Scalar NLL for one output with explicit raw params (block layout).
double nll_at(const ObservationModel& m, const std::vector<double>& raw, double x) {
  Tensor r = Tensor::from({1, 1, raw.size()}, raw);
  Tensor d = Tensor::from({1, 1, 1}, {x});
  return m.nll(r, d).item();
}

void check_raw_grad(const ObservationModel& m, const std::vector<double>& raw0,
                    const std::vector<double>& data, size_t n_out) {
  Tensor data_t = Tensor::from({1, 1, n_out}, data);
  Tensor raw = Tensor::leaf({1, 1, raw0.size()}, raw0);
  raw.zero_grad();
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(reduce_sum(m.nll(raw, data_t)));
  }
  auto f = [&](const std::vector<double>& th) {
    raw.values_mut() = th;
    double v = reduce_sum(m.nll(raw, data_t)).item();
    return v;
  };
  std::vector<double> fd = finite_difference_grad(f, raw0);
  raw.values_mut() = raw0;
  for (size_t i = 0; i < fd.size(); ++i) {
    double denom = std::max({1.0, std::abs(fd[i]), std::abs(raw.grad()[i])});
    CHECK(std::abs(fd[i] - raw.grad()[i]) / denom < 1e-6);
  }
}

double golden_min(const std::function<double(double)>& f, double a, double b) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  for (int i = 0; i < 200; ++i) {
    if (f(c) < f(d)) b = d; else a = c;
    c = b - r * (b - a);
    d = a + r * (b - a);
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("closed-form NLL values") {
  PoissonModel poisson;
  CHECK(nll_at(poisson, {0.0}, 0.0) == doctest::Approx(1.0).epsilon(1e-12));

  GaussianModel gaussian;
  CHECK(nll_at(gaussian, {0.7, 0.0}, 0.7) ==
        doctest::Approx(0.5 * std::log(2 * kPi)).epsilon(1e-12));

  GammaModel gamma;
  CHECK(nll_at(gamma, {0.0, 0.0}, 1.0) == doctest::Approx(1.0).epsilon(1e-12));

  ZIGModel zig;
  CHECK(nll_at(zig, {0.0, 0.3, -0.2}, 0.0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("means under the links") {
  PoissonModel poisson;
  CHECK(poisson.mean(Tensor::from({1, 1, 1}, {0.0})).item() == 1.0);

  GammaModel gamma;
  CHECK(gamma.mean(Tensor::from({1, 1, 2}, {std::log(2.0), std::log(4.0)})).item() ==
        doctest::Approx(0.5).epsilon(1e-14));

  ZIGModel zig;
  CHECK(zig.mean(Tensor::from({1, 1, 3}, {0.0, std::log(2.0), 0.0})).item() ==
        doctest::Approx(1.0).epsilon(1e-14));

  GaussianModel gaussian;
  Tensor raw = Tensor::from({1, 1, 4}, {1.5, -2.5, 0.3, 0.4});
  Tensor m = gaussian.mean(raw);
  CHECK(m.shape() == Shape{1, 1, 2});
  CHECK(m.values()[0] == 1.5);
  CHECK(m.values()[1] == -2.5);
}

TEST_CASE("raw layout: parameter blocks address the right neurons") {
  GaussianModel gaussian;
  // two neurons: means (1, 2), logvars (ln 4, ln 9)
  Tensor raw = Tensor::from({1, 1, 4}, {1.0, 2.0, std::log(4.0), std::log(9.0)});
  Tensor data = Tensor::from({1, 1, 2}, {1.0, 2.0});
  Tensor nll = gaussian.nll(raw, data);
  CHECK(nll.values()[0] ==
        doctest::Approx(0.5 * (std::log(4.0) + std::log(2 * kPi))).epsilon(1e-14));
  CHECK(nll.values()[1] ==
        doctest::Approx(0.5 * (std::log(9.0) + std::log(2 * kPi))).epsilon(1e-14));
}

TEST_CASE("support violations name the element") {
  PoissonModel poisson;
  Tensor raw1 = Tensor::from({1, 1, 2}, {0.0, 0.0});
  expect_throw_contains<ValueError>(
      [&] { poisson.nll(raw1, Tensor::from({1, 1, 2}, {1.0, -2.0})); }, "element 1");

  GammaModel gamma;
  Tensor raw2 = Tensor::from({1, 1, 4}, {0.0, 0.0, 0.0, 0.0});
  expect_throw_contains<ValueError>(
      [&] { gamma.nll(raw2, Tensor::from({1, 1, 2}, {0.0, 1.0})); }, "element 0");

  ZIGModel zig;
  Tensor raw3 = Tensor::from({1, 1, 3}, {0.0, 0.0, 0.0});
  expect_throw_contains<ValueError>(
      [&] { zig.nll(raw3, Tensor::from({1, 1, 1}, {-0.5})); }, "element 0");

  GaussianModel gaussian;
  Tensor raw4 = Tensor::from({1, 1, 2}, {0.0, 0.0});
  expect_throw_contains<ValueError>(
      [&] { gaussian.nll(raw4, Tensor::from({1, 1, 1}, {std::nan("")})); },
      "not finite");

  expect_throw_contains<ShapeError>(
      [&] { poisson.nll(Tensor::from({1, 1, 3}, {0, 0, 0}),
                        Tensor::from({1, 1, 2}, {1.0, 1.0})); },
      "raw width");
}

TEST_CASE("NLL gradients match finite differences at random in-range points") {
  Rng rng(606);
  auto draw = [&](size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.5, 1.5);
    return v;
  };
  for (int rep = 0; rep < 3; ++rep) {
    check_raw_grad(PoissonModel{}, draw(3),
                   {double(rng.uniform_int(0, 6)), double(rng.uniform_int(0, 6)),
                    double(rng.uniform_int(0, 6))},
                   3);
    check_raw_grad(GaussianModel{}, draw(6),
                   {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)}, 3);
    check_raw_grad(GammaModel{}, draw(6),
                   {rng.uniform(0.1, 5), rng.uniform(0.1, 5), rng.uniform(0.1, 5)}, 3);
    check_raw_grad(ZIGModel{}, draw(9), {0.0, rng.uniform(0.1, 5), 0.0}, 3);
  }
}

TEST_CASE("Poisson NLL over lambda is minimized at lambda = k") {
  PoissonModel poisson;
  double k = 3.0;
  auto f = [&](double lam) { return nll_at(poisson, {std::log(lam)}, k); };
  CHECK(golden_min(f, 0.1, 20.0) == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("ZIG collapses to Gamma as q -> 1") {
  ZIGModel zig;
  GammaModel gamma;
  double la = 0.4, lb = -0.3, x = 1.7;
  for (double logit : {3.0, 8.0, 30.0}) {
    double diff = nll_at(zig, {logit, la, lb}, x) - nll_at(gamma, {la, lb}, x);
    double minus_ln_q = std::log1p(std::exp(-logit));
    CHECK(diff == doctest::Approx(minus_ln_q).epsilon(1e-9));
  }
  double diff30 = nll_at(zig, {30.0, la, lb}, x) - nll_at(gamma, {la, lb}, x);
  CHECK(std::abs(diff30) < 1e-12);
}

TEST_CASE("densities normalize to 1 under quadrature/summation") {
  Rng rng(77);

  SUBCASE("poisson sums over counts") {
    PoissonModel m;
    for (int rep = 0; rep < 3; ++rep) {
      double log_rate = rng.uniform(-1.5, 2.0);
      double lam = std::exp(log_rate);
      size_t kmax = size_t(lam + 40 * std::sqrt(lam) + 50);
      double total = 0;
      for (size_t k = 0; k <= kmax; ++k)
        total += std::exp(-nll_at(m, {log_rate}, double(k)));
      CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
    }
  }

  SUBCASE("gaussian integrates over the line") {
    GaussianModel m;
    for (int rep = 0; rep < 3; ++rep) {
      double mu = rng.uniform(-2, 2), lv = rng.uniform(-1.5, 1.5);
      double sd = std::exp(0.5 * lv);
      auto pdf = [&](double x) { return std::exp(-nll_at(m, {mu, lv}, x)); };
      CHECK(oracle::simpson(pdf, mu - 12 * sd, mu + 12 * sd, 3000) ==
            doctest::Approx(1.0).epsilon(1e-3));
    }
  }

  SUBCASE("gamma integrates over the positive axis (log substitution)") {
    GammaModel m;
    for (int rep = 0; rep < 3; ++rep) {
      double la = rng.uniform(-0.5, 1.5), lb = rng.uniform(-1.0, 1.0);
      auto g = [&](double u) {
        double x = std::exp(u);
        return std::exp(-nll_at(m, {la, lb}, x) + u);
      };
      double upper = std::log(200.0 * (std::exp(la) + 5.0) / std::exp(lb));
      CHECK(oracle::simpson(g, -40.0, upper, 4000) ==
            doctest::Approx(1.0).epsilon(1e-3));
    }
  }

  SUBCASE("zig point mass plus continuous part") {
    ZIGModel m;
    for (int rep = 0; rep < 3; ++rep) {
      double logit = rng.uniform(-1.5, 1.5);
      double la = rng.uniform(-0.5, 1.5), lb = rng.uniform(-1.0, 1.0);
      double p0 = std::exp(-nll_at(m, {logit, la, lb}, 0.0));
      auto g = [&](double u) {
        double x = std::exp(u);
        return std::exp(-nll_at(m, {logit, la, lb}, x) + u);
      };
      double upper = std::log(200.0 * (std::exp(la) + 5.0) / std::exp(lb));
      double total = p0 + oracle::simpson(g, -40.0, upper, 4000);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
    }
  }
}

TEST_CASE("model mean equals the empirical mean of test-side samples") {
  Rng rng(909);
  const int n = 100000;
  auto check_moment = [&](double model_mean, const std::function<double()>& draw) {
    double acc = 0, acc2 = 0;
    for (int i = 0; i < n; ++i) {
      double s = draw();
      acc += s;
      acc2 += s * s;
    }
    double emp = acc / n;
    double se = std::sqrt((acc2 / n - emp * emp) / n);
    CHECK(std::abs(emp - model_mean) < 4 * se);
  };

  PoissonModel poisson;
  double lam = 2.5;
  check_moment(poisson.mean(Tensor::from({1}, {std::log(lam)})).item(),
               [&] { return double(rng.poisson(lam)); });

  GaussianModel gaussian;
  check_moment(
      gaussian.mean(Tensor::from({1, 1, 2}, {1.3, std::log(0.49)})).values()[0],
      [&] { return rng.normal(1.3, 0.7); });

  GammaModel gamma;
  double a = 2.2, b = 1.7;
  check_moment(
      gamma.mean(Tensor::from({1, 1, 2}, {std::log(a), std::log(b)})).item(),
      [&] { return oracle::gamma_sample(rng, a, b); });

  ZIGModel zig;
  double q = 0.7;
  double logit = std::log(q / (1 - q));
  check_moment(
      zig.mean(Tensor::from({1, 1, 3}, {logit, std::log(a), std::log(b)})).item(),
      [&] { return rng.bernoulli(q) ? oracle::gamma_sample(rng, a, b) : 0.0; });
}

TEST_CASE("tied-variance gaussian owns a trainable per-neuron logvar") {
  GaussianModel tied(2);
  CHECK(tied.n_params_per_output() == 1);
  auto ps = tied.params();
  REQUIRE(ps.size() == 1);
  CHECK(ps[0].first == "logvar");
  CHECK(ps[0].second.requires_grad());
  ps[0].second.values_mut() = {std::log(4.0), std::log(9.0)};

  Tensor raw = Tensor::from({1, 1, 2}, {1.0, 2.0});
  Tensor data = Tensor::from({1, 1, 2}, {1.0, 2.0});
  Tensor nll = tied.nll(raw, data);
  CHECK(nll.values()[0] ==
        doctest::Approx(0.5 * (std::log(4.0) + std::log(2 * kPi))).epsilon(1e-14));
  CHECK(nll.values()[1] ==
        doctest::Approx(0.5 * (std::log(9.0) + std::log(2 * kPi))).epsilon(1e-14));
  CHECK(tied.mean(raw).values() == raw.values());

  // gradient reaches the tied logvar
  Tensor leaf = ps[0].second;
  leaf.zero_grad();
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(reduce_sum(tied.nll(raw, data)));
  }
  std::vector<double> theta = leaf.values();
  auto f = [&](const std::vector<double>& th) {
    leaf.values_mut() = th;
    double v = reduce_sum(tied.nll(raw, data)).item();
    return v;
  };
  std::vector<double> fd = finite_difference_grad(f, theta);
  leaf.values_mut() = theta;
  for (size_t i = 0; i < fd.size(); ++i)
    CHECK(std::abs(fd[i] - leaf.grad()[i]) < 1e-6);
}

TEST_CASE("zig location offset shifts the gamma component") {
  ZIGModel zig(0.25);
  CHECK(zig.location() == 0.25);
  // support: exact zero fine, 0 < x <= location rejected
  Tensor raw = Tensor::from({1, 1, 3}, {0.0, 0.0, 0.0});
  CHECK(zig.nll(raw, Tensor::from({1, 1, 1}, {0.0})).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  expect_throw_contains<ValueError>(
      [&] { zig.nll(raw, Tensor::from({1, 1, 1}, {0.2})); }, "support");
  // x > location evaluates the gamma at x - location
  GammaModel gamma;
  double la = 0.3, lb = 0.1, x = 1.5;
  double want = std::log(2.0) + nll_at(gamma, {la, lb}, x - 0.25);
  CHECK(nll_at(ZIGModel{0.25}, {0.0, la, lb}, x) ==
        doctest::Approx(want).epsilon(1e-12));
  // mean shifts by q * location
  CHECK(ZIGModel{0.25}
            .mean(Tensor::from({1, 1, 3}, {0.0, std::log(2.0), 0.0}))
            .item() == doctest::Approx(0.5 * (2.0 + 0.25)).epsilon(1e-14));
}
