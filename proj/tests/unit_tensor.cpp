#include <cmath>
#include <cstring>
#include <functional>
#include <vector>

#include "doctest.h"
#include "lfads/errors.hpp"
#include "lfads/rng.hpp"
#include "lfads/tensor.hpp"

using namespace lfads;

namespace {

template <class E>
void expect_throw_contains(const std::function<void()>& fn, const std::string& needle) {
  bool threw = false;
  try {
    fn();
  } catch (const E& e) {
    threw = true;
    CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos,
                  "message was: ", e.what(), " (wanted substring: ", needle, ")");
  }
  CHECK(threw);
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

std::vector<double> randv(Rng& rng, size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Gradient-check harness: builds leaves from flat values, applies `build`,
// contracts the output against fixed weights, and compares tape gradients
// with central finite differences per input coordinate.
void check_grad(uint64_t seed, const std::vector<Shape>& in_shapes,
                const std::function<Tensor(const std::vector<Tensor>&)>& build,
                double lo = -1.5, double hi = 1.5, double tol = 1e-6) {
  Rng rng(seed);
  std::vector<std::vector<double>> init;
  size_t total = 0;
  for (const auto& s : in_shapes) {
    init.push_back(randv(rng, shape_numel(s), lo, hi));
    total += shape_numel(s);
  }

  auto eval = [&](const std::vector<std::vector<double>>& vals, bool with_tape,
                  std::vector<std::vector<double>>* grads) {
    std::vector<Tensor> leaves;
    for (size_t i = 0; i < in_shapes.size(); ++i)
      leaves.push_back(Tensor::leaf(in_shapes[i], vals[i]));
    Tensor out;
    double result;
    if (with_tape) {
      Tape tape;
      TapeScope scope(tape);
      out = build(leaves);
      Rng wrng(seed + 999);
      Tensor w = Tensor::from(out.shape(), randv(wrng, out.numel(), -1.0, 1.0));
      Tensor loss = reduce_sum(mul(out, w));
      result = loss.item();
      tape.backward(loss);
      for (auto& l : leaves) grads->push_back(l.grad());
    } else {
      out = build(leaves);
      Rng wrng(seed + 999);
      Tensor w = Tensor::from(out.shape(), randv(wrng, out.numel(), -1.0, 1.0));
      result = reduce_sum(mul(out, w)).item();
    }
    return result;
  };

  std::vector<std::vector<double>> tape_grads;
  eval(init, true, &tape_grads);

  std::vector<double> flat;
  for (const auto& v : init) flat.insert(flat.end(), v.begin(), v.end());
  auto f = [&](const std::vector<double>& theta) {
    std::vector<std::vector<double>> vals;
    size_t off = 0;
    for (const auto& s : in_shapes) {
      size_t n = shape_numel(s);
      vals.emplace_back(theta.begin() + off, theta.begin() + off + n);
      off += n;
    }
    return eval(vals, false, nullptr);
  };
  auto fd = finite_difference_grad(f, flat);

  size_t off = 0;
  double worst = 0.0;
  for (const auto& g : tape_grads) {
    for (size_t i = 0; i < g.size(); ++i) worst = std::max(worst, rel_err(g[i], fd[off + i]));
    off += g.size();
  }
  CHECK_MESSAGE(worst < tol, "max grad rel err ", worst);
}

}  // namespace

TEST_CASE("construction, item, at, shape errors") {
  Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.at({1, 2}) == 6.0);
  CHECK(t.at({0, 0}) == 1.0);
  CHECK(Tensor::scalar(3.5).item() == 3.5);
  expect_throw_contains<ShapeError>([] { Tensor::from({2, 2}, {1.0}); }, "[2,2]");
  expect_throw_contains<ShapeError>([&] { t.item(); }, "[2,3]");
}

TEST_CASE("elementwise forward values") {
  Tensor x = Tensor::from({4}, {0.0, 1.0, -1.0, 0.5});
  CHECK(sigmoid(x).values()[0] == 0.5);
  CHECK(tanh(x).values()[1] == doctest::Approx(std::tanh(1.0)));
  CHECK(softplus(x).values()[0] == doctest::Approx(std::log(2.0)));
  CHECK(lfads::exp(x).values()[2] == doctest::Approx(std::exp(-1.0)));
  Tensor p = Tensor::from({2}, {1.0, 0.5});
  CHECK(lfads::lgamma(p).values()[0] == doctest::Approx(0.0));
  CHECK(lfads::lgamma(p).values()[1] == doctest::Approx(0.5 * std::log(M_PI)));
  CHECK(lfads::log(p).values()[1] == doctest::Approx(std::log(0.5)));
  CHECK(pow_scalar(p, 2.0).values()[1] == doctest::Approx(0.25));
  Tensor c = clamp(Tensor::from({3}, {-5.0, 0.3, 7.0}), -1.0, 1.0);
  CHECK(c.values()[0] == -1.0);
  CHECK(c.values()[1] == 0.3);
  CHECK(c.values()[2] == 1.0);
}

TEST_CASE("elementwise ops match scalar evaluation exactly") {
  Rng rng(3);
  auto av = randv(rng, 64, -2, 2);
  auto bv = randv(rng, 64, 0.5, 2);
  Tensor a = Tensor::from({64}, av), b = Tensor::from({64}, bv);
  Tensor s = add(a, b), d = divide(a, b), m = mul(a, b);
  for (size_t i = 0; i < 64; ++i) {
    CHECK(s.values()[i] == av[i] + bv[i]);
    CHECK(d.values()[i] == av[i] / bv[i]);
    CHECK(m.values()[i] == av[i] * bv[i]);
  }
}

TEST_CASE("scalar broadcast matches the materialized equal-shape computation bitwise") {
  Rng rng(4);
  auto av = randv(rng, 30, -2, 2);
  Tensor a = Tensor::from({5, 6}, av);
  Tensor s = Tensor::scalar(0.37);
  Tensor full = Tensor::full({5, 6}, 0.37);
  for (auto pair : {std::pair<Tensor, Tensor>{add(a, s), add(a, full)},
                    {sub(a, s), sub(a, full)},
                    {mul(a, s), mul(a, full)},
                    {divide(a, s), divide(a, full)}}) {
    CHECK(std::memcmp(pair.first.values().data(), pair.second.values().data(),
                      30 * sizeof(double)) == 0);
  }
  // and the convenience double overloads hit the same path
  CHECK(std::memcmp((a + 0.37).values().data(), add(a, s).values().data(), 30 * sizeof(double)) == 0);
}

TEST_CASE("broadcast shape errors name both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4});
  expect_throw_contains<ShapeError>([&] { add(a, b); }, "[2,3]");
  expect_throw_contains<ShapeError>([&] { add(a, b); }, "[4]");
}

TEST_CASE("domain errors: log, lgamma, rdiv, div by zero") {
  Tensor neg1 = Tensor::from({2}, {1.0, -1.0});
  expect_throw_contains<ValueError>([&] { lfads::log(neg1); }, "input[1]");
  expect_throw_contains<ValueError>([&] { lfads::lgamma(neg1); }, "not > 0");
  Tensor z = Tensor::from({2}, {1.0, 0.0});
  CHECK_THROWS_AS(divide(neg1, z), ValueError);
  CHECK_THROWS_AS(rdiv_scalar(1.0, z), ValueError);
  CHECK_THROWS_AS(div_scalar(neg1, 0.0), ValueError);
}

TEST_CASE("matmul values and shape checks") {
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from({2, 1}, {1, 1});
  Tensor c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 1});
  CHECK(c.values()[0] == 3.0);
  CHECK(c.values()[1] == 7.0);
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor ai = matmul(a, eye);
  CHECK(std::memcmp(ai.values().data(), a.values().data(), 4 * sizeof(double)) == 0);
  expect_throw_contains<ShapeError>([&] { matmul(a, Tensor::zeros({3, 2})); }, "[2,2]");
}

TEST_CASE("reduce values") {
  CHECK(reduce_sum(Tensor::full({2, 3}, 1.0)).item() == 6.0);
  CHECK(reduce_mean(Tensor::from({3}, {1, 2, 3})).item() == 2.0);
  Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor s0 = reduce_sum(x, {0});
  CHECK(s0.shape() == Shape{3});
  CHECK(s0.values() == std::vector<double>{5, 7, 9});
  Tensor s1 = reduce_sum(x, {1});
  CHECK(s1.values() == std::vector<double>{6, 15});
  Tensor m01 = reduce_mean(x, {0, 1});
  CHECK(m01.item() == 3.5);
  expect_throw_contains<ShapeError>([&] { reduce_sum(x, {2}); }, "axis 2");
}

TEST_CASE("structure op values") {
  Tensor v = Tensor::from({3}, {1, 2, 3});
  Tensor e = expand0(v, 2);
  CHECK(e.shape() == Shape{2, 3});
  CHECK(e.values() == std::vector<double>{1, 2, 3, 1, 2, 3});

  Tensor x = Tensor::from({1, 2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor st = slice_step(x, 1);
  CHECK(st.shape() == Shape{1, 3});
  CHECK(st.values() == std::vector<double>{4, 5, 6});

  Tensor sl = slice_last(x, 1, 2);
  CHECK(sl.shape() == Shape{1, 2, 2});
  CHECK(sl.values() == std::vector<double>{2, 3, 5, 6});

  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from({2, 1}, {9, 8});
  Tensor cc = concat_last(a, b);
  CHECK(cc.shape() == Shape{2, 3});
  CHECK(cc.values() == std::vector<double>{1, 2, 9, 3, 4, 8});

  Tensor s0 = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor s1 = Tensor::from({2, 2}, {5, 6, 7, 8});
  Tensor stk = stack_steps({s0, s1});
  CHECK(stk.shape() == Shape{2, 2, 2});
  CHECK(stk.values() == std::vector<double>{1, 2, 5, 6, 3, 4, 7, 8});
  for (size_t t = 0; t < 2; ++t) {
    Tensor back = slice_step(stk, t);
    CHECK(back.values() == (t == 0 ? s0.values() : s1.values()));
  }

  Tensor tr = transpose(a);
  CHECK(tr.values() == std::vector<double>{1, 3, 2, 4});

  Tensor el = expand_last(v, {2, 2, 3});
  CHECK(el.numel() == 12);
  CHECK(el.values()[9] == 1.0);
}

TEST_CASE("backward basics: identity, accumulation, product rule") {
  Tensor x = Tensor::leaf({}, {3.0});
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(x);
    CHECK(x.grad()[0] == 1.0);
    tape.backward(x);  // repeated backward accumulates into leaves
    CHECK(x.grad()[0] == 2.0);
  }

  Tensor y = Tensor::leaf({2}, {1.0, 2.0});
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = reduce_sum(mul(y, y));
    tape.backward(loss);
    CHECK(y.grad() == std::vector<double>{2.0, 4.0});
    tape.backward(loss);
    CHECK(y.grad() == std::vector<double>{4.0, 8.0});
    y.zero_grad();
    tape.backward(loss);
    CHECK(y.grad() == std::vector<double>{2.0, 4.0});
  }

  expect_throw_contains<ShapeError>(
      [] {
        Tape tape;
        TapeScope scope(tape);
        Tensor v = Tensor::leaf({3}, {1, 2, 3});
        tape.backward(v);
      },
      "scalar");
}

TEST_CASE("no tape means no recording, no grads") {
  Tensor x = Tensor::leaf({2}, {1.0, 2.0});
  Tensor y = mul(x, x);
  CHECK_FALSE(y.requires_grad());
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor z = mul(x, x);
    CHECK(z.requires_grad());
    CHECK(tape.size() == 1);
  }
  Tensor w = mul(x, x);  // scope closed again
  CHECK_FALSE(w.requires_grad());
  CHECK(tape.size() == 1);
}

TEST_CASE("two identical forward passes are bitwise identical") {
  Rng rng(5);
  auto av = randv(rng, 40, -1, 1);
  auto run = [&] {
    Tensor a = Tensor::from({5, 8}, av);
    Tensor b = sigmoid(matmul(a, transpose(a)));
    return reduce_sum(b).item();
  };
  double r1 = run(), r2 = run();
  CHECK(std::memcmp(&r1, &r2, sizeof(double)) == 0);
}

TEST_CASE("finite difference oracle sanity") {
  auto f = [](const std::vector<double>& t) { return t[0] * t[0]; };
  auto g = finite_difference_grad(f, {3.0});
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-8));

  // d/dz of the count-model objective exp(z) - k*z is exp(z) - k
  const double k = 4.0, z = 0.7;
  auto nll = [&](const std::vector<double>& t) { return std::exp(t[0]) - k * t[0]; };
  auto g2 = finite_difference_grad(nll, {z});
  CHECK(g2[0] == doctest::Approx(std::exp(z) - k).epsilon(1e-6));
}

TEST_CASE("per-op gradients match finite differences") {
  check_grad(101, {{3, 4}, {3, 4}}, [](const std::vector<Tensor>& in) { return add(in[0], in[1]); });
  check_grad(102, {{3, 4}, {3, 4}}, [](const std::vector<Tensor>& in) { return sub(in[0], in[1]); });
  check_grad(103, {{3, 4}, {3, 4}}, [](const std::vector<Tensor>& in) { return mul(in[0], in[1]); });
  check_grad(104, {{3, 4}, {3, 4}},
             [](const std::vector<Tensor>& in) { return divide(in[0], in[1]); }, 0.5, 2.0);
  check_grad(105, {{2, 3}, {}},
             [](const std::vector<Tensor>& in) { return add(in[0], in[1]); });
  check_grad(106, {{2, 3}, {}},
             [](const std::vector<Tensor>& in) { return mul(in[0], in[1]); });
  check_grad(107, {{2, 3}, {}},
             [](const std::vector<Tensor>& in) { return divide(in[0], in[1]); }, 0.5, 2.0);
  check_grad(108, {{}, {2, 3}},
             [](const std::vector<Tensor>& in) { return divide(in[0], in[1]); }, 0.5, 2.0);
  check_grad(109, {{}, {2, 3}},
             [](const std::vector<Tensor>& in) { return sub(in[0], in[1]); });

  check_grad(110, {{4, 5}}, [](const std::vector<Tensor>& in) { return neg(in[0]); });
  check_grad(111, {{4, 5}}, [](const std::vector<Tensor>& in) { return lfads::exp(in[0]); });
  check_grad(112, {{4, 5}}, [](const std::vector<Tensor>& in) { return lfads::log(in[0]); }, 0.2, 3.0);
  check_grad(113, {{4, 5}}, [](const std::vector<Tensor>& in) { return lfads::tanh(in[0]); });
  check_grad(114, {{4, 5}}, [](const std::vector<Tensor>& in) { return sigmoid(in[0]); });
  check_grad(115, {{4, 5}}, [](const std::vector<Tensor>& in) { return softplus(in[0]); });
  check_grad(116, {{4, 5}}, [](const std::vector<Tensor>& in) { return lfads::lgamma(in[0]); }, 0.3, 4.0);
  check_grad(117, {{4, 5}}, [](const std::vector<Tensor>& in) { return lfads::digamma(in[0]); }, 0.5, 4.0);
  check_grad(118, {{4, 5}}, [](const std::vector<Tensor>& in) { return pow_scalar(in[0], 3.0); });
  check_grad(119, {{4, 5}}, [](const std::vector<Tensor>& in) { return pow_scalar(in[0], 1.7); }, 0.3, 2.0);
  check_grad(120, {{4, 5}}, [](const std::vector<Tensor>& in) { return clamp(in[0], -10, 10); });
  check_grad(121, {{4, 5}}, [](const std::vector<Tensor>& in) { return add_scalar(in[0], 2.5); });
  check_grad(122, {{4, 5}}, [](const std::vector<Tensor>& in) { return rsub_scalar(1.0, in[0]); });
  check_grad(123, {{4, 5}}, [](const std::vector<Tensor>& in) { return mul_scalar(in[0], -0.7); });
  check_grad(124, {{4, 5}}, [](const std::vector<Tensor>& in) { return div_scalar(in[0], 3.0); });
  check_grad(125, {{4, 5}}, [](const std::vector<Tensor>& in) { return rdiv_scalar(2.0, in[0]); }, 0.5, 2.0);

  check_grad(130, {{3, 4}, {4, 2}},
             [](const std::vector<Tensor>& in) { return matmul(in[0], in[1]); });
  check_grad(131, {{3, 4}}, [](const std::vector<Tensor>& in) { return transpose(in[0]); });

  check_grad(140, {{2, 3, 4}}, [](const std::vector<Tensor>& in) { return reduce_sum(in[0]); });
  check_grad(141, {{2, 3, 4}},
             [](const std::vector<Tensor>& in) { return reduce_sum(in[0], {1}); });
  check_grad(142, {{2, 3, 4}},
             [](const std::vector<Tensor>& in) { return reduce_mean(in[0], {0, 2}); });
  check_grad(143, {{2, 3, 4}},
             [](const std::vector<Tensor>& in) { return reduce_mean(in[0], {1, 2}); });

  check_grad(150, {{4}}, [](const std::vector<Tensor>& in) { return expand0(in[0], 3); });
  check_grad(151, {{3}},
             [](const std::vector<Tensor>& in) { return expand_last(in[0], {2, 2, 3}); });
  check_grad(152, {{2, 3, 5}},
             [](const std::vector<Tensor>& in) { return slice_last(in[0], 1, 3); });
  check_grad(153, {{2, 4, 3}},
             [](const std::vector<Tensor>& in) { return slice_step(in[0], 2); });
  check_grad(154, {{2, 3}, {2, 3}, {2, 3}},
             [](const std::vector<Tensor>& in) { return stack_steps({in[0], in[1], in[2]}); });
  check_grad(155, {{3, 2}, {3, 4}},
             [](const std::vector<Tensor>& in) { return concat_last(in[0], in[1]); });

  // composite expression mixing most of the graph machinery
  check_grad(160, {{3, 4}, {4, 3}, {3}}, [](const std::vector<Tensor>& in) {
    Tensor h = lfads::tanh(matmul(in[0], in[1]));
    Tensor g = sigmoid(add(h, expand0(in[2], 3)));
    return mul(g, sub(h, mul_scalar(g, 0.5)));
  });
}

TEST_CASE("matmul gradient closed form: d sum(A B)/dA sums columns of B") {
  Tensor a = Tensor::leaf({2, 3}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  Tensor b = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
  Tape tape;
  TapeScope scope(tape);
  tape.backward(reduce_sum(matmul(a, b)));
  // each dA[i,k] = sum_j B[k,j]
  CHECK(a.grad() == std::vector<double>{3, 7, 11, 3, 7, 11});
}

TEST_CASE("mean gradient is 1/n") {
  Tensor x = Tensor::leaf({3}, {1, 2, 3});
  Tape tape;
  TapeScope scope(tape);
  tape.backward(reduce_mean(x));
  for (double g : x.grad()) CHECK(g == doctest::Approx(1.0 / 3.0));
}
