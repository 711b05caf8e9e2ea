#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "pointlab/tape.hpp"

using namespace pointlab::ad;

namespace {

// Central finite difference of a scalar function of one leaf.
template <typename F>
double fd(F f, double x, double eps = 1e-6) {
  return (f(x + eps) - f(x - eps)) / (2.0 * eps);
}

template <typename F>
void check_grad(F build, double x, double tol = 1e-7) {
  Tape tape;
  Value leaf = constant(tape, x);
  Value y = build(leaf);
  auto adj = tape.backward(y.idx);
  auto scalar = [&](double xx) {
    Tape t2;
    return build(constant(t2, xx)).v();
  };
  CHECK(adj[leaf.idx] == doctest::Approx(fd(scalar, x)).epsilon(tol));
}

}  // namespace

TEST_CASE("arithmetic forward values") {
  Tape tape;
  Value a = constant(tape, 3.0);
  Value b = constant(tape, 2.0);
  CHECK((a + b).v() == 5.0);
  CHECK((a - b).v() == 1.0);
  CHECK((a * b).v() == 6.0);
  CHECK((a / b).v() == 1.5);
  CHECK((-a).v() == -3.0);
  CHECK((a + 1.0).v() == 4.0);
  CHECK((2.0 * b).v() == 4.0);
}

TEST_CASE("backward: product and chain rule") {
  Tape tape;
  Value a = constant(tape, 3.0);
  Value b = constant(tape, 2.0);
  Value y = a * b + exp(a);
  auto adj = tape.backward(y.idx);
  CHECK(adj[a.idx] == doctest::Approx(2.0 + std::exp(3.0)));
  CHECK(adj[b.idx] == doctest::Approx(3.0));
}

TEST_CASE("unary gradients match finite differences") {
  check_grad([](Value x) { return exp(x); }, 0.7);
  check_grad([](Value x) { return log(x); }, 0.7);
  check_grad([](Value x) { return log1p(x); }, 0.7);
  check_grad([](Value x) { return sqrt(x); }, 0.7);
  check_grad([](Value x) { return tanh(x); }, 0.3);
  check_grad([](Value x) { return sigmoid(x); }, -0.4);
  check_grad([](Value x) { return softplus(x); }, -0.4);
  check_grad([](Value x) { return softplus(x); }, 30.0);  // linear regime
  check_grad([](Value x) { return erf(x); }, 0.5);
  check_grad([](Value x) { return pow(x, 2.5); }, 1.3);
  check_grad([](Value x) { return relu(x); }, 0.5);
}

TEST_CASE("softplus is stable for large inputs") {
  Tape tape;
  CHECK(softplus(constant(tape, 800.0)).v() == doctest::Approx(800.0));
  CHECK(softplus(constant(tape, -800.0)).v() == doctest::Approx(0.0));
}

TEST_CASE("scaled softplus and gumbel-softplus") {
  Tape tape;
  Value s = constant(tape, 2.0);
  Value x = constant(tape, 1.0);
  // s log(1 + e^{x/s})
  CHECK(softplus_scaled(x, s).v() ==
        doctest::Approx(2.0 * std::log1p(std::exp(0.5))));
  check_grad(
      [](Value xx) {
        Value ss = constant(*xx.tape, 2.0);
        return softplus_scaled(xx, ss);
      },
      0.8);

  Value alpha = constant(tape, 1.5);
  Value g = gumbel_softplus(x, alpha, s);
  const double gs_ref = (1.0 - std::pow(1.0 + 1.5 * std::exp(1.0), -1.0 / 1.5)) *
                        (1.0 + 2.0 * std::log1p(std::exp(0.5)));
  CHECK(g.v() == doctest::Approx(gs_ref));
  // Positivity and monotonicity in x.
  Value g2 = gumbel_softplus(constant(tape, 2.0), alpha, s);
  CHECK(g.v() > 0.0);
  CHECK(g2.v() > g.v());
  check_grad(
      [](Value xx) {
        Value aa = constant(*xx.tape, 1.5);
        Value ss = constant(*xx.tape, 2.0);
        return gumbel_softplus(xx, aa, ss);
      },
      -0.3);
  // Stability deep in the tails.
  CHECK(std::isfinite(gumbel_softplus(constant(tape, 500.0), alpha, s).v()));
  CHECK(std::isfinite(gumbel_softplus(constant(tape, -500.0), alpha, s).v()));
}

TEST_CASE("log_sum_exp and softmax") {
  Tape tape;
  std::vector<Value> xs = {constant(tape, 1.0), constant(tape, 2.0),
                           constant(tape, 3.0)};
  const double ref = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  CHECK(log_sum_exp(xs).v() == doctest::Approx(ref));

  auto sm = softmax(xs);
  double total = 0.0;
  for (Value v : sm) total += v.v();
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sm[2].v() > sm[1].v());

  // Softmax gradient via finite differences.
  Tape t;
  std::vector<Value> ys = {constant(t, 0.3), constant(t, -0.7), constant(t, 1.1)};
  Value y = softmax(ys)[0];
  auto adj = t.backward(y.idx);
  auto f = [&](double x0) {
    Tape t2;
    std::vector<Value> zs = {constant(t2, x0), constant(t2, -0.7), constant(t2, 1.1)};
    return softmax(zs)[0].v();
  };
  CHECK(adj[ys[0].idx] == doctest::Approx(fd(f, 0.3)).epsilon(1e-6));
}

TEST_CASE("max with floor") {
  Tape tape;
  CHECK(max(constant(tape, 0.5), 1.0).v() == 1.0);
  CHECK(max(constant(tape, 2.0), 1.0).v() == 2.0);
  Value x = constant(tape, 2.0);
  Value y = max(x, 1.0);
  auto adj = tape.backward(y.idx);
  CHECK(adj[x.idx] == 1.0);
}

TEST_CASE("mark/rewind discards scratch") {
  Tape tape;
  Value a = constant(tape, 1.5);
  const std::size_t m = tape.mark();
  Value junk = exp(a) * a;
  (void)junk;
  tape.rewind(m);
  CHECK(tape.size() == m);
  Value y = a * a;  // tape still usable after rewind
  auto adj = tape.backward(y.idx);
  CHECK(adj[a.idx] == doctest::Approx(3.0));
}

TEST_CASE("duals differentiate through the tangent") {
  // d/dx of exp at x, carried as a dual, must itself be differentiable
  // with respect to a parameter: y = d/dt exp(p * t) = p exp(p t).
  Tape tape;
  Value p = constant(tape, 0.8);
  const double t0 = 1.3;
  Dual t = make_dual(tape, t0, 1.0);
  Dual y = exp(t * p);
  CHECK(y.v.v() == doctest::Approx(std::exp(0.8 * t0)));
  CHECK(y.d.v() == doctest::Approx(0.8 * std::exp(0.8 * t0)));
  // dy.d/dp = exp(pt) + pt exp(pt)
  auto adj = tape.backward(y.d.idx);
  CHECK(adj[p.idx] ==
        doctest::Approx(std::exp(0.8 * t0) * (1.0 + 0.8 * t0)).epsilon(1e-9));
}

TEST_CASE("dual chain: sigmoid, tanh, softplus") {
  Tape tape;
  Dual x = make_dual(tape, 0.4, 1.0);
  const double s = 1.0 / (1.0 + std::exp(-0.4));
  CHECK(sigmoid(x).d.v() == doctest::Approx(s * (1 - s)));
  CHECK(tanh(x).d.v() == doctest::Approx(1.0 - std::tanh(0.4) * std::tanh(0.4)));
  CHECK(softplus(x).d.v() == doctest::Approx(s));
  CHECK(log(exp(x)).d.v() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("randomized two-term expression gradients") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.2, 1.8);
  for (int trial = 0; trial < 20; ++trial) {
    const double av = unif(rng), bv = unif(rng);
    auto build = [bv](Value a) {
      Value b = constant(*a.tape, bv);
      return sigmoid(a * b) + log(a + b) * tanh(a - 0.5 * b);
    };
    Tape tape;
    Value a = constant(tape, av);
    Value y = build(a);
    auto adj = tape.backward(y.idx);
    auto f = [&](double x) {
      Tape t2;
      return build(constant(t2, x)).v();
    };
    CHECK(adj[a.idx] == doctest::Approx(fd(f, av)).epsilon(1e-5));
  }
}
