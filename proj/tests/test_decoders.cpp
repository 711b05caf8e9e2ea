#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <memory>

#include "doctest.h"
#include "pointlab/hawkes.hpp"
#include "pointlab/model.hpp"
#include "pointlab/train.hpp"

using namespace pointlab;

namespace {

EventSequence three_events() {
  EventSequence s;
  s.events = {{0.4, 0}, {0.9, 1}, {1.7, 0}};
  s.t_end = 2.5;
  return s;
}

struct Fixture {
  ModelSpec spec;
  ParamStore params;
  ad::Tape tape;
  EventSequence seq;
  std::unique_ptr<ModelForward> fwd;

  Fixture(ModelSpec s, EventSequence sq, int num_marks, int n_mc = 64)
      : spec(s), params(build_params(s, num_marks)), seq(std::move(sq)) {
    fwd = std::make_unique<ModelForward>(spec, num_marks, tape, params, seq, n_mc, 99);
  }
};

ModelSpec small_spec(DecoderKind d, EventEncoding enc = EventEncoding::TO,
                     HistoryEncoder hist = HistoryEncoder::GRU) {
  ModelSpec spec;
  spec.decoder = d;
  spec.encoding = enc;
  spec.history = hist;
  spec.d_t = 4;
  spec.d_k = 3;
  spec.d_h = 4;
  spec.d_hidden = 4;
  spec.mixtures = 3;
  spec.n_mc = 64;
  spec.seed = 17;
  return spec;
}

std::vector<DecoderKind> all_decoders() {
  return {DecoderKind::EC,  DecoderKind::MLP_MC, DecoderKind::SA_MC,
          DecoderKind::RMTPP, DecoderKind::NH,   DecoderKind::LNM,
          DecoderKind::LN,  DecoderKind::FNN,    DecoderKind::SA_CM,
          DecoderKind::HAWKES, DecoderKind::POISSON};
}

ModelSpec legal_spec(DecoderKind d) {
  return small_spec(d, decoder_view(d) == DecoderView::Cumulative ? EventEncoding::LE
                                                                  : EventEncoding::TO);
}

}  // namespace

TEST_CASE("combination legality") {
  // Cumulative decoders reject absolute-time encodings.
  CHECK_THROWS(check_legal(small_spec(DecoderKind::FNN, EventEncoding::TEM), 2));
  CHECK_THROWS(check_legal(small_spec(DecoderKind::SA_CM, EventEncoding::TEMWL), 2));
  CHECK_NOTHROW(check_legal(small_spec(DecoderKind::FNN, EventEncoding::LE), 2));
  CHECK_NOTHROW(check_legal(small_spec(DecoderKind::FNN, EventEncoding::LCONCAT), 2));
  // Mark-bearing encodings need K >= 2.
  CHECK_THROWS(check_legal(small_spec(DecoderKind::EC, EventEncoding::CONCAT), 1));
  // Self-contained decoders ignore the encoding entirely.
  CHECK_NOTHROW(check_legal(small_spec(DecoderKind::HAWKES, EventEncoding::TEM), 2));
}

TEST_CASE("model spec json round-trip") {
  ModelSpec spec = small_spec(DecoderKind::LNM, EventEncoding::LCONCAT, HistoryEncoder::SA);
  spec.window_q = 3;
  spec.seed = 77;
  ModelSpec back = model_spec_from_json(model_spec_to_json(spec));
  CHECK(back.decoder == spec.decoder);
  CHECK(back.encoding == spec.encoding);
  CHECK(back.history == spec.history);
  CHECK(back.d_t == spec.d_t);
  CHECK(back.mixtures == spec.mixtures);
  REQUIRE(back.window_q.has_value());
  CHECK(*back.window_q == 3);
  CHECK(back.seed == 77);
}

TEST_CASE("poisson decoder: closed forms") {
  ModelSpec spec = small_spec(DecoderKind::POISSON);
  Fixture f(spec, three_events(), 2);
  f.params.set_exposed("dec.mu", {0.3, 0.7});
  // Rebuild the forward so the new parameter values are bound.
  ad::Tape tape;
  ModelForward fwd(spec, 2, tape, f.params, f.seq, 64, 1);

  auto lam = fwd.intensity(2, 0.6);
  CHECK(lam[0].v() == doctest::Approx(0.3));
  CHECK(lam[1].v() == doctest::Approx(0.7));
  auto cum = fwd.cumulative(2, 0.9);  // interval 2 starts at t_1 = 0.4
  CHECK(cum[0].v() == doctest::Approx(0.3 * 0.5));
  CHECK(cum[1].v() == doctest::Approx(0.7 * 0.5));

  // log f*(t_2) = log(1.0) - 1.0 * 0.5 ; log p*(k=1) = log 0.7.
  auto [log_f, log_p] = fwd.log_density_and_mark(2);
  CHECK(log_f.v() == doctest::Approx(std::log(1.0) - 0.5));
  CHECK(log_p.v() == doctest::Approx(std::log(0.7)));
  // Window term over (1.7, 2.5].
  CHECK(fwd.window_term().v() == doctest::Approx(1.0 * 0.8));
  CHECK(fwd.floor_hits() == 0);
}

TEST_CASE("hawkes decoder at ground truth equals the exact-likelihood oracle") {
  HawkesParams p;
  p.mu = {0.3, 0.5};
  p.alpha = {{0.4, 0.1}, {0.2, 0.3}};
  p.beta = {{1.5, 2.0}, {1.0, 2.5}};
  EventSequence seq = simulate_hawkes(p, 10.0, 21);
  REQUIRE(seq.events.size() >= 5);

  ModelSpec spec = small_spec(DecoderKind::HAWKES);
  ParamStore params = build_params(spec, 2);
  params.set_exposed("dec.mu", {0.3, 0.5});
  params.set_exposed("dec.alpha", {0.4, 0.1, 0.2, 0.3});
  params.set_exposed("dec.beta", {1.5, 2.0, 1.0, 2.5});

  ad::Tape tape;
  ModelForward fwd(spec, 2, tape, params, seq, 64, 0);
  SequenceNll nll = sequence_nll(fwd);
  NllSplit exact = hawkes_exact_nll(p, seq);
  CHECK(nll.nll_t.v() == doctest::Approx(exact.nll_t).epsilon(1e-9));
  CHECK(nll.nll_m.v() == doctest::Approx(exact.nll_m).epsilon(1e-9));
}

TEST_CASE("benchmark hawkes params through the decoder match the oracle within 1e-6") {
  HawkesParams p = benchmark_hawkes_params();
  EventSequence seq = simulate_hawkes(p, 10.0, 33);
  REQUIRE(seq.events.size() >= 10);

  ModelSpec spec = small_spec(DecoderKind::HAWKES);
  ParamStore params = build_params(spec, 5);
  params.set_exposed("dec.mu", p.mu);
  std::vector<double> a, b;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      a.push_back(p.alpha[i][j]);
      b.push_back(p.beta[i][j]);
    }
  params.set_exposed("dec.alpha", a);
  params.set_exposed("dec.beta", b);

  NllSplit got = sequence_nll_value(spec, 5, params, seq, 64, 0);
  NllSplit exact = hawkes_exact_nll(p, seq);
  CHECK(std::abs(got.nll_t - exact.nll_t) < 1e-6);
  CHECK(std::abs(got.nll_m - exact.nll_m) < 1e-6);
}

TEST_CASE("EC intensity is constant within the interval") {
  Fixture f(small_spec(DecoderKind::EC), three_events(), 2);
  auto l1 = f.fwd->intensity(2, 0.5);
  auto l2 = f.fwd->intensity(2, 0.85);
  for (int k = 0; k < 2; ++k) {
    CHECK(l1[k].v() == doctest::Approx(l2[k].v()));
    CHECK(l1[k].v() > 0.0);
  }
  // Cumulative is linear in the elapsed time.
  auto c1 = f.fwd->cumulative(2, 0.4 + 0.2);
  auto c2 = f.fwd->cumulative(2, 0.4 + 0.4);
  for (int k = 0; k < 2; ++k)
    CHECK(c2[k].v() == doctest::Approx(2.0 * c1[k].v()).epsilon(1e-9));
}

TEST_CASE("mark probabilities sum to one everywhere") {
  for (DecoderKind d : all_decoders()) {
    ModelSpec spec = legal_spec(d);
    Fixture f(spec, three_events(), 2);
    for (int i = 1; i <= 4; ++i) {
      const double t0 = f.fwd->interval_start(i);
      for (double dt : {0.05, 0.3, 1.1}) {
        auto p = f.fwd->mark_probs(i, t0 + dt);
        double total = 0.0;
        for (double x : p) {
          CHECK(x >= 0.0);
          total += x;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("time cdf is a cdf: in [0,1], non-decreasing, 0 at the interval start") {
  for (DecoderKind d : all_decoders()) {
    Fixture f(legal_spec(d), three_events(), 2);
    const int i = 3;
    const double t0 = f.fwd->interval_start(i);
    double prev = -1.0;
    for (double dt : {1e-9, 0.1, 0.4, 1.0, 3.0, 10.0}) {
      const double F = f.fwd->time_cdf(i, t0 + dt);
      CHECK(F >= -1e-12);
      CHECK(F <= 1.0 + 1e-12);
      CHECK(F >= prev - 1e-6);  // MC decoders get small-noise slack
      prev = F;
    }
    CHECK(f.fwd->time_cdf(i, t0) == doctest::Approx(0.0).epsilon(1e-6));
  }
}

TEST_CASE("intensity equals the time derivative of the cumulative (cumulative view)") {
  for (DecoderKind d : {DecoderKind::FNN, DecoderKind::SA_CM}) {
    Fixture f(legal_spec(d), three_events(), 2);
    const int i = 2;
    const double t0 = f.fwd->interval_start(i);
    for (double dt : {0.2, 0.7, 2.0}) {
      auto lam = f.fwd->intensity(i, t0 + dt);
      const double eps = 1e-6;
      auto up = f.fwd->cumulative(i, t0 + dt + eps);
      auto down = f.fwd->cumulative(i, t0 + dt - eps);
      for (int k = 0; k < 2; ++k) {
        const double fd = (up[k].v() - down[k].v()) / (2 * eps);
        CHECK(lam[k].v() == doctest::Approx(fd).epsilon(1e-5));
        CHECK(lam[k].v() >= 0.0);
      }
    }
  }
}

TEST_CASE("cumulative-view constraints: zero at start, monotone, unbounded growth") {
  for (DecoderKind d : {DecoderKind::FNN, DecoderKind::SA_CM}) {
    for (EventEncoding enc : {EventEncoding::TO, EventEncoding::LTO, EventEncoding::LE}) {
      Fixture f(small_spec(d, enc), three_events(), 2);
      for (int i = 1; i <= 4; ++i) {
        const double t0 = f.fwd->interval_start(i);
        auto at_start = f.fwd->cumulative(i, t0);
        for (int k = 0; k < 2; ++k) CHECK(at_start[k].v() == 0.0);  // exact

        std::vector<double> prev(2, 0.0);
        for (int g = 1; g <= 100; ++g) {  // coarse monotonicity sweep
          auto c = f.fwd->cumulative(i, t0 + g * 0.11);
          for (int k = 0; k < 2; ++k) {
            CHECK(c[k].v() >= prev[k]);
            prev[k] = c[k].v();
          }
        }
        auto c10 = f.fwd->cumulative(i, t0 + 10.0);
        auto c1000 = f.fwd->cumulative(i, t0 + 1000.0);
        for (int k = 0; k < 2; ++k) CHECK(c1000[k].v() > c10[k].v());
      }
    }
  }
}

TEST_CASE("lnm: cdf matches quadrature of the density") {
  Fixture f(legal_spec(DecoderKind::LNM), three_events(), 2);
  const int i = 2;
  const double t0 = f.fwd->interval_start(i);
  const double upper = 2.0;
  // Simpson over (t0, t0 + upper).
  const int steps = 2000;
  const double h = upper / steps;
  double acc = 0.0;
  for (int s = 0; s < steps; ++s) {
    const double x0 = t0 + s * h;
    acc += h / 6.0 *
           (f.fwd->density(i, x0 + 1e-12) + 4.0 * f.fwd->density(i, x0 + h / 2.0) +
            f.fwd->density(i, x0 + h));
  }
  CHECK(f.fwd->time_cdf(i, t0 + upper) == doctest::Approx(acc).epsilon(1e-5));
}

TEST_CASE("density view: log density agrees with the density helper") {
  for (DecoderKind d : {DecoderKind::RMTPP, DecoderKind::LNM, DecoderKind::LN}) {
    Fixture f(legal_spec(d), three_events(), 2);
    auto [log_f, log_p] = f.fwd->log_density_and_mark(2);
    CHECK(std::exp(log_f.v()) ==
          doctest::Approx(f.fwd->density(2, 0.9)).epsilon(1e-9));
    CHECK(log_p.v() <= 0.0);
  }
}

TEST_CASE("monte-carlo cumulative is deterministic per seed") {
  ModelSpec spec = legal_spec(DecoderKind::MLP_MC);
  ParamStore params = build_params(spec, 2);
  auto run = [&](std::uint64_t seed) {
    ad::Tape tape;
    ModelForward fwd(spec, 2, tape, params, three_events(), 64, seed);
    return fwd.cumulative(2, 0.9)[0].v();
  };
  CHECK(run(5) == run(5));
  CHECK(run(5) != run(6));
}

TEST_CASE("mc cumulative converges to quadrature of the intensity") {
  ModelSpec spec = legal_spec(DecoderKind::MLP_MC);
  ParamStore params = build_params(spec, 2);
  ad::Tape tape;
  ModelForward fwd(spec, 2, tape, params, three_events(), 20000, 3);
  const int i = 2;
  const double t0 = fwd.interval_start(i), t1 = 0.9;
  auto mc = fwd.cumulative(i, t1);

  const int steps = 800;
  const double h = (t1 - t0) / steps;
  std::vector<double> quad(2, 0.0);
  for (int s = 0; s < steps; ++s) {
    const double x0 = t0 + s * h;
    for (int k = 0; k < 2; ++k) {
      quad[k] += h / 6.0 *
                 (fwd.intensity(i, x0)[k].v() + 4.0 * fwd.intensity(i, x0 + h / 2)[k].v() +
                  fwd.intensity(i, x0 + h)[k].v());
    }
  }
  for (int k = 0; k < 2; ++k)
    CHECK(mc[k].v() == doctest::Approx(quad[k]).epsilon(0.02));
}

TEST_CASE("nh intensities decay toward a finite asymptote between events") {
  Fixture f(legal_spec(DecoderKind::NH), three_events(), 2);
  const int i = 4;  // after the last event
  const double t0 = f.fwd->interval_start(i);
  auto near = f.fwd->intensity(i, t0 + 0.01);
  auto far = f.fwd->intensity(i, t0 + 50.0);
  auto very_far = f.fwd->intensity(i, t0 + 100.0);
  for (int k = 0; k < 2; ++k) {
    CHECK(near[k].v() > 0.0);
    // The CT-LSTM cell converges to cbar, so the intensity flattens out.
    CHECK(far[k].v() == doctest::Approx(very_far[k].v()).epsilon(1e-6));
  }
}

TEST_CASE("rmtpp: per-mark intensity factorizes as ground intensity times mark probs") {
  Fixture f(legal_spec(DecoderKind::RMTPP), three_events(), 2);
  auto lam = f.fwd->intensity(3, 1.2);
  auto probs = f.fwd->mark_probs(3, 1.2);
  const double total = lam[0].v() + lam[1].v();
  for (int k = 0; k < 2; ++k)
    CHECK(lam[k].v() / total == doctest::Approx(probs[k]).epsilon(1e-9));
}

TEST_CASE("every decoder evaluates a finite nll on a short sequence") {
  for (DecoderKind d : all_decoders()) {
    ModelSpec spec = legal_spec(d);
    ParamStore params = build_params(spec, 2);
    NllSplit nll = sequence_nll_value(spec, 2, params, three_events(), 32, 11);
    CHECK(std::isfinite(nll.nll_t));
    CHECK(std::isfinite(nll.nll_m));
  }
}

TEST_CASE("identical seeds give identical nll, different params give different nll") {
  ModelSpec spec = legal_spec(DecoderKind::SA_MC);
  ParamStore params = build_params(spec, 2);
  NllSplit a = sequence_nll_value(spec, 2, params, three_events(), 32, 11);
  NllSplit b = sequence_nll_value(spec, 2, params, three_events(), 32, 11);
  CHECK(a.nll_t == b.nll_t);
  CHECK(a.nll_m == b.nll_m);

  ModelSpec spec2 = spec;
  spec2.seed = spec.seed + 1;
  ParamStore params2 = build_params(spec2, 2);
  NllSplit c = sequence_nll_value(spec2, 2, params2, three_events(), 32, 11);
  CHECK(a.total() != c.total());
}
