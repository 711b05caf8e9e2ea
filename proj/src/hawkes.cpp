#include "pointlab/hawkes.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace pointlab {

void HawkesParams::validate() const {
  const int k = dim();
  if (k == 0) throw std::invalid_argument("HawkesParams: empty mu");
  if (static_cast<int>(alpha.size()) != k || static_cast<int>(beta.size()) != k)
    throw std::invalid_argument("HawkesParams: shape mismatch");
  for (double m : mu)
    if (m < 0.0 || !std::isfinite(m)) throw std::invalid_argument("mu must be >= 0");
  for (int i = 0; i < k; ++i) {
    if (static_cast<int>(alpha[i].size()) != k || static_cast<int>(beta[i].size()) != k)
      throw std::invalid_argument("HawkesParams: shape mismatch");
    for (int j = 0; j < k; ++j) {
      if (alpha[i][j] < 0.0) throw std::invalid_argument("alpha must be >= 0");
      if (beta[i][j] <= 0.0) throw std::invalid_argument("beta must be > 0");
    }
  }
}

HawkesParams benchmark_hawkes_params() {
  HawkesParams p;
  p.mu = {0.2, 0.6, 0.1, 0.7, 0.9};
  p.alpha = {{0.25, 0.13, 0.13, 0.13, 0.13},
             {0.13, 0.35, 0.13, 0.13, 0.13},
             {0.13, 0.13, 0.20, 0.13, 0.13},
             {0.13, 0.13, 0.13, 0.30, 0.13},
             {0.13, 0.13, 0.13, 0.13, 0.25}};
  p.beta = {{4.1, 0.5, 0.5, 0.5, 0.5},
            {0.5, 2.5, 0.5, 0.5, 0.5},
            {0.5, 0.5, 6.2, 0.5, 0.5},
            {0.5, 0.5, 0.5, 4.9, 0.5},
            {0.5, 0.5, 0.5, 0.5, 4.1}};
  return p;
}

double branching_spectral_radius(const HawkesParams& p) {
  p.validate();
  const int k = p.dim();
  std::vector<double> v(k, 1.0 / std::sqrt(static_cast<double>(k)));
  double radius = 0.0;
  for (int iter = 0; iter < 1000; ++iter) {
    std::vector<double> w(k, 0.0);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) w[i] += p.alpha[i][j] / p.beta[i][j] * v[j];
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (int i = 0; i < k; ++i) v[i] = w[i] / norm;
    if (std::abs(norm - radius) < 1e-13 * std::max(1.0, radius)) return norm;
    radius = norm;
  }
  return radius;
}

namespace {

// Running excitation state S[k][k'] = sum over past events of mark k' of
// alpha[k][k'] exp(-beta[k][k'] (t - t_j)).
struct HawkesState {
  const HawkesParams* p;
  std::vector<std::vector<double>> s;
  double t = 0.0;

  explicit HawkesState(const HawkesParams& params)
      : p(&params), s(params.dim(), std::vector<double>(params.dim(), 0.0)) {}

  void decay_to(double t_new) {
    const int k = p->dim();
    const double dt = t_new - t;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) s[i][j] *= std::exp(-p->beta[i][j] * dt);
    t = t_new;
  }

  void register_event(int mark) {
    const int k = p->dim();
    for (int i = 0; i < k; ++i) s[i][mark] += p->alpha[i][mark];
  }

  std::vector<double> intensities() const {
    const int k = p->dim();
    std::vector<double> lam(p->mu);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) lam[i] += s[i][j];
    return lam;
  }

  double total_intensity() const {
    const auto lam = intensities();
    return std::accumulate(lam.begin(), lam.end(), 0.0);
  }
};

}  // namespace

EventSequence simulate_hawkes(const HawkesParams& p, double t_end, std::uint64_t seed) {
  p.validate();
  if (t_end <= 0.0) throw std::invalid_argument("t_end must be > 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  EventSequence seq;
  seq.t_end = t_end;
  HawkesState state(p);
  const int kdim = p.dim();

  double t = 0.0;
  while (true) {
    // Exponential kernels are non-increasing between events, so the total
    // intensity at the current time dominates until the next event.
    const double bound = state.total_intensity();
    if (!std::isfinite(bound)) throw std::runtime_error("non-finite intensity");
    const double w = -std::log(1.0 - unif(rng)) / bound;
    const double t_prop = t + w;
    if (t_prop > t_end) break;

    state.decay_to(t_prop);
    const auto lam = state.intensities();
    const double total = std::accumulate(lam.begin(), lam.end(), 0.0);
    if (total > bound * (1.0 + 1e-9))
      throw std::logic_error("thinning bound violated");
    if (unif(rng) * bound <= total) {
      // Accept; pick the mark proportionally to the per-mark intensities.
      double u = unif(rng) * total;
      int mark = kdim - 1;
      for (int i = 0; i < kdim; ++i) {
        if (u < lam[i]) {
          mark = i;
          break;
        }
        u -= lam[i];
      }
      seq.events.push_back({t_prop, mark});
      state.register_event(mark);
    }
    t = t_prop;
  }
  return seq;
}

MarkedDataset simulate_hawkes_dataset(const HawkesParams& p, int n_sequences,
                                      double t_end, std::uint64_t seed) {
  MarkedDataset ds;
  ds.num_marks = p.dim();
  for (int i = 0; i < n_sequences; ++i) {
    EventSequence seq = simulate_hawkes(p, t_end, seed + static_cast<std::uint64_t>(i));
    if (seq.events.size() >= 2) ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

NllSplit hawkes_exact_nll(const HawkesParams& p, const EventSequence& seq) {
  p.validate();
  validate_sequence(seq, p.dim());
  const int kdim = p.dim();

  HawkesState state(p);
  NllSplit out;
  double mu_total = std::accumulate(p.mu.begin(), p.mu.end(), 0.0);

  double t_prev = 0.0;
  for (const Event& e : seq.events) {
    // Compensator increment over (t_prev, e.t]: mu terms plus the integrated
    // exponential kernels of the running state.
    double inc = mu_total * (e.t - t_prev);
    for (int i = 0; i < kdim; ++i)
      for (int j = 0; j < kdim; ++j)
        inc += state.s[i][j] / p.beta[i][j] *
               (1.0 - std::exp(-p.beta[i][j] * (e.t - t_prev)));

    state.decay_to(e.t);
    const auto lam = state.intensities();
    const double total = std::accumulate(lam.begin(), lam.end(), 0.0);
    if (lam[e.k] <= 0.0)
      throw std::runtime_error("zero intensity at an observed event");

    out.nll_t += -std::log(total) + inc;
    out.nll_m += -std::log(lam[e.k] / total);
    state.register_event(e.k);
    t_prev = e.t;
  }

  // Window term over (t_n, T].
  double tail = mu_total * (seq.t_end - t_prev);
  for (int i = 0; i < kdim; ++i)
    for (int j = 0; j < kdim; ++j)
      tail += state.s[i][j] / p.beta[i][j] *
              (1.0 - std::exp(-p.beta[i][j] * (seq.t_end - t_prev)));
  out.nll_t += tail;
  return out;
}

std::vector<double> hawkes_compensator_increments(const HawkesParams& p,
                                                  const EventSequence& seq) {
  p.validate();
  const int kdim = p.dim();
  HawkesState state(p);
  const double mu_total = std::accumulate(p.mu.begin(), p.mu.end(), 0.0);

  std::vector<double> incs;
  incs.reserve(seq.events.size());
  double t_prev = 0.0;
  for (const Event& e : seq.events) {
    double inc = mu_total * (e.t - t_prev);
    for (int i = 0; i < kdim; ++i)
      for (int j = 0; j < kdim; ++j)
        inc += state.s[i][j] / p.beta[i][j] *
               (1.0 - std::exp(-p.beta[i][j] * (e.t - t_prev)));
    incs.push_back(inc);
    state.decay_to(e.t);
    state.register_event(e.k);
    t_prev = e.t;
  }
  return incs;
}

EventSequence simulate_poisson(const std::vector<double>& mu, double t_end,
                               std::uint64_t seed) {
  HawkesParams p;
  p.mu = mu;
  const int k = static_cast<int>(mu.size());
  p.alpha.assign(k, std::vector<double>(k, 0.0));
  p.beta.assign(k, std::vector<double>(k, 1.0));
  return simulate_hawkes(p, t_end, seed);
}

MarkedDataset simulate_bimodal_renewal_dataset(int n_sequences, int events_per_seq,
                                               std::uint64_t seed) {
  MarkedDataset ds;
  ds.num_marks = 1;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> short_mode(-2.0, 0.4);
  std::normal_distribution<double> long_mode(0.6, 0.3);
  std::bernoulli_distribution pick(0.5);
  for (int s = 0; s < n_sequences; ++s) {
    EventSequence seq;
    double t = 0.0;
    for (int i = 0; i < events_per_seq; ++i) {
      const double log_tau = pick(rng) ? short_mode(rng) : long_mode(rng);
      t += std::exp(log_tau);
      seq.events.push_back({t, 0});
    }
    seq.t_end = t + 1e-6;
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

}  // namespace pointlab
