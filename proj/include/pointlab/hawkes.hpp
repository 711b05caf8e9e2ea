#pragma once

#include <cstdint>
#include <vector>

#include "pointlab/dataset.hpp"

namespace pointlab {

// Multivariate exponential-kernel Hawkes process:
//   lambda_k(t) = mu_k + sum_{k'} sum_{t_j < t, k_j = k'} alpha[k][k'] exp(-beta[k][k'] (t - t_j))
struct HawkesParams {
  std::vector<double> mu;                  // K
  std::vector<std::vector<double>> alpha;  // K x K, >= 0
  std::vector<std::vector<double>> beta;   // K x K, > 0

  int dim() const { return static_cast<int>(mu.size()); }
  void validate() const;
};

// The 5-mark benchmark parameters.
HawkesParams benchmark_hawkes_params();

// Spectral radius of the branching matrix alpha[k][k'] / beta[k][k'] (power
// iteration). A stationarity diagnostic; < 1 means subcritical.
double branching_spectral_radius(const HawkesParams& p);

// Ogata thinning with the bound refreshed at every proposal time.
EventSequence simulate_hawkes(const HawkesParams& p, double t_end, std::uint64_t seed);

MarkedDataset simulate_hawkes_dataset(const HawkesParams& p, int n_sequences,
                                      double t_end, std::uint64_t seed);

struct NllSplit {
  double nll_t = 0.0;
  double nll_m = 0.0;
  double total() const { return nll_t + nll_m; }
};

// Exact decomposed NLL via the closed-form compensator; O(n K^2).
NllSplit hawkes_exact_nll(const HawkesParams& p, const EventSequence& seq);

// Per-event compensator increments Lambda(t_{i-1}, t_i]; Exp(1) under the true
// model (time-rescaling theorem).
std::vector<double> hawkes_compensator_increments(const HawkesParams& p,
                                                  const EventSequence& seq);

// Homogeneous Poisson sequences (K = mu.size()).
EventSequence simulate_poisson(const std::vector<double>& mu, double t_end,
                               std::uint64_t seed);

// Renewal sequences with log-inter-arrivals drawn from a two-component normal
// mixture; used as a bimodal benchmark for mixture decoders.
MarkedDataset simulate_bimodal_renewal_dataset(int n_sequences, int events_per_seq,
                                               std::uint64_t seed);

}  // namespace pointlab
