#include "pointlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace pointlab {

void RankTable::validate() const {
  const std::size_t d = decoders.size();
  if (d < 2 || ranks.size() < 2)
    throw std::invalid_argument("RankTable: need at least 2 decoders and 2 datasets");
  const double want = d * (d + 1) / 2.0;
  for (const auto& row : ranks) {
    if (row.size() != d) throw std::invalid_argument("RankTable: ragged row");
    const double sum = std::accumulate(row.begin(), row.end(), 0.0);
    if (std::abs(sum - want) > 1e-9)
      throw std::invalid_argument("RankTable: row sum != D(D+1)/2");
  }
}

std::vector<double> RankTable::mean_ranks() const {
  std::vector<double> out(decoders.size(), 0.0);
  for (const auto& row : ranks)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += row[j];
  for (double& x : out) x /= static_cast<double>(ranks.size());
  return out;
}

double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) {
    // Lower series: P(a,x) = e^{-x} x^a / Gamma(a) * sum x^n / (a)_{n+1}.
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 500; ++n) {
      term *= x / (a + n);
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    const double p = sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    return 1.0 - p;
  }
  // Lentz continued fraction for Q(a,x).
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double chi2_survival(double x, int df) {
  return gamma_q(df / 2.0, x / 2.0);
}

FriedmanResult friedman(const RankTable& table) {
  table.validate();
  const double N = static_cast<double>(table.ranks.size());
  const double D = static_cast<double>(table.decoders.size());
  auto rbar = table.mean_ranks();
  double sum_sq = 0.0;
  for (double r : rbar) sum_sq += r * r;
  const double stat = 12.0 * N / (D * (D + 1.0)) * (sum_sq - D * (D + 1.0) * (D + 1.0) / 4.0);
  const double clamped = std::max(stat, 0.0);
  return {clamped, chi2_survival(clamped, static_cast<int>(D) - 1)};
}

std::vector<HolmEntry> holm(std::vector<HolmEntry> pairwise, double alpha) {
  const std::size_t m = pairwise.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pairwise[a].raw_p < pairwise[b].raw_p;
  });
  double running = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    HolmEntry& e = pairwise[order[i]];
    if (e.raw_p < 0.0 || e.raw_p > 1.0)
      throw std::invalid_argument("holm: p-value outside [0,1]");
    running = std::max(running, std::min(1.0, (m - i) * e.raw_p));
    e.adjusted_p = running;
  }
  // Step-down rejection: stop at the first non-rejected hypothesis.
  bool rejecting = true;
  for (std::size_t i = 0; i < m; ++i) {
    HolmEntry& e = pairwise[order[i]];
    rejecting = rejecting && e.adjusted_p < alpha;
    e.rejected = rejecting;
  }
  return pairwise;
}

std::vector<HolmEntry> pairwise_rank_pvalues(const RankTable& table) {
  table.validate();
  const double N = static_cast<double>(table.ranks.size());
  const double D = static_cast<double>(table.decoders.size());
  const double se = std::sqrt(D * (D + 1.0) / (6.0 * N));
  auto rbar = table.mean_ranks();
  std::vector<HolmEntry> out;
  for (std::size_t a = 0; a < rbar.size(); ++a)
    for (std::size_t b = a + 1; b < rbar.size(); ++b) {
      const double z = std::abs(rbar[a] - rbar[b]) / se;
      // Two-sided normal tail.
      const double p = std::erfc(z / std::sqrt(2.0));
      out.push_back({table.decoders[a], table.decoders[b], std::min(p, 1.0), 1.0, false});
    }
  return out;
}

CdDiagram cd_diagram_data(const RankTable& table, double alpha) {
  table.validate();
  auto rbar = table.mean_ranks();
  const std::size_t d = rbar.size();

  CdDiagram cd;
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return rbar[a] < rbar[b]; });
  for (std::size_t i : order) cd.mean_ranks.push_back({table.decoders[i], rbar[i]});

  if (friedman(table).p_value >= alpha) {
    std::vector<int> all(d);
    std::iota(all.begin(), all.end(), 0);
    cd.cliques.push_back(all);
    return cd;
  }

  auto adjusted = holm(pairwise_rank_pvalues(table), alpha);
  // similar[i][j] over sorted positions: pair not separated at alpha.
  std::vector<std::vector<bool>> similar(d, std::vector<bool>(d, false));
  auto pos_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < d; ++i)
      if (cd.mean_ranks[i].first == name) return i;
    throw std::logic_error("cd_diagram_data: unknown decoder");
  };
  for (std::size_t i = 0; i < d; ++i) similar[i][i] = true;
  for (const HolmEntry& e : adjusted) {
    const std::size_t i = pos_of(e.a), j = pos_of(e.b);
    similar[i][j] = similar[j][i] = e.adjusted_p >= alpha;
  }

  // Ranks are ordered, so maximal cliques are maximal contiguous runs where
  // every pair is similar.
  std::vector<std::vector<int>> cliques;
  for (std::size_t start = 0; start < d; ++start) {
    std::size_t stop = start;
    while (stop + 1 < d) {
      bool ok = true;
      for (std::size_t i = start; i <= stop && ok; ++i) ok = similar[i][stop + 1];
      if (!ok) break;
      ++stop;
    }
    const bool dominated =
        !cliques.empty() && cliques.back().back() >= static_cast<int>(stop);
    if (!dominated) {
      std::vector<int> clique;
      for (std::size_t i = start; i <= stop; ++i) clique.push_back(static_cast<int>(i));
      cliques.push_back(std::move(clique));
    }
  }
  cd.cliques = std::move(cliques);
  return cd;
}

std::string cd_diagram_to_json(const CdDiagram& cd) {
  nlohmann::json j;
  for (const auto& [name, rank] : cd.mean_ranks)
    j["mean_ranks"].push_back({{"name", name}, {"mean_rank", rank}});
  j["cliques"] = cd.cliques;
  j["tie_correction"] = "none";  // plain average ranks, no tie-correction factor
  return j.dump();
}

}  // namespace pointlab
