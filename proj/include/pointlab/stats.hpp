#pragma once

#include <string>
#include <utility>
#include <vector>

namespace pointlab {

struct RankTable {
  std::vector<std::string> decoders;        // D names
  std::vector<std::vector<double>> ranks;   // N datasets x D ranks
  void validate() const;                    // row sums D(D+1)/2, shapes
  std::vector<double> mean_ranks() const;   // column means
};

// Regularized upper incomplete gamma Q(a, x); chi-square survival is
// Q(df/2, x/2). Series for x < a+1, continued fraction otherwise.
double gamma_q(double a, double x);
double chi2_survival(double x, int df);

struct FriedmanResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
FriedmanResult friedman(const RankTable& table);

struct HolmEntry {
  std::string a, b;
  double raw_p = 1.0;
  double adjusted_p = 1.0;
  bool rejected = false;
};

// Monotone step-down adjustment; input order is preserved in the output.
std::vector<HolmEntry> holm(std::vector<HolmEntry> pairwise, double alpha = 0.05);

// Raw pairwise p-values from the normal rank-difference approximation
// z = (Rbar_a - Rbar_b) / sqrt(D(D+1)/(6N)).
std::vector<HolmEntry> pairwise_rank_pvalues(const RankTable& table);

struct CdDiagram {
  std::vector<std::pair<std::string, double>> mean_ranks;  // sorted ascending
  std::vector<std::vector<int>> cliques;  // indices into mean_ranks
};

// Maximal cliques of decoders whose pairwise Holm-adjusted p >= alpha. If the
// Friedman test does not reject at alpha, one all-decoder clique is returned.
CdDiagram cd_diagram_data(const RankTable& table, double alpha = 0.1);

std::string cd_diagram_to_json(const CdDiagram& cd);

}  // namespace pointlab
