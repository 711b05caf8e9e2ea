#pragma once

#include <map>
#include <string>
#include <vector>

#include "pointlab/dataset.hpp"
#include "pointlab/model.hpp"

namespace pointlab {

struct MarkRecord {
  int predicted = 0;
  int truth = 0;
  double confidence = 0.0;  // p*(predicted | t)
};

// Mean absolute gap between the empirical CDF of F*(tau) values and the
// uniform diagonal at M probability levels p_m = m/M.
double pce(const std::vector<double>& cdf_values, int M = 50);

struct EceBin {
  double conf = 0.0;
  double acc = 0.0;
  int count = 0;
};

// Right-closed confidence bins ((j-1)/J, j/J]; confidence 0 goes to bin 1;
// empty bins contribute 0. `bins` (if given) receives all J bins.
double ece(const std::vector<MarkRecord>& records, int J = 10,
           std::vector<EceBin>* bins = nullptr);

// Micro-averaged F1; equals accuracy for single-label multiclass.
double micro_f1(const std::vector<MarkRecord>& records);

struct ReliabilityPoint {
  double p = 0.0;
  double empirical_cdf = 0.0;
};
std::vector<ReliabilityPoint> reliability_time(const std::vector<double>& cdf_values,
                                               int M = 50);

// Linear-interpolation quantile of unsorted data, q in [0,1].
double quantile_linear(std::vector<double> xs, double q);

// (score - median) / IQR per dataset; IQR 0 maps everything to 0.
std::map<std::string, double> standardize_nll(const std::map<std::string, double>& scores);

// Ranks with average-rank ties, 1 = best. `higher_better` flips the order.
std::vector<double> rank_scores(const std::vector<double>& scores, bool higher_better);

struct RankSummary {
  double mean = 0.0;    // mean score across datasets
  double median = 0.0;  // median score across datasets
  double mean_rank = 0.0;
};

// table: group -> dataset -> mean score; every group must cover every dataset.
std::map<std::string, RankSummary> aggregate_ranks(
    const std::map<std::string, std::map<std::string, double>>& table,
    bool higher_better);

// Asymptotic two-sided Kolmogorov-Smirnov test against Uniform(0,1).
struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
};
KsResult ks_uniform(const std::vector<double>& values);

struct MetricsReport {
  double nll_t = 0.0;
  double nll_m = 0.0;
  double pce = 0.0;
  double ece = 0.0;
  double f1 = 0.0;
  std::vector<ReliabilityPoint> reliability_time;  // 50 points
  std::vector<EceBin> reliability_mark;            // 10 bins
  int n_events = 0;
};

// Full test-set evaluation of a trained model; pools events across sequences.
MetricsReport evaluate_model(const ModelSpec& spec, const MarkedDataset& ds,
                             ParamStore& params,
                             const std::vector<std::size_t>& indices, int n_mc_eval);

std::string metrics_report_to_json(const MetricsReport& r);
MetricsReport metrics_report_from_json(const std::string& text);
std::string reliability_time_csv(const MetricsReport& r);  // p,empirical_cdf
std::string reliability_mark_csv(const MetricsReport& r);  // bin,conf,acc,count

}  // namespace pointlab
