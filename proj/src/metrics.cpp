#include "pointlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "pointlab/train.hpp"

namespace pointlab {

double pce(const std::vector<double>& cdf_values, int M) {
  if (cdf_values.empty()) throw std::invalid_argument("pce: empty input");
  for (double v : cdf_values)
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("pce: value outside [0,1]");
  std::vector<double> sorted = cdf_values;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double acc = 0.0;
  for (int m = 1; m <= M; ++m) {
    const double p = static_cast<double>(m) / M;
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), p);
    const double emp = static_cast<double>(it - sorted.begin()) / n;
    acc += std::abs(emp - p);
  }
  return acc / M;
}

std::vector<ReliabilityPoint> reliability_time(const std::vector<double>& cdf_values,
                                               int M) {
  if (cdf_values.empty()) throw std::invalid_argument("reliability_time: empty input");
  std::vector<double> sorted = cdf_values;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<ReliabilityPoint> out;
  for (int m = 1; m <= M; ++m) {
    const double p = static_cast<double>(m) / M;
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), p);
    out.push_back({p, static_cast<double>(it - sorted.begin()) / n});
  }
  return out;
}

double ece(const std::vector<MarkRecord>& records, int J, std::vector<EceBin>* bins) {
  if (records.empty()) throw std::invalid_argument("ece: empty input");
  std::vector<EceBin> b(J);
  std::vector<double> conf_sum(J, 0.0), acc_sum(J, 0.0);
  for (const MarkRecord& r : records) {
    if (r.confidence < 0.0 || r.confidence > 1.0)
      throw std::invalid_argument("ece: confidence outside [0,1]");
    int j = static_cast<int>(std::ceil(r.confidence * J)) - 1;  // right-closed bins
    j = std::clamp(j, 0, J - 1);
    ++b[j].count;
    conf_sum[j] += r.confidence;
    acc_sum[j] += r.predicted == r.truth ? 1.0 : 0.0;
  }
  double total = 0.0;
  for (int j = 0; j < J; ++j) {
    if (b[j].count > 0) {
      b[j].conf = conf_sum[j] / b[j].count;
      b[j].acc = acc_sum[j] / b[j].count;
      total += std::abs(b[j].acc - b[j].conf);
    }
  }
  if (bins) *bins = std::move(b);
  return total / J;
}

double micro_f1(const std::vector<MarkRecord>& records) {
  if (records.empty()) throw std::invalid_argument("micro_f1: empty input");
  int correct = 0;
  for (const MarkRecord& r : records)
    if (r.predicted == r.truth) ++correct;
  return static_cast<double>(correct) / records.size();
}

double quantile_linear(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile_linear: empty input");
  std::sort(xs.begin(), xs.end());
  const double pos = q * (xs.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  const double frac = pos - lo;
  return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

std::map<std::string, double> standardize_nll(const std::map<std::string, double>& scores) {
  if (scores.size() < 2)
    throw std::invalid_argument("standardize_nll: need at least 2 models");
  std::vector<double> xs;
  for (const auto& kv : scores) xs.push_back(kv.second);
  const double med = quantile_linear(xs, 0.5);
  const double iqr = quantile_linear(xs, 0.75) - quantile_linear(xs, 0.25);
  std::map<std::string, double> out;
  for (const auto& kv : scores)
    out[kv.first] = iqr == 0.0 ? 0.0 : (kv.second - med) / iqr;
  return out;
}

std::vector<double> rank_scores(const std::vector<double>& scores, bool higher_better) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return higher_better ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

std::map<std::string, RankSummary> aggregate_ranks(
    const std::map<std::string, std::map<std::string, double>>& table,
    bool higher_better) {
  if (table.empty()) throw std::invalid_argument("aggregate_ranks: empty table");
  std::vector<std::string> groups, datasets;
  for (const auto& kv : table) groups.push_back(kv.first);
  for (const auto& kv : table.begin()->second) datasets.push_back(kv.first);
  for (const auto& g : groups) {
    if (table.at(g).size() != datasets.size())
      throw std::invalid_argument("aggregate_ranks: missing cells for group " + g);
    for (const auto& d : datasets)
      if (!table.at(g).count(d))
        throw std::invalid_argument("aggregate_ranks: missing cell " + g + "/" + d);
  }

  std::map<std::string, std::vector<double>> per_group_scores, per_group_ranks;
  for (const auto& d : datasets) {
    std::vector<double> col;
    for (const auto& g : groups) col.push_back(table.at(g).at(d));
    auto ranks = rank_scores(col, higher_better);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      per_group_scores[groups[gi]].push_back(col[gi]);
      per_group_ranks[groups[gi]].push_back(ranks[gi]);
    }
  }

  std::map<std::string, RankSummary> out;
  for (const auto& g : groups) {
    const auto& s = per_group_scores[g];
    const auto& r = per_group_ranks[g];
    RankSummary sum;
    sum.mean = std::accumulate(s.begin(), s.end(), 0.0) / s.size();
    sum.median = quantile_linear(s, 0.5);
    sum.mean_rank = std::accumulate(r.begin(), r.end(), 0.0) / r.size();
    out[g] = sum;
  }
  return out;
}

KsResult ks_uniform(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("ks_uniform: empty input");
  std::vector<double> xs = values;
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = std::clamp(xs[i], 0.0, 1.0);
    d = std::max(d, (i + 1) / n - x);
    d = std::max(d, x - i / n);
  }
  // Asymptotic Kolmogorov distribution with the usual finite-n adjustment.
  const double t = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int j = 1; j <= 100; ++j)
    p += 2.0 * (j % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * j * j * t * t);
  return {d, std::clamp(p, 0.0, 1.0)};
}

MetricsReport evaluate_model(const ModelSpec& spec, const MarkedDataset& ds,
                             ParamStore& params,
                             const std::vector<std::size_t>& indices, int n_mc_eval) {
  if (indices.empty()) throw std::invalid_argument("evaluate_model: empty index set");
  std::vector<double> cdf_values;
  std::vector<MarkRecord> records;
  double nll_t = 0.0, nll_m = 0.0;

  for (std::size_t idx : indices) {
    const EventSequence& seq = ds.sequences[idx];
    ad::Tape tape;
    ModelForward fwd(spec, ds.num_marks, tape, params, seq, n_mc_eval,
                     0xEC0DE5EEDull + static_cast<std::uint64_t>(idx));
    SequenceNll nll = sequence_nll(fwd);
    nll_t += nll.nll_t.v();
    nll_m += nll.nll_m.v();
    for (int i = 1; i <= fwd.n(); ++i) {
      const double t = seq.events[i - 1].t;
      cdf_values.push_back(std::clamp(fwd.time_cdf(i, t), 0.0, 1.0));
      auto probs = fwd.mark_probs(i, t);
      MarkRecord r;
      r.truth = seq.events[i - 1].k;
      r.predicted = 0;
      for (int k = 1; k < ds.num_marks; ++k)
        if (probs[k] > probs[r.predicted]) r.predicted = k;
      r.confidence = std::clamp(probs[r.predicted], 0.0, 1.0);
      records.push_back(r);
    }
  }

  MetricsReport rep;
  rep.nll_t = nll_t / indices.size();
  rep.nll_m = nll_m / indices.size();
  rep.pce = pce(cdf_values);
  rep.ece = ece(records, 10, &rep.reliability_mark);
  rep.f1 = micro_f1(records);
  rep.reliability_time = reliability_time(cdf_values);
  rep.n_events = static_cast<int>(records.size());
  return rep;
}

std::string metrics_report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["nll_t"] = r.nll_t;
  j["nll_m"] = r.nll_m;
  j["pce"] = r.pce;
  j["ece"] = r.ece;
  j["f1"] = r.f1;
  j["f1_averaging"] = "micro";
  j["n_events"] = r.n_events;
  for (const auto& p : r.reliability_time)
    j["reliability_time"].push_back({p.p, p.empirical_cdf});
  for (const auto& b : r.reliability_mark)
    j["reliability_mark"].push_back({b.conf, b.acc, b.count});
  return j.dump();
}

MetricsReport metrics_report_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  MetricsReport r;
  r.nll_t = j.at("nll_t").get<double>();
  r.nll_m = j.at("nll_m").get<double>();
  r.pce = j.at("pce").get<double>();
  r.ece = j.at("ece").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.n_events = j.value("n_events", 0);
  if (j.contains("reliability_time"))
    for (const auto& p : j["reliability_time"])
      r.reliability_time.push_back({p[0].get<double>(), p[1].get<double>()});
  if (j.contains("reliability_mark"))
    for (const auto& b : j["reliability_mark"])
      r.reliability_mark.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<int>()});
  return r;
}

std::string reliability_time_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "p,empirical_cdf\n";
  for (const auto& p : r.reliability_time) out << p.p << "," << p.empirical_cdf << "\n";
  return out.str();
}

std::string reliability_mark_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "bin,conf,acc,count\n";
  for (std::size_t j = 0; j < r.reliability_mark.size(); ++j) {
    const EceBin& b = r.reliability_mark[j];
    out << j + 1 << "," << b.conf << "," << b.acc << "," << b.count << "\n";
  }
  return out.str();
}

}  // namespace pointlab
