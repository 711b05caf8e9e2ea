#include "pointlab/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace pointlab {

std::vector<double> EventSequence::inter_arrivals() const {
  std::vector<double> taus(events.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    taus[i] = events[i].t - prev;
    prev = events[i].t;
  }
  return taus;
}

void validate_sequence(const EventSequence& seq, int num_marks) {
  double prev = -1.0;
  for (const Event& e : seq.events) {
    if (e.t < 0.0) throw std::invalid_argument("negative event time");
    if (e.t <= prev && prev >= 0.0)
      throw std::invalid_argument("event times must be strictly increasing");
    if (e.k < 0 || e.k >= num_marks)
      throw std::invalid_argument("mark index out of range");
    prev = e.t;
  }
  if (!seq.events.empty() && seq.events.back().t > seq.t_end)
    throw std::invalid_argument("event time exceeds t_end");
  if (seq.t_end <= 0.0) throw std::invalid_argument("t_end must be positive");
}

MarkedDataset dataset_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  MarkedDataset ds;
  ds.num_marks = j.at("num_marks").get<int>();
  if (ds.num_marks < 1) throw std::invalid_argument("num_marks must be >= 1");
  for (const auto& js : j.at("sequences")) {
    EventSequence seq;
    seq.t_end = js.at("t_end").get<double>();
    for (const auto& je : js.at("events"))
      seq.events.push_back({je.at("t").get<double>(), je.at("k").get<int>()});
    validate_sequence(seq, ds.num_marks);
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

MarkedDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return dataset_from_json(ss.str());
}

std::string dataset_to_json(const MarkedDataset& ds) {
  nlohmann::json j;
  j["num_marks"] = ds.num_marks;
  j["sequences"] = nlohmann::json::array();
  for (const EventSequence& seq : ds.sequences) {
    nlohmann::json js;
    js["t_end"] = seq.t_end;
    js["events"] = nlohmann::json::array();
    for (const Event& e : seq.events) js["events"].push_back({{"t", e.t}, {"k", e.k}});
    j["sequences"].push_back(std::move(js));
  }
  return j.dump();
}

void save_dataset(const MarkedDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  out << dataset_to_json(ds);
}

MarkedDataset preprocess(const MarkedDataset& raw, int top_marks, double scale_to) {
  if (top_marks < 1) throw std::invalid_argument("top_marks must be >= 1");
  if (scale_to <= 0.0) throw std::invalid_argument("scale_to must be > 0");

  // Pooled mark frequencies; ties broken by smaller original id.
  std::vector<std::int64_t> counts(raw.num_marks, 0);
  for (const EventSequence& seq : raw.sequences)
    for (const Event& e : seq.events) counts[e.k]++;
  std::vector<int> order(raw.num_marks);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return a < b;
  });

  std::vector<int> remap(raw.num_marks, -1);
  int kept = 0;
  for (int i = 0; i < raw.num_marks && kept < top_marks; ++i) {
    if (counts[order[i]] == 0) break;
    remap[order[i]] = kept++;
  }
  if (kept == 0) throw std::runtime_error("preprocess: no marks survive");

  MarkedDataset out;
  out.num_marks = kept;
  for (const EventSequence& seq : raw.sequences) {
    EventSequence filtered;
    filtered.t_end = seq.t_end;
    for (const Event& e : seq.events)
      if (remap[e.k] >= 0) filtered.events.push_back({e.t, remap[e.k]});
    if (filtered.events.size() >= 2) out.sequences.push_back(std::move(filtered));
  }
  if (out.sequences.empty()) throw std::runtime_error("preprocess: all sequences dropped");

  // t_max over surviving events and window boundaries.
  double t_max = 0.0;
  for (const EventSequence& seq : out.sequences) {
    t_max = std::max(t_max, seq.t_end);
    for (const Event& e : seq.events) t_max = std::max(t_max, e.t);
  }
  const double factor = scale_to / t_max;
  for (EventSequence& seq : out.sequences) {
    seq.t_end *= factor;
    for (Event& e : seq.events) e.t *= factor;
  }
  return out;
}

MarkedDataset split(const MarkedDataset& ds, double train_frac, double val_frac,
                    double test_frac, std::uint64_t seed) {
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
  const std::size_t n = ds.sequences.size();
  if (n < 3) throw std::invalid_argument("split needs at least 3 sequences");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  const std::size_t n_val = static_cast<std::size_t>(val_frac * n);
  const std::size_t n_test = static_cast<std::size_t>(test_frac * n);
  const std::size_t n_train = n - n_val - n_test;  // remainder to train

  MarkedDataset out = ds;
  out.train_idx.assign(perm.begin(), perm.begin() + n_train);
  out.val_idx.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  out.test_idx.assign(perm.begin() + n_train + n_val, perm.end());
  return out;
}

}  // namespace pointlab
