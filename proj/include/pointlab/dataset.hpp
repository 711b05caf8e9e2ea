#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pointlab {

struct Event {
  double t = 0.0;  // arrival time
  int k = 0;       // mark index in [0, K)
};

struct EventSequence {
  std::vector<Event> events;
  double t_end = 0.0;

  std::size_t size() const { return events.size(); }
  // tau_1 = t_1, tau_i = t_i - t_{i-1}
  std::vector<double> inter_arrivals() const;
};

struct MarkedDataset {
  std::vector<EventSequence> sequences;
  int num_marks = 1;
  std::vector<std::size_t> train_idx, val_idx, test_idx;
};

// Validates monotonicity, mark range and window containment; throws on violation.
void validate_sequence(const EventSequence& seq, int num_marks);

MarkedDataset load_dataset(const std::string& path);
MarkedDataset dataset_from_json(const std::string& text);
std::string dataset_to_json(const MarkedDataset& ds);
void save_dataset(const MarkedDataset& ds, const std::string& path);

// Keeps the `top_marks` most frequent marks (ties to the smaller original id),
// remaps survivors to dense ids by descending frequency, drops sequences left
// with fewer than two events, and rescales all times so the dataset maximum
// becomes `scale_to`.
MarkedDataset preprocess(const MarkedDataset& raw, int top_marks, double scale_to);

// Deterministic 60/20/20-style split; floor sizes, remainder to train.
MarkedDataset split(const MarkedDataset& ds, double train_frac, double val_frac,
                    double test_frac, std::uint64_t seed);

}  // namespace pointlab
