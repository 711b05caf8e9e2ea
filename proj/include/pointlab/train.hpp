#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pointlab/dataset.hpp"
#include "pointlab/hawkes.hpp"
#include "pointlab/model.hpp"

namespace pointlab {

struct SequenceNll {
  ad::Value nll_t;
  ad::Value nll_m;
  int floor_hits = 0;
};

// Builds the decomposed NLL of one sequence on the forward's tape. The window
// term goes wholly into nll_t.
SequenceNll sequence_nll(ModelForward& fwd);

// Plain-number evaluation (own scratch tape).
NllSplit sequence_nll_value(const ModelSpec& spec, int num_marks, ParamStore& params,
                            const EventSequence& seq, int n_mc, std::uint64_t mc_seed);

// Mean per-sequence NLL over the given dataset indices.
NllSplit dataset_nll(const ModelSpec& spec, const MarkedDataset& ds,
                     ParamStore& params, const std::vector<std::size_t>& indices,
                     int n_mc);

struct TrainSchedule {
  int max_epochs = 500;
  int patience = 20;       // stop after this many consecutive non-improving epochs
  int lr_halve_after = 5;  // halve lr at every 5th consecutive non-improving epoch
  double lr = 1e-3;
  int batch_size = 32;
};

// Early-stopping / lr bookkeeping, separated out so the protocol can be
// asserted on a scripted loss trace.
class TrainScheduler {
 public:
  explicit TrainScheduler(TrainSchedule s) : s_(s), lr_(s.lr) {}

  struct Decision {
    bool improved = false;
    bool halve_lr = false;
    bool stop = false;
    double lr = 0.0;
  };
  Decision observe(double val_loss);

  int epoch() const { return epoch_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }
  double lr() const { return lr_; }

 private:
  TrainSchedule s_;
  double lr_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
  int bad_streak_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_nll = 0.0;
  double val_nll = 0.0;
  double val_nll_t = 0.0;
  double val_nll_m = 0.0;
  double lr = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_nll = 0.0;
  double wall_time_s = 0.0;
  std::string checkpoint;  // best-epoch parameters, JSON
};

// Mini-batch Adam over per-sequence (nll_t + nll_m); restores best-val
// parameters into `params` before returning. Deterministic given spec.seed.
TrainReport train(const ModelSpec& spec, const MarkedDataset& ds, ParamStore& params,
                  const TrainSchedule& schedule = {});

struct HyperGrids {
  std::vector<int> embedding = {4, 8, 16, 32};  // d_t and d_k
  std::vector<int> hidden = {8, 16, 32};
  std::vector<int> history = {8, 16, 32, 64};
  std::vector<int> layers = {1, 2};
  std::vector<int> heads = {1, 2};
  std::vector<int> mixtures = {8, 16, 32, 64};
};

struct SearchResult {
  ModelSpec best;
  TrainReport report;
  ParamStore params;
  std::vector<double> val_nlls;  // one per sampled config
};

SearchResult random_search(const ModelSpec& templ, const HyperGrids& grids,
                           int n_configs, const MarkedDataset& ds, std::uint64_t seed,
                           const TrainSchedule& schedule = {});

// One JSON record per epoch plus a summary record.
std::string train_report_to_jsonl(const TrainReport& report);

}  // namespace pointlab
