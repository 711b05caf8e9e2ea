#include "pointlab/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace pointlab {

namespace {

std::uint64_t mc_seed_for(std::uint64_t run_seed, std::uint64_t seq_index) {
  // splitmix64-style mixing keeps per-sequence streams independent.
  std::uint64_t z = run_seed + 0x9E3779B97F4A7C15ull * (seq_index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

SequenceNll sequence_nll(ModelForward& fwd) {
  ad::Tape& tape = fwd.tape();
  ad::Value nll_t = ad::constant(tape, 0.0);
  ad::Value nll_m = ad::constant(tape, 0.0);
  for (int i = 1; i <= fwd.n(); ++i) {
    auto [log_f, log_p] = fwd.log_density_and_mark(i);
    nll_t = nll_t - log_f;
    nll_m = nll_m - log_p;
  }
  nll_t = nll_t + fwd.window_term();
  return {nll_t, nll_m, fwd.floor_hits()};
}

NllSplit sequence_nll_value(const ModelSpec& spec, int num_marks, ParamStore& params,
                            const EventSequence& seq, int n_mc, std::uint64_t mc_seed) {
  ad::Tape tape;
  ModelForward fwd(spec, num_marks, tape, params, seq, n_mc, mc_seed);
  double nll_t = 0.0, nll_m = 0.0;
  for (int i = 1; i <= fwd.n(); ++i) {
    auto [log_f, log_p] = fwd.log_density_and_mark(i);
    nll_t -= log_f.v();
    nll_m -= log_p.v();
  }
  nll_t += fwd.window_term().v();
  return {nll_t, nll_m};
}

NllSplit dataset_nll(const ModelSpec& spec, const MarkedDataset& ds,
                     ParamStore& params, const std::vector<std::size_t>& indices,
                     int n_mc) {
  NllSplit acc;
  for (std::size_t idx : indices) {
    NllSplit s = sequence_nll_value(spec, ds.num_marks, params, ds.sequences[idx],
                                    n_mc, mc_seed_for(spec.seed, idx));
    acc.nll_t += s.nll_t;
    acc.nll_m += s.nll_m;
  }
  const double n = static_cast<double>(indices.size());
  acc.nll_t /= n;
  acc.nll_m /= n;
  return acc;
}

TrainScheduler::Decision TrainScheduler::observe(double val_loss) {
  ++epoch_;
  Decision d;
  if (val_loss < best_loss_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch_;
    bad_streak_ = 0;
    d.improved = true;
  } else {
    ++bad_streak_;
    if (bad_streak_ % s_.lr_halve_after == 0) {
      lr_ *= 0.5;
      d.halve_lr = true;
    }
  }
  if (bad_streak_ >= s_.patience || epoch_ >= s_.max_epochs) d.stop = true;
  d.lr = lr_;
  return d;
}

TrainReport train(const ModelSpec& spec, const MarkedDataset& ds, ParamStore& params,
                  const TrainSchedule& schedule) {
  if (ds.train_idx.empty() || ds.val_idx.empty())
    throw std::invalid_argument("train: empty train or val split");
  check_legal(spec, ds.num_marks);

  const auto t_start = std::chrono::steady_clock::now();
  TrainScheduler sched(schedule);
  AdamState adam;
  TrainReport report;
  std::string best_checkpoint = params.to_json();
  std::mt19937_64 shuffle_rng(spec.seed ^ 0xA5A5A5A5A5A5A5A5ull);

  std::vector<std::size_t> order = ds.train_idx;
  double lr = schedule.lr;
  for (int epoch = 1; epoch <= schedule.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    int n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += schedule.batch_size) {
      const std::size_t stop = std::min(order.size(),
                                        start + static_cast<std::size_t>(schedule.batch_size));
      const int batch = static_cast<int>(stop - start);

      ad::Tape tape;
      std::vector<std::unique_ptr<ModelForward>> fwds;
      ad::Value loss = ad::constant(tape, 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t idx = order[b];
        fwds.push_back(std::make_unique<ModelForward>(
            spec, ds.num_marks, tape, params, ds.sequences[idx], spec.n_mc,
            mc_seed_for(spec.seed, idx)));
        ModelForward& f = *fwds.back();
        ad::Value seq_loss = ad::constant(tape, 0.0);
        for (int i = 1; i <= f.n(); ++i) {
          auto [log_f, log_p] = f.log_density_and_mark(i);
          seq_loss = seq_loss - log_f - log_p;
        }
        seq_loss = seq_loss + f.window_term();
        loss = loss + seq_loss;
      }
      loss = loss / static_cast<double>(batch);
      if (!std::isfinite(loss.v())) {
        std::ostringstream msg;
        msg << "train: non-finite loss (" << loss.v() << ") at epoch " << epoch
            << ", batch " << n_batches << " for decoder " << to_string(spec.decoder);
        throw std::runtime_error(msg.str());
      }

      params.zero_grad();
      auto adjoints = tape.backward(loss.idx);
      for (auto& f : fwds) f->binding().scatter_gradients(adjoints);
      adam_step(params, lr, adam);

      epoch_loss += loss.v() * batch;
      ++n_batches;
    }
    epoch_loss /= static_cast<double>(order.size());

    NllSplit val = dataset_nll(spec, ds, params, ds.val_idx, spec.n_mc);
    auto decision = sched.observe(val.total());
    if (decision.improved) best_checkpoint = params.to_json();
    lr = decision.lr;

    report.epochs.push_back(
        {epoch, epoch_loss, val.total(), val.nll_t, val.nll_m, lr});
    if (decision.stop) break;
  }

  params = ParamStore::from_json(best_checkpoint);
  report.best_epoch = sched.best_epoch();
  report.best_val_nll = sched.best_loss();
  report.checkpoint = best_checkpoint;
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

SearchResult random_search(const ModelSpec& templ, const HyperGrids& grids,
                           int n_configs, const MarkedDataset& ds, std::uint64_t seed,
                           const TrainSchedule& schedule) {
  if (grids.embedding.empty() || grids.hidden.empty() || grids.history.empty() ||
      grids.layers.empty() || grids.heads.empty() || grids.mixtures.empty())
    throw std::invalid_argument("random_search: empty grid");

  std::mt19937_64 rng(seed);
  auto pick = [&rng](const std::vector<int>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };

  SearchResult result;
  bool any_ok = false;
  double best_val = std::numeric_limits<double>::infinity();
  std::string last_error;
  for (int c = 0; c < n_configs; ++c) {
    ModelSpec spec = templ;
    spec.d_t = pick(grids.embedding);
    spec.d_k = pick(grids.embedding);
    spec.d_hidden = pick(grids.hidden);
    spec.d_h = pick(grids.history);
    spec.layers = pick(grids.layers);
    spec.heads = pick(grids.heads);
    spec.mixtures = pick(grids.mixtures);

    try {
      ParamStore params = build_params(spec, ds.num_marks);
      TrainReport rep = train(spec, ds, params, schedule);
      result.val_nlls.push_back(rep.best_val_nll);
      any_ok = true;
      if (rep.best_val_nll < best_val) {
        best_val = rep.best_val_nll;
        result.best = spec;
        result.report = std::move(rep);
        result.params = std::move(params);
      }
    } catch (const std::exception& e) {
      last_error = e.what();
      result.val_nlls.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  if (!any_ok)
    throw std::runtime_error("random_search: every config failed; last: " + last_error);
  return result;
}

std::string train_report_to_jsonl(const TrainReport& report) {
  std::ostringstream out;
  for (const EpochRecord& e : report.epochs) {
    nlohmann::json j;
    j["record"] = "epoch";
    j["epoch"] = e.epoch;
    j["train_nll"] = e.train_nll;
    j["val_nll"] = e.val_nll;
    j["val_nll_t"] = e.val_nll_t;
    j["val_nll_m"] = e.val_nll_m;
    j["lr"] = e.lr;
    out << j.dump() << "\n";
  }
  nlohmann::json s;
  s["record"] = "summary";
  s["best_epoch"] = report.best_epoch;
  s["best_val_nll"] = report.best_val_nll;
  s["epochs_run"] = report.epochs.size();
  s["wall_time_s"] = report.wall_time_s;
  out << s.dump() << "\n";
  return out.str();
}

}  // namespace pointlab
