#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pointlab/dataset.hpp"
#include "pointlab/encoders.hpp"
#include "pointlab/params.hpp"
#include "pointlab/tape.hpp"

namespace pointlab {

enum class DecoderKind { EC, MLP_MC, SA_MC, RMTPP, NH, LNM, LN, FNN, SA_CM, HAWKES, POISSON };
enum class DecoderView { Intensity, Cumulative, Density };

const char* to_string(DecoderKind d);
DecoderKind decoder_from_string(const std::string& s);
DecoderView decoder_view(DecoderKind d);
// NH, HAWKES and POISSON bring their own history handling.
bool self_contained(DecoderKind d);

struct ModelSpec {
  EventEncoding encoding = EventEncoding::TO;
  HistoryEncoder history = HistoryEncoder::GRU;
  DecoderKind decoder = DecoderKind::POISSON;
  int d_t = 8;       // time-embedding width (TEM/LE)
  int d_k = 4;       // mark-embedding width
  int d_h = 8;       // history width
  int d_hidden = 8;  // fully-connected hidden width
  int layers = 1;
  int heads = 1;
  int mixtures = 8;  // LNM
  int n_mc = 32;     // Monte-Carlo samples for cumulative estimates
  std::optional<int> window_q;
  std::uint64_t seed = 0;
};

// Throws with a reason if the combination is not trainable.
void check_legal(const ModelSpec& spec, int num_marks);

EncodingSpec encoding_spec(const ModelSpec& spec);
HistorySpec history_spec(const ModelSpec& spec);

// Registers and initializes every parameter the model needs.
ParamStore build_params(const ModelSpec& spec, int num_marks);

std::string model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const std::string& text);

// Forward evaluation of one model on one sequence. Interval i (1-based, up to
// n+1) starts at t_{i-1} (t_0 = 0) and sees events 1..i-1 as history; event i
// closes interval i. All heavy per-sequence state (embeddings, recurrences)
// is prepared once at construction.
//
// Monte-Carlo draws come from an internal deterministic stream, so two
// forwards constructed with the same seed and queried in the same order agree
// bit for bit.
class ModelForward {
 public:
  ModelForward(const ModelSpec& spec, int num_marks, ad::Tape& tape,
               ParamStore& params, const EventSequence& seq, int n_mc,
               std::uint64_t mc_seed);

  int n() const { return static_cast<int>(seq_->events.size()); }
  int num_marks() const { return num_marks_; }
  double interval_start(int i) const;

  // Per-mark intensities at t, t > t_{i-1}.
  std::vector<ad::Value> intensity(int i, double t);
  // Per-mark cumulative intensities on (t_{i-1}, t].
  std::vector<ad::Value> cumulative(int i, double t);
  // (log f*(t_i), log p*(k_i | t_i)) for observed event i.
  std::pair<ad::Value, ad::Value> log_density_and_mark(int i);
  // Lambda*(T) over (t_n, T].
  ad::Value window_term();

  // Evaluation helpers (plain doubles; tape scratch is rewound internally).
  double time_cdf(int i, double t);
  double density(int i, double t);  // ground density f*(t)
  std::vector<double> mark_probs(int i, double t);
  int predict_mark(int i, double t);

  // Times log(lambda) hit the 1e-30 floor; a nonzero count signals trouble.
  int floor_hits() const { return floor_hits_; }

  ad::Tape& tape() { return *tape_; }
  TapeBinding& binding() { return bind_; }

 private:
  struct NhState {
    std::vector<ad::Value> o, c, cbar, delta;
  };

  std::vector<ad::Value> softplus_heads(const std::vector<ad::Value>& pre);
  std::vector<ad::Value> mlp_intensity(int i, double t);
  std::vector<ad::Value> sa_mc_intensity(int i, double t);
  std::vector<ad::Value> nh_intensity(int i, double t);
  std::vector<ad::Value> hawkes_intensity(int i, double t);
  std::vector<ad::Value> hawkes_cumulative(int i, double t);
  ad::Value rmtpp_ground_intensity(int i, double t);
  ad::Value rmtpp_ground_cumulative(int i, double t);
  std::vector<ad::Value> mark_head_probs(int i);
  ad::Value lnm_log_density(int i, ad::Value log_tau);
  ad::Value lnm_cdf(int i, double tau);
  std::vector<ad::Dual> query_time_embedding(int i, double t);
  std::vector<ad::Dual> fnn_G(int i, double t);
  std::vector<ad::Dual> sa_cm_G(int i, double t);
  std::vector<ad::Dual> cumulative_dual(int i, double t);  // FNN / SA_CM
  std::vector<ad::Value> mc_cumulative(int i, double t);
  ad::Value safe_log(ad::Value x);
  double clamp_tau(double tau) const;

  const ModelSpec* spec_;
  int num_marks_;
  ad::Tape* tape_;
  TapeBinding bind_;
  const EventSequence* seq_;
  int n_mc_;
  std::mt19937_64 mc_rng_;
  int floor_hits_ = 0;

  std::vector<std::vector<ad::Value>> h_;  // n+1 history rows (empty if self-contained)
  std::vector<NhState> nh_;                // per interval
  std::vector<std::vector<std::vector<ad::Value>>> hawkes_s_;  // per interval K x K
};

}  // namespace pointlab
