#pragma once

#include <optional>
#include <random>
#include <vector>

#include "pointlab/dataset.hpp"
#include "pointlab/params.hpp"
#include "pointlab/tape.hpp"

namespace pointlab {

enum class EventEncoding { TO, LTO, CONCAT, LCONCAT, TEM, TEMWL, LE, LEWL };
enum class HistoryEncoder { GRU, SA, CONS };

const char* to_string(EventEncoding e);
const char* to_string(HistoryEncoder h);
EventEncoding event_encoding_from_string(const std::string& s);
HistoryEncoder history_encoder_from_string(const std::string& s);

struct EncodingSpec {
  EventEncoding kind = EventEncoding::TO;
  int d_t = 1;  // time-embedding width (TEM/LE); TO/LTO are width 1
  int d_k = 4;  // mark-embedding width for *WL / CONCAT kinds
  bool monotone = false;  // cumulative decoders: nonneg LE weights + softplus
};

struct HistorySpec {
  HistoryEncoder kind = HistoryEncoder::GRU;
  int d_h = 8;
  int layers = 1;
  int heads = 1;  // SA only
  std::optional<int> window_q;
};

bool has_mark_embedding(EventEncoding e);
bool uses_absolute_time(EventEncoding e);  // TEM/TEMWL encode t_i, others tau_i
int time_embedding_dim(const EncodingSpec& spec);
int event_embedding_dim(const EncodingSpec& spec);

void register_encoding_params(ParamStore& ps, const EncodingSpec& spec, int num_marks,
                              std::mt19937_64& rng);
void register_history_params(ParamStore& ps, const HistorySpec& spec, int input_dim,
                             std::mt19937_64& rng);

// Row i holds e_{i+1}; n rows for n events.
std::vector<std::vector<ad::Value>> encode_events(ad::Tape& tape, TapeBinding& bind,
                                                  const EncodingSpec& spec,
                                                  const EventSequence& seq);

// Time-only embedding of a query instant, carried as duals so cumulative
// decoders can differentiate with respect to t. `t_abs` and `tau` both have
// unit tangent in t.
std::vector<ad::Dual> encode_query_time(ad::Tape& tape, TapeBinding& bind,
                                        const EncodingSpec& spec, double t_abs,
                                        double tau);

// Returns n+1 rows: row i is h_{i+1}, the embedding available on the interval
// following event i (row 0 is the empty-history state). Strictly causal.
std::vector<std::vector<ad::Value>> encode_history(
    ad::Tape& tape, TapeBinding& bind, const HistorySpec& spec,
    const std::vector<std::vector<ad::Value>>& event_embs);

}  // namespace pointlab
