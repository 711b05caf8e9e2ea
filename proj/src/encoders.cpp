#include "pointlab/encoders.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pointlab {

using ad::Dual;
using ad::Tape;
using ad::Value;

const char* to_string(EventEncoding e) {
  switch (e) {
    case EventEncoding::TO: return "TO";
    case EventEncoding::LTO: return "LTO";
    case EventEncoding::CONCAT: return "CONCAT";
    case EventEncoding::LCONCAT: return "LCONCAT";
    case EventEncoding::TEM: return "TEM";
    case EventEncoding::TEMWL: return "TEMWL";
    case EventEncoding::LE: return "LE";
    case EventEncoding::LEWL: return "LEWL";
  }
  return "?";
}

const char* to_string(HistoryEncoder h) {
  switch (h) {
    case HistoryEncoder::GRU: return "GRU";
    case HistoryEncoder::SA: return "SA";
    case HistoryEncoder::CONS: return "CONS";
  }
  return "?";
}

EventEncoding event_encoding_from_string(const std::string& s) {
  for (EventEncoding e : {EventEncoding::TO, EventEncoding::LTO, EventEncoding::CONCAT,
                          EventEncoding::LCONCAT, EventEncoding::TEM,
                          EventEncoding::TEMWL, EventEncoding::LE, EventEncoding::LEWL})
    if (s == to_string(e)) return e;
  throw std::invalid_argument("unknown event encoding: " + s);
}

HistoryEncoder history_encoder_from_string(const std::string& s) {
  for (HistoryEncoder h : {HistoryEncoder::GRU, HistoryEncoder::SA, HistoryEncoder::CONS})
    if (s == to_string(h)) return h;
  throw std::invalid_argument("unknown history encoder: " + s);
}

bool has_mark_embedding(EventEncoding e) {
  return e == EventEncoding::CONCAT || e == EventEncoding::LCONCAT ||
         e == EventEncoding::TEMWL || e == EventEncoding::LEWL;
}

bool uses_absolute_time(EventEncoding e) {
  return e == EventEncoding::TEM || e == EventEncoding::TEMWL;
}

int time_embedding_dim(const EncodingSpec& spec) {
  switch (spec.kind) {
    case EventEncoding::TO:
    case EventEncoding::LTO:
    case EventEncoding::CONCAT:
    case EventEncoding::LCONCAT:
      return 1;
    default:
      return spec.d_t;
  }
}

int event_embedding_dim(const EncodingSpec& spec) {
  return time_embedding_dim(spec) + (has_mark_embedding(spec.kind) ? spec.d_k : 0);
}

void register_encoding_params(ParamStore& ps, const EncodingSpec& spec, int num_marks,
                              std::mt19937_64& rng) {
  if (uses_absolute_time(spec.kind) && spec.d_t % 2 != 0)
    throw std::invalid_argument("TEM encodings need an even d_t");
  if (uses_absolute_time(spec.kind) && spec.monotone)
    throw std::invalid_argument("TEM encodings cannot be monotone");
  if (has_mark_embedding(spec.kind) && num_marks < 2)
    throw std::invalid_argument("mark-bearing encodings require K >= 2");
  if (spec.kind == EventEncoding::LE || spec.kind == EventEncoding::LEWL) {
    if (spec.monotone) {
      ps.add("enc.le.w", {spec.d_t}, Constraint::kNonnegative,
             softplus_inverse(0.5));
      ps.add("enc.le.b", {spec.d_t}, Constraint::kFree, 0.0);
    } else {
      ps.add_xavier("enc.le.w", {spec.d_t}, 1, spec.d_t, rng);
      ps.add("enc.le.b", {spec.d_t}, Constraint::kFree, 0.0);
    }
  }
  if (has_mark_embedding(spec.kind))
    ps.add_xavier("enc.mark_emb", {spec.d_k, num_marks}, num_marks, spec.d_k, rng);
}

static std::vector<Value> matvec(const std::vector<Value>& w, int rows, int cols,
                                 const std::vector<Value>& x) {
  std::vector<Value> out;
  out.reserve(rows);
  for (int r = 0; r < rows; ++r) {
    Value acc = ad::constant(*x[0].tape, 0.0);
    for (int c = 0; c < cols; ++c) acc = acc + w[r * cols + c] * x[c];
    out.push_back(acc);
  }
  return out;
}

// Time part of one event's embedding.
static std::vector<Value> encode_time_scalar(Tape& tape, TapeBinding& bind,
                                             const EncodingSpec& spec, double t_abs,
                                             double tau) {
  std::vector<Value> out;
  switch (spec.kind) {
    case EventEncoding::TO:
    case EventEncoding::CONCAT:
      out.push_back(ad::constant(tape, tau));
      break;
    case EventEncoding::LTO:
    case EventEncoding::LCONCAT:
      if (tau <= 0.0) throw std::invalid_argument("log encoding needs tau > 0");
      out.push_back(ad::constant(tape, std::log(tau)));
      break;
    case EventEncoding::TEM:
    case EventEncoding::TEMWL:
      for (int j = 0; j < spec.d_t / 2; ++j) {
        const double freq = std::pow(1000.0, -2.0 * j / spec.d_t);
        out.push_back(ad::constant(tape, std::sin(freq * t_abs)));
        out.push_back(ad::constant(tape, std::cos(freq * t_abs)));
      }
      break;
    case EventEncoding::LE:
    case EventEncoding::LEWL: {
      const auto& w = bind.vec("enc.le.w");
      const auto& b = bind.vec("enc.le.b");
      Value tv = ad::constant(tape, tau);
      for (int j = 0; j < spec.d_t; ++j) {
        Value pre = w[j] * tv + b[j];
        out.push_back(spec.monotone ? ad::softplus(pre) : ad::relu(pre));
      }
      break;
    }
  }
  return out;
}

std::vector<std::vector<Value>> encode_events(Tape& tape, TapeBinding& bind,
                                              const EncodingSpec& spec,
                                              const EventSequence& seq) {
  std::vector<std::vector<Value>> rows;
  rows.reserve(seq.events.size());
  const auto taus = seq.inter_arrivals();
  for (std::size_t i = 0; i < seq.events.size(); ++i) {
    std::vector<Value> e =
        encode_time_scalar(tape, bind, spec, seq.events[i].t, taus[i]);
    if (has_mark_embedding(spec.kind)) {
      const auto& emb = bind.vec("enc.mark_emb");
      const int K = static_cast<int>(emb.size()) / spec.d_k;
      for (int j = 0; j < spec.d_k; ++j) e.push_back(emb[j * K + seq.events[i].k]);
    }
    rows.push_back(std::move(e));
  }
  return rows;
}

std::vector<Dual> encode_query_time(Tape& tape, TapeBinding& bind,
                                    const EncodingSpec& spec, double t_abs,
                                    double tau) {
  std::vector<Dual> out;
  switch (spec.kind) {
    case EventEncoding::TO:
    case EventEncoding::CONCAT:
      out.push_back(ad::make_dual(tape, tau, 1.0));
      break;
    case EventEncoding::LTO:
    case EventEncoding::LCONCAT:
      if (tau <= 0.0) throw std::invalid_argument("log encoding needs tau > 0");
      out.push_back(ad::make_dual(tape, std::log(tau), 1.0 / tau));
      break;
    case EventEncoding::TEM:
    case EventEncoding::TEMWL:
      for (int j = 0; j < spec.d_t / 2; ++j) {
        const double freq = std::pow(1000.0, -2.0 * j / spec.d_t);
        out.push_back(ad::make_dual(tape, std::sin(freq * t_abs),
                                    freq * std::cos(freq * t_abs)));
        out.push_back(ad::make_dual(tape, std::cos(freq * t_abs),
                                    -freq * std::sin(freq * t_abs)));
      }
      break;
    case EventEncoding::LE:
    case EventEncoding::LEWL: {
      const auto& w = bind.vec("enc.le.w");
      const auto& b = bind.vec("enc.le.b");
      Dual tv = ad::make_dual(tape, tau, 1.0);
      for (int j = 0; j < spec.d_t; ++j) {
        Dual pre = tv * w[j] + b[j];
        if (spec.monotone) {
          out.push_back(ad::softplus(pre));
        } else {
          // relu on duals
          const double x = pre.v.v();
          out.push_back(x > 0.0 ? pre : ad::make_dual(tape, 0.0, 0.0));
        }
      }
      break;
    }
  }
  return out;
}

void register_history_params(ParamStore& ps, const HistorySpec& spec, int input_dim,
                             std::mt19937_64& rng) {
  if (spec.window_q && *spec.window_q < 0)
    throw std::invalid_argument("window_q must be >= 0");
  if (spec.kind == HistoryEncoder::CONS) return;
  if (spec.d_h % spec.heads != 0)
    throw std::invalid_argument("d_h must be divisible by heads");
  for (int l = 0; l < spec.layers; ++l) {
    const int d_in = l == 0 ? input_dim : spec.d_h;
    const std::string p = (spec.kind == HistoryEncoder::GRU ? "gru.l" : "sa.l") +
                          std::to_string(l) + ".";
    if (spec.kind == HistoryEncoder::GRU) {
      ps.add_xavier(p + "W", {3 * spec.d_h, d_in}, d_in, spec.d_h, rng);
      ps.add_xavier(p + "U", {3 * spec.d_h, spec.d_h}, spec.d_h, spec.d_h, rng);
      ps.add(p + "b", {3 * spec.d_h});
      ps.add_xavier(p + "h0", {spec.d_h}, spec.d_h, spec.d_h, rng);
    } else {
      const int dq = spec.d_h / spec.heads;
      ps.add_xavier(p + "Wq", {spec.heads * dq, d_in}, d_in, dq, rng);
      ps.add_xavier(p + "Wk", {spec.heads * dq, d_in}, d_in, dq, rng);
      ps.add_xavier(p + "Wv", {spec.heads * dq, d_in}, d_in, dq, rng);
      ps.add_xavier(p + "W1", {spec.d_h, spec.d_h}, spec.d_h, spec.d_h, rng);
      ps.add(p + "b1", {spec.d_h});
      ps.add_xavier(p + "W2", {spec.d_h, spec.d_h}, spec.d_h, spec.d_h, rng);
      ps.add(p + "b2", {spec.d_h});
      ps.add_xavier(p + "h0", {spec.d_h}, spec.d_h, spec.d_h, rng);
    }
  }
}

static std::vector<Value> gru_cell(TapeBinding& bind, const std::string& p, int d_h,
                                   int d_in, const std::vector<Value>& x,
                                   const std::vector<Value>& h) {
  const auto& W = bind.vec(p + "W");
  const auto& U = bind.vec(p + "U");
  const auto& b = bind.vec(p + "b");
  auto gate = [&](int g, const std::vector<Value>& hh) {
    std::vector<Value> out;
    out.reserve(d_h);
    for (int r = 0; r < d_h; ++r) {
      Value acc = b[g * d_h + r];
      for (int c = 0; c < d_in; ++c) acc = acc + W[(g * d_h + r) * d_in + c] * x[c];
      for (int c = 0; c < d_h; ++c) acc = acc + U[(g * d_h + r) * d_h + c] * hh[c];
      out.push_back(acc);
    }
    return out;
  };
  auto r_pre = gate(0, h);
  auto z_pre = gate(1, h);
  std::vector<Value> r, z;
  for (int i = 0; i < d_h; ++i) {
    r.push_back(ad::sigmoid(r_pre[i]));
    z.push_back(ad::sigmoid(z_pre[i]));
  }
  std::vector<Value> rh;
  for (int i = 0; i < d_h; ++i) rh.push_back(r[i] * h[i]);
  auto n_pre = gate(2, rh);
  std::vector<Value> out;
  for (int i = 0; i < d_h; ++i) {
    Value n = ad::tanh(n_pre[i]);
    out.push_back((1.0 - z[i]) * n + z[i] * h[i]);
  }
  return out;
}

// One self-attention block: h_i from context embeddings [first, last) of xs,
// query from xs[last-1] (or the learned null state when the context is empty).
static std::vector<Value> sa_block(Tape& tape, TapeBinding& bind, const std::string& p,
                                   const HistorySpec& spec, int d_in,
                                   const std::vector<std::vector<Value>>& xs,
                                   int first, int last) {
  if (last <= first) {
    const auto& h0 = bind.vec(p + "h0");
    return h0;
  }
  const int dq = spec.d_h / spec.heads;
  const auto& Wq = bind.vec(p + "Wq");
  const auto& Wk = bind.vec(p + "Wk");
  const auto& Wv = bind.vec(p + "Wv");
  const std::vector<Value>& query_in = xs[last - 1];

  std::vector<Value> attended;  // concatenated head outputs, width d_h
  attended.reserve(spec.d_h);
  for (int hd = 0; hd < spec.heads; ++hd) {
    std::vector<Value> q(dq, ad::constant(tape, 0.0));
    for (int r = 0; r < dq; ++r) {
      Value acc = ad::constant(tape, 0.0);
      for (int c = 0; c < d_in; ++c) acc = acc + Wq[(hd * dq + r) * d_in + c] * query_in[c];
      q[r] = acc;
    }
    std::vector<Value> scores;
    std::vector<std::vector<Value>> values;
    for (int j = first; j < last; ++j) {
      Value s = ad::constant(tape, 0.0);
      std::vector<Value> v;
      v.reserve(dq);
      for (int r = 0; r < dq; ++r) {
        Value kk = ad::constant(tape, 0.0);
        Value vv = ad::constant(tape, 0.0);
        for (int c = 0; c < d_in; ++c) {
          kk = kk + Wk[(hd * dq + r) * d_in + c] * xs[j][c];
          vv = vv + Wv[(hd * dq + r) * d_in + c] * xs[j][c];
        }
        s = s + q[r] * kk;
        v.push_back(vv);
      }
      scores.push_back(s / std::sqrt(static_cast<double>(dq)));
      values.push_back(std::move(v));
    }
    auto w = ad::softmax(scores);
    for (int r = 0; r < dq; ++r) {
      Value acc = ad::constant(tape, 0.0);
      for (std::size_t j = 0; j < values.size(); ++j) acc = acc + w[j] * values[j][r];
      attended.push_back(acc);
    }
  }

  const auto& W1 = bind.vec(p + "W1");
  const auto& b1 = bind.vec(p + "b1");
  const auto& W2 = bind.vec(p + "W2");
  const auto& b2 = bind.vec(p + "b2");
  std::vector<Value> hidden = matvec(W1, spec.d_h, spec.d_h, attended);
  for (int i = 0; i < spec.d_h; ++i) hidden[i] = ad::relu(hidden[i] + b1[i]);
  std::vector<Value> out = matvec(W2, spec.d_h, spec.d_h, hidden);
  for (int i = 0; i < spec.d_h; ++i) out[i] = out[i] + b2[i];
  return out;
}

std::vector<std::vector<Value>> encode_history(
    Tape& tape, TapeBinding& bind, const HistorySpec& spec,
    const std::vector<std::vector<Value>>& event_embs) {
  const int n = static_cast<int>(event_embs.size());
  std::vector<std::vector<Value>> rows;
  rows.reserve(n + 1);

  if (spec.kind == HistoryEncoder::CONS) {
    std::vector<Value> ones;
    for (int j = 0; j < spec.d_h; ++j) ones.push_back(ad::constant(tape, 1.0));
    rows.assign(n + 1, ones);
    return rows;
  }

  const int d_in0 = n > 0 ? static_cast<int>(event_embs[0].size()) : 0;

  if (spec.kind == HistoryEncoder::GRU) {
    if (!spec.window_q) {
      // One pass; stacked layers feed the next layer with per-step outputs.
      std::vector<std::vector<Value>> inputs = event_embs;
      for (int l = 0; l < spec.layers; ++l) {
        const std::string p = "gru.l" + std::to_string(l) + ".";
        const int d_in = l == 0 ? d_in0 : spec.d_h;
        std::vector<Value> h = bind.vec(p + "h0");
        std::vector<std::vector<Value>> outs;
        outs.push_back(h);
        for (int i = 0; i < n; ++i) {
          h = gru_cell(bind, p, spec.d_h, d_in, inputs[i], h);
          outs.push_back(h);
        }
        inputs.assign(outs.begin() + 1, outs.end());
        if (l == spec.layers - 1) rows = std::move(outs);
      }
      if (rows.empty()) rows.push_back(bind.vec("gru.l0.h0"));
      return rows;
    }
    // Windowed: re-run from the learned initial state over the last q events.
    const int q = *spec.window_q;
    for (int i = 0; i <= n; ++i) {
      const int first = std::max(0, i - q);
      std::vector<std::vector<Value>> inputs(event_embs.begin() + first,
                                             event_embs.begin() + i);
      std::vector<Value> h;
      for (int l = 0; l < spec.layers; ++l) {
        const std::string p = "gru.l" + std::to_string(l) + ".";
        const int d_in = l == 0 ? d_in0 : spec.d_h;
        h = bind.vec(p + "h0");
        std::vector<std::vector<Value>> outs;
        for (const auto& x : inputs) {
          h = gru_cell(bind, p, spec.d_h, d_in, x, h);
          outs.push_back(h);
        }
        inputs = std::move(outs);
      }
      rows.push_back(h);
    }
    return rows;
  }

  // SA: each h_i attends over the (windowed) context independently.
  for (int i = 0; i <= n; ++i) {
    int first = 0;
    if (spec.window_q) first = std::max(0, i - *spec.window_q);
    std::vector<std::vector<Value>> layer_in(event_embs.begin(), event_embs.begin() + i);
    std::vector<Value> h;
    for (int l = 0; l < spec.layers; ++l) {
      const std::string p = "sa.l" + std::to_string(l) + ".";
      const int d_in = l == 0 ? d_in0 : spec.d_h;
      h = sa_block(tape, bind, p, spec, d_in, layer_in, first, i);
      if (l + 1 < spec.layers) {
        // Feed per-position outputs of this layer to the next.
        std::vector<std::vector<Value>> next;
        for (int j = first; j < i; ++j)
          next.push_back(sa_block(tape, bind, p, spec, d_in, layer_in, first, j + 1));
        layer_in.assign(i, {});
        for (int j = first; j < i; ++j) layer_in[j] = next[j - first];
      }
    }
    rows.push_back(h);
  }
  return rows;
}

}  // namespace pointlab
