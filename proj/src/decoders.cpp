#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pointlab/model.hpp"

namespace pointlab {

using ad::Dual;
using ad::Value;

namespace {
constexpr double kLogFloor = 1e-30;
constexpr double kTauFloor = 1e-10;
}  // namespace

ModelForward::ModelForward(const ModelSpec& spec, int num_marks, ad::Tape& tape,
                           ParamStore& params, const EventSequence& seq, int n_mc,
                           std::uint64_t mc_seed)
    : spec_(&spec),
      num_marks_(num_marks),
      tape_(&tape),
      bind_(tape, params),
      seq_(&seq),
      n_mc_(n_mc),
      mc_rng_(mc_seed) {
  check_legal(spec, num_marks);
  validate_sequence(seq, num_marks);

  // Bind every parameter up front so evaluation scratch can be rewound
  // without invalidating cached leaves.
  for (const auto& kv : params.entries()) bind_.vec(kv.first);

  const int n = this->n();
  if (!self_contained(spec.decoder)) {
    const EncodingSpec enc = encoding_spec(spec);
    auto embs = encode_events(tape, bind_, enc, seq);
    h_ = encode_history(tape, bind_, history_spec(spec), embs);
  }

  if (spec.decoder == DecoderKind::NH) {
    const int d_h = spec.d_h;
    NhState s0;
    const auto& o0 = bind_.vec("dec.nh.o0");
    for (int j = 0; j < d_h; ++j) s0.o.push_back(ad::sigmoid(o0[j]));
    s0.c = bind_.vec("dec.nh.c0");
    s0.cbar = bind_.vec("dec.nh.cbar0");
    s0.delta = bind_.vec("dec.nh.delta0");
    nh_.push_back(std::move(s0));
    Value s_delta = bind_.scalar("dec.nh.s_delta");
    for (int e = 1; e <= n; ++e) {
      const NhState& prev = nh_.back();
      const double t_event = seq.events[e - 1].t;
      const double dt = t_event - interval_start(e);
      const int mark = seq.events[e - 1].k;
      // State of the previous interval evaluated at the event time.
      std::vector<Value> c_at, h_at;
      for (int j = 0; j < d_h; ++j) {
        Value c = prev.cbar[j] + (prev.c[j] - prev.cbar[j]) * ad::exp(-(prev.delta[j] * dt));
        c_at.push_back(c);
        h_at.push_back(prev.o[j] * (2.0 * ad::sigmoid(2.0 * c) - 1.0));
      }
      auto gate_pre = [&](const char* g) {
        const auto& W = bind_.vec(std::string("dec.nh.W") + g);
        const auto& U = bind_.vec(std::string("dec.nh.U") + g);
        const auto& b = bind_.vec(std::string("dec.nh.b") + g);
        std::vector<Value> out;
        for (int r = 0; r < d_h; ++r) {
          Value acc = b[r] + W[r * num_marks_ + mark];
          for (int c = 0; c < d_h; ++c) acc = acc + U[r * d_h + c] * h_at[c];
          out.push_back(acc);
        }
        return out;
      };
      auto ip = gate_pre("i"), fp = gate_pre("f"), zp = gate_pre("z"),
           op = gate_pre("o"), dp = gate_pre("d");
      NhState next;
      for (int j = 0; j < d_h; ++j) {
        Value ig = ad::sigmoid(ip[j]);
        Value fg = ad::sigmoid(fp[j]);
        Value zg = 2.0 * ad::sigmoid(zp[j]) - 1.0;
        next.o.push_back(ad::sigmoid(op[j]));
        next.c.push_back(fg * c_at[j] + ig * zg);
        next.cbar.push_back(fg * prev.cbar[j] + ig * zg);
        next.delta.push_back(ad::softplus_scaled(dp[j], s_delta));
      }
      nh_.push_back(std::move(next));
    }
  }

  if (spec.decoder == DecoderKind::HAWKES) {
    const int K = num_marks_;
    const auto& alpha = bind_.vec("dec.alpha");
    const auto& beta = bind_.vec("dec.beta");
    std::vector<std::vector<Value>> s(K, std::vector<Value>(K, ad::constant(tape, 0.0)));
    hawkes_s_.push_back(s);
    for (int e = 1; e <= n; ++e) {
      const double dt = seq.events[e - 1].t - interval_start(e);
      const int mark = seq.events[e - 1].k;
      for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
          s[i][j] = s[i][j] * ad::exp(-(beta[i * K + j] * dt));
          if (j == mark) s[i][j] = s[i][j] + alpha[i * K + j];
        }
      hawkes_s_.push_back(s);
    }
  }
}

double ModelForward::interval_start(int i) const {
  return i <= 1 ? 0.0 : seq_->events[i - 2].t;
}

double ModelForward::clamp_tau(double tau) const {
  const bool log_enc = spec_->encoding == EventEncoding::LTO ||
                       spec_->encoding == EventEncoding::LCONCAT;
  return std::max(tau, log_enc ? kTauFloor : 0.0);
}

Value ModelForward::safe_log(Value x) {
  if (x.v() < kLogFloor) ++floor_hits_;
  return ad::log(ad::max(x, kLogFloor));
}

std::vector<Value> ModelForward::softplus_heads(const std::vector<Value>& pre) {
  const auto& s = bind_.vec("dec.s");
  std::vector<Value> out;
  for (int k = 0; k < num_marks_; ++k)
    out.push_back(ad::softplus_scaled(pre[k], s[k]));
  return out;
}

std::vector<Dual> ModelForward::query_time_embedding(int i, double t) {
  const double tau = clamp_tau(t - interval_start(i));
  return encode_query_time(*tape_, bind_, encoding_spec(*spec_), t, tau);
}

std::vector<Value> ModelForward::mlp_intensity(int i, double t) {
  std::vector<Value> x = h_[i - 1];
  if (spec_->decoder == DecoderKind::MLP_MC) {
    for (const Dual& d : query_time_embedding(i, t)) x.push_back(d.v);
  }
  const auto& W1 = bind_.vec("dec.W1");
  const auto& b1 = bind_.vec("dec.b1");
  const int d_in = static_cast<int>(x.size());
  std::vector<Value> hidden;
  for (int r = 0; r < spec_->d_hidden; ++r) {
    Value acc = b1[r];
    for (int c = 0; c < d_in; ++c) acc = acc + W1[r * d_in + c] * x[c];
    hidden.push_back(ad::relu(acc));
  }
  const auto& w = bind_.vec("dec.w");
  const auto& b = bind_.vec("dec.b");
  std::vector<Value> pre;
  for (int k = 0; k < num_marks_; ++k) {
    Value acc = b[k];
    for (int c = 0; c < spec_->d_hidden; ++c) acc = acc + w[k * spec_->d_hidden + c] * hidden[c];
    pre.push_back(acc);
  }
  auto lam = softplus_heads(pre);
  if (spec_->decoder == DecoderKind::MLP_MC) {
    const auto& mu = bind_.vec("dec.mu");
    for (int k = 0; k < num_marks_; ++k) lam[k] = lam[k] + mu[k];
  }
  return lam;
}

std::vector<Value> ModelForward::sa_mc_intensity(int i, double t) {
  const int d_h = spec_->d_h;
  const int heads = spec_->heads;
  const int dq = d_h / heads;
  auto et = query_time_embedding(i, t);
  const int d_qt = static_cast<int>(et.size());
  const auto& Wq = bind_.vec("dec.Wq");
  const auto& Wk = bind_.vec("dec.Wk");
  const auto& Wv = bind_.vec("dec.Wv");

  std::vector<Value> attended;
  attended.reserve(d_h);
  for (int hd = 0; hd < heads; ++hd) {
    std::vector<Value> q;
    for (int r = 0; r < dq; ++r) {
      Value acc = ad::constant(*tape_, 0.0);
      for (int c = 0; c < d_qt; ++c) acc = acc + Wq[(hd * dq + r) * d_qt + c] * et[c].v;
      q.push_back(acc);
    }
    std::vector<Value> scores;
    std::vector<std::vector<Value>> values;
    for (int j = 0; j < i; ++j) {  // h_1 .. h_i
      Value s = ad::constant(*tape_, 0.0);
      std::vector<Value> v;
      for (int r = 0; r < dq; ++r) {
        Value kk = ad::constant(*tape_, 0.0), vv = ad::constant(*tape_, 0.0);
        for (int c = 0; c < d_h; ++c) {
          kk = kk + Wk[(hd * dq + r) * d_h + c] * h_[j][c];
          vv = vv + Wv[(hd * dq + r) * d_h + c] * h_[j][c];
        }
        s = s + q[r] * kk;
        v.push_back(vv);
      }
      scores.push_back(s / std::sqrt(static_cast<double>(dq)));
      values.push_back(std::move(v));
    }
    auto w = ad::softmax(scores);
    for (int r = 0; r < dq; ++r) {
      Value acc = ad::constant(*tape_, 0.0);
      for (std::size_t j = 0; j < values.size(); ++j) acc = acc + w[j] * values[j][r];
      attended.push_back(acc);
    }
  }

  const auto& W1 = bind_.vec("dec.W1");
  const auto& b1 = bind_.vec("dec.b1");
  const auto& W2 = bind_.vec("dec.W2");
  const auto& b2 = bind_.vec("dec.b2");
  std::vector<Value> hidden;
  for (int r = 0; r < d_h; ++r) {
    Value acc = b1[r];
    for (int c = 0; c < d_h; ++c) acc = acc + W1[r * d_h + c] * attended[c];
    hidden.push_back(ad::relu(acc));
  }
  std::vector<Value> sa_out;
  for (int r = 0; r < d_h; ++r) {
    Value acc = b2[r];
    for (int c = 0; c < d_h; ++c) acc = acc + W2[r * d_h + c] * hidden[c];
    sa_out.push_back(acc);
  }

  const auto& w = bind_.vec("dec.w");
  const auto& b = bind_.vec("dec.b");
  std::vector<Value> pre;
  for (int k = 0; k < num_marks_; ++k) {
    Value acc = b[k];
    for (int c = 0; c < d_h; ++c) acc = acc + w[k * d_h + c] * sa_out[c];
    pre.push_back(acc);
  }
  auto lam = softplus_heads(pre);
  const auto& mu = bind_.vec("dec.mu");
  for (int k = 0; k < num_marks_; ++k) lam[k] = lam[k] + mu[k];
  return lam;
}

std::vector<Value> ModelForward::nh_intensity(int i, double t) {
  const NhState& s = nh_[i - 1];
  const double dt = t - interval_start(i);
  const int d_h = spec_->d_h;
  std::vector<Value> h;
  for (int j = 0; j < d_h; ++j) {
    Value c = s.cbar[j] + (s.c[j] - s.cbar[j]) * ad::exp(-(s.delta[j] * dt));
    h.push_back(s.o[j] * (2.0 * ad::sigmoid(2.0 * c) - 1.0));
  }
  const auto& w = bind_.vec("dec.w");
  std::vector<Value> pre;
  for (int k = 0; k < num_marks_; ++k) {
    Value acc = ad::constant(*tape_, 0.0);
    for (int c = 0; c < d_h; ++c) acc = acc + w[k * d_h + c] * h[c];
    pre.push_back(acc);
  }
  return softplus_heads(pre);
}

std::vector<Value> ModelForward::hawkes_intensity(int i, double t) {
  const int K = num_marks_;
  const auto& mu = bind_.vec("dec.mu");
  const auto& beta = bind_.vec("dec.beta");
  const auto& s = hawkes_s_[i - 1];
  const double dt = t - interval_start(i);
  std::vector<Value> lam;
  for (int k = 0; k < K; ++k) {
    Value acc = mu[k];
    for (int j = 0; j < K; ++j)
      acc = acc + s[k][j] * ad::exp(-(beta[k * K + j] * dt));
    lam.push_back(acc);
  }
  return lam;
}

std::vector<Value> ModelForward::hawkes_cumulative(int i, double t) {
  const int K = num_marks_;
  const auto& mu = bind_.vec("dec.mu");
  const auto& beta = bind_.vec("dec.beta");
  const auto& s = hawkes_s_[i - 1];
  const double dt = t - interval_start(i);
  std::vector<Value> out;
  for (int k = 0; k < K; ++k) {
    Value acc = mu[k] * dt;
    for (int j = 0; j < K; ++j) {
      Value b = beta[k * K + j];
      acc = acc + s[k][j] / b * (1.0 - ad::exp(-(b * dt)));
    }
    out.push_back(acc);
  }
  return out;
}

Value ModelForward::rmtpp_ground_intensity(int i, double t) {
  Value wt = bind_.scalar("dec.wt");
  const auto& wh = bind_.vec("dec.wh");
  Value b = bind_.scalar("dec.b");
  Value c = b + ad::dot(wh, h_[i - 1]);
  return ad::exp(wt * (t - interval_start(i)) + c);
}

Value ModelForward::rmtpp_ground_cumulative(int i, double t) {
  Value wt = bind_.scalar("dec.wt");
  const auto& wh = bind_.vec("dec.wh");
  Value b = bind_.scalar("dec.b");
  Value c = b + ad::dot(wh, h_[i - 1]);
  return (ad::exp(wt * (t - interval_start(i)) + c) - ad::exp(c)) / wt;
}

std::vector<Value> ModelForward::mark_head_probs(int i) {
  const auto& W = bind_.vec("dec.mark.W");
  const auto& b = bind_.vec("dec.mark.b");
  const int d_h = spec_->d_h;
  std::vector<Value> pre;
  for (int k = 0; k < num_marks_; ++k) {
    Value acc = b[k];
    for (int c = 0; c < d_h; ++c) acc = acc + W[k * d_h + c] * h_[i - 1][c];
    pre.push_back(acc);
  }
  return ad::softmax(pre);
}

// Mixture parameters of interval i; returns (log-weights, means, log-sigmas).
static void lnm_heads(TapeBinding& bind, const std::vector<Value>& h, int M, int d_h,
                      std::vector<Value>& log_w, std::vector<Value>& mu,
                      std::vector<Value>& log_sigma) {
  auto head = [&](const char* W, const char* b) {
    const auto& Wv = bind.vec(W);
    const auto& bv = bind.vec(b);
    std::vector<Value> out;
    for (int m = 0; m < M; ++m) {
      Value acc = bv[m];
      for (int c = 0; c < d_h; ++c) acc = acc + Wv[m * d_h + c] * h[c];
      out.push_back(acc);
    }
    return out;
  };
  std::vector<Value> wp = head("dec.lnm.Wp", "dec.lnm.bp");
  Value lse = ad::log_sum_exp(wp);
  log_w.clear();
  for (Value& x : wp) log_w.push_back(x - lse);
  mu = head("dec.lnm.Wmu", "dec.lnm.bmu");
  log_sigma = head("dec.lnm.Wsigma", "dec.lnm.bsigma");
}

Value ModelForward::lnm_log_density(int i, Value log_tau) {
  const int M = spec_->decoder == DecoderKind::LN ? 1 : spec_->mixtures;
  std::vector<Value> log_w, mu, log_sigma;
  lnm_heads(bind_, h_[i - 1], M, spec_->d_h, log_w, mu, log_sigma);
  std::vector<Value> terms;
  const double half_log_2pi = 0.5 * std::log(2.0 * M_PI);
  for (int m = 0; m < M; ++m) {
    Value z = (log_tau - mu[m]) * ad::exp(-log_sigma[m]);
    terms.push_back(log_w[m] - log_sigma[m] - half_log_2pi - 0.5 * z * z);
  }
  return ad::log_sum_exp(terms) - log_tau;
}

Value ModelForward::lnm_cdf(int i, double tau) {
  const int M = spec_->decoder == DecoderKind::LN ? 1 : spec_->mixtures;
  std::vector<Value> log_w, mu, log_sigma;
  lnm_heads(bind_, h_[i - 1], M, spec_->d_h, log_w, mu, log_sigma);
  Value lt = ad::constant(*tape_, std::log(std::max(tau, kTauFloor)));
  Value acc = ad::constant(*tape_, 0.0);
  for (int m = 0; m < M; ++m) {
    Value z = (lt - mu[m]) * ad::exp(-log_sigma[m]) * (1.0 / std::sqrt(2.0));
    acc = acc + ad::exp(log_w[m]) * 0.5 * (1.0 + ad::erf(z));
  }
  return acc;
}

std::vector<Dual> ModelForward::fnn_G(int i, double t) {
  auto et = query_time_embedding(i, t);
  const int d_qt = static_cast<int>(et.size());
  const auto& W1t = bind_.vec("dec.W1t");
  const auto& W1h = bind_.vec("dec.W1h");
  const auto& b1 = bind_.vec("dec.b1");
  const auto& w = bind_.vec("dec.w");
  const auto& b = bind_.vec("dec.b");
  const auto& s = bind_.vec("dec.s");
  const auto& gs_alpha = bind_.vec("dec.gs_alpha");
  const int d_hid = spec_->d_hidden;
  const int d_h = spec_->d_h;

  std::vector<Dual> hidden_pre;
  for (int r = 0; r < d_hid; ++r) {
    Dual acc = ad::dual_const(b1[r]);
    for (int c = 0; c < d_qt; ++c) acc = acc + et[c] * W1t[r * d_qt + c];
    for (int c = 0; c < d_h; ++c) acc = acc + ad::dual_const(W1h[r * d_h + c] * h_[i - 1][c]);
    hidden_pre.push_back(acc);
  }
  std::vector<Dual> out;
  for (int k = 0; k < num_marks_; ++k) {
    Dual acc = ad::dual_const(b[k]);
    for (int r = 0; r < d_hid; ++r)
      acc = acc + ad::gumbel_softplus(hidden_pre[r], gs_alpha[k], s[k]) * w[k * d_hid + r];
    out.push_back(ad::softplus_scaled(acc, s[k]));
  }
  return out;
}

std::vector<Dual> ModelForward::sa_cm_G(int i, double t) {
  auto et = query_time_embedding(i, t);
  const int d_qt = static_cast<int>(et.size());
  const int d_h = spec_->d_h;
  const auto& Wq = bind_.vec("dec.Wq");
  const auto& Wk = bind_.vec("dec.Wk");
  const auto& Wv = bind_.vec("dec.Wv");

  std::vector<Dual> q;
  for (int r = 0; r < d_h; ++r) {
    Dual acc = ad::make_dual(*tape_, 0.0, 0.0);
    for (int c = 0; c < d_qt; ++c) acc = acc + et[c] * Wq[r * d_qt + c];
    q.push_back(acc);
  }
  std::vector<Dual> z(d_h, ad::make_dual(*tape_, 0.0, 0.0));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_h));
  for (int j = 0; j < i; ++j) {  // attend to h_1 .. h_i
    Dual score = ad::make_dual(*tape_, 0.0, 0.0);
    for (int r = 0; r < d_h; ++r) {
      Value kk = ad::constant(*tape_, 0.0);
      for (int c = 0; c < d_h; ++c) kk = kk + Wk[r * d_h + c] * h_[j][c];
      score = score + q[r] * kk;
    }
    score = ad::sigmoid(score * scale);
    for (int r = 0; r < d_h; ++r) {
      Value vv = ad::constant(*tape_, 0.0);
      for (int c = 0; c < d_h; ++c) vv = vv + Wv[r * d_h + c] * h_[j][c];
      z[r] = z[r] + score * vv;
    }
  }

  const auto& W1 = bind_.vec("dec.W1");
  const auto& b1 = bind_.vec("dec.b1");
  const auto& W2 = bind_.vec("dec.W2");
  const auto& b2 = bind_.vec("dec.b2");
  const auto& w = bind_.vec("dec.w");
  const auto& b = bind_.vec("dec.b");
  const auto& s = bind_.vec("dec.s");
  const auto& gs_alpha = bind_.vec("dec.gs_alpha");
  const auto& mu = bind_.vec("dec.mu");

  std::vector<Dual> hidden_pre;
  for (int r = 0; r < d_h; ++r) {
    Dual acc = ad::dual_const(b1[r]);
    for (int c = 0; c < d_h; ++c) acc = acc + z[c] * W1[r * d_h + c];
    hidden_pre.push_back(acc);
  }

  const double tau = t - interval_start(i);
  std::vector<Dual> out;
  for (int k = 0; k < num_marks_; ++k) {
    std::vector<Dual> act;
    for (int r = 0; r < d_h; ++r)
      act.push_back(ad::gumbel_softplus(hidden_pre[r], gs_alpha[k], s[k]));
    Dual pre = ad::dual_const(b[k]);
    for (int r = 0; r < d_h; ++r) {
      Dual acc = ad::dual_const(b2[r]);
      for (int c = 0; c < d_h; ++c) acc = acc + act[c] * W2[r * d_h + c];
      pre = pre + acc * w[k * d_h + r];
    }
    Dual g = ad::softplus_scaled(pre, s[k]);
    Dual drift = {mu[k] * tau, mu[k]};
    out.push_back(g + drift);
  }
  return out;
}

std::vector<Dual> ModelForward::cumulative_dual(int i, double t) {
  auto G = [&](double tt) {
    return spec_->decoder == DecoderKind::FNN ? fnn_G(i, tt) : sa_cm_G(i, tt);
  };
  auto at_t = G(t);
  auto base = G(interval_start(i));
  std::vector<Dual> out;
  for (int k = 0; k < num_marks_; ++k)
    out.push_back({at_t[k].v - base[k].v, at_t[k].d});
  return out;
}

std::vector<Value> ModelForward::mc_cumulative(int i, double t) {
  const double t0 = interval_start(i);
  const double dt = t - t0;
  std::vector<Value> out(num_marks_, ad::constant(*tape_, 0.0));
  if (dt <= 0.0) return out;
  std::uniform_real_distribution<double> unif(t0, t);
  for (int j = 0; j < n_mc_; ++j) {
    auto lam = intensity(i, unif(mc_rng_));
    for (int k = 0; k < num_marks_; ++k) out[k] = out[k] + lam[k];
  }
  for (int k = 0; k < num_marks_; ++k) out[k] = out[k] * (dt / n_mc_);
  return out;
}

std::vector<Value> ModelForward::intensity(int i, double t) {
  switch (spec_->decoder) {
    case DecoderKind::POISSON: {
      const auto& mu = bind_.vec("dec.mu");
      return {mu.begin(), mu.end()};
    }
    case DecoderKind::HAWKES: return hawkes_intensity(i, t);
    case DecoderKind::EC: return mlp_intensity(i, t);
    case DecoderKind::MLP_MC: return mlp_intensity(i, t);
    case DecoderKind::SA_MC: return sa_mc_intensity(i, t);
    case DecoderKind::NH: return nh_intensity(i, t);
    case DecoderKind::RMTPP: {
      Value lam = rmtpp_ground_intensity(i, t);
      auto p = mark_head_probs(i);
      std::vector<Value> out;
      for (int k = 0; k < num_marks_; ++k) out.push_back(lam * p[k]);
      return out;
    }
    case DecoderKind::LNM:
    case DecoderKind::LN: {
      const double tau = std::max(t - interval_start(i), kTauFloor);
      Value f = ad::exp(lnm_log_density(i, ad::constant(*tape_, std::log(tau))));
      Value surv = ad::max(1.0 - lnm_cdf(i, tau), kLogFloor);
      Value lam = f / surv;
      auto p = mark_head_probs(i);
      std::vector<Value> out;
      for (int k = 0; k < num_marks_; ++k) out.push_back(lam * p[k]);
      return out;
    }
    case DecoderKind::FNN:
    case DecoderKind::SA_CM: {
      auto duals = cumulative_dual(i, t);
      std::vector<Value> out;
      for (const Dual& d : duals) out.push_back(d.d);
      return out;
    }
  }
  throw std::logic_error("unreachable");
}

std::vector<Value> ModelForward::cumulative(int i, double t) {
  switch (spec_->decoder) {
    case DecoderKind::POISSON: {
      const auto& mu = bind_.vec("dec.mu");
      const double dt = std::max(t - interval_start(i), 0.0);
      std::vector<Value> out;
      for (int k = 0; k < num_marks_; ++k) out.push_back(mu[k] * dt);
      return out;
    }
    case DecoderKind::HAWKES: return hawkes_cumulative(i, t);
    case DecoderKind::EC: {
      auto lam = mlp_intensity(i, t);
      const double dt = std::max(t - interval_start(i), 0.0);
      for (int k = 0; k < num_marks_; ++k) lam[k] = lam[k] * dt;
      return lam;
    }
    case DecoderKind::MLP_MC:
    case DecoderKind::SA_MC:
    case DecoderKind::NH:
      return mc_cumulative(i, t);
    case DecoderKind::RMTPP: {
      Value total = rmtpp_ground_cumulative(i, t);
      auto p = mark_head_probs(i);
      std::vector<Value> out;
      for (int k = 0; k < num_marks_; ++k) out.push_back(total * p[k]);
      return out;
    }
    case DecoderKind::LNM:
    case DecoderKind::LN: {
      const double tau = std::max(t - interval_start(i), 0.0);
      Value total = tau <= 0.0 ? ad::constant(*tape_, 0.0)
                               : -ad::log(ad::max(1.0 - lnm_cdf(i, tau), kLogFloor));
      auto p = mark_head_probs(i);
      std::vector<Value> out;
      for (int k = 0; k < num_marks_; ++k) out.push_back(total * p[k]);
      return out;
    }
    case DecoderKind::FNN:
    case DecoderKind::SA_CM: {
      auto duals = cumulative_dual(i, t);
      std::vector<Value> out;
      for (const Dual& d : duals) out.push_back(d.v);
      return out;
    }
  }
  throw std::logic_error("unreachable");
}

std::pair<Value, Value> ModelForward::log_density_and_mark(int i) {
  const Event& e = seq_->events[i - 1];
  const DecoderView view = decoder_view(spec_->decoder);

  if (spec_->decoder == DecoderKind::RMTPP) {
    Value log_f = ad::log(rmtpp_ground_intensity(i, e.t)) - rmtpp_ground_cumulative(i, e.t);
    auto p = mark_head_probs(i);
    return {log_f, safe_log(p[e.k])};
  }
  if (view == DecoderView::Density) {
    const double tau = std::max(e.t - interval_start(i), kTauFloor);
    Value log_f = lnm_log_density(i, ad::constant(*tape_, std::log(tau)));
    auto p = mark_head_probs(i);
    return {log_f, safe_log(p[e.k])};
  }

  std::vector<Value> lam, cum;
  if (view == DecoderView::Cumulative) {
    auto duals = cumulative_dual(i, e.t);
    for (const Dual& d : duals) {
      lam.push_back(d.d);
      cum.push_back(d.v);
    }
  } else {
    lam = intensity(i, e.t);
    cum = cumulative(i, e.t);
  }
  Value total_lam = lam[0];
  Value total_cum = cum[0];
  for (int k = 1; k < num_marks_; ++k) {
    total_lam = total_lam + lam[k];
    total_cum = total_cum + cum[k];
  }
  Value log_total = safe_log(total_lam);
  Value log_f = log_total - total_cum;
  Value log_p = safe_log(lam[e.k]) - log_total;
  return {log_f, log_p};
}

Value ModelForward::window_term() {
  const int i = n() + 1;
  if (seq_->t_end <= interval_start(i)) return ad::constant(*tape_, 0.0);
  auto cum = cumulative(i, seq_->t_end);
  Value total = cum[0];
  for (int k = 1; k < num_marks_; ++k) total = total + cum[k];
  return total;
}

double ModelForward::time_cdf(int i, double t) {
  const std::size_t m = tape_->mark();
  double out;
  if (decoder_view(spec_->decoder) == DecoderView::Density &&
      spec_->decoder != DecoderKind::RMTPP) {
    out = lnm_cdf(i, t - interval_start(i)).v();
  } else {
    auto cum = cumulative(i, t);
    double total = 0.0;
    for (const Value& c : cum) total += c.v();
    out = 1.0 - std::exp(-total);
  }
  tape_->rewind(m);
  return out;
}

double ModelForward::density(int i, double t) {
  const std::size_t m = tape_->mark();
  double out;
  if (decoder_view(spec_->decoder) == DecoderView::Density &&
      spec_->decoder != DecoderKind::RMTPP) {
    const double tau = std::max(t - interval_start(i), kTauFloor);
    out = std::exp(lnm_log_density(i, ad::constant(*tape_, std::log(tau))).v());
  } else if (spec_->decoder == DecoderKind::RMTPP) {
    out = std::exp(std::log(rmtpp_ground_intensity(i, t).v()) -
                   rmtpp_ground_cumulative(i, t).v());
  } else {
    auto lam = intensity(i, t);
    auto cum = cumulative(i, t);
    double total_lam = 0.0, total_cum = 0.0;
    for (int k = 0; k < num_marks_; ++k) {
      total_lam += lam[k].v();
      total_cum += cum[k].v();
    }
    out = total_lam * std::exp(-total_cum);
  }
  tape_->rewind(m);
  return out;
}

std::vector<double> ModelForward::mark_probs(int i, double t) {
  const std::size_t m = tape_->mark();
  std::vector<double> out(num_marks_);
  if (decoder_view(spec_->decoder) == DecoderView::Density) {
    auto p = mark_head_probs(i);
    for (int k = 0; k < num_marks_; ++k) out[k] = p[k].v();
  } else {
    auto lam = intensity(i, t);
    double total = 0.0;
    for (const Value& l : lam) total += l.v();
    for (int k = 0; k < num_marks_; ++k) out[k] = lam[k].v() / total;
  }
  tape_->rewind(m);
  return out;
}

int ModelForward::predict_mark(int i, double t) {
  const auto p = mark_probs(i, t);
  int best = 0;
  for (int k = 1; k < num_marks_; ++k)
    if (p[k] > p[best]) best = k;  // ties keep the smallest index
  return best;
}

}  // namespace pointlab
