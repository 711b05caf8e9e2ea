#include "pointlab/model.hpp"

#include <stdexcept>

#include "json.hpp"

namespace pointlab {

const char* to_string(DecoderKind d) {
  switch (d) {
    case DecoderKind::EC: return "EC";
    case DecoderKind::MLP_MC: return "MLP/MC";
    case DecoderKind::SA_MC: return "SA/MC";
    case DecoderKind::RMTPP: return "RMTPP";
    case DecoderKind::NH: return "NH";
    case DecoderKind::LNM: return "LNM";
    case DecoderKind::LN: return "LN";
    case DecoderKind::FNN: return "FNN";
    case DecoderKind::SA_CM: return "SA/CM";
    case DecoderKind::HAWKES: return "HAWKES";
    case DecoderKind::POISSON: return "POISSON";
  }
  return "?";
}

DecoderKind decoder_from_string(const std::string& s) {
  for (DecoderKind d : {DecoderKind::EC, DecoderKind::MLP_MC, DecoderKind::SA_MC,
                        DecoderKind::RMTPP, DecoderKind::NH, DecoderKind::LNM,
                        DecoderKind::LN, DecoderKind::FNN, DecoderKind::SA_CM,
                        DecoderKind::HAWKES, DecoderKind::POISSON})
    if (s == to_string(d)) return d;
  throw std::invalid_argument("unknown decoder: " + s);
}

DecoderView decoder_view(DecoderKind d) {
  switch (d) {
    case DecoderKind::FNN:
    case DecoderKind::SA_CM:
      return DecoderView::Cumulative;
    case DecoderKind::RMTPP:
    case DecoderKind::LNM:
    case DecoderKind::LN:
      return DecoderView::Density;
    default:
      return DecoderView::Intensity;
  }
}

bool self_contained(DecoderKind d) {
  return d == DecoderKind::NH || d == DecoderKind::HAWKES || d == DecoderKind::POISSON;
}

void check_legal(const ModelSpec& spec, int num_marks) {
  if (self_contained(spec.decoder)) return;
  const bool cumulative = decoder_view(spec.decoder) == DecoderView::Cumulative;
  if (cumulative && uses_absolute_time(spec.encoding))
    throw std::invalid_argument(
        "cumulative decoders cannot use TEM/TEMWL event encodings");
  if (has_mark_embedding(spec.encoding) && num_marks < 2)
    throw std::invalid_argument("mark-bearing encodings require K >= 2");
  if (uses_absolute_time(spec.encoding) && spec.d_t % 2 != 0)
    throw std::invalid_argument("TEM encodings need an even d_t");
  if (spec.history == HistoryEncoder::SA && spec.d_h % spec.heads != 0)
    throw std::invalid_argument("d_h must be divisible by heads");
  if ((spec.decoder == DecoderKind::LNM || spec.decoder == DecoderKind::LN) &&
      spec.mixtures < 1)
    throw std::invalid_argument("LNM needs at least one mixture component");
}

EncodingSpec encoding_spec(const ModelSpec& spec) {
  EncodingSpec e;
  e.kind = spec.encoding;
  e.d_t = spec.d_t;
  e.d_k = spec.d_k;
  e.monotone = decoder_view(spec.decoder) == DecoderView::Cumulative;
  return e;
}

HistorySpec history_spec(const ModelSpec& spec) {
  HistorySpec h;
  h.kind = spec.history;
  h.d_h = spec.d_h;
  h.layers = spec.layers;
  h.heads = spec.heads;
  h.window_q = spec.window_q;
  return h;
}

namespace {

constexpr double kExposedHalf = 0.5;  // default exposed value for positive tags

void add_positive(ParamStore& ps, const std::string& name, std::vector<int> shape,
                  double exposed = kExposedHalf) {
  ps.add(name, std::move(shape), Constraint::kPositive, softplus_inverse(exposed));
}

void add_scale(ParamStore& ps, const std::string& name, int k) {
  // s_k / alpha_k activation scales: learnable, positive, start at 1.
  ps.add(name, {k}, Constraint::kPositive, softplus_inverse(1.0));
}

}  // namespace

ParamStore build_params(const ModelSpec& spec, int num_marks) {
  check_legal(spec, num_marks);
  ParamStore ps;
  std::mt19937_64 rng(spec.seed);
  const int K = num_marks;
  const bool positive_net = decoder_view(spec.decoder) == DecoderView::Cumulative;

  int d_qt = 1;
  if (!self_contained(spec.decoder)) {
    const EncodingSpec enc = encoding_spec(spec);
    register_encoding_params(ps, enc, K, rng);
    register_history_params(ps, history_spec(spec), event_embedding_dim(enc), rng);
    d_qt = time_embedding_dim(enc);
  }

  switch (spec.decoder) {
    case DecoderKind::POISSON:
      add_positive(ps, "dec.mu", {K});
      break;
    case DecoderKind::HAWKES:
      add_positive(ps, "dec.mu", {K});
      ps.add("dec.alpha", {K, K}, Constraint::kNonnegative, softplus_inverse(0.5));
      add_positive(ps, "dec.beta", {K, K}, 1.0);
      break;
    case DecoderKind::EC:
      ps.add_xavier("dec.W1", {spec.d_hidden, spec.d_h}, spec.d_h, spec.d_hidden, rng);
      ps.add("dec.b1", {spec.d_hidden});
      ps.add_xavier("dec.w", {K, spec.d_hidden}, spec.d_hidden, K, rng);
      ps.add("dec.b", {K});
      add_scale(ps, "dec.s", K);
      break;
    case DecoderKind::MLP_MC: {
      const int d_in = spec.d_h + d_qt;
      ps.add_xavier("dec.W1", {spec.d_hidden, d_in}, d_in, spec.d_hidden, rng);
      ps.add("dec.b1", {spec.d_hidden});
      ps.add_xavier("dec.w", {K, spec.d_hidden}, spec.d_hidden, K, rng);
      ps.add("dec.b", {K});
      add_scale(ps, "dec.s", K);
      add_positive(ps, "dec.mu", {K});
      break;
    }
    case DecoderKind::SA_MC: {
      const int dq = spec.d_h / spec.heads;
      ps.add_xavier("dec.Wq", {spec.heads * dq, d_qt}, d_qt, dq, rng);
      ps.add_xavier("dec.Wk", {spec.heads * dq, spec.d_h}, spec.d_h, dq, rng);
      ps.add_xavier("dec.Wv", {spec.heads * dq, spec.d_h}, spec.d_h, dq, rng);
      ps.add_xavier("dec.W1", {spec.d_h, spec.d_h}, spec.d_h, spec.d_h, rng);
      ps.add("dec.b1", {spec.d_h});
      ps.add_xavier("dec.W2", {spec.d_h, spec.d_h}, spec.d_h, spec.d_h, rng);
      ps.add("dec.b2", {spec.d_h});
      ps.add_xavier("dec.w", {K, spec.d_h}, spec.d_h, K, rng);
      ps.add("dec.b", {K});
      add_scale(ps, "dec.s", K);
      add_positive(ps, "dec.mu", {K});
      break;
    }
    case DecoderKind::NH: {
      for (const char* g : {"i", "f", "z", "o", "d"}) {
        ps.add_xavier(std::string("dec.nh.W") + g, {spec.d_h, K}, K, spec.d_h, rng);
        ps.add_xavier(std::string("dec.nh.U") + g, {spec.d_h, spec.d_h}, spec.d_h,
                      spec.d_h, rng);
        ps.add(std::string("dec.nh.b") + g, {spec.d_h});
      }
      ps.add_xavier("dec.nh.c0", {spec.d_h}, spec.d_h, spec.d_h, rng);
      ps.add_xavier("dec.nh.cbar0", {spec.d_h}, spec.d_h, spec.d_h, rng);
      ps.add("dec.nh.o0", {spec.d_h});  // passed through a sigmoid
      add_positive(ps, "dec.nh.delta0", {spec.d_h}, 1.0);
      ps.add("dec.nh.s_delta", {1}, Constraint::kPositive, softplus_inverse(1.0));
      ps.add_xavier("dec.w", {K, spec.d_h}, spec.d_h, K, rng);
      add_scale(ps, "dec.s", K);
      break;
    }
    case DecoderKind::RMTPP:
      add_positive(ps, "dec.wt", {1});
      ps.add_xavier("dec.wh", {spec.d_h}, spec.d_h, 1, rng);
      ps.add("dec.b", {1});
      ps.add_xavier("dec.mark.W", {K, spec.d_h}, spec.d_h, K, rng);
      ps.add("dec.mark.b", {K});
      break;
    case DecoderKind::LNM:
    case DecoderKind::LN: {
      const int M = spec.decoder == DecoderKind::LN ? 1 : spec.mixtures;
      ps.add_xavier("dec.lnm.Wp", {M, spec.d_h}, spec.d_h, M, rng);
      ps.add("dec.lnm.bp", {M});
      ps.add_xavier("dec.lnm.Wmu", {M, spec.d_h}, spec.d_h, M, rng);
      ps.add("dec.lnm.bmu", {M});
      ps.add_xavier("dec.lnm.Wsigma", {M, spec.d_h}, spec.d_h, M, rng);
      ps.add("dec.lnm.bsigma", {M});
      ps.add_xavier("dec.mark.W", {K, spec.d_h}, spec.d_h, K, rng);
      ps.add("dec.mark.b", {K});
      break;
    }
    case DecoderKind::FNN:
      add_positive(ps, "dec.W1t", {spec.d_hidden, d_qt});
      add_positive(ps, "dec.W1h", {spec.d_hidden, spec.d_h});
      add_positive(ps, "dec.b1", {spec.d_hidden});
      add_positive(ps, "dec.w", {K, spec.d_hidden});
      add_positive(ps, "dec.b", {K});
      add_scale(ps, "dec.s", K);
      add_scale(ps, "dec.gs_alpha", K);
      break;
    case DecoderKind::SA_CM:
      add_positive(ps, "dec.Wq", {spec.d_h, d_qt});
      add_positive(ps, "dec.Wk", {spec.d_h, spec.d_h});
      add_positive(ps, "dec.Wv", {spec.d_h, spec.d_h});
      add_positive(ps, "dec.W1", {spec.d_h, spec.d_h});
      add_positive(ps, "dec.b1", {spec.d_h});
      add_positive(ps, "dec.W2", {spec.d_h, spec.d_h});
      add_positive(ps, "dec.b2", {spec.d_h});
      add_positive(ps, "dec.w", {K, spec.d_h});
      add_positive(ps, "dec.b", {K});
      add_scale(ps, "dec.s", K);
      add_scale(ps, "dec.gs_alpha", K);
      add_positive(ps, "dec.mu", {K});
      break;
  }
  (void)positive_net;
  return ps;
}

std::string model_spec_to_json(const ModelSpec& spec) {
  nlohmann::json j;
  j["encoding"] = to_string(spec.encoding);
  j["history"] = to_string(spec.history);
  j["decoder"] = to_string(spec.decoder);
  j["d_t"] = spec.d_t;
  j["d_k"] = spec.d_k;
  j["d_h"] = spec.d_h;
  j["d_hidden"] = spec.d_hidden;
  j["layers"] = spec.layers;
  j["heads"] = spec.heads;
  j["mixtures"] = spec.mixtures;
  j["n_mc"] = spec.n_mc;
  if (spec.window_q) j["window_q"] = *spec.window_q;
  j["seed"] = spec.seed;
  return j.dump();
}

ModelSpec model_spec_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ModelSpec s;
  s.encoding = event_encoding_from_string(j.value("encoding", "TO"));
  s.history = history_encoder_from_string(j.value("history", "GRU"));
  s.decoder = decoder_from_string(j.at("decoder").get<std::string>());
  s.d_t = j.value("d_t", s.d_t);
  s.d_k = j.value("d_k", s.d_k);
  s.d_h = j.value("d_h", s.d_h);
  s.d_hidden = j.value("d_hidden", s.d_hidden);
  s.layers = j.value("layers", s.layers);
  s.heads = j.value("heads", s.heads);
  s.mixtures = j.value("mixtures", s.mixtures);
  s.n_mc = j.value("n_mc", s.n_mc);
  if (j.contains("window_q")) s.window_q = j["window_q"].get<int>();
  s.seed = j.value("seed", s.seed);
  return s;
}

}  // namespace pointlab
