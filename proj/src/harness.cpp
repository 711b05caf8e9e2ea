#include "pointlab/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fs = std::filesystem;

namespace pointlab {

void ExperimentConfig::validate() const {
  if (dataset_paths.empty()) throw std::invalid_argument("config: no datasets");
  if (templates.empty()) throw std::invalid_argument("config: no model templates");
  if (seeds.empty()) throw std::invalid_argument("config: no seeds");
  // Template legality needs K, which is dataset-dependent; check with a
  // generous K here and again per dataset at run time.
  for (const ModelSpec& t : templates) check_legal(t, 1000);
}

static TrainSchedule schedule_from_json(const nlohmann::json& j) {
  TrainSchedule s;
  s.max_epochs = j.value("max_epochs", s.max_epochs);
  s.patience = j.value("patience", s.patience);
  s.lr_halve_after = j.value("lr_halve_after", s.lr_halve_after);
  s.lr = j.value("lr", s.lr);
  s.batch_size = j.value("batch_size", s.batch_size);
  return s;
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ExperimentConfig cfg;
  for (const auto& p : j.at("datasets")) cfg.dataset_paths.push_back(p.get<std::string>());
  for (const auto& m : j.at("models"))
    cfg.templates.push_back(model_spec_from_json(m.dump()));
  if (j.contains("grids")) {
    const auto& g = j["grids"];
    auto grid = [&](const char* name, std::vector<int>& into) {
      if (g.contains(name)) into = g[name].get<std::vector<int>>();
    };
    grid("embedding", cfg.grids.embedding);
    grid("hidden", cfg.grids.hidden);
    grid("history", cfg.grids.history);
    grid("layers", cfg.grids.layers);
    grid("heads", cfg.grids.heads);
    grid("mixtures", cfg.grids.mixtures);
  }
  if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  if (const char* root = std::getenv("POINTLAB_OUT"))
    cfg.out_dir = (fs::path(root) / cfg.out_dir).string();
  cfg.n_configs = j.value("n_configs", cfg.n_configs);
  cfg.n_mc_eval = j.value("n_mc_eval", cfg.n_mc_eval);
  cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
  cfg.test_fraction = j.value("test_fraction", cfg.test_fraction);
  if (j.contains("schedule")) cfg.schedule = schedule_from_json(j["schedule"]);
  cfg.validate();
  return cfg;
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["datasets"] = cfg.dataset_paths;
  for (const ModelSpec& m : cfg.templates)
    j["models"].push_back(nlohmann::json::parse(model_spec_to_json(m)));
  j["grids"] = {{"embedding", cfg.grids.embedding}, {"hidden", cfg.grids.hidden},
                {"history", cfg.grids.history},     {"layers", cfg.grids.layers},
                {"heads", cfg.grids.heads},         {"mixtures", cfg.grids.mixtures}};
  j["seeds"] = cfg.seeds;
  j["out_dir"] = cfg.out_dir;
  j["n_configs"] = cfg.n_configs;
  j["n_mc_eval"] = cfg.n_mc_eval;
  j["val_fraction"] = cfg.val_fraction;
  j["test_fraction"] = cfg.test_fraction;
  j["schedule"] = {{"max_epochs", cfg.schedule.max_epochs},
                   {"patience", cfg.schedule.patience},
                   {"lr_halve_after", cfg.schedule.lr_halve_after},
                   {"lr", cfg.schedule.lr},
                   {"batch_size", cfg.schedule.batch_size}};
  return j.dump(2);
}

std::string spec_name(const ModelSpec& spec) {
  if (self_contained(spec.decoder)) return to_string(spec.decoder);
  std::string name = std::string(to_string(spec.encoding)) + "-" +
                     to_string(spec.history) + "-" + to_string(spec.decoder);
  for (char& c : name)
    if (c == '/') c = '_';
  return name;
}

static std::string dataset_name(const std::string& path) {
  return fs::path(path).stem().string();
}

std::string run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);

  nlohmann::json summary;
  for (const std::string& path : cfg.dataset_paths) {
    const std::string ds_name = dataset_name(path);
    MarkedDataset raw = load_dataset(path);
    for (const ModelSpec& templ : cfg.templates) {
      const std::string model = spec_name(templ);
      std::vector<double> cell_nll_t, cell_nll_m, cell_pce, cell_ece, cell_f1;
      for (std::uint64_t seed : cfg.seeds) {
        const std::string cell = model + "__" + ds_name + "__seed" + std::to_string(seed);
        const fs::path record_path = fs::path(cfg.out_dir) / (cell + ".json");
        nlohmann::json record;
        if (fs::exists(record_path)) {  // crash-resume
          std::ifstream in(record_path);
          in >> record;
        } else {
          try {
            MarkedDataset ds = split(raw, 1.0 - cfg.val_fraction - cfg.test_fraction,
                                     cfg.val_fraction, cfg.test_fraction, seed);
            ModelSpec templ_seeded = templ;
            templ_seeded.seed = seed;
            SearchResult search = random_search(templ_seeded, cfg.grids, cfg.n_configs,
                                                ds, seed, cfg.schedule);
            MetricsReport rep = evaluate_model(search.best, ds, search.params,
                                               ds.test_idx, cfg.n_mc_eval);
            record["model"] = model;
            record["dataset"] = ds_name;
            record["seed"] = seed;
            record["spec"] = nlohmann::json::parse(model_spec_to_json(search.best));
            record["metrics"] = nlohmann::json::parse(metrics_report_to_json(rep));
            record["val_nlls"] = search.val_nlls;
            std::ofstream(fs::path(cfg.out_dir) / (cell + ".epochs.jsonl"))
                << train_report_to_jsonl(search.report);
          } catch (const std::exception& e) {
            record["model"] = model;
            record["dataset"] = ds_name;
            record["seed"] = seed;
            record["error"] = e.what();
          }
          // Timestamps live only under `meta` so payloads stay deterministic.
          record["meta"] = {{"written_unix",
                             std::chrono::duration_cast<std::chrono::seconds>(
                                 std::chrono::system_clock::now().time_since_epoch())
                                 .count()}};
          std::ofstream(record_path) << record.dump(2) << "\n";
        }
        if (record.contains("metrics")) {
          const auto& m = record["metrics"];
          cell_nll_t.push_back(m["nll_t"].get<double>());
          cell_nll_m.push_back(m["nll_m"].get<double>());
          cell_pce.push_back(m["pce"].get<double>());
          cell_ece.push_back(m["ece"].get<double>());
          cell_f1.push_back(m["f1"].get<double>());
        }
      }
      auto mean_se = [](const std::vector<double>& xs) {
        nlohmann::json j;
        if (xs.empty()) return j;
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= xs.size();
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        const double se = xs.size() > 1 ? std::sqrt(var / (xs.size() - 1) / xs.size()) : 0.0;
        j["mean"] = mean;
        j["stderr"] = se;
        j["n"] = xs.size();
        return j;
      };
      summary[ds_name][model] = {{"nll_t", mean_se(cell_nll_t)},
                                 {"nll_m", mean_se(cell_nll_m)},
                                 {"pce", mean_se(cell_pce)},
                                 {"ece", mean_se(cell_ece)},
                                 {"f1", mean_se(cell_f1)}};
    }
  }
  std::ofstream(fs::path(cfg.out_dir) / "summary.json") << summary.dump(2) << "\n";
  return cfg.out_dir;
}

CompareOutput compare_results(const std::vector<std::string>& result_files,
                              const std::string& metric, bool higher_better) {
  // (model, dataset) -> per-seed scores
  std::map<std::string, std::map<std::string, std::vector<double>>> cells;
  for (const std::string& file : result_files) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("compare: cannot read " + file);
    std::string line;
    std::stringstream whole;
    whole << in.rdbuf();
    std::stringstream ss(whole.str());
    while (std::getline(ss, line)) {
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      nlohmann::json record;
      // Records may be one-per-line or a single pretty-printed document.
      try {
        record = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        record = nlohmann::json::parse(whole.str());
        ss.setstate(std::ios::eofbit);
      }
      if (!record.contains("metrics")) continue;
      const std::string model = record.at("model").get<std::string>();
      const std::string ds = record.at("dataset").get<std::string>();
      cells[model][ds].push_back(record["metrics"].at(metric).get<double>());
    }
  }
  if (cells.size() < 2)
    throw std::invalid_argument("compare: need at least 2 models with results");

  // Mean over seeds per cell; require a complete model x dataset grid.
  std::vector<std::string> datasets;
  for (const auto& kv : cells.begin()->second) datasets.push_back(kv.first);
  std::map<std::string, std::map<std::string, double>> table;
  for (const auto& [model, per_ds] : cells) {
    if (per_ds.size() != datasets.size())
      throw std::invalid_argument("compare: incomplete grid for model " + model);
    for (const std::string& ds : datasets) {
      const auto it = per_ds.find(ds);
      if (it == per_ds.end())
        throw std::invalid_argument("compare: missing cell " + model + "/" + ds);
      double mean = 0.0;
      for (double x : it->second) mean += x;
      table[model][ds] = mean / it->second.size();
    }
  }

  CompareOutput out;
  for (const auto& kv : table) out.table.decoders.push_back(kv.first);
  for (const std::string& ds : datasets) {
    std::vector<double> col;
    for (const auto& kv : table) col.push_back(kv.second.at(ds));
    out.table.ranks.push_back(rank_scores(col, higher_better));
  }
  out.friedman = friedman(out.table);
  out.holm = holm(pairwise_rank_pvalues(out.table));
  out.cd = cd_diagram_data(out.table);
  out.aggregation = aggregate_ranks(table, higher_better);

  // Standardized scores only make sense for NLL-like metrics, but the
  // transformation is harmless elsewhere; aggregate them alongside.
  std::map<std::string, std::map<std::string, double>> std_table;
  for (const std::string& ds : datasets) {
    std::map<std::string, double> col;
    for (const auto& kv : table) col[kv.first] = kv.second.at(ds);
    for (const auto& [model, v] : standardize_nll(col)) std_table[model][ds] = v;
  }
  out.standardized = aggregate_ranks(std_table, higher_better);
  return out;
}

std::string compare_output_to_json(const CompareOutput& out) {
  nlohmann::json j;
  j["models"] = out.table.decoders;
  j["ranks"] = out.table.ranks;
  j["friedman"] = {{"statistic", out.friedman.statistic}, {"p_value", out.friedman.p_value}};
  for (const HolmEntry& e : out.holm)
    j["holm"].push_back({{"a", e.a},
                         {"b", e.b},
                         {"raw_p", e.raw_p},
                         {"adjusted_p", e.adjusted_p},
                         {"rejected", e.rejected}});
  j["cd"] = nlohmann::json::parse(cd_diagram_to_json(out.cd));
  auto dump_agg = [](const std::map<std::string, RankSummary>& agg) {
    nlohmann::json a;
    for (const auto& [name, s] : agg)
      a[name] = {{"mean", s.mean}, {"median", s.median}, {"mean_rank", s.mean_rank}};
    return a;
  };
  j["aggregation"] = dump_agg(out.aggregation);
  j["standardized"] = dump_agg(out.standardized);
  return j.dump(2);
}

std::vector<GradcheckResult> gradcheck_model(const ModelSpec& spec, int num_marks,
                                             const EventSequence& seq, double tol,
                                             double eps) {
  ParamStore params = build_params(spec, num_marks);
  const std::uint64_t mc_seed = 0xC0FFEEull;

  auto loss_at = [&](ParamStore& ps) {
    NllSplit s = sequence_nll_value(spec, num_marks, ps, seq, spec.n_mc, mc_seed);
    return s.total();
  };

  // Analytic gradients.
  params.zero_grad();
  {
    ad::Tape tape;
    ModelForward fwd(spec, num_marks, tape, params, seq, spec.n_mc, mc_seed);
    SequenceNll nll = sequence_nll(fwd);
    ad::Value total = nll.nll_t + nll.nll_m;
    if (!std::isfinite(total.v()))
      throw std::runtime_error("gradcheck: non-finite loss for " + spec_name(spec));
    auto adjoints = tape.backward(total.idx);
    fwd.binding().scatter_gradients(adjoints);
  }

  std::vector<GradcheckResult> results;
  for (auto& [name, entry] : params.entries()) {
    GradcheckResult r{name, 0.0, true};
    for (std::size_t i = 0; i < entry.raw.size(); ++i) {
      const double saved = entry.raw[i];
      entry.raw[i] = saved + eps;
      const double up = loss_at(params);
      entry.raw[i] = saved - eps;
      const double down = loss_at(params);
      entry.raw[i] = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double an = entry.grad[i];
      const double rel = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
      r.max_rel_err = std::max(r.max_rel_err, rel);
    }
    r.pass = r.max_rel_err < tol;
    results.push_back(r);
  }
  return results;
}

std::vector<std::string> gradcheck_all(double tol) {
  EventSequence seq;
  seq.events = {{0.4, 0}, {0.9, 1}, {1.7, 0}};
  seq.t_end = 2.5;

  std::vector<std::string> failures;
  auto run = [&](const ModelSpec& spec) {
    try {
      for (const GradcheckResult& r : gradcheck_model(spec, 2, seq, tol)) {
        if (!r.pass) {
          std::ostringstream msg;
          msg << spec_name(spec) << " / " << r.param << " rel err " << r.max_rel_err;
          failures.push_back(msg.str());
        }
      }
    } catch (const std::exception& e) {
      failures.push_back(spec_name(spec) + ": " + e.what());
    }
  };

  // Self-contained decoders.
  for (DecoderKind d : {DecoderKind::POISSON, DecoderKind::HAWKES, DecoderKind::NH}) {
    ModelSpec spec;
    spec.decoder = d;
    spec.d_h = 4;
    spec.n_mc = 16;
    run(spec);
  }
  // Encoder-fed decoders over a small legal grid.
  for (DecoderKind d : {DecoderKind::EC, DecoderKind::MLP_MC, DecoderKind::SA_MC,
                        DecoderKind::RMTPP, DecoderKind::LNM, DecoderKind::LN,
                        DecoderKind::FNN, DecoderKind::SA_CM}) {
    const bool cumulative = decoder_view(d) == DecoderView::Cumulative;
    std::vector<EventEncoding> encodings = {EventEncoding::TO, EventEncoding::LCONCAT};
    encodings.push_back(cumulative ? EventEncoding::LE : EventEncoding::TEM);
    for (EventEncoding enc : encodings)
      for (HistoryEncoder hist :
           {HistoryEncoder::GRU, HistoryEncoder::SA, HistoryEncoder::CONS}) {
        ModelSpec spec;
        spec.decoder = d;
        spec.encoding = enc;
        spec.history = hist;
        spec.d_t = 4;
        spec.d_k = 3;
        spec.d_h = 4;
        spec.d_hidden = 4;
        spec.mixtures = 2;
        spec.n_mc = 16;
        run(spec);
      }
  }
  return failures;
}

}  // namespace pointlab
