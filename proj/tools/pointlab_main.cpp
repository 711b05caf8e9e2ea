#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pointlab/harness.hpp"
#include "pointlab/hawkes.hpp"
#include "pointlab/metrics.hpp"
#include "pointlab/model.hpp"
#include "pointlab/train.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pointlab: marked temporal point process benchmark toolkit"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate synthetic Hawkes/Poisson data");
  std::string sim_params = "benchmark-hawkes";
  int sim_sequences = 100;
  double sim_t_end = 10.0;
  std::uint64_t sim_seed = 0;
  std::string sim_out = "data.json";
  sim->add_option("--params", sim_params, "benchmark-hawkes | poisson:<rate>[,rate...] | bimodal");
  sim->add_option("--sequences", sim_sequences);
  sim->add_option("--t-end", sim_t_end);
  sim->add_option("--seed", sim_seed);
  sim->add_option("--out", sim_out);

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "filter marks and rescale times");
  std::string prep_in, prep_out;
  int prep_top_marks = 50;
  double prep_scale = 10.0;
  prep->add_option("--in", prep_in)->required();
  prep->add_option("--out", prep_out)->required();
  prep->add_option("--top-marks", prep_top_marks);
  prep->add_option("--scale", prep_scale);

  // train
  auto* tr = app.add_subcommand("train", "run an experiment config");
  std::string tr_config;
  std::string tr_out_override;
  tr->add_option("--config", tr_config)->required();
  tr->add_option("--out", tr_out_override, "override the config's output directory");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset");
  std::string ev_checkpoint, ev_data, ev_out;
  int ev_n_mc = 512;
  ev->add_option("--checkpoint", ev_checkpoint)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--n-mc", ev_n_mc);
  ev->add_option("--out", ev_out, "write the metrics JSON here (default stdout)");

  // compare
  auto* cmp = app.add_subcommand("compare", "rank models across datasets");
  std::string cmp_metric = "nll_t";
  std::string cmp_dir = "min";
  std::string cmp_out;
  std::vector<std::string> cmp_files;
  cmp->add_option("--metric", cmp_metric);
  cmp->add_option("--dir", cmp_dir, "min | max");
  cmp->add_option("--out", cmp_out);
  cmp->add_option("files", cmp_files, "result record files")->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  bool gc_all = false;
  double gc_tol = 1e-4;
  gc->add_flag("--all", gc_all);
  gc->add_option("--tol", gc_tol);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      pointlab::MarkedDataset ds;
      if (sim_params == "benchmark-hawkes") {
        ds = pointlab::simulate_hawkes_dataset(pointlab::benchmark_hawkes_params(),
                                               sim_sequences, sim_t_end, sim_seed);
      } else if (sim_params.rfind("poisson:", 0) == 0) {
        std::vector<double> rates;
        std::stringstream ss(sim_params.substr(8));
        std::string tok;
        while (std::getline(ss, tok, ',')) rates.push_back(std::stod(tok));
        ds.num_marks = static_cast<int>(rates.size());
        for (int i = 0; i < sim_sequences; ++i)
          ds.sequences.push_back(
              pointlab::simulate_poisson(rates, sim_t_end, sim_seed + i));
      } else if (sim_params == "bimodal") {
        ds = pointlab::simulate_bimodal_renewal_dataset(sim_sequences, 50, sim_seed);
      } else {
        throw std::runtime_error("unknown --params: " + sim_params);
      }
      pointlab::save_dataset(ds, sim_out);
      std::cout << "wrote " << ds.sequences.size() << " sequences to " << sim_out << "\n";
    } else if (prep->parsed()) {
      auto ds = pointlab::preprocess(pointlab::load_dataset(prep_in), prep_top_marks,
                                     prep_scale);
      pointlab::save_dataset(ds, prep_out);
      std::cout << "wrote " << ds.sequences.size() << " sequences, K=" << ds.num_marks
                << " to " << prep_out << "\n";
    } else if (tr->parsed()) {
      auto cfg = pointlab::experiment_config_from_json(slurp(tr_config));
      if (!tr_out_override.empty()) cfg.out_dir = tr_out_override;
      std::cout << "results in " << pointlab::run_experiment(cfg) << "\n";
    } else if (ev->parsed()) {
      nlohmann::json ck = nlohmann::json::parse(slurp(ev_checkpoint));
      auto spec = pointlab::model_spec_from_json(ck.at("spec").dump());
      auto params = pointlab::ParamStore::from_json(ck.at("params").dump());
      auto ds = pointlab::load_dataset(ev_data);
      std::vector<std::size_t> all(ds.sequences.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      auto rep = pointlab::evaluate_model(spec, ds, params, all, ev_n_mc);
      const std::string text = pointlab::metrics_report_to_json(rep);
      if (ev_out.empty())
        std::cout << text << "\n";
      else
        spit(ev_out, text + "\n");
    } else if (cmp->parsed()) {
      if (cmp_dir != "min" && cmp_dir != "max")
        throw std::runtime_error("--dir must be min or max");
      auto out = pointlab::compare_results(cmp_files, cmp_metric, cmp_dir == "max");
      const std::string text = pointlab::compare_output_to_json(out);
      if (cmp_out.empty())
        std::cout << text << "\n";
      else
        spit(cmp_out, text + "\n");
    } else if (gc->parsed()) {
      auto failures = pointlab::gradcheck_all(gc_tol);
      if (failures.empty()) {
        std::cout << "gradcheck: all decoder families pass at tol " << gc_tol << "\n";
      } else {
        for (const std::string& f : failures) std::cerr << "FAIL " << f << "\n";
        return 1;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
