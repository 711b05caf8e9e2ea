#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pointlab/metrics.hpp"
#include "pointlab/model.hpp"
#include "pointlab/stats.hpp"
#include "pointlab/train.hpp"

namespace pointlab {

struct ExperimentConfig {
  std::vector<std::string> dataset_paths;
  std::vector<ModelSpec> templates;
  HyperGrids grids;
  std::vector<std::uint64_t> seeds = {0};
  std::string out_dir = "results";
  int n_configs = 5;
  int n_mc_eval = 512;
  double val_fraction = 0.15;
  double test_fraction = 0.15;
  TrainSchedule schedule;

  void validate() const;  // legality of every template, non-empty seeds
};

ExperimentConfig experiment_config_from_json(const std::string& text);
std::string experiment_config_to_json(const ExperimentConfig& cfg);

// Canonical short name, e.g. "TO-GRU-RMTPP" or "HAWKES".
std::string spec_name(const ModelSpec& spec);

// For each (template, dataset, seed): split, random_search, train, evaluate.
// Writes one JSONL record per cell plus a summary file; cells whose record
// already exists are skipped (crash-resume). Returns the results directory.
std::string run_experiment(const ExperimentConfig& cfg);

struct CompareOutput {
  RankTable table;                         // models x datasets
  FriedmanResult friedman;
  std::vector<HolmEntry> holm;
  CdDiagram cd;
  std::map<std::string, RankSummary> aggregation;           // raw metric
  std::map<std::string, RankSummary> standardized;          // standardized NLL
};

// results files hold JSONL records with model/dataset/seed/metrics fields.
CompareOutput compare_results(const std::vector<std::string>& result_files,
                              const std::string& metric, bool higher_better);

std::string compare_output_to_json(const CompareOutput& out);

struct GradcheckResult {
  std::string param;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Central finite differences on every raw parameter scalar of a down-sized
// model instance against the tape gradients of (nll_t + nll_m).
std::vector<GradcheckResult> gradcheck_model(const ModelSpec& spec, int num_marks,
                                             const EventSequence& seq,
                                             double tol = 1e-4, double eps = 1e-5);

// All-decoder gradcheck over a default 3-event, K=2 fixture; returns the
// failures (empty means pass).
std::vector<std::string> gradcheck_all(double tol = 1e-4);

}  // namespace pointlab
