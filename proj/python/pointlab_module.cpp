#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pointlab/harness.hpp"
#include "pointlab/hawkes.hpp"
#include "pointlab/metrics.hpp"
#include "pointlab/model.hpp"
#include "pointlab/stats.hpp"
#include "pointlab/train.hpp"

namespace py = pybind11;
using namespace pointlab;

PYBIND11_MODULE(_pointlab, m) {
  m.doc() = "marked temporal point process toolkit";

  py::class_<Event>(m, "Event")
      .def(py::init<>())
      .def(py::init([](double t, int k) { return Event{t, k}; }), py::arg("t"),
           py::arg("k"))
      .def_readwrite("t", &Event::t)
      .def_readwrite("k", &Event::k);

  py::class_<EventSequence>(m, "EventSequence")
      .def(py::init<>())
      .def_readwrite("events", &EventSequence::events)
      .def_readwrite("t_end", &EventSequence::t_end)
      .def("inter_arrivals", &EventSequence::inter_arrivals)
      .def("__len__", [](const EventSequence& s) { return s.events.size(); });

  py::class_<MarkedDataset>(m, "MarkedDataset")
      .def(py::init<>())
      .def_readwrite("sequences", &MarkedDataset::sequences)
      .def_readwrite("num_marks", &MarkedDataset::num_marks)
      .def_readwrite("train_idx", &MarkedDataset::train_idx)
      .def_readwrite("val_idx", &MarkedDataset::val_idx)
      .def_readwrite("test_idx", &MarkedDataset::test_idx);

  m.def("dataset_from_json", &dataset_from_json);
  m.def("dataset_to_json", &dataset_to_json);
  m.def("load_dataset", &load_dataset);
  m.def("save_dataset", &save_dataset);
  m.def("preprocess", &preprocess, py::arg("raw"), py::arg("top_marks"),
        py::arg("scale_to"));
  m.def("split", &split, py::arg("ds"), py::arg("train_frac"), py::arg("val_frac"),
        py::arg("test_frac"), py::arg("seed"));

  py::class_<HawkesParams>(m, "HawkesParams")
      .def(py::init<>())
      .def_readwrite("mu", &HawkesParams::mu)
      .def_readwrite("alpha", &HawkesParams::alpha)
      .def_readwrite("beta", &HawkesParams::beta)
      .def("dim", &HawkesParams::dim);

  m.def("benchmark_hawkes_params", &benchmark_hawkes_params);
  m.def("branching_spectral_radius", &branching_spectral_radius);
  m.def("simulate_hawkes", &simulate_hawkes, py::arg("params"), py::arg("t_end"),
        py::arg("seed"));
  m.def("simulate_hawkes_dataset", &simulate_hawkes_dataset, py::arg("params"),
        py::arg("n_sequences"), py::arg("t_end"), py::arg("seed"));
  m.def("simulate_poisson", &simulate_poisson, py::arg("mu"), py::arg("t_end"),
        py::arg("seed"));
  m.def("simulate_bimodal_renewal_dataset", &simulate_bimodal_renewal_dataset,
        py::arg("n_sequences"), py::arg("events_per_seq"), py::arg("seed"));
  m.def("hawkes_exact_nll", [](const HawkesParams& p, const EventSequence& s) {
    NllSplit r = hawkes_exact_nll(p, s);
    return py::make_tuple(r.nll_t, r.nll_m);
  });
  m.def("hawkes_compensator_increments", &hawkes_compensator_increments);

  m.def("model_spec_from_json", &model_spec_from_json);
  m.def("model_spec_to_json", &model_spec_to_json);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def(py::init([](const std::string& json) { return model_spec_from_json(json); }),
           py::arg("json"))
      .def("to_json", [](const ModelSpec& s) { return model_spec_to_json(s); })
      .def_readwrite("seed", &ModelSpec::seed)
      .def_readwrite("n_mc", &ModelSpec::n_mc);

  py::class_<ParamStore>(m, "ParamStore")
      .def("to_json", &ParamStore::to_json)
      .def_static("from_json", &ParamStore::from_json)
      .def("num_scalars", &ParamStore::num_scalars)
      .def("exposed", &ParamStore::exposed);

  m.def("build_params",
        [](const ModelSpec& spec, int k) { return build_params(spec, k); });

  m.def("sequence_nll",
        [](const ModelSpec& spec, int num_marks, ParamStore& params,
           const EventSequence& seq, int n_mc, std::uint64_t mc_seed) {
          NllSplit r = sequence_nll_value(spec, num_marks, params, seq, n_mc, mc_seed);
          return py::make_tuple(r.nll_t, r.nll_m);
        },
        py::arg("spec"), py::arg("num_marks"), py::arg("params"), py::arg("seq"),
        py::arg("n_mc") = 32, py::arg("mc_seed") = 0);

  py::class_<TrainReport>(m, "TrainReport")
      .def_readonly("best_epoch", &TrainReport::best_epoch)
      .def_readonly("best_val_nll", &TrainReport::best_val_nll)
      .def_readonly("wall_time_s", &TrainReport::wall_time_s)
      .def("num_epochs", [](const TrainReport& r) { return r.epochs.size(); })
      .def("to_jsonl", [](const TrainReport& r) { return train_report_to_jsonl(r); });

  m.def("train",
        [](const ModelSpec& spec, const MarkedDataset& ds, ParamStore& params,
           int max_epochs) {
          TrainSchedule s;
          s.max_epochs = max_epochs;
          return train(spec, ds, params, s);
        },
        py::arg("spec"), py::arg("ds"), py::arg("params"), py::arg("max_epochs") = 500);

  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("nll_t", &MetricsReport::nll_t)
      .def_readonly("nll_m", &MetricsReport::nll_m)
      .def_readonly("pce", &MetricsReport::pce)
      .def_readonly("ece", &MetricsReport::ece)
      .def_readonly("f1", &MetricsReport::f1)
      .def_readonly("n_events", &MetricsReport::n_events)
      .def("to_json", [](const MetricsReport& r) { return metrics_report_to_json(r); });

  m.def("evaluate_model",
        [](const ModelSpec& spec, const MarkedDataset& ds, ParamStore& params,
           const std::vector<std::size_t>& indices, int n_mc) {
          return evaluate_model(spec, ds, params, indices, n_mc);
        },
        py::arg("spec"), py::arg("ds"), py::arg("params"), py::arg("indices"),
        py::arg("n_mc_eval") = 512);

  m.def("pce", [](const std::vector<double>& v, int M) { return pce(v, M); },
        py::arg("cdf_values"), py::arg("M") = 50);
  m.def("ks_uniform", [](const std::vector<double>& v) {
    KsResult r = ks_uniform(v);
    return py::make_tuple(r.statistic, r.p_value);
  });

  py::class_<RankTable>(m, "RankTable")
      .def(py::init([](std::vector<std::string> names,
                       std::vector<std::vector<double>> ranks) {
             RankTable t;
             t.decoders = std::move(names);
             t.ranks = std::move(ranks);
             t.validate();
             return t;
           }),
           py::arg("decoders"), py::arg("ranks"))
      .def("mean_ranks", &RankTable::mean_ranks);

  m.def("friedman", [](const RankTable& t) {
    FriedmanResult r = friedman(t);
    return py::make_tuple(r.statistic, r.p_value);
  });
  m.def("cd_diagram_json",
        [](const RankTable& t, double alpha) {
          return cd_diagram_to_json(cd_diagram_data(t, alpha));
        },
        py::arg("table"), py::arg("alpha") = 0.1);

  m.def("gradcheck_all", [](double tol) { return gradcheck_all(tol); },
        py::arg("tol") = 1e-4);
  m.def("run_experiment_json", [](const std::string& config_json) {
    return run_experiment(experiment_config_from_json(config_json));
  });
}
