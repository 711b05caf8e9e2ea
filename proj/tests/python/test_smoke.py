import json
import math

import pointlab as pl


def test_simulation_and_exact_nll():
    p = pl.benchmark_hawkes_params()
    assert p.dim() == 5
    assert pl.branching_spectral_radius(p) > 1.0

    seq = pl.simulate_hawkes(p, 10.0, 1)
    assert len(seq) > 0
    assert seq.t_end == 10.0
    taus = seq.inter_arrivals()
    assert all(t > 0 for t in taus)

    nll_t, nll_m = pl.hawkes_exact_nll(p, seq)
    assert math.isfinite(nll_t) and math.isfinite(nll_m)

    incs = pl.hawkes_compensator_increments(p, seq)
    assert len(incs) == len(seq)


def test_dataset_roundtrip_and_split():
    ds = pl.simulate_hawkes_dataset(pl.benchmark_hawkes_params(), 10, 10.0, 3)
    assert ds.num_marks == 5
    back = pl.dataset_from_json(pl.dataset_to_json(ds))
    assert len(back.sequences) == len(ds.sequences)

    split = pl.split(ds, 0.6, 0.2, 0.2, 0)
    n = len(split.train_idx) + len(split.val_idx) + len(split.test_idx)
    assert n == len(ds.sequences)


def test_model_train_evaluate():
    ds = pl.simulate_hawkes_dataset(pl.benchmark_hawkes_params(), 12, 5.0, 7)
    ds = pl.split(ds, 0.6, 0.2, 0.2, 1)

    spec = pl.ModelSpec(json.dumps({
        "decoder": "RMTPP", "encoding": "TO", "history": "GRU",
        "d_t": 4, "d_k": 3, "d_h": 4, "d_hidden": 4, "seed": 2,
    }))
    params = pl.build_params(spec, ds.num_marks)
    assert params.num_scalars() > 0

    seq = ds.sequences[0]
    nll_t, nll_m = pl.sequence_nll(spec, ds.num_marks, params, seq)
    assert math.isfinite(nll_t) and math.isfinite(nll_m)

    report = pl.train(spec, ds, params, max_epochs=3)
    assert report.num_epochs() >= 1
    assert math.isfinite(report.best_val_nll)

    metrics = pl.evaluate_model(spec, ds, params, ds.test_idx, n_mc_eval=32)
    assert metrics.n_events > 0
    assert 0.0 <= metrics.f1 <= 1.0
    parsed = json.loads(metrics.to_json())
    assert parsed["f1_averaging"] == "micro"


def test_metrics_and_stats():
    assert abs(pl.pce([0.0] * 100, 50) - 0.49) < 1e-12
    stat, p = pl.ks_uniform([i / 100 for i in range(1, 101)])
    assert p > 0.5

    table = pl.RankTable(["a", "b", "c"], [[1, 2, 3], [1, 2, 3], [2, 1, 3]])
    assert table.mean_ranks()[2] == 3.0
    stat, p = pl.friedman(table)
    assert stat > 0.0 and 0.0 < p <= 1.0
    cd = json.loads(pl.cd_diagram_json(table))
    assert cd["tie_correction"] == "none"


def test_gradcheck_all():
    assert pl.gradcheck_all(1e-4) == []
