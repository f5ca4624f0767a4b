import json
import math

import numpy as np
import pytest

import vamp_gnp.harness as harness_mod
from vamp_gnp import (
    AggregateRow,
    BinaryNoise,
    DegenerateConfigError,
    DivergenceError,
    GaussianNoise,
    LaplaceNoise,
    ProblemInstance,
    SweepConfig,
    SweepRecord,
    aggregate_records,
    config_from_dict,
    config_to_dict,
    emit_outputs,
    gen_instance,
    matched_variance,
    nrmse,
    run_sweep,
    trial_seed,
)
from vamp_gnp.harness import THREADS_ENV_VAR, _worker_count, noise_from_dict

TINY = dict(m=16, n=32, snr_grid_db=(0.0, 10.0), trials=2)


def _tiny_config(**overrides):
    merged = {**TINY, **overrides}
    return SweepConfig(**merged)


# -- seed derivation ---------------------------------------------------------

def test_trial_seed_deterministic():
    assert trial_seed(42, 1, 7) == trial_seed(42, 1, 7)


def test_trial_seed_distinct_across_axes():
    seeds = {trial_seed(base, i, t) for base in (0, 42) for i in range(5) for t in range(20)}
    assert len(seeds) == 2 * 5 * 20


# -- instance generation --------------------------------------------------------

@pytest.mark.parametrize("noise", [GaussianNoise(1.0), LaplaceNoise(0.0, 1.0), BinaryNoise(1.0)],
                         ids=lambda n: n.kind)
def test_snr_is_exact(noise):
    config = _tiny_config(noise_model=noise)
    for snr_db in (0.0, 10.0, 17.5):
        gen = gen_instance(123, config, snr_db)
        inst = gen.instance
        realized = 10.0 * math.log10(
            np.sum((inst.A @ inst.true_x) ** 2) / np.sum(inst.true_w ** 2))
        assert realized == pytest.approx(snr_db, abs=1e-9)


def test_realized_binary_level_matches_noise_draw():
    config = _tiny_config(noise_model=BinaryNoise(1.0))
    gen = gen_instance(5, config, 10.0)
    assert isinstance(gen.noise_prior, BinaryNoise)
    assert np.all(np.abs(gen.instance.true_w) == gen.noise_prior.s)


def test_realized_gaussian_variance_scales_with_kappa_squared():
    config = _tiny_config(noise_model=GaussianNoise(2.0))
    gen = gen_instance(6, config, 5.0)
    kappa = math.sqrt(gen.noise_prior.variance / 2.0)
    nominal = gen.instance.true_w / kappa
    # undoing the rescale recovers a draw whose SNR definition fixes kappa
    ax = gen.instance.A @ gen.instance.true_x
    expected_kappa = np.linalg.norm(ax) / (10.0 ** (5.0 / 20.0) * np.linalg.norm(nominal))
    assert kappa == pytest.approx(expected_kappa, rel=1e-12)


def test_same_seed_same_instance():
    config = _tiny_config(noise_model=LaplaceNoise(0.0, 1.0))
    a = gen_instance(99, config, 10.0)
    b = gen_instance(99, config, 10.0)
    assert np.array_equal(a.instance.A, b.instance.A)
    assert np.array_equal(a.instance.y, b.instance.y)
    assert np.array_equal(a.instance.true_x, b.instance.true_x)
    assert np.array_equal(a.instance.true_w, b.instance.true_w)
    assert a.noise_prior == b.noise_prior


def test_all_zero_prior_exhausts_retry_budget():
    config = _tiny_config(rho=1.0)
    with pytest.raises(DegenerateConfigError, match="64 attempts"):
        gen_instance(0, config, 10.0)


def test_resample_counter_records_rejected_draws():
    config = SweepConfig(m=2, n=4, rho=0.9, snr_grid_db=(10.0,), trials=1)
    hit = None
    for seed in range(50):
        gen = gen_instance(seed, config, 10.0)
        if gen.resamples > 0:
            hit = gen
            break
    assert hit is not None
    assert np.any(hit.instance.true_x != 0.0)


# -- matched variance -------------------------------------------------------------

def test_matched_variance():
    assert matched_variance(GaussianNoise(1.7)) == 1.7
    assert matched_variance(LaplaceNoise(0.0, 2.0)) == 8.0
    assert matched_variance(BinaryNoise(3.0)) == 9.0


# -- scoring -------------------------------------------------------------------------

def _score_rig():
    A = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    x = np.array([1.0, 0.0, 0.0])
    return ProblemInstance(A=A, y=A @ x, true_x=x, true_w=np.zeros(2))


def test_nrmse_perfect_recovery():
    inst = _score_rig()
    assert nrmse(inst.true_x, inst) == 0.0


def test_nrmse_zero_estimate():
    inst = _score_rig()
    assert nrmse(np.zeros(3), inst) == 1.0


def test_nrmse_orthogonal_estimate():
    inst = _score_rig()
    assert nrmse(np.array([0.0, 1.0, 0.0]), inst) == pytest.approx(math.sqrt(2.0), rel=1e-12)


def test_nrmse_requires_ground_truth():
    inst = ProblemInstance(A=np.ones((2, 4)), y=np.ones(2))
    with pytest.raises(ValueError, match="ground truth"):
        nrmse(np.zeros(4), inst)


def test_nrmse_rejects_zero_scale():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((2, 4))
    w = rng.standard_normal(2)
    inst = ProblemInstance(A=A, y=w, true_x=np.zeros(4), true_w=w)
    with pytest.raises(ValueError, match="zero measurement norm"):
        nrmse(np.zeros(4), inst)


# -- aggregation -----------------------------------------------------------------------

def _record(nrmse_value, snr_db=10.0, algorithm="gnp", trial=0):
    return SweepRecord(snr_db=snr_db, algorithm=algorithm, noise_model="gaussian",
                       trial=trial, seed=1, nrmse=nrmse_value, iterations=10, converged=True)


def test_aggregate_hand_example():
    rows = aggregate_records([_record(0.2, trial=0), _record(0.4, trial=1)])
    assert len(rows) == 1
    assert rows[0].mean_nrmse == pytest.approx(0.3, rel=1e-12)
    assert rows[0].stderr_nrmse == pytest.approx(0.1, rel=1e-12)
    assert rows[0].n_trials == 2


def test_aggregate_single_trial_has_zero_stderr():
    rows = aggregate_records([_record(0.5)])
    assert rows[0].stderr_nrmse == 0.0
    assert rows[0].n_trials == 1


def test_aggregate_excludes_nan_rows():
    rows = aggregate_records([_record(0.2, trial=0), _record(float("nan"), trial=1)])
    assert rows[0].n_trials == 1
    assert rows[0].mean_nrmse == pytest.approx(0.2)


def test_aggregate_sorted_by_snr_then_algorithm():
    rows = aggregate_records([
        _record(0.1, snr_db=10.0, algorithm="standard"),
        _record(0.2, snr_db=0.0, algorithm="gnp"),
        _record(0.3, snr_db=10.0, algorithm="gnp"),
    ])
    assert [(r.snr_db, r.algorithm) for r in rows] == [
        (0.0, "gnp"), (10.0, "gnp"), (10.0, "standard")]


# -- sweep execution ----------------------------------------------------------------------

def test_sweep_cardinality_single_record():
    config = SweepConfig(m=16, n=32, snr_grid_db=(10.0,), trials=1, algorithms=("gnp",))
    records, aggregates = run_sweep(config)
    assert len(records) == 1
    assert len(aggregates) == 1


def test_sweep_pairs_algorithms_on_identical_instances():
    records, _ = run_sweep(_tiny_config())
    by_key = {}
    for rec in records:
        by_key.setdefault((rec.snr_db, rec.trial), []).append(rec)
    for pair in by_key.values():
        assert len(pair) == 2
        assert pair[0].seed == pair[1].seed
        assert {p.algorithm for p in pair} == {"gnp", "standard"}


def test_sweep_aggregates_recomputable_from_rows():
    records, aggregates = run_sweep(_tiny_config())
    for agg in aggregates:
        vals = [r.nrmse for r in records
                if r.snr_db == agg.snr_db and r.algorithm == agg.algorithm
                and math.isfinite(r.nrmse)]
        assert agg.mean_nrmse == pytest.approx(float(np.mean(vals)), abs=1e-12)
        expected_stderr = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        assert agg.stderr_nrmse == pytest.approx(expected_stderr, abs=1e-12)


def test_sweep_records_sorted_and_scored():
    records, _ = run_sweep(_tiny_config())
    keys = [(r.snr_db, r.algorithm, r.trial) for r in records]
    assert keys == sorted(keys)
    for rec in records:
        assert math.isfinite(rec.nrmse)
        assert not rec.diverged
        assert rec.max_residual_rel <= 1e-8


def test_divergent_trial_becomes_flagged_row(monkeypatch):
    def explode(instance, signal_prior, noise_prior, config, cache=None):
        raise DivergenceError(4, (), "synthetic")

    monkeypatch.setattr(harness_mod, "run_gnp_vamp", explode)
    records, aggregates = run_sweep(_tiny_config(snr_grid_db=(10.0,), trials=1))
    gnp_rows = [r for r in records if r.algorithm == "gnp"]
    assert len(gnp_rows) == 1
    row = gnp_rows[0]
    assert row.diverged and not row.converged
    assert math.isnan(row.nrmse)
    assert row.iterations == 4
    assert {a.algorithm for a in aggregates} == {"standard"}


# -- worker count ------------------------------------------------------------------------

def test_worker_count_auto(monkeypatch):
    monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
    assert 1 <= _worker_count(8) <= 8
    assert _worker_count(1) == 1


def test_worker_count_explicit(monkeypatch):
    monkeypatch.setenv(THREADS_ENV_VAR, "3")
    assert _worker_count(8) == 3
    assert _worker_count(2) == 2


def test_worker_count_rejects_garbage(monkeypatch):
    monkeypatch.setenv(THREADS_ENV_VAR, "abc")
    with pytest.raises(ValueError, match="integer"):
        _worker_count(4)
    monkeypatch.setenv(THREADS_ENV_VAR, "-1")
    with pytest.raises(ValueError, match=">= 0"):
        _worker_count(4)


# -- config validation ----------------------------------------------------------------------

def test_sweep_config_validation():
    with pytest.raises(ValueError, match="0 < M < N"):
        SweepConfig(m=32, n=32)
    with pytest.raises(ValueError, match="rho"):
        SweepConfig(rho=1.5)
    with pytest.raises(ValueError, match="trials"):
        SweepConfig(trials=0)
    with pytest.raises(ValueError, match="snr_grid_db"):
        SweepConfig(snr_grid_db=())
    with pytest.raises(ValueError, match="unknown algorithm"):
        SweepConfig(algorithms=("gnp", "magic"))


# -- serialization ----------------------------------------------------------------------------

@pytest.mark.parametrize("model", [GaussianNoise(1.5), LaplaceNoise(-0.5, 2.0), BinaryNoise(0.7)],
                         ids=lambda n: n.kind)
def test_noise_dict_round_trip(model):
    from vamp_gnp.harness import _noise_to_dict

    assert noise_from_dict(_noise_to_dict(model)) == model


def test_noise_from_dict_rejects_unknown_kind():
    with pytest.raises(ValueError, match="unknown noise model kind"):
        noise_from_dict({"kind": "cauchy"})


def test_config_dict_round_trip():
    config = _tiny_config(noise_model=LaplaceNoise(0.0, 2.0), base_seed=7)
    clone = config_from_dict(config_to_dict(config))
    assert clone.m == config.m and clone.n == config.n
    assert clone.snr_grid_db == config.snr_grid_db
    assert clone.noise_model == config.noise_model
    assert clone.algorithms == config.algorithms
    assert clone.base_seed == config.base_seed
    assert clone.engine.max_iters == config.engine.max_iters
    assert clone.engine.tol == config.engine.tol
    assert clone.engine.bounds == config.engine.bounds


# -- output files -------------------------------------------------------------------------------

def test_emit_outputs_files_and_row_counts(tmp_path):
    config = SweepConfig(m=16, n=32, snr_grid_db=(10.0,), trials=1, algorithms=("gnp",))
    records, aggregates = run_sweep(config)
    paths = emit_outputs(records, aggregates, tmp_path, config)
    trials_lines = paths["trials"].read_text().splitlines()
    assert len(trials_lines) == 2
    assert trials_lines[0] == "snr_db,algorithm,noise_model,trial,seed,nrmse,iterations,converged"
    agg_lines = paths["aggregate"].read_text().splitlines()
    assert len(agg_lines) == 2
    assert agg_lines[0] == "snr_db,algorithm,mean_nrmse,stderr_nrmse,n_trials"
    fields = trials_lines[1].split(",")
    assert float(fields[5]) == records[0].nrmse
    assert fields[7] in ("true", "false")


def test_manifest_round_trip_reproduces_outputs(tmp_path):
    config = _tiny_config(noise_model=BinaryNoise(1.0), base_seed=11)
    records, aggregates = run_sweep(config)
    paths = emit_outputs(records, aggregates, tmp_path / "first", config)
    manifest = json.loads(paths["manifest"].read_text())
    assert manifest["version"]
    rebuilt = config_from_dict(manifest["config"])
    records2, aggregates2 = run_sweep(rebuilt)
    paths2 = emit_outputs(records2, aggregates2, tmp_path / "second", rebuilt)
    assert paths["trials"].read_bytes() == paths2["trials"].read_bytes()
    assert paths["aggregate"].read_bytes() == paths2["aggregate"].read_bytes()


def test_outputs_independent_of_worker_count(tmp_path, monkeypatch):
    config = _tiny_config(noise_model=LaplaceNoise(0.0, 1.0))
    monkeypatch.setenv(THREADS_ENV_VAR, "1")
    serial_records, serial_aggs = run_sweep(config)
    serial = emit_outputs(serial_records, serial_aggs, tmp_path / "serial", config)
    monkeypatch.setenv(THREADS_ENV_VAR, "3")
    pooled_records, pooled_aggs = run_sweep(config)
    pooled = emit_outputs(pooled_records, pooled_aggs, tmp_path / "pooled", config)
    assert serial["trials"].read_bytes() == pooled["trials"].read_bytes()
    assert serial["aggregate"].read_bytes() == pooled["aggregate"].read_bytes()


def test_emit_plot_renders_figure(tmp_path):
    aggregates = [
        AggregateRow(0.0, "gnp", 0.5, 0.05, 2),
        AggregateRow(10.0, "gnp", 0.2, 0.02, 2),
        AggregateRow(0.0, "standard", 0.6, 0.05, 2),
        AggregateRow(10.0, "standard", 0.3, 0.02, 2),
    ]
    config = _tiny_config()
    paths = emit_outputs([], aggregates, tmp_path, config, emit_plot=True)
    figure = paths["figure"]
    assert figure.name == "nrmse_vs_snr.png"
    assert figure.stat().st_size > 0
