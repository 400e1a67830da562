import io
import json

import numpy as np
import pytest
import scipy.stats

from fcmgen.data import LongitudinalDataset, Participant, SyntheticSpec, generate_synthetic
from fcmgen.errors import ConfigError, DimensionError
from fcmgen.evaluation import evaluate_population, normality_screen, trajectory_report
from fcmgen.fcm import ActivationSpec, SimulationSpec, simulate_fcm
from fcmgen.ga import GaConfig, LearnResult
from fcmgen.normality import dagostino_pearson
from fcmgen.population import one_fits_all, one_for_each


@pytest.fixture(scope="module")
def synth():
    return generate_synthetic(SyntheticSpec(p=12, n=4, T=2, density=0.6, seed=21))


def test_perfect_population_zero_report(synth):
    ds, truth = synth
    rep = evaluate_population(ds, truth)
    assert np.all(rep.per_concept_per_wave == 0.0)
    assert rep.max_abs_error == 0.0 and rep.per_concept_per_wave.shape == (2, 4)


def test_aggregates_recomputable(synth):
    ds, truth = synth
    noisy = {k: np.clip(w + 0.1, -1, 1) for k, w in truth.items()}
    rep = evaluate_population(ds, noisy)
    m = rep.per_concept_per_wave
    assert rep.mean_abs_error == pytest.approx(np.abs(m).mean())
    assert rep.max_abs_error == pytest.approx(np.abs(m).max())
    np.testing.assert_allclose(rep.per_concept_mean, m.mean(axis=0))
    d = rep.to_dict()
    assert set(d) >= {"per_concept_per_wave", "mean_abs_error", "max_abs_error", "per_concept_mean", "sample_ids"}
    buf = io.StringIO()
    rep.write_json(buf)
    assert json.loads(buf.getvalue())["max_abs_error"] == rep.max_abs_error


def test_signed_mean_difference(synth):
    ds, truth = synth
    ids = ds.ids()[:3]
    sub = LongitudinalDataset(ds.concept_labels, [ds.get(i) for i in ids])
    w = np.zeros((4, 4))
    rep = evaluate_population(sub, LearnResult(w, 0.5, 0, False))
    diffs = []
    for i in ids:
        sim = simulate_fcm(ds.get(i).baseline, w, ActivationSpec(), SimulationSpec(2))
        diffs.append(sim[1:] - ds.get(i).waves[1:])
    np.testing.assert_allclose(rep.per_concept_per_wave, np.mean(diffs, axis=0), atol=1e-15)


def test_homogeneous_shared_matrix_equals_single_residual():
    ds1, _ = generate_synthetic(SyntheticSpec(p=1, n=3, T=2, seed=2))
    w = ds1.participants[0].waves
    ds = LongitudinalDataset(ds1.concept_labels, [Participant(f"q{i}", w.copy()) for i in range(5)])
    res = one_fits_all(ds, GaConfig(max_generations=50, gen_size=10, seed=1), restarts=1)
    rep = evaluate_population(ds, res)
    single = simulate_fcm(w[0], res.weights, ActivationSpec(), SimulationSpec(2))[1:] - w[1:]
    np.testing.assert_allclose(rep.per_concept_per_wave, single, atol=1e-15)


def test_sampling(synth):
    ds, truth = synth
    rep = evaluate_population(ds, truth, sample_size=5, rng=np.random.default_rng(0))
    assert len(rep.sample_ids) == len(set(rep.sample_ids)) == 5
    with pytest.raises(ConfigError):
        evaluate_population(ds, truth, sample_size=13)


def test_permutation_invariant_full_sample(synth):
    ds, truth = synth
    noisy = {k: np.clip(w * 0.9, -1, 1) for k, w in truth.items()}
    rev = LongitudinalDataset(ds.concept_labels, list(reversed(ds.participants)))
    a = evaluate_population(ds, noisy)
    b = evaluate_population(rev, noisy)
    assert a.per_concept_per_wave.tobytes() == b.per_concept_per_wave.tobytes()


def test_dimension_mismatch(synth):
    ds, _ = synth
    with pytest.raises(DimensionError):
        evaluate_population(ds, LearnResult(np.zeros((3, 3)), 1.0, 0, True))


def test_one_for_each_beats_one_fits_all_on_heterogeneous_data():
    ds, _ = generate_synthetic(SyntheticSpec(p=6, n=3, T=2, density=1.0, seed=13))
    cfg = GaConfig(max_generations=1500, seed=2)
    ofe = evaluate_population(ds, one_for_each(ds, cfg, restarts=1))
    ofa = evaluate_population(ds, one_fits_all(ds, cfg, restarts=6))
    assert ofe.max_abs_error < ofa.max_abs_error


# --- normality ---------------------------------------------------------------

def test_dagostino_normal_not_rejected():
    x = np.random.default_rng(0).standard_normal(5000)
    k2, p = dagostino_pearson(x)
    assert p > 0.05 and k2 >= 0


def test_dagostino_uniform_rejected():
    _, p = dagostino_pearson(np.random.default_rng(0).random(5000))
    assert p < 0.001


def test_dagostino_degenerate_inputs():
    with pytest.raises(ValueError, match="variance"):
        dagostino_pearson(np.full(50, 0.3))
    with pytest.raises(ValueError, match="at least"):
        dagostino_pearson(np.arange(19.0))


@pytest.mark.parametrize("dist", ["normal", "uniform", "exponential", "t3", "lognormal"])
@pytest.mark.parametrize("size", [20, 57, 500])
def test_dagostino_matches_reference(dist, size):
    rng = np.random.default_rng(size)
    x = {
        "normal": lambda: rng.normal(2.0, 3.0, size),
        "uniform": lambda: rng.random(size),
        "exponential": lambda: rng.exponential(size=size),
        "t3": lambda: rng.standard_t(3, size),
        "lognormal": lambda: rng.lognormal(size=size),
    }[dist]()
    k2, p = dagostino_pearson(x)
    ref = scipy.stats.normaltest(x)
    assert k2 == pytest.approx(ref.statistic, rel=1e-9)
    assert p == pytest.approx(ref.pvalue, rel=1e-6, abs=1e-300)
    assert 0.0 <= p <= 1.0


def test_normality_screen(synth):
    ds, _ = generate_synthetic(SyntheticSpec(p=40, n=3, T=2, seed=1))
    res = normality_screen(ds)
    assert res.statistic.shape == res.p_value.shape == (3, 3)
    assert np.array_equal(res.reject_at_005, res.p_value < 0.05)
    col = ds.array()[:, 1, 2]
    assert res.p_value[1, 2] == pytest.approx(scipy.stats.normaltest(col).pvalue, rel=1e-6)
    buf = io.StringIO()
    res.write_csv(buf)
    assert len(buf.getvalue().splitlines()) == 1 + 9


# --- trajectory table ------------------------------------------------------------

def test_trajectory_report_perfect_fit(synth):
    ds, truth = synth
    part = ds.participants[0]
    table = trajectory_report(part, [("truth", truth[part.participant_id]), ("zero", np.zeros((4, 4)))])
    np.testing.assert_array_equal(table.simulated["truth"], part.waves)
    assert table.deviation("truth").max() == 0.0
    rows = list(table.rows())
    assert rows[0] == ["concept", "wave", "ground_truth", "truth", "zero"]
    assert len(rows) == 1 + 4 * 3


def test_trajectory_report_errors(synth):
    ds, _ = synth
    with pytest.raises(ValueError):
        trajectory_report(ds.participants[0], [])
    with pytest.raises(DimensionError):
        trajectory_report(ds.participants[0], [("bad", np.zeros((2, 2)))])
