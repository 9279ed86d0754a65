# v1.0.0 - Work Package 4: Verification Test (synthetic settings, evaluation, EM baseline)
import inspect

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from baseline_em import DiagGmm, em_fit, gmm_cluster, gmm_density, gmm_posterior
from controller import mixture_from_document
from errors import IndexOutOfRangeError, InsufficientDataError, LengthMismatchError, UnknownFamilyError
from evaluate import (
    align_factors,
    append_sweep_row,
    clustering_accuracy,
    conditional_l1_error,
    discretize_truth,
    exact_cdf_conditional,
    kl_monte_carlo,
    l1_distance,
    support_quantiles,
    univariate_comparison,
)
from grid import Dataset
from mixture import ParametricMixture
from models import GaussianSpec, ModelDocument, SettingSpec
from smooth import HistogramConditional
from synth import gen_weights, generate_dataset, make_setting, toy_mixture


# --------------------------------------------------------------------------
# synth
# --------------------------------------------------------------------------
def test_gen_weights():
    assert np.array_equal(gen_weights(1, seed=3), [1.0])
    draws = np.array([gen_weights(5, 10.0, seed=s) for s in range(10000)])
    assert np.all(draws > 0)
    assert np.allclose(draws.sum(axis=1), 1.0, atol=1e-12)
    # Dirichlet(10,...,10), R=5: each coordinate has variance (1/5)(4/5)/51
    se = np.sqrt(0.2 * 0.8 / 51 / 10000)
    assert np.all(np.abs(draws.mean(axis=0) - 0.2) <= 4 * se)


def test_make_setting_parameter_ranges():
    gauss = make_setting(SettingSpec(family="gaussian", N=10, R=5, seed=1))
    for row in gauss.specs:
        for spec in row:
            assert 1.0 <= spec.var <= 2.0 and -5.0 <= spec.mean <= 5.0
    gamma = make_setting(SettingSpec(family="gamma", N=4, R=3, seed=2))
    assert all(spec.shape == 5.0 and -5.0 <= spec.loc <= 0.0 and 0.1 <= spec.scale <= 0.5
               for row in gamma.specs for spec in row)
    lap = make_setting(SettingSpec(family="laplace", N=3, R=2, seed=3))
    assert all(5.0 <= spec.std ** 2 <= 10.0 for row in lap.specs for spec in row)
    gmm = make_setting(SettingSpec(family="gmm2", N=3, R=2, seed=4))
    assert all(0 <= s.mean1 <= 7 and -7 <= s.mean2 <= 0 and 1 <= s.var1 <= 4 for row in gmm.specs for s in row)

    again = make_setting(SettingSpec(family="gaussian", N=10, R=5, seed=1))
    assert np.array_equal(gauss.weights, again.weights) and gauss.specs == again.specs
    with pytest.raises(UnknownFamilyError):
        make_setting(SettingSpec(family="cauchy", N=3, R=2))


def test_generate_dataset_missing_and_labels():
    mix = make_setting(SettingSpec(family="gaussian", N=5, R=3, seed=5))
    full = generate_dataset(mix, 1000, 0.0, seed=5)
    assert full.values.shape == (1000, 5) and not np.isnan(full.values).any()

    partial = generate_dataset(mix, 10000, 0.2, seed=6)
    assert abs(partial.observed_fraction() - 0.8) <= 0.02
    assert np.all(partial.observed.any(axis=1))

    big = generate_dataset(mix, 100000, 0.0, seed=7)
    freq = np.bincount(big.labels, minlength=3) / 100000
    se = np.sqrt(mix.weights * (1 - mix.weights) / 100000)
    assert np.all(np.abs(freq - mix.weights) <= 4 * se + 1e-12)

    twice = generate_dataset(mix, 500, 0.3, seed=8)
    assert np.array_equal(np.isnan(twice.values), np.isnan(generate_dataset(mix, 500, 0.3, seed=8).values))


# --------------------------------------------------------------------------
# eval
# --------------------------------------------------------------------------
def test_kl_monte_carlo():
    mix = make_setting(SettingSpec(family="gmm2", N=3, R=2, seed=9))
    kl, stderr = kl_monte_carlo(mix, mix, 500, seed=1)
    assert kl == 0.0 and stderr == 0.0

    p = ParametricMixture([1.0], [[GaussianSpec(mean=0.0, var=1.0)]])
    q = ParametricMixture([1.0], [[GaussianSpec(mean=1.0, var=1.0)]])
    kl, stderr = kl_monte_carlo(p, q, 10000, seed=2)
    assert abs(kl - 0.5) <= 4 * stderr


def test_clustering_accuracy():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 4, size=300)
    acc, perm = clustering_accuracy(labels, labels, 4)
    assert acc == 1.0 and np.array_equal(perm, np.arange(4))

    mapping = np.array([2, 0, 3, 1])
    acc, perm = clustering_accuracy(labels, mapping[labels], 4)
    assert acc == 1.0 and np.array_equal(perm, mapping)

    truth = rng.integers(0, 5, size=10000)
    guess = rng.integers(0, 5, size=10000)
    acc, perm = clustering_accuracy(truth, guess, 5)
    assert abs(acc - 0.2) < 0.02
    assert sorted(perm.tolist()) == list(range(5))

    with pytest.raises(LengthMismatchError):
        clustering_accuracy([0, 1], [0], 2)
    with pytest.raises(IndexOutOfRangeError):
        clustering_accuracy([0, 2], [0, 1], 2)


def test_l1_errors():
    mix = make_setting(SettingSpec(family="gaussian", N=3, R=2, seed=10))
    errors = conditional_l1_error(mix, mix, [0, 1], points_per_axis=256)
    assert errors.shape == (3, 2) and np.all(np.abs(errors) <= 1e-6)

    a = HistogramConditional([1.0], np.array([0.0, 1.0]))
    b = HistogramConditional([1.0], np.array([2.0, 3.0]))
    assert abs(l1_distance(a.pdf, b.pdf, -1.0, 4.0, 50001) - 2.0) < 1e-3
    assert l1_distance(a.pdf, b.pdf, -1.0, 4.0) == l1_distance(b.pdf, a.pdf, -1.0, 4.0)

    cond = toy_mixture().conditional(0, 0)
    sc = exact_cdf_conditional(cond)
    lo, hi = support_quantiles(cond)
    mass = float(cond.cdf(hi) - cond.cdf(lo))
    assert l1_distance(sc.pdf, lambda x: cond.pdf(x) / mass, lo, hi, 2001) <= 0.05


def test_factor_alignment():
    rng = np.random.default_rng(3)
    factors = rng.uniform(0.1, 1.0, size=(4, 5, 3))
    factors /= factors.sum(axis=1, keepdims=True)
    perm = np.array([1, 2, 0])
    assert np.array_equal(align_factors(factors, factors[:, :, perm]), np.argsort(perm))

    mix = make_setting(SettingSpec(family="gaussian", N=3, R=2, seed=11))
    edges = np.tile(np.linspace(-8, 8, 11), (3, 1))
    disc = discretize_truth(mix, edges)
    assert disc.shape == (3, 10, 2)
    assert np.allclose(disc.sum(axis=1), 1.0, atol=1e-12)


def test_univariate_comparison_row():
    row = univariate_comparison(toy_mixture(), 1000, mc_points=200, seed=4)
    assert row["samples"] == 1000.0
    for key in ("kl_histogram", "kl_sinc", "kl_histogram_stderr", "kl_sinc_stderr"):
        assert np.isfinite(row[key])


def test_append_sweep_row(tmp_path):
    path = str(tmp_path / "sweep.csv")
    for M in (1000, 10000, 100000):
        append_sweep_row(path, {"samples": M, "kl": 1.0 / M, "accuracy": 0.9})
    table = pd.read_csv(path)
    assert list(table.columns) == ["samples", "kl", "accuracy"]
    assert table["samples"].tolist() == [1000, 10000, 100000]


# --------------------------------------------------------------------------
# EM baseline
# --------------------------------------------------------------------------
def _monotone(trajectory):
    return all(b >= a - 1e-8 * max(1.0, abs(a)) for a, b in zip(trajectory, trajectory[1:]))


def test_em_single_gaussian_moments():
    rng = np.random.default_rng(12)
    X = rng.normal(loc=[1.0, -2.0, 0.5], scale=[1.0, 2.0, 0.5], size=(5000, 3))
    model, traj = em_fit(Dataset(X), 1, restarts=2, seed=0)
    assert np.allclose(model.means[:, 0], X.mean(axis=0), atol=1e-12)
    assert np.allclose(model.variances[:, 0], X.var(axis=0), rtol=1e-10)
    assert np.array_equal(model.weights, [1.0])
    assert _monotone(traj)


def test_em_planted_two_components():
    rng = np.random.default_rng(13)
    M = 10000
    labels = rng.uniform(size=M) < 0.4
    X = rng.normal(size=(M, 3)) + np.where(labels[:, None], 10.0, 0.0)
    model, traj = em_fit(Dataset(X), 2, restarts=3, seed=1)
    assert _monotone(traj)
    order = np.argsort(model.means[0])
    means, variances, weights = model.means[:, order], model.variances[:, order], model.weights[order]
    assert abs(weights[1] - 0.4) <= 3 * np.sqrt(0.24 / M) + 0.01
    for r, (mu, w) in enumerate(((0.0, 0.6), (10.0, 0.4))):
        se = 1.0 / np.sqrt(M * w)
        assert np.all(np.abs(means[:, r] - mu) <= 4 * se)
        assert np.all(np.abs(variances[:, r] - 1.0) <= 4 * np.sqrt(2) * se)


def test_em_complete_rows_and_errors():
    X = np.array([[0.0, 1.0], [np.nan, 2.0], [1.0, np.nan]])
    with pytest.raises(InsufficientDataError):
        em_fit(Dataset(X), 2)


def test_em_variance_floor(capsys):
    rng = np.random.default_rng(15)
    X = np.column_stack([rng.normal(size=2000), 1e-5 * rng.normal(size=2000)])
    model, traj = em_fit(Dataset(X), 1, restarts=1, seed=0)
    assert model.floor_active
    assert model.variances[1, 0] == 1e-6
    assert np.isclose(model.variances[0, 0], X[:, 0].var(), rtol=1e-10)
    assert _monotone(traj)
    assert "[WARNING] [EmBaseline]" in capsys.readouterr().err


def test_gmm_evaluation_surface():
    std = DiagGmm([1.0], [[0.0]], [[1.0]])
    assert abs(gmm_density(std, np.array([0.0])) - 1 / np.sqrt(2 * np.pi)) < 1e-15

    sym = DiagGmm([0.5, 0.5], [[-1.0, 1.0], [-1.0, 1.0]], [[1.0, 1.0], [1.0, 1.0]])
    assert np.allclose(gmm_posterior(sym, np.zeros(2)), [0.5, 0.5], atol=1e-12)
    assert gmm_cluster(sym, np.zeros(2)) == 0

    rng = np.random.default_rng(14)
    model = DiagGmm([0.3, 0.7], rng.normal(size=(3, 2)), rng.uniform(0.5, 2, size=(3, 2)))
    X = rng.normal(size=(20, 3))
    direct = sum(model.weights[r] * np.prod(stats.norm.pdf(X, model.means[:, r], np.sqrt(model.variances[:, r])), axis=1)
                 for r in range(2))
    assert np.allclose(gmm_density(model, X), direct, rtol=1e-12, atol=0)

    doc = ModelDocument.from_json(model.to_document(trajectory=[-3.0, -2.0]).to_json())
    restored = mixture_from_document(doc)
    assert isinstance(restored, DiagGmm)
    assert np.allclose(restored.means, model.means) and doc.trajectory == [-3.0, -2.0]


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    print("=== STARTING WP4 VERIFICATION ===")
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            params = set(inspect.signature(fn).parameters)
            if params - {"tmp_path"}:
                print(f"[SKIP] {name} (needs pytest fixtures)")
                continue
            if params:
                with tempfile.TemporaryDirectory() as tmp:
                    fn(Path(tmp))
            else:
                fn()
            print(f"[PASS] {name}")
    print("=== WP4 VERIFICATION FINISHED ===")
