import json

import numpy as np
import pytest
from scipy import stats

from manifold_infer import experiments as ex
from manifold_infer.errors import EmptyGrid


def test_ground_truth_examples():
    np.testing.assert_array_equal(ex.ground_truth("sphere"), [0.0, 1.0, 0.0])
    S = ex.ground_truth("stiefel")
    np.testing.assert_allclose(S.T @ S, np.eye(2), atol=1e-15)
    np.testing.assert_array_equal(ex.ground_truth("fixedrank"), np.diag([5.0, 1.0, 0.0, 0.0]))
    np.testing.assert_array_equal(ex.ground_truth("counterexample"), np.diag([1.0, 1.0, 0.0, 0.0]))
    T = ex.ground_truth("rank1tensor")
    assert T[0, 0, 0] == 1.0 and np.count_nonzero(T) == 1
    with pytest.raises(ValueError):
        ex.ground_truth("torus")


@pytest.mark.parametrize("setting", ex.SETTINGS)
def test_truth_is_feasible(setting):
    assert ex.setting_manifold(setting).feasibility(ex.ground_truth(setting)) <= 1e-12


@pytest.mark.parametrize("setting", ex.SETTINGS)
def test_simulation_is_seeded(setting):
    a = ex.simulate_dataset(setting, 20, 4)
    assert a.shape == (20,) + ex.ground_truth(setting).shape
    np.testing.assert_array_equal(a, ex.simulate_dataset(setting, 20, 4))
    assert not np.array_equal(a, ex.simulate_dataset(setting, 20, 5))
    with pytest.raises(ValueError):
        ex.simulate_dataset(setting, 0, 4)


def test_barycenter_samples_lie_on_sphere_near_pole():
    X = ex.simulate_dataset("barycenter", 500, 1)
    np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0, atol=1e-15)
    # polar angle ~ Beta(2, 2) on [0, 1]
    f = np.arccos(X[:, 1])
    assert f.max() <= 1.0 and stats.kstest(f, stats.beta(2, 2).cdf).pvalue > 1e-3


def test_sphere_noise_has_variance_two():
    X = ex.simulate_dataset("sphere", 20000, 2)
    assert abs(X.var(axis=0).mean() - 2.0) <= 0.05
    E = ex.simulate_dataset("stiefel", 20000, 2) - ex.ground_truth("stiefel")
    assert abs(np.mean(E**2) - 1.0) <= 0.05
    assert abs(ex.simulate_dataset("sphere", 20000, 2, noise_scale=0.5).var(axis=0).mean() - 0.25) <= 0.01


def test_derive_seed():
    assert ex.derive_seed(1, 2, 3) == ex.derive_seed(1, 2, 3)
    assert ex.derive_seed(1, 2, 3) != ex.derive_seed(1, 3, 2)
    assert 0 <= ex.derive_seed(0) < 2**64


def test_ecdf_counts_ties():
    np.testing.assert_array_equal(ex.ecdf([1.0, 2.0, 2.0, 3.0], [0.0, 2.0, 3.0]), [0.0, 0.75, 1.0])


def test_cdf_error_same_samples_is_zero(rng):
    s = rng.standard_normal(100)
    assert ex.cdf_error(s, s, ex.T_GRID) == 0.0


def test_cdf_error_step_against_normal():
    # point mass at 0 vs Phi: on the grid the gap is max(Phi(x) for x < 0, 1 - Phi(x) for x >= 0)
    expected = 1.0 - stats.norm.cdf(0.0)
    assert ex.cdf_error(np.zeros(10), stats.norm.cdf, ex.T_GRID) == pytest.approx(expected, abs=1e-15)
    shifted = np.full(5, 0.3)
    gap = max(stats.norm.cdf(0.2), 1.0 - stats.norm.cdf(0.4))
    assert ex.cdf_error(shifted, stats.norm.cdf, ex.T_GRID) == pytest.approx(gap, abs=1e-15)


def test_cdf_error_coarser_grid_is_smaller(rng):
    s = rng.standard_normal(50) + 0.2
    fine = ex.cdf_error(s, stats.norm.cdf, ex.T_GRID)
    assert ex.cdf_error(s, stats.norm.cdf, ex.T_GRID[::2]) <= fine
    assert ex.cdf_error(s, stats.norm.cdf, ex.T_GRID[:0:-1]) <= fine


def test_cdf_error_empty_grid():
    with pytest.raises(EmptyGrid):
        ex.cdf_error([1.0], [1.0], [])


def test_grids():
    np.testing.assert_array_equal(ex.WALD_GRID, np.arange(1, 9))
    assert ex.T_GRID.size == 21 and ex.T_GRID[0] == -2.0 and ex.T_GRID[-1] == 2.0


def test_config_validation():
    c = ex.ExperimentConfig(n=80)
    assert c.n == (80,) and c.b_for(80) == 50000 and c.b_for(40) == 40000
    assert ex.ExperimentConfig(b=7).b_for(160) == 7
    assert c.noise() == pytest.approx(np.sqrt(2.0))
    for bad in ({"n": (5,)}, {"epochs": 0}, {"b": 0}, {"mc": 0}, {"levels": (1.2,)}, {"setting": "torus"}):
        with pytest.raises(ValueError):
            ex.ExperimentConfig(**bad)


def test_manifest_echoes_config():
    c = ex.ExperimentConfig(n=(40, 80), b=10, seed=3)
    d = ex.manifest(c, "type1", ["type1.csv"])
    assert d["config"]["seed"] == 3 and d["config"]["b_per_n"] == {"40": 10, "80": 10}
    assert "threads" not in d["config"]


def _small_type1(threads):
    c = ex.ExperimentConfig(n=(40, 80), b=60, epochs=4, seed=2, threads=threads)
    return c, ex.run_type1_table(c)


def test_type1_rows_shape_and_range():
    c, rows = _small_type1(1)
    assert len(rows) == 2 * 2 * 3
    assert all(0.0 <= r["acceptance"] <= 1.0 for r in rows)
    ns, cols, mat = ex.type1_grid(rows)
    assert ns == [40, 80] and mat.shape == (2, 6)
    assert cols[0] == ("t", 0.9) and cols[3] == ("wald", 0.9)
    # a wider region accepts at least as often
    assert np.all(np.diff(mat[:, :3], axis=1) >= 0) and np.all(np.diff(mat[:, 3:], axis=1) >= 0)


def test_type1_outputs_are_thread_independent():
    c1, r1 = _small_type1(1)
    c2, r2 = _small_type1(3)
    assert ex.type1_outputs(c1, r1) == ex.type1_outputs(c2, r2)


def test_original_statistics_at_estimate_are_zero():
    X = ex.simulate_dataset("stiefel", 50, 1)
    model = ex.setting_model("stiefel")
    x0 = ex.initial_point("stiefel", X)
    theta = model.manifold.nearest_point(X.mean(axis=0))
    W, T, flags = ex.original_statistics(model, X, theta, x0)
    assert abs(W) <= 1e-12 and abs(T) <= 1e-6 and flags == 0


def test_original_wald_is_near_chi_square():
    c = ex.ExperimentConfig(setting="stiefel", n=(160,), mc=200, seed=4, threads=1)
    W, T = ex.reference_samples(c, "stiefel", 160)
    assert stats.kstest(W, stats.chi2(df=5).cdf).statistic <= 0.15
    assert stats.kstest(T, "norm").statistic <= 0.15


def test_cdf_study_rows():
    c = ex.ExperimentConfig(setting="stiefel", n=(40,), b=50, epochs=2, mc=30, seed=1, threads=1)
    rows = ex.run_cdf_study(c)
    assert {r["method"] for r in rows} == {
        "wald_studentized", "wald_nonstudentized", "wald_parametric",
        "t_studentized", "t_nonstudentized", "t_parametric"}
    for r in rows:
        assert 0.0 <= r["error"] <= 1.0
        assert r["sqrtn_error"] == pytest.approx(np.sqrt(40) * r["error"])
    text = ex.cdf_outputs(c, rows, ("stiefel",))
    assert json.loads(text["manifest.json"])["settings"] == ["stiefel"]
    with pytest.raises(ValueError):
        ex.run_cdf_study(c, ("sphere",))


def test_barycenter_study_improves_with_n():
    c = ex.ExperimentConfig(setting="barycenter", n=(40, 640), epochs=20, seed=0, threads=1)
    rows = ex.run_barycenter_study(c)
    med = {n: np.median([r["dist"] for r in rows if r["n"] == n]) for n in c.n}
    assert med[640] < med[40]
    assert all(r["grad_norm"] <= 1e-10 for r in rows)
