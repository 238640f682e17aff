import numpy as np
import pytest
from scipy.spatial.distance import cdist

from kbr.errors import FitFailed, InsufficientData, InvalidConfig
from kbr.kernel import TrainingSet
from kbr.training import (NoiseConfig, SweepConfig, add_noise, fit_theta, split_indices,
                          sweep_theta, typical_distance)


def brute_dtyp(pts, knn=5):
    pts = np.asarray(pts, float)
    if pts.ndim == 1:
        pts = pts[:, None]
    d = np.sort(cdist(pts, pts), axis=1)[:, 1:knn + 1]
    return d.mean()


def test_typical_distance_uniform_grid():
    h = 0.01
    x = np.arange(200) * h
    assert typical_distance(x) == pytest.approx(brute_dtyp(x), rel=1e-12)
    # the interior value is 1.8 h; boundary nodes pull the mean up slightly
    assert 1.8 * h < typical_distance(x) < 1.9 * h


def test_typical_distance_two_clusters():
    rng = np.random.default_rng(0)
    x = np.concatenate([rng.uniform(0, 0.1, 50), rng.uniform(100, 100.1, 50)])
    d = typical_distance(x)
    assert d == pytest.approx(brute_dtyp(x), rel=1e-12)
    assert d < 0.05


def test_typical_distance_circle():
    ang = np.arange(6) * np.pi / 3
    pts = np.column_stack([np.cos(ang), np.sin(ang)])
    # 5 nearest neighbors are every other point; their mean distance is the mean chord
    chords = [2 * np.sin(np.pi * j / 6) for j in (1, 1, 2, 2, 3)]
    assert typical_distance(pts) == pytest.approx(np.mean(chords), rel=1e-12)


def test_typical_distance_needs_enough_points():
    with pytest.raises(InsufficientData):
        typical_distance(np.arange(5.0))


def test_split_is_a_partition():
    tr, va = split_indices(101, 0.9, 3)
    assert np.intersect1d(tr, va).size == 0
    assert np.array_equal(np.union1d(tr, va), np.arange(101))
    assert tr.size == 91


def test_sweep_config_validation():
    with pytest.raises(InvalidConfig):
        SweepConfig(k_min=2, k_max=1)
    with pytest.raises(InvalidConfig):
        SweepConfig(n_sweep=1)
    with pytest.raises(InvalidConfig):
        SweepConfig(split_ratio=1.0)
    ks = SweepConfig().k_values
    assert ks[0] == pytest.approx(0.01) and ks[-1] == pytest.approx(100) and ks.size == 15
    assert np.allclose(np.diff(np.log(ks)), np.log(ks[1] / ks[0]))


def test_quadratic_data_tiny_errors_and_smallest_k():
    x = np.sort(np.random.default_rng(1).uniform(0, 1, 120))
    res = sweep_theta(TrainingSet(x, 1 + x - 2 * x * x))
    ok = np.isfinite(res.error)
    assert np.max(res.error[ok]) < 1e-10
    assert res.best == int(np.argmin(res.error))


def test_determinism():
    x = np.sort(np.random.default_rng(2).uniform(0, 1, 200))
    data = TrainingSet(x, np.sin(6 * x) + 2)
    a = fit_theta(data, SweepConfig(seed=4))
    b = fit_theta(data, SweepConfig(seed=4))
    assert a.theta == b.theta and a.k == b.k


def test_scaling_keeps_selected_k():
    x = np.sort(np.random.default_rng(3).uniform(0, 1, 150))
    y = np.exp(-((x - 0.4) / 0.2) ** 2) + 0.5
    a = sweep_theta(TrainingSet(x, y))
    b = sweep_theta(TrainingSet(7.0 * x, y))
    assert a.best == b.best
    assert b.d_typ == pytest.approx(7 * a.d_typ, rel=1e-12)
    assert b.theta_best == pytest.approx(49 * a.theta_best, rel=1e-10)


def test_exact_correction_not_worse_than_self_on_camel():
    from kbr.functions import get_function

    fn = get_function("camel1d")
    x = np.sort(np.random.default_rng(0).uniform(0, 1, 501))
    data = TrainingSet(x, fn(x))
    cfg = SweepConfig(split_ratio=0.8, seed=0)
    ex = sweep_theta(data, cfg, method="exact").error
    sc = sweep_theta(data, cfg, method="self").error
    assert np.all(ex <= sc * (1 + 1e-12))


def test_sweep_fails_when_no_width_works(monkeypatch):
    import kbr.training as tr

    monkeypatch.setattr(tr, "_validation_error", lambda *a, **k: np.inf)
    data = TrainingSet(np.linspace(0, 1, 12), np.linspace(1, 2, 12))
    with pytest.raises(FitFailed):
        sweep_theta(data, SweepConfig(split_ratio=0.5))


def test_2d_sweep_defaults_to_implicit_scoring():
    rng = np.random.default_rng(5)
    pts = rng.uniform(0, 1, (300, 2))
    data = TrainingSet(pts, 1 + pts[:, 0] ** 2 + pts[:, 1])
    model = fit_theta(data, SweepConfig(n_sweep=6))
    assert model.dim == 2 and 0.01 <= model.k <= 100


def test_refinement_never_worse():
    x = np.sort(np.random.default_rng(6).uniform(0, 1, 150))
    data = TrainingSet(x, np.cos(5 * x) + 2)
    _, sw = fit_theta(data, SweepConfig(), return_sweep=True)
    m = fit_theta(data, SweepConfig(refine=True))
    err = sweep_theta(data, SweepConfig(), k_values=[m.k]).error[0]
    assert err <= sw.error[sw.best] + 1e-15


def test_noise_model():
    v = np.linspace(1, 2, 20000)
    assert np.array_equal(add_noise(v, NoiseConfig(0.0, 1)), v)
    a = add_noise(v, NoiseConfig(0.09, 7))
    assert np.array_equal(a, add_noise(v, NoiseConfig(0.09, 7)))
    zeta = a / v - 1
    assert abs(zeta.std() - 0.03) < 0.05 * 0.03
    with pytest.raises(InvalidConfig):
        NoiseConfig(-0.1)
