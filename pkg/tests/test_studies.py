import numpy as np
import pytest

from kbr.errors import InvalidInput
from kbr.functions import TestFunction
from kbr.studies import convergence_study, derivative_errors, noise_study

QUAD = TestFunction("quad", 1, lambda x: 1 + 2 * np.asarray(x) - np.asarray(x) ** 2,
                    lambda x: 2 - 2 * np.asarray(x), lambda x: np.full_like(np.asarray(x), -2.0))


def test_quadratic_convergence_is_at_machine_precision():
    rows, slopes = convergence_study(QUAD, [50, 100, 200], "explicit", n_test=300)
    assert all(r["rmse_grad"] < 1e-9 and r["rmse_lap"] < 1e-6 for r in rows)
    assert slopes == (None, None) or all(s is None or np.isfinite(s) for s in slopes)


def test_convergence_is_deterministic_and_validates_ns():
    a, _ = convergence_study("camel1d", [100, 200], "implicit", seed=3, n_test=200)
    b, _ = convergence_study("camel1d", [100, 200], "implicit", seed=3, n_test=200)
    assert a == b
    with pytest.raises(InvalidInput):
        convergence_study("camel1d", [200, 100])


def test_kbr_within_an_order_of_fd():
    rows_k, _ = convergence_study("camel1d", [300, 1000], "explicit", n_test=1000)
    rows_f, _ = convergence_study("camel1d", [300, 1000], "fd", n_test=1000)
    for k, f in zip(rows_k, rows_f):
        assert k["rmse_grad"] < 10 * f["rmse_grad"]


def test_zero_noise_matches_clean_convergence_point():
    rows = noise_study("camel1d", 200, [0.0], schemes=("explicit",), seed=1, n_test=300)
    rng = np.random.default_rng(1)
    from kbr.functions import get_function
    from kbr.studies import sample_points
    from kbr.training import SweepConfig

    fn = get_function("camel1d")
    xq = sample_points(300, rng)
    x = sample_points(200, rng)
    eg, el, _ = derivative_errors(fn, x, fn(x), xq, "explicit", SweepConfig(seed=1))
    assert rows[0]["rmse_grad"] == eg and rows[0]["rmse_lap"] == el


def test_noise_errors_grow_with_noise():
    levels = [0.0, 0.02, 0.1]
    med = {}
    for scheme in ("implicit", "spline"):
        per_seed = []
        for seed in range(5):
            rows = noise_study("camel1d", 201, levels, schemes=(scheme,), seed=seed, n_test=300)
            per_seed.append([r["rmse_grad"] for r in rows])
        med[scheme] = np.median(per_seed, axis=0)
        assert np.all(np.diff(med[scheme]) >= 0)
