import numpy as np
import pytest

from nanoswarm.metrics import MetricParams, SuccessSeries, s_avg, s_std, success, success_series, t_fin
from nanoswarm.scenarios import arrangement

from helpers import t_fin_bruteforce


def _grid(T=200_000, dp=500):
    return np.arange(0, T + 1, dp)


def test_success_cases():
    b = arrangement("b")  # demands 15, 35
    assert success([0, 0], b, 1.0) == 0.0
    assert success([15, 0], b, 1.0) == pytest.approx(0.3)
    assert success([40, 0], b, 1.0) == pytest.approx(0.3)  # capped at demand
    assert success([15, 35], b, 1.0) == 1.0
    assert success([30, 70], b, 2.0) == 1.0


def test_success_series_matches_pointwise():
    pattern = arrangement("c")
    K = np.random.default_rng(0).integers(0, 15, size=(30, 5))
    series = success_series(np.arange(30), K, pattern, 1.0)
    assert np.allclose(series.values, [success(k, pattern, 1.0) for k in K])


def test_flat_zero_curve_finishes_immediately():
    t = _grid()
    assert t_fin(SuccessSeries(t, np.zeros(len(t))), MetricParams()) == 0


def test_step_curve():
    t = _grid()
    params = MetricParams()
    # zero until 40000, 0.9 after: the first forward window is already flat
    step = SuccessSeries(t, np.where(t < 40_000, 0.0, 0.9))
    assert t_fin(step, params) == t_fin_bruteforce(t, step.values, 30_000, 3e-7) == 0
    # rising until 40000 then flat: t_fin is the first t whose window starts on the plateau
    ramp = SuccessSeries(t, np.minimum(t / 40_000, 1.0) * 0.9)
    expected = t_fin_bruteforce(t, ramp.values, 30_000, 3e-7)
    assert t_fin(ramp, params) == expected
    assert 10_000 < expected <= 40_000


def test_t_fin_matches_bruteforce_on_random_curves():
    rng = np.random.default_rng(5)
    t = _grid(20_000, 100)
    params = MetricParams(delta=2000, D_thresh=1e-5, delta_prime=100)
    for _ in range(200):
        vals = np.cumsum(rng.exponential(rng.uniform(1e-4, 1e-2), len(t)))
        vals = np.minimum(vals / vals[-1] * rng.uniform(0.3, 1), 1.0)
        assert t_fin(SuccessSeries(t, vals), params) == t_fin_bruteforce(t, vals, 2000, 1e-5)


def test_t_fin_undefined_when_always_rising():
    t = _grid()
    assert t_fin(SuccessSeries(t, t / 200_000), MetricParams()) is None


def test_t_fin_never_uses_window_past_horizon():
    t = _grid(60_000)
    vals = np.minimum(t / 20_000, 1.0)
    got = t_fin(SuccessSeries(t, vals), MetricParams())
    assert got == 20_000
    assert t_fin(SuccessSeries(t, np.minimum(t / 50_000, 1.0)), MetricParams()) is None


def test_t_fin_rejects_wrong_spacing():
    with pytest.raises(ValueError):
        t_fin(SuccessSeries(np.arange(0, 100_000, 1000), np.zeros(100)), MetricParams())


def test_s_avg_and_population_std():
    t = np.arange(3)
    a = SuccessSeries(t, np.array([0.0, 0.5, 1.0]))
    b = SuccessSeries(t, np.array([0.0, 0.1, 0.2]))
    assert np.allclose(s_avg([a, b]).values, [0.0, 0.3, 0.6])
    assert np.allclose(s_std([a, b]), [0.0, 0.2, 0.4])
    with pytest.raises(ValueError):
        s_avg([a, SuccessSeries(t + 1, b.values)])
    with pytest.raises(ValueError):
        s_avg([])


def test_series_at():
    s = SuccessSeries(np.array([0, 500]), np.array([0.1, 0.2]))
    assert s.at(500) == 0.2
    with pytest.raises(KeyError):
        s.at(250)


@pytest.mark.parametrize("kwargs", [dict(delta_prime=700), dict(delta=0), dict(D_thresh=-1)])
def test_metric_params_validation(kwargs):
    with pytest.raises(ValueError):
        MetricParams(**kwargs)


def test_per_trial_success_is_monotone():
    from nanoswarm.engine import SimConfig, run_trial
    cfg = SimConfig.from_values(dict(alg="KMAR", arrangement="e", n=40, T_star=20_000, trials=1))
    res = run_trial(cfg, 3)
    S = res.success(cfg.pattern, 1.0).values
    assert np.all(np.diff(S) >= 0) and 0 <= S.min() and S.max() <= 1
