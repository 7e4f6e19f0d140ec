import numpy as np
import pytest

from nanoswarm.chemfield import FieldParams
from nanoswarm.engine import SimConfig, init_trial, run_experiment, run_timestep, run_trial
from nanoswarm.metrics import MetricParams
from nanoswarm.motion import MotionParams
from nanoswarm.protocol import AlgorithmKind, ThresholdParams

from helpers import random_pattern


def random_small_config(rng: np.random.Generator) -> SimConfig:
    pattern = random_pattern(rng, max_sites=4)
    return SimConfig(
        n=int(rng.integers(0, 21)),
        pattern=pattern,
        field=FieldParams(m=1e-6, P_A=float(rng.choice([0, 10, 50])), D_A=1e-9,
                          P_R=float(rng.choice([0, 50])), D_R=float(rng.choice([1e-10, 1e-9]))),
        motion=MotionParams(b=float(rng.choice([6e-11, 2e-10, 1e-9])),
                            noise_law=str(rng.choice(["std", "variance"]))),
        thresholds=ThresholdParams(k=float(rng.choice([1e5, 1e6])), epsilon=float(rng.choice([2e-5, 1e-4]))),
        alg=AlgorithmKind(int(rng.integers(4))),
        T_star=int(rng.integers(1, 11)) * 500,
        metrics=MetricParams(delta=1000, delta_prime=500),
        trials=3,
        base_seed=int(rng.integers(0, 2**63)),
    )


CONFIGS = [random_small_config(np.random.default_rng(1000 + i)) for i in range(50)]


def _check_conservation(config, result):
    K, A, R = result.drop_counts(config.pattern.c)
    assert K.sum() + result.n_unterminated == config.n
    assert np.array_equal(K, result.K_final)
    assert np.all(A + R <= K)
    if config.alg in (AlgorithmKind.RW, AlgorithmKind.KM):
        assert A.sum() == R.sum() == 0
    if config.alg == AlgorithmKind.KMA:
        assert np.array_equal(A, K) and R.sum() == 0
    if config.alg == AlgorithmKind.KMAR:
        assert np.array_equal(A + R, K)
    assert np.all(np.diff(result.K_series, axis=0) >= 0)
    assert np.all((0 <= result.final_positions) & (result.final_positions <= config.motion.phi_max))


def _same(a, b):
    return (a.seed == b.seed and np.array_equal(a.K_series, b.K_series) and a.events == b.events
            and np.array_equal(a.final_positions, b.final_positions))


def test_conservation_and_thread_independence():
    for config in CONFIGS:
        serial = run_experiment(config, threads=1)
        parallel = run_experiment(config, threads=8)
        for a, b in zip(serial, parallel, strict=True):
            _check_conservation(config, a)
            assert _same(a, b)


def test_early_exit_matches_full_stepping():
    config = SimConfig.from_values(dict(alg="KM", arrangement="a", n=6, T_star=20_000, b=1e-9,
                                        delta=1000, delta_prime=500, trials=1))
    fast = run_trial(config, 2)
    assert fast.n_unterminated == 0  # everyone arrives long before T_star
    state = init_trial(config, 2)
    for t in range(1, config.T_star + 1):
        run_timestep(state, t)
    assert np.array_equal(state.series, fast.K_series)
    assert np.array_equal(state.pos, fast.final_positions)
    assert state.events() == fast.events


def test_chunked_and_single_steps_agree():
    config = CONFIGS[3]
    whole = run_trial(config, 17)
    state = init_trial(config, 17)
    for t in range(1, config.T_star + 1):
        run_timestep(state, t)
    assert np.array_equal(state.series, whole.K_series)
    assert np.array_equal(state.pos, whole.final_positions)


def test_empty_swarm():
    config = SimConfig.from_values(dict(n=0, T_star=1000, delta=500, delta_prime=500, trials=2))
    for res in run_experiment(config):
        assert res.n_unterminated == 0 and res.events == []
        assert res.K_series.shape == (3, 2) and not res.K_series.any()


def test_seeds_and_order():
    config = SimConfig.from_values(dict(n=5, T_star=500, delta=500, delta_prime=500, trials=4, seed=9))
    assert [r.seed for r in run_experiment(config, threads=3)] == [9, 10, 11, 12]


def test_different_seeds_differ():
    config = SimConfig.from_values(dict(n=5, T_star=500, delta=500, delta_prime=500, trials=1))
    assert not np.array_equal(run_trial(config, 0).final_positions, run_trial(config, 1).final_positions)


def test_run_timestep_requires_next_step():
    state = init_trial(CONFIGS[0], 0)
    with pytest.raises(ValueError):
        run_timestep(state, 2)


def test_initial_placement_inside_domain():
    config = SimConfig.from_values(dict(n=200, T_star=500, delta=500, delta_prime=500))
    state = init_trial(config, 0)
    assert state.pos.shape == (200, 2)
    assert np.all((state.pos >= 0) & (state.pos <= config.motion.phi_max))


@pytest.mark.parametrize("values", [dict(T_star=1200), dict(seed=-1), dict(seed=2**64),
                                    dict(trials=0), dict(n=-1), dict(arrangement="z"),
                                    dict(sites=[(0.001, 0.001), (0.001, 0.00101)], demands=[1, 1]),
                                    dict(alg="XYZ")])
def test_config_validation(values):
    with pytest.raises(ValueError):
        SimConfig.from_values(values)


def test_from_values_defaults():
    config = SimConfig.from_values({})
    assert config.n == 55 and config.T_star == 200_000 and config.alg == AlgorithmKind.KM
    assert config.arrangement == "a" and config.thresholds.r_AM(config.field.P_A) == 1e7
    assert len(config.sample_times) == 401
