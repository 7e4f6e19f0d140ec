import pytest

from nanoswarm.scenarios import (ARRANGEMENT_KEYS, EXPERIMENT_OVERLAYS, REFERENCE_DEFAULTS, arrangement,
                                 named_arrangement, reference_defaults)


@pytest.mark.parametrize("key", ARRANGEMENT_KEYS)
def test_arrangements_fit_domain(key):
    pattern = arrangement(key)
    pattern.validate_domain(REFERENCE_DEFAULTS["phi_max"], REFERENCE_DEFAULTS["epsilon"])
    assert pattern.total_demand == 50


def test_arrangement_contents():
    assert arrangement("b").demands.tolist() == [15, 35]
    assert arrangement("e").demands.tolist() == [46, 2, 2]
    assert arrangement("c").c == arrangement("d").c == 5
    assert "far away" in named_arrangement("d").description


def test_unknown_arrangement():
    with pytest.raises(ValueError, match="unknown arrangement"):
        arrangement("f")


def test_overlays_apply_on_defaults():
    assert reference_defaults("kmar_threshold")["D_R"] == 1e-10
    assert reference_defaults("kma_payload")["b"] == 5e-11
    assert reference_defaults()["b"] == 6e-11
    assert set().union(*EXPERIMENT_OVERLAYS.values()) <= set(REFERENCE_DEFAULTS) | {"alg"}
    with pytest.raises(ValueError):
        reference_defaults("nope")


def test_defaults_are_a_copy():
    reference_defaults()["n"] = 1
    assert REFERENCE_DEFAULTS["n"] == 55
