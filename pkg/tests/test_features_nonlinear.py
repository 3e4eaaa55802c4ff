import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from voxscreen.errors import InsufficientSignal, NoRecurrence
from voxscreen.features.nonlinear import (DfaConfig, EmbedConfig, dfa, dfa_alpha, normalize_alpha,
                                          normalized_entropy, ppe_from_f0, rpde)

from conftest import FS, buffer


def sawtooth(n, period=100):
    return (np.arange(n) % period) / period - 0.5


def test_rpde_periodic_low():
    assert rpde(buffer(sawtooth(8000))) <= 0.1


def test_rpde_noise_high():
    x = np.random.default_rng(0).standard_normal(8000)
    assert rpde(buffer(x)) >= 0.5


def test_uniform_histogram_entropy_is_one():
    assert normalized_entropy(np.ones(1000)) == 1.0


def test_empty_histogram():
    with pytest.raises(NoRecurrence):
        normalized_entropy(np.zeros(10))


def test_rpde_constant_signal():
    with pytest.raises(NoRecurrence):
        rpde(buffer(np.full(4000, 0.3)))


def test_rpde_too_short():
    with pytest.raises(InsufficientSignal):
        rpde(buffer(sawtooth(900)))


@pytest.mark.parametrize("seed", range(3))
def test_dfa_white_and_walk(seed):
    x = np.random.default_rng(seed).standard_normal(16000)
    assert dfa_alpha(x) == pytest.approx(0.5, abs=0.1)
    assert dfa_alpha(np.cumsum(x)) == pytest.approx(1.5, abs=0.15)


def pink(n, rng):
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.arange(spec.size)
    f[0] = 1
    return np.fft.irfft(spec / np.sqrt(f), n)


@pytest.mark.parametrize("seed", range(3))
def test_dfa_ordering(seed):
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(16000)
    assert dfa_alpha(white) < dfa_alpha(pink(16000, rng)) < dfa_alpha(np.cumsum(white))


def test_dfa_normalization_monotone():
    alphas = np.linspace(-2, 3, 50)
    vals = [normalize_alpha(a) for a in alphas]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_dfa_feature_in_unit_interval():
    v = dfa(buffer(np.random.default_rng(1).standard_normal(8000)))
    assert 0 < v < 1 and v == pytest.approx(normalize_alpha(0.5), abs=0.03)


def test_dfa_too_short():
    with pytest.raises(InsufficientSignal):
        dfa_alpha(np.ones(100), DfaConfig())


def test_ppe_constant():
    assert ppe_from_f0(np.full(100, 180.0)) == 0.0


def test_ppe_uniform_random_pitch():
    f0 = np.random.default_rng(0).uniform(100, 300, 2000)
    assert ppe_from_f0(f0) >= 0.7


def test_ppe_transposition_invariance():
    f0 = 150 * 2 ** (np.cumsum(np.random.default_rng(2).standard_normal(300)) * 0.01)
    assert abs(ppe_from_f0(f0) - ppe_from_f0(1.5 * f0)) <= 1e-6


def test_ppe_too_few_frames():
    with pytest.raises(InsufficientSignal):
        ppe_from_f0(np.full(31, 100.0))


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), kind=st.sampled_from(["noise", "walk", "tone", "mix"]))
def test_nonlinear_values_in_unit_interval(seed, kind):
    rng = np.random.default_rng(seed)
    n = 2400
    if kind == "noise":
        x = rng.standard_normal(n)
    elif kind == "walk":
        x = np.cumsum(rng.standard_normal(n))
    elif kind == "tone":
        x = np.sin(2 * np.pi * rng.uniform(80, 400) * np.arange(n) / FS)
    else:
        x = np.sin(2 * np.pi * 150 * np.arange(n) / FS) + rng.uniform(0, 1) * rng.standard_normal(n)
    buf = buffer(x)
    cfg = EmbedConfig(t_max=400)
    try:
        r = rpde(buf, cfg)
        assert 0.0 <= r <= 1.0
    except NoRecurrence:
        pass
    assert 0.0 <= dfa(buf) <= 1.0
    f0 = rng.uniform(60, 400, 64)
    assert 0.0 <= ppe_from_f0(f0) <= 1.0
