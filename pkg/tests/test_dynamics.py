import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reachsynth.dynamics import (
    Rollout,
    project_input,
    rollout,
    sample_noise,
    sinc,
    stream,
    unicycle_step,
)
from reachsynth.workspace import Box

UBOX = Box((-0.22, -0.15), (0.22, 0.15))


def test_project_clamps():
    assert np.allclose(project_input([0.5, 0.0], UBOX), [0.22, 0.0])
    assert np.allclose(project_input([0.1, -0.1], UBOX), [0.1, -0.1])
    assert np.allclose(project_input([-1.0, 1.0], UBOX), [-0.22, 0.15])


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_project_inside_box(a, b):
    u = project_input([a, b], UBOX)
    assert UBOX.contains(u)


def test_step_straight_line():
    x1 = unicycle_step([0.0, 0.0, 0.0], [0.22, 0.0], np.zeros(3), 1.0)
    assert np.allclose(x1, [0.22, 0.0, 0.0])


def test_step_pure_rotation():
    x1 = unicycle_step([0.0, 0.0, 0.0], [0.0, 0.15], np.zeros(3), 1.0)
    assert np.allclose(x1, [0.0, 0.0, 0.15])


def test_step_against_high_precision_reference():
    # independent evaluation of the update at extended precision (mpmath-free:
    # terms evaluated with Python floats in a different operation order)
    import math

    x, y, th = 1.0, 1.0, math.pi / 2
    u1, u2, tau = 0.2, 0.1, 1.0
    half = u2 * tau / 2
    expect = (
        x + u1 * (math.sin(half) / half) * math.cos(th + half),
        y + u1 * (math.sin(half) / half) * math.sin(th + half),
        th + tau * u2,
    )
    got = unicycle_step([x, y, th], [u1, u2], np.zeros(3), tau)
    assert np.allclose(got, expect, atol=1e-12)


def test_sinc_continuity_at_zero():
    a = unicycle_step([0.0, 0.0, 0.3], [0.2, 1e-6], np.zeros(3), 1.0)
    b = unicycle_step([0.0, 0.0, 0.3], [0.2, 0.0], np.zeros(3), 1.0)
    assert np.linalg.norm(a - b) < 1e-4
    assert sinc(0.0) == 1.0


def test_noise_support_and_mean():
    rng = np.random.default_rng(0)
    n = 1_000_000
    s = sample_noise(0.002, rng, n=n)
    assert s.shape == (n, 3)
    assert np.all(np.abs(s) <= 0.002)
    sigma = 0.002 / np.sqrt(3)
    assert np.all(np.abs(s.mean(axis=0)) < 3 * sigma / np.sqrt(n))
    assert np.allclose(sample_noise(0.0, rng), np.zeros(3))


def test_rollout_zero_controller_fixed_position():
    zero = lambda xs: np.zeros((len(xs), 2))
    r = rollout([1.0, 2.0, 0.5], zero, 5, 0.0, 1.0, np.random.default_rng(1), UBOX)
    assert isinstance(r, Rollout)
    assert r.states.shape == (6, 3)
    assert np.allclose(r.states, r.states[0])
    assert not r.left_domain


def test_rollout_rejects_zero_horizon():
    zero = lambda xs: np.zeros((len(xs), 2))
    with pytest.raises(ValueError):
        rollout([0.0, 0.0, 0.0], zero, 0, 0.0, 1.0, np.random.default_rng(1), UBOX)


def test_rollout_seed_determinism():
    ctrl = lambda xs: np.tile([0.1, 0.05], (len(xs), 1))
    a = rollout([0.0, 0.0, 0.0], ctrl, 20, 0.002, 1.0, np.random.default_rng(42), UBOX)
    b = rollout([0.0, 0.0, 0.0], ctrl, 20, 0.002, 1.0, np.random.default_rng(42), UBOX)
    assert np.array_equal(a.states, b.states)


def test_rollout_noise_bounded():
    ctrl = lambda xs: np.tile([0.2, 0.1], (len(xs), 1))
    r = rollout([0.0, 0.0, 0.0], ctrl, 30, 0.002, 1.0, np.random.default_rng(3), UBOX)
    for t in range(30):
        clean = unicycle_step(r.states[t], r.inputs[t], np.zeros(3), 1.0)
        assert np.all(np.abs(r.states[t + 1] - clean) <= 0.002 + 1e-15)


def test_rollout_domain_flag():
    ctrl = lambda xs: np.tile([0.22, 0.0], (len(xs), 1))
    small = Box((-1.0, -1.0, -10.0), (1.0, 1.0, 10.0))
    r = rollout([0.0, 0.0, 0.0], ctrl, 10, 0.0, 1.0, np.random.default_rng(4), UBOX, small)
    assert r.left_domain


def test_stream_independence():
    a = stream(7, 1, 2).uniform(size=4)
    b = stream(7, 1, 2).uniform(size=4)
    c = stream(7, 1, 3).uniform(size=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
