"""Discrete-time simulator interface and the differential-drive model.

The concrete model updates position by ``u1 * sinc(u2*tau/2)`` along the
mid-step heading and heading by ``tau * u2``, plus a componentwise bounded
disturbance.  The update is implemented exactly as stated (the linear
displacement carries no extra ``tau`` factor), with ``sinc(a) = sin(a)/a``
and ``sinc(0) = 1``.  Heading is left unwrapped so the update stays purely
additive.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .workspace import Box


def project_input(u, box: Box) -> np.ndarray:
    """Euclidean projection onto the input box (componentwise clamp)."""
    return np.clip(np.asarray(u, dtype=float), box.lo, box.hi)


def sinc(a):
    """Unnormalised sinc: sin(a)/a with the removable singularity filled."""
    a = np.asarray(a, dtype=float)
    small = np.abs(a) < 1e-8
    safe = np.where(small, 1.0, a)
    return np.where(small, 1.0 - a * a / 6.0, np.sin(safe) / safe)


def unicycle_step(x, u, nu, tau: float) -> np.ndarray:
    """One step of the differential-drive update; ``x`` may be a single
    state (3,) or a batch (n, 3), with ``u``/``nu`` shaped to match."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    nu = np.asarray(nu, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    u = np.atleast_2d(u)
    nu = np.atleast_2d(nu) if nu.size else np.zeros_like(x)
    half = u[:, 1] * tau / 2.0
    mid = x[:, 2] + half
    ds = u[:, 0] * sinc(half)
    out = np.empty_like(x)
    out[:, 0] = x[:, 0] + ds * np.cos(mid) + nu[:, 0]
    out[:, 1] = x[:, 1] + ds * np.sin(mid) + nu[:, 1]
    out[:, 2] = x[:, 2] + tau * u[:, 1] + nu[:, 2]
    return out[0] if single else out


def sample_noise(v: float, rng: np.random.Generator, n: int = 1, dim: int = 3) -> np.ndarray:
    """i.i.d. uniform disturbance on [-v, v] per component."""
    if v < 0:
        raise ValueError("noise bound must be nonnegative")
    if v == 0:
        return np.zeros((n, dim)) if n > 1 else np.zeros(dim)
    out = rng.uniform(-v, v, size=(n, dim))
    return out if n > 1 else out[0]


@dataclass
class Rollout:
    states: np.ndarray  # (H+1, d)
    inputs: np.ndarray  # (H, n)
    left_domain: bool


def rollout(x0, controller, horizon: int, noise: float, tau: float,
            rng: np.random.Generator, input_box: Box, state_box: Box | None = None) -> Rollout:
    """Closed-loop simulation for ``horizon`` steps.

    ``controller`` maps a batch of states (n, d) to raw inputs (n, m); the
    projection onto the input box is applied here.  Leaving the state box
    sets a flag rather than raising; callers decide what that means.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    x = np.asarray(x0, dtype=float)
    states = np.empty((horizon + 1, x.shape[-1]))
    inputs = np.empty((horizon, len(input_box.lo)))
    states[0] = x
    left = state_box is not None and not state_box.contains(x)
    for t in range(horizon):
        u = project_input(controller(states[t][None, :])[0], input_box)
        nu = sample_noise(noise, rng, dim=x.shape[-1])
        states[t + 1] = unicycle_step(states[t], u, nu, tau)
        inputs[t] = u
        if state_box is not None and not state_box.contains(states[t + 1]):
            left = True
    return Rollout(states=states, inputs=inputs, left_domain=left)


def stream(seed, *key: int) -> np.random.Generator:
    """Deterministic child generator for a (seed, context) pair.

    Used to give every (edge, controller, purpose) its own noise stream so
    that search order and backtracking never perturb earlier results.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))
