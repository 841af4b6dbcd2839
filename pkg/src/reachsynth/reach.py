"""Sampling-based over-approximate reachability and reach-avoid checking.

A reachable-set estimate at each step is the convex hull of propagated
samples padded (implicitly) by a Euclidean ball of radius epsilon; the
per-step probability that the padded hull misses part of the true set is
the configured ``delta_m``.  Two propagation modes exist: ``particle``
propagates one fixed sample cloud through every step (the cited algorithm),
``resample`` redraws the cloud from the previous padded hull each step.

Checks project hull vertices onto a region's declared dimensions: the
projection of a convex hull is the hull of the projected vertices, so a
vertex test against a box is exact.

Each verification owns its generator; concurrent verifications of
different candidates are safe when given disjoint streams (see
``dynamics.stream``), which also makes results independent of scheduling.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dynamics import project_input, sample_noise, unicycle_step
from .geometry import Hull, convex_hull, gjk_distance, hull_of_samples, within_distance
from .workspace import Box, Region
from .workspace import EdgeSpec


class SamplingError(RuntimeError):
    pass


@dataclass
class ReachStep:
    """Padded convex hull of the reachable-state estimate at step ``t``.

    In particle mode the step may carry the propagated sample cloud so a
    subsequent edge continues the same particles instead of redrawing from
    the padded hull; the certificate itself never reads ``samples``.
    """

    t: int
    hull: Hull
    epsilon: float
    samples: np.ndarray | None = None

    @property
    def vertices(self) -> np.ndarray:
        return self.hull.points


@dataclass
class ReachTube:
    steps: tuple[ReachStep, ...]
    controller_id: str
    samples: int
    delta_m: float

    @property
    def horizon(self) -> int:
        return len(self.steps) - 1

    @property
    def confidence(self) -> float:
        """Probability that every estimated step over-approximates the true
        reachable set: (1 - delta_m) ** horizon."""
        return (1.0 - self.delta_m) ** self.horizon


@dataclass(frozen=True)
class ReachConfig:
    samples: int
    epsilon: float
    noise: float
    tau: float
    state_box: Box
    input_box: Box
    delta_m: float = 0.0
    horizon_cap: int = 200
    mode: str = "resample"
    rejection_cap_factor: int = 128
    dirichlet_fallback: bool = True

    def __post_init__(self):
        if self.mode not in ("resample", "particle"):
            raise ValueError(f"unknown reach mode {self.mode!r}")
        if self.samples < self.state_box.dim + 1:
            raise ValueError("need at least d+1 samples")
        if self.epsilon < 0 or self.noise < 0:
            raise ValueError("epsilon and noise must be nonnegative")


@dataclass
class VerifyOutcome:
    safe: bool
    horizon: int | None
    tube: ReachTube
    reason: str | None = None
    t_fail: int | None = None
    region: str | None = None


@dataclass
class SampleDraw:
    points: np.ndarray
    uniform: bool
    attempts: int


def as_reach_step(source) -> ReachStep:
    """Normalise an initial set (Box or ReachStep) to a ReachStep."""
    if isinstance(source, ReachStep):
        return source
    if isinstance(source, Box):
        return ReachStep(t=0, hull=convex_hull(source.corners()), epsilon=0.0)
    raise TypeError(f"cannot interpret {type(source).__name__} as an initial set")


def sample_from_set(source, m: int, rng: np.random.Generator,
                    cap_factor: int = 128, dirichlet_fallback: bool = True) -> SampleDraw:
    """Draw ``m`` points from a box (uniform) or a padded hull (rejection
    from the inflated bounding box; Dirichlet vertex mixing as a flagged
    non-uniform fallback when rejection starves)."""
    if m < 1:
        raise ValueError("need at least one sample")
    if isinstance(source, Box):
        return SampleDraw(source.sample(m, rng), uniform=True, attempts=m)
    if not isinstance(source, ReachStep):
        raise TypeError(f"cannot sample from {type(source).__name__}")
    hull, eps = source.hull, source.epsilon
    lo = hull.points.min(axis=0) - eps
    hi = hull.points.max(axis=0) + eps
    out = np.empty((0, hull.points.shape[1]))
    attempts = 0
    budget = max(cap_factor * m, m)
    batch = max(m, 1024)
    while len(out) < m and attempts < budget:
        draw = rng.uniform(lo, hi, size=(batch, len(lo)))
        attempts += batch
        keep = draw[within_distance(hull, draw, eps)]
        if len(keep):
            out = np.vstack([out, keep])
    if len(out) >= m:
        return SampleDraw(out[:m], uniform=True, attempts=attempts)
    if not dirichlet_fallback:
        raise SamplingError(
            f"rejection sampling accepted {len(out)}/{m} after {attempts} draws")
    lam = rng.dirichlet(np.ones(hull.vertex_count), size=m - len(out))
    mixed = lam @ hull.points
    return SampleDraw(np.vstack([out, mixed]), uniform=False, attempts=attempts)


def propagate(points: np.ndarray, controller, noise: float, tau: float,
              rng: np.random.Generator, input_box: Box) -> np.ndarray:
    """One closed-loop simulator step per point, order preserving."""
    pts = np.asarray(points, dtype=float)
    u = project_input(controller(pts), input_box)
    nu = sample_noise(noise, rng, n=len(pts), dim=pts.shape[1]) if noise > 0 \
        else np.zeros_like(pts)
    if len(pts) == 1:
        nu = nu.reshape(1, -1)
    return unicycle_step(pts, u, nu, tau)


def hull_inside_region(step: ReachStep, region: Region) -> bool:
    """True iff every hull vertex projects at least ``epsilon`` inside every
    face of the region box (exact for ball padding against a box)."""
    p = step.vertices[:, list(region.dims)]
    lo = np.asarray(region.lo) + step.epsilon
    hi = np.asarray(region.hi) - step.epsilon
    if np.any(lo > hi):
        return False
    return bool(np.all(p >= lo) and np.all(p <= hi))


def hull_avoids_region(step: ReachStep, region: Region) -> bool:
    """True iff the projected hull keeps a Euclidean distance strictly above
    ``epsilon`` from the region box; an unconverged distance query counts
    as not avoided."""
    p = step.vertices[:, list(region.dims)]
    corners = _box_corners(region.lo, region.hi)
    dist = gjk_distance(p, corners)
    if dist is None:
        return False
    return dist > step.epsilon


def _box_corners(lo, hi) -> np.ndarray:
    return np.array(list(itertools.product(*zip(lo, hi))), dtype=float)


def _step_clear_of(step: ReachStep, regions) -> str | None:
    for r in regions:
        if not hull_avoids_region(step, r):
            return r.name
    return None


def verify_edge(x0_set, spec: EdgeSpec, target: Region, controller,
                cfg: ReachConfig, rng: np.random.Generator,
                controller_id: str = "") -> VerifyOutcome:
    """Check one DFA edge: stay clear of ``spec.stay_avoid`` while the
    padded reach sets evolve, and succeed at the first step whose set is
    epsilon-inside ``target`` and clear of ``spec.avoid``.

    Without a usable self-loop the transition must happen in one step.
    The initial set itself must satisfy the stay condition (step 0 of the
    stay range); it carries its own padding when it came from a previous
    edge.
    """
    x0 = as_reach_step(x0_set)
    x0 = ReachStep(t=0, hull=x0.hull, epsilon=x0.epsilon, samples=x0.samples)
    steps = [x0]

    def tube() -> ReachTube:
        return ReachTube(tuple(steps), controller_id, cfg.samples, cfg.delta_m)

    horizon_cap = cfg.horizon_cap if spec.has_self_loop else 1
    if spec.has_self_loop:
        hit = _step_clear_of(x0, spec.stay_avoid)
        if hit is not None:
            return VerifyOutcome(False, None, tube(), "avoid-violation", 0, hit)

    if cfg.mode == "particle" and x0.samples is not None \
            and len(x0.samples) == cfg.samples:
        pts = x0.samples
    else:
        pts = sample_from_set(x0, cfg.samples, rng,
                              cfg.rejection_cap_factor, cfg.dirichlet_fallback).points
    for t in range(1, horizon_cap + 1):
        pts = propagate(pts, controller, cfg.noise, cfg.tau, rng, cfg.input_box)
        if not (np.all(pts >= cfg.state_box.lo) and np.all(pts <= cfg.state_box.hi)):
            return VerifyOutcome(False, None, tube(), "left-domain", t, None)
        step = ReachStep(t=t, hull=hull_of_samples(pts), epsilon=cfg.epsilon)
        if hull_inside_region(step, target) and \
                _step_clear_of(step, spec.avoid) is None:
            if cfg.mode == "particle":
                step.samples = pts
            steps.append(step)
            return VerifyOutcome(True, t, tube())
        if spec.has_self_loop:
            hit = _step_clear_of(step, spec.stay_avoid)
            if hit is not None:
                steps.append(step)
                return VerifyOutcome(False, None, tube(), "avoid-violation", t, hit)
        steps.append(step)
        if cfg.mode == "resample":
            pts = sample_from_set(step, cfg.samples, rng,
                                  cfg.rejection_cap_factor, cfg.dirichlet_fallback).points
    return VerifyOutcome(False, None, tube(), "horizon-exhausted", horizon_cap, None)


def estimate_delta(x0_set, controller, horizon: int, cfg: ReachConfig,
                   rng: np.random.Generator, holdout: int = 10_000) -> np.ndarray:
    """Empirical per-step containment: the fraction of independently
    propagated fresh samples that land inside each step's padded hull.
    Reported alongside the configured delta_m, whose closed form is not
    derived here."""
    if holdout < 1000:
        raise ValueError("holdout should be at least 1000 for a meaningful rate")
    x0 = as_reach_step(x0_set)
    main = sample_from_set(x0, cfg.samples, rng,
                           cfg.rejection_cap_factor, cfg.dirichlet_fallback).points
    fresh = sample_from_set(x0, holdout, rng,
                            cfg.rejection_cap_factor, cfg.dirichlet_fallback).points
    rates = np.empty(horizon)
    for t in range(1, horizon + 1):
        main = propagate(main, controller, cfg.noise, cfg.tau, rng, cfg.input_box)
        fresh = propagate(fresh, controller, cfg.noise, cfg.tau, rng, cfg.input_box)
        step = ReachStep(t=t, hull=hull_of_samples(main), epsilon=cfg.epsilon)
        rates[t - 1] = float(within_distance(step.hull, fresh, cfg.epsilon).mean())
        if cfg.mode == "resample":
            main = sample_from_set(step, cfg.samples, rng,
                                   cfg.rejection_cap_factor, cfg.dirichlet_fallback).points
            fresh = sample_from_set(step, holdout, rng,
                                    cfg.rejection_cap_factor, cfg.dirichlet_fallback).points
    return rates
