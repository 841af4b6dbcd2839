"""Geometric workspace model: state/input boxes, named box regions, the
state labelling function and the reach/avoid decomposition of DFA edges.

Regions are axis-aligned boxes over a declared subset of state dimensions
(typically the planar position).  Region boxes are closed: a state on a
boundary is labelled inside, which interacts conservatively with the
strict epsilon-interior checks used by reachability.

Workspaces are immutable after construction and every query is reentrant.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .automaton import Dfa
from .ltl import Symbol


class WorkspaceError(ValueError):
    pass


class OutOfDomainError(WorkspaceError):
    pass


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise WorkspaceError("box bounds must have equal dimension")
        for a, b in zip(self.lo, self.hi):
            if not a < b:
                raise WorkspaceError(f"box interval [{a}, {b}] is empty")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return rng.uniform(lo, hi, size=(n, self.dim))

    def corners(self) -> np.ndarray:
        cols = [np.array(p) for p in itertools.product(*zip(self.lo, self.hi))]
        return np.array(cols, dtype=float)

    def clamp(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)


@dataclass(frozen=True)
class Region:
    """Named box over a subset of state dimensions, bound to the atomic
    proposition of the same name."""

    name: str
    dims: tuple[int, ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    kind: str = "target"  # target regions shrink, obstacles inflate, by robot radius

    def __post_init__(self):
        if not self.name:
            raise WorkspaceError("region name must be nonempty")
        if len(self.dims) != len(self.lo) or len(self.lo) != len(self.hi):
            raise WorkspaceError(f"region {self.name}: dims/lo/hi lengths differ")
        for a, b in zip(self.lo, self.hi):
            if not a < b:
                raise WorkspaceError(f"region {self.name}: interval [{a}, {b}] is empty")
        if self.kind not in ("target", "obstacle"):
            raise WorkspaceError(f"region {self.name}: unknown kind {self.kind!r}")

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        p = x[list(self.dims)]
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        p = pts[:, list(self.dims)]
        return np.all((p >= self.lo) & (p <= self.hi), axis=1)

    def resized(self, delta: float) -> "Region":
        """Grow (positive delta) or shrink the box on every face."""
        lo = tuple(a - delta for a in self.lo)
        hi = tuple(b + delta for b in self.hi)
        for a, b in zip(lo, hi):
            if not a < b:
                raise WorkspaceError(
                    f"region {self.name}: resize by {delta} empties the box")
        return Region(self.name, self.dims, lo, hi, self.kind)


@dataclass(frozen=True)
class Workspace:
    state_box: Box
    input_box: Box
    regions: tuple[Region, ...]
    robot_radius: float = 0.0

    def __post_init__(self):
        names = [r.name for r in self.regions]
        if len(set(names)) != len(names):
            raise WorkspaceError("region names must be unique")
        for r in self.regions:
            for d, a, b in zip(r.dims, r.lo, r.hi):
                if d >= self.state_box.dim:
                    raise WorkspaceError(f"region {r.name}: dimension {d} outside state box")
                if a < self.state_box.lo[d] or b > self.state_box.hi[d]:
                    raise WorkspaceError(
                        f"region {r.name}: box exceeds the state box on dimension {d}")
        if self.robot_radius < 0:
            raise WorkspaceError("robot radius must be nonnegative")
        if self.robot_radius > 0:
            adjusted = tuple(
                r.resized(self.robot_radius if r.kind == "obstacle" else -self.robot_radius)
                for r in self.regions)
            object.__setattr__(self, "regions", adjusted)
            object.__setattr__(self, "robot_radius", 0.0)

    def region(self, name: str) -> Region:
        for r in self.regions:
            if r.name == name:
                return r
        raise KeyError(f"unknown region {name!r}")

    @property
    def atom_names(self) -> frozenset[str]:
        return frozenset(r.name for r in self.regions)

    def label(self, x) -> Symbol:
        """Set of region names whose (closed) box contains ``x``."""
        if not self.state_box.contains(x):
            raise OutOfDomainError(f"state {x} outside the state box")
        return frozenset(r.name for r in self.regions if r.contains(x))

    def label_points(self, pts: np.ndarray) -> list[Symbol]:
        masks = {r.name: r.contains_points(pts) for r in self.regions}
        out = []
        for i in range(len(pts)):
            out.append(frozenset(n for n, m in masks.items() if m[i]))
        return out

    def feasible_symbols(self) -> frozenset:
        """Exactly the label sets some state in the state box realises, plus
        the empty symbol.

        Computed from the box arrangement: per dimension, take every region
        endpoint and a point inside every gap between consecutive endpoints;
        region membership is constant between endpoints, so the grid of
        those coordinates meets every membership pattern that occurs.
        """
        dims = sorted({d for r in self.regions for d in r.dims})
        if not dims:
            return frozenset([frozenset()])
        coords: dict[int, list[float]] = {}
        for d in dims:
            cuts = {self.state_box.lo[d], self.state_box.hi[d]}
            for r in self.regions:
                if d in r.dims:
                    i = r.dims.index(d)
                    cuts.add(max(r.lo[i], self.state_box.lo[d]))
                    cuts.add(min(r.hi[i], self.state_box.hi[d]))
            pts = sorted(cuts)
            mids = [(a + b) / 2 for a, b in zip(pts, pts[1:])]
            coords[d] = sorted(set(pts + mids))
        symbols = {frozenset()}
        for combo in itertools.product(*(coords[d] for d in dims)):
            at = dict(zip(dims, combo))
            sym = frozenset(
                r.name
                for r in self.regions
                if all(
                    r.lo[i] <= at[d] <= r.hi[i]
                    for i, d in enumerate(r.dims)
                )
            )
            symbols.add(sym)
        return frozenset(symbols)


@dataclass(frozen=True)
class EdgeSpec:
    """Reach/avoid decomposition of one DFA edge.

    ``reach_targets`` lists alternative (region, controller id) pairs whose
    region guarantees the transition; ``avoid`` are regions that must stay
    clear at the transition step; ``stay_avoid`` are regions the source's
    self-loop set excludes.  ``has_self_loop`` False forces a one-step
    transition.
    """

    source: str
    target: str
    reach_targets: tuple[tuple[Region, str], ...]
    avoid: tuple[Region, ...]
    stay_avoid: tuple[Region, ...]
    has_self_loop: bool


def controllers_for_edge(w: Workspace, d: Dfa, q: str, q2: str,
                         registry: dict[str, str]) -> tuple[str, ...]:
    """Controller ids associated with an edge: those of regions that lie
    entirely inside the edge's enabling state set (every feasible symbol
    containing the region's atom takes ``q`` to ``q2``)."""
    feasible = w.feasible_symbols()
    out = []
    for r in w.regions:
        if r.name not in registry:
            continue
        withr = [s for s in feasible if r.name in s]
        if withr and all(d.delta(q, s) == q2 for s in withr):
            out.append(registry[r.name])
    return tuple(out)


def edge_spec(w: Workspace, d: Dfa, q: str, q2: str,
              registry: dict[str, str]) -> EdgeSpec:
    """Derive the reach/avoid requirement for the DFA edge ``q`` -> ``q2``.

    Targets follow the region-containment rule above.  A region joins the
    avoid list when stepping into it alongside the target breaks the
    transition (probed on the automaton's full symbol alphabet, so the list
    matches the guard rather than a feasibility-restricted minterm).
    """
    if d.edge(q, q2) is None:
        raise WorkspaceError(f"no DFA edge {q} -> {q2}")
    feasible = w.feasible_symbols()

    stay_avoid: list[Region] = []
    loop = d.edge(q, q) is not None
    for r in w.regions:
        withr = [s for s in feasible if r.name in s]
        if any(d.delta(q, s) != q for s in withr):
            stay_avoid.append(r)
    if d.delta(q, frozenset()) != q:
        loop = False

    if q == q2:
        # dwell edge: nothing to reach, stay clear of the exit regions
        return EdgeSpec(q, q2, (), tuple(stay_avoid), tuple(stay_avoid), loop)

    targets: list[tuple[Region, str]] = []
    target_names: list[str] = []
    for r in w.regions:
        withr = [s for s in feasible if r.name in s]
        if withr and all(d.delta(q, s) == q2 for s in withr):
            target_names.append(r.name)
            if r.name in registry:
                targets.append((r, registry[r.name]))

    avoid: list[Region] = []
    for r in w.regions:
        if r.name in target_names:
            continue
        if any(d.delta(q, frozenset({t, r.name})) != q2 for t in target_names):
            avoid.append(r)

    return EdgeSpec(
        source=q,
        target=q2,
        reach_targets=tuple(targets),
        avoid=tuple(avoid),
        stay_avoid=tuple(stay_avoid),
        has_self_loop=loop,
    )
