"""DFA pre-processing and reachability-guided search for a controller
sequence.

Pre-processing replicates every state reachable along multiple forward
paths until each state has a unique incoming path (self-loops excluded), so
the initial-set bookkeeping of the search needs one set per state.  The
search walks the expanded automaton depth-first; an edge is taken only when
reachability verifies it, the successor's initial set becoming the final
padded reach set.  On failure the successor is discarded and the search
backtracks; with the default first-success controller rule the search is
deliberately not exhaustive.

The search itself is sequential (it is a stack walk), but every
(edge, controller) verification draws from its own seeded stream, so the
answers would not change if candidates were verified concurrently.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .automaton import Dfa
from .dynamics import stream
from .reach import ReachConfig, ReachStep, ReachTube, VerifyOutcome, as_reach_step, \
    hull_avoids_region, hull_inside_region, verify_edge
from .workspace import EdgeSpec, Region


class UnsupportedDfaError(ValueError):
    pass


@dataclass(frozen=True)
class ExpandedState:
    name: str
    origin: str
    path: tuple[tuple[str, str], ...]  # incoming forward edges from the root


@dataclass
class ExpandedDfa:
    states: tuple[ExpandedState, ...]
    initial: str
    accepting: frozenset[str]
    edges: tuple[tuple[str, str], ...]  # forward edges between replica names
    base: Dfa

    def origin(self, name: str) -> str:
        for s in self.states:
            if s.name == name:
                return s.origin
        raise KeyError(name)

    def successors(self, name: str) -> tuple[str, ...]:
        return tuple(sorted(t for s, t in self.edges if s == name))


def _forward_edges(d: Dfa) -> list[tuple[str, str]]:
    return [(e.source, e.target) for e in d.edges if e.source != e.target]


def _check_acyclic(d: Dfa) -> None:
    adj: dict[str, list[str]] = {}
    for s, t in _forward_edges(d):
        adj.setdefault(s, []).append(t)
    colour: dict[str, int] = {}

    def visit(u, trail):
        colour[u] = 1
        for v in adj.get(u, ()):
            if colour.get(v, 0) == 1:
                cycle = trail[trail.index(v):] + [v] if v in trail else [u, v]
                raise UnsupportedDfaError(
                    "forward transitions contain a cycle "
                    f"({' -> '.join(cycle)}); unique-path expansion would not terminate")
            if colour.get(v, 0) == 0:
                visit(v, trail + [v])
        colour[u] = 2

    for s in d.states:
        if colour.get(s, 0) == 0:
            visit(s, [s])


def preprocess(d: Dfa) -> ExpandedDfa:
    """Unique-path expansion: one replica per forward path from the initial
    state.  Requires the forward (non-self-loop) graph to be acyclic."""
    _check_acyclic(d)
    adj: dict[str, list[str]] = {}
    for s, t in sorted(_forward_edges(d)):
        adj.setdefault(s, []).append(t)

    nodes: list[ExpandedState] = []
    edges: list[tuple[str, str]] = []
    counts: dict[str, int] = {}
    queue = [(d.initial, ())]
    raw: list[tuple[str, tuple, int]] = []
    while queue:
        origin, path = queue.pop(0)
        idx = counts.get(origin, 0)
        counts[origin] = idx + 1
        raw.append((origin, path, idx))
        for t in adj.get(origin, ()):
            queue.append((t, path + ((origin, t),)))

    def name_of(origin: str, idx: int) -> str:
        return origin if counts[origin] == 1 else f"{origin}~{idx + 1}"

    seen: dict[tuple, str] = {}
    for origin, path, idx in raw:
        name = name_of(origin, idx)
        nodes.append(ExpandedState(name, origin, path))
        seen[path] = name
    for origin, path, idx in raw:
        if path:
            parent = seen[path[:-1]]
            edges.append((parent, name_of(origin, idx)))

    accepting = frozenset(
        s.name for s in nodes if d.accepting is not None and s.origin == d.accepting)
    return ExpandedDfa(
        states=tuple(nodes),
        initial=name_of(d.initial, 0),
        accepting=accepting,
        edges=tuple(edges),
        base=d,
    )


@dataclass(frozen=True)
class Segment:
    controller_id: str
    horizon: int
    edge: tuple[str, str]        # expanded names
    origin_edge: tuple[str, str]
    target_region: str


@dataclass
class Strategy:
    segments: tuple[Segment, ...]
    dfa_path: tuple[str, ...]
    tubes: tuple[ReachTube, ...]
    delta_m: float

    @property
    def total_horizon(self) -> int:
        return sum(s.horizon for s in self.segments)

    @property
    def probability_bound(self) -> float:
        return strategy_probability(self, self.delta_m)


def strategy_probability(strategy_or_horizon, delta_m: float) -> float:
    """Lower bound on the satisfaction probability: (1 - delta_m) ** F with
    F the summed segment horizons."""
    if not 0.0 <= delta_m < 1.0:
        raise ValueError("delta_m must lie in [0, 1)")
    f = strategy_or_horizon if isinstance(strategy_or_horizon, int) \
        else strategy_or_horizon.total_horizon
    return (1.0 - delta_m) ** f


@dataclass
class EdgeAttempt:
    edge: tuple[str, str]
    origin_edge: tuple[str, str]
    controller_id: str
    target_region: str
    outcome: VerifyOutcome


@dataclass
class SearchResult:
    success: bool
    strategy: Strategy | None
    attempts: tuple[EdgeAttempt, ...]


def reach_dfs(expanded: ExpandedDfa, x0_set, edge_data, cfg: ReachConfig,
              seed: int = 0, successor_policy: str = "sorted",
              exhaustive_controllers: bool = False,
              verify_fn=verify_edge) -> SearchResult:
    """Depth-first search over the expanded DFA, taking an edge only when
    ``verify_fn`` certifies it.

    ``edge_data(origin_src, origin_tgt)`` returns (EdgeSpec, candidates)
    with candidates an ordered list of (Region, controller_id, controller).
    The default policy tries the first safe controller and commits to it
    (failed successors are discarded for good, matching the search's
    non-exhaustive contract); ``exhaustive_controllers`` instead branches
    over every certified candidate.
    """
    if successor_policy not in ("sorted", "random"):
        raise ValueError(f"unknown successor policy {successor_policy!r}")
    attempts: list[EdgeAttempt] = []
    edge_index = {e: i for i, e in enumerate(sorted(expanded.edges))}
    order_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD15]))

    if expanded.initial in expanded.accepting:
        empty = Strategy((), (expanded.initial,), (), cfg.delta_m)
        return SearchResult(True, empty, ())

    def ordered(successors):
        if successor_policy == "random":
            successors = list(successors)
            order_rng.shuffle(successors)
            return tuple(successors)
        return successors

    def dfs(cur: str, x0) -> Strategy | None:
        for nxt in ordered(expanded.successors(cur)):
            spec, candidates = edge_data(expanded.origin(cur), expanded.origin(nxt))
            for c_idx, (region, ctrl_id, controller) in enumerate(candidates):
                rng = stream(seed, edge_index[(cur, nxt)], c_idx)
                outcome = verify_fn(x0, spec, region, controller, cfg, rng,
                                    controller_id=ctrl_id)
                attempts.append(EdgeAttempt((cur, nxt), (spec.source, spec.target),
                                            ctrl_id, region.name, outcome))
                if not outcome.safe:
                    continue
                seg = Segment(ctrl_id, outcome.horizon, (cur, nxt),
                              (spec.source, spec.target), region.name)
                nxt_x0 = outcome.tube.steps[-1]
                if nxt in expanded.accepting:
                    return Strategy((seg,), (cur, nxt), (outcome.tube,), cfg.delta_m)
                sub = dfs(nxt, nxt_x0)
                if sub is not None:
                    return Strategy((seg,) + sub.segments, (cur,) + sub.dfa_path,
                                    (outcome.tube,) + sub.tubes, cfg.delta_m)
                if not exhaustive_controllers:
                    break  # the edge was certified but the branch died: move on
        return None

    strategy = dfs(expanded.initial, as_reach_step(x0_set))
    return SearchResult(strategy is not None, strategy, tuple(attempts))


def replay_certificate(strategy: Strategy, spec_lookup) -> tuple[bool, list[str]]:
    """Geometric re-audit of a strategy from its stored tubes, without any
    resampling: every intermediate step must clear the edge's stay regions,
    every final step must sit inside the target clear of the edge's avoid
    regions, and consecutive tubes must chain initial sets exactly."""
    issues: list[str] = []
    prev_last: ReachStep | None = None
    for k, (seg, tube) in enumerate(zip(strategy.segments, strategy.tubes)):
        spec, target = spec_lookup(seg)
        steps = tube.steps
        if prev_last is not None:
            same = np.array_equal(prev_last.vertices, steps[0].vertices) and \
                prev_last.epsilon == steps[0].epsilon
            if not same:
                issues.append(f"segment {k}: initial set does not chain from segment {k-1}")
        stay_range = steps[:-1] if spec.has_self_loop else []
        for step in stay_range:
            for r in spec.stay_avoid:
                if not hull_avoids_region(step, r):
                    issues.append(
                        f"segment {k}: step {step.t} intrudes on stay region {r.name}")
        last = steps[-1]
        if not hull_inside_region(last, target):
            issues.append(f"segment {k}: final set not inside target {target.name}")
        for r in spec.avoid:
            if not hull_avoids_region(last, r):
                issues.append(f"segment {k}: final set intrudes on {r.name}")
        if seg.horizon != last.t:
            issues.append(f"segment {k}: recorded horizon {seg.horizon} != tube end {last.t}")
        prev_last = last
    return (not issues, issues)
