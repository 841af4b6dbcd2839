"""End-to-end orchestration: translate, prune, expand, search, certify,
simulate, and emit the machine-readable report.

A report plus the scenario file and seed reconstructs a run exactly; the
``timings`` block is the one field exempt from byte-for-byte
reproducibility.  Runs are designed as one scenario per process.
"""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .automaton import Dfa, prune_infeasible, to_dot, translate
from .controller import MlpController, load_weights
from .dynamics import sample_noise, stream, unicycle_step, project_input
from .ltl import parse
from .reach import ReachConfig
from .scenario import ScenarioConfig
from .synthesis import SearchResult, Strategy, preprocess, reach_dfs, replay_certificate
from .viz import export_svg, export_tube_csv, step_statuses
from .workspace import EdgeSpec, edge_spec


@dataclass
class VerificationReport:
    verdict: bool
    strategy: Strategy | None
    search: SearchResult
    dfa: Dfa
    pruned: Dfa
    expanded_states: int
    probability_bound: float | None
    timings: dict
    warnings: tuple[str, ...]
    outputs: dict


def dfa_monitor(d: Dfa, trace) -> bool:
    """Run a symbol trace through the automaton; accepted iff the accepting
    state is entered at or before the end."""
    return d.accepts(trace)


def _load_controllers(cfg: ScenarioConfig) -> dict[str, tuple[str, MlpController]]:
    out = {}
    for ref in cfg.controllers:
        wts = load_weights(cfg.weights_path(ref))
        out[ref.region] = (ref.controller_id, MlpController(wts))
    return out


def reach_config(cfg: ScenarioConfig, epsilon: float | None = None) -> ReachConfig:
    return ReachConfig(
        samples=cfg.samples,
        epsilon=cfg.epsilon if epsilon is None else epsilon,
        noise=cfg.noise,
        tau=cfg.tau,
        state_box=cfg.workspace.state_box,
        input_box=cfg.workspace.input_box,
        delta_m=cfg.delta_m,
        horizon_cap=cfg.horizon_cap,
        mode=cfg.reach_mode,
    )


def run_verify(cfg: ScenarioConfig, out_dir: str | None = None,
               epsilon: float | None = None) -> VerificationReport:
    """The full pipeline for one scenario.  ``epsilon`` overrides the
    scenario's padding (used by the conservativeness ablation)."""
    timings: dict[str, float] = {}
    w = cfg.workspace

    t0 = time.perf_counter()
    formula = parse(cfg.formula_text, w.atom_names)
    dfa = translate(formula)
    timings["translate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    pruned = prune_infeasible(dfa, w)
    timings["prune"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    expanded = preprocess(pruned)
    timings["preprocess"] = time.perf_counter() - t0

    controllers = _load_controllers(cfg)
    registry = cfg.registry()
    spec_cache: dict[tuple[str, str], EdgeSpec] = {}
    extra_warnings: list[str] = []

    def edge_data(src: str, tgt: str):
        key = (src, tgt)
        if key not in spec_cache:
            spec_cache[key] = edge_spec(w, pruned, src, tgt, registry)
        spec = spec_cache[key]
        cands = []
        for region, ctrl_id in spec.reach_targets:
            _, controller = controllers[region.name]
            cands.append((region, ctrl_id, controller))
        if not cands and src != tgt:
            msg = (f"edge {src} -> {tgt} has no controller candidates; "
                   "it cannot be verified")
            if msg not in extra_warnings:
                extra_warnings.append(msg)
        return spec, cands

    rcfg = reach_config(cfg, epsilon)
    t0 = time.perf_counter()
    result = reach_dfs(expanded, cfg.initial_box, edge_data, rcfg,
                       seed=cfg.seed, successor_policy=cfg.successor_policy,
                       exhaustive_controllers=cfg.exhaustive_controllers)
    timings["search"] = time.perf_counter() - t0

    certified = None
    if result.success and result.strategy.segments:
        def lookup(seg):
            spec = spec_cache[seg.origin_edge]
            return spec, w.region(seg.target_region)

        ok, issues = replay_certificate(result.strategy, lookup)
        certified = ok
        if not ok:
            raise AssertionError(
                "certificate replay failed for a returned strategy:\n  "
                + "\n  ".join(issues))

    bound = result.strategy.probability_bound if result.success else None
    outputs: dict = {"certified": certified}
    report = VerificationReport(
        verdict=result.success,
        strategy=result.strategy,
        search=result,
        dfa=dfa,
        pruned=pruned,
        expanded_states=len(expanded.states),
        probability_bound=bound,
        timings=timings,
        warnings=pruned.warnings + tuple(extra_warnings),
        outputs=outputs,
    )
    if not report.verdict:
        # a False verdict always carries a reason: a failed edge attempt or
        # a structural warning from pruning/candidate collection
        assert any(not a.outcome.safe for a in result.attempts) or report.warnings
    if out_dir is not None:
        _write_outputs(report, cfg, out_dir, spec_cache)
    return report


def _edge_slug(edge: tuple[str, str]) -> str:
    return f"{edge[0]}_{edge[1]}".replace("~", "-")


def _write_outputs(report: VerificationReport, cfg: ScenarioConfig,
                   out_dir: str, spec_cache) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "dfa.dot"), "w") as fh:
        fh.write(to_dot(report.pruned))
    tube_files = []
    svg_files = []
    for attempt in report.search.attempts:
        tube = attempt.outcome.tube
        if len(tube.steps) < 1:
            continue
        slug = _edge_slug(attempt.edge) + "_" + attempt.controller_id
        csv_name = f"tube_{slug}.csv"
        export_tube_csv(tube, os.path.join(out_dir, csv_name))
        tube_files.append(csv_name)
        spec = spec_cache[attempt.origin_edge]
        statuses = step_statuses(tube, cfg.workspace.region(attempt.target_region),
                                 spec.stay_avoid)
        svg_name = f"reach_{slug}.svg"
        export_svg([tube], cfg.workspace, os.path.join(out_dir, svg_name),
                   statuses={(0, t): s for t, s in statuses.items()})
        svg_files.append(svg_name)
    report.outputs.update({"tubes": tube_files, "svg": svg_files, "dot": "dfa.dot"})
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        fh.write(report_json(report, cfg))


def report_json(report: VerificationReport, cfg: ScenarioConfig) -> str:
    strategy = None
    if report.strategy is not None:
        strategy = {
            "segments": [
                {"controller": s.controller_id, "horizon": s.horizon,
                 "edge": list(s.edge), "origin_edge": list(s.origin_edge),
                 "target": s.target_region}
                for s in report.strategy.segments
            ],
            "dfa_path": list(report.strategy.dfa_path),
            "F": report.strategy.total_horizon,
            "delta_m": report.strategy.delta_m,
            "probability_bound": report.strategy.probability_bound,
        }
    doc = {
        "scenario": {
            "name": cfg.name,
            "seed": cfg.seed,
            "formula": cfg.formula_text,
            "samples": cfg.samples,
            "epsilon": cfg.epsilon,
            "delta_m": cfg.delta_m,
            "noise": cfg.noise,
            "tau": cfg.tau,
            "mode": cfg.reach_mode,
        },
        "verdict": report.verdict,
        "probability_bound": report.probability_bound,
        "dfa": {
            "states": len(report.dfa.states),
            "transitions": report.dfa.transition_count(),
            "pruned_transitions": report.pruned.transition_count(),
            "expanded_states": report.expanded_states,
        },
        "strategy": strategy,
        "edges": [
            {
                "edge": list(a.edge),
                "origin_edge": list(a.origin_edge),
                "controller": a.controller_id,
                "target": a.target_region,
                "safe": a.outcome.safe,
                "horizon": a.outcome.horizon,
                "reason": a.outcome.reason,
                "t_fail": a.outcome.t_fail,
                "region": a.outcome.region,
            }
            for a in report.search.attempts
        ],
        "warnings": list(report.warnings),
        "outputs": report.outputs,
        "timings": report.timings,
    }
    return json.dumps(doc, indent=2, sort_keys=True)


@dataclass
class SimulationResult:
    runs: int
    successes: int
    fraction: float
    states: np.ndarray  # (runs, F+1, d)
    accepted: np.ndarray


def run_simulate(cfg: ScenarioConfig, strategy: Strategy, n_rollouts: int,
                 noise: float | None = None) -> SimulationResult:
    """Execute the strategy segments on fresh noisy rollouts and monitor
    each label trace on the pruned automaton."""
    if n_rollouts < 1:
        raise ValueError("need at least one rollout")
    w = cfg.workspace
    formula = parse(cfg.formula_text, w.atom_names)
    pruned = prune_infeasible(translate(formula), w)
    controllers = {ref.region: MlpController(load_weights(cfg.weights_path(ref)))
                   for ref in cfg.controllers}
    noise = cfg.noise if noise is None else noise

    rng = stream(cfg.seed, 0x51)
    x = cfg.initial_box.sample(n_rollouts, rng)
    total = sum(seg.horizon for seg in strategy.segments)
    states = np.empty((n_rollouts, total + 1, x.shape[1]))
    states[:, 0] = x
    t = 0
    for seg in strategy.segments:
        controller = controllers[seg.target_region]
        for _ in range(seg.horizon):
            u = project_input(controller(x), w.input_box)
            nu = sample_noise(noise, rng, n=n_rollouts, dim=x.shape[1]) \
                if noise > 0 else np.zeros_like(x)
            x = unicycle_step(x, u, nu, cfg.tau)
            t += 1
            states[:, t] = x
    accepted = np.zeros(n_rollouts, dtype=bool)
    for i in range(n_rollouts):
        trace = w.label_points(states[i])
        accepted[i] = dfa_monitor(pruned, trace)
    return SimulationResult(
        runs=n_rollouts,
        successes=int(accepted.sum()),
        fraction=float(accepted.mean()),
        states=states,
        accepted=accepted,
    )


def run_estimate_delta(cfg: ScenarioConfig, strategy: Strategy,
                       holdout: int = 10_000) -> list[np.ndarray]:
    """Per-step empirical containment rates along a verified strategy.

    Both the hull-forming cloud and the fresh holdout are propagated through
    the whole composition (matching the particle reach mode), so each step's
    rate estimates the probability that an unseen trajectory stays inside
    that step's padded hull.
    """
    from .reach import hull_of_samples, propagate, sample_from_set
    from .geometry import within_distance

    controllers = {ref.region: MlpController(load_weights(cfg.weights_path(ref)))
                   for ref in cfg.controllers}
    rcfg = reach_config(cfg)
    rng = stream(cfg.seed, 0xDE17A)
    main = sample_from_set(cfg.initial_box, rcfg.samples, rng).points
    fresh = sample_from_set(cfg.initial_box, holdout, rng).points
    rates = []
    for seg in strategy.segments:
        controller = controllers[seg.target_region]
        seg_rates = np.empty(seg.horizon)
        for t in range(1, seg.horizon + 1):
            main = propagate(main, controller, rcfg.noise, rcfg.tau, rng,
                             rcfg.input_box)
            fresh = propagate(fresh, controller, rcfg.noise, rcfg.tau, rng,
                              rcfg.input_box)
            hull = hull_of_samples(main)
            seg_rates[t - 1] = float(
                within_distance(hull, fresh, rcfg.epsilon).mean())
        rates.append(seg_rates)
    return rates
