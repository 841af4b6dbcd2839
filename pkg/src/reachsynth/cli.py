"""Command line entry points.

Subcommands: translate, train, verify, simulate, reach.  Exit status is 0
when the answer is True (or the action succeeded), 1 when a verification
answers False, and 2 on any error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .automaton import prune_infeasible, to_dot, translate
from .controller import controller_accuracy, generate_dataset, MlpController, \
    load_weights, save_weights, train_imitation
from .dynamics import stream
from .ltl import LtlError, formula_to_str, parse
from .pipeline import reach_config, run_simulate, run_verify
from .reach import ReachStep, ReachTube, as_reach_step, hull_of_samples, \
    propagate, sample_from_set
from .scenario import ScenarioError, load_scenario
from .synthesis import Segment, Strategy
from .viz import export_svg, export_tube_csv


def _cmd_translate(cfg, args) -> int:
    text = args.formula or cfg.formula_text
    formula = parse(text, cfg.workspace.atom_names)
    dfa = translate(formula)
    pruned = prune_infeasible(dfa, cfg.workspace)
    dump = {
        "formula": formula_to_str(formula),
        "states": list(dfa.states),
        "initial": dfa.initial,
        "accepting": dfa.accepting,
        "transitions": dfa.transition_count(),
        "edges": [
            {"source": e.source, "target": e.target,
             "guard": formula_to_str(e.guard),
             "pruned": pruned.edge(e.source, e.target) is None}
            for e in dfa.edges
        ],
        "warnings": list(pruned.warnings),
    }
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "dfa.dot"), "w") as fh:
        fh.write(to_dot(pruned))
    with open(os.path.join(args.out, "dfa.json"), "w") as fh:
        json.dump(dump, fh, indent=2, sort_keys=True)
    print(f"{len(dfa.states)} states, {dfa.transition_count()} transitions "
          f"({pruned.transition_count()} after pruning); wrote {args.out}/dfa.dot")
    return 0


def _cmd_train(cfg, args) -> int:
    w = cfg.workspace
    regions = [args.region] if args.region else [r.region for r in cfg.controllers]
    order = {ref.region: i for i, ref in enumerate(cfg.controllers)}
    for rname in regions:
        ref = cfg.controller_for(rname)
        if ref is None:
            print(f"no controller entry for region {rname!r}", file=sys.stderr)
            return 2
        goal = w.region(rname)
        idx = order[rname]
        data = generate_dataset(w, goal, cfg.train_starts, cfg.expert_horizon,
                                stream(cfg.seed, 0x7A, idx), cfg.expert_gains,
                                cfg.tau, split="train")
        wts, rep = train_imitation(data, (40, 40), cfg.train,
                                   stream(cfg.seed, 0x7B, idx))
        test = w.state_box.sample(cfg.test_starts, stream(cfg.seed, 0x7C, idx))
        acc = controller_accuracy(MlpController(wts), w, goal, test,
                                  cfg.expert_horizon, cfg.noise, cfg.tau,
                                  stream(cfg.seed, 0x7D, idx))
        path = cfg.weights_path(ref)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        save_weights(wts, path)
        print(f"{ref.controller_id}: {len(data)} pairs, train loss "
              f"{rep.train_loss:.2e}, val loss {rep.val_loss:.2e}, "
              f"held-out success {acc:.1%} -> {path}")
    return 0


def _cmd_verify(cfg, args) -> int:
    report = run_verify(cfg, out_dir=args.out, epsilon=args.epsilon)
    if report.verdict:
        segs = ", ".join(f"{s.controller_id}({s.horizon})"
                         for s in report.strategy.segments)
        print(f"True: [{segs}], probability bound "
              f"{report.probability_bound:.4f}")
        return 0
    reasons = "; ".join(
        f"{a.edge[0]}->{a.edge[1]} via {a.controller_id}: {a.outcome.reason}"
        for a in report.search.attempts if not a.outcome.safe)
    print(f"False ({reasons or 'no verifiable edges'})")
    return 1


def _cmd_simulate(cfg, args) -> int:
    with open(args.strategy) as fh:
        doc = json.load(fh)
    sdoc = doc.get("strategy", doc)
    segments = tuple(
        Segment(s["controller"], int(s["horizon"]), tuple(s["edge"]),
                tuple(s.get("origin_edge", s["edge"])), s["target"])
        for s in sdoc["segments"])
    strategy = Strategy(segments, tuple(sdoc.get("dfa_path", ())), (),
                        float(sdoc.get("delta_m", cfg.delta_m)))
    sim = run_simulate(cfg, strategy, args.n, noise=args.noise)
    print(f"{sim.successes}/{sim.runs} rollouts satisfied the task "
          f"({sim.fraction:.3f}); bound {strategy.probability_bound:.4f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "simulation.csv"), "w") as fh:
            fh.write("rollout,t," + ",".join(
                f"x{i+1}" for i in range(sim.states.shape[2])) + ",accepted\n")
            for i in range(sim.runs):
                for t in range(sim.states.shape[1]):
                    row = ",".join(f"{v:.17g}" for v in sim.states[i, t])
                    fh.write(f"{i},{t},{row},{int(sim.accepted[i])}\n")
    return 0 if sim.fraction > 0 else 1


def _cmd_reach(cfg, args) -> int:
    ref = next((r for r in cfg.controllers if r.controller_id == args.controller), None)
    if ref is None:
        print(f"unknown controller id {args.controller!r}", file=sys.stderr)
        return 2
    controller = MlpController(load_weights(cfg.weights_path(ref)))
    rcfg = reach_config(cfg)
    rng = stream(cfg.seed, 0x2EAC)
    pts = sample_from_set(cfg.initial_box, rcfg.samples, rng).points
    steps = [as_reach_step(cfg.initial_box)]
    for t in range(1, args.steps + 1):
        pts = propagate(pts, controller, rcfg.noise, rcfg.tau, rng, rcfg.input_box)
        steps.append(ReachStep(t, hull_of_samples(pts), rcfg.epsilon))
    tube = ReachTube(tuple(steps), ref.controller_id, rcfg.samples, rcfg.delta_m)
    os.makedirs(args.out, exist_ok=True)
    export_tube_csv(tube, os.path.join(args.out, f"tube_{ref.controller_id}.csv"))
    export_svg([tube], cfg.workspace,
               os.path.join(args.out, f"reach_{ref.controller_id}.svg"))
    print(f"wrote {args.steps}-step tube for {ref.controller_id} to {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="reachsynth",
        description="Verified composition of NN controllers for co-safe LTL tasks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("translate", help="formula -> DFA dot/json")
    p.add_argument("scenario")
    p.add_argument("--formula", default=None)
    p.add_argument("--out", default="out")

    p = sub.add_parser("train", help="imitation-train goal controllers")
    p.add_argument("scenario")
    p.add_argument("--region", default=None)

    p = sub.add_parser("verify", help="synthesise a verified strategy")
    p.add_argument("scenario")
    p.add_argument("--out", default="out")
    p.add_argument("--epsilon", type=float, default=None)

    p = sub.add_parser("simulate", help="Monte Carlo validation of a strategy")
    p.add_argument("scenario")
    p.add_argument("--strategy", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("reach", help="reachable tube under one controller")
    p.add_argument("scenario")
    p.add_argument("--controller", required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", default="out")

    args = parser.parse_args(argv)
    try:
        cfg = load_scenario(args.scenario)
        handler = {
            "translate": _cmd_translate,
            "train": _cmd_train,
            "verify": _cmd_verify,
            "simulate": _cmd_simulate,
            "reach": _cmd_reach,
        }[args.command]
        return handler(cfg, args)
    except (ScenarioError, LtlError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
