"""Scenario files: a TOML document describing the task, the geometry, the
dynamics bounds, the reachability budget and the controller registry.

Validation is collected, not fail-fast: every violation is reported with
its field path in one ScenarioError.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

import numpy as np

from .controller import ExpertGains, TrainConfig
from .ltl import LtlError, parse
from .workspace import Box, Region, Workspace, WorkspaceError


class ScenarioError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid scenario:\n  " + "\n  ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class ControllerRef:
    region: str
    controller_id: str
    path: str


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    seed: int
    formula_text: str
    workspace: Workspace
    initial_box: Box
    tau: float
    noise: float
    samples: int
    epsilon: float
    delta_m: float
    horizon_cap: int
    reach_mode: str
    successor_policy: str
    exhaustive_controllers: bool
    controllers: tuple[ControllerRef, ...]
    expert_gains: ExpertGains
    expert_horizon: int
    train: TrainConfig
    train_starts: int
    test_starts: int
    base_dir: str

    def controller_for(self, region: str) -> ControllerRef | None:
        for ref in self.controllers:
            if ref.region == region:
                return ref
        return None

    def registry(self) -> dict[str, str]:
        return {ref.region: ref.controller_id for ref in self.controllers}

    def weights_path(self, ref: ControllerRef) -> str:
        return os.path.join(self.base_dir, ref.path)


def _box(value, path, problems, dim=None) -> Box | None:
    try:
        lo = tuple(float(iv[0]) for iv in value)
        hi = tuple(float(iv[1]) for iv in value)
        box = Box(lo, hi)
    except (TypeError, IndexError, ValueError, WorkspaceError) as err:
        problems.append(f"{path}: {err}")
        return None
    if dim is not None and box.dim != dim:
        problems.append(f"{path}: expected {dim} intervals, found {box.dim}")
        return None
    return box


def load_scenario(path: str) -> ScenarioConfig:
    """Parse and validate a scenario file; raises ScenarioError with every
    violation, or OSError for IO failures."""
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as err:
            raise ScenarioError([f"TOML parse error: {err}"]) from err
    problems: list[str] = []
    base_dir = os.path.dirname(os.path.abspath(path))

    def get(table, key, kind, path_name, default=None, required=True):
        if key not in table:
            if required and default is None:
                problems.append(f"{path_name}: missing")
                return None
            return default
        value = table[key]
        if kind is float and isinstance(value, int):
            value = float(value)
        if not isinstance(value, kind):
            problems.append(f"{path_name}: expected {kind.__name__}")
            return None
        return value

    sc = doc.get("scenario", {})
    name = get(sc, "name", str, "scenario.name", default=os.path.basename(path))
    seed = get(sc, "seed", int, "scenario.seed", default=0)
    formula_text = get(sc, "formula", str, "scenario.formula")

    dyn = doc.get("dynamics", {})
    model = get(dyn, "model", str, "dynamics.model", default="unicycle")
    if model != "unicycle":
        problems.append(f"dynamics.model: unknown model {model!r}")
    tau = get(dyn, "tau", float, "dynamics.tau", default=1.0)
    noise = get(dyn, "noise", float, "dynamics.noise", default=0.002)
    state_box = _box(dyn.get("state_box"), "dynamics.state_box", problems) \
        if "state_box" in dyn else problems.append("dynamics.state_box: missing")
    input_box = _box(dyn.get("input_box"), "dynamics.input_box", problems) \
        if "input_box" in dyn else problems.append("dynamics.input_box: missing")

    ws = doc.get("workspace", {})
    radius = get(ws, "robot_radius", float, "workspace.robot_radius", default=0.0)
    regions: list[Region] = []
    for i, entry in enumerate(ws.get("regions", [])):
        rpath = f"workspace.regions[{i}]"
        rname = get(entry, "name", str, f"{rpath}.name")
        dims = entry.get("dims", [0, 1])
        box = entry.get("box")
        kind = get(entry, "kind", str, f"{rpath}.kind", default="target")
        if rname is None or box is None:
            if box is None:
                problems.append(f"{rpath}.box: missing")
            continue
        try:
            regions.append(Region(rname, tuple(int(d) for d in dims),
                                  tuple(float(iv[0]) for iv in box),
                                  tuple(float(iv[1]) for iv in box), kind))
        except (TypeError, IndexError, ValueError, WorkspaceError) as err:
            problems.append(f"{rpath}: {err}")

    workspace = None
    if state_box is not None and input_box is not None:
        try:
            workspace = Workspace(state_box, input_box, tuple(regions), radius)
        except WorkspaceError as err:
            problems.append(f"workspace: {err}")

    init = doc.get("initial", {})
    initial_box = None
    if "box" not in init:
        problems.append("initial.box: missing")
    elif state_box is not None:
        initial_box = _box(init["box"], "initial.box", problems, dim=state_box.dim)
        if initial_box is not None:
            for d in range(state_box.dim):
                if initial_box.lo[d] < state_box.lo[d] or initial_box.hi[d] > state_box.hi[d]:
                    problems.append(f"initial.box: dimension {d} leaves the state box")

    reach = doc.get("reach", {})
    samples = get(reach, "samples", int, "reach.samples", default=50_000)
    epsilon = get(reach, "epsilon", float, "reach.epsilon", default=0.03)
    delta_m = get(reach, "delta_m", float, "reach.delta_m", default=4e-4)
    horizon_cap = get(reach, "horizon_cap", int, "reach.horizon_cap", default=200)
    reach_mode = get(reach, "mode", str, "reach.mode", default="resample")
    if reach_mode not in ("resample", "particle"):
        problems.append(f"reach.mode: must be 'resample' or 'particle', not {reach_mode!r}")
    if state_box is not None and samples is not None and samples < state_box.dim + 1:
        problems.append("reach.samples: need at least d+1 samples")
    if epsilon is not None and epsilon < 0:
        problems.append("reach.epsilon: must be nonnegative")
    if delta_m is not None and not (0 <= delta_m < 1):
        problems.append("reach.delta_m: must lie in [0, 1)")

    search = doc.get("search", {})
    policy = get(search, "successor_policy", str, "search.successor_policy",
                 default="sorted")
    if policy not in ("sorted", "random"):
        problems.append(f"search.successor_policy: must be 'sorted' or 'random'")
    exhaustive = bool(search.get("exhaustive_controllers", False))

    refs: list[ControllerRef] = []
    for rname, entry in sorted(doc.get("controllers", {}).items()):
        cpath = f"controllers.{rname}"
        if not isinstance(entry, dict):
            problems.append(f"{cpath}: expected a table with id and path")
            continue
        cid = get(entry, "id", str, f"{cpath}.id")
        wpath = get(entry, "path", str, f"{cpath}.path")
        if workspace is not None and rname not in workspace.atom_names:
            problems.append(f"{cpath}: no region named {rname!r}")
        if cid and wpath:
            refs.append(ControllerRef(rname, cid, wpath))

    expert = doc.get("expert", {})
    gains = ExpertGains(
        k_v=get(expert, "k_v", float, "expert.k_v", default=0.25),
        k_omega=get(expert, "k_omega", float, "expert.k_omega", default=1.0),
    )
    expert_horizon = get(expert, "horizon", int, "expert.horizon", default=80)

    train = doc.get("train", {})
    train_cfg = TrainConfig(
        epochs=get(train, "epochs", int, "train.epochs", default=40),
        batch_size=get(train, "batch_size", int, "train.batch_size", default=256),
        learning_rate=get(train, "learning_rate", float, "train.learning_rate", default=0.05),
        momentum=get(train, "momentum", float, "train.momentum", default=0.9),
        lr_decay=get(train, "lr_decay", float, "train.lr_decay", default=0.97),
        val_fraction=get(train, "val_fraction", float, "train.val_fraction", default=0.1),
    )
    train_starts = get(train, "starts", int, "train.starts", default=4800)
    test_starts = get(train, "test_starts", int, "train.test_starts", default=1200)

    # semantic checks that need several sections at once
    if formula_text and workspace is not None:
        try:
            f = parse(formula_text, workspace.atom_names)
        except LtlError as err:
            problems.append(f"scenario.formula: {err}")
            f = None
        if f is not None:
            from .ltl import atoms_of

            registry = {r.region for r in refs}
            for atom in sorted(atoms_of(f)):
                region = workspace.region(atom)
                if region.kind == "target" and atom not in registry:
                    problems.append(
                        f"controllers: target region {atom!r} used by the formula "
                        "has no controller entry")

    if problems:
        raise ScenarioError(problems)
    return ScenarioConfig(
        name=name, seed=seed, formula_text=formula_text, workspace=workspace,
        initial_box=initial_box, tau=tau, noise=noise, samples=samples,
        epsilon=epsilon, delta_m=delta_m, horizon_cap=horizon_cap,
        reach_mode=reach_mode, successor_policy=policy,
        exhaustive_controllers=exhaustive, controllers=tuple(refs),
        expert_gains=gains, expert_horizon=expert_horizon, train=train_cfg,
        train_starts=train_starts, test_starts=test_starts, base_dir=base_dir,
    )
