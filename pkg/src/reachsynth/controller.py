"""Goal-seeking controllers: ReLU MLP inference and training, the analytic
steering expert used to generate imitation data, and weight-file IO.

The expert steers toward the centre of a goal box: angular velocity tracks
the bearing error, linear velocity scales with distance and is zeroed when
the goal lies behind the robot.  MLP controllers imitate it from sampled
(state, action) pairs; training is plain mini-batch SGD with momentum and
an in-module backward pass.  Input standardisation is folded into the
first layer after training, so saved weights always act on raw states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import project_input, sample_noise, unicycle_step
from .workspace import Box, Region, Workspace


class ControllerError(ValueError):
    pass


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class MlpWeights:
    """Affine-ReLU chain: ReLU on hidden layers, identity output."""

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __post_init__(self):
        for i, (w, b) in enumerate(self.layers):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ControllerError(f"layer {i}: weight/bias shapes inconsistent")
            if i > 0 and w.shape[1] != self.layers[i - 1][0].shape[0]:
                raise ControllerError(f"layer {i}: input dim breaks the chain")

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[0]


def init_mlp(sizes: tuple[int, ...], rng: np.random.Generator) -> MlpWeights:
    layers = []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        layers.append((w, np.zeros(fan_out)))
    return MlpWeights(tuple(layers))


def mlp_forward(wts: MlpWeights, x) -> np.ndarray:
    """Evaluate the network; accepts one state (d,) or a batch (n, d)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = np.atleast_2d(x)
    if h.shape[1] != wts.input_dim:
        raise ControllerError(
            f"input dim {h.shape[1]} does not match network ({wts.input_dim})")
    last = len(wts.layers) - 1
    for i, (w, b) in enumerate(wts.layers):
        h = h @ w.T + b
        if i != last:
            h = np.maximum(h, 0.0)
    return h[0] if single else h


def activation_pattern(wts: MlpWeights, x) -> tuple:
    """Sign pattern of hidden pre-activations (identifies the linear region)."""
    h = np.atleast_2d(np.asarray(x, dtype=float))
    pattern = []
    for i, (w, b) in enumerate(wts.layers[:-1]):
        h = h @ w.T + b
        pattern.append(tuple((h[0] > 0).tolist()))
        h = np.maximum(h, 0.0)
    return tuple(pattern)


# -- analytic expert -----------------------------------------------------------

@dataclass(frozen=True)
class ExpertGains:
    k_v: float = 0.25
    k_omega: float = 1.0


def wrap_angle(a):
    return (np.asarray(a, dtype=float) + np.pi) % (2 * np.pi) - np.pi


def expert_actions(states: np.ndarray, goal: Region, input_box: Box,
                   gains: ExpertGains = ExpertGains()) -> np.ndarray:
    """Steering law toward the goal-box centre, batched over states."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    centre = (np.asarray(goal.lo) + np.asarray(goal.hi)) / 2.0
    delta = centre[None, :] - states[:, list(goal.dims)]
    dist = np.linalg.norm(delta, axis=1)
    bearing = np.arctan2(delta[:, 1], delta[:, 0])
    err = wrap_angle(bearing - states[:, 2])
    u2 = np.clip(gains.k_omega * err, input_box.lo[1], input_box.hi[1])
    u1 = np.clip(gains.k_v * dist * np.maximum(np.cos(err), 0.0),
                 0.0, input_box.hi[0])
    return np.column_stack([u1, u2])


def expert_action(state, goal: Region, input_box: Box,
                  gains: ExpertGains = ExpertGains()) -> np.ndarray:
    return expert_actions(np.asarray(state)[None, :], goal, input_box, gains)[0]


class ExpertController:
    def __init__(self, goal: Region, input_box: Box, gains: ExpertGains = ExpertGains()):
        self.goal = goal
        self.input_box = input_box
        self.gains = gains

    def __call__(self, states: np.ndarray) -> np.ndarray:
        return expert_actions(states, self.goal, self.input_box, self.gains)


class MlpController:
    def __init__(self, wts: MlpWeights):
        self.wts = wts

    def __call__(self, states: np.ndarray) -> np.ndarray:
        return mlp_forward(self.wts, np.atleast_2d(states))


# -- imitation data ------------------------------------------------------------

@dataclass
class ImitationDataset:
    states: np.ndarray
    actions: np.ndarray
    split: str = "train"

    def __len__(self):
        return len(self.states)


def _inside_interior(x, goal: Region) -> bool:
    p = np.asarray(x)[list(goal.dims)]
    return bool(np.all(p > goal.lo) and np.all(p < goal.hi))


def generate_dataset(w: Workspace, goal: Region, n_starts: int, horizon: int,
                     rng: np.random.Generator, gains: ExpertGains = ExpertGains(),
                     tau: float = 1.0, split: str = "train") -> ImitationDataset:
    """Noiseless expert rollouts from uniform starts; every visited state is
    paired with the expert's action there, stopping once the goal interior
    is reached."""
    if n_starts < 1:
        raise ControllerError("need at least one start")
    states: list[np.ndarray] = []
    actions: list[np.ndarray] = []
    starts = w.state_box.sample(n_starts, rng)
    for x in starts:
        for _ in range(horizon):
            u = expert_action(x, goal, w.input_box, gains)
            states.append(x.copy())
            actions.append(u)
            if _inside_interior(x, goal):
                break
            x = unicycle_step(x, u, np.zeros(len(x)), tau)
    return ImitationDataset(np.array(states), np.array(actions), split=split)


# -- training --------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch_size: int = 256
    learning_rate: float = 0.05
    momentum: float = 0.9
    lr_decay: float = 0.97
    val_fraction: float = 0.1


@dataclass
class TrainReport:
    train_loss: float
    val_loss: float
    epoch_losses: list = field(default_factory=list)


def loss_and_gradients(wts: MlpWeights, x: np.ndarray, y: np.ndarray):
    """Mean squared action error and its gradient w.r.t. every parameter."""
    n = len(x)
    acts = [np.atleast_2d(x)]
    h = acts[0]
    last = len(wts.layers) - 1
    pre = []
    for i, (w, b) in enumerate(wts.layers):
        z = h @ w.T + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i != last else z
        acts.append(h)
    diff = acts[-1] - y
    loss = float(np.mean(diff ** 2))
    grad = diff * (2.0 / diff.size)
    grads = []
    for i in range(last, -1, -1):
        w, b = wts.layers[i]
        gw = grad.T @ acts[i]
        gb = grad.sum(axis=0)
        grads.append((gw, gb))
        if i > 0:
            grad = (grad @ w) * (pre[i - 1] > 0)
    grads.reverse()
    return loss, grads


def _standardize(states: np.ndarray):
    mu = states.mean(axis=0)
    sd = states.std(axis=0)
    sd = np.where(sd < 1e-9, 1.0, sd)
    return mu, sd


def _fold_standardization(wts: MlpWeights, mu: np.ndarray, sd: np.ndarray) -> MlpWeights:
    w0, b0 = wts.layers[0]
    w_new = w0 / sd[None, :]
    b_new = b0 - w_new @ mu
    return MlpWeights(((w_new, b_new),) + wts.layers[1:])


def train_imitation(data: ImitationDataset, hidden: tuple[int, ...],
                    cfg: TrainConfig, rng: np.random.Generator):
    """SGD-with-momentum imitation fit; returns (weights, report).

    The returned network consumes raw states: the internal input
    standardisation is folded into the first affine layer.
    """
    if len(data) == 0:
        raise ControllerError("empty dataset")
    if data.split == "test":
        raise ControllerError("refusing to train on a dataset tagged 'test'")
    x_all = np.asarray(data.states, dtype=float)
    y_all = np.asarray(data.actions, dtype=float)
    mu, sd = _standardize(x_all)
    x_all = (x_all - mu) / sd

    n = len(x_all)
    n_val = int(round(cfg.val_fraction * n))
    perm = rng.permutation(n)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    x_tr, y_tr = x_all[train_idx], y_all[train_idx]
    x_val, y_val = x_all[val_idx], y_all[val_idx]

    sizes = (x_all.shape[1], *hidden, y_all.shape[1])
    wts = init_mlp(sizes, rng)
    velocity = [(np.zeros_like(w), np.zeros_like(b)) for w, b in wts.layers]
    lr = cfg.learning_rate
    epoch_losses = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(x_tr))
        total = 0.0
        batches = 0
        for s in range(0, len(order), cfg.batch_size):
            sel = order[s:s + cfg.batch_size]
            loss, grads = loss_and_gradients(wts, x_tr[sel], y_tr[sel])
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became {loss} at epoch {epoch}, batch {batches}; "
                    f"lr={lr:.4g}")
            total += loss
            batches += 1
            new_layers = []
            new_velocity = []
            for (w, b), (vw, vb), (gw, gb) in zip(wts.layers, velocity, grads):
                vw = cfg.momentum * vw - lr * gw
                vb = cfg.momentum * vb - lr * gb
                new_layers.append((w + vw, b + vb))
                new_velocity.append((vw, vb))
            wts = MlpWeights(tuple(new_layers))
            velocity = new_velocity
        epoch_losses.append(total / max(batches, 1))
        lr *= cfg.lr_decay
    train_loss, _ = loss_and_gradients(wts, x_tr, y_tr)
    val_loss = train_loss if len(x_val) == 0 else loss_and_gradients(wts, x_val, y_val)[0]
    folded = _fold_standardization(wts, mu, sd)
    return folded, TrainReport(train_loss=train_loss, val_loss=val_loss,
                               epoch_losses=epoch_losses)


# -- evaluation ------------------------------------------------------------------

def controller_accuracy(controller, w: Workspace, goal: Region,
                        test_starts: np.ndarray, horizon: int, noise: float,
                        tau: float, rng: np.random.Generator) -> float:
    """Fraction of rollouts entering the goal interior within the horizon."""
    x = np.array(test_starts, dtype=float)
    done = np.zeros(len(x), dtype=bool)

    def interior(pts):
        p = pts[:, list(goal.dims)]
        return np.all((p > goal.lo) & (p < goal.hi), axis=1)

    done |= interior(x)
    for _ in range(horizon):
        u = project_input(controller(x), w.input_box)
        nu = sample_noise(noise, rng, n=len(x), dim=x.shape[1]) if noise > 0 else np.zeros_like(x)
        x = unicycle_step(x, u, nu, tau)
        done |= interior(x)
        if done.all():
            break
    return float(done.mean())


# -- weight file IO ---------------------------------------------------------------

def save_weights(wts: MlpWeights, path) -> None:
    """Layered text format: header 'mlp <in> <out> <layers>', then per layer
    'rows cols', the matrix row-major one row per line, and the bias line."""
    lines = [f"mlp {wts.input_dim} {wts.output_dim} {len(wts.layers)}"]
    for w, b in wts.layers:
        lines.append(f"{w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(" ".join(f"{v:.17g}" for v in row))
        lines.append(" ".join(f"{v:.17g}" for v in b))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_weights(path) -> MlpWeights:
    with open(path) as fh:
        tokens = fh.read().split("\n")
    rows = [line.split() for line in tokens if line.strip()]
    if not rows or rows[0][:1] != ["mlp"] or len(rows[0]) != 4:
        raise ControllerError(f"{path}: missing or malformed 'mlp' header")
    try:
        d_in, d_out, n_layers = map(int, rows[0][1:])
        layers = []
        at = 1
        for _ in range(n_layers):
            r, c = map(int, rows[at])
            at += 1
            mat = np.array([[float(v) for v in rows[at + i]] for i in range(r)])
            if mat.shape != (r, c):
                raise ControllerError(f"{path}: matrix block has wrong width")
            at += r
            bias = np.array([float(v) for v in rows[at]])
            if bias.shape != (r,):
                raise ControllerError(f"{path}: bias length mismatch")
            at += 1
            layers.append((mat, bias))
        if at != len(rows):
            raise ControllerError(f"{path}: trailing content after weights")
    except (IndexError, ValueError) as err:
        raise ControllerError(f"{path}: truncated or malformed weight file: {err}") from err
    wts = MlpWeights(tuple(layers))
    if wts.input_dim != d_in or wts.output_dim != d_out:
        raise ControllerError(f"{path}: header dims do not match layer blocks")
    return wts
