import numpy as np
import pytest

from reachsynth.controller import (
    ControllerError,
    ExpertController,
    ExpertGains,
    ImitationDataset,
    MlpController,
    MlpWeights,
    TrainConfig,
    activation_pattern,
    controller_accuracy,
    expert_action,
    generate_dataset,
    init_mlp,
    load_weights,
    loss_and_gradients,
    mlp_forward,
    save_weights,
    train_imitation,
)
from reachsynth.dynamics import project_input
from reachsynth.workspace import Box, Region, Workspace

UBOX = Box((-0.22, -0.15), (0.22, 0.15))


def make_workspace():
    goal = Region("goal", (0, 1), (2.0, 2.0), (3.0, 3.0))
    return Workspace(Box((0.0, 0.0, -7.0), (5.0, 5.0, 7.0)), UBOX, (goal,)), goal


# -- forward pass -------------------------------------------------------------

def test_zero_weights_zero_output():
    wts = MlpWeights(((np.zeros((4, 3)), np.zeros(4)), (np.zeros((2, 4)), np.zeros(2))))
    assert np.allclose(mlp_forward(wts, np.ones(3)), 0.0)


def test_identity_single_layer():
    wts = MlpWeights(((np.eye(3), np.zeros(3)),))
    x = np.array([0.3, -0.7, 2.0])
    assert np.allclose(mlp_forward(wts, x), x)


def test_forward_matches_naive_chain():
    rng = np.random.default_rng(0)
    wts = init_mlp((3, 40, 40, 2), rng)
    x = rng.normal(size=(5, 3))
    h = x
    for i, (w, b) in enumerate(wts.layers):
        h = h @ w.T + b
        if i < len(wts.layers) - 1:
            h = np.where(h > 0, h, 0.0)
    assert np.allclose(mlp_forward(wts, x), h, atol=1e-9)


def test_forward_dim_mismatch():
    wts = init_mlp((3, 8, 2), np.random.default_rng(1))
    with pytest.raises(ControllerError):
        mlp_forward(wts, np.ones(4))


def test_piecewise_linearity_within_region():
    rng = np.random.default_rng(2)
    wts = init_mlp((3, 20, 20, 2), rng)
    for _ in range(50):
        x1 = rng.normal(size=3)
        x2 = x1 + rng.normal(scale=1e-4, size=3)
        if activation_pattern(wts, x1) != activation_pattern(wts, x2):
            continue
        lam = rng.uniform()
        mid = lam * x1 + (1 - lam) * x2
        if activation_pattern(wts, mid) != activation_pattern(wts, x1):
            continue
        expect = lam * mlp_forward(wts, x1) + (1 - lam) * mlp_forward(wts, x2)
        assert np.allclose(mlp_forward(wts, mid), expect, atol=1e-9)


# -- expert ---------------------------------------------------------------------

def test_expert_zero_at_goal_centre():
    _, goal = make_workspace()
    u = expert_action(np.array([2.5, 2.5, 0.0]), goal, UBOX)
    assert np.allclose(u, 0.0, atol=1e-12)


def test_expert_saturates_straight_ahead():
    _, goal = make_workspace()
    # goal centre is (2.5, 2.5); robot far away facing it exactly
    x = np.array([0.0, 2.5, 0.0])
    u = expert_action(x, goal, UBOX, ExpertGains(k_v=1.0))
    assert np.allclose(u, [0.22, 0.0], atol=1e-12)


def test_expert_goal_behind():
    _, goal = make_workspace()
    x = np.array([5.0, 2.5, 0.0])  # goal exactly behind
    u = expert_action(x, goal, UBOX, ExpertGains(k_v=1.0))
    assert u[0] == 0.0
    assert abs(u[1]) == 0.15


def test_expert_within_bounds_everywhere():
    w, goal = make_workspace()
    rng = np.random.default_rng(3)
    xs = w.state_box.sample(1000, rng)
    us = ExpertController(goal, UBOX)(xs)
    for u in us:
        assert np.allclose(project_input(u, UBOX), u)


# -- dataset ----------------------------------------------------------------------

def test_dataset_start_inside_goal():
    w, goal = make_workspace()
    rng = np.random.default_rng(4)
    data = generate_dataset(w, goal, 1, 50, rng)
    assert len(data) >= 1


def test_dataset_deterministic_under_seed():
    w, goal = make_workspace()
    a = generate_dataset(w, goal, 10, 60, np.random.default_rng(5))
    b = generate_dataset(w, goal, 10, 60, np.random.default_rng(5))
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.actions, b.actions)


def test_dataset_respects_bounds():
    w, goal = make_workspace()
    data = generate_dataset(w, goal, 20, 60, np.random.default_rng(6))
    for u in data.actions:
        assert np.allclose(project_input(u, UBOX), u)


# -- training -----------------------------------------------------------------------

def test_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    wts = init_mlp((3, 8, 2), rng)
    x = rng.normal(size=(3, 3))
    y = rng.normal(size=(3, 2))
    _, grads = loss_and_gradients(wts, x, y)
    step = 1e-6

    def perturbed(li, pick, idx, delta):
        layers = []
        for lj, (lw, lb) in enumerate(wts.layers):
            lw = lw.copy()
            lb = lb.copy()
            if lj == li:
                if pick == 0:
                    lw[idx] += delta
                else:
                    lb[idx] += delta
            layers.append((lw, lb))
        return MlpWeights(tuple(layers))

    for li in range(len(wts.layers)):
        w, b = wts.layers[li]
        for pick, arr in ((0, w), (1, b)):
            flat = [np.unravel_index(k, arr.shape) for k in
                    range(0, arr.size, max(arr.size // 5, 1))]
            for idx in flat:
                idx = idx if pick == 0 else idx[0]
                lp, _ = loss_and_gradients(perturbed(li, pick, idx, step), x, y)
                lm, _ = loss_and_gradients(perturbed(li, pick, idx, -step), x, y)
                numeric = (lp - lm) / (2 * step)
                analytic = grads[li][pick][idx]
                denom = max(abs(numeric), abs(analytic), 1e-8)
                assert abs(numeric - analytic) / denom < 1e-4


def test_training_fits_constant_action():
    rng = np.random.default_rng(8)
    states = rng.uniform(0, 5, size=(500, 3))
    actions = np.tile([0.1, -0.05], (500, 1))
    data = ImitationDataset(states, actions)
    wts, report = train_imitation(
        data, (16,),
        TrainConfig(epochs=300, learning_rate=0.3, lr_decay=0.99, batch_size=64,
                    val_fraction=0.0), rng)
    assert report.train_loss < 1e-4
    out = mlp_forward(wts, states)
    assert np.allclose(out, [0.1, -0.05], atol=1e-2)


def test_training_rejects_test_split():
    data = ImitationDataset(np.zeros((4, 3)), np.zeros((4, 2)), split="test")
    with pytest.raises(ControllerError):
        train_imitation(data, (8,), TrainConfig(epochs=1), np.random.default_rng(0))


def test_training_reports_divergence():
    from reachsynth.controller import TrainingDivergedError

    rng = np.random.default_rng(9)
    states = rng.uniform(0, 5, size=(200, 3))
    actions = rng.uniform(-1, 1, size=(200, 2))
    data = ImitationDataset(states, actions)
    with np.errstate(over="ignore", invalid="ignore"), \
            pytest.raises(TrainingDivergedError) as err:
        train_imitation(data, (16,), TrainConfig(epochs=30, learning_rate=1e4), rng)
    assert "lr=" in str(err.value)


# -- accuracy -----------------------------------------------------------------------

def test_expert_accuracy_noiseless():
    w, goal = make_workspace()
    rng = np.random.default_rng(10)
    starts = np.column_stack([
        rng.uniform(0.5, 4.5, size=50),
        rng.uniform(0.5, 4.5, size=50),
        rng.uniform(-np.pi, np.pi, size=50),
    ])
    ctrl = ExpertController(goal, UBOX, ExpertGains(k_v=0.5))
    acc = controller_accuracy(ctrl, w, goal, starts, 200, 0.0, 1.0, rng)
    assert acc == 1.0


def test_zero_controller_accuracy():
    w, goal = make_workspace()
    zero = lambda xs: np.zeros((len(xs), 2))
    starts = np.array([[0.5, 0.5, 0.0], [2.5, 2.5, 0.0]])
    acc = controller_accuracy(zero, w, goal, starts, 20, 0.0, 1.0,
                              np.random.default_rng(11))
    assert acc == 0.5  # only the start already inside succeeds


# -- IO ------------------------------------------------------------------------------

def test_weights_roundtrip(tmp_path):
    rng = np.random.default_rng(12)
    wts = init_mlp((3, 40, 40, 2), rng)
    path = tmp_path / "w.txt"
    save_weights(wts, path)
    back = load_weights(path)
    for (w1, b1), (w2, b2) in zip(wts.layers, back.layers):
        assert np.array_equal(w1, w2)
        assert np.array_equal(b1, b2)
    x = rng.normal(size=(4, 3))
    assert np.array_equal(mlp_forward(wts, x), mlp_forward(back, x))


def test_weights_truncated_file(tmp_path):
    rng = np.random.default_rng(13)
    wts = init_mlp((3, 8, 2), rng)
    path = tmp_path / "w.txt"
    save_weights(wts, path)
    text = path.read_text().splitlines()
    path.write_text("\n".join(text[:-2]))
    with pytest.raises(ControllerError):
        load_weights(path)


def test_weights_bad_header(tmp_path):
    path = tmp_path / "w.txt"
    path.write_text("nonsense 1 2 3\n")
    with pytest.raises(ControllerError):
        load_weights(path)
