"""Independent reference implementations used as test oracles.

These deliberately share no code with the package: satisfaction is computed
by direct recursion over trace positions (and, for bulk checks, by a
position-indexed dynamic program over a batch of words), not by formula
progression.
"""
from __future__ import annotations

import numpy as np

from reachsynth.ltl import (
    And,
    Atom,
    FalseF,
    Formula,
    Next,
    Not,
    Or,
    Step,
    TrueF,
    Until,
)


def sat_recursive(f: Formula, word: list[frozenset], i: int = 0) -> bool:
    """Textbook finite-trace semantics with strong next.

    Position ``i == len(word)`` denotes the empty suffix, on which only
    ``true`` holds.
    """
    n = len(word)
    match f:
        case TrueF():
            return True
        case FalseF():
            return False
        case Step():
            return i < n
        case Atom(name):
            return i < n and name in word[i]
        case Not(child):
            return i < n and not sat_recursive(child, word, i)
        case And(children):
            return all(sat_recursive(c, word, i) for c in children)
        case Or(children):
            return any(sat_recursive(c, word, i) for c in children)
        case Next(child):
            return i + 1 < n and sat_recursive(child, word, i + 1)
        case Until(left, right):
            for j in range(i, n):
                if sat_recursive(right, word, j):
                    return True
                if not sat_recursive(left, word, j):
                    return False
            return False
    raise TypeError(f)


def sat_batch(f: Formula, words: np.ndarray, lengths: np.ndarray, symbols: list[frozenset]) -> np.ndarray:
    """Vectorised finite-trace satisfaction for a batch of words.

    ``words`` is (n_words, max_len) of symbol indices into ``symbols``;
    ``lengths`` gives each word's true length.  Returns a bool vector of
    satisfaction at position 0.  Independent of the progression machinery:
    each operator is a dynamic program over positions, right to left.
    """
    n_words, max_len = words.shape
    pos = np.arange(max_len)[None, :]
    valid = pos < lengths[:, None]  # position exists in this word

    def table(g: Formula) -> np.ndarray:
        match g:
            case TrueF():
                return np.ones((n_words, max_len), dtype=bool)
            case FalseF():
                return np.zeros((n_words, max_len), dtype=bool)
            case Step():
                return valid.copy()
            case Atom(name):
                has = np.array([name in s for s in symbols])
                return has[words] & valid
            case Not(child):
                return ~table(child) & valid
            case And(children):
                out = np.ones((n_words, max_len), dtype=bool)
                for c in children:
                    out &= table(c)
                return out
            case Or(children):
                out = np.zeros((n_words, max_len), dtype=bool)
                for c in children:
                    out |= table(c)
                return out
            case Next(child):
                t = table(child)
                out = np.zeros((n_words, max_len), dtype=bool)
                out[:, :-1] = t[:, 1:] & valid[:, 1:]
                return out & valid
            case Until(left, right):
                tl, tr = table(left), table(right)
                out = np.zeros((n_words, max_len), dtype=bool)
                out[:, -1] = tr[:, -1]
                for j in range(max_len - 2, -1, -1):
                    out[:, j] = tr[:, j] | (tl[:, j] & out[:, j + 1])
                return out & valid
        raise TypeError(g)

    return table(f)[:, 0]


# -- geometry oracles ---------------------------------------------------------

from itertools import combinations

from scipy.optimize import linprog, minimize


def extreme_points_bruteforce(pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Indices of extreme points by simplex enumeration (Caratheodory):
    a point is interior iff the simplex of some d+1 others contains it."""
    pts = np.asarray(pts, dtype=float)
    n, d = pts.shape
    combos = np.array(list(combinations(range(n), d + 1)))
    contained = np.zeros(n, dtype=bool)
    for s in range(0, len(combos), 20_000):
        cg = combos[s:s + 20_000]
        a = pts[cg[:, 0]]
        edges = np.stack([pts[cg[:, j]] - a for j in range(1, d + 1)], axis=2)
        dets = np.linalg.det(edges)
        good = np.abs(dets) > tol
        if not good.any():
            continue
        inv = np.linalg.inv(edges[good])
        cg, a = cg[good], a[good]
        diff = pts[None, :, :] - a[:, None, :]
        lam = np.einsum("mij,mnj->mni", inv, diff)
        ok = (lam >= -tol).all(axis=2) & (lam.sum(axis=2) <= 1 + tol)
        corner = (cg[:, :, None] == np.arange(n)[None, None, :]).any(axis=1)
        contained |= (ok & ~corner).any(axis=0)
    return np.flatnonzero(~contained)


def point_in_hull_lp(p: np.ndarray, verts: np.ndarray, tol: float = 1e-9) -> bool:
    """LP feasibility: p is a convex combination of verts."""
    k = len(verts)
    a_eq = np.vstack([verts.T, np.ones(k)])
    b_eq = np.concatenate([p, [1.0]])
    res = linprog(np.zeros(k), A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * k,
                  method="highs")
    return bool(res.status == 0)


def polytope_box_distance_qp(verts: np.ndarray, lo, hi) -> float:
    """Reference distance between conv(verts) and a box, by direct QP."""
    verts = np.asarray(verts, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    k, d = verts.shape

    def objective(z):
        lam, b = z[:k], z[k:]
        diff = verts.T @ lam - b
        return float(diff @ diff)

    def grad(z):
        lam, b = z[:k], z[k:]
        diff = verts.T @ lam - b
        return np.concatenate([2 * verts @ diff, -2 * diff])

    z0 = np.concatenate([np.full(k, 1.0 / k), (lo + hi) / 2])
    import warnings

    with warnings.catch_warnings():
        # SLSQP warns when its line search pokes outside the bounds
        warnings.simplefilter("ignore", RuntimeWarning)
        res = _run_slsqp(objective, grad, z0, k, d, lo, hi)
    return float(np.sqrt(max(res.fun, 0.0)))


def _run_slsqp(objective, grad, z0, k, d, lo, hi):
    return minimize(
        objective, z0, jac=grad, method="SLSQP",
        bounds=[(0.0, 1.0)] * k + list(zip(lo, hi)),
        constraints=[{"type": "eq", "fun": lambda z: z[:k].sum() - 1.0,
                      "jac": lambda z: np.concatenate([np.ones(k), np.zeros(d)])}],
        options={"maxiter": 400, "ftol": 1e-14},
    )
