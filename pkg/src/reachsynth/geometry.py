"""Convex geometry kernels: hulls, point-polytope distance, GJK.

Hulls are exact over their input samples: returned vertices are the extreme
points (no interior or face-interior points retained).  2D uses the
monotone chain; 3D an incremental insertion with conflict lists and
numpy-vectorised visibility tests.  Affinely dependent inputs fall back to
a dimension-reduced hull and set ``degenerate``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_EPS_REL = 1e-12


class GeometryError(ValueError):
    pass


@dataclass
class Hull:
    """Convex hull of a point sample.

    ``points`` holds only extreme points.  In 2D they are ordered counter
    clockwise.  Non-degenerate 3D hulls carry a triangle list with outward
    unit normals and offsets; degenerate hulls (collinear 2D input, or
    coplanar/collinear 3D input) carry ordered boundary vertices only.
    """

    dim: int
    points: np.ndarray
    faces: np.ndarray | None = None
    normals: np.ndarray | None = None
    offsets: np.ndarray | None = None
    degenerate: bool = False

    @property
    def vertex_count(self) -> int:
        return len(self.points)

    def scale(self) -> float:
        if len(self.points) == 1:
            return 1.0
        span = self.points.max(axis=0) - self.points.min(axis=0)
        return float(max(span.max(), 1e-30))


def convex_hull(points) -> Hull:
    """Exact convex hull of a 2D or 3D point sample."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise GeometryError("points must be (n, 2) or (n, 3)")
    if len(pts) < 2:
        if len(pts) == 0:
            raise GeometryError("need at least one point")
        return Hull(dim=pts.shape[1], points=pts, degenerate=True)
    if pts.shape[1] == 2:
        return _hull_2d(pts)
    return _hull_3d(pts)


# -- 2D: monotone chain -------------------------------------------------------

def _cross2(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _hull_2d(pts: np.ndarray) -> Hull:
    span = pts.max(axis=0) - pts.min(axis=0)
    eps = _EPS_REL * max(float(span.max()), 1e-30)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    p = pts[order]

    def chain(seq):
        out: list[np.ndarray] = []
        for q in seq:
            while len(out) >= 2 and _cross2(out[-2], out[-1], q) <= eps:
                out.pop()
            out.append(q)
        return out

    lower = chain(p)
    upper = chain(p[::-1])
    verts = lower[:-1] + upper[:-1]
    if len(verts) < 3:
        # collinear input: keep the two extreme endpoints
        return Hull(dim=2, points=np.array([p[0], p[-1]]), degenerate=True)
    return Hull(dim=2, points=np.array(verts), degenerate=False)


# -- 3D: incremental insertion with conflict lists ----------------------------

def _initial_simplex(pts: np.ndarray, eps: float):
    n = len(pts)
    lo = pts.argmin(axis=0)
    hi = pts.argmax(axis=0)
    cand = list(dict.fromkeys([*lo, *hi]))
    best = max(
        ((i, j) for i in cand for j in cand if i != j),
        key=lambda ij: np.sum((pts[ij[0]] - pts[ij[1]]) ** 2),
        default=None,
    )
    if best is None:
        return None
    i, j = best
    if np.linalg.norm(pts[i] - pts[j]) <= eps:
        return None
    ab = pts[j] - pts[i]
    areas = np.linalg.norm(np.cross(pts - pts[i], ab), axis=1)
    k = int(areas.argmax())
    if areas[k] <= eps * np.linalg.norm(ab):
        return None
    normal = np.cross(ab, pts[k] - pts[i])
    heights = np.abs((pts - pts[i]) @ normal) / np.linalg.norm(normal)
    m = int(heights.argmax())
    if heights[m] <= eps:
        return None
    return i, j, k, m


def _face_geometry(pts, tri, interior):
    a, b, c = pts[tri[0]], pts[tri[1]], pts[tri[2]]
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n)
    if norm == 0.0:
        raise GeometryError("degenerate face")
    n = n / norm
    off = float(n @ a)
    if interior @ n > off:
        n, off = -n, -off
        tri = (tri[0], tri[2], tri[1])
    return tri, n, off


def _hull_3d(pts: np.ndarray) -> Hull:
    span = pts.max(axis=0) - pts.min(axis=0)
    scale = max(float(span.max()), 1e-30)
    eps = _EPS_REL * scale
    seed = _initial_simplex(pts, eps)
    if seed is None:
        return _degenerate_3d(pts, eps)

    interior = pts[list(seed)].mean(axis=0)
    faces: dict[int, tuple[int, int, int]] = {}
    normals: dict[int, np.ndarray] = {}
    offsets: dict[int, float] = {}
    conflicts: dict[int, np.ndarray] = {}
    next_id = 0

    def add_face(tri, candidates):
        nonlocal next_id
        tri, n, off = _face_geometry(pts, tri, interior)
        fid = next_id
        next_id += 1
        faces[fid] = tri
        normals[fid] = n
        offsets[fid] = off
        if len(candidates):
            d = pts[candidates] @ n - off
            outside = candidates[d > eps]
            conflicts[fid] = outside
        else:
            conflicts[fid] = candidates
        return fid

    i, j, k, m = seed
    all_idx = np.arange(len(pts))
    initial = [(i, j, k), (i, j, m), (i, k, m), (j, k, m)]
    remaining = all_idx[~np.isin(all_idx, list(seed))]
    for tri in initial:
        add_face(tri, remaining)

    while True:
        fid = next((f for f, c in conflicts.items() if len(c)), None)
        if fid is None:
            break
        cand = conflicts[fid]
        d = pts[cand] @ normals[fid] - offsets[fid]
        p_idx = int(cand[d.argmax()])
        p = pts[p_idx]

        # visible region grown from the seeding face
        edge_map: dict[tuple[int, int], list[int]] = {}
        for f, tri in faces.items():
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                edge_map.setdefault((min(a, b), max(a, b)), []).append(f)
        visible = {fid}
        stack = [fid]
        while stack:
            f = stack.pop()
            tri = faces[f]
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                for g in edge_map[(min(a, b), max(a, b))]:
                    if g not in visible and p @ normals[g] - offsets[g] > eps:
                        visible.add(g)
                        stack.append(g)

        horizon = []
        for f in visible:
            tri = faces[f]
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (min(a, b), max(a, b))
                others = [g for g in edge_map[key] if g not in visible]
                if others:
                    horizon.append(key)

        pool = np.unique(np.concatenate([conflicts[f] for f in visible]))
        pool = pool[pool != p_idx]
        for f in visible:
            del faces[f], normals[f], offsets[f], conflicts[f]
        for a, b in horizon:
            add_face((a, b, p_idx), pool)

    used = sorted({v for tri in faces.values() for v in tri})
    remap = {v: idx for idx, v in enumerate(used)}
    tri_arr = np.array([[remap[v] for v in faces[f]] for f in sorted(faces)], dtype=int)
    nrm = np.array([normals[f] for f in sorted(faces)])
    off = np.array([offsets[f] for f in sorted(faces)])
    return Hull(dim=3, points=pts[used], faces=tri_arr, normals=nrm, offsets=off,
                degenerate=False)


def _degenerate_3d(pts: np.ndarray, eps: float) -> Hull:
    """Coplanar or collinear 3D input: hull in the best-fit affine subspace."""
    centre = pts.mean(axis=0)
    u, s, vt = np.linalg.svd(pts - centre, full_matrices=False)
    rank = int(np.sum(s > eps * max(1.0, s[0] if len(s) else 1.0)))
    if rank <= 1:
        proj = (pts - centre) @ vt[0]
        ends = pts[[int(proj.argmin()), int(proj.argmax())]]
        return Hull(dim=3, points=np.unique(ends, axis=0), degenerate=True)
    plane = (pts - centre) @ vt[:2].T
    flat = _hull_2d(np.unique(plane, axis=0))
    back = flat.points @ vt[:2] + centre
    return Hull(dim=3, points=back, degenerate=True)


# -- point-to-hull distance ----------------------------------------------------

def _segment_distances(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from points (n,d) to segments (m,d)-(m,d): (n, m)."""
    ab = b - a  # (m, d)
    denom = np.einsum("md,md->m", ab, ab)
    denom = np.where(denom == 0.0, 1.0, denom)
    ap = p[:, None, :] - a[None, :, :]  # (n, m, d)
    t = np.clip(np.einsum("nmd,md->nm", ap, ab) / denom, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    return np.linalg.norm(p[:, None, :] - closest, axis=2)


def _triangle_distances(p: np.ndarray, tri_pts: np.ndarray) -> np.ndarray:
    """Distances from points (n,3) to triangles (m,3,3): (n, m)."""
    a, b, c = tri_pts[:, 0], tri_pts[:, 1], tri_pts[:, 2]
    ab, ac = b - a, c - a
    n_ = len(p)
    m = len(tri_pts)
    ap = p[:, None, :] - a[None]
    d1 = np.einsum("md,nmd->nm", ab, ap)
    d2 = np.einsum("md,nmd->nm", ac, ap)
    bp = p[:, None, :] - b[None]
    d3 = np.einsum("md,nmd->nm", ab, bp)
    d4 = np.einsum("md,nmd->nm", ac, bp)
    cp = p[:, None, :] - c[None]
    d5 = np.einsum("md,nmd->nm", ab, cp)
    d6 = np.einsum("md,nmd->nm", ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    closest = np.empty((n_, m, 3))
    done = np.zeros((n_, m), dtype=bool)

    def put(mask, value):
        nonlocal done
        mask = mask & ~done
        closest[mask] = value[mask] if value.ndim == 3 else value
        done = done | mask

    put((d1 <= 0) & (d2 <= 0), np.broadcast_to(a[None], (n_, m, 3)))
    put((d3 >= 0) & (d4 <= d3), np.broadcast_to(b[None], (n_, m, 3)))
    v_ab = np.where(d1 - d3 != 0.0, d1 / np.where(d1 - d3 == 0.0, 1.0, d1 - d3), 0.0)
    put((vc <= 0) & (d1 >= 0) & (d3 <= 0), a[None] + v_ab[:, :, None] * ab[None])
    put((d6 >= 0) & (d5 <= d6), np.broadcast_to(c[None], (n_, m, 3)))
    v_ac = np.where(d2 - d6 != 0.0, d2 / np.where(d2 - d6 == 0.0, 1.0, d2 - d6), 0.0)
    put((vb <= 0) & (d2 >= 0) & (d6 <= 0), a[None] + v_ac[:, :, None] * ac[None])
    den_bc = (d4 - d3) + (d5 - d6)
    v_bc = np.where(den_bc != 0.0, (d4 - d3) / np.where(den_bc == 0.0, 1.0, den_bc), 0.0)
    put((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0),
        b[None] + v_bc[:, :, None] * (c - b)[None])
    denom = va + vb + vc
    denom = np.where(denom == 0.0, 1.0, denom)
    v = vb / denom
    w = vc / denom
    interior = a[None] + v[:, :, None] * ab[None] + w[:, :, None] * ac[None]
    closest[~done] = interior[~done]
    return np.linalg.norm(p[:, None, :] - closest, axis=2)


def point_hull_distances(hull: Hull, points: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Exact Euclidean distance from each point to the hull (0 inside)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(points)
    out = np.empty(n)
    if hull.vertex_count == 1:
        return np.linalg.norm(points - hull.points[0], axis=1)
    if hull.dim == 2 and not hull.degenerate:
        return _poly_2d_distances(hull.points, points)
    if hull.vertex_count == 2:
        return _segment_distances(points, hull.points[:1], hull.points[1:])[:, 0]
    if hull.dim == 3 and hull.degenerate:
        # planar polygon: fan triangulation of the ordered boundary
        v = hull.points
        tris = np.array([[v[0], v[i], v[i + 1]] for i in range(1, len(v) - 1)])
        for s in range(0, n, chunk):
            out[s:s + chunk] = _triangle_distances(points[s:s + chunk], tris).min(axis=1)
        return out
    # full-dimensional 3D hull
    signed = points @ hull.normals.T - hull.offsets
    worst = signed.max(axis=1)
    inside = worst <= 0.0
    out[inside] = 0.0
    idx = np.flatnonzero(~inside)
    if len(idx):
        tris = hull.points[hull.faces]
        for s in range(0, len(idx), chunk):
            sel = idx[s:s + chunk]
            out[sel] = _triangle_distances(points[sel], tris).min(axis=1)
    return out


def within_distance(hull: Hull, points: np.ndarray, eps: float,
                    chunk: int = 2048) -> np.ndarray:
    """Boolean mask: distance(point, hull) <= eps.

    Banded screening keeps the exact triangle-mesh work to the points whose
    facet-plane lower bound and nearest-vertex upper bound disagree about
    the verdict.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(points)
    if hull.dim == 3 and not hull.degenerate:
        signed = points @ hull.normals.T - hull.offsets
        worst = signed.max(axis=1)
        out = np.zeros(n, dtype=bool)
        out[worst <= 0.0] = True
        band = np.flatnonzero(~out & (worst <= eps))
        if len(band):
            vert_d2 = ((points[band, None, :] - hull.points[None]) ** 2).sum(axis=2)
            near = np.sqrt(vert_d2.min(axis=1)) <= eps
            out[band[near]] = True
            rest = band[~near]
            if len(rest):
                out[rest] = point_hull_distances(hull, points[rest], chunk) <= eps
        return out
    return point_hull_distances(hull, points, chunk) <= eps


def hull_of_samples(points: np.ndarray, prefilter_above: int = 6000) -> Hull:
    """Exact convex hull tuned for large samples: a hull of a coarse subset
    first discards points strictly inside it (they cannot be extreme in the
    full set), then the exact hull runs on the surviving shell."""
    pts = np.asarray(points, dtype=float)
    if len(pts) <= prefilter_above or pts.shape[1] != 3:
        return convex_hull(pts)
    stride = max(len(pts) // 2048, 1)
    coarse = convex_hull(pts[::stride])
    if coarse.degenerate:
        return convex_hull(pts)
    signed = pts @ coarse.normals.T - coarse.offsets
    keep = signed.max(axis=1) > -1e-15
    shell = np.vstack([pts[keep], coarse.points])
    return convex_hull(shell)


def _poly_2d_distances(poly: np.ndarray, points: np.ndarray) -> np.ndarray:
    a = poly
    b = np.roll(poly, -1, axis=0)
    edge = b - a
    # CCW polygon: inside iff left of every edge
    rel = points[:, None, :] - a[None]
    cross = edge[None, :, 0] * rel[:, :, 1] - edge[None, :, 1] * rel[:, :, 0]
    inside = np.all(cross >= 0.0, axis=1)
    out = np.zeros(len(points))
    idx = np.flatnonzero(~inside)
    if len(idx):
        out[idx] = _segment_distances(points[idx], a, b).min(axis=1)
    return out


# -- GJK ------------------------------------------------------------------------

def _closest_on_simplex(w: np.ndarray):
    """Closest point to the origin in the convex hull of up to d+1 points.
    Returns (point, barycentric coefficients, supporting subset indices)."""
    best = None
    k = len(w)
    for mask in range(1, 1 << k):
        idx = [i for i in range(k) if mask >> i & 1]
        sub = w[idx]
        m = len(sub)
        if m == 1:
            lam = np.array([1.0])
        else:
            # minimise |sum lam_i p_i| s.t. sum lam = 1 via normal equations
            d = sub[1:] - sub[0]
            g = d @ d.T
            rhs = -d @ sub[0]
            try:
                t = np.linalg.solve(g, rhs)
            except np.linalg.LinAlgError:
                continue
            lam = np.concatenate([[1.0 - t.sum()], t])
        if np.any(lam < -1e-12):
            continue
        v = lam @ sub
        n2 = float(v @ v)
        if best is None or n2 < best[0] - 1e-18:
            best = (n2, v, lam, idx)
    assert best is not None
    return best[1], best[2], best[3]


def gjk_distance(pa: np.ndarray, pb: np.ndarray, max_iter: int = 128,
                 tol: float = 1e-12) -> float | None:
    """Euclidean distance between the convex hulls of two point clouds.

    Returns 0.0 on overlap and None when the iteration cap is hit (callers
    treat that as 'cannot certify separation').
    """
    pa = np.atleast_2d(np.asarray(pa, dtype=float))
    pb = np.atleast_2d(np.asarray(pb, dtype=float))
    scale = max(1.0, float(np.abs(pa).max()), float(np.abs(pb).max()))

    def support(d):
        ia = int(np.argmax(pa @ d))
        ib = int(np.argmax(pb @ -d))
        return pa[ia] - pb[ib]

    d0 = pa.mean(axis=0) - pb.mean(axis=0)
    if np.linalg.norm(d0) == 0.0:
        d0 = np.zeros(pa.shape[1])
        d0[0] = 1.0
    w = np.array([support(d0)])
    for _ in range(max_iter):
        v, lam, idx = _closest_on_simplex(w)
        vnorm = float(np.linalg.norm(v))
        if vnorm <= tol * scale:
            return 0.0
        s = support(-v)
        improvement = vnorm - (v @ s) / vnorm
        if improvement <= tol * scale:
            return vnorm
        w = np.vstack([w[idx], s])
        if len(w) > pa.shape[1] + 1:
            w = w[-(pa.shape[1] + 1):]
    return None


def box_corners_2d(lo, hi) -> np.ndarray:
    (x0, y0), (x1, y1) = lo, hi
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)
