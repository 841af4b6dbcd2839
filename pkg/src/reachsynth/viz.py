"""Plot and table emission: reach-tube CSVs and workspace SVGs.

SVG output is hand-rolled so byte-identical reruns need nothing beyond the
library itself.  Tubes are drawn in the plane of the first two state
dimensions: sets still outside the step's target are yellow, the set that
lands inside is green, and a set that touched an avoid region is red.
"""
from __future__ import annotations

import numpy as np

from .geometry import convex_hull
from .reach import ReachTube
from .workspace import Region, Workspace

_COLOURS = {"outside": "#e8c547", "inside": "#4caf50", "hit": "#e53935"}


def export_tube_csv(tube: ReachTube, path) -> None:
    """Rows ``t, vertex_index, x1..xd`` with full-precision decimals."""
    lines = []
    dim = tube.steps[0].vertices.shape[1]
    header = "t,vertex_index," + ",".join(f"x{i + 1}" for i in range(dim))
    lines.append(header)
    for step in tube.steps:
        for i, v in enumerate(step.vertices):
            lines.append(f"{step.t},{i}," + ",".join(f"{c:.17g}" for c in v))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _polygon_2d(vertices: np.ndarray) -> np.ndarray:
    flat = vertices[:, :2]
    if len(flat) < 3:
        return flat
    hull = convex_hull(flat)
    return hull.points


def _svg_poly(points: np.ndarray, fill: str, opacity: float, sx, sy) -> str:
    coords = " ".join(f"{sx(p[0]):.2f},{sy(p[1]):.2f}" for p in points)
    return (f'<polygon points="{coords}" fill="{fill}" fill-opacity="{opacity}" '
            f'stroke="{fill}" stroke-width="1"/>')


def export_svg(tubes, workspace: Workspace, path, statuses=None,
               size: int = 640) -> None:
    """Planar picture of the workspace regions plus every tube step.

    ``statuses`` optionally maps (tube_index, t) to 'outside' | 'inside' |
    'hit'; unlisted steps default to 'outside'.
    """
    statuses = statuses or {}
    x0, y0 = workspace.state_box.lo[:2]
    x1, y1 = workspace.state_box.hi[:2]
    margin = 8.0
    scale = (size - 2 * margin) / max(x1 - x0, y1 - y0)

    def sx(x):
        return margin + (x - x0) * scale

    def sy(y):
        return size - margin - (y - y0) * scale

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
    ]
    for r in workspace.regions:
        colour = "#b71c1c" if r.kind == "obstacle" else "#1b5e20"
        rx, ry = sx(r.lo[0]), sy(r.hi[1])
        rw, rh = (r.hi[0] - r.lo[0]) * scale, (r.hi[1] - r.lo[1]) * scale
        parts.append(
            f'<rect x="{rx:.2f}" y="{ry:.2f}" width="{rw:.2f}" height="{rh:.2f}" '
            f'fill="{colour}" fill-opacity="0.25" stroke="{colour}"/>')
        parts.append(
            f'<text x="{rx + 3:.2f}" y="{ry + 12:.2f}" font-size="11" '
            f'fill="{colour}">{r.name}</text>')
    for k, tube in enumerate(tubes):
        for step in tube.steps:
            status = statuses.get((k, step.t), "outside")
            poly = _polygon_2d(step.vertices)
            if len(poly) >= 3:
                parts.append(_svg_poly(poly, _COLOURS[status], 0.45, sx, sy))
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def step_statuses(tube: ReachTube, target: Region, stay_avoid) -> dict:
    """Colour classification for one tube against its edge's regions."""
    from .reach import hull_avoids_region, hull_inside_region

    out = {}
    for step in tube.steps:
        if hull_inside_region(step, target):
            out[step.t] = "inside"
        elif any(not hull_avoids_region(step, r) for r in stay_avoid):
            out[step.t] = "hit"
        else:
            out[step.t] = "outside"
    return out
