"""Piecewise-linear surrogate of the parameter-to-eigenvalue map.

Each labeled surface is interpolated over the grid points where it is
present: sorted breakpoints with linear interpolation in one parameter
dimension, a Delaunay triangulation with linear interpolation per triangle
in higher dimensions.  Queries where a surface has no coverage (it exited
the window, or sits between presence gaps) evaluate to None.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from eigentrack.eigensolver import SnapshotProvider
from eigentrack.grid import ParamPoint
from eigentrack.propagation import SurfaceLabeling


@dataclass
class _SurfaceData:
    points: list[ParamPoint]
    values: np.ndarray                 # one eigenvalue per sample point
    segments: list[tuple[float, float, float, float]] = field(default_factory=list)
    interpolator: object | None = None   # scipy LinearNDInterpolator (d >= 2)
    point_only: bool = False


@dataclass
class Surrogate:
    dim: int
    box: tuple[tuple[float, float], ...]
    surfaces: dict[int, _SurfaceData]

    def surface_ids(self) -> list[int]:
        return sorted(self.surfaces)

    def samples(self, surface_id: int) -> list[tuple[ParamPoint, float]]:
        data = self.surfaces[surface_id]
        return list(zip(data.points, data.values))


def build_surrogate(labeling: SurfaceLabeling, provider: SnapshotProvider) -> Surrogate:
    """One interpolant per surface over the points where it is present.

    A surface sampled at fewer than two points (or, in two or more
    dimensions, at too few affinely independent points to triangulate) is
    marked point-only and evaluates only at its own samples.
    """
    cfg = provider.cfg
    grid_order = sorted(labeling.labels)
    surfaces: dict[int, _SurfaceData] = {}
    for sid in labeling.surface_ids():
        pts, vals = [], []
        for point in grid_order:
            ids = labeling.labels[point]
            if sid in ids:
                pts.append(point)
                vals.append(float(provider.get(point).eigenvalues[ids.index(sid)]))
        data = _SurfaceData(points=pts, values=np.asarray(vals))
        if cfg.dim == 1:
            _build_1d(data, grid_order)
        else:
            _build_nd(data)
        surfaces[sid] = data
    return Surrogate(dim=cfg.dim, box=cfg.box, surfaces=surfaces)


def _build_1d(data: _SurfaceData, grid_order: list[ParamPoint]) -> None:
    """Linear segments between consecutive present grid points.

    Presence gaps (the surface left the window at an intermediate grid
    point) split the surface into separate runs; the surrogate is undefined
    inside a gap.
    """
    if len(data.points) < 2:
        data.point_only = True
        return
    position = {p: i for i, p in enumerate(grid_order)}
    for (pa, va), (pb, vb) in zip(
        zip(data.points, data.values), zip(data.points[1:], data.values[1:])
    ):
        if position[pb] - position[pa] == 1:  # consecutive in the full grid
            data.segments.append((pa.phys[0], pb.phys[0], va, vb))
    if not data.segments:
        data.point_only = True


def _build_nd(data: _SurfaceData) -> None:
    from scipy.interpolate import LinearNDInterpolator
    from scipy.spatial import Delaunay, QhullError

    if not data.points:
        data.point_only = True
        return
    coords = np.array([p.phys for p in data.points])
    if len(data.points) < coords.shape[1] + 1:
        data.point_only = True
        return
    try:
        tri = Delaunay(coords)
    except (QhullError, ValueError):  # collinear or otherwise degenerate samples
        data.point_only = True
        return
    data.interpolator = LinearNDInterpolator(tri, data.values)


def eval_surrogate(s: Surrogate, surface_id: int, mu) -> float | None:
    """Interpolated eigenvalue of one surface at a physical point.

    Returns None where the surface has no coverage.  Queries outside the
    parameter box raise ValueError; unknown surface identifiers raise
    KeyError.  Exact sample points reproduce their stored value bit for bit.
    """
    if surface_id not in s.surfaces:
        raise KeyError(f"unknown surface id {surface_id}")
    mu = tuple(float(x) for x in mu)
    if len(mu) != s.dim:
        raise ValueError(f"query has dimension {len(mu)}, expected {s.dim}")
    for x, (a, b) in zip(mu, s.box):
        if not a <= x <= b:
            raise ValueError(f"query {mu} is outside the parameter box")
    data = s.surfaces[surface_id]
    for point, value in zip(data.points, data.values):
        if all(x == px for x, px in zip(mu, point.phys)):
            return float(value)
    if data.point_only:
        return None
    if s.dim == 1:
        x = mu[0]
        for xa, xb, va, vb in data.segments:
            if xa <= x <= xb:
                return float(va + (vb - va) * (x - xa) / (xb - xa))
        return None
    out = float(data.interpolator(mu))
    return None if np.isnan(out) else out
