"""Windowed generalized eigensolves and the per-point snapshot cache.

solve_window returns every eigenvalue of A u = lambda B u inside the window,
in ascending order, with B-orthonormal eigenvectors.  Completeness is
certified by computing the smallest eigenvalues until the largest computed
one strictly exceeds the window top (A and B are SPD, so the spectrum is
positive and bounded below); small problems fall back to a dense solve of
the full spectrum.

Snapshots are cached on disk, one file per grid point, keyed by the exact
dyadic reference coordinates and guarded by a fingerprint of everything that
determines the solve (mesh, coefficient family, window, box).
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from eigentrack.config import RunConfig, eval_coefficient
from eigentrack.fem import Mesh, assemble_mass, assemble_stiffness, build_mesh
from eigentrack.grid import ParamPoint

_V0_SEED = 20230517          # fixed Lanczos start vector: runs must be reproducible
_DENSE_CUTOFF = 200
_RESIDUAL_TOL = 1e-8
_NORM_TOL = 1e-10


class SolverError(RuntimeError):
    """Eigensolver breakdown or an unverifiable window."""


@dataclass(frozen=True)
class Snapshot:
    """Windowed, b-normalized eigenpairs at one parameter point."""

    point: ParamPoint
    eigenvalues: np.ndarray    # (n,), ascending, inside the window
    eigenvectors: np.ndarray   # (N, n), unit b-norm columns
    fingerprint: str

    @property
    def n(self) -> int:
        return len(self.eigenvalues)


def _dense_window(A, B, window):
    w, v = scipy.linalg.eigh(np.asarray(A.todense()), np.asarray(B.todense()))
    keep = (w >= window[0]) & (w <= window[1])
    return w[keep], v[:, keep]


def solve_window(A: sp.spmatrix, B: sp.spmatrix, window: tuple[float, float]):
    """All eigenpairs of A u = lambda B u with lambda in the window.

    Returns (eigenvalues, eigenvectors) with ascending eigenvalues and
    B-orthonormal eigenvector columns; both empty when the window contains
    no eigenvalue.
    """
    lam_min, lam_max = window
    n = A.shape[0]
    if n != B.shape[0]:
        raise ValueError("A and B must have the same dimension")
    if n <= _DENSE_CUTOFF:
        return _dense_window(A, B, window)

    guard = 1e-8 * max(1.0, abs(lam_max))
    rng = np.random.default_rng(_V0_SEED)
    v0 = rng.standard_normal(n)
    k = 16
    while True:
        k_eff = min(k, n - 1)
        try:
            w, v = spla.eigsh(A, k=k_eff, M=B, sigma=0.0, which="LM", v0=v0)
        except Exception as exc:  # ARPACK breakdown
            raise SolverError(f"shift-invert eigensolve failed: {exc}") from exc
        order = np.argsort(w)
        w, v = w[order], v[:, order]
        if w[-1] > lam_max + guard:
            break
        if k_eff == n - 1:
            # cannot certify with the iterative path; fall back to dense
            return _dense_window(A, B, window)
        k *= 2
    keep = (w >= lam_min) & (w <= lam_max)
    return w[keep], v[:, keep]


def b_normalize(vectors: np.ndarray, B: sp.spmatrix) -> np.ndarray:
    if vectors.shape[1] == 0:
        return vectors
    norms = np.sqrt(np.einsum("ij,ij->j", vectors, B @ vectors))
    return vectors / norms


def _check_pairs(A, B, w, v):
    for j in range(len(w)):
        u = v[:, j]
        bn = float(u @ (B @ u))
        if abs(bn - 1.0) > _NORM_TOL:
            raise SolverError(f"eigenvector {j} has b-norm {np.sqrt(bn)}")
        r = A @ u - w[j] * (B @ u)
        denom = np.linalg.norm(A @ u)
        if denom > 0 and np.linalg.norm(r) / denom > _RESIDUAL_TOL:
            raise SolverError(f"eigenpair {j} residual {np.linalg.norm(r) / denom:.2e}")


def config_fingerprint(cfg: RunConfig) -> str:
    payload = json.dumps(
        {
            "mesh_n": cfg.mesh_n,
            "box": cfg.box,
            "window": cfg.window,
            "coefficient": cfg.coefficient.sources,
            "dim": cfg.dim,
            "format": 1,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


class SnapshotProvider:
    """Computes, caches and hands out snapshots for one configuration.

    Pure per point: the same (config, point) always yields the same snapshot,
    whether freshly solved or loaded from the cache.  Cache writes are atomic,
    so concurrent workers on distinct points are safe.
    """

    def __init__(self, cfg: RunConfig, cache_dir: str | Path | None = None):
        self.cfg = cfg
        self.mesh: Mesh = build_mesh(cfg.mesh_n)
        self.mass = assemble_mass(self.mesh)
        self.fingerprint = config_fingerprint(cfg)
        self.cache_dir = Path(cache_dir if cache_dir is not None else cfg.cache_dir)
        self._memory: dict[ParamPoint, Snapshot] = {}

    # -- cache ------------------------------------------------------------

    def _path(self, point: ParamPoint) -> Path:
        return self.cache_dir / f"snap_{point.key()}.npz"

    def _load(self, point: ParamPoint) -> Snapshot | None:
        path = self._path(point)
        if not path.exists():
            return None
        try:
            with np.load(path, allow_pickle=False) as data:
                fingerprint = str(data["fingerprint"])
                if fingerprint != self.fingerprint:
                    warnings.warn(
                        f"snapshot cache {path} has fingerprint {fingerprint}, "
                        f"expected {self.fingerprint}; recomputing"
                    )
                    return None
                return Snapshot(
                    point=point,
                    eigenvalues=data["eigenvalues"],
                    eigenvectors=data["eigenvectors"],
                    fingerprint=fingerprint,
                )
        except (OSError, ValueError, KeyError) as exc:
            warnings.warn(f"unreadable snapshot cache {path} ({exc}); recomputing")
            return None

    def _store(self, snap: Snapshot) -> None:
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        path = self._path(snap.point)
        fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                np.savez(
                    fh,
                    eigenvalues=snap.eigenvalues,
                    eigenvectors=snap.eigenvectors,
                    fingerprint=np.str_(snap.fingerprint),
                )
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    # -- solving ----------------------------------------------------------

    def _compute(self, point: ParamPoint) -> Snapshot:
        cmat = eval_coefficient(self.cfg.coefficient, point.phys)
        A = assemble_stiffness(self.mesh, cmat)
        w, v = solve_window(A, self.mass, self.cfg.window)
        v = b_normalize(v, self.mass)
        _check_pairs(A, self.mass, w, v)
        return Snapshot(
            point=point, eigenvalues=w, eigenvectors=v, fingerprint=self.fingerprint
        )

    def get(self, point: ParamPoint) -> Snapshot:
        snap = self._memory.get(point)
        if snap is not None:
            return snap
        snap = self._load(point)
        if snap is None:
            snap = self._compute(point)
            self._store(snap)
        self._memory[point] = snap
        return snap

    def ensure(self, points, jobs: int = 1) -> None:
        """Populate the cache for many points, optionally in parallel."""
        missing = []
        for p in sorted(set(points)):
            if p in self._memory:
                continue
            snap = self._load(p)
            if snap is None:
                missing.append(p)
            else:
                self._memory[p] = snap
        if not missing:
            return
        if jobs <= 1 or len(missing) == 1:
            for p in missing:
                self.get(p)
            return
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_compute_and_cache, self.cfg, str(self.cache_dir), p)
                for p in missing
            ]
            for fut in futures:
                fut.result()


_WORKER_PROVIDERS: dict[tuple[str, str], SnapshotProvider] = {}


def _compute_and_cache(cfg: RunConfig, cache_dir: str, point: ParamPoint) -> None:
    # reuse one provider per (config, cache) within each worker process so
    # the mesh and mass matrix are assembled once, not per point
    key = (config_fingerprint(cfg), cache_dir)
    provider = _WORKER_PROVIDERS.get(key)
    if provider is None:
        provider = _WORKER_PROVIDERS.setdefault(key, SnapshotProvider(cfg, cache_dir))
    provider.get(point)


def snapshot(cfg: RunConfig, mesh: Mesh, point: ParamPoint) -> Snapshot:
    """One-shot convenience wrapper around SnapshotProvider."""
    if mesh.n != cfg.mesh_n:
        raise ValueError(f"mesh has {mesh.n} nodes per side, config says {cfg.mesh_n}")
    return SnapshotProvider(cfg).get(point)
